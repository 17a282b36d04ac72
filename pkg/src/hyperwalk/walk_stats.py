"""Sample paths, drift, entropy and ray tracking."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import floor, log, sqrt

import numpy as np

from .errors import BudgetExceeded, ModelError
from .green import solve_tree_first_passage
from .group_model import DEFAULT_BUDGET, Element, geodesic_prefixes
from .walker import TreeWalker, chunk_rngs


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    se: float
    n: int
    method: str

    def __post_init__(self):
        if self.se < 0:
            raise ValueError("standard error must be non-negative")

    def within(self, value, k=3.0):
        return abs(self.mean - value) <= k * self.se

    def __str__(self):
        return f"{self.mean:.6f} +/- {self.se:.6f} (n={self.n}, {self.method})"


def _mean_se(samples, method):
    a = np.asarray(samples, dtype=float)
    se = float(a.std(ddof=1) / sqrt(len(a))) if len(a) > 1 else 0.0
    return EstimateWithError(float(a.mean()) if len(a) else 0.0, se, len(a), method)


@dataclass
class Trajectory:
    seed: object
    elements: list
    increments: list = field(default_factory=list)

    @property
    def steps(self):
        return len(self.elements) - 1

    @property
    def final(self):
        return self.elements[-1]

    @classmethod
    def from_words(cls, model, words, seed=None):
        """Trajectory through the given normal forms (increments recomputed)."""
        elems = [Element("", model)] + [model.reduce(w) for w in words]
        incs = [model.multiply(model.inverse(a), b).word for a, b in zip(elems, elems[1:])]
        return cls(seed, elems, incs)


def simulate(mu, steps, seed=0):
    """One sample path x_0 = 1, ..., x_steps, reproducible from ``seed``."""
    if steps < 0:
        raise ValueError("steps must be non-negative")
    model = mu.model
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(mu.support), size=steps, p=mu.probs) if steps else []
    words = [x.word for x in mu.support]
    x = Element("", model)
    elems, incs = [x], []
    for k in picks:
        w = words[k]
        x = model.multiply_word(x, w)
        elems.append(x)
        incs.append(w)
    return Trajectory(seed, elems, incs)


@dataclass
class WalkSample:
    """End-point statistics of independent replicas (one row per replica)."""

    steps: int
    lengths: np.ndarray
    log_first_passage: np.ndarray | None

    def drift(self):
        return _mean_se(self.lengths / self.steps, "replica mean of |x_N|/N")

    def green_speed(self):
        if self.log_first_passage is None:
            raise ModelError("Green evaluation unavailable for this model")
        return _mean_se(-self.log_first_passage / self.steps, "replica mean of -log F(1,x_N)/N")


def sample_endpoints(mu, steps, replicas, seed=0, green_speed=True):
    """Run ``replicas`` independent walks of ``steps`` steps and record |x_N| and log F(1, x_N)."""
    if steps < 1 or replicas < 1:
        raise ValueError("steps and replicas must be >= 1")
    model = mu.model
    table = None
    if green_speed:
        if not (model.is_tree_like and mu.is_nearest_neighbour):
            raise ModelError("Green-speed entropy needs exact Green values "
                             "(tree-like model, nearest-neighbour steps)")
        table = solve_tree_first_passage(model, mu)
    lengths, logs = [], []
    if model.is_tree_like:
        for size, rng in chunk_rngs(seed, replicas):
            w = TreeWalker(model, mu, size, steps * mu.reach,
                           log_f=table.log_values if table else None)
            for _ in range(steps):
                w.step(rng)
            lengths.append(w.depth.copy())
            if table:
                logs.append(w.log_f.copy())
    else:
        for size, rng in chunk_rngs(seed, replicas):
            for child in rng.spawn(size):
                lengths.append([len(simulate(mu, steps, child).final.word)])
    lengths = np.concatenate(lengths).astype(float)
    return WalkSample(steps, lengths, np.concatenate(logs) if table else None)


def estimate_drift(mu, steps, replicas, seed=0):
    """Rate of escape l from the mean of |x_N|/N over replicas."""
    return sample_endpoints(mu, steps, replicas, seed, green_speed=False).drift()


def estimate_entropy_green_speed(mu, steps, replicas, seed=0):
    """Entropy h as the Green speed, mean of -log F(1, x_N)/N."""
    if steps == 0:
        return EstimateWithError(0.0, 0.0, replicas, "green speed")
    return sample_endpoints(mu, steps, replicas, seed).green_speed()


def convolution_powers(mu, n_max, budget=DEFAULT_BUDGET):
    """Exact mu^{*n} for n = 1..n_max as dicts word -> probability."""
    model = mu.model
    current = {"": 1.0}
    out = []
    for _ in range(n_max):
        nxt = {}
        for w, p in current.items():
            x = Element(w, model)
            for s, q in zip(mu.support, mu.probs):
                y = model.multiply(x, s).word
                nxt[y] = nxt.get(y, 0.0) + p * q
        if len(nxt) > budget:
            raise BudgetExceeded(f"convolution support exceeded budget of {budget}")
        out.append(nxt)
        current = nxt
    return out


def shannon(dist):
    p = np.fromiter(dist.values(), dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def estimate_entropy_convolution(mu, n_max, budget=DEFAULT_BUDGET):
    """H_n / n for n = 1..n_max from exact convolution powers."""
    return [shannon(d) / (n + 1) for n, d in enumerate(convolution_powers(mu, n_max, budget))]


@dataclass
class RayTracking:
    ray: list
    defect: float
    drift: float


def ray_tracking(traj):
    """Geodesic prefixes of the end point as a ray proxy, with the tracking defect.

    defect = max_n d(x_n, gamma(floor(l n))) / N, with l = |x_N| / N.
    """
    final = traj.final
    n_steps = traj.steps
    if n_steps == 0 or len(final.word) == 0:
        raise ValueError("final position is the identity; no ray to track")
    model = final.model
    ray = geodesic_prefixes(final)
    ell = len(final.word) / n_steps
    end = final.word
    worst = 0
    for n, x in enumerate(traj.elements):
        k = min(floor(ell * n), len(end))
        worst = max(worst, model.word_distance(x.word, end[:k]))
    return RayTracking(ray, worst / n_steps, ell)


def fundamental_gap(sample, v):
    """Paired per-replica estimate of h - l v."""
    diff = -sample.log_first_passage / sample.steps - v * sample.lengths / sample.steps
    return _mean_se(diff, "replica mean of h_i - v l_i")
