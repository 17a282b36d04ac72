"""Boundary measures on cones: harmonic measure, mu_theta surrogates, Gibbs ratios.

Cones are indexed by normal forms; on tree-like models the shadow S(x, 0)
is exactly the set of rays through x.  A :class:`ShadowMeasure` stores the
mass of every cone of depth <= ``depth``.
"""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from math import exp, log

import numpy as np

from .errors import BudgetExceeded, ModelError
from .group_model import (DEFAULT_BUDGET, Element, POP, PUSH, ShadowSpec, gromov_product,
                          shadow_contains, sphere_words)
from .walker import TreeWalker, chunk_rngs


def blocked_letters(model, letter):
    """Letters that cannot start the continuation of a ray ending a word in ``letter``."""
    order = model.factor_order(letter)
    if order == 0:
        return (model.inverse_letter(letter),)
    f = model.factor(letter)
    return tuple(s for s in model.alphabet if model.factor(s) == f)


def first_letter_masses(table):
    """nu(cone(s)) for every generator s, from xi_u + F_u sum_{v blocked(u)} xi_v = F_u."""
    model = table.model
    letters = list(model.alphabet)
    idx = {s: i for i, s in enumerate(letters)}
    n = len(letters)
    A = np.eye(n)
    b = np.empty(n)
    for s in letters:
        i = idx[s]
        for v in blocked_letters(model, s):
            A[i, idx[v]] += table.values[s]
        b[i] = table.values[s]
    xi = np.linalg.solve(A, b)
    return {s: float(xi[idx[s]]) for s in letters}


@dataclass
class ShadowMeasure:
    model: object
    depth: int
    masses: dict            # word -> mass, every cone of depth <= depth ('' is the whole boundary)
    method: str
    residual: float         # |sum of depth-`depth` masses - 1|
    errors: dict = field(default_factory=dict)

    def __call__(self, x):
        w = x.word if isinstance(x, Element) else x
        if len(w) > self.depth:
            raise ValueError(f"cone {w} deeper than the stored depth {self.depth}")
        return self.masses.get(w, 0.0)

    def sphere(self, m):
        return {w: v for w, v in self.masses.items() if len(w) == m}


def _all_cones(model, depth):
    out = [""]
    layer = [""]
    for _ in range(depth):
        layer = [w + u for w in layer for u in model.next_letters(w[-1] if w else "")]
        out.extend(layer)
    return out


def _finish(model, depth, masses, method, errors=None):
    total = sum(v for w, v in masses.items() if len(w) == depth)
    return ShadowMeasure(model, depth, masses, method, abs(total - 1.0), errors or {})


def exact_harmonic_measure(table, depth):
    """nu(cone x) = F(1, x) (1 - sum_{u blocked(last x)} nu(cone u)) for |x| <= depth."""
    model = table.model
    if not model.is_tree_like:
        raise ModelError("exact harmonic measure needs a tree-like model")
    xi = first_letter_masses(table)
    tail = {s: 1.0 - sum(xi[v] for v in blocked_letters(model, s)) for s in model.alphabet}
    masses = {"": 1.0}
    for w in _all_cones(model, depth)[1:]:
        masses[w] = table.first_passage(w) * tail[w[-1]]
    return _finish(model, depth, masses, "exact-tree")


def monte_carlo_harmonic_measure(mu, depth, trials, seed=0, buffer=20, max_steps=None):
    """Cone frequencies of walks stopped when they first reach distance depth + buffer."""
    model = mu.model
    if not model.is_tree_like:
        raise ModelError("Monte Carlo cone sampling needs a tree-like model")
    stop = depth + buffer
    max_steps = max_steps or 200 * stop
    counts = {}
    done = 0
    for size, rng in chunk_rngs(seed, trials):
        w = TreeWalker(model, mu, size, stop)
        active = np.arange(size)
        for _ in range(max_steps):
            if len(active) == 0:
                break
            w.step(rng, active)
            finished = w.depth[active] >= stop
            for i in active[finished]:
                key = w.word(i)[:depth]
                counts[key] = counts.get(key, 0) + 1
            done += int(finished.sum())
            active = active[~finished]
    if done == 0:
        raise BudgetExceeded("no walk reached the stopping radius")
    masses = {"": 1.0}
    errors = {}
    for w in _all_cones(model, depth)[1:]:
        c = 0
        if len(w) == depth:
            c = counts.get(w, 0)
        masses[w] = c
    # aggregate deeper counts up the tree
    for w in sorted((w for w in masses if w and len(w) < depth), key=len, reverse=True):
        masses[w] = sum(masses[w + u] for u in model.next_letters(w[-1]))
    for w in list(masses):
        if w:
            p = masses[w] / done
            masses[w] = p
            errors[w] = 1.96 * (p * (1 - p) / done) ** 0.5
    return _finish(model, depth, masses, "monte-carlo", errors)


def harmonic_shadow_mass(x, mu, method="exact-tree", trials=100_000, seed=0, buffer=20,
                         table=None):
    """(mass, error) of the cone over x under the harmonic measure."""
    if len(x.word) == 0:
        return 1.0, 0.0
    if method == "exact-tree":
        from .green import solve_tree_first_passage
        table = table or solve_tree_first_passage(mu.model, mu)
        xi = first_letter_masses(table)
        tail = 1.0 - sum(xi[v] for v in blocked_letters(mu.model, x.word[-1]))
        return table.first_passage(x) * tail, 0.0
    if method == "monte-carlo":
        m = monte_carlo_harmonic_measure(mu, len(x.word), trials, seed, buffer)
        return m(x), m.errors.get(x.word, 0.0)
    raise ValueError(f"unknown method {method!r}")


# ------------------------------------------------------------ mu_theta surrogate
class SphereWeights:
    """Normalized weights G(1, y)^theta on the sphere S_n, for cone sums."""

    def __init__(self, green, theta, n, budget=DEFAULT_BUDGET):
        model = green.model
        words = sphere_words(model, n, budget=budget)
        logs = theta * np.asarray(green.log_green_many(words))
        order = np.argsort(np.array(words, dtype=object)) if words else np.zeros(0, int)
        self.words = [words[i] for i in order]
        logs = logs[order]
        w = np.exp(logs - logs.max())
        w /= w.sum()
        self.cum = np.concatenate([[0.0], np.cumsum(w)])
        self.weights = w
        self.model, self.theta, self.n = model, theta, n

    def cone_mass(self, prefix):
        lo = bisect_left(self.words, prefix)
        hi = bisect_left(self.words, prefix + "\x7f")
        return float(self.cum[hi] - self.cum[lo])

    def shadow_mass(self, spec):
        x = spec.apex
        if len(x.word) > self.n:
            raise ValueError(f"|x| = {len(x.word)} exceeds sphere radius {self.n}")
        if spec.radius == 0 and self.model.is_tree_like:
            return self.cone_mass(x.word)
        total = 0.0
        for w, p in zip(self.words, self.weights):
            if shadow_contains(spec, Element(w, self.model)):
                total += p
        return float(total)

    def measure(self, depth):
        if depth > self.n:
            raise ValueError("cone depth exceeds sphere radius")
        masses = {w: self.cone_mass(w) for w in _all_cones(self.model, depth)}
        return _finish(self.model, depth, masses, f"sphere-weighted(theta={self.theta:g}, n={self.n})")


def mutheta_shadow_mass(green, theta, x, n, R=0):
    """Share of sum_{S_n} G^theta carried by points of the shadow S(x, R)."""
    if len(x.word) > n:
        raise ValueError(f"|x| = {len(x.word)} exceeds sphere radius {n}")
    return SphereWeights(green, theta, n).shadow_mass(ShadowSpec(x, R))


# ---------------------------------------------------------------- Gibbs ratios
@dataclass
class GibbsReport:
    theta: float
    log_ratios: np.ndarray
    apexes: list
    bound: float

    @property
    def min(self):
        return float(self.log_ratios.min())

    @property
    def max(self):
        return float(self.log_ratios.max())

    @property
    def spread(self):
        return self.max - self.min

    @property
    def passed(self):
        return bool(np.isfinite(self.spread) and self.spread < self.bound)

    def __str__(self):
        return (f"theta={self.theta:g} apexes={len(self.apexes)} log-ratio min={self.min:.4f} "
                f"max={self.max:.4f} spread={self.spread:.4f} bound={self.bound:g} "
                f"{'PASS' if self.passed else 'FAIL'}")


def sample_apexes(model, count, max_length, seed=0, min_length=1):
    """Random normal forms with length uniform in [min_length, max_length]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(min_length, max_length + 1))
        w = ""
        for _ in range(n):
            opts = model.next_letters(w[-1] if w else "")
            w += opts[int(rng.integers(len(opts)))]
        out.append(Element(w, model))
    return out


def gibbs_ratio_report(theta, apexes, mass, green, beta, R=0, bound=0.1):
    """log[ mass(S(g, R)) / (G(1, g)^theta e^{-beta |g|}) ] over the apexes.

    ``mass`` maps a ShadowSpec to its measure.
    """
    vals = []
    for g in apexes:
        m = mass(ShadowSpec(g, R))
        ref = theta * green.log_green(g) - beta * len(g.word)
        vals.append(log(m) - ref if m > 0 else float("-inf"))
    return GibbsReport(theta, np.array(vals), list(apexes), bound)


# ---------------------------------------------------------------- stationarity
def _translate(model, letter, combo):
    """letter * (linear combination of cones); '' stands for the whole boundary."""
    out = {}
    comb = model.combine_table
    li = model.letter_index(letter)
    inv = model.inverse_letter(letter)
    for w, c in combo.items():
        if w == "":
            terms = {"": c}
        else:
            op = comb[li][model.letter_index(w[0])]
            if op == PUSH:
                terms = {letter + w: c}
            elif op == POP and len(w) > 1:
                terms = {w[1:]: c}
            elif op == POP:
                terms = {"": c}
                for u in blocked_letters(model, inv):
                    terms[u] = terms.get(u, 0.0) - c
            else:
                terms = {model.alphabet[op] + w[1:]: c}
        for k, v in terms.items():
            out[k] = out.get(k, 0.0) + v
    return out


def pull_back(model, g_word, cone):
    """g^{-1} cone(x) as a signed combination of cones."""
    combo = {cone: 1.0}
    for letter in model.inverse_word(g_word)[::-1]:
        combo = _translate(model, letter, combo)
    return combo


@dataclass
class StationarityResult:
    residual: float
    worst_cone: str
    cones_checked: int


def stationarity_residual(measure, mu, depth=None):
    """max over cones C of |nu(C) - sum_g mu(g) nu(g^-1 C)|."""
    model = measure.model
    if not model.is_tree_like:
        raise ModelError("exact cone pull-back needs a tree-like model")
    top = measure.depth - mu.reach
    depth = top if depth is None else depth
    if depth < 1 or depth > top:
        raise ValueError(f"cone algebra too shallow: need depth + reach <= {measure.depth}")
    worst, where, count = 0.0, "", 0
    for w in _all_cones(model, depth)[1:]:
        total = 0.0
        for x, p in zip(mu.support, mu.probs):
            for k, c in pull_back(model, x.word, w).items():
                if len(k) > measure.depth:
                    raise ValueError("cone algebra too shallow to express a pull-back")
                total += p * c * measure(k)
        err = abs(measure(w) - total)
        count += 1
        if err > worst:
            worst, where = err, w
    return StationarityResult(worst, where, count)


def point_mass_measure(model, cone, depth):
    """A measure concentrated on one ray through ``cone`` (negative control)."""
    ray = cone
    while len(ray) < depth:
        ray += model.next_letters(ray[-1] if ray else "")[0]
    masses = {w: 1.0 if ray.startswith(w) else 0.0 for w in _all_cones(model, depth)}
    return _finish(model, depth, masses, "point-mass")


# ------------------------------------------------------------ local dimension
@dataclass
class LocalDimension:
    sequences: list          # per walk: array over n = 1..len of -(1/n) log F(1, gamma(n))
    n_eval: int
    mean_at_n: float
    se_at_n: float


def local_dimension_samples(words, green, n_eval=None):
    """-(1/n) log F(1, gamma(n)) along the geodesic to each end point.

    F = G / G(1, 1); the limit is the same as for G without the O(1/n) offset.
    """
    seqs = []
    offset = log(green.g11)
    for w in words:
        if not w:
            raise ValueError("end point is the identity")
        prefixes = [w[:i] for i in range(1, len(w) + 1)]
        logs = np.asarray(green.log_green_many(prefixes)) - offset
        seqs.append(-logs / np.arange(1, len(w) + 1))
    if n_eval is None:
        n_eval = min(len(s) for s in seqs)
    vals = np.array([s[n_eval - 1] for s in seqs if len(s) >= n_eval])
    if vals.size == 0:
        raise ValueError(f"no ray reaches length {n_eval}")
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    return LocalDimension(seqs, n_eval, float(vals.mean()), se)


def walk_end_words(mu, steps, count, seed=0):
    """End points of ``count`` independent walks (vectorized on tree models)."""
    model = mu.model
    out = []
    for size, rng in chunk_rngs(seed, count):
        w = TreeWalker(model, mu, size, steps * mu.reach)
        for _ in range(steps):
            w.step(rng)
        out.extend(w.words())
    return out
