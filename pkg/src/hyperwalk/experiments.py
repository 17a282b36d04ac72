"""End-to-end experiments: fundamental inequality, hitting statistics, confinement."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from math import isfinite, log, sqrt

import numpy as np

from .automaton import builtin_automaton, growth_rate
from .boundary import sample_apexes
from .errors import BudgetExceeded, CalibrationError, ModelError
from .green import GreenEvaluator
from .group_model import sphere_words
from .thermo import beta_curve, build_potential, legendre, theta_grid
from .walk_stats import fundamental_gap, sample_endpoints
from .walker import TreeWalker, chunk_rngs


# ------------------------------------------------------------ fundamental report
@dataclass
class FundamentalReport:
    model: str
    v: float
    drift: float
    drift_se: float
    entropy: float
    entropy_se: float
    gap: float               # h - l v
    combined_se: float       # sqrt(se_h^2 + v^2 se_l^2)
    paired_se: float         # se of the per-replica h_i - v l_i
    verdict: str
    beta_max_second_difference: float
    alpha_at_one: float
    dimension_ratio: float   # h / l
    rigidity_spread: float   # max - min of log G(1,g) + v|g|
    notes: list = field(default_factory=list)

    def lines(self):
        yield f"model                      {self.model}"
        yield f"growth v                   {self.v:.6f}"
        yield f"drift l                    {self.drift:.6f} +/- {self.drift_se:.6f}"
        yield f"entropy h (green speed)    {self.entropy:.6f} +/- {self.entropy_se:.6f}"
        yield f"h - l v                    {self.gap:.6f} (combined se {self.combined_se:.6f}, paired se {self.paired_se:.6f})"
        yield f"h / l                      {self.dimension_ratio:.6f}"
        yield f"alpha(1) = -beta'(1)       {self.alpha_at_one:.6f}"
        yield f"max 2nd diff beta on [0,1] {self.beta_max_second_difference:.3e}"
        yield f"rigidity spread            {self.rigidity_spread:.6f}"
        yield f"verdict                    {self.verdict}"
        for n in self.notes:
            yield f"note                       {n}"

    def to_dict(self):
        return asdict(self)


def fundamental_report(mu, steps=2000, replicas=200, seed=0, aut=None, rigidity_radius=8,
                       rigidity_samples=200):
    model = mu.model
    aut = aut or builtin_automaton(model)
    v = growth_rate(aut)
    sample = sample_endpoints(mu, steps, replicas, seed)
    l_est, h_est = sample.drift(), sample.green_speed()
    gap = h_est.mean - v * l_est.mean
    combined = sqrt(h_est.se ** 2 + (v * l_est.se) ** 2)
    paired = fundamental_gap(sample, v)
    verdict = "equality-consistent" if abs(gap) <= 3 * combined else "strict"
    green = GreenEvaluator(mu)
    scheme = build_potential(aut, green, 1 if green.exact else 4)
    curve = beta_curve(scheme, theta_grid(-0.05, 1.05, 0.05))
    inside = (curve.thetas[1:-1] >= -1e-12) & (curve.thetas[1:-1] <= 1 + 1e-12)
    spectrum = legendre(curve)
    alpha1, _ = spectrum.at_theta(1.0)
    apexes = sample_apexes(model, rigidity_samples, rigidity_radius, seed=seed)
    rig = [green.log_green(g) + v * len(g.word) for g in apexes]
    notes = []
    if h_est.mean > l_est.mean * v + 4 * combined:
        notes.append("entropy estimate exceeds l v by more than 4 combined standard errors")
    return FundamentalReport(model.name, v, l_est.mean, l_est.se, h_est.mean, h_est.se, gap,
                             combined, paired.se, verdict,
                             float(curve.second_differences[inside].max()), alpha1,
                             h_est.mean / l_est.mean, float(max(rig) - min(rig)), notes)


# ------------------------------------------------------------ hitting statistics
@dataclass
class HittingRecord:
    n: int
    points: list            # distinct hit points, sorted by mass (desc) then lexicographically
    masses: np.ndarray
    K: dict                 # a -> K_n(a)
    exponents: dict         # a -> (1/n) log K_n(a)
    h_hat: float
    walks: int
    excluded: int

    def covering_number(self, a):
        return covering_number(self.masses, a)


def covering_number(masses, a):
    """Fewest points (masses sorted descending) carrying total mass >= a."""
    if a <= 0:
        return 0
    if a > 1 + 1e-12:
        raise ValueError("a must lie in [0, 1]")
    cum = np.cumsum(masses)
    k = int(np.searchsorted(cum, a - 1e-12, side="left")) + 1
    return min(k, len(masses))


def hitting_experiment(mu, n_values, a_values, walks, seed=0, h_hat=None, max_steps=None):
    """Empirical first-hitting distributions of the annuli n <= |x| < n + r.

    tau_n is the first time with |x_k| >= n; steps of length <= r cannot jump
    over the annulus.
    """
    model = mu.model
    if not model.is_tree_like:
        raise ModelError("hitting experiment uses the vectorized tree walker")
    n_values = sorted(set(int(n) for n in n_values))
    if not n_values or n_values[0] < 1:
        raise ValueError("annulus radii must be >= 1")
    top = n_values[-1]
    max_steps = max_steps or 100 * top
    counts = {n: {} for n in n_values}
    excluded = {n: 0 for n in n_values}
    for size, rng in chunk_rngs(seed, walks):
        w = TreeWalker(model, mu, size, top + mu.reach)
        reached = np.zeros(size, dtype=np.int64)  # how many radii each walker has passed
        active = np.arange(size)
        for _ in range(max_steps):
            if len(active) == 0:
                break
            w.step(rng, active)
            d = w.depth[active]
            for k, n in enumerate(n_values):
                new = active[(reached[active] == k) & (d >= n)]
                for i in new:
                    word = w.word(i)
                    counts[n][word] = counts[n].get(word, 0) + 1
                reached[new] = k + 1
            # a walker may pass several radii at once when r > 1
            active = active[reached[active] < len(n_values)]
        for k, n in enumerate(n_values):
            excluded[n] += int((reached <= k).sum())
    records = []
    for n in n_values:
        pts = sorted(counts[n].items(), key=lambda kv: (-kv[1], model.sort_key(kv[0])))
        total = sum(c for _, c in pts)
        masses = np.array([c / total for _, c in pts]) if total else np.zeros(0)
        K = {a: covering_number(masses, a) for a in a_values}
        expo = {a: (log(k) / n if k > 0 else float("-inf")) for a, k in K.items()}
        records.append(HittingRecord(n, [p for p, _ in pts], masses, K, expo,
                                     h_hat if h_hat is not None else float("nan"),
                                     total, excluded[n]))
    return records


def hitting_slopes(records, a):
    """log K_n(a) - log K_{n-1}(a) between consecutive radii (per-step growth)."""
    out = []
    for r0, r1 in zip(records, records[1:]):
        k0, k1 = r0.K[a], r1.K[a]
        if k0 > 0 and k1 > 0:
            out.append((r1.n, (log(k1) - log(k0)) / (r1.n - r0.n)))
    return out


# ------------------------------------------------------------------ confinement
@dataclass
class ConfinementReport:
    a: float
    slack: float            # c in delta_n = c / sqrt(n)
    calibrated: bool
    coverage: float         # fraction of simulated walks inside Gamma_a
    h_hat: float
    v: float
    counts: dict            # n -> |Gamma_a cap S_n|
    sphere_sizes: dict
    exponents: dict         # n -> (1/n) log |Gamma_a cap S_n|
    n_max: int

    @property
    def exponent(self):
        return self.exponents[self.n_max]

    def lines(self):
        yield (f"a={self.a:g} slack c={self.slack:.4f} ({'calibrated' if self.calibrated else 'fixed'}) "
               f"coverage={self.coverage:.4f} h_hat={self.h_hat:.6f} v={self.v:.6f}")
        for n in sorted(self.counts):
            yield (f"  n={n:<3d} |Gamma_a cap S_n|={self.counts[n]:<10d} of {self.sphere_sizes[n]:<10d} "
                   f"exponent={self.exponents[n]:.6f}")


class _Confiner:
    """Distance-to-V_a machinery on a Cayley tree.

    A point y is covered at slack c when some x with |x| = m >= 1 satisfies
    -log G(1, x) <= m h + c sqrt(m) and d(x, y) <= c sqrt(m).  Candidates x
    leave y's geodesic j levels up and go i letters down, m = |y| - j + i.
    """

    def __init__(self, green, h_hat, i_cap):
        model = green.model
        if not model.cayley_is_tree:
            raise ModelError("confinement counting assumes a Cayley tree (no order-3 factors)")
        self.model = model
        self.h = h_hat
        self.i_cap = i_cap
        self.log_g11 = log(green.g11)
        table = green.table
        letters = model.alphabet
        self.cost = np.array([-log(table.values[s]) for s in letters])  # -log F per letter
        nstate = len(letters) + 1  # state len(letters) = empty word
        ext = np.zeros((i_cap + 1, nstate))
        idx = {s: k for k, s in enumerate(letters)}
        for i in range(1, i_cap + 1):
            for st in range(nstate):
                last = "" if st == len(letters) else letters[st]
                ext[i, st] = min(self.cost[idx[u]] + ext[i - 1, idx[u]] for u in model.next_letters(last))
        self.min_ext = ext
        self.empty_state = len(letters)

    def _prefix_data(self, arr):
        """Prefix costs -log G(1, y[:k]) and last-letter states for letter arrays."""
        n = arr.shape[1]
        pc = np.zeros((arr.shape[0], n + 1))
        pc[:, 0] = -self.log_g11
        if n:
            pc[:, 1:] = -self.log_g11 + np.cumsum(self.cost[arr], axis=1)
        states = np.empty((arr.shape[0], n + 1), dtype=np.int64)
        states[:, 0] = self.empty_state
        states[:, 1:] = arr
        return pc, states

    def pairs(self, n):
        for j in range(n + 1):
            for i in range(self.i_cap + 1):
                m = n - j + i
                if m >= 1:
                    yield j, i, m

    def minimal_slack(self, arr):
        """Smallest c covering each row of ``arr`` (all rows the same length n)."""
        n = arr.shape[1]
        pc, states = self._prefix_data(arr)
        best = np.full(arr.shape[0], np.inf)
        for j, i, m in self.pairs(n):
            k = n - j
            need_a = (pc[:, k] + self.min_ext[i, states[:, k]] - self.h * m) / sqrt(m)
            val = np.maximum(need_a, (j + i) / sqrt(m))
            np.minimum(best, val, out=best)
        return best

    def covered(self, arr, c):
        n = arr.shape[1]
        pc, states = self._prefix_data(arr)
        mask = np.zeros(arr.shape[0], dtype=bool)
        for j, i, m in self.pairs(n):
            if j + i > c * sqrt(m):
                continue
            k = n - j
            mask |= pc[:, k] + self.min_ext[i, states[:, k]] <= self.h * m + c * sqrt(m)
        return mask


def _sphere_chunks(model, n, chunk_depth=6):
    """Yield letter-index arrays covering S_n, grouped by a common prefix."""
    if n <= chunk_depth:
        words = sphere_words(model, n)
        yield np.array([[model.letter_index(c) for c in w] for w in words], dtype=np.int64).reshape(len(words), n)
        return
    heads = sphere_words(model, chunk_depth)
    for h in heads:
        layer = [h]
        for _ in range(n - chunk_depth):
            layer = [w + u for w in layer for u in model.next_letters(w[-1])]
        buf = np.frombuffer("".join(layer).encode("ascii"), dtype=np.uint8).reshape(len(layer), n)
        lut = np.zeros(256, dtype=np.int64)
        for s in model.alphabet:
            lut[ord(s)] = model.letter_index(s)
        yield lut[buf]


def confinement_experiment(mu, a, n_max, walks=5000, seed=0, h_hat=None, slack=None,
                           i_cap=12, steps=2000, replicas=200, budget=20_000_000):
    """Growth of Gamma_a cap S_n for n <= n_max with calibrated slack delta_n = c / sqrt(n)."""
    model = mu.model
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    green = GreenEvaluator(mu)
    if not green.exact:
        raise ModelError("confinement experiment needs exact Green values")
    v = growth_rate(builtin_automaton(model))
    if h_hat is None:
        s = sample_endpoints(mu, steps, replicas, seed)
        h_hat = s.green_speed().mean / s.drift().mean
    conf = _Confiner(green, h_hat, i_cap)

    # calibration: simulate walks until they first pass radius n_max
    per_walk = []
    for size, rng in chunk_rngs(seed + 1, walks):
        w = TreeWalker(model, mu, size, n_max + mu.reach)
        visited = [set() for _ in range(size)]
        active = np.arange(size)
        for _ in range(200 * n_max):
            if len(active) == 0:
                break
            w.step(rng, active)
            for i in active:
                d = w.depth[i]
                if 1 <= d <= n_max:
                    visited[i].add(w.word(i))
            active = active[w.depth[active] <= n_max]
        pool = sorted(set().union(*visited))
        by_len = {}
        for p in pool:
            by_len.setdefault(len(p), []).append(p)
        cstar = {}
        for n, ws in by_len.items():
            arr = np.array([[model.letter_index(c) for c in x] for x in ws], dtype=np.int64)
            for x, c in zip(ws, conf.minimal_slack(arr)):
                cstar[x] = c
        per_walk.extend(max((cstar[x] for x in vis), default=0.0) for vis in visited)
    per_walk = np.array(per_walk)
    if slack is None:
        c = float(np.quantile(per_walk, 1 - a, method="higher"))
        if not isfinite(c):
            raise CalibrationError("cannot reach 1-a coverage within the search cap")
        calibrated = True
    else:
        c = float(slack)
        calibrated = False
    coverage = float((per_walk <= c + 1e-12).mean())
    if coverage < 1 - a:
        raise CalibrationError(f"slack c={c:g} keeps only {coverage:.4f} of walks inside "
                               f"Gamma_a (need {1 - a:.4f})")

    counts, sizes, expo = {}, {}, {}
    total = 0
    for n in range(1, n_max + 1):
        cnt = size = 0
        for arr in _sphere_chunks(model, n):
            size += arr.shape[0]
            cnt += int(conf.covered(arr, c).sum())
        total += size
        if total > budget:
            raise BudgetExceeded(f"sphere enumeration exceeded budget of {budget}")
        counts[n], sizes[n] = cnt, size
        expo[n] = log(cnt) / n if cnt else float("-inf")
    return ConfinementReport(a, c, calibrated, coverage, h_hat, v, counts, sizes, expo, n_max)
