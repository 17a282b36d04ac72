"""Step distributions, first-passage probabilities and Green functions.

On tree-like models with nearest-neighbour steps everything is exact:
F(1, x) is the product of F(1, s) over the letters of x and
G(1, x) = G(1, 1) F(1, x).  Elsewhere the Green function comes from the
absorbing-ball linear system, which is a certified lower bound.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from math import log, sqrt
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (AdmissibilityError, BudgetExceeded, ConvergenceError, ModelError,
                     ParseError)
from .group_model import DEFAULT_BUDGET, Element, ball_enumerate
from .walker import TreeWalker, chunk_rngs

FIXED_POINT_TOL = 1e-14
FIXED_POINT_CAP = 1_000_000


# --------------------------------------------------------- step distribution
class StepDistribution:
    """A finitely supported probability measure on group elements."""

    def __init__(self, model, weights, check_admissible=True, name=None):
        merged = {}
        for word, p in dict(weights).items():
            x = model.reduce(word)
            merged[x.word] = merged.get(x.word, 0) + p
        if not merged:
            raise ValueError("empty step distribution")
        for w, p in merged.items():
            if not p > 0:
                raise ValueError(f"probability of {w or '1'} must be positive, got {p}")
        total = sum(merged.values())
        if abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {float(total)!r}, not 1")
        order = sorted(merged, key=lambda w: (len(w), model.sort_key(w)))
        self.model = model
        self.name = name or "mu"
        self.exact = {w: merged[w] for w in order}
        self.support = tuple(Element(w, model) for w in order)
        self.probs = np.array([float(merged[w]) for w in order])
        self.probs /= self.probs.sum()
        self.reach = max(len(w) for w in order)
        self.admissible = None
        if check_admissible:
            self.check_admissible()

    @classmethod
    def uniform(cls, model, **kw):
        n = len(model.alphabet)
        return cls(model, {s: Fraction(1, n) for s in model.alphabet}, name="uniform", **kw)

    def prob(self, word):
        return float(self.exact.get(word, 0))

    @property
    def is_nearest_neighbour(self):
        return self.reach <= 1

    def items(self):
        return [(x.word, float(p)) for x, p in zip(self.support, self.probs)]

    def check_admissible(self, budget=200_000):
        """Support must generate the group as a semigroup.

        Sufficient check: the semigroup closure restricted to the ball of
        radius max(3r, 3) contains every generator.
        """
        model = self.model
        radius = max(3 * self.reach, 3)
        found = {x.word for x in self.support if len(x.word) <= radius}
        frontier = list(found)
        gens = set(model.alphabet)
        while frontier and not gens <= found:
            nxt = []
            for w in frontier:
                x = Element(w, model)
                for s in self.support:
                    y = model.multiply(x, s).word
                    if len(y) <= radius and y not in found:
                        found.add(y)
                        nxt.append(y)
            if len(found) > budget:
                raise BudgetExceeded("admissibility closure exceeded its budget")
            frontier = nxt
        missing = sorted(gens - found, key=model.sort_key)
        self.admissible = not missing
        if missing:
            raise AdmissibilityError(
                f"support does not generate the group as a semigroup (cannot reach {missing})")
        return True

    def __repr__(self):
        body = ", ".join(f"{w or '1'}:{p:g}" for w, p in self.items())
        return f"StepDistribution({body})"


def _parse_prob(token):
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad probability {token!r}") from None


def parse_steps(text, model, path=None, check_admissible=True):
    """Parse "word probability" lines; ``1`` denotes the identity."""
    weights = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'word probability', got {raw.strip()!r}", lineno, path)
        word, token = parts
        try:
            p = _parse_prob(token)
            w = "" if word == "1" else word
            for c in w:
                model.letter_index(c)
        except (ValueError, ModelError) as exc:
            raise ParseError(str(exc), lineno, path) from None
        weights[w] = weights.get(w, 0) + p
    try:
        return StepDistribution(model, weights, check_admissible=check_admissible,
                                name=Path(path).stem if path else None)
    except ValueError as exc:
        raise ParseError(str(exc), 0, path) from None


def load_steps(path, model, check_admissible=True):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"step file not found: {path}")
    return parse_steps(path.read_text(), model, path=str(path), check_admissible=check_admissible)


def format_steps(mu):
    return "".join(f"{w or '1'} {p}\n" for w, p in mu.exact.items())


# ------------------------------------------------------ first passage (tree)
@dataclass(frozen=True)
class FirstPassageTable:
    model: object
    mu: StepDistribution
    values: dict          # letter -> F(1, letter)
    g11: float            # G(1, 1)
    residual: float
    iterations: int

    @property
    def log_values(self):
        """log F(1, s) indexed by letter index."""
        return np.array([log(self.values[s]) for s in self.model.alphabet])

    def first_passage(self, x):
        w = x.word if isinstance(x, Element) else x
        out = 1.0
        for c in w:
            out *= self.values[c]
        return out

    def log_first_passage(self, x):
        w = x.word if isinstance(x, Element) else x
        return sum(log(self.values[c]) for c in w)

    def log_first_passage_many(self, words):
        """Vectorized log F(1, w) for a list of words."""
        out = np.zeros(len(words))
        if not words:
            return out
        lut = np.zeros(256)
        for s, v in self.values.items():
            lut[ord(s)] = log(v)
        by_len = {}
        for i, w in enumerate(words):
            by_len.setdefault(len(w), []).append(i)
        for n, ids in by_len.items():
            if n == 0:
                continue
            buf = np.frombuffer("".join(words[i] for i in ids).encode("ascii"), dtype=np.uint8)
            out[ids] = lut[buf].reshape(len(ids), n).sum(axis=1)
        return out

    def green(self, x):
        return self.g11 * self.first_passage(x)

    def log_green(self, x):
        return log(self.g11) + self.log_first_passage(x)


def _first_passage_map(model, mu, F):
    """One sweep of F_g = sum_u mu(u) F(u, g) with F(u, g) = F(1, u^-1 g)."""
    alphabet = model.alphabet
    out = {}
    for g in alphabet:
        total = 0.0
        for x, p in zip(mu.support, mu.probs):
            u = x.word
            if u == "":
                total += p * F[g]
            elif u == g:
                total += p
            elif model.factor(u) == model.factor(g):
                rest = model.reduce(model.inverse_letter(u) + g).word
                val = 1.0
                for c in rest:
                    val *= F[c]
                total += p * val
            else:
                total += p * F[model.inverse_letter(u)] * F[g]
        out[g] = total
    return out


def _newton_polish(model, mu, F, steps=3):
    """A few Newton steps on F - map(F) = 0 started at the monotone limit.

    Slowly contracting systems stop the monotone sweep ~1e-13 short of the
    fixed point; Newton removes that without changing which root is selected.
    """
    letters = list(model.alphabet)

    def resid(vec):
        cur = dict(zip(letters, vec))
        out = _first_passage_map(model, mu, cur)
        return np.array([cur[s] - out[s] for s in letters])

    x = np.array([F[s] for s in letters])
    r = resid(x)
    for _ in range(steps):
        h = 1e-7
        J = np.empty((len(x), len(x)))
        for j in range(len(x)):
            e = np.zeros(len(x))
            e[j] = h
            J[:, j] = (resid(x + e) - resid(x - e)) / (2 * h)
        try:
            y = x - np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            break
        ry = resid(y)
        if np.abs(ry).max() >= np.abs(r).max() or np.abs(y - x).max() > 1e-6:
            break
        x, r = y, ry
    return {s: float(v) for s, v in zip(letters, x)}, float(np.abs(r).max())


def solve_tree_first_passage(model, mu, tol=FIXED_POINT_TOL, max_iter=FIXED_POINT_CAP):
    """Minimal solution of the first-passage system by monotone iteration from 0."""
    if not model.is_tree_like:
        raise ModelError("exact first-passage solver needs a tree-like model")
    if mu.model is not model:
        raise ModelError("step distribution belongs to a different model")
    if not mu.is_nearest_neighbour:
        raise ModelError("product formula needs nearest-neighbour steps; "
                         "use truncated_green for longer support")
    F = {s: 0.0 for s in model.alphabet}
    for it in range(1, max_iter + 1):
        new = _first_passage_map(model, mu, F)
        change = max(abs(new[s] - F[s]) for s in F)
        F = new
        if change < tol:
            break
    else:
        raise ConvergenceError(f"first-passage iteration not converged after {max_iter} sweeps")
    F, residual = _newton_polish(model, mu, F)
    for s, v in F.items():
        if not 0.0 < v < 1.0:
            raise ConvergenceError(f"F(1,{s}) = {v} outside (0, 1)")
    ret = mu.prob("") + sum(p * F[model.inverse_letter(x.word)]
                            for x, p in zip(mu.support, mu.probs) if x.word)
    return FirstPassageTable(model, mu, F, 1.0 / (1.0 - ret), residual, it)


def green_value(x, table):
    """G(1, x) = G(1, 1) times the product of F(1, s) along the normal form."""
    return table.green(x)


# ----------------------------------------------------- truncated Green value
class TruncatedGreen(NamedTuple):
    lower: float     # absorbing-ball value: certified lower bound
    estimate: float  # Aitken extrapolation over horizons R-4, R-2, R


def _aitken(a, b, c):
    d1, d2 = b - a, c - b
    denom = d2 - d1
    if d2 <= 0 or denom >= 0 or abs(denom) < 1e-300:
        return c
    return c - d2 * d2 / denom


def _return_tables(model, mu, horizon):
    """P[m][s]: walker at a vertex ending in s, with m levels allowed below it,
    reaches the root of its block before leaving the ball."""
    hold = mu.prob("")
    P = []
    for m in range(horizon + 1):
        prev = P[m - 1] if m else None

        def hang(last):
            if prev is None:
                return 0.0
            return sum(mu.prob(w) * prev[w] for w in model.next_letters(last))

        row = {}
        done = set()
        for s in model.alphabet:
            if s in done:
                continue
            if model.factor_order(s) == 3:
                t, T = s, model.inverse_letter(s)
                d = 1.0 - hold - hang(t)
                mt, mT = mu.prob(t), mu.prob(T)
                det = d * d - mt * mT
                row[t] = (mT * d + mt * mt) / det
                row[T] = (mt * d + mT * mT) / det
                done.update((t, T))
            else:
                row[s] = mu.prob(model.inverse_letter(s)) / (1.0 - hold - hang(s))
                done.add(s)
        P.append(row)
    return P


def _skeleton_green(model, mu, x, horizon, P):
    """G_B(1, x) on the ball of radius ``horizon`` by collapsing off-geodesic branches."""
    word = x.word
    nodes = [word[:i] for i in range(len(word) + 1)]
    for i in range(len(word)):
        c = word[i]
        if model.factor_order(c) == 3:
            nodes.append(word[:i] + model.inverse_letter(c))
    index = {w: i for i, w in enumerate(nodes)}
    n = len(nodes)
    Q = np.zeros((n, n))
    for w, i in index.items():
        y = Element(w, model)
        for s, p in zip(mu.support, mu.probs):
            z = model.multiply(y, s).word
            j = index.get(z)
            if j is not None:
                Q[i, j] += p
            elif len(z) <= horizon:
                Q[i, i] += p * P[horizon - len(z)][z[-1]]
    A = np.eye(n) - Q
    rhs = np.zeros(n)
    rhs[index[word]] = 1.0
    col = np.linalg.solve(A, rhs)
    return float(col[index[""]])


class GreenField:
    """Absorbing-ball Green values G_B(1, y) for every y in a ball."""

    def __init__(self, model, mu, horizon, budget=DEFAULT_BUDGET):
        words = []
        for _, sphere in ball_enumerate(model, horizon, budget=budget):
            words.extend(e.word for e in sphere)
        index = {w: i for i, w in enumerate(words)}
        rows, cols, vals = [], [], []
        for w, i in index.items():
            y = Element(w, model)
            for s, p in zip(mu.support, mu.probs):
                j = index.get(model.multiply(y, s).word)
                if j is not None:
                    rows.append(i)
                    cols.append(j)
                    vals.append(p)
        n = len(words)
        Pm = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        A = (sp.identity(n, format="csr") - Pm).T.tocsc()
        rhs = np.zeros(n)
        rhs[index[""]] = 1.0
        g = spla.spsolve(A, rhs)
        if not np.all(np.isfinite(g)):
            raise ConvergenceError("sparse Green solve failed")
        self.model, self.mu, self.horizon = model, mu, horizon
        self.index = index
        self.values = np.asarray(g)

    def __call__(self, x):
        w = x.word if isinstance(x, Element) else x
        try:
            return float(self.values[self.index[w]])
        except KeyError:
            raise ValueError(f"{w or '1'} lies outside the ball of radius {self.horizon}") from None


def truncated_green(x, horizon, mu, method="auto", budget=DEFAULT_BUDGET):
    """Absorbing-ball Green value G_B(1, x) with an extrapolated estimate.

    ``method`` is "skeleton" (tree-like models, nearest-neighbour steps),
    "sparse" (any model, full ball solve) or "auto".
    """
    model = mu.model
    if len(x.word) > horizon - mu.reach:
        raise ValueError(f"horizon {horizon} too small for |x| = {len(x.word)} "
                         f"and step reach {mu.reach}")
    if method == "auto":
        method = "skeleton" if model.is_tree_like and mu.is_nearest_neighbour else "sparse"
    # spacing 2 keeps period-2 models (alternating factors) on one parity
    horizons = [h for h in (horizon - 4, horizon - 2, horizon) if h >= len(x.word) + mu.reach]
    if method == "skeleton":
        if not (model.is_tree_like and mu.is_nearest_neighbour):
            raise ModelError("skeleton solver needs a tree-like model and nearest-neighbour steps")
        P = _return_tables(model, mu, horizon)
        vals = [_skeleton_green(model, mu, x, h, P) for h in horizons]
    elif method == "sparse":
        vals = [GreenField(model, mu, h, budget=budget)(x) for h in horizons]
    else:
        raise ValueError(f"unknown method {method!r}")
    est = _aitken(*vals) if len(vals) == 3 else vals[-1]
    return TruncatedGreen(vals[-1], max(est, vals[-1]))


# -------------------------------------------------------------- Monte Carlo
class MCEstimate(NamedTuple):
    estimate: float
    half_width: float
    trials: int
    censored: int  # walks still running at the step cap


def mc_first_passage(x, mu, trials, cutoff=60, seed=0, max_steps=None):
    """Fraction of walks from 1 that hit x before their distance from 1 exceeds ``cutoff``.

    The cutoff makes the estimate biased low by at most the probability of
    returning from distance ``cutoff``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if len(x.word) == 0:
        return MCEstimate(1.0, 0.0, trials, 0)
    model = mu.model
    if len(x.word) >= cutoff:
        raise ValueError("cutoff must exceed |x|")
    max_steps = max_steps or 50 * cutoff
    hits = 0
    censored = 0
    for size, rng in chunk_rngs(seed, trials):
        w = TreeWalker(model, mu, size, cutoff, target=x.word)
        active = np.arange(size)
        for _ in range(max_steps):
            if len(active) == 0:
                break
            w.step(rng, active)
            h = w.hit()[active]
            hits += int(h.sum())
            keep = ~h & (w.depth[active] <= cutoff)
            active = active[keep]
        censored += len(active)
    p = hits / trials
    return MCEstimate(p, 1.96 * sqrt(max(p * (1 - p), 0.0) / trials), trials, censored)


# ------------------------------------------------------------- Martin kernel
def martin_kernel_approx(g, target_prefixes, k, green):
    """G(g, y_k) / G(1, y_k) with y_k the k-th point of a geodesic.

    ``green`` maps an element to G(1, .); G(g, y) = G(1, g^-1 y).
    """
    if k < 0 or k >= len(target_prefixes):
        raise IndexError(f"depth {k} outside geodesic of length {len(target_prefixes) - 1}")
    y = target_prefixes[k]
    model = y.model
    return green(model.multiply(model.inverse(g), y)) / green(y)


class GreenEvaluator:
    """G(1, .) for a model and step distribution, exact where possible.

    Tree-like models with nearest-neighbour steps use the product formula;
    everything else uses a GreenField on a ball of radius ``horizon``.
    """

    def __init__(self, mu, horizon=12, budget=DEFAULT_BUDGET):
        self.mu = mu
        self.model = mu.model
        self.table = None
        self.field = None
        if self.model.is_tree_like and mu.is_nearest_neighbour:
            self.table = solve_tree_first_passage(self.model, mu)
            self.exact = True
        else:
            self.field = GreenField(self.model, mu, horizon, budget=budget)
            self.exact = False
        self.g11 = self(Element("", self.model))

    def __call__(self, x):
        if self.table is not None:
            return self.table.green(x)
        return self.field(x)

    def log_green(self, x):
        return log(self(x))

    def log_green_many(self, words):
        if self.table is not None:
            return log(self.table.g11) + self.table.log_first_passage_many(words)
        return np.log([self.field(w) for w in words])


# ------------------------------------------------------------- binary cache
CACHE_MAGIC = b"HWGC"
CACHE_VERSION = 1


class GreenCache(dict):
    """Green values keyed by normal form, persisted as a small binary file.

    Layout (little endian): magic ``HWGC``, u32 version, u32 entry count, then
    per entry u16 key length, UTF-8 key bytes, f64 value.
    """

    def save(self, path):
        parts = [CACHE_MAGIC, struct.pack("<II", CACHE_VERSION, len(self))]
        for key in sorted(self):
            raw = key.encode("utf-8")
            parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<d", float(self[key])))
        Path(path).write_bytes(b"".join(parts))

    @classmethod
    def load(cls, path):
        data = Path(path).read_bytes()
        if data[:4] != CACHE_MAGIC:
            raise ParseError("not a Green cache file (bad magic)", 0, str(path))
        version, count = struct.unpack_from("<II", data, 4)
        if version != CACHE_VERSION:
            raise ParseError(f"unsupported cache version {version}", 0, str(path))
        out, pos = cls(), 12
        try:
            for _ in range(count):
                (n,) = struct.unpack_from("<H", data, pos)
                key = data[pos + 2:pos + 2 + n].decode("utf-8")
                (val,) = struct.unpack_from("<d", data, pos + 2 + n)
                out[key] = val
                pos += 10 + n
        except struct.error:
            raise ParseError("truncated Green cache file", 0, str(path)) from None
        if pos != len(data):
            raise ParseError("trailing bytes in Green cache file", 0, str(path))
        return out
