"""Pressure of the Green potential and its Legendre transform.

The potential lives on windows of k consecutive automaton edges.  A window
spelling the word c carries the weight G(1, c) / G(1, c with its first letter
removed); along a path these weights telescope to G(1, x) up to bounded
factors.  For a weight table w the transfer matrix at parameter theta has
entries w^theta, and the pressure of a component is the log of its Perron
root.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import log

import numpy as np
from scipy.special import logsumexp

from .automaton import _period, _tarjan, perron_root, scc_decompose
from .errors import ConvergenceError, HyperwalkError
from .group_model import DEFAULT_BUDGET, sphere_words

TIE_TOL = 1e-9
CONVEXITY_TOL = 1e-9


@dataclass(frozen=True)
class SchemeComponent:
    index: int
    nodes: tuple
    nontrivial: bool
    period: int


class PotentialScheme:
    """Weighted graph on (k-1)-edge paths of an automaton.

    ``edges`` holds (source node, target node, weight) with weight > 0.
    """

    def __init__(self, nodes, edges, k=1, mode="empirical", initial=None, description=""):
        nodes = tuple(nodes)
        index = {n: i for i, n in enumerate(nodes)}
        src, dst, w = [], [], []
        for a, b, weight in edges:
            if not weight > 0:
                raise ValueError(f"non-positive weight {weight} on edge {a}->{b}")
            src.append(index[a])
            dst.append(index[b])
            w.append(float(weight))
        self.k = k
        self.mode = mode
        self.nodes = nodes
        self.index = index
        self.initial = initial
        self.description = description
        self.src = np.array(src, dtype=np.int64)
        self.dst = np.array(dst, dtype=np.int64)
        self.log_weights = np.log(np.array(w)) if w else np.zeros(0)
        self._decompose()

    @classmethod
    def from_weights(cls, nodes, weighted_edges, **kw):
        """Synthetic scheme from explicit (source, target, weight) triples."""
        return cls(nodes, weighted_edges, mode=kw.pop("mode", "synthetic"), **kw)

    def _decompose(self):
        succ = {i: [] for i in range(len(self.nodes))}
        for a, b in zip(self.src, self.dst):
            succ[int(a)].append(int(b))
        raw = _tarjan(list(range(len(self.nodes))), succ)
        raw.reverse()
        comps, comp_of = [], {}
        for ci, members in enumerate(raw):
            members = tuple(sorted(members))
            for m in members:
                comp_of[m] = ci
            loop = any(d in members for m in members for d in succ[m])
            p = _period(members, succ)[0] if loop else 0
            comps.append(SchemeComponent(ci, members, loop, p))
        self.components = tuple(comps)
        self.component_of = comp_of
        self.dag = frozenset((comp_of[int(a)], comp_of[int(b)]) for a, b in zip(self.src, self.dst)
                             if comp_of[int(a)] != comp_of[int(b)])

    def reaches(self, i, j):
        stack = [b for a, b in self.dag if a == i]
        seen = set()
        while stack:
            c = stack.pop()
            if c == j:
                return True
            if c not in seen:
                seen.add(c)
                stack.extend(b for a, b in self.dag if a == c)
        return False

    def matrix(self, theta):
        n = len(self.nodes)
        M = np.zeros((n, n))
        np.add.at(M, (self.src, self.dst), np.exp(theta * self.log_weights))
        return M

    def edge_weights(self):
        return {(self.nodes[a], self.nodes[b]): float(np.exp(lw))
                for a, b, lw in zip(self.src, self.dst, self.log_weights)}


def build_potential(aut, green, k=1):
    """Potential scheme of cylinder depth k from an automaton and a Green evaluator.

    ``green`` is a :class:`~hyperwalk.green.GreenEvaluator` (or any object
    with ``log_green(word)`` and an ``exact`` flag).
    """
    if k < 1:
        raise ValueError("cylinder depth must be >= 1")
    model = green.model
    aut.check_labels(model)

    cache = {}

    def log_g(word):
        if word not in cache:
            try:
                cache[word] = green.log_green(word)
            except (ValueError, HyperwalkError) as exc:
                raise HyperwalkError(f"Green evaluation failed for {word or '1'}: {exc}") from exc
        return cache[word]

    def window_weight(word):
        return float(np.exp(log_g(word) - log_g(word[1:])))

    mode = "exact-tree" if getattr(green, "exact", False) else "empirical"
    if k == 1:
        edges = [(s, t, window_weight(label)) for s, label, t in aut.edges]
        return PotentialScheme(aut.states, edges, k=1, mode=mode, initial=aut.initial,
                               description=f"k=1 on {aut.name}")
    # nodes: paths of k-1 edges, stored as (start state, labels, end state)
    paths = [((s,), "") for s in aut.states]
    for _ in range(k - 1):
        paths = [(states + (t,), labels + label)
                 for states, labels in paths for label, t in aut.out_edges(states[-1])]
    nodes = [(st, lab) for st, lab in paths]
    edges = []
    for states, labels in nodes:
        for label, t in aut.out_edges(states[-1]):
            word = labels + label
            nxt = (states[1:] + (t,), word[1:])
            edges.append(((states, labels), nxt, window_weight(word)))
    return PotentialScheme(nodes, edges, k=k, mode=mode, description=f"k={k} on {aut.name}")


@dataclass(frozen=True)
class PressureValue:
    theta: float
    beta: float
    per_component: tuple   # (component index, pressure) for non-trivial components
    maximal: tuple         # component indices within TIE_TOL of beta


def pressure(scheme, theta, tol=1e-12):
    """beta(theta) = max over components of log rho(M_C(theta))."""
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    M = scheme.matrix(theta)
    per = []
    for comp in scheme.components:
        if not comp.nontrivial:
            continue
        ids = list(comp.nodes)
        rho = perron_root(M[np.ix_(ids, ids)], tol=tol)
        per.append((comp.index, log(rho) if rho > 0 else float("-inf")))
    if not per:
        return PressureValue(theta, float("-inf"), (), ())
    beta = max(p for _, p in per)
    maximal = tuple(i for i, p in per if p >= beta - TIE_TOL)
    return PressureValue(theta, beta, tuple(per), maximal)


@dataclass(frozen=True)
class DirectPressure:
    value: float            # (1/n) log sum_{S_n} G^theta
    log_sum: float
    normalized_ratio: float | None  # sum * exp(-n beta), when beta is supplied
    n: int


def beta_direct(green, theta, n, beta=None, normalize=True, budget=DEFAULT_BUDGET, words=None):
    """Finite-n pressure (1/n) log sum_{x in S_n} G(1, x)^theta.

    With ``normalize`` the Green function is divided by G(1, 1), i.e. the sum
    runs over F(1, x)^theta.  The limit is the same; the finite-n bias is
    smaller on tree models.
    """
    if n < 1:
        raise ValueError("sphere radius must be >= 1")
    if words is None:
        words = sphere_words(green.model, n, budget=budget)
    logs = green.log_green_many(words)
    if normalize:
        logs = logs - log(green.g11)
    log_sum = float(logsumexp(theta * logs))
    ratio = float(np.exp(log_sum - n * beta)) if beta is not None else None
    return DirectPressure(log_sum / n, log_sum, ratio, n)


@dataclass
class PressureCurve:
    thetas: np.ndarray
    beta: np.ndarray
    per_component: list
    maximal: list
    derivative: np.ndarray
    second_differences: np.ndarray
    convex: bool
    candidate_kinks: list = field(default_factory=list)

    def value_at(self, theta):
        i = int(np.argmin(np.abs(self.thetas - theta)))
        if abs(self.thetas[i] - theta) > 1e-9:
            raise KeyError(f"theta {theta} not on the grid")
        return float(self.beta[i])

    def index_of(self, theta):
        i = int(np.argmin(np.abs(self.thetas - theta)))
        if abs(self.thetas[i] - theta) > 1e-9:
            raise KeyError(f"theta {theta} not on the grid")
        return i


def theta_grid(lo, hi, step):
    if step <= 0 or hi < lo:
        raise ValueError("grid needs lo <= hi and step > 0")
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 12)


def beta_curve(scheme, grid):
    """Pressure on a sorted grid with derivative and convexity diagnostics."""
    thetas = np.asarray(list(grid), dtype=float)
    if thetas.size == 0:
        raise ValueError("empty theta grid")
    if np.any(np.diff(thetas) <= 0):
        raise ValueError("theta grid must be strictly increasing")
    vals = [pressure(scheme, t) for t in thetas]
    beta = np.array([v.beta for v in vals])
    if thetas.size == 1:
        deriv = np.array([np.nan])
    else:
        deriv = np.gradient(beta, thetas, edge_order=1)
    second = beta[2:] - 2 * beta[1:-1] + beta[:-2] if thetas.size >= 3 else np.zeros(0)
    kinks = [float(thetas[i]) for i in range(1, len(vals)) if vals[i].maximal != vals[i - 1].maximal]
    return PressureCurve(thetas, beta, [v.per_component for v in vals], [v.maximal for v in vals],
                         deriv, second, bool(np.all(second >= -CONVEXITY_TOL)), kinks)


@dataclass
class SemisimplicityReport:
    theta: float
    pressures: tuple
    maximal: tuple
    chained: list   # (i, j) pairs of maximal components joined by a DAG path

    @property
    def passed(self):
        return not self.chained

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        body = ", ".join(f"C{i}={p:.6f}" for i, p in self.pressures)
        return f"theta={self.theta:g}: {verdict} maximal={list(self.maximal)} [{body}]"


def semisimplicity_check(scheme, theta):
    """No DAG path may join two distinct pressure-maximal components."""
    pv = pressure(scheme, theta)
    chained = [(i, j) for i in pv.maximal for j in pv.maximal if i != j and scheme.reaches(i, j)]
    return SemisimplicityReport(pv.theta, pv.per_component, pv.maximal, chained)


@dataclass
class SpectrumCurve:
    thetas: np.ndarray
    alpha: np.ndarray
    f: np.ndarray
    alpha_min: float
    alpha_max: float
    extrapolated: bool = True  # endpoints are grid-edge slopes, not limits

    def at_theta(self, theta):
        i = int(np.argmin(np.abs(self.thetas - theta)))
        if abs(self.thetas[i] - theta) > 1e-9:
            raise KeyError(f"theta {theta} not on the grid")
        return float(self.alpha[i]), float(self.f[i])

    def rows(self):
        return list(zip(self.thetas.tolist(), self.alpha.tolist(), self.f.tolist()))


def legendre(curve, tol=CONVEXITY_TOL):
    """alpha = -beta', f(alpha) = theta alpha + beta(theta)."""
    if curve.thetas.size < 2:
        raise ValueError("Legendre transform needs at least two grid points")
    if curve.second_differences.size and curve.second_differences.min() < -tol:
        raise ConvergenceError(
            f"pressure curve not convex (second difference {curve.second_differences.min():.3e})")
    alpha = -curve.derivative
    f = curve.thetas * alpha + curve.beta
    return SpectrumCurve(curve.thetas.copy(), alpha, f, float(alpha[-1]), float(alpha[0]))


def default_scheme(model, mu, aut=None, k=None, green=None):
    """Convenience: automaton + Green evaluator + potential for a model/walk pair."""
    from .automaton import builtin_automaton
    from .green import GreenEvaluator
    aut = aut or builtin_automaton(model)
    green = green or GreenEvaluator(mu)
    if k is None:
        k = 1 if green.exact else 4
    return build_potential(aut, green, k), green, aut


def depth_convergence(aut, green, k, theta=0.5):
    """Pressure at depths k and k+1 (generic models: must agree within 1e-3)."""
    a = pressure(build_potential(aut, green, k), theta).beta
    b = pressure(build_potential(aut, green, k + 1), theta).beta
    return a, b, abs(a - b)


# re-exported for callers that only import thermo
__all__ = [
    "PotentialScheme", "build_potential", "pressure", "beta_direct", "beta_curve",
    "semisimplicity_check", "legendre", "theta_grid", "PressureCurve", "SpectrumCurve",
    "default_scheme", "depth_convergence", "scc_decompose",
]
