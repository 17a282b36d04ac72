"""Strongly Markov automata: loading, validation, components and growth.

An automaton is a labelled digraph with an initial state; its length-n paths
from the initial state are meant to spell the normal forms of the sphere S_n
bijectively.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from math import gcd, log
from pathlib import Path

import numpy as np

from .errors import BudgetExceeded, ConvergenceError, ModelError, ParseError
from .group_model import DEFAULT_BUDGET, cayley_ball_bfs

INITIAL = "*"


@dataclass(frozen=True)
class Automaton:
    states: tuple
    initial: str
    edges: tuple  # (source, label, target)
    name: str = "automaton"
    _out: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.states)) != len(self.states):
            raise ModelError("duplicate automaton states")
        known = set(self.states)
        if self.initial not in known:
            raise ModelError(f"initial state {self.initial!r} is not a declared state")
        out = {s: [] for s in self.states}
        for src, label, dst in self.edges:
            if src not in known or dst not in known:
                raise ModelError(f"edge {src} {label} {dst} uses an undeclared state")
            out[src].append((label, dst))
        object.__setattr__(self, "_out", {s: tuple(v) for s, v in out.items()})
        seen = _reachable(self.initial, lambda s: (d for _, d in self._out[s]))
        missing = [s for s in self.states if s not in seen]
        if missing:
            raise ModelError(f"states unreachable from {self.initial!r}: {missing}")

    def out_edges(self, state):
        return self._out[state]

    @property
    def labels(self):
        return {label for _, label, _ in self.edges}

    def check_labels(self, model):
        bad = sorted(self.labels - set(model.alphabet))
        if bad:
            raise ModelError(f"edge labels not in the generator set: {bad}")

    def index(self):
        return {s: i for i, s in enumerate(self.states)}

    def adjacency(self):
        """Dense adjacency counts (parallel edges add)."""
        idx = self.index()
        A = np.zeros((len(self.states), len(self.states)))
        for src, _, dst in self.edges:
            A[idx[src], idx[dst]] += 1.0
        return A


def _reachable(start, successors):
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in successors(s):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


# ------------------------------------------------------------------ builders
def builtin_automaton(model):
    """Canonical automaton of a model.

    Tree-like models get the no-backtracking automaton: the initial state plus
    one state per letter (the last letter read).  Rewriting models get the
    recognizer of irreducible words, see :func:`rewriting_automaton`.
    """
    if not model.is_tree_like:
        return rewriting_automaton(model)
    states = (INITIAL,) + model.alphabet
    edges = [(INITIAL, u, u) for u in model.alphabet]
    for s in model.alphabet:
        edges.extend((s, u, u) for u in model.next_letters(s))
    return Automaton(states, INITIAL, tuple(edges), name=f"builtin:{model.name}")


def rewriting_automaton(model):
    """Aho-Corasick style recognizer of words avoiding every rule left side.

    States are the longest suffixes of the word read so far that are proper
    prefixes of some left side; the initial state is the empty suffix.
    """
    lhs_set = {lhs for lhs, _ in model._all_rules}
    prefixes = {""}
    for lhs in lhs_set:
        prefixes.update(lhs[:i] for i in range(1, len(lhs)))

    def contains_lhs(word):
        return any(word.endswith(lhs) for lhs in lhs_set)

    def step(state, c):
        w = state + c
        for i in range(len(w) + 1):
            if w[i:] in prefixes:
                return w[i:]
        return ""

    name = lambda p: p or INITIAL  # noqa: E731
    edges, seen = [], {""}
    queue = deque([""])
    while queue:
        p = queue.popleft()
        for c in model.alphabet:
            w = p + c
            # p is the longest relevant suffix, so any left side ending here ends inside w
            if contains_lhs(w):
                continue
            q = step(p, c)
            edges.append((name(p), c, name(q)))
            if q not in seen:
                seen.add(q)
                queue.append(q)
    states = tuple(sorted((name(p) for p in seen), key=lambda s: (s != INITIAL, len(s), s)))
    return Automaton(states, INITIAL, tuple(edges), name=f"recognizer:{model.name}")


# --------------------------------------------------------------- file format
def parse_automaton(text, path=None, model=None):
    """Parse ``states ...`` / ``initial s`` header lines and ``from label to`` edges."""
    states, initial, edges = None, None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "states":
            states = tuple(parts[1:])
            if not states:
                raise ParseError("empty states line", lineno, path)
        elif parts[0] == "initial":
            if len(parts) != 2:
                raise ParseError("expected 'initial STATE'", lineno, path)
            initial = parts[1]
        elif len(parts) == 3:
            if states is None:
                raise ParseError("edge before 'states' header", lineno, path)
            src, label, dst = parts
            for s in (src, dst):
                if s not in states:
                    raise ParseError(f"unknown state {s!r}", lineno, path)
            if len(label) != 1:
                raise ParseError(f"edge label {label!r} must be a single letter", lineno, path)
            if model is not None and label not in model.alphabet:
                raise ParseError(f"edge label {label!r} not in the generator set", lineno, path)
            edges.append((src, label, dst))
        else:
            raise ParseError(f"cannot parse line {raw.strip()!r}", lineno, path)
    if states is None or initial is None:
        raise ParseError("missing 'states' or 'initial' header", 0, path)
    try:
        return Automaton(states, initial, tuple(edges), name=Path(path).stem if path else "automaton")
    except ModelError as exc:
        raise ParseError(str(exc), 0, path) from None


def format_automaton(aut):
    lines = ["states " + " ".join(aut.states), f"initial {aut.initial}"]
    lines += [f"{s} {label} {t}" for s, label, t in aut.edges]
    return "\n".join(lines) + "\n"


def load_automaton(path, model=None):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"automaton file not found: {path}")
    return parse_automaton(path.read_text(), path=str(path), model=model)


# -------------------------------------------------------------- enumeration
def sphere_paths(aut, n, budget=DEFAULT_BUDGET):
    """Label words of all length-n paths from the initial state."""
    if n < 0:
        raise ValueError("path length must be non-negative")
    layer = [("", aut.initial)]
    for _ in range(n):
        nxt = []
        for word, state in layer:
            for label, dst in aut.out_edges(state):
                nxt.append((word + label, dst))
        if len(nxt) > budget:
            raise BudgetExceeded(f"path enumeration exceeded budget of {budget}")
        layer = nxt
    return [w for w, _ in layer]


def path_counts(aut, n):
    """|paths of length k| for k = 0..n via the adjacency matrix (exact integers)."""
    idx = aut.index()
    counts = [0] * len(aut.states)
    counts[idx[aut.initial]] = 1
    out = [1]
    succ = [[idx[d] for _, d in aut.out_edges(s)] for s in aut.states]
    for _ in range(n):
        nxt = [0] * len(counts)
        for i, c in enumerate(counts):
            if c:
                for j in succ[i]:
                    nxt[j] += c
        counts = nxt
        out.append(sum(counts))
    return out


@dataclass
class ValidationReport:
    depth: int
    path_counts: list
    sphere_sizes: list
    missing: list = field(default_factory=list)       # (n, word) in S_n with no path
    extra: list = field(default_factory=list)         # (n, word) path not in S_n
    duplicates: list = field(default_factory=list)    # (n, word) spelled by two paths
    non_geodesic: list = field(default_factory=list)  # (n, word) path whose reduction is shorter
    bad_labels: list = field(default_factory=list)

    @property
    def passed(self):
        return not (self.missing or self.extra or self.duplicates or self.non_geodesic or self.bad_labels)

    def lines(self):
        yield f"depth {self.depth}: {'PASS' if self.passed else 'FAIL'}"
        for n, (p, s) in enumerate(zip(self.path_counts, self.sphere_sizes)):
            yield f"  n={n:<3d} paths={p:<10d} |S_n|={s:<10d} {'ok' if p == s else 'MISMATCH'}"
        for tag, items in (("missing", self.missing), ("extra", self.extra),
                           ("duplicate", self.duplicates), ("non-geodesic", self.non_geodesic)):
            for n, w in items[:5]:
                yield f"  {tag}: n={n} word={w or '1'}"
        for label in self.bad_labels:
            yield f"  unknown label: {label}"

    def __str__(self):
        return "\n".join(self.lines())


def validate(aut, model, depth, budget=DEFAULT_BUDGET, max_examples=20):
    """Check path-to-sphere bijectivity and geodesicity for every n <= depth.

    The reference spheres come from breadth-first search of the Cayley graph,
    independently of both the automaton and the normal-form extension rules.
    """
    bad = sorted(aut.labels - set(model.alphabet))
    spheres = cayley_ball_bfs(model, depth, budget=budget)
    report = ValidationReport(depth, [], [len(s) for s in spheres], bad_labels=bad)
    if bad:
        report.path_counts = path_counts(aut, depth)
        return report
    for n in range(depth + 1):
        words = sphere_paths(aut, n, budget=budget)
        report.path_counts.append(len(words))
        target = set(spheres[n])
        seen = set()
        for w in words:
            if w in seen:
                if len(report.duplicates) < max_examples:
                    report.duplicates.append((n, w))
                continue
            seen.add(w)
            if w not in target:
                if len(model.reduce(w).word) < n:
                    if len(report.non_geodesic) < max_examples:
                        report.non_geodesic.append((n, w))
                elif len(report.extra) < max_examples:
                    report.extra.append((n, w))
        for w in spheres[n]:
            if w not in seen:
                if len(report.missing) < max_examples:
                    report.missing.append((n, w))
    return report


# ------------------------------------------------------------------ components
@dataclass(frozen=True)
class Component:
    index: int
    states: tuple
    nontrivial: bool
    period: int            # 0 for transient singletons
    classes: tuple         # cyclic classes, tuple of state tuples

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class ComponentDecomposition:
    components: tuple
    component_of: dict
    dag: frozenset  # (i, j): an edge leaves component i into component j != i

    @property
    def nontrivial(self):
        return [c for c in self.components if c.nontrivial]

    def successors(self, i):
        return [j for a, j in self.dag if a == i]

    def reaches(self, i, j):
        """True if a directed path of length >= 1 in the DAG joins i to j."""
        stack, seen = list(self.successors(i)), set()
        while stack:
            k = stack.pop()
            if k == j:
                return True
            if k not in seen:
                seen.add(k)
                stack.extend(self.successors(k))
        return False


def _tarjan(nodes, succ):
    """Iterative Tarjan; components come out in reverse topological order."""
    index, low, on_stack = {}, {}, set()
    stack, result = [], []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                result.append(comp)
    return result


def _period(states, succ):
    """gcd of level[u] + 1 - level[v] over internal edges, plus cyclic classes."""
    members = set(states)
    root = states[0]
    level = {root: 0}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in succ[u]:
            if v in members and v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    p = 0
    for u in states:
        for v in succ[u]:
            if v in members:
                p = gcd(p, abs(level[u] + 1 - level[v]))
    classes = tuple(tuple(s for s in states if level[s] % p == r) for r in range(p))
    return p, classes


def scc_decompose(aut):
    succ = {s: [d for _, d in aut.out_edges(s)] for s in aut.states}
    order = {s: i for i, s in enumerate(aut.states)}
    raw = _tarjan(aut.states, succ)
    raw.reverse()  # topological order: sources first
    comps, comp_of = [], {}
    for i, members in enumerate(raw):
        members = tuple(sorted(members, key=order.get))
        for s in members:
            comp_of[s] = i
        loop = any(d in members for s in members for d in succ[s])
        if loop:
            p, classes = _period(members, succ)
        else:
            p, classes = 0, ()
        comps.append(Component(i, members, loop, p, classes))
    dag = frozenset((comp_of[s], comp_of[d]) for s in aut.states for d in succ[s]
                    if comp_of[s] != comp_of[d])
    return ComponentDecomposition(tuple(comps), comp_of, dag)


# ---------------------------------------------------------------- Perron root
def perron_root(M, tol=1e-12, max_iter=1_000_000):
    """Perron eigenvalue of a nonnegative irreducible matrix.

    Power iteration on M + cI (the shift removes periodicity) with
    Collatz-Wielandt bounds min(Mx/x) <= rho <= max(Mx/x) as the stopping rule.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 0:
        raise ValueError("empty matrix")
    if (M < 0).any():
        raise ValueError("matrix must be nonnegative")
    if n == 1:
        return float(M[0, 0])
    scale = M.max()
    if scale == 0:
        return 0.0
    A = M / scale
    c = max(A.sum(axis=1).mean(), 1e-3)
    x = np.ones(n)
    lo = hi = 0.0
    for _ in range(max_iter):
        y = A @ x
        if (x <= 0).any():
            raise ValueError("matrix is not irreducible")
        ratio = y / x
        lo, hi = ratio.min(), ratio.max()
        if hi - lo <= tol * max(hi, 1e-300):
            return float(0.5 * (lo + hi) * scale)
        x = y + c * x
        x /= x.max()
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps "
                           f"(bounds {lo * scale:.3e}..{hi * scale:.3e})")


def component_matrix(M, comp, index):
    ids = [index[s] for s in comp.states]
    return M[np.ix_(ids, ids)]


def growth_rate(aut, decomposition=None):
    """v = max over non-trivial components of log rho(A_C)."""
    dec = decomposition or scc_decompose(aut)
    A = aut.adjacency()
    idx = aut.index()
    best = float("-inf")
    for comp in dec.nontrivial:
        rho = perron_root(component_matrix(A, comp, idx))
        if rho > 0:
            best = max(best, log(rho))
    return best
