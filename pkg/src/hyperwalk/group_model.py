"""Concrete hyperbolic groups as reduced words.

Two families are supported:

* ``free`` / ``free_product``: free products of cyclic factors of order
  infinity, 2 or 3.  Each factor contributes one generator letter (and its
  upper-case inverse unless the factor has order 2).  Normal forms are the
  freely/factor-reduced words; every letter is a full syllable, so the Cayley
  graph is a tree (of triangles, when order-3 factors are present).
* ``rewriting``: a user supplied shortlex-decreasing rewriting system.  Its
  irreducible words are the normal forms; word length is the normal-form
  length, which is the word metric as long as the system is confluent and
  shortlex (irreducible words are then shortlex-minimal, hence geodesic).

Letters are single characters and elements are stored as normal-form strings.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .errors import BudgetExceeded, ModelError, ParseError

INFINITE = 0
PUSH = -1
POP = -2

DEFAULT_BUDGET = 2_000_000


class GroupModel:
    """A finitely generated group with exact normal forms.

    Instances are immutable after construction.  Use :func:`free_group`,
    :func:`free_product` or :func:`rewriting_model` rather than calling the
    constructor directly.
    """

    def __init__(self, kind, alphabet, inverse, *, orders=None, factor_of=None,
                 rules=(), delta=0.0, name=None, confluence_depth=10):
        if kind not in ("free", "free_product", "rewriting"):
            raise ModelError(f"unknown model kind {kind!r}")
        alphabet = tuple(alphabet)
        if len(set(alphabet)) != len(alphabet):
            raise ModelError("duplicate generator letters")
        for letter in alphabet:
            if len(letter) != 1 or letter in "1 \t#":
                raise ModelError(f"invalid generator letter {letter!r}")
            if inverse.get(letter) not in alphabet:
                raise ModelError(f"generator {letter!r} has no inverse in S")
            if inverse[inverse[letter]] != letter:
                raise ModelError(f"inverse pairing is not an involution at {letter!r}")
        if delta < 0:
            raise ModelError("hyperbolicity constant must be non-negative")
        self._kind = kind
        self._alphabet = alphabet
        self._inverse = dict(inverse)
        self._index = {s: i for i, s in enumerate(alphabet)}
        self._delta = float(delta)
        self._name = name or kind
        self._orders = dict(orders or {})
        self._factor_of = dict(factor_of or {})
        self._rules = tuple(rules)
        self._confluence_depth = confluence_depth
        if self.is_tree_like:
            self._build_combine_table()
        else:
            self._prepare_rewriting()

    # ------------------------------------------------------------------ props
    @property
    def kind(self):
        return self._kind

    @property
    def name(self):
        return self._name

    @property
    def alphabet(self):
        return self._alphabet

    @property
    def delta(self):
        return self._delta

    @property
    def rules(self):
        return self._rules

    @property
    def is_tree_like(self):
        """True for free products of cyclic groups (exact tree machinery)."""
        return self._kind != "rewriting"

    @property
    def cayley_is_tree(self):
        """True when the Cayley graph is a tree (no order-3 factors)."""
        return self.is_tree_like and all(o != 3 for o in self._orders.values())

    def letter_index(self, letter):
        try:
            return self._index[letter]
        except KeyError:
            raise ModelError(f"unknown generator letter {letter!r}") from None

    def inverse_letter(self, letter):
        self.letter_index(letter)
        return self._inverse[letter]

    def factor(self, letter):
        """Factor label of a letter (tree-like models only)."""
        return self._factor_of[letter]

    def factor_order(self, letter):
        return self._orders[self._factor_of[letter]]

    def sort_key(self, word):
        """Lexicographic key following the declared alphabet order."""
        return tuple(self._index[c] for c in word)

    def __repr__(self):
        return f"GroupModel({self._name!r}, kind={self._kind!r}, S={''.join(self._alphabet)!r})"

    # ---------------------------------------------------------- tree machinery
    def _build_combine_table(self):
        n = len(self._alphabet)
        table = [[PUSH] * n for _ in range(n)]
        for i, top in enumerate(self._alphabet):
            for j, u in enumerate(self._alphabet):
                if self._factor_of[top] != self._factor_of[u]:
                    continue
                order = self._orders[self._factor_of[top]]
                if u == self._inverse[top]:
                    table[i][j] = POP
                elif order == 3:
                    # t.t = t^{-1} inside Z_3
                    table[i][j] = self._index[self._inverse[top]]
        self._combine = table
        self._next = {"": tuple(self._alphabet)}
        for i, top in enumerate(self._alphabet):
            self._next[top] = tuple(u for j, u in enumerate(self._alphabet) if table[i][j] == PUSH)

    @property
    def combine_table(self):
        """``table[i][j]``: PUSH, POP, or the replacement letter index for top i times letter j."""
        return [row[:] for row in self._combine]

    def next_letters(self, last):
        """Letters that may follow ``last`` ('' for the empty word) in a normal form."""
        return self._next[last]

    def _tree_reduce(self, stack, letters):
        index = self._index
        comb = self._combine
        alphabet = self._alphabet
        for c in letters:
            j = index.get(c)
            if j is None:
                raise ModelError(f"unknown generator letter {c!r}")
            if not stack:
                stack.append(c)
                continue
            op = comb[index[stack[-1]]][j]
            if op == PUSH:
                stack.append(c)
            elif op == POP:
                stack.pop()
            else:
                stack[-1] = alphabet[op]
        return "".join(stack)

    # ----------------------------------------------------- rewriting machinery
    def _shortlex_less(self, u, v):
        if len(u) != len(v):
            return len(u) < len(v)
        return self.sort_key(u) < self.sort_key(v)

    def _prepare_rewriting(self):
        rules = []
        for lhs, rhs in self._rules:
            for c in lhs + rhs:
                self.letter_index(c)
            if not lhs:
                raise ModelError("rewriting rule with empty left-hand side")
            if not self._shortlex_less(rhs, lhs):
                raise ModelError(f"rule {lhs}->{rhs or '1'} is not shortlex decreasing")
            rules.append((lhs, rhs))
        present = {lhs for lhs, _ in rules}
        for s in self._alphabet:
            lhs = s + self._inverse[s]
            if lhs not in present:
                rules.append((lhs, ""))
                present.add(lhs)
        self._all_rules = tuple(rules)
        self._max_lhs = max(len(lhs) for lhs, _ in rules)
        self.check_confluence(self._confluence_depth)

    def _rewrite(self, prefix, letters):
        out = list(prefix)
        pending = deque(letters)
        rules = self._all_rules
        while pending:
            c = pending.popleft()
            if c not in self._index:
                raise ModelError(f"unknown generator letter {c!r}")
            out.append(c)
            tail = "".join(out[-self._max_lhs:])
            for lhs, rhs in rules:
                if tail.endswith(lhs):
                    del out[len(out) - len(lhs):]
                    pending.extendleft(reversed(rhs))
                    break
        return "".join(out)

    def check_confluence(self, max_length):
        """Resolve every critical pair whose overlap word has length <= max_length.

        Raises :class:`ModelError` on the first pair with distinct normal forms.
        """
        if self.is_tree_like:
            return
        rules = self._all_rules
        for l1, r1 in rules:
            for l2, r2 in rules:
                # overlap: suffix of l1 equals prefix of l2
                for k in range(1, min(len(l1), len(l2))):
                    if l1[-k:] != l2[:k]:
                        continue
                    word = l1 + l2[k:]
                    if len(word) > max_length:
                        continue
                    a = self._rewrite("", r1 + l2[k:])
                    b = self._rewrite("", l1[:-k] + r2)
                    if a != b:
                        raise ModelError(
                            f"non-confluent rewriting: {word} reduces to {a or '1'} and {b or '1'}")
                # inclusion: l2 inside l1
                if l1 != l2 and len(l2) <= len(l1) and len(l1) <= max_length:
                    start = l1.find(l2)
                    while start >= 0:
                        a = self._rewrite("", r1)
                        b = self._rewrite("", l1[:start] + r2 + l1[start + len(l2):])
                        if a != b:
                            raise ModelError(
                                f"non-confluent rewriting: {l1} reduces to {a or '1'} and {b or '1'}")
                        start = l1.find(l2, start + 1)

    # ------------------------------------------------------------- group law
    def reduce(self, word):
        """Normal form of a generator sequence (string or iterable of letters)."""
        if not isinstance(word, str):
            word = "".join(word)
        if word == "1":
            word = ""
        if self.is_tree_like:
            return Element(self._tree_reduce([], word), self)
        return Element(self._rewrite("", word), self)

    def element(self, word):
        return self.reduce(word)

    @property
    def identity(self):
        return Element("", self)

    def generators(self):
        return [Element(s, self) for s in self._alphabet]

    def multiply(self, x, y):
        _check_same(x, y)
        if self.is_tree_like:
            return Element(self._tree_reduce(list(x.word), y.word), self)
        return Element(self._rewrite(x.word, y.word), self)

    def multiply_word(self, x, word):
        """x times an arbitrary generator word (x assumed in normal form)."""
        if self.is_tree_like:
            return Element(self._tree_reduce(list(x.word), word), self)
        return Element(self._rewrite(x.word, word), self)

    def inverse_word(self, word):
        inv = self._inverse
        return "".join(inv[c] for c in reversed(word))

    def inverse(self, x):
        return self.reduce(self.inverse_word(x.word))

    def word_distance(self, u, v):
        """d(u, v) for normal-form strings u, v."""
        if self.is_tree_like:
            p = common_prefix_length(u, v)
            d = len(u) + len(v) - 2 * p
            if p < len(u) and p < len(v):
                a, b = u[p], v[p]
                if self._factor_of[a] == self._factor_of[b] and self._orders[self._factor_of[a]] == 3:
                    d -= 1
            return d
        return len(self._rewrite(self.inverse_word(u), v))


def common_prefix_length(a, b):
    """Length of the longest common prefix (binary search on C-level slices)."""
    n = min(len(a), len(b))
    if a[:n] == b[:n]:
        return n
    lo, hi = 0, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if a[:mid] == b[:mid]:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class Element:
    """A group element stored by its normal-form word."""

    word: str
    model: GroupModel = field(compare=False, hash=False, repr=False)

    def __len__(self):
        return len(self.word)

    @property
    def length(self):
        return len(self.word)

    def __mul__(self, other):
        return self.model.multiply(self, other)

    def inverse(self):
        return self.model.inverse(self)

    def __str__(self):
        return self.word or "1"


def _check_same(x, y):
    if x.model is not y.model:
        raise ModelError("elements belong to different group models")


@dataclass(frozen=True)
class ShadowSpec:
    """Shadow S(x, R) with apex x and radius R >= 4*delta."""

    apex: Element
    radius: int = 0

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("shadow radius must be non-negative")
        if self.radius < 4 * self.apex.model.delta:
            raise ValueError(
                f"shadow radius {self.radius} below 4*delta = {4 * self.apex.model.delta}")


# ---------------------------------------------------------------- factories
def free_product(factors, delta=0.0, name=None):
    """Free product of cyclic groups.

    ``factors`` is a sequence of ``(letter, order)`` with order ``0``/``None``
    (infinite), 2 or 3; the inverse of a non-involutive letter is its upper
    case.
    """
    alphabet, inverse, orders, factor_of = [], {}, {}, {}
    all_free = True
    for letter, order in factors:
        order = INFINITE if order in (None, 0, float("inf"), "inf") else int(order)
        if order not in (INFINITE, 2, 3):
            raise ModelError(
                f"factor {letter!r}: order {order} unsupported (use 2, 3 or inf; "
                "larger orders via a rewriting model)")
        if not letter.islower():
            raise ModelError(f"factor generator {letter!r} must be a lower-case letter")
        if letter in orders:
            raise ModelError(f"duplicate factor {letter!r}")
        orders[letter] = order
        alphabet.append(letter)
        factor_of[letter] = letter
        if order == 2:
            inverse[letter] = letter
            all_free = False
        else:
            up = letter.upper()
            alphabet.append(up)
            inverse[letter], inverse[up] = up, letter
            factor_of[up] = letter
            all_free &= order == INFINITE
    kind = "free" if all_free else "free_product"
    if not name:
        name = "*".join(f"Z{orders[f]}" if orders[f] else "Z" for f in orders)
        if all_free:
            name = f"F{len(orders)}"
    return GroupModel(kind, alphabet, inverse, orders=orders, factor_of=factor_of,
                      delta=delta, name=name)


def free_group(rank=2, letters=None):
    """Free group on ``rank`` generators a, b, c, ... (inverses upper case)."""
    letters = letters or "abcdefghijklmnopqrstuvwxyz"[:rank]
    return free_product([(c, INFINITE) for c in letters])


def z2_z3():
    """PSL(2, Z) as Z_2 * Z_3 with S = {s, t, T}."""
    return free_product([("s", 2), ("t", 3)], name="Z2*Z3")


def rewriting_model(alphabet, inverse, rules, delta, name=None, confluence_depth=10):
    """Generic model from a confluent shortlex rewriting system.

    Free cancellation rules ``s s^-1 -> 1`` are added automatically.
    """
    return GroupModel("rewriting", alphabet, dict(inverse), rules=tuple(rules),
                      delta=delta, name=name or "rewriting", confluence_depth=confluence_depth)


BUILTIN_MODELS = {
    "F2": lambda: free_group(2),
    "F3": lambda: free_group(3),
    "Z2*Z3": z2_z3,
}


def builtin_model(name):
    try:
        return BUILTIN_MODELS[name]()
    except KeyError:
        raise ModelError(f"unknown builtin model {name!r}; known: {sorted(BUILTIN_MODELS)}") from None


# --------------------------------------------------------------- model file
def parse_model(text, path=None):
    """Parse the line-oriented model format (see README, "Model files")."""
    kind = None
    factors, generators, inverse, rules = [], [], {}, []
    delta = None
    name = None
    depth = 10
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, rest = line.partition(" ")
        args = rest.split()
        try:
            if key == "kind":
                if len(args) != 1 or args[0] not in ("free", "free_product", "rewriting"):
                    raise ParseError(f"bad kind line {raw.strip()!r}", lineno, path)
                kind = args[0]
            elif key == "name":
                name = rest.strip()
            elif key == "factor":
                if len(args) != 2:
                    raise ParseError("expected 'factor LETTER ORDER'", lineno, path)
                order = args[1]
                factors.append((args[0], INFINITE if order == "inf" else int(order)))
            elif key == "generators":
                generators.extend(args)
            elif key == "inverse":
                if len(args) != 2:
                    raise ParseError("expected 'inverse X Y'", lineno, path)
                x, y = args
                inverse[x], inverse[y] = y, x
            elif key == "involution":
                for x in args:
                    inverse[x] = x
            elif key == "rule":
                lhs, arrow, rhs = rest.partition("->")
                if not arrow:
                    raise ParseError("expected 'rule LHS -> RHS'", lineno, path)
                lhs, rhs = lhs.strip(), rhs.strip()
                rules.append((lhs, "" if rhs in ("", "1") else rhs))
            elif key == "delta":
                delta = float(args[0])
            elif key == "confluence_depth":
                depth = int(args[0])
            else:
                raise ParseError(f"unknown directive {key!r}", lineno, path)
        except ValueError as exc:
            raise ParseError(str(exc), lineno, path) from None
    if kind is None:
        raise ParseError("missing 'kind' line", 0, path)
    try:
        if kind in ("free", "free_product"):
            if generators and not factors:
                factors = [(g, INFINITE) for g in generators]
            if not factors:
                raise ParseError("no factors declared", 0, path)
            return free_product(factors, delta=delta or 0.0, name=name)
        if delta is None:
            raise ParseError("rewriting models require a 'delta' line", 0, path)
        for g in generators:
            if g not in inverse:
                raise ParseError(f"generator {g!r} has no inverse line", 0, path)
        alphabet = list(generators)
        for g in generators:
            if inverse[g] not in alphabet:
                alphabet.append(inverse[g])
        return rewriting_model(alphabet, inverse, rules, delta, name=name, confluence_depth=depth)
    except ModelError as exc:
        raise ParseError(str(exc), 0, path) from None


def load_model(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    return parse_model(path.read_text(), path=str(path))


def format_model(model):
    """Serialize a model back into the model-file format."""
    lines = [f"kind {model.kind}", f"name {model.name}"]
    if model.is_tree_like:
        for f, order in model._orders.items():
            lines.append(f"factor {f} {order or 'inf'}")
    else:
        seen = set()
        gens = []
        for s in model.alphabet:
            if s in seen:
                continue
            t = model.inverse_letter(s)
            seen.update((s, t))
            gens.append(s)
            lines.append(f"involution {s}" if s == t else f"inverse {s} {t}")
        lines.insert(2, "generators " + " ".join(gens))
        for lhs, rhs in model.rules:
            lines.append(f"rule {lhs} -> {rhs or '1'}")
    lines.append(f"delta {model.delta:g}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------- operations
def reduce(word, model):
    """Normal form of ``word`` in ``model``."""
    return model.reduce(word)


def distance(x, y):
    """Word metric d(x, y) = |x^-1 y|."""
    _check_same(x, y)
    return x.model.word_distance(x.word, y.word)


def gromov_product(x, y):
    """(x|y) based at the identity; a half-integer."""
    return (len(x.word) + len(y.word) - distance(x, y)) / 2


def geodesic_prefixes(x):
    """Normal-form prefixes 1, x_1, x_1 x_2, ..., x (a geodesic from 1 to x)."""
    w = x.word
    return [Element(w[:i], x.model) for i in range(len(w) + 1)]


def shadow_contains(spec, y):
    """Cone proxy for y's membership in the shadow: (x|y) >= |x| - R."""
    x = spec.apex
    if len(y.word) < len(x.word):
        raise ValueError(f"|y| = {len(y.word)} shorter than apex length {len(x.word)}")
    return gromov_product(x, y) >= len(x.word) - spec.radius


def busemann_along(ray_prefix, g, n):
    """Finite-stage Busemann approximant d(g, gamma(n)) - d(gamma(n), 1)."""
    if n < 0 or n >= len(ray_prefix):
        raise IndexError(f"index {n} outside ray prefix of length {len(ray_prefix)}")
    point = ray_prefix[n]
    return distance(g, point) - len(point.word)


def sphere_words(model, n, budget=DEFAULT_BUDGET):
    """Normal forms of length exactly n, in lexicographic (alphabet) order.

    Tree-like models extend normal forms letter by letter; rewriting models
    read the paths of their irreducible-word automaton.
    """
    if n < 0:
        raise ValueError("radius must be non-negative")
    if not model.is_tree_like:
        from .automaton import rewriting_automaton, sphere_paths
        return sorted(sphere_paths(rewriting_automaton(model), n, budget=budget), key=model.sort_key)
    sphere = [""]
    total = 1
    for _ in range(n):
        nxt = []
        for w in sphere:
            last = w[-1] if w else ""
            for u in model.next_letters(last):
                nxt.append(w + u)
        total += len(nxt)
        if total > budget:
            raise BudgetExceeded(f"sphere enumeration exceeded budget of {budget} elements")
        sphere = nxt
    return sphere


def _bfs_spheres(model, n, budget):
    seen = {""}
    frontier = [""]
    yield 0, frontier
    for k in range(1, n + 1):
        nxt = set()
        for w in frontier:
            x = Element(w, model)
            for s in model.alphabet:
                y = model.multiply_word(x, s).word
                if y not in seen:
                    nxt.add(y)
        seen.update(nxt)
        if len(seen) > budget:
            raise BudgetExceeded(f"ball enumeration exceeded budget of {budget} elements")
        frontier = sorted(nxt, key=model.sort_key)
        yield k, frontier


def cayley_ball_bfs(model, n, budget=DEFAULT_BUDGET):
    """Brute-force spheres S_0..S_n by breadth-first search with the group law.

    Independent of the normal-form extension rules; used as an oracle.
    """
    return [words for _, words in _bfs_spheres(model, n, budget)]


def ball_enumerate(model, n, budget=DEFAULT_BUDGET, automaton=None):
    """Yield ``(k, [Element, ...])`` for the spheres S_0, ..., S_n.

    When an automaton is supplied, spheres are produced from its labelled
    paths.  Otherwise tree-like models use normal-form extension and rewriting
    models use the recognizer of irreducible words.
    """
    if n < 0:
        raise ValueError("radius must be non-negative")
    total = 0
    if automaton is None and not model.is_tree_like:
        from .automaton import rewriting_automaton
        automaton = rewriting_automaton(model)
    if automaton is not None:
        from .automaton import sphere_paths
        for k in range(n + 1):
            words = sorted(sphere_paths(automaton, k, budget=budget - total), key=model.sort_key)
            total += len(words)
            yield k, [Element(w, model) for w in words]
        return
    sphere = [""]
    for k in range(n + 1):
        total += len(sphere)
        if total > budget:
            raise BudgetExceeded(f"ball enumeration exceeded budget of {budget} elements")
        yield k, [Element(w, model) for w in sphere]
        if k == n:
            break
        sphere = [w + u for w in sphere for u in model.next_letters(w[-1] if w else "")]
