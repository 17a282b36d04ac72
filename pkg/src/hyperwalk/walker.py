"""Vectorized random walks on tree-like models.

Each walker keeps its normal form as a row of letter indices in a stack
array, so one step for all walkers is a handful of numpy operations.
"""
from __future__ import annotations

import numpy as np

from .group_model import POP, PUSH

CHUNK = 8192  # walkers per seed chunk; fixed so results do not depend on batching


def chunk_rngs(seed, total, chunk=CHUNK):
    """Yield ``(size, Generator)`` for consecutive chunks of ``total`` trials."""
    n_chunks = max(1, -(-total // chunk))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    done = 0
    for child in children:
        size = min(chunk, total - done)
        if size <= 0:
            break
        yield size, np.random.default_rng(child)
        done += size


class TreeWalker:
    """A batch of walkers started at the identity.

    ``target`` (a normal-form word) enables hit detection; ``log_f`` (one value
    per letter index) keeps a running log F(1, x) for nearest-neighbour walks.
    """

    def __init__(self, model, mu, size, max_depth, target=None, log_f=None):
        if not model.is_tree_like:
            raise ValueError("vectorized walker needs a tree-like model")
        self.model = model
        self.mu = mu
        self.size = size
        self.max_depth = max_depth
        self.stack = np.zeros((size, max_depth + mu.reach + 1), dtype=np.int8)
        self.depth = np.zeros(size, dtype=np.int64)
        comb = np.array(model.combine_table, dtype=np.int64)
        self._comb = comb
        self._words = [np.array([model.letter_index(c) for c in s.word], dtype=np.int64)
                       for s in mu.support]
        self._probs = mu.probs
        self._target = None
        if target is not None:
            self._target = np.array([model.letter_index(c) for c in target], dtype=np.int64)
            self.agree = np.zeros(size, dtype=np.int64)
        self._log_f = None
        if log_f is not None:
            self._log_f = np.asarray(log_f, dtype=float)
            self.log_f = np.zeros(size)

    # one letter for a subset of walkers
    def _apply(self, idx, letters):
        d = self.depth[idx]
        top = self.stack[idx, np.maximum(d - 1, 0)].astype(np.int64)
        op = np.where(d > 0, self._comb[top, letters], PUSH)
        push = op == PUSH
        pop = op == POP
        repl = ~(push | pop)
        t = self._target
        if push.any():
            i, dd, u = idx[push], d[push], letters[push]
            self.stack[i, dd] = u
            self.depth[i] = dd + 1
            if t is not None:
                a = self.agree[i]
                ok = (a == dd) & (dd < len(t))
                ok[ok] = t[dd[ok]] == u[ok]
                self.agree[i] = np.where(ok, a + 1, a)
            if self._log_f is not None:
                self.log_f[i] += self._log_f[u]
        if pop.any():
            i, dd = idx[pop], d[pop]
            if self._log_f is not None:
                self.log_f[i] -= self._log_f[self.stack[i, dd - 1]]
            self.depth[i] = dd - 1
            if t is not None:
                self.agree[i] = np.minimum(self.agree[i], dd - 1)
        if repl.any():
            i, dd, new = idx[repl], d[repl], op[repl]
            if self._log_f is not None:
                self.log_f[i] += self._log_f[new] - self._log_f[self.stack[i, dd - 1]]
            self.stack[i, dd - 1] = new
            if t is not None:
                a = np.minimum(self.agree[i], dd - 1)
                ok = (a == dd - 1) & (dd - 1 < len(t))
                ok[ok] = t[dd[ok] - 1] == new[ok]
                self.agree[i] = np.where(ok, dd, a)

    def step(self, rng, idx=None):
        """Advance the walkers in ``idx`` (default: all) by one increment."""
        if idx is None:
            idx = np.arange(self.size)
        if len(idx) == 0:
            return
        choice = rng.choice(len(self._words), size=len(idx), p=self._probs)
        for k, word in enumerate(self._words):
            if len(word) == 0:
                continue
            sel = idx[choice == k]
            if len(sel) == 0:
                continue
            for letter in word:
                self._apply(sel, np.full(len(sel), letter, dtype=np.int64))

    def hit(self):
        """Walkers currently sitting on the target."""
        n = len(self._target)
        return (self.agree == n) & (self.depth == n)

    def word(self, i):
        alphabet = self.model.alphabet
        return "".join(alphabet[c] for c in self.stack[i, :self.depth[i]])

    def words(self, idx=None):
        if idx is None:
            idx = range(self.size)
        return [self.word(i) for i in idx]
