"""A small hash-consed reduced ordered BDD, enough for the DFA compiler.

Nodes are integers; 0 and 1 are the terminals.  A variable's level is its
integer id, so variables created later sit lower in the order.
"""

from __future__ import annotations

import sys

FALSE_NODE = 0
TRUE_NODE = 1
_TERMINAL_LEVEL = sys.maxsize


class Manager:
    def __init__(self):
        self._level = [_TERMINAL_LEVEL, _TERMINAL_LEVEL]
        self._low = [0, 1]
        self._high = [0, 1]
        self._unique: dict[tuple[int, int, int], int] = {}
        self._ite_cache: dict[tuple[int, int, int], int] = {}
        self.num_vars = 0

    def __len__(self):
        return len(self._level)

    def new_var(self) -> int:
        """Allocate the next variable (below every existing one); return its level."""
        self.num_vars += 1
        return self.num_vars - 1

    def level(self, u: int) -> int:
        return self._level[u]

    def low(self, u: int) -> int:
        return self._low[u]

    def high(self, u: int) -> int:
        return self._high[u]

    def mk(self, level: int, low: int, high: int) -> int:
        if low == high:
            return low
        key = (level, low, high)
        u = self._unique.get(key)
        if u is None:
            u = len(self._level)
            self._level.append(level)
            self._low.append(low)
            self._high.append(high)
            self._unique[key] = u
        return u

    def var(self, level: int) -> int:
        return self.mk(level, FALSE_NODE, TRUE_NODE)

    def nvar(self, level: int) -> int:
        return self.mk(level, TRUE_NODE, FALSE_NODE)

    def ite(self, f: int, g: int, h: int) -> int:
        if f == TRUE_NODE:
            return g
        if f == FALSE_NODE:
            return h
        if g == h:
            return g
        if g == TRUE_NODE and h == FALSE_NODE:
            return f
        key = (f, g, h)
        r = self._ite_cache.get(key)
        if r is not None:
            return r
        lv = min(self._level[f], self._level[g], self._level[h])
        f0, f1 = self._cof(f, lv)
        g0, g1 = self._cof(g, lv)
        h0, h1 = self._cof(h, lv)
        r = self.mk(lv, self.ite(f0, g0, h0), self.ite(f1, g1, h1))
        self._ite_cache[key] = r
        return r

    def _cof(self, u: int, lv: int) -> tuple[int, int]:
        if self._level[u] == lv:
            return self._low[u], self._high[u]
        return u, u

    def conj(self, f: int, g: int) -> int:
        return self.ite(f, g, FALSE_NODE)

    def disj(self, f: int, g: int) -> int:
        return self.ite(f, TRUE_NODE, g)

    def neg(self, f: int) -> int:
        return self.ite(f, FALSE_NODE, TRUE_NODE)

    def compose(self, f: int, substitution) -> int:
        """Replace every variable ``v`` of ``f`` by ``substitution(v)`` simultaneously."""
        memo: dict[int, int] = {}

        def go(u):
            if u <= TRUE_NODE:
                return u
            r = memo.get(u)
            if r is None:
                r = self.ite(substitution(self._level[u]), go(self._high[u]), go(self._low[u]))
                memo[u] = r
            return r

        return go(f)

    def evaluate(self, f: int, value) -> bool:
        """Evaluate under the total assignment ``value(level) -> bool``."""
        u = f
        while u > TRUE_NODE:
            u = self._high[u] if value(self._level[u]) else self._low[u]
        return u == TRUE_NODE

    def support(self, f: int) -> set[int]:
        seen, out, stack = set(), set(), [f]
        while stack:
            u = stack.pop()
            if u <= TRUE_NODE or u in seen:
                continue
            seen.add(u)
            out.add(self._level[u])
            stack += (self._low[u], self._high[u])
        return out
