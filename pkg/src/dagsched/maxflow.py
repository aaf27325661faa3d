"""Dinic max-flow over exact rational capacities.

Used both to detect tight/deficient right-side sets (Hall-style feasibility)
and to realize fractional edge assignments.  Capacities are Fractions, so cuts
and flows are exact.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction
from typing import List, Optional, Set

__all__ = ["FlowNetwork"]


class FlowNetwork:
    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.head: List[List[int]] = [[] for _ in range(n_nodes)]
        self.to: List[int] = []
        self.cap: List[Fraction] = []

    def add_edge(self, u: int, v: int, cap: Fraction) -> int:
        """Returns the edge index; the reverse edge is index ^ 1."""
        idx = len(self.to)
        self.head[u].append(idx)
        self.to.append(v)
        self.cap.append(cap)
        self.head[v].append(idx + 1)
        self.to.append(u)
        self.cap.append(Fraction(0))
        return idx

    def flow_on(self, idx: int) -> Fraction:
        return self.cap[idx ^ 1]

    def _bfs_levels(self, s: int, t: int) -> Optional[List[int]]:
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for idx in self.head[u]:
                v = self.to[idx]
                if self.cap[idx] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[t] >= 0 else None

    def _blocking(self, s: int, t: int, level: List[int], it: List[int]) -> Fraction:
        total = Fraction(0)
        # iterative DFS with an explicit path stack
        stack: List[int] = [s]
        path: List[int] = []  # edge indices along current path
        while stack:
            u = stack[-1]
            if u == t:
                aug = min(self.cap[idx] for idx in path)
                for idx in path:
                    self.cap[idx] -= aug
                    self.cap[idx ^ 1] += aug
                total += aug
                # backtrack to the first saturated edge on the path
                for pos, idx in enumerate(path):
                    if self.cap[idx] == 0:
                        del stack[pos + 1 :]
                        del path[pos:]
                        break
                continue
            advanced = False
            while it[u] < len(self.head[u]):
                idx = self.head[u][it[u]]
                v = self.to[idx]
                if self.cap[idx] > 0 and level[v] == level[u] + 1:
                    stack.append(v)
                    path.append(idx)
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                level[u] = -1  # dead end
                stack.pop()
                if path:
                    path.pop()
        return total

    def max_flow(self, s: int, t: int) -> Fraction:
        total = Fraction(0)
        while True:
            level = self._bfs_levels(s, t)
            if level is None:
                return total
            it = [0] * self.n
            total += self._blocking(s, t, level, it)

    def residual_reachable(self, s: int) -> Set[int]:
        """Nodes reachable from s along positive-residual edges (source cut side)."""
        seen = {s}
        q = deque([s])
        while q:
            u = q.popleft()
            for idx in self.head[u]:
                v = self.to[idx]
                if self.cap[idx] > 0 and v not in seen:
                    seen.add(v)
                    q.append(v)
        return seen

    def residual_coreachable(self, t: int) -> Set[int]:
        """Nodes with a positive-residual path into t."""
        seen = {t}
        q = deque([t])
        while q:
            v = q.popleft()
            for idx in self.head[v]:
                # edge idx is (v -> u); we need residual on the partner (u -> v)
                u = self.to[idx]
                if self.cap[idx ^ 1] > 0 and u not in seen:
                    seen.add(u)
                    q.append(u)
        return seen
