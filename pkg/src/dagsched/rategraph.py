"""Snapshot bipartite graph between minimal jobs and waiting jobs.

Left vertices are the waiting jobs with no waiting predecessor (the only ones
eligible to run); an edge (l, r) exists iff r is reachable from l in the DAG
restricted to the waiting set.  Each edge carries a fixed canonical path used
later by the dual-fitting certificates.
"""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, List, Mapping, Set, Tuple

from dagsched.instance import Instance

__all__ = ["BipartiteRateGraph", "build_rate_graph"]

Edge = Tuple[int, int]


class BipartiteRateGraph:
    def __init__(
        self,
        left: FrozenSet[int],
        right: FrozenSet[int],
        edges: FrozenSet[Edge],
        canonical_path: Mapping[Edge, Tuple[Edge, ...]],
        machines: int,
    ):
        self.left = left
        self.right = right
        self.edges = edges
        self.canonical_path = dict(canonical_path)
        self.machines = machines
        # adjacency caches
        self.right_neighbors: Dict[int, List[int]] = {r: [] for r in right}
        self.left_neighbors: Dict[int, List[int]] = {l: [] for l in left}
        for l, r in sorted(edges):
            self.right_neighbors[r].append(l)
            self.left_neighbors[l].append(r)


def build_rate_graph(waiting: Iterable[int], inst: Instance) -> BipartiteRateGraph:
    """Reachability graph over the waiting set, with BFS canonical paths.

    Canonical path for an edge (l, r) is the breadth-first shortest path from
    l to r in the waiting-restricted DAG, ties broken by smallest successor id.
    """
    waiting = set(waiting)
    if not waiting:
        raise ValueError("waiting set is empty")
    succ_all = inst.dag.successors()
    pred_all = inst.dag.predecessors()
    succ = {u: [v for v in succ_all.get(u, ()) if v in waiting] for u in waiting}
    left = frozenset(u for u in waiting if not any(p in waiting for p in pred_all.get(u, ())))

    edges: Set[Edge] = set()
    paths: Dict[Edge, Tuple[Edge, ...]] = {}
    for l in sorted(left):
        parent: Dict[int, int] = {l: l}
        order = [l]
        qi = 0
        while qi < len(order):
            u = order[qi]
            qi += 1
            for v in succ[u]:  # ascending id: lexicographically-least BFS tree
                if v not in parent:
                    parent[v] = u
                    order.append(v)
        for r in order:
            edges.add((l, r))
            path: List[Edge] = []
            v = r
            while v != l:
                path.append((parent[v], v))
                v = parent[v]
            paths[(l, r)] = tuple(reversed(path))
    return BipartiteRateGraph(
        left=left,
        right=frozenset(waiting),
        edges=frozenset(edges),
        canonical_path=paths,
        machines=inst.machines,
    )
