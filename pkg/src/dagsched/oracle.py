"""Independent numeric check on the fair-rate optimum.

Solves the concave program directly in the edge variables z with scipy's
SLSQP: maximize sum_j w_j ln R_j subject to row sums L_l <= 1 per left
vertex, total mass <= m, z >= 0.  Float arithmetic, fully decoupled from
the exact water-filling code path; intended for small graphs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple

import numpy as np
from scipy.optimize import minimize

from dagsched.rategraph import BipartiteRateGraph

__all__ = ["OracleSolution", "brute_oracle_rates"]

Edge = Tuple[int, int]

_FLOOR = 1e-300


@dataclass
class OracleSolution:
    z: Dict[Edge, float]
    L: Dict[int, float]
    R: Dict[int, float]
    objective: float
    converged: bool


def brute_oracle_rates(
    graph: BipartiteRateGraph,
    weights: Mapping[int, object],
    iterations: int = 500,
) -> OracleSolution:
    edges: List[Edge] = sorted(graph.edges)
    lefts = sorted(graph.left)
    rights = sorted(graph.right)
    li = {l: i for i, l in enumerate(lefts)}
    ri = {r: i for i, r in enumerate(rights)}
    e_left = np.array([li[l] for l, _ in edges])
    e_right = np.array([ri[r] for _, r in edges])
    w = np.array([float(weights[r]) for r in rights])
    m = float(min(graph.machines, len(lefts)))

    def fold_right(z: np.ndarray) -> np.ndarray:
        out = np.zeros(len(rights))
        np.add.at(out, e_right, z)
        return out

    def fold_left(z: np.ndarray) -> np.ndarray:
        out = np.zeros(len(lefts))
        np.add.at(out, e_left, z)
        return out

    def neg_obj(z: np.ndarray) -> float:
        return -float(np.dot(w, np.log(np.maximum(fold_right(z), _FLOOR))))

    def neg_grad(z: np.ndarray) -> np.ndarray:
        R = np.maximum(fold_right(z), _FLOOR)
        return -(w / R)[e_right]

    # interior start: each left spreads min(1, m/#lefts) evenly over its edges
    deg = np.zeros(len(lefts))
    np.add.at(deg, e_left, 1.0)
    z0 = min(1.0, m / len(lefts)) / deg[e_left]

    row = np.zeros((len(lefts), len(edges)))
    row[e_left, np.arange(len(edges))] = 1.0
    cons = [
        {"type": "ineq", "fun": lambda z: 1.0 - row @ z, "jac": lambda z: -row},
        {"type": "ineq", "fun": lambda z: m - z.sum(),
         "jac": lambda z: -np.ones_like(z)},
    ]
    res = minimize(
        neg_obj,
        z0,
        jac=neg_grad,
        bounds=[(0.0, 1.0)] * len(edges),
        constraints=cons,
        method="SLSQP",
        options={"maxiter": iterations, "ftol": 1e-14},
    )
    z = np.maximum(res.x, 0.0)

    R = np.maximum(fold_right(z), _FLOOR)
    L = fold_left(z)
    return OracleSolution(
        z={e: float(z[i]) for i, e in enumerate(edges)},
        L={l: float(L[li[l]]) for l in lefts},
        R={r: float(R[ri[r]]) for r in rights},
        objective=-neg_obj(z),
        converged=bool(res.success),
    )
