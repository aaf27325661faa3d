"""Exact water-filling solver for the fair-rate program.

Maximizes sum_j w_j ln R_j subject to the bipartite donation constraints
(z >= 0, per-left-vertex rate cap 1, total rate cap m).  Virtual rates R_j of
all right vertices rise uniformly at rate w_j until either a right-side set
becomes tight against its neighborhood (|Gamma(J')| = w(J') * T) or the total
budget m is exhausted; tight sets and their neighborhoods are frozen and
removed phase by phase.  Dual multipliers come out of the phase end times, so
optimality is certified by exact KKT residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Mapping, Optional, Set, Tuple

from dagsched.maxflow import FlowNetwork
from dagsched.rategraph import BipartiteRateGraph

__all__ = [
    "PhaseRecord",
    "RateSolution",
    "AuditReport",
    "CheckRecord",
    "find_tight_set",
    "solve_rates",
    "cp_objective",
    "kkt_audit",
]

Edge = Tuple[int, int]


@dataclass(frozen=True)
class PhaseRecord:
    end_time: Fraction
    kind: str  # "tight" | "budget"
    removed_right: FrozenSet[int]
    removed_left: FrozenSet[int]


@dataclass
class RateSolution:
    z: Dict[Edge, Fraction]
    L: Dict[int, Fraction]
    R: Dict[int, Fraction]
    theta: Dict[int, Fraction]
    eta: Fraction
    nu: Dict[Edge, Fraction]
    phases: Tuple[PhaseRecord, ...]


# ---------------------------------------------------------------------------
# tight-set detection via max-flow


class _Net:
    """Flow network: source -> right j (cap w_j*T) -> incident left -> sink (cap 1)."""

    def __init__(self, rights: List[int], adj: Mapping[int, List[int]], weights, T: Fraction):
        lefts = sorted({l for r in rights for l in adj[r]})
        self.rights = rights
        self.lefts = lefts
        self.r_id = {r: 1 + i for i, r in enumerate(rights)}
        self.l_id = {l: 1 + len(rights) + i for i, l in enumerate(lefts)}
        self.s = 0
        self.t = 1 + len(rights) + len(lefts)
        net = FlowNetwork(self.t + 1)
        inf = Fraction(len(lefts) + 1)  # exceeds any s-t cut through the sink side
        self.src_edges = {}
        self.mid_edges: Dict[Edge, int] = {}
        for r in rights:
            self.src_edges[r] = net.add_edge(self.s, self.r_id[r], weights[r] * T)
        for r in rights:
            for l in adj[r]:
                self.mid_edges[(l, r)] = net.add_edge(self.r_id[r], self.l_id[l], inf)
        for l in lefts:
            net.add_edge(self.l_id[l], self.t, Fraction(1))
        self.net = net
        self.demand = sum((weights[r] * T for r in rights), Fraction(0))

    def run(self) -> Fraction:
        return self.net.max_flow(self.s, self.t)


def _tight_or_deficient(
    rights: List[int], adj: Mapping[int, List[int]], weights, T: Fraction
) -> Tuple[str, Set[int]]:
    """Classify time T: ("deficient", violator) | ("tight", maximal tight set) |
    ("slack", empty)."""
    net = _Net(rights, adj, weights, T)
    flow = net.run()
    if flow < net.demand:
        reach = net.net.residual_reachable(net.s)
        bad = {r for r in rights if net.r_id[r] in reach}
        return "deficient", bad
    coreach = net.net.residual_coreachable(net.t)
    tight = {r for r in rights if net.r_id[r] not in coreach}
    return ("tight", tight) if tight else ("slack", set())


def find_tight_set(graph: BipartiteRateGraph, weights: Mapping[int, Fraction], T: Fraction):
    """Right-side set J' with |Gamma(J')| <= w(J') * T at time T, or None.

    Below the first event time returns None; at the event time returns the
    maximal tight set; beyond it returns the min-cut deficiency certificate.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    rights = sorted(graph.right)
    kind, js = _tight_or_deficient(rights, graph.right_neighbors, weights, T)
    return frozenset(js) if js else None


def _min_tight_ratio(
    rights: List[int], adj: Mapping[int, List[int]], weights
) -> Tuple[Fraction, FrozenSet[int]]:
    """min over nonempty J' of |Gamma(J')| / w(J'), with the maximal argmin set.

    Discrete Newton / parametric search: start from the full-set ratio and
    repeatedly jump to the ratio of the deficiency certificate; each step
    strictly decreases through the finite set of candidate ratios.
    """
    gamma_all = {l for r in rights for l in adj[r]}
    T = Fraction(len(gamma_all), sum(weights[r] for r in rights))
    while True:
        kind, js = _tight_or_deficient(rights, adj, weights, T)
        if kind == "deficient":
            hood = {l for r in js for l in adj[r]}
            T2 = Fraction(len(hood), sum(weights[r] for r in js))
            assert T2 < T
            T = T2
        elif kind == "tight":
            return T, frozenset(js)
        else:  # slack: T itself was the full-set ratio and is the minimum
            return T, frozenset(rights)


def _assign_z(
    rights: List[int], adj: Mapping[int, List[int]], weights, T: Fraction
) -> Dict[Edge, Fraction]:
    """Feasible z with row sums w_j*T on the right and column sums <= 1 on the left."""
    net = _Net(rights, adj, weights, T)
    flow = net.run()
    assert flow == net.demand, "Hall condition violated during assignment"
    return {e: net.net.flow_on(idx) for e, idx in net.mid_edges.items() if net.net.flow_on(idx) > 0}


# ---------------------------------------------------------------------------
# the solver


def solve_rates(graph: BipartiteRateGraph, weights: Mapping[int, Fraction]) -> RateSolution:
    """Exact optimum of the fair-rate program, with dual multipliers and phase log."""
    for r in graph.right:
        if weights[r] <= 0:
            raise ValueError(f"weight of job {r} must be positive")
        if not graph.right_neighbors[r]:
            raise ValueError(f"right vertex {r} has no incident edge")
    m = graph.machines

    cur_right: Set[int] = set(graph.right)
    cur_left: Set[int] = set(graph.left)
    removed_left_total = 0
    z: Dict[Edge, Fraction] = {e: Fraction(0) for e in graph.edges}
    L: Dict[int, Fraction] = {l: Fraction(0) for l in graph.left}
    R: Dict[int, Fraction] = {r: Fraction(0) for r in graph.right}
    phases: List[PhaseRecord] = []
    phase_of_left: Dict[int, int] = {}
    phase_of_right: Dict[int, int] = {}

    while cur_right:
        rights = sorted(cur_right)
        adj = {r: [l for l in graph.right_neighbors[r] if l in cur_left] for r in rights}
        w_cur = sum(weights[r] for r in rights)
        t_tight, tight_set = _min_tight_ratio(rights, adj, weights)
        t_budget = Fraction(m - removed_left_total, w_cur)

        if t_tight <= t_budget:
            # tight event: freeze J' and its full neighborhood at rate 1
            T = t_tight
            js = sorted(tight_set)
            sub_adj = {r: adj[r] for r in js}
            zz = _assign_z(js, sub_adj, weights, T)
            hood = {l for r in js for l in adj[r]}
            for e, val in zz.items():
                z[e] = val
            for r in js:
                R[r] = weights[r] * T
                phase_of_right[r] = len(phases)
            for l in hood:
                L[l] = Fraction(1)
                phase_of_left[l] = len(phases)
            phases.append(
                PhaseRecord(T, "tight", frozenset(js), frozenset(hood))
            )
            cur_right -= tight_set
            cur_left -= hood
            removed_left_total += len(hood)
            if not cur_left:
                assert not cur_right
                break
        else:
            # budget event: remaining rates stop because total capacity m is used up
            T = t_budget
            zz = _assign_z(rights, adj, weights, T)
            for e, val in zz.items():
                z[e] = val
            for r in rights:
                R[r] = weights[r] * T
                phase_of_right[r] = len(phases)
            for l in cur_left:
                L[l] = sum((z[(l, r)] for r in graph.left_neighbors[l] if (l, r) in zz), Fraction(0))
                phase_of_left[l] = len(phases)
            phases.append(PhaseRecord(T, "budget", frozenset(rights), frozenset(cur_left)))
            cur_right.clear()
            cur_left.clear()
            break

    # duals from the phase end times
    budget_final = bool(phases) and phases[-1].kind == "budget"
    eta = Fraction(1, phases[-1].end_time) if budget_final else Fraction(0)
    theta: Dict[int, Fraction] = {}
    for l in graph.left:
        p = phase_of_left[l]
        if phases[p].kind == "budget":
            theta[l] = Fraction(0)
        else:
            theta[l] = Fraction(1, phases[p].end_time) - eta
    nu: Dict[Edge, Fraction] = {}
    for (l, r) in graph.edges:
        nu[(l, r)] = theta[l] + eta - weights[r] / R[r]
        assert nu[(l, r)] >= 0
        assert nu[(l, r)] == 0 or z[(l, r)] == 0
    return RateSolution(z=z, L=L, R=R, theta=theta, eta=eta, nu=nu, phases=tuple(phases))


def cp_objective(sol: RateSolution, weights: Mapping[int, Fraction]) -> float:
    """sum_j w_j ln R_j (float; the exact data lives in sol.R)."""
    total = 0.0
    for r, val in sol.R.items():
        if val <= 0:
            raise ValueError(f"R[{r}] is not positive")
        total += float(weights[r]) * (math.log(val.numerator) - math.log(val.denominator))
    return total


# ---------------------------------------------------------------------------
# KKT / structural audit


@dataclass
class CheckRecord:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class AuditReport:
    checks: List[CheckRecord] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> List[CheckRecord]:
        return [c for c in self.checks if not c.passed]

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckRecord(name, bool(passed), detail))

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def active_right_set(graph: BipartiteRateGraph, sol: RateSolution) -> FrozenSet[int]:
    """Right vertices with some neighbor running strictly below rate 1."""
    slack_left = {l for l in graph.left if sol.L[l] < 1}
    return frozenset(
        r for r in graph.right if any(l in slack_left for l in graph.right_neighbors[r])
    )


def kkt_audit(
    graph: BipartiteRateGraph,
    sol: RateSolution,
    weights: Mapping[int, Fraction],
    tol: Fraction = Fraction(0),
) -> AuditReport:
    """Verify primal feasibility, stationarity, complementary slackness and the
    structural consequences of optimality.  With rational inputs every residual
    must vanish exactly; tol only matters if callers feed floats."""
    if set(sol.R) != set(graph.right) or set(sol.L) != set(graph.left):
        raise ValueError("solution ids do not match graph ids")
    rep = AuditReport()
    m = graph.machines

    bad = [e for e, v in sol.z.items() if v < 0]
    rep.add("primal: z >= 0", not bad, f"negative z on {bad[:3]}")
    lmis = [
        l
        for l in graph.left
        if abs(sol.L[l] - sum(sol.z[(l, r)] for r in graph.left_neighbors[l])) > tol
    ]
    rep.add("primal: L matches z row sums", not lmis, str(lmis[:3]))
    rmis = [
        r
        for r in graph.right
        if abs(sol.R[r] - sum(sol.z[(l, r)] for l in graph.right_neighbors[r])) > tol
    ]
    rep.add("primal: R matches z column sums", not rmis, str(rmis[:3]))
    over = [l for l in graph.left if not 0 <= sol.L[l] <= 1 + tol]
    rep.add("primal: 0 <= L <= 1", not over, str(over[:3]))
    total_l = sum(sol.L.values())
    rep.add("primal: sum L <= m", total_l <= m + tol, f"sum L = {total_l}")
    rep.add("primal: R > 0", all(v > 0 for v in sol.R.values()))

    worst = Fraction(0)
    worst_edge = None
    for (l, r) in graph.edges:
        res = abs(weights[r] / sol.R[r] - (sol.theta[l] + sol.eta - sol.nu[(l, r)]))
        if res > worst:
            worst, worst_edge = res, (l, r)
    rep.add("stationarity on every edge", worst <= tol, f"worst residual {worst} at {worst_edge}")

    rep.add(
        "slackness: theta * (L - 1) = 0",
        all(abs(sol.theta[l] * (sol.L[l] - 1)) <= tol for l in graph.left),
    )
    rep.add("slackness: eta * (sum L - m) = 0", abs(sol.eta * (total_l - m)) <= tol)
    rep.add("slackness: nu * z = 0", all(abs(sol.nu[e] * sol.z[e]) <= tol for e in graph.edges))
    rep.add("dual: theta, eta, nu >= 0",
            sol.eta >= 0 and all(v >= 0 for v in sol.theta.values())
            and all(v >= 0 for v in sol.nu.values()))

    if total_l < m:
        rep.add(
            "undersubscribed only when every rate is 1",
            all(sol.L[l] == 1 for l in graph.left),
            f"sum L = {total_l} < m with min L = {min(sol.L.values())}",
        )
    else:
        rep.add("undersubscribed only when every rate is 1", True, "sum L = m")

    viol = [r for r in graph.right if weights[r] < sol.R[r] * sol.eta - tol]
    rep.add("w_j >= R_j * eta for all right vertices", not viol, str(viol[:3]))

    act = active_right_set(graph, sol)
    eq_viol = [r for r in act if abs(weights[r] - sol.R[r] * sol.eta) > tol]
    rep.add("active vertices: w_j = R_j * eta", not eq_viol, str(eq_viol[:3]))

    w_act = sum((weights[r] for r in act), Fraction(0))
    w_all = sum((weights[r] for r in graph.right), Fraction(0))
    rep.add(
        "eta within [w(active)/m, w(all)/m]",
        w_act - tol <= sol.eta * m <= w_all + tol,
        f"eta*m = {sol.eta * m}, w(active) = {w_act}, w(all) = {w_all}",
    )
    return rep
