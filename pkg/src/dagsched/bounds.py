"""Dual-fitting certificates and certified lower bounds for completion time.

From a completion-time run (speed 2) we build dual variables (alpha, beta,
gamma) for the time-indexed relaxation of weighted completion time, check the
dual constraint, and report lower bounds: the dual objective, the weighted
chain bound, the weighted release bound, and (for tiny integral instances) an
exhaustive offline optimum.  All certificate quantities are piecewise constant
on trace intervals and kept as exact rationals; "sum over times" becomes an
integral over intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from dagsched.engine import ScheduleTrace, objective
from dagsched.instance import Instance, compute_chains
from dagsched.waterfill import AuditReport, active_right_set

__all__ = [
    "CertInterval",
    "DualCertificate",
    "BoundsReport",
    "build_ct_duals",
    "check_ct_dual_feasibility",
    "dual_objective",
    "chain_lb",
    "release_lb",
    "exhaustive_opt",
    "competitive_report",
]


@dataclass
class CertInterval:
    start: Fraction
    end: Fraction
    alpha: Dict[int, Fraction]  # density per waiting job; absent means 0
    beta: Fraction  # density
    gamma_out: Dict[int, Fraction]
    gamma_in: Dict[int, Fraction]
    eta: Fraction
    active: FrozenSet[int]

    @property
    def length(self) -> Fraction:
        return self.end - self.start


@dataclass
class DualCertificate:
    mode: str
    machines: int
    intervals: List[CertInterval]
    makespan: Fraction

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "machines": self.machines,
            "makespan": str(self.makespan),
            "intervals": [
                {
                    "start": str(iv.start),
                    "end": str(iv.end),
                    "beta": str(iv.beta),
                    "active": sorted(iv.active),
                }
                for iv in self.intervals
            ],
        }


def _gamma_densities(rec, edge_filter) -> Tuple[Dict[int, Fraction], Dict[int, Fraction]]:
    """Per-job out/in gamma densities from canonical-path mass, without the
    eta multiplier (callers scale).  edge_filter selects contributing edges."""
    on_dag_edge: Dict[Tuple[int, int], Fraction] = {}
    for e in rec.graph.edges:
        if not edge_filter(e):
            continue
        z = rec.solution.z[e]
        if z == 0:
            continue
        for d in rec.graph.canonical_path[e]:
            on_dag_edge[d] = on_dag_edge.get(d, Fraction(0)) + z
    gout: Dict[int, Fraction] = {}
    gin: Dict[int, Fraction] = {}
    for (u, v), mass in on_dag_edge.items():
        gout[u] = gout.get(u, Fraction(0)) + mass
        gin[v] = gin.get(v, Fraction(0)) + mass
    return gout, gin


def build_ct_duals(inst: Instance, trace: ScheduleTrace) -> DualCertificate:
    """Certificate for a completion-time run: alpha is the weight of active
    jobs, beta tracks unfinished weight over 2m, gamma routes the fractional
    assignment of active edges along their canonical paths times eta."""
    if trace.history is None:
        raise ValueError("trace lacks rate history; simulate with keep_history=True")
    jmap = inst.job_map()
    m = inst.machines
    makespan = trace.makespan()

    def beta_at(start: Fraction) -> Fraction:
        unfinished = sum(
            (jmap[j].weight for j, c in trace.completions.items() if c > start), Fraction(0)
        )
        return unfinished / (2 * m)

    intervals: List[CertInterval] = []
    cursor = Fraction(0)
    for rec in trace.history:
        if rec.start > cursor:  # gap: nothing waiting, only beta accrues
            intervals.append(
                CertInterval(cursor, rec.start, {}, beta_at(cursor), {}, {}, Fraction(0), frozenset())
            )
        active = active_right_set(rec.graph, rec.solution)
        eta = rec.solution.eta
        gout, gin = _gamma_densities(rec, lambda e: e[1] in active)
        intervals.append(
            CertInterval(
                start=rec.start,
                end=rec.end,
                alpha={j: jmap[j].weight for j in active},
                beta=beta_at(rec.start),
                gamma_out={j: eta * v for j, v in gout.items()},
                gamma_in={j: eta * v for j, v in gin.items()},
                eta=eta,
                active=active,
            )
        )
        cursor = rec.end
    return DualCertificate(mode="ct", machines=m, intervals=intervals, makespan=makespan)


def dual_objective(cert: DualCertificate) -> Fraction:
    """Integral form of the dual objective: sum_j alpha_j - m * int beta dt.
    A valid lower bound on the offline optimum only if the certificate passed
    the feasibility check."""
    total = Fraction(0)
    for iv in cert.intervals:
        total += iv.length * (sum(iv.alpha.values(), Fraction(0)) - cert.machines * iv.beta)
    return total


def check_ct_dual_feasibility(
    inst: Instance, cert: DualCertificate, tol: Fraction = Fraction(0)
) -> AuditReport:
    """Dual constraint at every job and every interval boundary at or after
    its release: alpha_j - w_j t + int_{s>=t}(gamma_out - gamma_in) <= p_j beta_t.
    Densities are piecewise constant, so boundary checks are exhaustive."""
    rep = AuditReport()
    ivs = cert.intervals
    n_iv = len(ivs)
    # suffix integrals of (gamma_out - gamma_in) per job
    worst_slack: Optional[Fraction] = None
    worst_at = None
    violations = []
    for job in inst.jobs:
        j = job.id
        alpha_j = sum((iv.length * iv.alpha.get(j, Fraction(0)) for iv in ivs), Fraction(0))
        dens = [iv.gamma_out.get(j, Fraction(0)) - iv.gamma_in.get(j, Fraction(0)) for iv in ivs]
        suffix = [Fraction(0)] * (n_iv + 1)
        for i in range(n_iv - 1, -1, -1):
            suffix[i] = suffix[i + 1] + ivs[i].length * dens[i]
        times = {job.release, cert.makespan}
        times.update(iv.start for iv in ivs if iv.start >= job.release)
        for t in sorted(times):
            if t >= cert.makespan:
                gam, beta_t = Fraction(0), Fraction(0)
            else:
                i = max(k for k in range(n_iv) if ivs[k].start <= t)
                gam = suffix[i] - (t - ivs[i].start) * dens[i]
                beta_t = ivs[i].beta
            slack = job.size * beta_t - (alpha_j - job.weight * t + gam)
            if worst_slack is None or slack < worst_slack:
                worst_slack, worst_at = slack, (j, t)
            if slack < -tol:
                violations.append((j, t, slack))
    rep.add(
        "dual constraint holds at all boundaries",
        not violations,
        f"worst slack {worst_slack} at {worst_at}; violations {violations[:3]}",
    )
    return rep


def chain_lb(inst: Instance) -> Fraction:
    chains = compute_chains(inst)
    return sum((j.weight * chains[j.id] for j in inst.jobs), Fraction(0))


def release_lb(inst: Instance) -> Fraction:
    return sum((j.weight * j.release for j in inst.jobs), Fraction(0))


def exhaustive_opt(
    inst: Instance, kind: str = "completion", job_limit: int = 8
) -> Optional[Fraction]:
    """Exact clairvoyant offline optimum over unit-slot schedules.

    Requires integral sizes and releases; then preemption at integer times is
    lossless on identical speed-1 machines.  Running a full set of min(m,
    available) jobs per slot is optimal by an exchange argument, so the search
    branches only over which maximal subset runs.  Returns None above the job
    limit or for non-integral data.
    """
    jobs = sorted(inst.jobs, key=lambda j: j.id)
    if len(jobs) > job_limit:
        return None
    if any(j.size.denominator != 1 or j.release.denominator != 1 for j in jobs):
        return None
    if any(j.size == 0 for j in jobs):
        return None
    n = len(jobs)
    idx = {j.id: i for i, j in enumerate(jobs)}
    m = inst.machines
    sizes = tuple(int(j.size) for j in jobs)
    rel = tuple(int(j.release) for j in jobs)
    w = tuple(j.weight for j in jobs)
    preds = [tuple(idx[p] for p in inst.dag.predecessors().get(j.id, ())) for j in jobs]

    @lru_cache(maxsize=None)
    def best(t: int, residual: Tuple[int, ...]) -> Fraction:
        if all(r == 0 for r in residual):
            return Fraction(0)
        avail = [
            i
            for i in range(n)
            if residual[i] > 0 and rel[i] <= t and all(residual[p] == 0 for p in preds[i])
        ]
        if not avail:
            nxt = min(rel[i] for i in range(n) if residual[i] > 0 and rel[i] > t)
            return best(nxt, residual)
        k = min(m, len(avail))
        out = None
        for run in combinations(avail, k):
            new = list(residual)
            gain = Fraction(0)
            for i in run:
                new[i] -= 1
                if new[i] == 0:
                    gain += w[i] * (t + 1)
            val = gain + best(t + 1, tuple(new))
            if out is None or val < out:
                out = val
        return out

    total = best(0, sizes)
    best.cache_clear()
    if kind == "flow":
        total -= sum((w[i] * rel[i] for i in range(n)), Fraction(0))
    return total


@dataclass
class BoundsReport:
    cost_a: Fraction
    cost_b: Fraction
    dual_obj: Fraction
    dual_feasible: bool
    chain: Fraction
    release: Fraction
    exhaustive: Optional[Fraction]
    ratios: Dict[str, float] = field(default_factory=dict)
    checks: AuditReport = field(default_factory=AuditReport)

    @property
    def ok(self) -> bool:
        return self.dual_feasible and self.checks.ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "cost_a": str(self.cost_a),
            "cost_b": str(self.cost_b),
            "dual_objective": str(self.dual_obj),
            "dual_feasible": self.dual_feasible,
            "chain_lb": str(self.chain),
            "release_lb": str(self.release),
            "exhaustive_opt": None if self.exhaustive is None else str(self.exhaustive),
            "ratios": self.ratios,
            "checks": self.checks.to_dict(),
        }


def competitive_report(
    inst: Instance,
    trace_a: ScheduleTrace,
    *,
    job_limit: int = 8,
    tol: Fraction = Fraction(1, 10**9),
) -> BoundsReport:
    """Full audit of a completion-time run: certificate, bounds, the exact
    inequality chain cost(A) <= 2(dual objective) + sum w (chain + 2r), and
    the 10x guarantee for the speed-1 slow-down B against the best bound."""
    cert = build_ct_duals(inst, trace_a)
    feas = check_ct_dual_feasibility(inst, cert, tol)
    dual = dual_objective(cert)
    chain = chain_lb(inst)
    release = release_lb(inst)
    opt = exhaustive_opt(inst, "completion", job_limit)
    cost_a = objective(trace_a, inst, "completion")
    cost_b = 2 * cost_a

    rep = BoundsReport(
        cost_a=cost_a,
        cost_b=cost_b,
        dual_obj=dual,
        dual_feasible=feas.ok,
        chain=chain,
        release=release,
        exhaustive=opt,
    )
    rep.checks.checks.extend(feas.checks)

    rhs = 2 * dual + sum((j.weight * (compute_chains(inst)[j.id] + 2 * j.release) for j in inst.jobs), Fraction(0))
    rep.checks.add(
        "cost(A) <= 2(dual objective) + sum w(chain + 2r)",
        cost_a <= rhs + tol,
        f"cost_a={cost_a} rhs={rhs}",
    )

    # structural fact: an inactive waiting job has all minimal neighbors at
    # rate 1 (so a job on some chain ending at it runs flat out)
    bad = []
    for rec in trace_a.history or ():
        active = active_right_set(rec.graph, rec.solution)
        for r in rec.graph.right:
            if r in active:
                continue
            nbrs = rec.graph.right_neighbors[r]
            if not nbrs or any(rec.solution.L[l] < 1 for l in nbrs):
                bad.append((rec.start, r))
    rep.checks.add("inactive jobs have a rate-1 chain neighbor", not bad, str(bad[:3]))

    bounds = {"dual": dual if feas.ok else None, "chain": chain, "release": release}
    usable = [v for v in bounds.values() if v is not None]
    best_lb = max(usable)
    for name, cost in (("ct-a", cost_a), ("ct-b", cost_b)):
        if best_lb > 0:
            rep.ratios[name] = float(cost / best_lb)
        else:
            rep.ratios[name] = 0.0 if cost == 0 else float("inf")
    if best_lb > 0:
        rep.checks.add(
            "cost(B) <= 10 * best lower bound",
            cost_b <= 10 * best_lb,
            f"cost_b={cost_b} best_lb={best_lb}",
        )
    if opt is not None:
        rep.ratios["ct-b-vs-opt"] = float(cost_b / opt) if opt > 0 else float("inf")
        for name, v in bounds.items():
            if v is not None:
                rep.checks.add(f"{name} lower bound <= exhaustive opt", v <= opt, f"{v} vs {opt}")
    return rep
