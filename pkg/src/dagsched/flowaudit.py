"""Dual-fitting audits for the flow-time policies.

For a flow-time run (speed 2(1+eps)) or a LAPS run (speed 1+3eps) this module
rebuilds the dual densities (alpha, beta, gamma) on every trace segment and
verifies the per-segment inequalities plus the end-to-end flow-time bound.
The job order: DAG components by release date, inside a component jobs in
completion order (ft) or in the fixed priority order the policy used (laps).
Everything stays rational except the irrational constants k*e and 1/e, which
are compared in floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple

from dagsched.engine import ScheduleTrace, objective
from dagsched.instance import Instance, compute_chains
from dagsched.waterfill import AuditReport, active_right_set

__all__ = ["flow_dual_audit"]

TOL = Fraction(1, 10**9)


class _Worst:
    """Tracks the minimum slack of one inequality family across the run."""

    def __init__(self) -> None:
        self.slack: Optional[Fraction] = None
        self.where = None

    def see(self, slack, where) -> None:
        if self.slack is None or slack < self.slack:
            self.slack, self.where = slack, where

    def record(self, rep: AuditReport, name: str, tol=TOL) -> None:
        ok = self.slack is None or self.slack >= -tol
        rep.add(name, ok, f"worst slack {self.slack} at {self.where}")


def _job_order(inst: Instance, trace: ScheduleTrace, mode: str) -> Dict[int, int]:
    jmap = inst.job_map()
    topo_pos = {j: i for i, j in enumerate(inst.topo_order())}
    comp_key: Dict[int, Tuple[Fraction, int]] = {}
    for comp in inst.components():
        anchor = min(comp)
        rel = min(jmap[i].release for i in comp)
        for i in comp:
            comp_key[i] = (rel, anchor)
    if mode == "ft":
        key = lambda j: (comp_key[j], trace.completions[j], topo_pos[j])
    else:
        key = lambda j: (comp_key[j], topo_pos[j])
    ordered = sorted(jmap, key=key)
    return {j: i for i, j in enumerate(ordered)}


def flow_dual_audit(
    inst: Instance,
    trace: ScheduleTrace,
    epsilon: Fraction,
    mode: str,
) -> AuditReport:
    if mode not in ("ft", "laps"):
        raise ValueError(f"unknown audit mode {mode!r}")
    if trace.history is None:
        raise ValueError("trace lacks rate history; simulate with keep_history=True")
    rep = AuditReport()
    jmap = inst.job_map()
    m = inst.machines
    k = 1 / epsilon
    pos = _job_order(inst, trace, mode)
    chains = compute_chains(inst)
    gamma_mult = Fraction(2) if mode == "ft" else 1 + epsilon
    speed_beta = 1 + epsilon  # beta_t = w(J_t) / ((1+eps) m) in both modes
    cap_mult = 2 * (1 + epsilon) if mode == "ft" else 1 + 3 * epsilon

    w_alpha = _Worst()  # alpha <= 2 w (ft) / ke w (laps, float)
    w_alpha_eta = _Worst()  # alpha <= 2 eta_j R_j (ft) / (1+eps) eta_j R_j (laps)
    w_identity = _Worst()  # sum alpha = w(active) (on nice times for laps)
    w_pre = _Worst()  # before t*: alpha + c(gout-gin) <= 0
    w_post = _Worst()  # after t*: alpha + c(gout-gin) <= cap * beta_min * L_j
    w_sandwich = _Worst()  # Fact: hatw between the two convexity bounds
    w_hat_eta = _Worst()  # hatw >= R eta, equality when active
    w_eta_range = _Worst()  # hatw(act)/m <= eta <= hatw(J)/m; nice: eta m >= 1/e
    float_mode = k.denominator != 1

    alpha_total: Dict[int, Fraction] = {j: Fraction(0) for j in jmap}
    beta_integral = Fraction(0)
    alpha_integral = Fraction(0)
    beta_running_min: Dict[int, Fraction] = {}  # per waiting job: min beta since r_j

    for rec in trace.history:
        J = sorted(rec.waiting, key=lambda j: pos[j])
        sol = rec.solution
        active = active_right_set(rec.graph, sol)
        wJ = sum((jmap[j].weight for j in J), Fraction(0))
        beta = wJ / (speed_beta * m)
        seg_len = rec.end - rec.start
        beta_integral += seg_len * beta
        for j in J:
            beta_running_min[j] = min(beta_running_min.get(j, beta), beta)
        for j in list(beta_running_min):
            if j not in rec.waiting:
                del beta_running_min[j]

        nice = True
        if mode == "laps":
            w_act = sum((jmap[j].weight for j in active), Fraction(0))
            nice = w_act >= (1 - epsilon) * wJ

        # prefix sums in the total order
        preR: Dict[int, Fraction] = {}
        preW: Dict[int, Fraction] = {}
        actW_before: Dict[int, Fraction] = {}
        accR = accW = accA = Fraction(0)
        for j in J:
            actW_before[j] = accA
            accR += sol.R[j]
            accW += jmap[j].weight
            preR[j] = accR
            preW[j] = accW
            if j in active:
                accA += jmap[j].weight

        alpha: Dict[int, Fraction] = {}
        for j in J:
            a = Fraction(0)
            if mode == "ft" or nice:
                if j in active:
                    a += jmap[j].weight * preR[j]
                a += sol.R[j] * actW_before[j]
                a /= m
            alpha[j] = a
            alpha_total[j] += seg_len * a
        alpha_integral += seg_len * sum(alpha.values(), Fraction(0))

        # identity: total alpha density equals active weight (gated for laps)
        ident_target = sum((jmap[j].weight for j in active), Fraction(0))
        if mode == "laps" and not nice:
            ident_target = Fraction(0)
        diff = sum(alpha.values(), Fraction(0)) - ident_target
        w_identity.see(-abs(diff), rec.start)

        eta_j = {j: preW[j] / m for j in J}
        for j in J:
            if mode == "ft":
                w_alpha.see(2 * jmap[j].weight - alpha[j], (j, rec.start))
                w_alpha_eta.see(2 * eta_j[j] * sol.R[j] - alpha[j], (j, rec.start))
            else:
                slack = Fraction(float(k) * math.e * float(jmap[j].weight) - float(alpha[j]))
                w_alpha.see(slack, (j, rec.start))
                w_alpha_eta.see((1 + epsilon) * eta_j[j] * sol.R[j] - alpha[j], (j, rec.start))

        if mode == "laps":
            hatw = rec.hatw
            total = sum(hatw.values(), Fraction(0))
            w_sandwich.see(-abs(total - 1), ("sum", rec.start))
            if float_mode:
                kf, wJf = float(k), float(wJ)
            for j in J:
                below, at = preW[j] - jmap[j].weight, preW[j]
                if float_mode:
                    lo = kf * float(jmap[j].weight) * float(below) ** (kf - 1) / wJf**kf
                    hi = kf * float(jmap[j].weight) * float(at) ** (kf - 1) / wJf**kf
                    w_sandwich.see(Fraction(float(hatw[j]) - lo), (j, rec.start, "lo"))
                    w_sandwich.see(Fraction(hi - float(hatw[j])), (j, rec.start, "hi"))
                else:
                    kk = k.numerator
                    lo = kk * jmap[j].weight * below ** (kk - 1) / wJ**kk
                    hi = kk * jmap[j].weight * at ** (kk - 1) / wJ**kk
                    w_sandwich.see(hatw[j] - lo, (j, rec.start, "lo"))
                    w_sandwich.see(hi - hatw[j], (j, rec.start, "hi"))
                w_hat_eta.see(hatw[j] - sol.R[j] * sol.eta, (j, rec.start))
                if j in active:
                    w_hat_eta.see(-abs(hatw[j] - sol.R[j] * sol.eta), (j, rec.start, "eq"))
            hat_act = sum((hatw[j] for j in active), Fraction(0))
            w_eta_range.see(sol.eta - hat_act / m, ("lower", rec.start))
            w_eta_range.see(total / m - sol.eta, ("upper", rec.start))
            if nice:
                w_eta_range.see(Fraction(float(sol.eta) * m - 1 / math.e), ("nice", rec.start))

        # gamma densities over all edges; a whole canonical path carries the
        # multiplier eta_j of its endpoint, so internal vertices cancel exactly
        gout: Dict[int, Fraction] = {j: Fraction(0) for j in J}
        gin: Dict[int, Fraction] = {j: Fraction(0) for j in J}
        for e in rec.graph.edges:
            z = sol.z[e]
            if z == 0:
                continue
            g = eta_j[e[1]] * z
            for (u, v) in rec.graph.canonical_path[e]:
                gout[u] += g
                gin[v] += g

        for j in J:
            lhs = alpha[j] + gamma_mult * (gout[j] - gin[j])
            if rec.start < trace.start_times[j]:
                w_pre.see(-lhs, (j, rec.start))
            if j in rec.graph.left:
                cap = cap_mult * beta_running_min[j] * sol.L[j]
                w_post.see(cap - lhs, (j, rec.start))

    flow = objective(trace, inst, "flow")
    chain_sum = sum((jmap[j].weight * chains[j] for j in jmap), Fraction(0))
    dual_part = alpha_integral - m * beta_integral
    if mode == "ft":
        bound = (2 / epsilon) * (dual_part + chain_sum)
    else:
        bound = (2 / epsilon) * dual_part + (2 / epsilon**2) * chain_sum

    if mode == "ft":
        w_alpha.record(rep, "alpha <= 2 w per segment")
        w_alpha_eta.record(rep, "alpha <= 2 eta_j R_j per segment")
    else:
        w_alpha.record(rep, "alpha <= k e w per segment", tol=Fraction(1, 10**6))
        w_alpha_eta.record(rep, "alpha <= (1+eps) eta_j R_j per segment")
        tol_s = Fraction(1, 10**6) if float_mode else TOL
        w_sandwich.record(rep, "hat-weight convexity sandwich", tol=tol_s)
        w_hat_eta.record(rep, "hatw >= R eta, tight when active")
        w_eta_range.record(rep, "eta within hat-weight range; >= 1/(e m) on nice times")
    w_identity.record(rep, "sum alpha equals active weight per segment")
    w_pre.record(rep, "pre-start: alpha + c(gamma_out - gamma_in) <= 0")
    w_post.record(rep, "running: alpha + c(gamma_out - gamma_in) <= cap * beta * L")
    rep.add(
        "end-to-end flow-time bound",
        flow <= bound + TOL,
        f"flow={float(flow):.6g} bound={float(bound):.6g}",
    )
    return rep
