"""Event-driven simulation of the rate-based policies.

Policies: "ct" (completion-time algorithm at speed 2, plus its speed-1
slow-down via slow_down), "ft" (flow-time policy at speed 2(1+eps)) and
"laps" (latest-arrival-biased weights at speed 1+3eps).  Rates change only at
arrivals and completions; event times are exact rationals.

Non-clairvoyance: the rate decision at each event is a function of the waiting
set, the DAG among waiting jobs, weights, releases and (for laps) the
completion history -- never of job sizes.  Residual volumes are tracked only
by the outer loop, which acts as the completion oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from dagsched.instance import Instance, validate_instance
from dagsched.rategraph import BipartiteRateGraph, build_rate_graph
from dagsched.waterfill import RateSolution, solve_rates

__all__ = [
    "PolicyConfig",
    "Segment",
    "SegmentRecord",
    "ScheduleTrace",
    "LapsWeights",
    "simulate",
    "laps_weights",
    "slow_down",
    "realize_slots",
    "objective",
    "validate_trace",
]


@dataclass(frozen=True)
class PolicyConfig:
    kind: str  # "ct" | "ft" | "laps"
    epsilon: Optional[Fraction] = None
    speed: Fraction = Fraction(2)
    order_mode: str = "fixed-topological"

    @staticmethod
    def make(
        kind: str,
        epsilon: Optional[Fraction] = None,
        speed: Optional[Fraction] = None,
        order_mode: str = "fixed-topological",
    ) -> "PolicyConfig":
        if kind not in ("ct", "ft", "laps"):
            raise ValueError(f"unknown policy kind {kind!r}")
        if kind == "ct":
            if speed is None:
                speed = Fraction(2)
        else:
            if epsilon is None or epsilon <= 0:
                raise ValueError(f"policy {kind!r} needs a positive epsilon")
            if speed is None:
                speed = 2 * (1 + epsilon) if kind == "ft" else 1 + 3 * epsilon
        if order_mode not in ("fixed-topological", "dynamic-completion"):
            raise ValueError(f"unknown order_mode {order_mode!r}")
        return PolicyConfig(kind=kind, epsilon=epsilon, speed=speed, order_mode=order_mode)


@dataclass(frozen=True)
class Segment:
    start: Fraction
    end: Fraction
    rates: Mapping[int, Fraction]  # minimal-job rates L_j; absent means 0


@dataclass
class SegmentRecord:
    """Per-segment solver state kept for the dual-fitting auditors."""

    start: Fraction
    end: Fraction
    waiting: FrozenSet[int]
    graph: BipartiteRateGraph
    cp_weights: Dict[int, Fraction]  # weights fed to the rate program
    solution: RateSolution
    hatw: Optional[Dict[int, Fraction]] = None  # laps only


@dataclass
class ScheduleTrace:
    segments: Tuple[Segment, ...]
    speed: Fraction
    completions: Dict[int, Fraction]
    start_times: Dict[int, Fraction]
    history: Optional[List[SegmentRecord]] = None

    def makespan(self) -> Fraction:
        return max(self.completions.values(), default=Fraction(0))


@dataclass
class LapsWeights:
    order: Tuple[int, ...]  # waiting jobs in the priority total order
    hatw: Dict[int, Fraction]


def _component_key(inst: Instance) -> Dict[int, Tuple[Fraction, int]]:
    """Sort key (release date, smallest member id) of each job's DAG component."""
    jmap = inst.job_map()
    key: Dict[int, Tuple[Fraction, int]] = {}
    for comp in inst.components():
        anchor = min(comp)
        rel = min(jmap[i].release for i in comp)
        for i in comp:
            key[i] = (rel, anchor)
    return key


def laps_weights(
    waiting: Sequence[int],
    inst: Instance,
    k: Fraction,
    order_mode: str = "fixed-topological",
    completion_order: Sequence[int] = (),
) -> LapsWeights:
    """Time-dependent weights concentrating priority late in the job order.

    Components are ordered by (release, component id); inside a component the
    waiting jobs follow a static topological linearization by id, optionally
    after the completed prefix in completion order ("dynamic-completion").
    The two modes restrict to the same waiting order; the knob exists so the
    completed prefix convention can be inspected.
    """
    waiting = set(waiting)
    if not waiting:
        raise ValueError("waiting set is empty")
    comp_key = _component_key(inst)
    topo_pos = {j: i for i, j in enumerate(inst.topo_order())}
    order = tuple(sorted(waiting, key=lambda j: (comp_key[j], topo_pos[j])))

    jmap = inst.job_map()
    wsum = sum((jmap[j].weight for j in order), Fraction(0))
    hatw: Dict[int, Fraction] = {}
    if k.denominator == 1:
        kk = k.numerator
        prefix = Fraction(0)
        denom = wsum**kk
        for j in order:
            nxt = prefix + jmap[j].weight
            hatw[j] = (nxt**kk - prefix**kk) / denom
            prefix = nxt
    else:
        kf = float(k)
        prefix = Fraction(0)
        denom = float(wsum) ** kf
        for j in order:
            nxt = prefix + jmap[j].weight
            val = (float(nxt) ** kf - float(prefix) ** kf) / denom
            hatw[j] = Fraction(val)  # exact binary value of the float
            prefix = nxt
    return LapsWeights(order=order, hatw=hatw)


def _policy_weights(
    policy: PolicyConfig,
    waiting: set,
    inst: Instance,
    completion_order: Sequence[int],
) -> Tuple[Dict[int, Fraction], Optional[Dict[int, Fraction]]]:
    """(weights for the rate program, laps hat-weights or None).  Sizes unseen."""
    jmap = inst.job_map()
    if policy.kind in ("ct", "ft"):
        return {j: jmap[j].weight for j in waiting}, None
    k = 1 / policy.epsilon
    lw = laps_weights(sorted(waiting), inst, k, policy.order_mode, completion_order)
    return dict(lw.hatw), dict(lw.hatw)


def simulate(
    inst: Instance,
    policy: PolicyConfig,
    seed: int = 0,
    *,
    keep_history: bool = False,
    force: bool = False,
) -> ScheduleTrace:
    """Run the policy to completion and return the piecewise-constant trace.

    Flow-time policies require the single-release-per-component model; pass
    force=True to run them anyway (e.g. for adversarial lower-bound runs).
    """
    rep = validate_instance(inst)
    if not rep.ok:
        raise ValueError(f"invalid instance: {rep.violations[:3]}")
    if policy.kind in ("ft", "laps") and not inst.no_surprises and not force:
        ok = all(
            len({inst.job_map()[i].release for i in comp}) == 1 for comp in inst.components()
        )
        if not ok:
            raise ValueError(
                "flow-time policies need a common release date per component "
                "(set force=True to override)"
            )

    jmap = inst.job_map()
    pred = inst.dag.predecessors()
    releases = sorted({j.release for j in inst.jobs})
    residual: Dict[int, Fraction] = {j.id: j.size for j in inst.jobs}
    waiting: set = set()
    completed: set = set()
    completion_order: List[int] = []
    completions: Dict[int, Fraction] = {}
    start_times: Dict[int, Fraction] = {}
    segments: List[Segment] = []
    history: List[SegmentRecord] = [] if keep_history else None

    rel_idx = 0
    t = releases[0] if releases else Fraction(0)
    n = len(inst.jobs)

    def complete(j: int, at: Fraction) -> None:
        completed.add(j)
        waiting.discard(j)
        completions[j] = at
        completion_order.append(j)
        start_times.setdefault(j, at)

    while len(completed) < n:
        while rel_idx < len(releases) and releases[rel_idx] <= t:
            rel_idx += 1
        for j in jmap:
            if j not in waiting and j not in completed and jmap[j].release <= t:
                waiting.add(j)

        # zero-size jobs finish the instant they become minimal (topological waves)
        for _ in range(n):
            wave = [
                j
                for j in sorted(waiting)
                if residual[j] == 0 and all(p in completed for p in pred.get(j, ()))
            ]
            if not wave:
                break
            for j in wave:
                complete(j, t)

        if not waiting:
            if rel_idx >= len(releases):
                break
            t = releases[rel_idx]
            continue

        graph = build_rate_graph(waiting, inst)
        cp_w, hatw = _policy_weights(policy, waiting, inst, completion_order)
        sol = solve_rates(graph, cp_w)
        rates = {l: sol.L[l] for l in graph.left}
        for l in graph.left:
            start_times.setdefault(l, t)

        dt = min(residual[l] / (policy.speed * rates[l]) for l in graph.left)
        t_next = t + dt
        if rel_idx < len(releases) and releases[rel_idx] < t_next:
            t_next = releases[rel_idx]
        if t_next > t:
            segments.append(Segment(t, t_next, dict(rates)))
            if keep_history:
                history.append(
                    SegmentRecord(t, t_next, frozenset(waiting), graph, dict(cp_w), sol, hatw)
                )
        span = t_next - t
        done_now = []
        for l in graph.left:
            residual[l] -= policy.speed * rates[l] * span
            assert residual[l] >= 0
            if residual[l] == 0:
                done_now.append(l)
        for j in done_now:
            complete(j, t_next)
        t = t_next

    return ScheduleTrace(
        segments=tuple(segments),
        speed=policy.speed,
        completions=completions,
        start_times=start_times,
        history=history,
    )


def slow_down(trace: ScheduleTrace, factor: Fraction) -> ScheduleTrace:
    """Time-dilate a trace: boundaries scale by factor, speed divides by it."""
    if factor < 1:
        raise ValueError("slow-down factor must be >= 1")
    return ScheduleTrace(
        segments=tuple(
            Segment(s.start * factor, s.end * factor, dict(s.rates)) for s in trace.segments
        ),
        speed=trace.speed / factor,
        completions={j: c * factor for j, c in trace.completions.items()},
        start_times={j: c * factor for j, c in trace.start_times.items()},
        history=None,
    )


def realize_slots(
    segment_rates: Mapping[int, Fraction], m: int
) -> List[List[Tuple[int, Fraction, Fraction]]]:
    """McNaughton wrap-around packing of one segment's rates into m unit slots.

    Returns per-machine interval lists (job, start, end) over the unit slot.
    A job split across two machines occupies disjoint wall-clock intervals
    because its rate is at most 1.
    """
    total = Fraction(0)
    for j, r in segment_rates.items():
        if r < 0 or r > 1:
            raise ValueError(f"rate of job {j} outside [0, 1]")
        total += r
    if total > m:
        raise ValueError("total rate exceeds machine count")
    slots: List[List[Tuple[int, Fraction, Fraction]]] = [[] for _ in range(m)]
    machine = 0
    offset = Fraction(0)
    for j in sorted(segment_rates):
        r = segment_rates[j]
        if r == 0:
            continue
        if offset + r <= 1:
            slots[machine].append((j, offset, offset + r))
            offset += r
            if offset == 1:
                machine, offset = machine + 1, Fraction(0)
        else:
            spill = offset + r - 1
            slots[machine].append((j, offset, Fraction(1)))
            machine, offset = machine + 1, Fraction(0)
            if spill > 0:
                slots[machine].append((j, Fraction(0), spill))
                offset = spill
    return slots


def objective(trace: ScheduleTrace, inst: Instance, kind: str = "completion") -> Fraction:
    """Total weighted completion time or weighted flow time of a finished trace."""
    jmap = inst.job_map()
    missing = [j for j in jmap if j not in trace.completions]
    if missing:
        raise ValueError(f"trace incomplete; unfinished jobs {missing[:5]}")
    if kind == "completion":
        return sum((jmap[j].weight * c for j, c in trace.completions.items()), Fraction(0))
    if kind == "flow":
        return sum(
            (jmap[j].weight * (c - jmap[j].release) for j, c in trace.completions.items()),
            Fraction(0),
        )
    raise ValueError(f"unknown objective kind {kind!r}")


def validate_trace(inst: Instance, trace: ScheduleTrace):
    """Check every trace invariant; returns a report (violations list)."""
    from dagsched.instance import ValidationReport

    rep = ValidationReport()
    jmap = inst.job_map()
    segs = trace.segments
    for i, s in enumerate(segs):
        if s.end <= s.start:
            rep.add(f"segment {i}: empty or reversed")
        if i and s.start < segs[i - 1].end:
            rep.add(f"segment {i}: overlaps previous")
        total = Fraction(0)
        for j, r in s.rates.items():
            if r < 0 or r > 1:
                rep.add(f"segment {i}: rate of job {j} outside [0, 1]")
            total += r
        if total > inst.machines:
            rep.add(f"segment {i}: capacity violation (sum rates = {total})")
        try:
            realize_slots(s.rates, inst.machines)
        except ValueError as exc:
            rep.add(f"segment {i}: not slot-realizable ({exc})")

    volume: Dict[int, Fraction] = {j: Fraction(0) for j in jmap}
    for i, s in enumerate(segs):
        span = s.end - s.start
        for j, r in s.rates.items():
            if r == 0:
                continue
            volume[j] += trace.speed * r * span
            st = trace.start_times.get(j)
            cj = trace.completions.get(j)
            if st is None or s.start < st or (cj is not None and s.end > cj):
                rep.add(f"segment {i}: job {j} runs outside its active window")
            for p in inst.dag.predecessors().get(j, ()):
                cp = trace.completions.get(p)
                if cp is None or cp > s.start:
                    rep.add(f"segment {i}: precedence violation ({p} before {j})")
    for j in jmap:
        if j in trace.completions and volume[j] != jmap[j].size:
            rep.add(f"job {j}: processed volume {volume[j]} != size {jmap[j].size}")
    return rep
