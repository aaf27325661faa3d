"""Job/DAG instances: exact-rational job data, validation, chain bounds, JSON I/O.

All numeric fields are `fractions.Fraction` end to end; floats appear only when
rendering reports.  Serialized files store rationals as "num/den" strings so a
round-trip is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Tuple

__all__ = [
    "JobSpec",
    "PrecedenceDag",
    "Instance",
    "ChainTable",
    "ValidationReport",
    "ParseError",
    "frac_to_str",
    "frac_from_str",
    "validate_instance",
    "compute_chains",
    "serialize_instance",
    "parse_instance",
]


def frac_to_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def frac_from_str(s, where: str = "value") -> Fraction:
    """Parse "num/den" (or a plain integer string) into a Fraction."""
    if isinstance(s, int):
        return Fraction(s)
    if not isinstance(s, str):
        raise ParseError(f"{where}: expected rational string, got {type(s).__name__}")
    try:
        if "/" in s:
            num, den = s.split("/", 1)
            return Fraction(int(num), int(den))
        return Fraction(int(s))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"{where}: malformed rational {s!r} ({exc})") from None


class ParseError(ValueError):
    """Raised on malformed instance files; the message names the offending field."""


@dataclass(frozen=True)
class JobSpec:
    """One job: processing volume `size`, positive `weight`, release date."""

    id: int
    size: Fraction
    weight: Fraction
    release: Fraction = Fraction(0)


@dataclass(frozen=True)
class PrecedenceDag:
    """Set of (predecessor, successor) job-id pairs."""

    edges: FrozenSet[Tuple[int, int]]

    def successors(self) -> Dict[int, List[int]]:
        out: Dict[int, List[int]] = {}
        for u, v in self.edges:
            out.setdefault(u, []).append(v)
        for vs in out.values():
            vs.sort()
        return out

    def predecessors(self) -> Dict[int, List[int]]:
        out: Dict[int, List[int]] = {}
        for u, v in self.edges:
            out.setdefault(v, []).append(u)
        for vs in out.values():
            vs.sort()
        return out


@dataclass(frozen=True)
class Instance:
    jobs: Tuple[JobSpec, ...]
    dag: PrecedenceDag
    machines: int
    no_surprises: bool = False
    allow_zero_size: bool = False

    def job_map(self) -> Dict[int, JobSpec]:
        return {j.id: j for j in self.jobs}

    def job_ids(self) -> List[int]:
        return sorted(j.id for j in self.jobs)

    def topo_order(self) -> List[int]:
        """Topological order of all jobs, smallest id first among ready ones."""
        import heapq

        ids = set(j.id for j in self.jobs)
        indeg = {i: 0 for i in ids}
        succ = self.dag.successors()
        for u, v in self.dag.edges:
            if u in ids and v in ids:
                indeg[v] += 1
        heap = [i for i in ids if indeg[i] == 0]
        heapq.heapify(heap)
        order: List[int] = []
        while heap:
            u = heapq.heappop(heap)
            order.append(u)
            for v in succ.get(u, ()):
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(heap, v)
        if len(order) != len(ids):
            raise ValueError("precedence graph contains a cycle")
        return order

    def components(self) -> List[FrozenSet[int]]:
        """Weakly connected components of the DAG, sorted by smallest member id."""
        ids = set(j.id for j in self.jobs)
        adj: Dict[int, List[int]] = {i: [] for i in ids}
        for u, v in self.dag.edges:
            if u in ids and v in ids:
                adj[u].append(v)
                adj[v].append(u)
        seen: set = set()
        comps: List[FrozenSet[int]] = []
        for i in sorted(ids):
            if i in seen:
                continue
            stack = [i]
            comp = set()
            while stack:
                u = stack.pop()
                if u in comp:
                    continue
                comp.add(u)
                stack.extend(w for w in adj[u] if w not in comp)
            seen |= comp
            comps.append(frozenset(comp))
        return comps


# chain_j = max total size over precedence chains ending at j
ChainTable = Dict[int, Fraction]


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str) -> None:
        self.violations.append(msg)


def validate_instance(inst: Instance) -> ValidationReport:
    """Check every Instance invariant; an empty report means valid."""
    rep = ValidationReport()
    ids = [j.id for j in inst.jobs]
    if len(ids) != len(set(ids)):
        rep.add("duplicate job ids")
    jmap = inst.job_map()

    for j in inst.jobs:
        if j.size < 0:
            rep.add(f"job {j.id}: negative size")
        elif j.size == 0 and not inst.allow_zero_size:
            rep.add(f"job {j.id}: zero size but allow_zero_size is not set")
        if j.weight <= 0:
            rep.add(f"job {j.id}: weight must be positive")
        if j.release < 0:
            rep.add(f"job {j.id}: negative release")

    bad_ref = False
    for u, v in sorted(inst.dag.edges):
        if u == v:
            rep.add(f"edge ({u},{v}): self-loop")
            bad_ref = True
        if u not in jmap or v not in jmap:
            rep.add(f"edge ({u},{v}): unknown job id")
            bad_ref = True

    if not bad_ref:
        try:
            inst.topo_order()
        except ValueError:
            rep.add("precedence graph contains a cycle")
        for u, v in sorted(inst.dag.edges):
            if jmap[u].release > jmap[v].release:
                rep.add(f"edge ({u},{v}): release order violated")
        if inst.no_surprises:
            for comp in inst.components():
                rels = {jmap[i].release for i in comp}
                if len(rels) > 1:
                    rep.add(
                        f"no_surprises: component {sorted(comp)[:4]}... has "
                        f"{len(rels)} distinct release dates"
                    )

    if inst.machines < 1:
        rep.add("machines must be >= 1")
    return rep


def compute_chains(inst: Instance) -> ChainTable:
    """chain_j = max over chains ending at j of the total processing volume."""
    jmap = inst.job_map()
    pred = inst.dag.predecessors()
    chains: ChainTable = {}
    for i in inst.topo_order():  # raises on cycle
        best = max((chains[p] for p in pred.get(i, ())), default=Fraction(0))
        chains[i] = best + jmap[i].size
    return chains


def serialize_instance(inst: Instance) -> bytes:
    """Canonical JSON encoding: jobs sorted by id, edges lexicographic."""
    doc = {
        "machines": inst.machines,
        "no_surprises": inst.no_surprises,
        "allow_zero_size": inst.allow_zero_size,
        "jobs": [
            {
                "id": j.id,
                "size": frac_to_str(j.size),
                "weight": frac_to_str(j.weight),
                "release": frac_to_str(j.release),
            }
            for j in sorted(inst.jobs, key=lambda j: j.id)
        ],
        "edges": [list(e) for e in sorted(inst.dag.edges)],
    }
    return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode("utf-8")


def parse_instance(data: bytes) -> Instance:
    """Inverse of serialize_instance; errors name the missing/bad field."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("top level: expected object")
    for key in ("machines", "no_surprises", "allow_zero_size", "jobs", "edges"):
        if key not in doc:
            raise ParseError(f"top level: missing field {key!r}")
    if not isinstance(doc["machines"], int):
        raise ParseError("machines: expected integer")
    if not isinstance(doc["jobs"], list):
        raise ParseError("jobs: expected array")
    jobs = []
    for idx, j in enumerate(doc["jobs"]):
        where = f"jobs[{idx}]"
        if not isinstance(j, dict):
            raise ParseError(f"{where}: expected object")
        for key in ("id", "size", "weight", "release"):
            if key not in j:
                raise ParseError(f"{where}: missing field {key!r}")
        if not isinstance(j["id"], int):
            raise ParseError(f"{where}.id: expected integer")
        jobs.append(
            JobSpec(
                id=j["id"],
                size=frac_from_str(j["size"], f"{where}.size"),
                weight=frac_from_str(j["weight"], f"{where}.weight"),
                release=frac_from_str(j["release"], f"{where}.release"),
            )
        )
    if not isinstance(doc["edges"], list):
        raise ParseError("edges: expected array")
    edges = []
    for idx, e in enumerate(doc["edges"]):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e)):
            raise ParseError(f"edges[{idx}]: expected [pred, succ] integer pair")
        edges.append((e[0], e[1]))
    return Instance(
        jobs=tuple(jobs),
        dag=PrecedenceDag(edges=frozenset(edges)),
        machines=doc["machines"],
        no_surprises=bool(doc["no_surprises"]),
        allow_zero_size=bool(doc["allow_zero_size"]),
    )
