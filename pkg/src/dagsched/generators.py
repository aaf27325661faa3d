"""Instance generators: layered random DAGs and the star adversary.

Both are pure functions of (params, seed); reruns with the same arguments
produce identical instances.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

from dagsched.instance import Instance, JobSpec, PrecedenceDag, validate_instance

__all__ = ["GenParams", "AdversarialScenario", "gen_random_dag", "gen_star_adversary"]


@dataclass(frozen=True)
class GenParams:
    jobs: int
    layers: int = 1
    density: float = 0.0
    machines: int = 1
    size_num_range: Tuple[int, int] = (1, 4)
    size_dens: Tuple[int, ...] = (1,)
    weight_num_range: Tuple[int, int] = (1, 4)
    weight_dens: Tuple[int, ...] = (1,)
    # "zero": all releases 0 (no_surprises); "component": one random integer
    # release per DAG component (no_surprises); "layered": releases increase
    # along layers, so related jobs may arrive over time.
    release_mode: str = "zero"


def gen_random_dag(params: GenParams, seed: int) -> Instance:
    """Layered random DAG; edges only go from earlier to later layers."""
    if params.jobs < 1:
        raise ValueError("need at least one job")
    if not 0.0 <= params.density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    if params.layers < 1:
        raise ValueError("need at least one layer")
    rng = random.Random(seed)

    n = params.jobs
    layer_of = {i: rng.randrange(params.layers) for i in range(n)}
    edges = set()
    for u in range(n):
        for v in range(n):
            if layer_of[u] < layer_of[v] and rng.random() < params.density:
                edges.add((u, v))

    lo, hi = params.size_num_range
    wlo, whi = params.weight_num_range
    sizes = {i: Fraction(rng.randint(lo, hi), rng.choice(params.size_dens)) for i in range(n)}
    weights = {i: Fraction(rng.randint(wlo, whi), rng.choice(params.weight_dens)) for i in range(n)}

    releases = {i: Fraction(0) for i in range(n)}
    no_surprises = True
    if params.release_mode == "zero":
        pass
    elif params.release_mode == "component":
        # releases assigned per weakly-connected component of the edge set
        shell = Instance(
            jobs=tuple(JobSpec(i, Fraction(1), Fraction(1)) for i in range(n)),
            dag=PrecedenceDag(frozenset(edges)),
            machines=1,
        )
        for comp in shell.components():
            r = Fraction(rng.randint(0, 5))
            for i in comp:
                releases[i] = r
    elif params.release_mode == "layered":
        no_surprises = False
        # cumulative offsets keep releases nondecreasing along edges
        offs, acc = [], Fraction(0)
        for _ in range(params.layers):
            acc += rng.randint(0, 2)
            offs.append(acc)
        for i in range(n):
            releases[i] = offs[layer_of[i]]
    else:
        raise ValueError(f"unknown release_mode {params.release_mode!r}")

    inst = Instance(
        jobs=tuple(JobSpec(i, sizes[i], weights[i], releases[i]) for i in range(n)),
        dag=PrecedenceDag(frozenset(edges)),
        machines=params.machines,
        no_surprises=no_surprises,
    )
    rep = validate_instance(inst)
    assert rep.ok, rep.violations
    return inst


@dataclass(frozen=True)
class AdversarialScenario:
    """Star-of-dependents release pattern on a single machine.

    Stage 1: n unit-size unit-weight jobs at time 0.  Stage 2: n^3 zero-size
    unit-weight jobs at time 1, each depending on a randomly chosen pivot.
    The offline optimum finishes the pivot during [0, 1], so its total flow
    time is computable in closed form.
    """

    instance: Instance
    n: int
    pivot: int

    def opt_flow(self) -> Fraction:
        # pivot flow 1; zero-size jobs flow 0; remaining n-1 unit jobs finish
        # back to back at times 2..n
        return Fraction(self.n * (self.n + 1), 2)


def gen_star_adversary(n: int, seed: int) -> AdversarialScenario:
    if n < 2:
        raise ValueError("adversary needs n >= 2")
    rng = random.Random(seed)
    pivot = rng.randrange(n)
    jobs = [JobSpec(i, Fraction(1), Fraction(1), Fraction(0)) for i in range(n)]
    jobs += [JobSpec(n + i, Fraction(0), Fraction(1), Fraction(1)) for i in range(n**3)]
    edges = frozenset((pivot, n + i) for i in range(n**3))
    inst = Instance(
        jobs=tuple(jobs),
        dag=PrecedenceDag(edges),
        machines=1,
        no_surprises=False,
        allow_zero_size=True,
    )
    return AdversarialScenario(instance=inst, n=n, pivot=pivot)
