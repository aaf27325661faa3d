import math
import random
from fractions import Fraction as F

import pytest

from conftest import mk_instance
from dagsched import (
    build_rate_graph,
    cp_objective,
    find_tight_set,
    gen_random_dag,
    kkt_audit,
    solve_rates,
)
from dagsched.generators import GenParams
from dagsched.waterfill import RateSolution


def chain3(machines=1):
    inst = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0), (2, 1, 1, 0)], [(0, 1), (1, 2)], machines)
    return build_rate_graph({0, 1, 2}, inst)


def test_build_rate_graph_examples():
    g = chain3()
    assert g.left == frozenset({0})
    assert g.edges == frozenset({(0, 0), (0, 1), (0, 2)})

    inst = mk_instance(
        [(1, 1, 1, 0), (2, 1, 1, 0), (3, 1, 1, 0)],
        [(1, 3), (2, 3)],
        machines=2,
    )
    g = build_rate_graph({1, 2, 3}, inst)
    assert g.left == frozenset({1, 2})
    assert g.edges == frozenset({(1, 1), (2, 2), (1, 3), (2, 3)})

    ind = mk_instance([(i, 1, 1, 0) for i in range(4)], [], machines=2)
    g = build_rate_graph(set(range(4)), ind)
    assert g.left == g.right and g.edges == frozenset((i, i) for i in range(4))


def test_canonical_paths_are_dag_paths():
    inst = mk_instance(
        [(0, 1, 1, 0), (1, 1, 1, 0), (2, 1, 1, 0), (3, 1, 1, 0)],
        [(0, 1), (0, 2), (1, 3), (2, 3)],
    )
    g = build_rate_graph({0, 1, 2, 3}, inst)
    path = g.canonical_path[(0, 3)]
    assert path == ((0, 1), (1, 3))  # shortest, ties to smaller successor id
    assert g.canonical_path[(0, 0)] == ()


def test_find_tight_set_examples():
    g = chain3()
    w = {j: F(1) for j in range(3)}
    assert find_tight_set(g, w, F(1, 3)) == frozenset({0, 1, 2})
    assert find_tight_set(g, w, F(1, 4)) is None

    ind = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0)], [], machines=1)
    g2 = build_rate_graph({0, 1}, ind)
    got = find_tight_set(g2, {0: F(1), 1: F(1)}, F(1))
    assert got is not None
    # returned certificate satisfies the tightness contract
    nbrs = set()
    for r in got:
        nbrs.update(g2.right_neighbors[r])
    assert len(nbrs) <= sum(1 for _ in got) * 1

    with pytest.raises(ValueError):
        find_tight_set(g, w, F(0))


def test_solve_chain_example():
    g = chain3()
    w = {j: F(1) for j in range(3)}
    sol = solve_rates(g, w)
    assert sol.R == {0: F(1, 3), 1: F(1, 3), 2: F(1, 3)}
    assert sol.L == {0: F(1)}
    assert sol.eta == 0 and sol.theta == {0: F(3)}
    for e in g.edges:
        assert w[e[1]] / sol.R[e[1]] == F(3)
    assert math.isclose(cp_objective(sol, w), 3 * math.log(1 / 3), rel_tol=1e-12)


def test_solve_weighted_budget_example():
    inst = mk_instance([(0, 1, 3, 0), (1, 1, 1, 0)], [], machines=1)
    g = build_rate_graph({0, 1}, inst)
    w = {0: F(3), 1: F(1)}
    sol = solve_rates(g, w)
    assert sol.R == {0: F(3, 4), 1: F(1, 4)}
    assert sol.L == {0: F(3, 4), 1: F(1, 4)}
    assert sol.eta == 4 and all(v == 0 for v in sol.theta.values())
    assert sol.phases[-1].kind == "budget"
    assert math.isclose(cp_objective(sol, w), 3 * math.log(0.75) + math.log(0.25), rel_tol=1e-12)


def test_solve_two_phase_example():
    inst = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0), (2, 1, 1, 0)], [(0, 2)], machines=2)
    g = build_rate_graph({0, 1, 2}, inst)
    w = {j: F(1) for j in range(3)}
    sol = solve_rates(g, w)
    assert sol.L == {0: F(1), 1: F(1)}
    assert sol.R == {0: F(1, 2), 1: F(1), 2: F(1, 2)}
    assert sol.theta == {0: F(2), 1: F(1)} and sol.eta == 0
    kinds = [(p.kind, p.end_time) for p in sol.phases]
    assert kinds == [("tight", F(1, 2)), ("tight", F(1))]
    assert sol.phases[0].removed_right == frozenset({0, 2})
    assert sum(sol.L.values()) == 2


def test_two_independent_two_machines():
    inst = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0)], [], machines=2)
    g = build_rate_graph({0, 1}, inst)
    sol = solve_rates(g, {0: F(1), 1: F(1)})
    assert all(v == 1 for v in sol.L.values())
    assert all(v == 1 for v in sol.R.values())


def test_kkt_audit_passes_and_flags_faults():
    g = chain3()
    w = {j: F(1) for j in range(3)}
    sol = solve_rates(g, w)
    assert kkt_audit(g, sol, w).ok

    z = dict(sol.z)
    edge = (0, 1)
    z[edge] = z[edge] / 2
    broken = RateSolution(
        z=z,
        L=dict(sol.L),
        R={r: sum(z[(l, r)] for l in g.right_neighbors[r]) for r in g.right},
        theta=dict(sol.theta),
        eta=sol.eta,
        nu=dict(sol.nu),
        phases=sol.phases,
    )
    rep = kkt_audit(g, broken, w)
    assert not rep.ok
    assert any("stationarity" in c.name for c in rep.failed())


def test_kkt_flags_slack_capacity():
    # sum L < m with some L < 1 must trip the full-allocation consequence
    inst = mk_instance([(0, 1, 1, 0)], [], machines=2)
    g = build_rate_graph({0}, inst)
    w = {0: F(1)}
    sol = solve_rates(g, w)
    fake = RateSolution(
        z={(0, 0): F(1, 2)},
        L={0: F(1, 2)},
        R={0: F(1, 2)},
        theta={0: F(0)},
        eta=F(2),
        nu={(0, 0): F(0)},
        phases=sol.phases,
    )
    rep = kkt_audit(g, fake, w)
    assert not rep.ok


def test_weight_scaling_property():
    inst = mk_instance([(0, 1, 2, 0), (1, 1, 3, 0), (2, 1, 5, 0)], [(0, 2)], machines=2)
    g = build_rate_graph({0, 1, 2}, inst)
    w = {0: F(2), 1: F(3), 2: F(5)}
    base = solve_rates(g, w)
    c = F(7, 3)
    scaled = solve_rates(g, {j: c * v for j, v in w.items()})
    assert scaled.z == base.z and scaled.L == base.L and scaled.R == base.R
    assert scaled.eta == c * base.eta
    assert scaled.theta == {j: c * v for j, v in base.theta.items()}
    assert scaled.nu == {e: c * v for e, v in base.nu.items()}


def test_random_solutions_pass_kkt_and_phase_invariants():
    rng = random.Random(5)
    for seed in range(25):
        inst = gen_random_dag(
            GenParams(jobs=4 + seed % 9, layers=1 + seed % 4, density=(seed % 5) / 4,
                      machines=[1, 2, 4][seed % 3]),
            seed,
        )
        waiting = {j.id for j in inst.jobs}
        g = build_rate_graph(waiting, inst)
        w = {j: F(rng.randint(1, 9), rng.randint(1, 5)) for j in waiting}
        sol = solve_rates(g, w)
        assert kkt_audit(g, sol, w).ok, seed

        times = [p.end_time for p in sol.phases]
        assert all(a < b for a, b in zip(times, times[1:]))
        removed = [p.removed_right for p in sol.phases]
        union = frozenset().union(*removed)
        assert union == g.right
        assert sum(len(s) for s in removed) == len(g.right)
        assert all(p.kind == "tight" for p in sol.phases[:-1])
        for p in sol.phases:
            if p.kind == "tight":
                assert len(p.removed_left) == sum(w[r] for r in p.removed_right) * p.end_time
        if sol.phases[-1].kind == "budget":
            assert sum(sol.L.values()) == inst.machines
        else:
            assert sum(sol.L.values()) == len(g.left)
        # capacity consequence of optimality
        if sum(sol.L.values()) < inst.machines:
            assert min(sol.L.values()) == 1


def test_cp_objective_rejects_nonpositive():
    g = chain3()
    w = {j: F(1) for j in range(3)}
    sol = solve_rates(g, w)
    zeroed = RateSolution(sol.z, sol.L, {0: F(0), 1: F(1, 3), 2: F(1, 3)},
                          sol.theta, sol.eta, sol.nu, sol.phases)
    with pytest.raises(ValueError):
        cp_objective(zeroed, w)
