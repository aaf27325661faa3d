from dataclasses import replace
from fractions import Fraction as F

import pytest

from conftest import mk_instance
from dagsched import PolicyConfig, flow_dual_audit, gen_random_dag, simulate
from dagsched.generators import GenParams

FT = PolicyConfig.make("ft", epsilon=F(1, 2))
LAPS = PolicyConfig.make("laps", epsilon=F(1, 2))


def test_ft_chain_audit_passes():
    inst = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0), (2, 1, 1, 0)], [(0, 1), (1, 2)])
    tr = simulate(inst, FT, keep_history=True)
    rep = flow_dual_audit(inst, tr, F(1, 2), "ft")
    assert rep.ok, rep.to_dict()


def test_laps_chain_audit_passes():
    inst = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0), (2, 1, 1, 0)], [(0, 1), (1, 2)])
    tr = simulate(inst, LAPS, keep_history=True)
    rep = flow_dual_audit(inst, tr, F(1, 2), "laps")
    assert rep.ok, rep.to_dict()


def test_laps_float_k_audit_passes():
    pol = PolicyConfig.make("laps", epsilon=F(2, 5))  # k = 5/2, float path
    inst = mk_instance([(0, 1, 2, 0), (1, 1, 1, 0), (2, 1, 3, 0)], [(0, 2)], machines=2)
    tr = simulate(inst, pol, keep_history=True)
    rep = flow_dual_audit(inst, tr, F(2, 5), "laps")
    assert rep.ok, rep.to_dict()


def test_audit_mode_and_history_errors():
    inst = mk_instance([(0, 1, 1, 0)])
    tr = simulate(inst, FT, keep_history=True)
    with pytest.raises(ValueError, match="mode"):
        flow_dual_audit(inst, tr, F(1, 2), "other")
    bare = simulate(inst, FT)
    with pytest.raises(ValueError, match="history"):
        flow_dual_audit(inst, bare, F(1, 2), "ft")


def test_doubled_rates_break_weight_cap():
    # doubling R in one segment pushes the last job's alpha density to 3 > 2w
    inst = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0)])
    tr = simulate(inst, FT, keep_history=True)
    history = tuple(
        replace(rec, solution=replace(rec.solution, R={j: 2 * v for j, v in rec.solution.R.items()}))
        for rec in tr.history
    )
    broken = replace(tr, history=history)
    rep = flow_dual_audit(inst, broken, F(1, 2), "ft")
    assert not rep.ok
    assert any("alpha <= 2 w" in c.name for c in rep.failed())


def test_identity_is_exact():
    inst = mk_instance([(0, 1, 2, 0), (1, 1, 1, 0), (2, 1, 1, 0)], [(0, 1)], machines=2)
    tr = simulate(inst, FT, keep_history=True)
    rep = flow_dual_audit(inst, tr, F(1, 2), "ft")
    ident = next(c for c in rep.checks if "sum alpha" in c.name)
    assert ident.passed and "worst slack 0" in ident.detail


def test_random_instances_pass_both_audits():
    for seed in range(8):
        inst = gen_random_dag(
            GenParams(jobs=5 + seed % 5, layers=1 + seed % 3, density=(seed % 4) / 3,
                      machines=[1, 2, 4][seed % 3]),
            200 + seed,
        )
        for pol, mode in ((FT, "ft"), (LAPS, "laps")):
            tr = simulate(inst, pol, keep_history=True)
            rep = flow_dual_audit(inst, tr, F(1, 2), mode)
            assert rep.ok, (seed, mode, rep.to_dict())
