from fractions import Fraction as F

from conftest import mk_instance
from dagsched import (
    PolicyConfig,
    build_ct_duals,
    chain_lb,
    check_ct_dual_feasibility,
    competitive_report,
    dual_objective,
    exhaustive_opt,
    gen_random_dag,
    release_lb,
    simulate,
)
from dagsched.bounds import CertInterval, DualCertificate
from dagsched.generators import GenParams

CT = PolicyConfig.make("ct")


def run_ct(inst):
    return simulate(inst, CT, keep_history=True)


def test_single_job_certificate():
    inst = mk_instance([(0, 1, 1, 0)])
    tr = run_ct(inst)
    cert = build_ct_duals(inst, tr)
    assert len(cert.intervals) == 1
    iv = cert.intervals[0]
    assert (iv.start, iv.end) == (F(0), F(1, 2))
    assert iv.alpha == {} and iv.beta == F(1, 2)  # rate-1 job is not active
    assert dual_objective(cert) == F(-1, 4)
    assert check_ct_dual_feasibility(inst, cert).ok


def test_two_independent_jobs_report():
    inst = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0)])
    tr = run_ct(inst)
    cert = build_ct_duals(inst, tr)
    assert dual_objective(cert) == F(1)
    rep = competitive_report(inst, tr)
    assert rep.ok
    assert rep.cost_a == F(2) and rep.cost_b == F(4)
    assert rep.exhaustive == F(3)
    assert rep.ratios["ct-a"] == 1.0 and rep.ratios["ct-b"] == 2.0


def test_chain_and_release_bounds():
    inst = mk_instance([(0, 2, 1, 0), (1, 3, 2, 0)], [(0, 1)])
    assert chain_lb(inst) == F(12)
    assert release_lb(inst) == F(0)
    released = mk_instance([(0, 1, 2, 0), (1, 1, 3, 4)], no_surprises=False)
    assert release_lb(released) == F(12)


def test_exhaustive_opt_examples():
    two = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0)])
    assert exhaustive_opt(two) == F(3)
    chain = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0)], [(0, 1)])
    assert exhaustive_opt(chain) == F(3)
    par = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0)], [], machines=2)
    assert exhaustive_opt(par) == F(2)
    late = mk_instance([(0, 1, 1, 0), (1, 1, 1, 2)], no_surprises=False)
    assert exhaustive_opt(late, "flow") == exhaustive_opt(late) - F(2)


def test_exhaustive_opt_refusals():
    big = mk_instance([(i, 1, 1, 0) for i in range(9)])
    assert exhaustive_opt(big) is None
    frac = mk_instance([(0, "1/2", 1, 0)])
    assert exhaustive_opt(frac) is None
    zero = mk_instance([(0, 0, 1, 0)], allow_zero_size=True)
    assert exhaustive_opt(zero) is None


def test_halved_beta_breaks_feasibility():
    inst = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0)])
    tr = run_ct(inst)
    cert = build_ct_duals(inst, tr)
    broken = DualCertificate(
        mode=cert.mode,
        machines=cert.machines,
        intervals=[
            CertInterval(iv.start, iv.end, iv.alpha, iv.beta / 2,
                         iv.gamma_out, iv.gamma_in, iv.eta, iv.active)
            for iv in cert.intervals
        ],
        makespan=cert.makespan,
    )
    rep = check_ct_dual_feasibility(inst, broken)
    assert not rep.ok


def test_report_serializes():
    inst = mk_instance([(0, 1, 1, 0), (1, 1, 1, 0)], [(0, 1)])
    rep = competitive_report(inst, run_ct(inst))
    d = rep.to_dict()
    assert d["ok"] is True
    assert d["cost_b"] == str(rep.cost_b)
    assert "ct-b-vs-opt" in d["ratios"]


def test_random_instances_bounds_below_opt_and_within_ten():
    for seed in range(12):
        inst = gen_random_dag(
            GenParams(jobs=4 + seed % 3, layers=1 + seed % 2, density=(seed % 4) / 3,
                      machines=[1, 2][seed % 2]),
            100 + seed,
        )
        tr = run_ct(inst)
        rep = competitive_report(inst, tr, job_limit=6)
        assert rep.ok, (seed, rep.checks.to_dict())
        opt = rep.exhaustive
        if opt is not None:
            assert rep.dual_obj <= opt
            assert rep.chain <= opt
            assert rep.release <= opt
            assert rep.cost_b <= 10 * opt
        assert rep.ratios["ct-b"] <= 10 + 1e-9
