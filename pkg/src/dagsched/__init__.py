"""Non-clairvoyant fair-rate scheduling of precedence-constrained jobs.

The package assigns processing rates to minimal jobs of a precedence DAG by
solving a Nash-welfare rate program exactly (water-filling over tight sets),
simulates the resulting online policies, and audits the runs against
dual-fitting lower bounds and KKT optimality certificates.
"""

from dagsched.instance import (
    ChainTable,
    Instance,
    JobSpec,
    PrecedenceDag,
    ValidationReport,
    compute_chains,
    parse_instance,
    serialize_instance,
    validate_instance,
)
from dagsched.generators import AdversarialScenario, GenParams, gen_random_dag, gen_star_adversary
from dagsched.rategraph import BipartiteRateGraph, build_rate_graph
from dagsched.waterfill import PhaseRecord, RateSolution, cp_objective, find_tight_set, kkt_audit, solve_rates
from dagsched.oracle import brute_oracle_rates
from dagsched.engine import (
    PolicyConfig,
    ScheduleTrace,
    laps_weights,
    objective,
    realize_slots,
    simulate,
    slow_down,
    validate_trace,
)
from dagsched.bounds import (
    BoundsReport,
    DualCertificate,
    build_ct_duals,
    chain_lb,
    check_ct_dual_feasibility,
    competitive_report,
    dual_objective,
    exhaustive_opt,
    release_lb,
)
from dagsched.flowaudit import flow_dual_audit

__all__ = [
    "AdversarialScenario",
    "BipartiteRateGraph",
    "BoundsReport",
    "DualCertificate",
    "ChainTable",
    "GenParams",
    "Instance",
    "JobSpec",
    "PhaseRecord",
    "PolicyConfig",
    "PrecedenceDag",
    "RateSolution",
    "ScheduleTrace",
    "ValidationReport",
    "brute_oracle_rates",
    "build_ct_duals",
    "build_rate_graph",
    "chain_lb",
    "check_ct_dual_feasibility",
    "competitive_report",
    "compute_chains",
    "cp_objective",
    "dual_objective",
    "exhaustive_opt",
    "find_tight_set",
    "flow_dual_audit",
    "release_lb",
    "gen_random_dag",
    "gen_star_adversary",
    "kkt_audit",
    "laps_weights",
    "objective",
    "parse_instance",
    "realize_slots",
    "serialize_instance",
    "simulate",
    "slow_down",
    "solve_rates",
    "validate_instance",
    "validate_trace",
]
