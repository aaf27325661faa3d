"""Command-line front end: generate instances, run policies, audit, report.

Exit codes: 0 success, 2 usage error, 3 policy/instance incompatibility or
hash mismatch, 4 empty batch, 5 validation or audit failure.  Output files are
written atomically (temp + rename).  The default output directory comes from
the DAGSCHED_OUT environment variable, falling back to the current directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Optional

from dagsched.bounds import (
    chain_lb,
    competitive_report,
    exhaustive_opt,
    release_lb,
)
from dagsched.engine import PolicyConfig, ScheduleTrace, objective, simulate, validate_trace
from dagsched.flowaudit import flow_dual_audit
from dagsched.generators import GenParams, gen_random_dag, gen_star_adversary
from dagsched.instance import (
    Instance,
    frac_to_str,
    parse_instance,
    serialize_instance,
)
from dagsched.waterfill import kkt_audit

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INCOMPATIBLE = 3
EXIT_EMPTY = 4
EXIT_AUDIT = 5


def _fmt(x: Fraction) -> str:
    return format(float(x), ".12g")


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_json(path: Path, doc) -> None:
    _atomic_write(path, (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode())


def _instance_hash(inst: Instance) -> str:
    return hashlib.sha256(serialize_instance(inst)).hexdigest()


def _load_instance(path: str) -> Instance:
    return parse_instance(Path(path).read_bytes())


def _frac(text: str) -> Fraction:
    return Fraction(text)


def _out_dir(arg: Optional[str]) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get("DAGSCHED_OUT", "."))


def cmd_generate(args) -> int:
    if args.kind == "random":
        params = GenParams(
            jobs=args.jobs,
            layers=args.layers,
            density=args.density,
            machines=args.machines,
            release_mode=args.release_mode,
        )
        inst = gen_random_dag(params, args.seed)
        sidecar = None
    else:
        scenario = gen_star_adversary(args.n, args.seed)
        inst = scenario.instance
        sidecar = {
            "n": scenario.n,
            "pivot": scenario.pivot,
            "opt_flow": frac_to_str(scenario.opt_flow()),
        }
    data = serialize_instance(inst)
    out = Path(args.out)
    _atomic_write(out, data)
    if sidecar is not None:
        _atomic_write_json(Path(str(out) + ".scenario.json"), sidecar)
    print(hashlib.sha256(data).hexdigest())
    return EXIT_OK


def _make_policy(args) -> PolicyConfig:
    epsilon = Fraction(args.epsilon) if args.epsilon else None
    speed = Fraction(args.speed) if args.speed else None
    return PolicyConfig.make(args.policy, epsilon=epsilon, speed=speed, order_mode=args.order)


def _write_trace_files(out: Path, inst: Instance, trace: ScheduleTrace) -> None:
    rows = [["segment_start", "segment_end", "job_id", "rate", "rate_float"]]
    for seg in trace.segments:
        for j in sorted(seg.rates):
            r = seg.rates[j]
            if r == 0:
                continue
            rows.append([frac_to_str(seg.start), frac_to_str(seg.end), j, frac_to_str(r), _fmt(r)])
    buf = "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"
    _atomic_write(out / "trace.csv", buf.encode())

    rows = [["job_id", "start_time", "completion", "start_float", "completion_float"]]
    for j in sorted(trace.completions):
        s, c = trace.start_times[j], trace.completions[j]
        rows.append([j, frac_to_str(s), frac_to_str(c), _fmt(s), _fmt(c)])
    buf = "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"
    _atomic_write(out / "completions.csv", buf.encode())


def cmd_run(args) -> int:
    inst = _load_instance(args.instance)
    try:
        policy = _make_policy(args)
        trace = simulate(inst, policy, seed=args.seed, force=args.force)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    report = validate_trace(inst, trace)
    out = _out_dir(args.out_dir)
    _write_trace_files(out, inst, trace)

    obj_doc = {"policy": args.policy, "speed": frac_to_str(policy.speed)}
    if args.policy == "ct":
        cost_a = objective(trace, inst, "completion")
        obj_doc.update(
            objective_a=frac_to_str(cost_a),
            objective_a_float=_fmt(cost_a),
            objective_b=frac_to_str(2 * cost_a),
            objective_b_float=_fmt(2 * cost_a),
        )
    else:
        flow = objective(trace, inst, "flow")
        obj_doc.update(objective_flow=frac_to_str(flow), objective_flow_float=_fmt(flow))
    _atomic_write_json(out / "objective.json", obj_doc)
    _atomic_write_json(
        out / "meta.json",
        {
            "instance": str(Path(args.instance).resolve()),
            "instance_hash": _instance_hash(inst),
            "policy": args.policy,
            "epsilon": args.epsilon,
            "speed": frac_to_str(policy.speed),
            "order": args.order,
            "seed": args.seed,
            "force": args.force,
            "trace_valid": report.ok,
        },
    )
    if not report.ok:
        print(f"trace validation failed: {report.violations[:3]}", file=sys.stderr)
        return EXIT_AUDIT
    print(json.dumps(obj_doc))
    return EXIT_OK


def cmd_audit(args) -> int:
    inst = _load_instance(args.instance)
    run_dir = Path(args.run_dir)
    meta = json.loads((run_dir / "meta.json").read_text())
    if meta["instance_hash"] != _instance_hash(inst):
        print("error: instance hash does not match the recorded run", file=sys.stderr)
        return EXIT_INCOMPATIBLE

    epsilon = Fraction(meta["epsilon"]) if meta.get("epsilon") else None
    policy = PolicyConfig.make(
        meta["policy"], epsilon=epsilon, speed=Fraction(meta["speed"]), order_mode=meta["order"]
    )
    trace = simulate(inst, policy, seed=meta["seed"], keep_history=True, force=meta["force"])

    which = args.which
    if which == "kkt":
        doc = {"checks": []}
        ok = True
        for rec in trace.history:
            rep = kkt_audit(rec.graph, rec.solution, rec.cp_weights)
            ok = ok and rep.ok
            doc["checks"].append({"segment_start": frac_to_str(rec.start), **rep.to_dict()})
        doc["ok"] = ok
    elif which == "ct-dual":
        if meta["policy"] != "ct":
            print("error: ct-dual audit needs a ct run", file=sys.stderr)
            return EXIT_INCOMPATIBLE
        rep = competitive_report(inst, trace)
        doc = rep.to_dict()
        ok = rep.ok
    elif which in ("ft-dual", "laps-dual"):
        mode = "ft" if which == "ft-dual" else "laps"
        if meta["policy"] != mode:
            print(f"error: {which} audit needs a {mode} run", file=sys.stderr)
            return EXIT_INCOMPATIBLE
        rep = flow_dual_audit(inst, trace, epsilon, mode)
        doc = rep.to_dict()
        ok = rep.ok
    else:  # exhaustive
        opt = exhaustive_opt(inst, "completion", args.job_limit)
        doc = {
            "exhaustive_opt": None if opt is None else frac_to_str(opt),
            "chain_lb": frac_to_str(chain_lb(inst)),
            "release_lb": frac_to_str(release_lb(inst)),
        }
        if meta["policy"] == "ct" and opt is not None:
            cost_b = 2 * objective(trace, inst, "completion")
            doc["ratio_b_vs_opt"] = _fmt(cost_b / opt) if opt > 0 else None
            doc["ok"] = ok = opt == 0 or cost_b <= 10 * opt
        else:
            doc["ok"] = ok = opt is not None
    _atomic_write_json(run_dir / f"audit_{which}.json", doc)
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_report(args) -> int:
    batch = Path(args.batch_dir)
    run_dirs = sorted(p.parent for p in batch.glob("**/objective.json"))
    if not run_dirs:
        print("error: no runs found in batch directory", file=sys.stderr)
        return EXIT_EMPTY
    rows = [["run", "policy", "objective", "objective_float", "trace_valid", "audits_ok"]]
    adversary = []
    for rd in run_dirs:
        meta = json.loads((rd / "meta.json").read_text())
        obj = json.loads((rd / "objective.json").read_text())
        val = obj.get("objective_b") or obj.get("objective_flow") or obj.get("objective_a")
        audits = sorted(rd.glob("audit_*.json"))
        audits_ok = all(json.loads(a.read_text()).get("ok", False) for a in audits) if audits else ""
        rows.append(
            [
                rd.name,
                meta["policy"],
                val,
                _fmt(Fraction(val)),
                meta["trace_valid"],
                audits_ok,
            ]
        )
        scenario_path = Path(meta["instance"] + ".scenario.json")
        if scenario_path.exists() and "objective_flow" in obj:
            sc = json.loads(scenario_path.read_text())
            ratio = Fraction(obj["objective_flow"]) / Fraction(sc["opt_flow"])
            adversary.append((sc["n"], ratio))
    buf = "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"
    _atomic_write(batch / "summary.csv", buf.encode())
    if adversary:
        adversary.sort()
        rows = [["n", "ratio", "ratio_float"]]
        for n, r in adversary:
            rows.append([n, frac_to_str(r), _fmt(r)])
        buf = "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"
        _atomic_write(batch / "adversary.csv", buf.encode())
    print(f"wrote {batch / 'summary.csv'} ({len(run_dirs)} runs)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dagsched")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("generate", help="write an instance file")
    g.add_argument("--kind", choices=["random", "star"], required=True)
    g.add_argument("--jobs", type=int, default=10)
    g.add_argument("--layers", type=int, default=3)
    g.add_argument("--density", type=float, default=0.5)
    g.add_argument("--machines", type=int, default=1)
    g.add_argument("--release-mode", choices=["zero", "component", "layered"], default="zero")
    g.add_argument("--n", type=int, default=10, help="star adversary size")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="simulate a policy on an instance")
    r.add_argument("--instance", required=True)
    r.add_argument("--policy", choices=["ct", "ft", "laps"], required=True)
    r.add_argument("--epsilon", default=None, help="rational, e.g. 1/2")
    r.add_argument("--speed", default=None, help="override policy speed")
    r.add_argument("--order", choices=["fixed-topological", "dynamic-completion"], default="fixed-topological")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--force", action="store_true")
    r.add_argument("--out-dir", default=None)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="replay a run and verify certificates")
    a.add_argument("--instance", required=True)
    a.add_argument("--run-dir", required=True)
    a.add_argument("--which", choices=["kkt", "ct-dual", "ft-dual", "laps-dual", "exhaustive"], required=True)
    a.add_argument("--job-limit", type=int, default=8)
    a.set_defaults(func=cmd_audit)

    b = sub.add_parser("report", help="aggregate a batch of runs")
    b.add_argument("--batch-dir", required=True)
    b.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
