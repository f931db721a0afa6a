"""Command-line entry point.

    semcache generate --spec workload.json --seed 1 --out trace.jsonl
    semcache run --config config.json --trace trace.jsonl --out results/
    semcache compare --config config.json --modes hdd_only,lru,hstorage,ssd_only --spec workload.json --out results/
    semcache classify --plan plan.json --n1 2 --n2 5
    semcache validate --spec workload.json
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .classify import ClassifyError, PriorityPolicy, priority_for_level
from .plan import AccessPattern, PlanError, QueryPlanTree, assign_levels, random_access_summary
from .sim import MODES, SimError, StorageConfig, compare, run
from .workload import WorkloadError, WorkloadSpec, generate_trace, load_trace, save_trace


class UsageError(Exception):
    pass


def data_path(name: str) -> Path:
    """Path of a file bundled under ``semcache/data``."""
    return Path(str(resources.files("semcache") / "data" / name))


def _load_trace_or_spec(args):
    if bool(args.trace) == bool(args.spec):
        raise UsageError("give exactly one of --trace or --spec")
    if args.trace:
        return load_trace(args.trace)
    return generate_trace(WorkloadSpec.load(args.spec), args.seed)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args):
    trace = generate_trace(WorkloadSpec.load(args.spec), args.seed)
    save_trace(trace, args.out)
    for cls, blocks in trace.class_totals().items():
        print(f"{cls:<18}{blocks:>10}")
    print(f"{'records':<18}{len(trace):>10}")


def cmd_run(args):
    if len(args.config) != 1:
        raise UsageError("run takes exactly one --config")
    config = StorageConfig.load(args.config[0])
    trace = _load_trace_or_spec(args)
    out = _out_dir(args.out)
    log = out / "actions.jsonl" if args.action_log else None
    classified = out / "classified.jsonl" if args.classified else None
    report = run(config, trace, action_log=log, classified_out=classified)
    formats = args.format or ["json"]
    if "json" in formats:
        (out / "report.json").write_text(report.to_json() + "\n")
    if "csv" in formats:
        (out / "report.csv").write_text(report.to_csv())
    t = report.totals
    print(f"{report.name}: {report.total_time_us / 1e6:.3f} s simulated, "
          f"{t.cache_hits}/{t.accessed_blocks} hits ({t.hit_ratio:.1%})")


def cmd_compare(args):
    if not args.config:
        raise UsageError("compare needs at least one --config")
    configs = [StorageConfig.load(p) for p in args.config]
    if args.modes:
        modes = [m.strip() for m in args.modes.split(",") if m.strip()]
        bad = [m for m in modes if m not in MODES]
        if bad:
            raise UsageError(f"unknown mode(s): {', '.join(bad)}")
        configs = [configs[0].with_mode(m) for m in modes]
    trace = _load_trace_or_spec(args)
    out = _out_dir(args.out)
    result = compare(configs, trace)
    formats = args.format or ["json", "csv"]
    if "json" in formats:
        (out / "comparison.json").write_text(result.to_json() + "\n")
    if "csv" in formats:
        (out / "comparison.csv").write_text(result.to_csv())
    print(result.to_table())


def cmd_classify(args):
    tree = QueryPlanTree.load(args.plan)
    if args.policy:
        with open(args.policy) as fh:
            doc = json.load(fh)
        policy = PriorityPolicy.from_dict(doc.get("policy", doc))
    else:
        policy = PriorityPolicy(N=args.N, t=args.N - 1, n1=args.n1, n2=args.n2)
    levels = assign_levels(tree)
    summary = random_access_summary(tree, levels)
    print(f"plan {tree.query_id}: l_low={summary.l_low} l_high={summary.l_high} "
          f"range=[{policy.n1},{policy.n2}] N={policy.N}")
    for oid in sorted(summary.per_object_min_level):
        lvl = summary.per_object_min_level[oid]
        prio = priority_for_level(lvl, summary.l_low, summary.l_high, policy)
        print(f"{oid} (random, level {lvl}): {prio}")
    seq_objects = sorted({op.accessed_object for op in tree.operators()
                          if op.access_pattern is AccessPattern.SEQUENTIAL})
    for oid in seq_objects:
        print(f"{oid} (sequential): {policy.no_evict}")


def cmd_validate(args):
    if args.spec:
        spec = WorkloadSpec.load(args.spec)
        print(f"spec ok: {len(spec.objects)} objects, {len(spec.queries)} queries")
    if args.trace:
        trace = load_trace(args.trace)
        print(f"trace ok: {len(trace)} records")
    for path in args.config or []:
        StorageConfig.load(path)
        print(f"config ok: {path}")
    if not (args.spec or args.trace or args.config):
        raise UsageError("nothing to validate")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semcache", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a trace from a workload spec")
    g.add_argument("--spec", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    for name, func, help_ in (("run", cmd_run, "replay a trace under one configuration"),
                              ("compare", cmd_compare, "replay a trace under several configurations")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", action="append", default=[])
        s.add_argument("--trace")
        s.add_argument("--spec")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", required=True)
        s.add_argument("--format", action="append", choices=["json", "csv"])
        if name == "compare":
            s.add_argument("--modes", help="comma separated modes applied to the first config")
        else:
            s.add_argument("--action-log", action="store_true", help="write actions.jsonl")
            s.add_argument("--classified", action="store_true",
                           help="write classified.jsonl, the trace with priorities")
        s.set_defaults(func=func)

    c = sub.add_parser("classify", help="print per-object priorities for a plan")
    c.add_argument("--plan", required=True)
    c.add_argument("--policy", help="JSON file with N, t, b_percent, n1, n2 (or a full config)")
    c.add_argument("--N", type=int, default=8)
    c.add_argument("--n1", type=int, default=2)
    c.add_argument("--n2", type=int, default=6)
    c.set_defaults(func=cmd_classify)

    v = sub.add_parser("validate", help="check specs, traces and configs")
    v.add_argument("--spec")
    v.add_argument("--trace")
    v.add_argument("--config", action="append")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as e:
        parser.error(str(e))
    except (OSError, json.JSONDecodeError, PlanError, ClassifyError, WorkloadError, SimError,
            ValueError, TypeError) as e:
        print(f"semcache: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
