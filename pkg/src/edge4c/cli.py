"""Command line entry points.

Exit codes: 0 success, 2 solver did not converge, 3 infeasible scenario,
4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import builtin_config_names, load_config
from .errors import ConfigError, InfeasibleScenarioError

EXIT_OK = 0
EXIT_NONCONVERGED = 2
EXIT_INFEASIBLE = 3
EXIT_CONFIG = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        default="reference",
        help="path to a config JSON or a bundled name "
        f"({', '.join(builtin_config_names())})",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")


def _load(args) -> "ScenarioConfig":
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = _override(config, seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        config = _override(config, epochs=args.epochs)
    return config


def _override(config, **fields):
    from .config import config_from_dict

    raw = dict(config.raw)
    raw.update(fields)
    return config_from_dict(raw)


def cmd_run(args) -> int:
    from .pipeline import run_pipeline

    config = _load(args)
    out = args.out or f"out/{config.name}-{args.rule or config.solver.rule}-s{config.seed}"
    report, metrics = run_pipeline(config, out_dir=out, rule=args.rule)
    print(f"run '{config.name}' rule={report.rule} seed={config.seed}")
    print(f"  converged={report.converged} after {report.iterations} iterations")
    print(f"  relaxed objective  {report.relaxed_objective:.6g}")
    print(f"  rounded objective  {report.rounded_objective:.6g}")
    print(f"  violation total    {report.violations.delta_total:.6g}")
    print(f"  beta               {report.beta}")
    print(f"  mean delay         {metrics.delay_stats.mean:.4g} s")
    print(f"  cache hit ratio    {metrics.hit_ratio:.3f}")
    print(f"  artifacts in       {out}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_compare_rules(args) -> int:
    from .pipeline import compare_rules

    config = _load(args)
    out = args.out or f"out/{config.name}-rules-s{config.seed}"
    rows = compare_rules(config, out_dir=out)
    header = f"{'rule':<16} {'iters':>6} {'final B':>14} {'delta':>10} {'beta':>8}"
    print(header)
    print("-" * len(header))
    for r in rows:
        beta = "nan" if r["beta"] != r["beta"] else f"{r['beta']:.4f}"
        print(
            f"{r['rule']:<16} {r['iterations']:>6} {r['final_objective']:>14.6g} "
            f"{r['delta_total']:>10.4g} {beta:>8}"
        )
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .costmodel import build_context
    from .oracle import TinyInstance, brute_force_solve
    from .pipeline import build_scenario, run_pipeline

    config = _load(args)
    scenario = build_scenario(config)
    instance = TinyInstance(scenario)
    best_dv, best_obj = brute_force_solve(instance)
    report, _ = run_pipeline(config, out_dir=None, scenario=scenario)
    ctx = build_context(scenario)
    print(f"oracle optimum     {best_obj:.6g}")
    print(f"solver objective   {report.rounded_objective:.6g}")
    if best_obj != 0:
        print(f"ratio              {report.rounded_objective / best_obj:.4f}")
    print(f"beta               {report.beta}")
    print(f"violations         {report.violations.delta_total:.6g}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    from .topology import import_stations, run_okm_cs, spaces_to_json

    stations = import_stations(args.stations)
    spaces = run_okm_cs(stations, args.r, seed=args.seed or 0)
    text = spaces_to_json(spaces)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {len(spaces)} spaces to {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_validate_config(args) -> int:
    config = load_config(args.config)
    print(f"config '{config.name}' is valid")
    print(json.dumps(config.raw, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edge4c",
        description="Collaborative edge computing: clustering, joint "
        "offloading/caching optimization, and cache simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the full pipeline")
    _add_common(p_run)
    p_run.add_argument(
        "--rule", choices=["cyclic", "gs", "gauss_southwell", "random", "randomized"],
        default=None, help="block selection rule override",
    )
    p_run.add_argument("--epochs", type=int, default=None, help="override epochs")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare-rules", help="run all selection rules side by side")
    _add_common(p_cmp)
    p_cmp.add_argument("--epochs", type=int, default=None, help="override epochs")
    p_cmp.set_defaults(func=cmd_compare_rules)

    p_oracle = sub.add_parser(
        "oracle", help="brute-force a tiny config and compare with the solver"
    )
    _add_common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle, config_default="tiny")

    p_cluster = sub.add_parser("cluster", help="cluster a station CSV into spaces")
    p_cluster.add_argument("--stations", required=True, help="CSV with id,x,y columns")
    p_cluster.add_argument("-r", type=int, required=True, help="number of spaces")
    p_cluster.add_argument("--seed", type=int, default=0)
    p_cluster.add_argument("--out", default=None, help="output JSON path")
    p_cluster.set_defaults(func=cmd_cluster)

    p_val = sub.add_parser("validate-config", help="validate a config file")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleScenarioError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
