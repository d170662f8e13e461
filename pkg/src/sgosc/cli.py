"""Command-line entry point.

    sgosc list-scenarios
    sgosc simulate <id|path|all> ... [--out DIR] [--oracle N]
                   [--sample-interval H] [--set key=value ...] [--jobs J]
    sgosc verify <id|path> [--set key=value ...]

Exit codes: 0 success, 2 validation error, 3 simulation blow-up,
4 oracle-integrity failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import analysis
from .config import registry_ids, registry_tree, resolve
from .errors import SgoscError
from .runner import certificates, run_scenario

logger = logging.getLogger("sgosc")


def _overrides(args) -> list[str]:
    items = list(args.set or [])
    if getattr(args, "oracle", None) is not None:
        items.append(f"run.oracle={args.oracle}")
    if getattr(args, "sample_interval", None) is not None:
        items.append(f"run.sample_interval={args.sample_interval}")
    return items


def cmd_list(args) -> int:
    for sid in registry_ids():
        desc = registry_tree(sid).get("description", "")
        print(f"{sid:26s} {desc}")
    return 0


def cmd_simulate(args) -> int:
    names = []
    for name in args.scenarios:
        names.extend(registry_ids() if name == "all" else [name])
    overrides = _overrides(args)
    scenarios = [resolve(name, overrides) for name in names]
    out = Path(args.out)

    def run(scenario):
        return run_scenario(scenario, out / scenario.id, figure=not args.no_figure)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        reports = list(pool.map(run, scenarios))
    code = 0
    for rep in reports:
        term = "-" if rep.terminal_error is None else f"{rep.terminal_error:.3e}"
        min_n = "-" if rep.min_n is None else f"{rep.min_n:.4g}"
        print(f"{rep.scenario:26s} {rep.status:6s} |E-E*|={term}  min n={min_n}")
        if rep.error:
            print(f"  {rep.error['type']}: {rep.error['message']}", file=sys.stderr)
            code = code or rep.exit_code
    return code


def cmd_verify(args) -> int:
    scenario = resolve(args.scenario, _overrides(args))
    result = {"scenario": scenario.id, **certificates(scenario)}
    params = scenario.params
    gamma0 = 0.5 * params.gamma
    R = analysis.lyapunov_matrix(params, gamma0)
    result["lyapunov_matrix"] = {"gamma0": gamma0, "R": R.tolist()}
    print(json.dumps(result, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgosc", description="Speed-gradient energy control of a damped quantum oscillator"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-scenarios", help="list the built-in scenarios")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("simulate", help="run scenarios and write CSV/SVG/JSON")
    p.add_argument("scenarios", nargs="+", help="registry id, TOML path, or 'all'")
    p.add_argument("--out", default="runs", help="output directory (default: runs)")
    p.add_argument("--oracle", type=int, help="also run the master-equation oracle at this Fock dimension")
    p.add_argument("--sample-interval", type=float, help="zero-order-hold interval")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key, e.g. controller.gamma2=30")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--no-figure", action="store_true", help="skip figure.svg")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="evaluate certificates without simulating")
    p.add_argument("scenario")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except SgoscError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
