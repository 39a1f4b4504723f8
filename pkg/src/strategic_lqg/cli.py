"""Command line interface: ``strategic-lqg static|run|verify``.

Agents are numbered from 1 on the command line and in CSV output; stages
from 0.  Exit codes: 0 success, 1 solver or verification failure, 2
configuration error.
"""
import argparse
import csv
import json
import os
import sys

import numpy as np

from .lqg import ModelError
from .qp import DegenerateProgramError
from .scenario import ScenarioError, load_scenario
from .sim import MCConfig, simulate_many, summarize
from .static import run_static

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
RUN_COLUMNS = ["episode", "t", "agent", "x_true", "bid", "u_total", "stage_payment", "stage_utility"]


class ConfigError(Exception):
    pass


def fmt(x):
    return "%.17g" % x


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def cmd_static(args):
    sc = load_scenario(args.scenario)
    if not sc.static_bids:
        raise ConfigError("scenario has no static_bids block")
    out = run_static(list(sc.static_bids))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["quantity", "agent", "excluded_agent", "value"])
        for i, u in enumerate(out.allocation):
            w.writerow(["allocation", i + 1, "", fmt(u)])
        for i, p in enumerate(out.payments):
            w.writerow(["payment", i + 1, "", fmt(p)])
        for i, alloc in enumerate(out.excluded_allocations):
            others = [j for j in range(len(out.allocation)) if j != i]
            for j, u in zip(others, alloc):
                w.writerow(["excluded_allocation", j + 1, i + 1, fmt(u)])
        w.writerow(["welfare", "", "", fmt(out.welfare)])
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_run(args):
    sc = load_scenario(args.scenario)
    episodes = args.episodes if args.episodes is not None else sc.episodes
    seed = args.seed if args.seed is not None else sc.seed
    h = args.h or sc.h_function
    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    model = sc.model
    batches = simulate_many(model, list(sc.strategies), MCConfig(episodes, seed), h, x0=sc.x0)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "episodes.csv"), "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(RUN_COLUMNS)
        for b in batches:
            for k, e in enumerate(b.episodes):
                for t in range(model.horizon):
                    for i in range(model.n_agents):
                        w.writerow([int(e), t, i + 1, fmt(b.states[k, t, i]), fmt(b.bids[k, t, i]),
                                    fmt(b.controls[k, t, i]), fmt(b.payments[k, t, i]),
                                    fmt(b.stage_utility[k, t, i])])
    est = summarize(batches)
    summary = {
        "net_utility_mean": [float(v) for v in est.mean],
        "net_utility_stderr": [float(v) for v in est.stderr],
        "rsw_mean": est.rsw_mean,
        "total_payments": est.total_payments,
    }
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(json.dumps(summary))
    return EXIT_OK


def parse_grid(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"--grid expects lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise ConfigError("--grid needs step > 0 and lo <= hi")
    n = int(np.floor((hi - lo) / step + 1e-9))
    grid = np.round(lo + step * np.arange(n + 1), 12)
    grid = np.union1d(grid, [0.0])
    return grid


def cmd_verify(args):
    from . import verify

    sc = load_scenario(args.scenario)
    model = sc.model
    seed = args.seed if args.seed is not None else sc.seed
    h = args.h or sc.h_function
    if args.suite == "decomposition":
        episodes = args.episodes if args.episodes is not None else max(sc.episodes, 1)
        results = verify.decomposition_suite(model, seed, episodes)
    elif args.suite == "ic":
        if args.agent is None or args.stage is None or args.grid is None:
            raise ConfigError("ic suite requires --agent, --stage and --grid")
        if not 1 <= args.agent <= model.n_agents:
            raise ConfigError(f"--agent must be in 1..{model.n_agents}")
        if not 0 <= args.stage < model.horizon:
            raise ConfigError(f"--stage must be in 0..{model.horizon - 1}")
        # a pinned x0 conditions the stage-0 layer start
        history = [sc.x0] if sc.x0 is not None else None
        results = verify.ic_suite(model, args.agent - 1, args.stage, parse_grid(args.grid), h, history=history)
    else:
        if model.n_agents > 3 or model.horizon > 3:
            raise ConfigError("oracle suite runs on scenarios with at most 3 agents and 3 stages")
        results = verify.oracle_suite(model, seed, sc.static_bids)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print(f"{args.suite}: {'all checks passed' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FAIL


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="strategic-lqg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--scenario", required=True, metavar="PATH")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--episodes", type=int)
        sp.add_argument("--h", choices=["zero", "pivot"])

    sp = sub.add_parser("static", help="clear the static VCG market of the static_bids block")
    common(sp)
    sp.add_argument("--out", required=True, metavar="PATH", help="CSV file")
    sp.set_defaults(func=cmd_static)

    sp = sub.add_parser("run", help="simulate episodes of the layered mechanism")
    common(sp)
    sp.add_argument("--out", required=True, metavar="PATH", help="output directory")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify", help="run a property suite")
    sp.add_argument("suite", choices=["decomposition", "ic", "oracle"])
    common(sp)
    sp.add_argument("--out", metavar="PATH", help="unused; accepted for symmetry")
    sp.add_argument("--agent", type=int)
    sp.add_argument("--stage", type=int)
    sp.add_argument("--grid", metavar="LO:HI:STEP")
    sp.set_defaults(func=cmd_verify)
    return p


def _join_negative_values(argv):
    # let "--grid -2:2:0.25" through; argparse would read -2:2:0.25 as a flag
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--grid":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--grid={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    try:
        return args.func(args)
    except (ScenarioError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateProgramError, ModelError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except Exception as exc:  # noqa: BLE001 - exit codes are part of the interface
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
