"""``simctl``: run the bundled experiments from the command line.

    simctl <validate|flow|poisson|sweep> [--config FILE] [--seed N] [--runs N]
           [--horizon N] [--out DIR] [--no-plots] [--mu F] [--algo LIST]

Exit status: 0 on success, 2 on a configuration error, 3 when an estimate
diverges.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import DivergenceError, RankDeficientError, ScenarioError, UnsupportedConfiguration
from .outputs import emit_outputs
from .runner import EXPERIMENTS, RunConfig, run_ensemble

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3

log = logging.getLogger("simctl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="simctl", description="Multitask diffusion LMS experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--seed", type=int, help="master seed (u64)")
        s.add_argument("--runs", type=int, help="Monte Carlo runs")
        s.add_argument("--horizon", type=int, help="iterations per run")
        s.add_argument("--out", default=f"out-{name}", help="output directory")
        s.add_argument("--no-plots", action="store_true", help="skip image outputs")
        s.add_argument("--mu", type=float, help="step size (base step size for sweep)")
        s.add_argument("--algo", help="comma-separated list of apc,cpc,reduced,clms,nc")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def make_config(args) -> RunConfig:
    data = {}
    if args.config:
        cfg = RunConfig.load(args.config, args.command)
        data = {k: getattr(cfg, k) for k in ("scenario", "algorithms", "mu", "runs",
                                                "horizon", "seed", "leak", "theory", "metric",
                                                "options")}
        base = cfg.base_dir
    else:
        base = None
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ScenarioError("seed must be an unsigned 64-bit integer")
        data["seed"] = args.seed
    if args.runs is not None:
        data["runs"] = args.runs
    if args.horizon is not None:
        data["horizon"] = args.horizon
    if args.mu is not None:
        data["mu"] = args.mu
    if args.algo:
        data["algorithms"] = [a.strip() for a in args.algo.split(",") if a.strip()]
    return RunConfig.from_dict(data, args.command, base_dir=base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = make_config(args)
        log.info("running %s: %d runs x %d iterations", cfg.experiment, cfg.runs, cfg.horizon)
        out = run_ensemble(cfg)
        emit_outputs(out.curves, out.summary, args.out, out.figures, plots=not args.no_plots)
    except DivergenceError as exc:
        print(f"simctl: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ScenarioError, RankDeficientError, UnsupportedConfiguration, KeyError) as exc:
        print(f"simctl: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for n in out.notices:
        print(f"simctl: {n}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
