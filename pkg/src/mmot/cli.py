"""Command line entry point: ``mmot {solve,exact,rate,signature,block}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import build_problem, load_config

EXIT_OK, EXIT_ERROR, EXIT_BOUND = 0, 1, 2


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _emit(obj: dict, out) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_solve(args, cfg) -> int:
    from .entropic import sinkhorn_solve

    if args.epsilon is None:
        raise ValueError("solve needs --epsilon")
    prob = build_problem(cfg)
    sol = sinkhorn_solve(prob.space, prob.cost, cfg.sinkhorn_config(args.epsilon))
    out = sol.to_dict()
    if args.out:
        out["potentials"] = sol.potentials.to_dict()["phis"]
    _emit(out, args.out)
    return EXIT_OK


def cmd_exact(args, cfg) -> int:
    from .exact import lp_solve, solution_to_dict

    prob = build_problem(cfg)
    sol = lp_solve(prob.space, prob.cost, pivot=cfg.lp_pivot)
    _emit(solution_to_dict(sol), args.out)
    return EXIT_OK if sol.status == "optimal" else EXIT_ERROR


def cmd_rate(args, cfg) -> int:
    from .harness import emit_outputs, report_dict, run_rate

    if args.eps_list:
        cfg.eps_list = args.eps_list
    run = run_rate(cfg)
    if args.out:
        out = Path(args.out)
        emit_outputs(run.table, run.fit, out.with_suffix(".csv"), out, args.svg,
                     run.bounds, run.kappa)
    else:
        if args.svg:
            from .plotting import plot_rate

            plot_rate(run.table, run.fit, run.bounds, args.svg)
        print(json.dumps(report_dict(run.table, run.fit, run.bounds, run.kappa), indent=2))
    return EXIT_OK if run.bounds.passed else EXIT_BOUND


def cmd_signature(args, cfg) -> int:
    from .analysis import kappa_estimate, sample_points
    from .exact import lp_solve

    prob = build_problem(cfg)
    support = None
    if prob.space.size <= 300_000:
        support = lp_solve(prob.space, prob.cost, pivot=cfg.lp_pivot).support()
    pts = sample_points(prob.space, cfg.samples, support, rng=cfg.seed)
    est = kappa_estimate(prob.cost_model, pts, cfg.weight_samples, rng=cfg.seed)
    _emit(est.to_dict(), args.out)
    return EXIT_OK


def cmd_block(args, cfg) -> int:
    from .approx import block_approximation, box_partition, verify_block_bounds
    from .exact import lp_solve

    if args.delta is None or args.epsilon is None:
        raise ValueError("block needs --delta and --epsilon")
    prob = build_problem(cfg)
    lp = lp_solve(prob.space, prob.cost, pivot=cfg.lp_pivot)
    parts = [box_partition(mu, args.delta) for mu in prob.space.marginals]
    bp = block_approximation(lp.coupling, parts)
    rep = verify_block_bounds(bp, lp.coupling, prob.cost, args.epsilon, args.delta,
                              rng=cfg.seed)
    _emit(rep, args.out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "exact": cmd_exact,
    "rate": cmd_rate,
    "signature": cmd_signature,
    "block": cmd_block,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmot", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON run configuration")
        s.add_argument("--out", help="output path (JSON); stdout when omitted")
        s.add_argument("--epsilon", type=float)
        s.add_argument("--eps-list", type=_floats, help="comma separated epsilons")
        s.add_argument("--delta", type=float)
        s.add_argument("--samples", type=int, help="random grid tuples for kappa")
        s.add_argument("--svg", help="chart output path (rate)")
        s.add_argument("--seed", type=int)
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.samples is not None:
            cfg.samples = args.samples
        np.random.seed(cfg.seed)
        return COMMANDS[args.command](args, cfg)
    except Exception as exc:  # reported, mapped to exit code 1
        print(f"mmot {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
