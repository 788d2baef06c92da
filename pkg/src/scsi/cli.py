"""Command-line entry point.

Subcommands: gaussian-rates, w2-scatter, twomoon, run, eval, restore.
Every subcommand honors --seed and --out; --threads caps BLAS thread pools
when threadpoolctl is available. Exit code 0 on success, 1 on runtime
errors, 2 on argument or config errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import git_blob_hash, load_config, parse_config
from .experiments import (
    cmd_gaussian_rates,
    cmd_w2_scatter,
    read_points_csv,
    run_experiment,
    twomoon_config_text,
    write_csv,
)
from .metrics import w2_sliced, w2sq_exact
from .nets import load_checkpoint
from .schedules import make_schedule
from .training import restore
from .transport import TransportConfig


def _float_list(text: str):
    return [float(x) for x in text.split(",") if x.strip()]


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=0, help="cap BLAS threads (0 = leave as is)")

    p = argparse.ArgumentParser(prog="scsi", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gaussian-rates", parents=[common], help="analytic convergence-rate curves")
    g.add_argument("--d", type=int, default=8)
    g.add_argument("--dof", type=int, default=16)
    g.add_argument("--eps", type=_float_list, default=[0.0, 1.0], help="comma list of diffusion levels")
    g.add_argument("--iters", type=int, default=1000)
    g.add_argument("--scale", type=float, default=1e-4, help="Wishart scale (low = power-law window)")

    w = sub.add_parser("w2-scatter", parents=[common], help="transport cost vs squared W2 scatter")
    w.add_argument("--d", type=int, default=10)
    w.add_argument("--dof", type=int, default=20)
    w.add_argument("--scales", type=_float_list, default=[1e-3, 1.0, 10.0])
    w.add_argument("--pairs", type=int, default=2000)
    w.add_argument("--eps", type=float, default=0.0)

    t = sub.add_parser("twomoon", parents=[common], help="two-moon AWGN reproduction")
    t.add_argument("--sigma-n", type=float, default=0.5)
    t.add_argument("--mode", choices=("ode", "sde"), default="ode")
    t.add_argument("--outer", type=int, default=3000, help="outer iterations")
    t.add_argument("--inner", type=int, default=1, help="inner SGD steps per outer iteration")
    t.add_argument("--n", type=int, default=10000)
    t.add_argument("--heldout", type=int, default=2000)
    t.add_argument("--resample", type=int, default=2)
    t.add_argument("--steps", type=int, default=64, help="transport steps")
    t.add_argument("--track-every", type=int, default=0)

    r = sub.add_parser("run", parents=[common], help="run an experiment from a config file")
    r.add_argument("--config", required=True)

    e = sub.add_parser("eval", parents=[common], help="W2 between two point CSVs")
    e.add_argument("--restored", required=True)
    e.add_argument("--reference", required=True)
    e.add_argument("--sliced", action="store_true")
    e.add_argument("--projections", type=int, default=128)

    s = sub.add_parser("restore", parents=[common], help="push observations through a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--observations", required=True)
    s.add_argument("--latents", default=None)
    s.add_argument("--schedule", default="ode-linear")
    s.add_argument("--steps", type=int, default=64)
    s.add_argument("--mode", choices=("ode", "sde"), default="ode")
    s.add_argument("--epsilon", type=float, default=0.0)
    s.add_argument("--scheme", choices=("heun", "euler"), default="heun")
    return p


def _limit_threads(n: int):
    if n <= 0:
        return None
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=n)
    except ImportError:
        print("threadpoolctl unavailable; --threads ignored", file=sys.stderr)
        return None


def _dispatch(args) -> int:
    if args.command == "gaussian-rates":
        res = cmd_gaussian_rates(
            d=args.d,
            dof=args.dof,
            eps_list=args.eps,
            iters=args.iters,
            seed=args.seed,
            scale=args.scale,
            out_dir=args.out,
        )
        for eps, slope in res["slopes"].items():
            print(f"eps={eps:g} loglog-slope={slope:.3f}")
        print(f"wrote {args.out}/rates.csv")
        return 0

    if args.command == "w2-scatter":
        res = cmd_w2_scatter(
            d=args.d,
            dof=args.dof,
            scales=args.scales,
            n_pairs=args.pairs,
            eps=args.eps,
            seed=args.seed,
            out_dir=args.out,
        )
        for scale, frac in res["fractions"].items():
            print(f"scale={scale:g} fraction_below_diagonal={frac:.4f}")
        print(f"wrote {args.out}/scatter.csv")
        return 0

    if args.command == "twomoon":
        text = twomoon_config_text(
            sigma_n=args.sigma_n,
            mode=args.mode,
            seed=args.seed,
            outer_iters=args.outer,
            inner_steps=args.inner,
            n=args.n,
            heldout=args.heldout,
            resample=args.resample,
            track_every=args.track_every,
            steps=args.steps,
        )
        cfg = parse_config(text, name=f"twomoon-{args.mode}-sigma{args.sigma_n:g}")
        res = run_experiment(cfg, args.out, seed=args.seed)
        print(f"final W2 = {res['final_w2']:.5f}")
        print(f"wrote {args.out}/run.csv")
        return 0

    if args.command == "run":
        cfg = load_config(args.config)
        res = run_experiment(cfg, args.out, seed=args.seed if args.seed != 0 else None)
        print(f"final W2 = {res['final_w2']:.5f}")
        print(f"wrote {args.out}/run.csv")
        return 0

    if args.command == "eval":
        a = read_points_csv(args.restored)
        b = read_points_csv(args.reference)
        if args.sliced:
            w2sq = w2_sliced(a, b, args.projections, np.random.default_rng(args.seed))
        else:
            w2sq = w2sq_exact(a, b)
        w2 = float(np.sqrt(w2sq))
        print(f"w2_sq = {w2sq:.8g}")
        print(f"w2 = {w2:.8g}")
        os.makedirs(args.out, exist_ok=True)
        h = git_blob_hash(f"eval {args.restored} {args.reference}".encode())
        write_csv(
            os.path.join(args.out, "eval.csv"),
            ["restored", "reference", "w2_sq", "w2"],
            [(args.restored, args.reference, w2sq, w2)],
            h,
        )
        return 0

    if args.command == "restore":
        model, _ = load_checkpoint(args.checkpoint)
        obs = read_points_csv(args.observations)
        latents = read_points_csv(args.latents) if args.latents else None
        sched = make_schedule(args.schedule)
        cfg = TransportConfig(
            steps=args.steps, mode=args.mode, epsilon=args.epsilon, scheme=args.scheme
        )
        rng = np.random.default_rng(args.seed)
        restored = restore(model, cfg, obs, sched=sched, latents=latents, rng=rng)
        os.makedirs(args.out, exist_ok=True)
        h = git_blob_hash(f"restore {args.checkpoint} {args.observations}".encode())
        write_csv(
            os.path.join(args.out, "restored.csv"),
            [f"x{i}" for i in range(restored.shape[1])],
            restored,
            h,
        )
        print(f"wrote {args.out}/restored.csv")
        return 0

    raise ValueError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    limiter = _limit_threads(args.threads)
    try:
        return _dispatch(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures surface with a message, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
