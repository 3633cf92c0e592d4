"""Command-line interface.

Subcommands:

  truth    generate a synthetic truth, its data files, and a run config
  invert   run the full inversion pipeline from a config file
  fields   draw posterior fields from a saved mixture (or scenario A)
  density  tabulate a 1-D marginal density of a saved mixture
  stats    recompute reproduction statistics from saved CSV artifacts

All mixture coordinates are in the transformed space recorded in
``parameters.csv`` next to the mixture file.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import __version__
from .config import load_config, write_default_config
from .data import read_typeB_file
from .engine import draw_posterior_fields, run_inversion, save_artifacts
from .exceptions import AnchorInvError
from .mixture import load_mixture, marginal_density, mixture_moments
from .truth import default_study, generate_truth, write_truth

__all__ = ["main"]


def _cmd_truth(args) -> int:
    grid, forward, field_transform, typeA_nodes, inverted_nodes = default_study(
        args.grid_size
    )
    profile = None
    if args.profile:
        profile = np.loadtxt(args.profile, dtype=np.float64, ndmin=1)
    rng = None
    if args.typea_sd is not None or args.typeb_sd is not None:
        rng = np.random.default_rng(args.seed)
    bundle = generate_truth(
        grid,
        forward,
        field_transform,
        typeA_nodes,
        inverted_nodes,
        profile_natural=profile,
        typeA_sd=args.typea_sd,
        typeB_sd=args.typeb_sd,
        rng=rng,
    )
    write_truth(bundle, args.out)
    if args.emit_config:
        import os

        write_default_config(
            os.path.join(args.out, "run.ini"),
            grid_size=args.grid_size,
            scenario=args.scenario,
            n=args.n,
            seed=args.seed,
        )
    print(f"truth written to {args.out}")
    print(
        f"grid size {grid.size}, {bundle.typeA_nodes.shape[0]} type-A, "
        f"{bundle.typeB_indices.shape[0]} type-B, "
        f"{bundle.inverted_nodes.shape[0]} inverted anchors"
    )
    return 0


def _cmd_invert(args) -> int:
    config = load_config(args.config)
    overrides = {}
    for name in ("scenario", "n", "seed", "workers", "posterior_draws"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if overrides:
        config = dataclasses.replace(config, **overrides)
    art = run_inversion(config, out_dir=args.out)
    print(f"scenario {art.scenario}: artifacts written to {args.out}")
    if art.ess is not None:
        print(f"effective sample size {art.ess:.1f} (n = {art.n}, k = {art.k})")
    print(
        f"forward calls {art.forward_calls}, discarded "
        f"{art.n_discarded + art.posterior_discarded}"
    )
    if art.stats is not None:
        covered = int(art.stats[:, 7].sum())
        print(f"[5,95]% bands cover {covered} of {art.stats.shape[0]} observations")
    return 0


def _cmd_fields(args) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        config = dataclasses.replace(config, workers=args.workers)
    posterior = load_mixture(args.mixture) if args.mixture else None
    rng = np.random.default_rng(args.seed)
    art = draw_posterior_fields(config, posterior, args.count, rng)
    save_artifacts(art, args.out, config)
    kept = art.posterior_attempted - art.posterior_discarded
    print(f"{kept} posterior field realizations written to {args.out}")
    return 0


def _cmd_density(args) -> int:
    mix = load_mixture(args.mixture)
    index = args.index
    if args.name is not None:
        if args.parameters is None:
            raise SystemExit("--name needs --parameters (the parameters.csv file)")
        index = None
        with open(args.parameters) as fh:
            next(fh)
            for line in fh:
                idx_s, name, _transform = line.strip().split(",", 2)
                if name == args.name:
                    index = int(idx_s)
                    break
        if index is None:
            raise SystemExit(f"parameter {args.name!r} not found in {args.parameters}")
    if index is None:
        raise SystemExit("one of --index or --name is required")
    if not 0 <= index < mix.dim:
        raise SystemExit(f"index {index} outside mixture dimension {mix.dim}")
    if args.grid is not None:
        lo, hi, count = args.grid
        grid = np.linspace(lo, hi, int(count))
    else:
        mean, cov = mixture_moments(mix)
        sd = float(np.sqrt(cov[index, index]))
        grid = np.linspace(mean[index] - 4 * sd, mean[index] + 4 * sd, 201)
    dens = marginal_density(mix, [index], grid)
    out = open(args.out, "w", newline="\n") if args.out else sys.stdout
    try:
        out.write("value,density\n")
        for v, d in zip(grid, dens):
            out.write(f"{v:.17g},{d:.17g}\n")
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_stats(args) -> int:
    reproductions = np.loadtxt(args.reproductions, delimiter=",", skiprows=1, ndmin=2)
    type_b = read_typeB_file(args.typeb)
    from .engine import reproduction_stats

    rows = reproduction_stats(reproductions, type_b)
    out = open(args.out, "w", newline="\n") if args.out else sys.stdout
    try:
        out.write("index,observed,q05,q25,q50,q75,q95,covered\n")
        for row in rows:
            out.write(",".join(f"{v:.17g}" for v in row) + "\n")
    finally:
        if args.out:
            out.close()
    covered = int(rows[:, 7].sum())
    print(
        f"[5,95]% bands cover {covered} of {rows.shape[0]} observations",
        file=sys.stderr,
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchorinv",
        description="Anchored Bayesian inversion of 1-D Gaussian random fields.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log pipeline progress"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("truth", help="generate a synthetic truth and data files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--grid-size", type=int, default=80)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", help="natural-unit profile file, one value per line")
    p.add_argument("--typea-sd", type=float, default=None, help="type-A noise sd")
    p.add_argument("--typeb-sd", type=float, default=None, help="type-B noise sd")
    p.add_argument(
        "--emit-config", action="store_true", help="also write run.ini in --out"
    )
    p.add_argument("--scenario", default="AB", choices=("A", "AB", "B"))
    p.add_argument("--n", type=int, default=5000, help="sample size for run.ini")
    p.set_defaults(func=_cmd_truth)

    p = sub.add_parser("invert", help="run the inversion pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--scenario", choices=("A", "AB", "B"))
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--posterior-draws", dest="posterior_draws", type=int)
    p.set_defaults(func=_cmd_invert)

    p = sub.add_parser("fields", help="draw posterior fields from a saved mixture")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--mixture", help="mixture_posterior.txt; omit for scenario A configs"
    )
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_fields)

    p = sub.add_parser("density", help="tabulate a marginal density of a mixture")
    p.add_argument("--mixture", required=True)
    p.add_argument("--index", type=int, help="0-based coordinate index")
    p.add_argument("--name", help="parameter name (needs --parameters)")
    p.add_argument("--parameters", help="parameters.csv written next to the mixture")
    p.add_argument(
        "--grid", nargs=3, type=float, metavar=("LO", "HI", "COUNT"),
        help="evaluation grid; default mean +/- 4 sd, 201 points",
    )
    p.add_argument("--out", help="output CSV; default stdout")
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("stats", help="recompute reproduction statistics")
    p.add_argument("--reproductions", required=True, help="reproductions.csv")
    p.add_argument("--typeb", required=True, help="type-B data file")
    p.add_argument("--out", help="output CSV; default stdout")
    p.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except AnchorInvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
