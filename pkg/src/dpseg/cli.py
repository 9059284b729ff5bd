"""Command-line surface: simulate | fit | summarize | compare | replicate-study."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .backend import backend_name
from .diagnostics import format_summary, rand_index, summarize, summary_table
from .draws import read_draws, rle_decode, write_draws
from .emissions import FAMILY_KINDS, EmissionFamily, param_names
from .errors import DpsegError
from .finite import FiniteModelConfig, fit_finite
from .ko import KoConfig, ko_run_chain
from .sampler import ChainConfig, MoveConfig, run_chain
from .series import load_csv
from .simulate import simulate, standard_scheme
from .study import MODELS, format_study, replicate_study

__all__ = ["main"]


def _add_chain_args(p):
    p.add_argument("--iters", type=int, default=130000, help="total iterations")
    p.add_argument("--burnin", type=int, default=80000, help="burn-in iterations")
    p.add_argument("--thin", type=int, default=10, help="thinning interval")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument(
        "--sigma-beta2", type=float, default=1000.0,
        help="variance of the half-normal prior on beta",
    )
    p.add_argument(
        "--backend", choices=["auto", "compiled", "python"], default="auto"
    )


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="dpseg",
        description="Bayesian change-point segmentation with a random number of regimes",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic series")
    p.add_argument("--scheme", choices=["1", "2", "radon"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV (t,value)")
    p.add_argument("--truth-out", help="write the generating labels, one per line")

    p = sub.add_parser("fit", help="fit a model to a CSV series")
    p.add_argument("--model", choices=list(MODELS), required=True)
    p.add_argument("--emission", choices=list(FAMILY_KINDS), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--column", help="value column (name or 0-based index)")
    p.add_argument("--time-column", help="time-label column (name or 0-based index)")
    p.add_argument("--standardize", action="store_true",
                   help="standardize the series before fitting")
    p.add_argument("--out", required=True, help="draws file to write")
    p.add_argument("--k0", type=int, default=10, help="initial segment count")
    p.add_argument("--kstar-grid", default="4,5,6,7,8,9,10",
                   help="comma-separated K* grid (chib model)")
    p.add_argument("--bic-out", help="write the chib BIC table as CSV")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="self-transition mass (ko model)")
    p.add_argument("--ktraj-out", help="write the per-iteration K trajectory (ko model)")
    _add_chain_args(p)

    p = sub.add_parser("summarize", help="summarize a draws file")
    p.add_argument("--draws", required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--table-out", help="write the machine-readable table as CSV")
    p.add_argument("--map-out", help="write the MAP segmentation, one label per line")

    p = sub.add_parser("compare", help="Rand index between two segmentations")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = sub.add_parser("replicate-study", help="repeated simulate+fit cycles")
    p.add_argument("--scheme", choices=["1", "2", "radon"], required=True)
    p.add_argument("--model", choices=list(MODELS), required=True)
    p.add_argument("--n", type=int, default=20, help="number of replicates")
    p.add_argument("--kstar-grid", default="4,5,6,7,8,9,10")
    p.add_argument("--k0", type=int, default=10)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", help="write the report to a file")
    _add_chain_args(p)
    return ap


def _column(spec):
    if spec is None:
        return None
    try:
        return int(spec)
    except ValueError:
        return spec


def _read_labels(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) == 1 and "x" in lines[0]:
        return rle_decode(lines[0])
    return np.array([int(ln) for ln in lines], dtype=np.int64)


def _cmd_simulate(args):
    spec = standard_scheme(args.scheme)
    ts = simulate(spec, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("t,value\n")
        for t, v in enumerate(ts.values, start=1):
            fh.write(f"{t},{v!r}\n")
    if args.truth_out:
        with open(args.truth_out, "w", encoding="utf-8") as fh:
            fh.writelines(f"{v}\n" for v in ts.truth.seq.s)
    print(f"wrote {ts.T} points to {args.out} (scheme {args.scheme}, seed {args.seed})")
    return 0


def _cmd_fit(args):
    ts = load_csv(
        args.data,
        column=_column(args.column),
        time_column=_column(args.time_column),
        standardize=args.standardize,
    )
    family = EmissionFamily(args.emission)
    cfg = ChainConfig(
        iterations=args.iters,
        burn_in=args.burnin,
        thin=args.thin,
        seed=args.seed,
        init_segments=args.k0,
    )
    print(f"fitting model={args.model} on T={ts.T} [{backend_name(args.backend)} backend]")
    if args.model == "dp":
        draws = run_chain(
            ts, family, cfg, MoveConfig(),
            sigma_beta2=args.sigma_beta2, backend=args.backend,
        )
        write_draws(draws, args.out, family_kind=family.kind, T=ts.T)
        print(f"wrote {len(draws)} draws to {args.out}")
    elif args.model == "chib":
        grid = tuple(int(v) for v in args.kstar_grid.split(","))
        fcfg = FiniteModelConfig(
            kstar_grid=grid, chain=cfg, sigma_beta2=args.sigma_beta2
        )
        result = fit_finite(ts, family, fcfg, backend=args.backend)
        print("K*,BIC,log_lik,n_params")
        for kstar, bic, ll, p in result.bic_table():
            print(f"{kstar},{bic:.3f},{ll:.3f},{p}")
        if args.bic_out:
            with open(args.bic_out, "w", encoding="utf-8") as fh:
                fh.write("kstar,bic,log_lik,n_params\n")
                for kstar, bic, ll, p in result.bic_table():
                    fh.write(f"{kstar},{bic!r},{ll!r},{p}\n")
        best = result.best
        write_draws(best.draws, args.out, family_kind=family.kind, T=ts.T)
        print(f"selected K*={best.kstar}; wrote {len(best.draws)} draws to {args.out}")
    else:
        draws, k_traj = ko_run_chain(
            ts, family, cfg,
            KoConfig(alpha=args.alpha, sigma_beta2=args.sigma_beta2),
            backend=args.backend,
        )
        write_draws(draws, args.out, family_kind=family.kind, T=ts.T)
        if args.ktraj_out:
            np.savetxt(args.ktraj_out, k_traj, fmt="%d")
        print(
            f"wrote {len(draws)} draws to {args.out}; "
            f"K trajectory {k_traj[0]} -> {k_traj[-1]}"
            f" ({'non-increasing' if np.all(np.diff(k_traj) <= 0) else 'NOT monotone'})"
        )
    return 0


def _cmd_summarize(args):
    draws, meta = read_draws(args.draws)
    names = param_names(meta["family"]) if meta["family"] in FAMILY_KINDS else None
    rs = summarize(draws, level=args.level, param_names=names)
    print(format_summary(rs))
    if args.table_out:
        with open(args.table_out, "w", encoding="utf-8") as fh:
            fh.write("section,regime,name,value,lo,hi\n")
            for row in summary_table(rs):
                fh.write(",".join(str(c) for c in row) + "\n")
    if args.map_out:
        with open(args.map_out, "w", encoding="utf-8") as fh:
            fh.writelines(f"{v}\n" for v in rs.map_segmentation.s)
    return 0


def _cmd_compare(args):
    a = _read_labels(args.a)
    b = _read_labels(args.b)
    print(f"rand_index {rand_index(a, b)!r}")
    return 0


def _cmd_replicate_study(args):
    cfg = ChainConfig(
        iterations=args.iters,
        burn_in=args.burnin,
        thin=args.thin,
        seed=args.seed,
        init_segments=args.k0,
    )
    report = replicate_study(
        args.scheme,
        args.n,
        args.model,
        cfg,
        sigma_beta2=args.sigma_beta2,
        kstar_grid=tuple(int(v) for v in args.kstar_grid.split(",")),
        backend=args.backend,
        workers=args.workers,
    )
    text = format_study(report)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "summarize": _cmd_summarize,
    "compare": _cmd_compare,
    "replicate-study": _cmd_replicate_study,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DpsegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
