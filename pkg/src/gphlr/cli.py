"""``gp`` command line: data generation, studies, fitting, preprocessing, prediction, plots.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import io, plotting
from .cov import CovarianceParams
from .diagnostics import empirical_variogram, mse
from .errors import DataError, GPError, NumericError
from .estimate import PARAM_NAMES, FitSpec, fit_mle
from .geo import AxisScale, LocationSet, generate_perturbed_grid, order_locations, ORDER_STRATEGIES
from .kriging import simple_kriging
from .likelihood import FieldSample, default_workers, simulate_field
from .preprocess import detrend, inverse_reflected_log, reflected_log
from .studies import (
    METHODS, PRESETS, as_records, kl_study, scheme_for, sim_study, timing_benchmark, timing_ratio,
)

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [t.strip().lower() for t in text.split(",") if t.strip()]


def _kv(text: str) -> dict[str, float]:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, sep, val = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {part!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad number in {part!r}") from None
    return out


def _scale(text: str) -> AxisScale:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("scale must be 'sx,sy'")
    try:
        return AxisScale(float(parts[0]), float(parts[1]))
    except (ValueError, DataError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _provenance(argv, extra: str = "") -> list[str]:
    line = "gp " + " ".join(argv)
    return [line + (f" ; {extra}" if extra else "")]


def _load(path, scale, require_values=True):
    ds = io.read_points(path, require_values=require_values)
    if ds.n == 0:
        raise DataError(f"{path}: no usable rows")
    return ds, LocationSet(ds.coords, scale)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen(args, argv):
    if args.n > 10000:
        raise DataError("gen is limited to n <= 10000")
    locs = generate_perturbed_grid(args.n, args.seed)
    p = CovarianceParams(args.alpha, args.beta, args.nu, args.tau2)
    ordering = order_locations(locs, "as-given")
    z = simulate_field(locs, ordering, p, args.seed).original_values()
    rows = [(float(x), float(y), float(v)) for (x, y), v in zip(locs.coords, z)]
    io.write_csv(args.out, ["x", "y", "value"], rows, _provenance(argv, f"seed={args.seed}"))
    print(f"wrote {len(rows)} points to {args.out} (mean {z.mean():.4f}, variance {z.var():.4f})")


def cmd_kl_study(args, argv):
    n_default, panels = PRESETS[args.preset]
    n = args.n or n_default
    seeds = args.seeds
    rows = kl_study(n, seeds, args.ranks, args.methods, panels, alpha=args.alpha, m=args.m,
                    workers=default_workers())
    header = ["method", "rank", "n", "alpha", "beta", "nu", "tau2", "seed", "kl", "error"]
    io.write_csv(args.out, header, [[r[h] for h in header] for r in as_records(rows)],
                 _provenance(argv, f"seeds={','.join(map(str, seeds))}"))
    failed = sum(1 for r in rows if r.error)
    print(f"wrote {len(rows)} KL cells to {args.out} ({failed} failed)")
    if args.figure:
        plotting.plot_kl_study(as_records(rows), args.figure)
        print(f"figure: {args.figure}")
    if args.time:
        sizes = args.time_sizes
        trows = timing_benchmark(sizes, rank=args.time_rank, method="hlr", runs=args.time_runs, seed=seeds[0])
        tpath = Path(args.out).with_suffix(".timing.csv")
        io.write_csv(tpath, ["method", "rank", "n", "run", "seconds"],
                     [[t.method, t.rank, t.n, t.run, t.seconds] for t in trows], _provenance(argv))
        ratio = timing_ratio(trows, sizes[0], sizes[-1])
        print(f"timing: {tpath}; median t({sizes[-1]})/t({sizes[0]}) = {ratio:.3f}")


def cmd_sim_study(args, argv):
    truth = CovarianceParams(**{**CovarianceParams(1.0, 0.1, 0.5, 0.15).as_dict(), **args.truth})
    rows, summary = sim_study(n=args.n, replicates=args.replicates, rank=args.rank, methods=args.methods,
                              truth=truth, master_seed=args.seed, fixed=tuple(args.fix),
                              init=({**truth.as_dict(), **args.init} if args.init else None),
                              max_evals=args.max_evals, workers=default_workers())
    header = ["replicate", "method", "alpha_hat", "beta_hat", "tau2_hat", "loglik", "evals", "converged"]
    out_rows = []
    for r in rows:
        if r.error:
            out_rows.append([r.replicate, r.method, "", "", "", "", r.evals, "failed"])
        else:
            out_rows.append([r.replicate, r.method, r.alpha_hat, r.beta_hat, r.tau2_hat, r.loglik, r.evals, r.converged])
    for s in summary:
        out_rows.append(["mse", s.method, s.mse_alpha, s.mse_beta, s.mse_tau2, "", s.used, s.failed])
    io.write_csv(args.out, header, out_rows,
                 _provenance(argv, "rows with replicate=mse hold MSE per parameter; evals=used, converged=failed"))
    for s in summary:
        print(f"{s.method:>6}: mse alpha={s.mse_alpha:.5g} beta={s.mse_beta:.5g} tau2={s.mse_tau2:.5g} "
              f"(used {s.used}, failed {s.failed})")
    if args.figure:
        plotting.plot_sim_study(rows, truth, args.figure)
        print(f"figure: {args.figure}")


def _default_init(locs: LocationSet, z: np.ndarray) -> dict[str, float]:
    var = float(np.var(z)) or 1.0
    span = np.ptp(locs.scaled, axis=0)
    diag = float(np.hypot(*span)) or 1.0
    return {"alpha": 0.9 * var, "beta": 0.1 * diag, "nu": 0.5, "tau2": 0.1 * var}


def cmd_fit(args, argv):
    ds, locs = _load(args.data, args.scale)
    if ds.n < 10:
        raise DataError("fit needs at least 10 observations")
    ordering = order_locations(locs, args.order, seed=args.order_seed)
    z = FieldSample.from_original(ds.values, locs, ordering)
    init = _default_init(locs, ds.values)
    init.update(args.init or {})
    fixed = dict(args.fix or {})
    spec = FitSpec(initial={k: v for k, v in init.items() if k not in fixed}, fixed=fixed,
                   scheme=scheme_for(args.method, args.rank, args.m, args.block),
                   max_evals=args.max_evals, tol=args.tol)
    t0 = time.perf_counter()
    try:
        res = fit_mle(z, locs, ordering, spec, workers=default_workers())
    except NumericError:
        raise
    elapsed = time.perf_counter() - t0
    trace_path = args.trace or (None if res.converged else str(args.out) + ".trace.csv")
    if trace_path:
        io.write_csv(trace_path, list(PARAM_NAMES) + ["loglik"],
                     [[p.alpha, p.beta, p.nu, p.tau2, ll] for p, ll in res.trace], _provenance(argv))
    e = res.estimates
    lines = [f"{k}={(0.0 if k == 'tau2' and v < 1e-8 else v):.4f}" for k, v in e.as_dict().items()]
    lines += [
        f"loglik={res.loglik!r}",
        f"loglik_per_obs={res.loglik / ds.n!r}",
        f"evaluations={res.evaluations}",
        f"converged={'true' if res.converged else 'false'}",
        f"scheme={args.method}",
        f"rank={args.rank}",
        f"block={args.block}",
        f"n={ds.n}",
        f"dropped={ds.dropped}",
        f"seconds={elapsed:.3f}",
    ]
    if trace_path:
        lines.append(f"trace={trace_path}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    if not res.converged:
        print(f"warning: optimizer did not converge within {args.max_evals} evaluations; trace at {trace_path}",
              file=sys.stderr)


def cmd_detrend(args, argv):
    ds, _ = _load(args.data, AxisScale())
    resid, trend = detrend(ds.coords, ds.values)
    summary = (f"intercept={trend.intercept!r},slope_x={trend.slope_x!r},slope_y={trend.slope_y!r},"
               f"r2={trend.r2!r},dropped={ds.dropped}")
    io.write_csv(args.out, ["x", "y", "value"],
                 [(float(x), float(y), float(v)) for (x, y), v in zip(ds.coords, resid)],
                 _provenance(argv) + [f"trend {summary}"])
    print(summary)


def _shift_from_comments(comments) -> float | None:
    for c in comments:
        if c.startswith("shift c="):
            return float(c.split("=", 1)[1])
    return None


def cmd_transform(args, argv):
    ds, _ = _load(args.data, AxisScale())
    if args.inverse:
        shift = args.shift if args.shift is not None else _shift_from_comments(ds.comments)
        if shift is None:
            raise DataError("inverse transform needs --shift or a '# shift c=' line in the input")
        vals = inverse_reflected_log(ds.values, shift)
        comments = _provenance(argv)
    else:
        vals, shift = reflected_log(ds.values, args.shift)
        comments = _provenance(argv) + [f"shift c={shift!r}"]
    io.write_csv(args.out, ["x", "y", "value"],
                 [(float(x), float(y), float(v)) for (x, y), v in zip(ds.coords, vals)], comments)
    print(f"{'inverse' if args.inverse else 'forward'} transform with c={shift!r}: {ds.n} rows")


def cmd_variogram(args, argv):
    ds, locs = _load(args.data, args.scale)
    max_dist = args.max_dist or 0.5 * float(np.hypot(*np.ptp(locs.scaled, axis=0))) or 1.0
    table = empirical_variogram(locs, ds.values, args.dist_bins, args.dir_bins, max_dist)
    io.write_csv(args.out, ["dir_bin", "dist_bin", "dir_center", "dist_center", "semivariance", "count"],
                 table.rows, _provenance(argv))
    print(f"wrote {len(table.rows)} variogram cells to {args.out}")
    if args.figure:
        plotting.plot_variogram(table, args.figure)
        print(f"figure: {args.figure}")


def cmd_predict(args, argv):
    train, tlocs = _load(args.train, args.scale)
    targets, glocs = _load(args.targets, args.scale, require_values=False)
    p = CovarianceParams(args.alpha, args.beta, args.nu, args.tau2)
    pred, se = simple_kriging(tlocs, train.values, glocs, p)
    comments = _provenance(argv)
    if targets.values is not None:
        mspe = mse(pred - targets.values, 0.0)
        comments.append(f"mspe={mspe!r}")
        print(f"mean squared prediction error: {mspe:.6g}")
    io.write_csv(args.out, ["x", "y", "pred", "se"],
                 [(float(x), float(y), float(a), float(b)) for (x, y), a, b in zip(targets.coords, pred, se)],
                 comments)
    print(f"wrote {len(pred)} predictions to {args.out}")


def cmd_plot(args, argv):
    records = io.read_records(args.input, required=plotting.KL_COLUMNS)
    panels = plotting.plot_kl_study(records, args.out)
    print(f"wrote {panels} panel(s) to {args.out}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def params(p, alpha=1.0, beta=0.1, nu=0.5, tau2=0.15):
        p.add_argument("--alpha", type=float, default=alpha)
        p.add_argument("--beta", type=float, default=beta)
        p.add_argument("--nu", type=float, default=nu)
        p.add_argument("--tau2", type=float, default=tau2)

    p = sub.add_parser("gen", help="simulate a Matérn field on a perturbed grid")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=1)
    params(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("kl-study", help="KL divergence against rank for each scheme")
    p.add_argument("--preset", choices=sorted(PRESETS), default="fig2")
    p.add_argument("--n", type=int, default=None, help="overrides the preset size")
    p.add_argument("--seeds", type=_ints, default=[1])
    p.add_argument("--ranks", type=_ints, default=[2, 4, 6, 8])
    p.add_argument("--methods", type=_names, default=list(METHODS))
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--out", required=True)
    p.add_argument("--figure", default=None, help="also render the panels (svg/png/pdf)")
    p.add_argument("--time", action="store_true", help="also run the cost-scaling benchmark")
    p.add_argument("--time-sizes", type=_ints, default=[1000, 2000])
    p.add_argument("--time-rank", type=int, default=8)
    p.add_argument("--time-runs", type=int, default=5)
    p.set_defaults(func=cmd_kl_study)

    p = sub.add_parser("sim-study", help="repeated estimation on simulated fields")
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--n", type=int, default=900)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--methods", type=_names, default=["exact", "nn", "nnsum", "hlr"])
    p.add_argument("--truth", type=_kv, default={})
    p.add_argument("--fix", type=_names, default=["nu"])
    p.add_argument("--init", type=_kv, default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--max-evals", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.add_argument("--figure", default=None)
    p.set_defaults(func=cmd_sim_study)

    p = sub.add_parser("fit", help="maximum-likelihood fit of a Matérn model")
    p.add_argument("--data", required=True)
    p.add_argument("--method", default="hlr", help="exact, " + ", ".join(METHODS))
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--block", type=int, nargs="?", const=30, default=1)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--fix", type=_kv, default=None)
    p.add_argument("--init", type=_kv, default=None)
    p.add_argument("--scale", type=_scale, default=AxisScale())
    p.add_argument("--order", choices=ORDER_STRATEGIES, default="coordinate")
    p.add_argument("--order-seed", type=int, default=0)
    p.add_argument("--max-evals", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--trace", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("detrend", help="remove a linear trend in the coordinates")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detrend)

    p = sub.add_parser("transform", help="reflected log transform and its inverse")
    p.add_argument("--data", required=True)
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--shift", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("variogram", help="directional empirical variogram")
    p.add_argument("--data", required=True)
    p.add_argument("--dist-bins", type=int, default=10)
    p.add_argument("--dir-bins", type=int, default=8)
    p.add_argument("--max-dist", type=float, default=None)
    p.add_argument("--scale", type=_scale, default=AxisScale())
    p.add_argument("--out", required=True)
    p.add_argument("--figure", default=None)
    p.set_defaults(func=cmd_variogram)

    p = sub.add_parser("predict", help="exact simple kriging at target locations")
    p.add_argument("--train", required=True)
    p.add_argument("--targets", required=True)
    params(p)
    p.add_argument("--scale", type=_scale, default=AxisScale())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("plot", help="render a kl-study CSV as SVG panels")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, argv)
    except NumericError as exc:
        print(f"gp: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, GPError) as exc:
        print(f"gp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
