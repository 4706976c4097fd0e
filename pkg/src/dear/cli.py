"""Command-line front end: simulate, fit, and evaluate subcommands.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
All CSVs are UTF-8 with LF newlines and '.' decimals; floats are written
with repr so files parse back losslessly.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import estimator
from .backtest import run_backtest, resolve_groups
from .data import RunConfig, ingest_csv, serialize_dataset
from .errors import (EmptyDatasetError, InsufficientDataError,
                     InsufficientHistoryError, InvalidBandwidthError,
                     InvalidConfigError, InvalidSampleError, NumericalError,
                     SchemaError, SparsityError)
from .metrics import QUANTILE_LEVELS
from .synth import SynthSpec, generate, ground_truth_csv
from .tseries import ljung_box

CONFIG_ERRORS = (InvalidConfigError,)
DATA_ERRORS = (SchemaError, EmptyDatasetError, InsufficientDataError,
               InsufficientHistoryError, InvalidSampleError, FileNotFoundError)
NUMERIC_ERRORS = (NumericalError, SparsityError, InvalidBandwidthError)


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.from_file(path)


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    spec = SynthSpec(mean=cfg.synth_mean, sd=cfg.synth_sd, ar=cfg.synth_ar,
                     innovation=cfg.synth_innovation,
                     covariate_process=cfg.synth_covariates,
                     dim=cfg.synth_dim, n=cfg.synth_n, seed=seed)
    ds, gt = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    serialize_dataset(ds, out / "data.csv")
    _write(out / "ground_truth.csv", ground_truth_csv(ds, gt))
    meta = (f"rng={gt.rng_algorithm}\nseed={seed}\nn={spec.n}\ndim={spec.dim}\n"
            f"mean={spec.mean}\nsd={spec.sd}\nar={','.join(map(str, spec.ar))}\n"
            f"innovation={spec.innovation}\ncovariates={spec.covariate_process}\n")
    _write(out / "meta.txt", meta)
    print(f"wrote {spec.n} rows to {out / 'data.csv'}")
    return 0


def _ingest(args, cfg: RunConfig):
    if args.data is None:
        raise InsufficientDataError("--data is required")
    ds, report = ingest_csv(args.data, cfg.schema(str(args.data)))
    if report.rows_dropped:
        print(f"ingest: {report.as_text()}", file=sys.stderr)
    return ds


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    ds = _ingest(args, cfg)
    if ds.n < cfg.window:
        raise InsufficientDataError(
            f"dataset has {ds.n} rows, window needs {cfg.window}")
    groups, anchors = resolve_groups(cfg, ds.covariate_names)
    x = ds.x[ds.n - cfg.window:]
    y = ds.y[ds.n - cfg.window:]
    model = estimator.fit(x, y, ds.kinds, cfg, groups, anchors)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    estimator.save_model(model, out / "model.npz")
    coefs = ",".join(repr(float(c)) for c in model.ar.coef) or "-"
    pvals = [ljung_box(model.residuals, k, cfg.alpha).p_value
             for k in range(1, model.order + 1)]
    print(f"order={model.order} iterations={model.iterations_run} "
          f"converged={model.converged}")
    print(f"ar_coefficients={coefs}")
    print("ljung_box_p=" + (",".join(f"{p:.6g}" for p in pvals) or "-"))
    if model.warning:
        print(f"warning={model.warning}", file=sys.stderr)
    return 0


def _forecast_csv(result) -> str:
    header = ["t", "mean"] + [f"q{lvl:.3f}" for lvl in QUANTILE_LEVELS] + ["clamped"]
    lines = [",".join(header)]
    for rec in result.records:
        row = [str(rec.t), repr(float(rec.mean))]
        if rec.quantiles is None:
            row += ["nan"] * len(QUANTILE_LEVELS)
        else:
            row += [repr(float(v)) for v in rec.quantiles]
        row.append("1" if rec.clamped else "0")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _density_grid_csv(ds, cfg, result) -> str:
    """pdf on a fixed y-grid for the requested test instants (plot data)."""
    lines = ["t,y,pdf"]
    lo = float(ds.y.min()) - 0.25 * (float(ds.y.max()) - float(ds.y.min()) or 1.0)
    hi = float(ds.y.max()) + 0.25 * (float(ds.y.max()) - float(ds.y.min()) or 1.0)
    ygrid = np.linspace(lo, hi, 201)
    by_t = {rec.t: rec for rec in result.records}
    for t in cfg.grid_instants:
        rec = by_t.get(t)
        if rec is None or rec.density is None:
            continue
        pdf = rec.density.pdf(ygrid)
        for yv, pv in zip(ygrid, pdf):
            lines.append(f"{t},{float(yv)!r},{float(pv)!r}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    if args.method:
        cfg.method = args.method
        cfg.__post_init__()
    if args.start is not None:
        cfg.start = args.start
    if args.end is not None:
        cfg.end = args.end
    if args.parallel is not None:
        cfg.parallel = args.parallel
    ds = _ingest(args, cfg)
    keep_density = tuple(cfg.grid_instants)
    result = run_backtest(ds, cfg, cfg.method)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "forecasts.csv", _forecast_csv(result))
    _write(out / "metrics.csv", result.report.as_csv())
    _write(out / "metrics.txt", result.report.as_text())
    if keep_density:
        _write(out / "density-grid.csv", _density_grid_csv(ds, cfg, result))
    print(f"method={cfg.method} n={result.report.n_test} "
          + result.report.summary_line())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dear",
        description="conditional density power-curve modeling with autocorrelated residuals")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="key=value config file")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)

    p_sim = sub.add_parser("simulate", help="generate synthetic data with ground truth")
    common(p_sim)

    p_fit = sub.add_parser("fit", help="fit the model on the latest window")
    common(p_fit)
    p_fit.add_argument("--data", type=Path, default=None, help="input CSV")

    p_eval = sub.add_parser("evaluate", help="rolling one-step-ahead evaluation")
    common(p_eval)
    p_eval.add_argument("--data", type=Path, default=None, help="input CSV")
    p_eval.add_argument("--method", choices=("dear", "amk", "aml", "persistence", "kdes"),
                        default=None)
    p_eval.add_argument("--start", type=int, default=None)
    p_eval.add_argument("--end", type=int, default=None)
    p_eval.add_argument("--parallel", type=lambda s: s.lower() in ("true", "1", "yes"),
                        default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"simulate": cmd_simulate, "fit": cmd_fit, "evaluate": cmd_evaluate}
    try:
        return handlers[args.command](args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
