"""Command-line front end: preprocess, corr, fit, eval, simulate, bench, synth.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import statistics
import sys
from pathlib import Path

import numpy as np

from . import kalman, mlr, synthetic
from .errors import EvenWindowError, KftpError, UsageError
from .live_sim import LiveConfig, _write_segment_rows, simulate_live
from .metrics import bench, r2_gain
from .pipeline import DEFAULT_FEATURES, evaluate, fit_trace, select_features
from .predictors import PREDICTOR_NAMES, make_predictor
from .preprocess import (
    correlation_table,
    estimate_noise,
    measured_vs_filtered_correlation,
    moving_average_filter,
    noise_histogram,
)
from .trace_io import ColumnMapping, load_trace, normalize, split_train_test, write_trace
from .vod_sim import VodConfig, _write_chunk_rows, simulate_vod

log = logging.getLogger("kftp")

DATA_DIR_ENV = "KFTP_DATA_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def resolve(path: str | Path) -> Path:
    """Use ``path`` as given, else look for it under ``$KFTP_DATA_DIR``."""
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    root = os.environ.get(DATA_DIR_ENV)
    if root and (Path(root) / p).exists():
        return Path(root) / p
    return p


def _load(args, trace_path):
    path = resolve(trace_path)
    if not path.exists():
        raise KftpError(f"trace file not found: {trace_path}")
    schema_path = resolve(args.schema)
    if not schema_path.exists():
        raise KftpError(f"schema file not found: {args.schema}")
    return load_trace(path, ColumnMapping.from_json(schema_path))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _check_window(window: int):
    if window < 1 or window % 2 == 0:
        raise EvenWindowError(f"--window must be an odd integer >= 1, got {window}")


def cmd_preprocess(args) -> int:
    trace = _load(args, args.trace)
    _check_window(args.window)
    trace_n, params = normalize(trace)
    filtered = moving_average_filter(trace_n.throughput, args.window)
    noise = estimate_noise(filtered)
    out = _out_dir(args)

    with open(out / "filtered.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "measured", "true", "noise"])
        for t, m, x, v in zip(trace.timestamps, filtered.measured, filtered.true_throughput, filtered.noise):
            w.writerow([repr(float(t)), repr(float(m)), repr(float(x)), repr(float(v))])
    _dump_json(
        {
            "source": trace.source_id,
            "filter_window": args.window,
            "sigma2_M": noise.sigma2_M,
            "sigma_M": noise.sigma_M,
            "mean": noise.mean,
            "measured_vs_filtered_rho": measured_vs_filtered_correlation(trace_n.throughput, args.window),
            "normalization": params.to_dict(),
            "n_samples": len(trace),
        },
        out / "noise.json",
    )
    with open(out / "noise_hist.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_left", "bin_right", "density"])
        w.writerows(noise_histogram(filtered.noise, bins=args.bins))
    _write_corr(correlation_table(trace, args.window, args.leads), out / "corr.csv")
    log.info("preprocess: sigma_M=%.4f over %d samples", noise.sigma_M, len(trace))
    return 0


def _write_corr(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["feature", "L", "rho"])
        w.writeheader()
        w.writerows(rows)


def cmd_corr(args) -> int:
    trace = _load(args, args.trace)
    _check_window(args.window)
    out = _out_dir(args)
    _write_corr(correlation_table(trace, args.window, args.leads), out / "corr.csv")
    return 0


def cmd_fit(args) -> int:
    trace = _load(args, args.trace)
    _check_window(args.window)
    train, _ = split_train_test(trace, args.train_fraction)
    res = fit_trace(train, args.window, args.lead, args.features)
    out = _out_dir(args)
    res.model.save(out / "model.json")
    # timings live apart from the model so model.json stays byte-identical across runs
    _dump_json({"fit_time": res.fit_time, "n_train": res.model.n_train}, out / "fit_timing.json")
    log.info("fit: a=%s sigma2_P=%.3g sigma2_M=%.3g", res.model.coef, res.model.sigma2_P, res.model.sigma2_M)
    return 0


def cmd_eval(args) -> int:
    for name in args.predictor:
        if name not in PREDICTOR_NAMES:
            raise UsageError(f"unknown predictor {name!r}; valid names: {', '.join(PREDICTOR_NAMES)}")
    for w in args.window:
        _check_window(w)
    trace = _load(args, args.trace)
    train, test = split_train_test(trace, args.train_fraction)
    out = _out_dir(args)
    reports, gains, pred_rows = [], [], []
    for F in args.window:
        for L in args.lead:
            res = fit_trace(train, F, L, args.features)
            outcomes = evaluate(
                res.model, test, args.predictor,
                include_warmup=args.include_warmup, fit_time=res.fit_time, dataset=trace.source_id,
            )
            for name, o in outcomes.items():
                reports.append(o.report.to_dict())
                for i in range(o.truth.size):
                    pred_rows.append([F, L, name, i, o.measured[i], o.truth[i], o.predicted[i], int(o.warmup[i])])
            if "kftp" in outcomes and "mlr" in outcomes:
                base = outcomes["mlr"].report.r2
                gains.append({
                    "F": F, "L": L,
                    "r2_gain_percent": r2_gain(outcomes["kftp"].report.r2, base) if base > 0 else None,
                })
    _dump_json({"reports": reports, "r2_gain": gains}, out / "eval.json")
    with open(out / "table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "algorithm", "F", "L", "R2", "MAE"])
        for r in reports:
            w.writerow([r["dataset"], r["predictor"], r["filter_F"], r["lead_L"], r["r2"], r["mae"]])
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["F", "L", "predictor", "n", "measured", "true", "predicted", "warmup_flag"])
        for row in pred_rows:
            w.writerow([*row[:4], *(repr(float(v)) for v in row[4:7]), row[7]])
    return 0


def _model_for(args, trace):
    if args.predictor not in ("kftp", "mlr"):
        return None
    if args.model:
        return mlr.RegressionModel.load(resolve(args.model))
    train, _ = split_train_test(trace, args.train_fraction)
    return fit_trace(train, args.window, args.lead, args.features).model


def cmd_simulate(args) -> int:
    if args.predictor not in PREDICTOR_NAMES:
        raise UsageError(f"unknown predictor {args.predictor!r}; valid names: {', '.join(PREDICTOR_NAMES)}")
    if args.config:
        cfg_path = resolve(args.config)
        cfg = (VodConfig if args.mode == "vod" else LiveConfig).from_json(cfg_path)
    else:
        cfg = VodConfig() if args.mode == "vod" else LiveConfig()
    out = _out_dir(args)
    per_trace = []
    with open(out / "events.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for k, path in enumerate(args.trace):
            trace = _load(args, path)
            model = _model_for(args, trace)
            predictor = make_predictor(args.predictor, model)
            names = model.feature_set if model else ()
            feats = trace.features(names) if names else None
            thr = trace.throughput
            if args.mode == "vod":
                report = simulate_vod(thr, predictor, cfg, features=feats)
                _write_chunk_rows(w, report.per_chunk, trace.source_id, header=(k == 0))
            else:
                report = simulate_live(thr, predictor, cfg, features=feats)
                _write_segment_rows(w, report.per_segment, trace.source_id, header=(k == 0))
            per_trace.append({"trace": trace.source_id, **report.summary()})

    keys = [k for k in per_trace[0] if k != "trace"]
    aggregate = {
        "mean": {k: statistics.fmean(r[k] for r in per_trace) for k in keys},
        "median": {k: statistics.median(r[k] for r in per_trace) for k in keys},
        "n_traces": len(per_trace),
    }
    _dump_json(
        {"mode": args.mode, "predictor": args.predictor, "config": cfg.to_dict(),
         "traces": per_trace, "aggregate": aggregate},
        out / "qoe.json",
    )
    return 0


def cmd_bench(args) -> int:
    if args.repetitions < 3:
        raise UsageError(f"--repetitions must be >= 3 so the median is meaningful, got {args.repetitions}")
    out = _out_dir(args)
    rows = []
    for n in args.sizes:
        syn = synthetic.linear_gaussian(n + 1, seed=args.seed)
        fit_s = bench(mlr.fit, syn.true, syn.features, 1, feature_names=("rsrp", "sinr"),
                      repetitions=args.repetitions)
        model = mlr.fit(syn.true, syn.features, 1, sigma2_M=syn.sigma2_M, feature_names=("rsrp", "sinr"))
        run_s = bench(kalman.run, model, syn.measured, syn.features, repetitions=args.repetitions)
        rows.append({"op": "fit", "N": n, "seconds": fit_s})
        rows.append({"op": "predict", "N": n, "seconds": run_s, "per_sample": run_s / (n + 1)})
    with open(out / "bench.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["op", "N", "seconds", "per_sample"])
        w.writeheader()
        w.writerows(rows)
    return 0


def cmd_synth(args) -> int:
    out = _out_dir(args)
    schema = None
    for k in range(args.count):
        syn = synthetic.linear_gaussian(
            args.n, lead=args.lead, sigma2_P=args.sigma2_p, sigma2_M=args.sigma2_m, seed=args.seed + k
        )
        trace = synthetic.to_trace(syn, args.min_mbps * 1e6, args.max_mbps * 1e6, source_id=f"synthetic_{k}")
        schema = write_trace(trace, out / f"trace_{k}.csv", unit="Mbps")
    _dump_json(schema.to_dict(), out / "schema.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kftp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp, multi=False):
        if multi:
            sp.add_argument("--trace", nargs="+", required=True, help="trace CSV file(s)")
        else:
            sp.add_argument("--trace", required=True, help="trace CSV file")
        sp.add_argument("--schema", required=True, help="JSON column mapping for the trace CSV")
        sp.add_argument("--out", required=True, help="output directory")

    def model_args(sp, sweep=False):
        if sweep:
            sp.add_argument("--window", type=_int_list, default=[3], help="filter window(s) F, e.g. 3,5,7")
            sp.add_argument("--lead", type=_int_list, default=[1], help="time lead(s) L, e.g. 1,3,5,7,9")
        else:
            sp.add_argument("--window", type=int, default=3, help="moving-average window F (odd)")
            sp.add_argument("--lead", type=int, default=1, help="time lead L in samples")
        sp.add_argument("--train-fraction", type=float, default=0.8)
        sp.add_argument("--features", type=_name_list, default=list(DEFAULT_FEATURES),
                        help="radio features to regress on when present (default rsrp,sinr)")

    sp = sub.add_parser("preprocess", help="denoise a trace and report noise and correlations")
    data_args(sp)
    sp.add_argument("--window", type=int, default=3, help="moving-average window F (odd)")
    sp.add_argument("--leads", type=_int_list, default=[1, 3, 5, 7, 9])
    sp.add_argument("--bins", type=int, default=50)
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("corr", help="correlation of present features with future throughput")
    data_args(sp)
    sp.add_argument("--window", type=int, default=3)
    sp.add_argument("--leads", type=_int_list, default=[1, 3, 5, 7, 9])
    sp.set_defaults(func=cmd_corr)

    sp = sub.add_parser("fit", help="fit the regression state equation on the training split")
    data_args(sp)
    model_args(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("eval", help="score predictors on the test split, sweeping F and L")
    data_args(sp)
    model_args(sp, sweep=True)
    sp.add_argument("--predictor", type=_name_list, default=["kftp", "mlr"],
                    help=f"comma-separated subset of {','.join(PREDICTOR_NAMES)}")
    sp.add_argument("--include-warmup", action="store_true")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("simulate", help="run the VoD or live streaming simulator")
    data_args(sp, multi=True)
    model_args(sp)
    sp.add_argument("--mode", choices=("vod", "live"), default="vod")
    sp.add_argument("--predictor", default="kftp", help=f"one of {','.join(PREDICTOR_NAMES)}")
    sp.add_argument("--model", help="model.json from `kftp fit` (otherwise fitted per trace)")
    sp.add_argument("--config", help="simulator config JSON")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench", help="time fit and prediction on synthetic inputs")
    sp.add_argument("--sizes", type=_int_list, default=[100, 1000, 10000])
    sp.add_argument("--repetitions", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("synth", help="write seeded synthetic traces and their schema")
    sp.add_argument("--n", type=int, default=2000, help="samples per trace")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--lead", type=int, default=1)
    sp.add_argument("--sigma2-p", type=float, default=0.0025)
    sp.add_argument("--sigma2-m", type=float, default=0.0025)
    sp.add_argument("--min-mbps", type=float, default=10.0)
    sp.add_argument("--max-mbps", type=float, default=200.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except KftpError as exc:
        print(f"kftp {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"kftp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"kftp {args.command}: numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
