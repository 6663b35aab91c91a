"""Command-line front end: ``tsae {synth,train,detect,eval,sweep,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import evaluation, experiment as ex, model as tsae_model, nn, preprocessing as pp, synthetic

log = logging.getLogger("tsae")


def _parse_set(items) -> dict:
    """``a.b=value`` pairs into a nested dict; values are parsed as YAML scalars/lists."""
    out: dict = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ValueError(f"--set expects key=value, got {item!r}")
        node = out
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = yaml.safe_load(raw)
    return out


def _config(args) -> ex.ExperimentConfig:
    over = _parse_set(getattr(args, "set", None))
    for flag, key in (("train_csv", "train_csv"), ("test_csv", "test_csv"), ("rate", "rate"),
                      ("window", "window"), ("model_type", "model"), ("seed", "seed"), ("out_dir", "out_dir")):
        v = getattr(args, flag, None)
        if v is not None:
            over[key] = v
    return ex.load_config(args.config, args.preset, over)


def _threshold(raw: str):
    if raw == "sweep":
        return raw
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"threshold must be a number or 'sweep', got {raw!r}") from None


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- verbs ------------------------------------------------------------------------


def cmd_synth(args) -> None:
    if args.spec:
        spec = synthetic.SyntheticSpec.load(args.spec)
    else:
        spec = synthetic.benchmark_spec(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = synthetic.generate(spec)
    pp.write_csv(train, out / "train.csv")
    pp.write_csv(test, out / "test.csv")
    spec.save(out / "spec.json")
    log.info("wrote %s (train %d x %d, test %d rows)", out, train.T, train.m, test.T)


def cmd_train(args) -> None:
    cfg = _config(args)
    train, _ = ex.load_data(cfg)
    mdl = ex.train_model(cfg, train)
    mdl.meta["config_hash"] = cfg.config_hash()
    ex.save_any(mdl, args.out)
    ex.write_train_log(mdl, args.log or Path(args.out).with_suffix(".log.csv"))
    log.info("saved %s model to %s (config %s)", cfg.model, args.out, mdl.meta["config_hash"])


def cmd_detect(args) -> None:
    mdl = ex.load_any(args.model)
    test = ex.read_table(args.test, ex.pipeline_of(mdl).data_format)
    det = ex.score_test(mdl, test)
    lam = _threshold(args.threshold)
    if lam == "sweep":
        if det.truth is None:
            raise ValueError("threshold 'sweep' needs a labelled test set")
        lam, _ = evaluation.best_f1_sweep(det.scores, det.truth)
    ex.write_scores(det, lam, args.out)
    if det.truth is not None:
        ex.write_truth(det, args.truth_out or Path(args.out).with_suffix(".truth.csv"))
    log.info("scored %d windows; threshold %r", len(det.scores), lam)


def cmd_eval(args) -> None:
    t, scores = ex.read_scores(args.scores)
    truth = ex.read_truth(args.truth, t)
    rep = ex.evaluate_scores(scores, truth, _threshold(args.threshold))
    d = rep.to_dict()
    if args.model:
        d["config_hash"] = ex.load_any(args.model).meta.get("config_hash")
    text = json.dumps(d, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args) -> None:
    cfg = _config(args)
    params = ex.SWEEP_PARAMS if args.param == "all" else (args.param,)

    def progress(row):
        log.info("%s=%s seed=%s f1=%.4f", row["param"], row["value"], row["seed"], row["f1"])

    runs = ex.sweep_runs(cfg, params, progress)
    out = Path(args.out)
    ex.write_sweep(ex.average_runs(runs), out)
    ex.write_sweep(runs, out.with_name(out.stem + "_runs.csv"))
    _write_json({"config_hash": cfg.config_hash(), "config": cfg.to_dict()}, out.with_suffix(".config.json"))


def cmd_report(args) -> None:
    """Plot-ready data for a trained model: loss curves, the correlation matrix
    between first-stage reconstructions and residuals on training data, and
    (given scores and truth) the threshold curve."""
    mdl = ex.load_any(args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ex.write_train_log(mdl, out / "train_log.csv")
    summary = {
        "config_hash": mdl.meta.get("config_hash"),
        "model_type": mdl.meta.get("model_type"),
        "K": mdl.K,
        "m": mdl.m,
    }
    if isinstance(mdl, tsae_model.TSAEModel):
        summary["ae1_params"] = nn.count_params(mdl.ae1.layer_dims)
        summary["ae2_params"] = nn.count_params(mdl.ae2.layer_dims)
        if args.train:
            pipe = ex.pipeline_of(mdl)
            windows = pipe.transform(ex.read_table(args.train, pipe.data_format))
            x_rec, dx, _ = tsae_model.reconstruct_batch(mdl, windows)
            mx, mean, rho, flags = synthetic.correlation_separation_check(x_rec, dx)
            np.savetxt(out / "correlation.csv", rho, delimiter=",", fmt="%.17g")
            summary.update(max_abs_rho=mx, mean_abs_rho=mean, rho_flags=flags)
    else:
        summary["params"] = nn.count_params(mdl.net.layer_dims)
    if args.scores and args.truth:
        t, scores = ex.read_scores(args.scores)
        evaluation.write_sweep_csv(scores, ex.read_truth(args.truth, t), out / "threshold_curve.csv")
    _write_json(summary, out / "summary.json")


# --- parser -------------------------------------------------------------------------


def _add_config_args(p) -> None:
    p.add_argument("--config", help="YAML or JSON experiment config")
    p.add_argument("--preset", choices=sorted(ex.PRESETS))
    p.add_argument("--train-csv", dest="train_csv")
    p.add_argument("--test-csv", dest="test_csv")
    p.add_argument("--rate", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--model-type", dest="model_type", choices=ex.MODEL_TYPES)
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config field, e.g. train.epochs_ae1=50 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tsae", description="Two-stage autoencoder anomaly detection")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("synth", help="write synthetic train/test CSVs")
    p.add_argument("--spec", help="synthetic spec JSON (default: the benchmark spec)")
    p.add_argument("--seed", type=int, default=0, help="benchmark seed when --spec is absent")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="preprocess training data and fit a model")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="score a test CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--threshold", default="sweep", help="number, or 'sweep' for the best-F1 threshold")
    p.add_argument("--out", required=True, help="scores CSV (t,score,label)")
    p.add_argument("--truth-out", dest="truth_out", help="truth CSV (default: <out>.truth.csv)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="point-adjusted metrics as JSON")
    p.add_argument("--scores", required=True)
    p.add_argument("--truth", required=True, help="CSV with t,label")
    p.add_argument("--threshold", default="sweep")
    p.add_argument("--model", help="model file, to record its config hash")
    p.add_argument("--out", help="JSON path (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="parameter sweeps")
    _add_config_args(p)
    p.add_argument("--param", choices=[*ex.SWEEP_PARAMS, "all"], default="all")
    p.add_argument("--out", required=True, help="averaged results CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="plot-ready data for a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--train", help="training CSV for the correlation matrix")
    p.add_argument("--scores")
    p.add_argument("--truth")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, ValueError, KeyError, nn.NonFiniteError) as exc:
        print(f"tsae {args.verb}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
