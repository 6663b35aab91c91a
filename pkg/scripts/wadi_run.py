"""Full-size run on locally supplied WADI CSVs with the standard settings
(q=5, K=10, one excluded sensor, 200/20 epochs, learning rates 1e-4/1e-3).

    python3 scripts/wadi_run.py --train WADI_14days.csv --test WADI_attackdataLABLE.csv --out wadi/
"""
import argparse
import json
import logging
from pathlib import Path

from tsae import experiment as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--train", required=True)
    ap.add_argument("--test", required=True)
    ap.add_argument("--model-type", choices=ex.MODEL_TYPES, default="tsae")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="wadi")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = ex.load_config(preset="wadi", overrides={
        "train_csv": args.train, "test_csv": args.test, "model": args.model_type, "seed": args.seed,
    })
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, test = ex.load_data(cfg)
    mdl = ex.train_model(cfg, train)
    mdl.meta["config_hash"] = cfg.config_hash()
    ex.save_any(mdl, out / "model.tsae")
    ex.write_train_log(mdl, out / "train_log.csv")
    det = ex.score_test(mdl, test)
    rep = ex.evaluate_scores(det.scores, det.truth)
    ex.write_scores(det, rep.threshold, out / "scores.csv")
    ex.write_truth(det, out / "truth.csv")
    d = {**rep.to_dict(), "config_hash": cfg.config_hash(), "m": mdl.m}
    (out / "report.json").write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
    print(f"m={mdl.m}  P {rep.precision:.3f}  R {rep.recall:.3f}  F1 {rep.f1:.3f}")


if __name__ == "__main__":
    main()
