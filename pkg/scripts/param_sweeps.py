"""Sensitivity to the down-sampling rate, the window size and the hidden-layer
ratios, on the synthetic benchmark (or any config).

    python3 scripts/param_sweeps.py --config configs/synthetic.yaml --out results/sweeps.csv
"""
import argparse
import logging
from pathlib import Path

from tsae import experiment as ex


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(Path(__file__).parent.parent / "configs" / "synthetic.yaml"))
    ap.add_argument("--param", choices=[*ex.SWEEP_PARAMS, "all"], default="all")
    ap.add_argument("--repeats", type=int, help="override sweep.n_repeats")
    ap.add_argument("--out", default="sweeps.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    over = {"sweep": {"n_repeats": args.repeats}} if args.repeats else None
    cfg = ex.load_config(args.config, overrides=over)
    params = ex.SWEEP_PARAMS if args.param == "all" else (args.param,)
    runs = ex.sweep_runs(cfg, params, progress=lambda r: logging.info(
        "%s=%s seed=%s F1=%.3f", r["param"], r["value"], r["seed"], r["f1"]))
    out = Path(args.out)
    ex.write_sweep(ex.average_runs(runs), out)
    ex.write_sweep(runs, out.with_name(out.stem + "_runs.csv"))
    for row in ex.average_runs(runs):
        print(f"{row['param']:7s} {row['value']:>9s}  P {row['precision']:.3f}  R {row['recall']:.3f}  F1 {row['f1']:.3f}")


if __name__ == "__main__":
    main()
