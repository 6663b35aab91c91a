"""Two-stage autoencoder.

The first network reconstructs a whole flattened window and so captures the
slow, plant-wide part of the signals. The second one sees only the residual
of the window's last instant, ``dx_t = x_t - x'_t``, and learns the fast,
locally correlated part. The final reconstruction is ``R_t = x'_t + dx'_t``
and the anomaly score is ``||x_t - R_t||^2``.
"""
from __future__ import annotations

import io
import json
import logging
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .preprocessing import ScalingParams, WindowSeries, split_train_val

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
FORMAT_NAME = "tsae-model"


@dataclass
class TrainConfig:
    epochs_ae1: int = 200
    epochs_ae2: int = 20
    lr_ae1: float = 1e-4
    lr_ae2: float = 1e-3
    batch_size: int = 256
    ae2_batch_size: int | None = None  # None: same as batch_size
    seed: int = 0
    # hidden sizes as fractions of the input width (1/2 for AE1, 1/10 for AE2)
    ae1_ratios: list[float] = field(default_factory=lambda: [0.5])
    ae2_ratio: float = 0.1
    val_ratio: tuple[int, int] = (4, 1)
    early_stop: int | None = None

    def __post_init__(self):
        ints = (self.epochs_ae1, self.epochs_ae2, self.batch_size, self.ae2_batch_size or 1)
        if min(ints) < 1 or self.lr_ae1 <= 0 or self.lr_ae2 <= 0:
            raise ValueError("epochs, batch size and learning rates must be positive")
        if not self.ae1_ratios or any(r <= 0 for r in self.ae1_ratios) or self.ae2_ratio <= 0:
            raise ValueError("hidden-size ratios must be positive")
        self.val_ratio = tuple(self.val_ratio)


def hidden_dims(n_in: int, ratios) -> list[int]:
    """Symmetric layer stack n_in -> n_in*r1 -> ... -> n_in*rk -> ... -> n_in (floored)."""
    enc = [max(1, int(np.floor(n_in * r + 1e-9))) for r in ratios]
    return [n_in, *enc, *enc[-2::-1], n_in]


@dataclass
class TSAEModel:
    ae1: nn.DenseNet
    ae2: nn.DenseNet
    K: int
    m: int
    scaling: ScalingParams | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ae1.n_in != self.K * self.m or self.ae1.n_out != self.K * self.m:
            raise ValueError(f"AE1 must map {self.K * self.m} -> {self.K * self.m}, has {self.ae1.layer_dims}")
        if self.ae2.n_in != self.m or self.ae2.n_out != self.m:
            raise ValueError(f"AE2 must map {self.m} -> {self.m}, has {self.ae2.layer_dims}")


def _windows_arg(model_or_k, windows) -> np.ndarray:
    """Accept a WindowSeries, a (N, K, m) array or a single (K, m) window; return (N, K*m)."""
    K, m = model_or_k
    if isinstance(windows, WindowSeries):
        if windows.K != K or windows.m != m:
            raise ValueError(f"windows are {windows.K}x{windows.m}, model expects {K}x{m}")
        return windows.flat()
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim == 2:
        w = w[None]
    if w.ndim != 3 or w.shape[1:] != (K, m):
        raise ValueError(f"window shape {np.shape(windows)} does not match (K, m) = ({K}, {m})")
    return w.reshape(w.shape[0], K * m)


def _stage2_inputs(ae1: nn.DenseNet, flat: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    x_last = flat[:, -m:]
    x_rec = nn.forward(ae1, flat)[:, -m:]
    return x_rec, x_last - x_rec


def reconstruct_batch(model: TSAEModel, windows):
    """Returns (x', dx', R) arrays of shape (N, m) for every window."""
    flat = _windows_arg((model.K, model.m), windows)
    x_rec, dx = _stage2_inputs(model.ae1, flat, model.m)
    dx_rec = nn.forward(model.ae2, dx)
    return x_rec, dx_rec, x_rec + dx_rec


def reconstruct(model: TSAEModel, window):
    """(x'_t, dx'_t, R_t) for a single K x m window."""
    x_rec, dx_rec, r = reconstruct_batch(model, np.asarray(window)[None])
    return x_rec[0], dx_rec[0], r[0]


def anomaly_scores(model: TSAEModel, windows) -> np.ndarray:
    """||x_t - R_t||^2 per window, in scaled signal units."""
    flat = _windows_arg((model.K, model.m), windows)
    _, _, r = reconstruct_batch(model, flat.reshape(-1, model.K, model.m))
    d = flat[:, -model.m :] - r
    return np.einsum("ij,ij->i", d, d)


def anomaly_score(model: TSAEModel, window) -> float:
    window = np.asarray(window, dtype=np.float64)
    _, _, r = reconstruct(model, window)
    return nn.recon_loss(window[-1], r)


def detect(scores_or_model, windows=None, threshold: float = 0.0) -> np.ndarray:
    """Label 1 where the score is strictly above ``threshold``.

    Call as ``detect(scores, threshold=lam)`` or ``detect(model, windows, lam)``.
    """
    if isinstance(scores_or_model, TSAEModel):
        scores = anomaly_scores(scores_or_model, windows)
    else:
        scores = np.asarray(scores_or_model, dtype=np.float64)
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    return (scores > threshold).astype(np.int8)


def _epoch_logger(name):
    def _log(epoch, hist):
        val = f" val={hist.val_loss[-1]:.6g}" if hist.val_loss else ""
        log.debug("%s epoch %d train=%.6g%s", name, epoch, hist.train_loss[-1], val)

    return _log


def train_ae1(windows: WindowSeries, cfg: TrainConfig):
    """STEP 1: fit a window autoencoder. Returns (net, history, val_idx)."""
    flat = windows.flat()
    tr, va = split_train_val(len(flat), cfg.val_ratio, seed=cfg.seed)
    net = nn.init_dense_net(hidden_dims(flat.shape[1], cfg.ae1_ratios), seed=cfg.seed)
    x_tr, x_va = flat[tr], flat[va]
    hist = nn.fit(
        net, x_tr, x_tr,
        epochs=cfg.epochs_ae1, lr=cfg.lr_ae1, batch_size=cfg.batch_size, seed=cfg.seed + 1,
        val_inputs=x_va, val_targets=x_va, early_stop=cfg.early_stop, log=_epoch_logger("ae1"),
    )
    return net, hist, (tr, va)


def train_tsae(windows: WindowSeries, cfg: TrainConfig | None = None, scaling: ScalingParams | None = None,
               ae1: nn.DenseNet | None = None) -> TSAEModel:
    """Two-stage training on windows of normal data.

    A pre-trained first-stage network may be passed as ``ae1`` (it is copied and
    not trained further); this lets a baseline autoencoder double as AE1.
    """
    cfg = cfg or TrainConfig()
    m, K = windows.m, windows.K
    flat = windows.flat()
    tr, va = split_train_val(len(flat), cfg.val_ratio, seed=cfg.seed)
    if ae1 is None:
        ae1, hist1, _ = train_ae1(windows, cfg)
        hist1 = asdict(hist1)
    else:
        if ae1.n_in != K * m:
            raise ValueError("supplied AE1 does not match the window shape")
        ae1, hist1 = ae1.copy(), None

    # AE1 is frozen from here on, so the residuals can be computed once
    _, dx = _stage2_inputs(ae1, flat, m)
    ae2 = nn.init_dense_net(hidden_dims(m, [cfg.ae2_ratio]), seed=cfg.seed + 2)
    hist2 = nn.fit(
        ae2, dx[tr], dx[tr],
        epochs=cfg.epochs_ae2, lr=cfg.lr_ae2, batch_size=cfg.ae2_batch_size or cfg.batch_size, seed=cfg.seed + 3,
        val_inputs=dx[va], val_targets=dx[va], early_stop=cfg.early_stop, log=_epoch_logger("ae2"),
    )
    meta = {
        "config": {**asdict(cfg), "val_ratio": list(cfg.val_ratio)},
        "n_train_windows": int(len(tr)),
        "n_val_windows": int(len(va)),
        "ae1_history": hist1,
        "ae2_history": asdict(hist2),
    }
    return TSAEModel(ae1, ae2, K, m, scaling, meta)


# --- persistence -------------------------------------------------------------

# fixed zip timestamp so identical models give identical files
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def write_container(path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    """Zip archive: ``header.json`` plus one ``.npy`` member per array."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("header.json", date_time=_ZIP_DATE)
        zf.writestr(info, json.dumps(header, sort_keys=True, indent=1))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_DATE), buf.getvalue())


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("header.json"))
            arrays = {}
            for name in zf.namelist():
                if name.endswith(".npy"):
                    arrays[name[:-4]] = np.load(io.BytesIO(zf.read(name)), allow_pickle=False)
    except (zipfile.BadZipFile, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: corrupt model file ({exc})") from None
    if header.get("format") != FORMAT_NAME:
        raise ValueError(f"{path}: not a model file")
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {header.get('version')} (expected {FORMAT_VERSION})")
    return header, arrays


def save_model(model: TSAEModel, path) -> None:
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": "tsae",
        "activation": model.ae1.activation,
        "K": model.K,
        "m": model.m,
        "scaling": model.scaling.to_dict() if model.scaling else None,
        "meta": model.meta,
    }
    arrays = {**nn.net_to_arrays(model.ae1, "ae1"), **nn.net_to_arrays(model.ae2, "ae2")}
    write_container(path, header, arrays)


def load_model(path, m: int | None = None) -> TSAEModel:
    """Load a TSAE model; pass ``m`` to insist on a signal dimension."""
    header, arrays = read_container(path)
    if header.get("kind") != "tsae":
        raise ValueError(f"{path}: holds a {header.get('kind')!r} model, not a TSAE")
    if m is not None and header["m"] != m:
        raise ValueError(f"model was trained on m={header['m']} signals, data has m={m}")
    scaling = ScalingParams.from_dict(header["scaling"]) if header.get("scaling") else None
    return TSAEModel(
        nn.net_from_arrays(arrays, "ae1", header["activation"]),
        nn.net_from_arrays(arrays, "ae2", header["activation"]),
        int(header["K"]),
        int(header["m"]),
        scaling,
        header.get("meta", {}),
    )
