"""Single window autoencoder baselines.

The same network is scored two ways: over the whole reconstructed window
(AE-w) or over the window's last instant only (AE-i).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .model import TrainConfig, _windows_arg, read_container, train_ae1, write_container, FORMAT_NAME, FORMAT_VERSION
from .preprocessing import ScalingParams, WindowSeries

# hidden-size ratios for 1, 3 and 5 intermediate layers
MID_LAYER_RATIOS = {1: [1 / 2], 3: [1 / 2, 1 / 4], 5: [1 / 2, 1 / 4, 1 / 8]}


@dataclass
class BaselineAE:
    net: nn.DenseNet
    K: int
    m: int
    scaling: ScalingParams | None = None
    meta: dict = field(default_factory=dict)

    @property
    def mid_layers(self) -> int:
        return len(self.net.layer_dims) - 2


def baseline_config(cfg: TrainConfig | None = None, mid_layers: int = 1) -> TrainConfig:
    """The first-stage training regime with the hidden stack swapped for ``mid_layers``."""
    if mid_layers not in MID_LAYER_RATIOS:
        raise ValueError(f"mid_layers must be one of {sorted(MID_LAYER_RATIOS)}")
    base = asdict(cfg or TrainConfig())
    base["ae1_ratios"] = MID_LAYER_RATIOS[mid_layers]
    return TrainConfig(**base)


def train_ae(windows: WindowSeries, cfg: TrainConfig | None = None, mid_layers: int = 1,
             scaling: ScalingParams | None = None) -> BaselineAE:
    cfg = baseline_config(cfg, mid_layers)
    net, hist, (tr, va) = train_ae1(windows, cfg)
    meta = {"config": {**asdict(cfg), "val_ratio": list(cfg.val_ratio)}, "history": asdict(hist)}
    return BaselineAE(net, windows.K, windows.m, scaling, meta)


def _errors(ae: BaselineAE, windows) -> np.ndarray:
    flat = _windows_arg((ae.K, ae.m), windows)
    d = flat - nn.forward(ae.net, flat)
    return d.reshape(-1, ae.K, ae.m)


def scores_window(ae: BaselineAE, windows) -> np.ndarray:
    """AE-w: ||W_t - W'_t||^2 over the whole K x m window."""
    d = _errors(ae, windows)
    return np.einsum("nkm,nkm->n", d, d)


def scores_instant(ae: BaselineAE, windows) -> np.ndarray:
    """AE-i: ||x_t - x'_t||^2 over the final instant of each window."""
    d = _errors(ae, windows)[:, -1, :]
    return np.einsum("nm,nm->n", d, d)


def score_ae_window(ae: BaselineAE, window) -> float:
    w = np.asarray(window, dtype=np.float64)
    return nn.recon_loss(w, nn.forward(ae.net, w.reshape(1, -1)))


def score_ae_instant(ae: BaselineAE, window) -> float:
    w = np.asarray(window, dtype=np.float64)
    rec = nn.forward(ae.net, w.reshape(1, -1)).reshape(ae.K, ae.m)
    return nn.recon_loss(w[-1], rec[-1])


def save_baseline(ae: BaselineAE, path) -> None:
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": "ae",
        "activation": ae.net.activation,
        "K": ae.K,
        "m": ae.m,
        "mid_layers": ae.mid_layers,
        "scaling": ae.scaling.to_dict() if ae.scaling else None,
        "meta": ae.meta,
    }
    write_container(path, header, nn.net_to_arrays(ae.net, "ae"))


def load_baseline(path, m: int | None = None) -> BaselineAE:
    header, arrays = read_container(path)
    if header.get("kind") != "ae":
        raise ValueError(f"{path}: holds a {header.get('kind')!r} model, not a baseline AE")
    if m is not None and header["m"] != m:
        raise ValueError(f"model was trained on m={header['m']} signals, data has m={m}")
    scaling = ScalingParams.from_dict(header["scaling"]) if header.get("scaling") else None
    net = nn.net_from_arrays(arrays, "ae", header["activation"])
    return BaselineAE(net, int(header["K"]), int(header["m"]), scaling, header.get("meta", {}))
