"""Model assembly, configuration, parameter/compute statistics.

The network is: 3x3 conv (3 -> width), a stack of dual-attention blocks,
3x3 conv (width -> 3 * scale^2), pixel shuffle.  Inputs are RGB in [0, 1],
NCHW; outputs are RGB at ``scale`` times the input resolution.

The feature width is not pinned by the architecture itself; the shipped
defaults (96 for the full variant, 48 for the light one) come from a sweep
over width x FFN expansion documented in the README.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .blocks import (CHANNEL_ATTENTIONS, SPATIAL_ATTENTIONS, DualAttentionBlock,
                     conv_param)
from .data import dihedral, dihedral_inverse
from .errors import ConfigError, DimensionError
from .ops import conv2d, pixel_shuffle, same_padding
from .tensor import Tensor, no_grad
from .weights import WeightStore, fnv1a64, load_weights, save_weights

_CONFIG_FIELDS = ("variant", "scale", "n_dabs", "width", "reduction", "k_dw",
                  "k_ddw", "dilation", "k_sgfn", "sgfn_ratio",
                  "spatial_attention", "channel_attention")

_VARIANT_PINS = {
    "full": dict(n_dabs=12, k_dw=5, k_ddw=7, dilation=3, k_sgfn=5, reduction=8),
    "light": dict(n_dabs=8, k_dw=3, k_ddw=5, dilation=3, k_sgfn=3, reduction=8),
}


@dataclass
class ModelConfig:
    variant: str = "full"
    scale: int = 4
    n_dabs: int = 12
    width: int = 96
    reduction: int = 8
    k_dw: int = 5
    k_ddw: int = 7
    dilation: int = 3
    k_sgfn: int = 5
    sgfn_ratio: float = 2.0
    spatial_attention: str = "slka"
    channel_attention: str = "ea"

    @classmethod
    def full(cls, scale: int = 4) -> "ModelConfig":
        return cls(variant="full", scale=scale)

    @classmethod
    def light(cls, scale: int = 4) -> "ModelConfig":
        return cls(variant="light", scale=scale, n_dabs=8, width=48, k_dw=3,
                   k_ddw=5, k_sgfn=3, sgfn_ratio=8.0 / 3.0)

    @classmethod
    def tiny(cls, scale: int = 2) -> "ModelConfig":
        """Desk-scale variant for tests and smoke training."""
        return cls(variant="tiny", scale=scale, n_dabs=2, width=16, k_dw=3,
                   k_ddw=5, k_sgfn=3, sgfn_ratio=2.0)

    @property
    def hidden(self) -> int:
        return int(round(self.width * self.sgfn_ratio))

    def validate(self) -> "ModelConfig":
        if self.scale not in (2, 3, 4):
            raise ConfigError(f"scale must be 2, 3 or 4, got {self.scale}")
        if self.n_dabs < 1:
            raise ConfigError("n_dabs must be positive")
        if self.width < 5:
            raise ConfigError("width must be at least 5 (channel shifting)")
        if self.width < self.reduction:
            raise ConfigError("width below the attention reduction ratio")
        if self.hidden % 2:
            raise ConfigError(f"hidden width {self.hidden} must be even")
        for k in (self.k_dw, self.k_ddw, self.k_sgfn):
            if k < 1 or k % 2 == 0:
                raise ConfigError(f"kernel sizes must be odd, got {k}")
        if self.spatial_attention not in SPATIAL_ATTENTIONS:
            raise ConfigError(f"unknown spatial_attention '{self.spatial_attention}'")
        if self.channel_attention not in CHANNEL_ATTENTIONS:
            raise ConfigError(f"unknown channel_attention '{self.channel_attention}'")
        pins = _VARIANT_PINS.get(self.variant)
        if pins:
            for key, value in pins.items():
                if getattr(self, key) != value:
                    raise ConfigError(
                        f"variant '{self.variant}' pins {key}={value}, got {getattr(self, key)}")
        return self

    def with_attention(self, spatial: str, channel: str) -> "ModelConfig":
        cfg = replace(self, spatial_attention=spatial, channel_attention=channel)
        if cfg.variant in _VARIANT_PINS:
            cfg = replace(cfg, variant=f"{cfg.variant}-ablate")
        return cfg

    def to_text(self) -> str:
        lines = []
        for key in _CONFIG_FIELDS:
            value = getattr(self, key)
            lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_FIELDS:
                raise ConfigError(f"unknown config key '{key}'")
            values[key] = value
        cfg = cls()
        for key, value in values.items():
            current = getattr(cfg, key)
            if isinstance(current, int):
                setattr(cfg, key, int(value))
            elif isinstance(current, float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
        return cfg.validate()

    def config_hash(self) -> int:
        return fnv1a64(self.to_text().encode("utf-8"))


def load_config(path) -> ModelConfig:
    with open(path, "r", encoding="utf-8") as f:
        return ModelConfig.from_text(f.read())


class EARFA:
    """The assembled super-resolution network."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        cfg.validate()
        rng = np.random.default_rng(seed)
        c = cfg.width
        self.cfg = cfg
        self.head_w, self.head_b = conv_param(rng, c, 3, 3)
        self.dabs = [
            DualAttentionBlock(c, cfg.k_dw, cfg.k_ddw, cfg.dilation, cfg.k_sgfn,
                               hidden=cfg.hidden, reduction=cfg.reduction,
                               spatial=cfg.spatial_attention,
                               channel=cfg.channel_attention, rng=rng)
            for _ in range(cfg.n_dabs)
        ]
        out_c = 3 * cfg.scale * cfg.scale
        self.tail_w, self.tail_b = conv_param(rng, out_c, c, 3)

    def __call__(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(x)
        if x.data.ndim != 4 or x.data.shape[1] != 3:
            raise DimensionError(f"expected (n, 3, h, w) input, got {x.data.shape}")
        t = conv2d(x, self.head_w, self.head_b, padding=same_padding(3))
        for dab in self.dabs:
            t = dab(t)
        t = conv2d(t, self.tail_w, self.tail_b, padding=same_padding(3))
        return pixel_shuffle(t, self.cfg.scale)

    def named_params(self) -> list:
        out = [("head.w", self.head_w), ("head.b", self.head_b)]
        for i, dab in enumerate(self.dabs):
            out += [(f"dab{i:02d}.{name}", p) for name, p in dab.named_params()]
        out += [("tail.w", self.tail_w), ("tail.b", self.tail_b)]
        return out

    def state(self) -> WeightStore:
        store = WeightStore(config_hash=self.cfg.config_hash())
        for name, p in self.named_params():
            store.put(name, p.data)
        return store

    def load_state(self, store: WeightStore) -> None:
        if store.config_hash != self.cfg.config_hash():
            raise ConfigError("weight store was produced by a different configuration")
        params = dict(self.named_params())
        if set(store.names()) != set(params):
            missing = set(params) - set(store.names())
            extra = set(store.names()) - set(params)
            raise ConfigError(f"parameter names differ (missing={sorted(missing)}, "
                              f"extra={sorted(extra)})")
        for name, p in params.items():
            array = store.get(name)
            if array.shape != p.data.shape:
                raise ConfigError(f"shape mismatch for '{name}': "
                                  f"{array.shape} vs {p.data.shape}")
            p.data = array.astype(np.float32, copy=True)

    def save(self, path) -> None:
        save_weights(self.state(), path)

    @classmethod
    def load(cls, cfg: ModelConfig, path) -> "EARFA":
        model = cls(cfg)
        model.load_state(load_weights(path))
        return model


# -- statistics ---------------------------------------------------------------


def _dab_param_count(cfg: ModelConfig) -> int:
    c, hidden, red = cfg.width, cfg.hidden, cfg.width // cfg.reduction
    ln = 2 * c
    sgfn = (hidden * c + hidden) + (hidden // 2) * (cfg.k_sgfn ** 2 + 1) \
        + (c * (hidden // 2) + c)
    total = 2 * (ln + sgfn)
    if cfg.spatial_attention in ("slka", "lka"):
        total += ln + (c * c + c) + c * (cfg.k_dw ** 2 + 1) + c * (cfg.k_ddw ** 2 + 1)
    if cfg.channel_attention in ("ea", "se"):
        total += ln + (red * c + red) + (c * red + c)
    return total


def count_params(cfg: ModelConfig) -> int:
    """Total learnable element count, computed arithmetically from the config."""
    cfg.validate()
    c, s = cfg.width, cfg.scale
    head = c * 3 * 9 + c
    tail = (3 * s * s) * c * 9 + 3 * s * s
    return head + cfg.n_dabs * _dab_param_count(cfg) + tail


def count_multiadds(cfg: ModelConfig, out_h: int = 720, out_w: int = 1280) -> int:
    """Multiply-accumulates of all spatial-grid convolutions for one image.

    Counted at the low-resolution grid (``out_h/scale x out_w/scale``)
    where every convolution runs.  Maps applied to pooled or per-channel
    vectors (the entropy-attention expansion, squeeze-excitation) touch a
    single grid position and are excluded, keeping the count linear in the
    number of positions.
    """
    cfg.validate()
    c, s, hidden, red = cfg.width, cfg.scale, cfg.hidden, cfg.width // cfg.reduction
    positions = (out_h * out_w) // (s * s)
    per_dab = 2 * (hidden * c + (hidden // 2) * cfg.k_sgfn ** 2 + c * (hidden // 2))
    if cfg.spatial_attention in ("slka", "lka"):
        per_dab += c * c + c * cfg.k_dw ** 2 + c * cfg.k_ddw ** 2
    if cfg.channel_attention == "ea":
        per_dab += red * c
    total_per_position = c * 3 * 9 + cfg.n_dabs * per_dab + (3 * s * s) * c * 9
    return positions * total_per_position


def slka_receptive_field(cfg: ModelConfig) -> int:
    """Per-axis receptive field of one stacked depthwise pair."""
    return (cfg.k_dw - 1) + cfg.dilation * (cfg.k_ddw - 1) + 1


def receptive_field_radius(cfg: ModelConfig) -> int:
    """Border radius (in LR pixels) outside which the forward pass can
    depend on a given input pixel."""
    per_dab = 2 * (cfg.k_sgfn - 1) // 2
    if cfg.spatial_attention in ("slka", "lka"):
        per_dab += (cfg.k_dw - 1) // 2 + cfg.dilation * (cfg.k_ddw - 1) // 2
        if cfg.spatial_attention == "slka":
            per_dab += 1
    return 1 + cfg.n_dabs * per_dab + 1


# -- inference helpers ----------------------------------------------------------


def super_resolve(model: EARFA, lr: np.ndarray, ensemble: bool = False) -> np.ndarray:
    """Upscale an LR image array ``(n, 3, h, w)`` in [0, 1]; clips the output."""
    with no_grad():
        if ensemble:
            out = geometric_self_ensemble(model, lr)
        else:
            out = model(Tensor(np.asarray(lr, dtype=np.float32))).data
    return np.clip(out, 0.0, 1.0)


def geometric_self_ensemble(model: EARFA, x: np.ndarray) -> np.ndarray:
    """Average the forward pass over the 8 dihedral transforms."""
    x = np.asarray(x, dtype=np.float32)
    acc = None
    with no_grad():
        for op in range(8):
            y = model(Tensor(dihedral(x, op))).data
            y = dihedral_inverse(y, op)
            acc = y if acc is None else acc + y
    return acc / 8.0
