"""Run configuration: a flat INI file with sections, strictly validated.

Unknown sections or keys are hard errors so hyperparameter typos cannot pass
silently. All defaults are the reference experiment settings; every numeric
range is checked before any work begins.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass

from .augment import AugmentParams
from .encoder import EncoderConfig
from .errors import ConfigError
from .trainer import TrainConfig


def _parse_ops(value: str) -> tuple[str, ...]:
    cleaned = value.replace(",", " ").replace("{", " ").replace("}", " ").split()
    ops = tuple(ch for token in cleaned for ch in token.strip().upper())
    return ops


def _parse_floats(value: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in value.replace(",", " ").split())


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


@dataclass
class RunConfig:
    """Everything one command needs: model, augmentation, training and
    experiment-grid settings."""

    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    aug: AugmentParams = dataclasses.field(default_factory=AugmentParams)
    embedding_dim: int = 64
    blocks: int = 2
    heads: int = 2
    max_len: int = 50
    dropout: float = 0.2
    zero_pad_in_repr: bool = False
    precision: str = "float32"
    fractions: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    noise_ratios: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5)

    def encoder_config(self, item_count: int) -> EncoderConfig:
        return EncoderConfig(
            item_count=item_count,
            embedding_dim=self.embedding_dim,
            blocks=self.blocks,
            heads=self.heads,
            max_len=self.max_len,
            dropout=self.dropout,
            zero_pad_in_repr=self.zero_pad_in_repr,
            precision=self.precision,
        )

    def validate(self) -> None:
        try:
            self.train.validate()
            self.aug.validate()
            # encoder-side ranges that do not need the vocabulary size
            EncoderConfig(
                item_count=1,
                embedding_dim=self.embedding_dim,
                blocks=self.blocks,
                heads=self.heads,
                max_len=self.max_len,
                dropout=self.dropout,
                precision=self.precision,
            ).validate()
            for f in self.fractions:
                if not 0.0 < f <= 1.0:
                    raise ValueError(f"training fraction must be in (0, 1], got {f}")
            for r in self.noise_ratios:
                if not 0.0 <= r <= 0.5:
                    raise ValueError(f"noise ratio must be in [0, 0.5], got {r}")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


_MODEL_KEYS = {
    "embedding_dim": int,
    "blocks": int,
    "heads": int,
    "max_len": int,
    "dropout": float,
    "zero_pad_in_repr": _parse_bool,
    "precision": str,
}
_AUGMENT_KEYS = {
    "eta": float,
    "mu": float,
    "omega": float,
    "alpha": float,
    "beta": float,
    "short_threshold": int,
    "short_ops": _parse_ops,
    "long_ops": _parse_ops,
    "fixed_pair": _parse_ops,
}
_TRAIN_KEYS = {
    "lambda": float,  # alias of ssl_weight
    "ssl_weight": float,
    "switch_epoch": int,
    "max_epochs": int,
    "batch_size": int,
    "lr": float,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "patience": int,
    "seed": int,
    "mode": str,
    "pretrain_epochs": int,
    "early_stop_metric": str,
}
_EXPERIMENT_KEYS = {
    "fractions": _parse_floats,
    "noise_ratios": _parse_floats,
}
_SECTIONS = {
    "model": _MODEL_KEYS,
    "augment": _AUGMENT_KEYS,
    "train": _TRAIN_KEYS,
    "experiment": _EXPERIMENT_KEYS,
}


def load_run_config(path: str | None = None, seed: int | None = None) -> RunConfig:
    """Parse an INI run config; ``seed`` overrides the file's value."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(path, encoding="utf-8")
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            schema = _SECTIONS[section]
            for key, raw in parser.items(section):
                if key not in schema:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                try:
                    value = schema[key](raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {section}.{key}: {exc}") from None
                _apply(cfg, section, key, value)
    if seed is not None:
        cfg.train.seed = seed
    cfg.validate()
    return cfg


def _apply(cfg: RunConfig, section: str, key: str, value) -> None:
    if section == "model":
        setattr(cfg, key, value)
    elif section == "augment":
        if key == "fixed_pair":
            if len(value) != 2:
                raise ConfigError("fixed_pair must name exactly two operators")
            cfg.aug.fixed_pair = (value[0], value[1])
        else:
            setattr(cfg.aug, key, value)
    elif section == "train":
        if key == "lambda":
            cfg.train.ssl_weight = value
        else:
            setattr(cfg.train, key, value)
    elif section == "experiment":
        setattr(cfg, key, value)


def echo_config(cfg: RunConfig) -> str:
    """Serialize the resolved effective config back to deterministic INI text."""
    out = io.StringIO()
    out.write("[model]\n")
    for key in _MODEL_KEYS:
        out.write(f"{key} = {getattr(cfg, key)}\n")
    out.write("\n[augment]\n")
    a = cfg.aug
    for key in ("eta", "mu", "omega", "alpha", "beta", "short_threshold"):
        out.write(f"{key} = {getattr(a, key)}\n")
    out.write(f"short_ops = {','.join(a.short_ops)}\n")
    out.write(f"long_ops = {','.join(a.long_ops)}\n")
    if a.fixed_pair is not None:
        out.write(f"fixed_pair = {','.join(a.fixed_pair)}\n")
    out.write("\n[train]\n")
    t = cfg.train
    out.write(f"lambda = {t.ssl_weight}\n")
    for key in ("switch_epoch", "max_epochs", "batch_size", "lr", "adam_beta1",
                "adam_beta2", "adam_eps", "patience", "seed", "mode",
                "pretrain_epochs", "early_stop_metric"):
        out.write(f"{key} = {getattr(t, key)}\n")
    out.write("\n[experiment]\n")
    out.write(f"fractions = {','.join(str(f) for f in cfg.fractions)}\n")
    out.write(f"noise_ratios = {','.join(str(r) for r in cfg.noise_ratios)}\n")
    return out.getvalue()
