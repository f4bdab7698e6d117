"""Run configuration: flat ``section.key = value`` text files.

One assignment per line, ``#`` starts a comment, blank lines are ignored.
Unknown keys are rejected with the offending key and line number. Every
key has a default, so an empty file is a valid configuration. Environment
variables of the form ``MRF_<SECTION>_<KEY>`` override file values.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields

from .acquisition import AugmentParams
from .epg import ParameterGrid, SequenceSchedule, default_grid, default_schedule
from .model import ModelConfig
from .train import TrainConfig


@dataclass(frozen=True)
class ScheduleSection:
    d0: int = 200
    flip_peak_deg: float = 70.0
    tr_ms: float = 12.0
    te_ms: float = 2.0
    inversion_delay_ms: float = 18.0


@dataclass(frozen=True)
class GridSection:
    t1_min: float = 100.0
    t1_max: float = 4000.0
    t1_step: float = 20.0
    t2_min: float = 20.0
    t2_max: float = 600.0
    t2_step: float = 4.0


@dataclass(frozen=True)
class SubspaceSection:
    d1: int = 10


@dataclass(frozen=True)
class PhantomSection:
    height: int = 64
    width: int = 64
    lesions_min: int = 1
    lesions_max: int = 4


@dataclass(frozen=True)
class UndersamplingSection:
    fraction: float = 0.0625
    noise_sigma: float = 0.005


@dataclass(frozen=True)
class ModelSection:
    channels: tuple = (256, 128, 64, 32)
    dropout_rate: float = 0.1
    t1_max_ms: float = 4000.0
    t2_max_ms: float = 600.0
    pd_max: float = 2.0


@dataclass(frozen=True)
class TrainingSection:
    epochs: int = 150
    batch_size: int = 2
    learning_rate: float = 1e-3
    lr_min_factor: float = 0.05
    augment: bool = True
    noise_sigma: float = 0.002
    max_translation_px: int = 6
    max_rotation_deg: float = 0.0
    scale_min: float = 1.0
    scale_max: float = 1.0
    val_every: int = 1


@dataclass(frozen=True)
class MatchingSection:
    block_size: int = 512


@dataclass(frozen=True)
class EvaluationSection:
    mask_rel_threshold: float = 1e-3


@dataclass(frozen=True)
class RunConfig:
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    grid: GridSection = field(default_factory=GridSection)
    subspace: SubspaceSection = field(default_factory=SubspaceSection)
    phantom: PhantomSection = field(default_factory=PhantomSection)
    undersampling: UndersamplingSection = field(default_factory=UndersamplingSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    matching: MatchingSection = field(default_factory=MatchingSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)


class ConfigError(ValueError):
    pass


def _parse_value(raw: str, default, where: str):
    """Coerce ``raw`` to the type of ``default``; ``where`` names the site."""
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            parts = [p for p in raw.split(",") if p.strip()]
            if not parts:
                raise ValueError("empty list")
            return tuple(int(p) for p in parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _apply(cfg: RunConfig, section: str, key: str, raw: str, where: str) -> RunConfig:
    sections = {f.name: f for f in fields(RunConfig)}
    if section not in sections:
        raise ConfigError(f"{where}: unknown section {section!r}")
    sec = getattr(cfg, section)
    names = {f.name for f in fields(sec)}
    if key not in names:
        raise ConfigError(f"{where}: unknown key {section}.{key}")
    value = _parse_value(raw, getattr(sec, key), where)
    return dataclasses.replace(cfg, **{section: dataclasses.replace(sec, **{key: value})})


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse assignments on top of ``base`` (defaults when omitted)."""
    cfg = base if base is not None else RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        lhs, rhs = stripped.split("=", 1)
        lhs = lhs.strip()
        if lhs.count(".") != 1:
            raise ConfigError(f"line {lineno}: key must look like section.key, got {lhs!r}")
        section, key = (p.strip() for p in lhs.split("."))
        cfg = _apply(cfg, section, key, rhs, f"line {lineno} ({lhs})")
    validate_config(cfg)
    return cfg


def apply_env(cfg: RunConfig, env=None) -> RunConfig:
    """Overlay MRF_<SECTION>_<KEY> environment variables, validating keys."""
    env = os.environ if env is None else env
    for name in sorted(env):
        if not name.startswith("MRF_"):
            continue
        rest = name[len("MRF_") :]
        if "_" not in rest:
            raise ConfigError(f"environment variable {name}: expected MRF_SECTION_KEY")
        section, key = rest.split("_", 1)
        cfg = _apply(cfg, section.lower(), key.lower(), env[name],
                     f"environment variable {name}")
    validate_config(cfg)
    return cfg


def load_config(path=None, env=None) -> RunConfig:
    """Defaults, then the optional file, then environment overrides."""
    cfg = RunConfig()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    return apply_env(cfg, env)


def serialize_config(cfg: RunConfig) -> str:
    """Deterministic text form; parse_config(serialize_config(c)) == c."""
    lines = []
    for sec_field in fields(RunConfig):
        sec = getattr(cfg, sec_field.name)
        for f in fields(sec):
            value = getattr(sec, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, tuple):
                text = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{sec_field.name}.{f.name} = {text}")
    return "\n".join(lines) + "\n"


def validate_config(cfg: RunConfig) -> None:
    """Cross-field checks; raises ConfigError naming the offending keys."""
    def need(cond: bool, message: str):
        if not cond:
            raise ConfigError(message)

    s = cfg.schedule
    need(s.d0 > 0, "schedule.d0 must be positive")
    need(0.0 < s.flip_peak_deg <= 180.0, "schedule.flip_peak_deg must lie in (0, 180]")
    need(s.te_ms >= 0.0, "schedule.te_ms must be >= 0")
    need(s.tr_ms > s.te_ms, "schedule.tr_ms must exceed schedule.te_ms")
    need(s.inversion_delay_ms >= 0.0, "schedule.inversion_delay_ms must be >= 0")
    g = cfg.grid
    for axis in ("t1", "t2"):
        lo = getattr(g, f"{axis}_min")
        hi = getattr(g, f"{axis}_max")
        step = getattr(g, f"{axis}_step")
        need(lo > 0.0, f"grid.{axis}_min must be positive")
        need(hi >= lo, f"grid.{axis}_max must be >= grid.{axis}_min")
        need(step > 0.0, f"grid.{axis}_step must be positive")
    need(cfg.subspace.d1 > 0, "subspace.d1 must be positive")
    need(cfg.subspace.d1 <= s.d0, "subspace.d1 cannot exceed schedule.d0")
    p = cfg.phantom
    need(p.height > 0 and p.width > 0, "phantom canvas must be positive")
    need(0 <= p.lesions_min <= p.lesions_max,
         "phantom.lesions_min must lie in [0, phantom.lesions_max]")
    u = cfg.undersampling
    need(0.0 < u.fraction <= 1.0, "undersampling.fraction must lie in (0, 1]")
    need(u.noise_sigma >= 0.0, "undersampling.noise_sigma must be >= 0")
    m = cfg.model
    need(len(m.channels) > 0 and all(c > 0 for c in m.channels),
         "model.channels must be positive integers")
    need(0.0 <= m.dropout_rate < 1.0, "model.dropout_rate must lie in [0, 1)")
    need(min(m.t1_max_ms, m.t2_max_ms, m.pd_max) > 0.0,
         "model normalization constants must be positive")
    t = cfg.training
    need(t.epochs > 0, "training.epochs must be positive")
    need(t.batch_size > 0, "training.batch_size must be positive")
    need(t.learning_rate > 0.0, "training.learning_rate must be positive")
    need(0.0 < t.lr_min_factor <= 1.0,
         "training.lr_min_factor must lie in (0, 1]")
    need(t.noise_sigma >= 0.0, "training.noise_sigma must be >= 0")
    need(t.max_translation_px >= 0, "training.max_translation_px must be >= 0")
    need(t.max_rotation_deg >= 0.0, "training.max_rotation_deg must be >= 0")
    need(0.0 < t.scale_min <= t.scale_max,
         "training scale range needs 0 < scale_min <= scale_max")
    need(t.val_every > 0, "training.val_every must be positive")
    need(cfg.matching.block_size > 0, "matching.block_size must be positive")
    need(cfg.evaluation.mask_rel_threshold >= 0.0,
         "evaluation.mask_rel_threshold must be >= 0")


# Factories turning config sections into the domain objects they describe.

def schedule_from(cfg: RunConfig) -> SequenceSchedule:
    s = cfg.schedule
    return default_schedule(
        d0=s.d0, flip_peak_deg=s.flip_peak_deg, tr_ms=s.tr_ms,
        te_ms=s.te_ms, inversion_delay_ms=s.inversion_delay_ms,
    )


def grid_from(cfg: RunConfig) -> ParameterGrid:
    g = cfg.grid
    return default_grid(
        t1_min=g.t1_min, t1_max=g.t1_max, t1_step=g.t1_step,
        t2_min=g.t2_min, t2_max=g.t2_max, t2_step=g.t2_step,
    )


def model_config_from(cfg: RunConfig) -> ModelConfig:
    m = cfg.model
    return ModelConfig(
        input_channels=cfg.subspace.d1, block_channels=m.channels,
        dropout_rate=m.dropout_rate, t1_max_ms=m.t1_max_ms,
        t2_max_ms=m.t2_max_ms, pd_max=m.pd_max,
    )


def train_config_from(cfg: RunConfig, seed: int = 0) -> TrainConfig:
    t = cfg.training
    return TrainConfig(
        epochs=t.epochs, batch_size=t.batch_size, learning_rate=t.learning_rate,
        lr_min_factor=t.lr_min_factor, seed=seed, augment=t.augment,
        augment_params=AugmentParams(
            max_translation_px=t.max_translation_px,
            max_rotation_deg=t.max_rotation_deg,
            scale_min=t.scale_min, scale_max=t.scale_max,
            noise_sigma=t.noise_sigma,
        ),
        val_every=t.val_every,
    )
