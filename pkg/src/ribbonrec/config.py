"""Flat ``key = value`` run configuration.

Keys are the field names of :class:`RecommenderConfig`,
:class:`QualificationPolicy` (the evaluation policy) and :class:`SimConfig`,
plus ``alpha``, ``attribution`` and ``mc_iterations``. ``seed`` sets both the
recommender and simulator seeds. Lists are comma separated; ``#`` starts a
comment; ``none`` disables ``max_plays_per_pair``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields, replace
from datetime import date
from pathlib import Path

from .catalog import ValidationError
from .events import QualificationPolicy
from .recommenders import RecommenderConfig
from .simulator import SimConfig

_EVAL_KEYS = {"alpha": float, "attribution": str, "mc_iterations": int}


@dataclass(frozen=True)
class RunConfig:
    recommender: RecommenderConfig = field(default_factory=RecommenderConfig)
    policy: QualificationPolicy = field(default_factory=QualificationPolicy.evaluation)
    sim: SimConfig = field(default_factory=SimConfig)
    alpha: float = 0.05
    attribution: str = "slot"
    mc_iterations: int = 10_000

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValidationError(f"config key alpha: must be in (0, 1), got {self.alpha}")
        if self.attribution not in ("slot", "arm"):
            raise ValidationError(f"config key attribution: must be 'slot' or 'arm', got {self.attribution!r}")
        if self.mc_iterations < 1:
            raise ValidationError("config key mc_iterations: must be >= 1")

    @property
    def seed(self) -> int:
        return self.sim.seed

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, recommender=replace(self.recommender, seed=seed), sim=replace(self.sim, seed=seed))

    def with_alpha(self, alpha: float) -> "RunConfig":
        return replace(self, alpha=alpha)

    def to_json(self) -> dict:
        def plain(obj):
            out = {}
            for f in fields(obj):
                v = getattr(obj, f.name)
                if isinstance(v, date):
                    v = v.isoformat()
                elif isinstance(v, tuple):
                    v = list(v)
                elif isinstance(v, float) and math.isinf(v):
                    v = None
                out[f.name] = v
            return out

        return {"recommender": plain(self.recommender), "policy": plain(self.policy),
                "sim": plain(self.sim), "alpha": self.alpha, "attribution": self.attribution,
                "mc_iterations": self.mc_iterations}


def _convert(key: str, raw: str, default):
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return lowered in ("true", "1", "yes")
        if isinstance(default, int) or (default is None and key == "max_plays_per_pair"):
            if key == "max_plays_per_pair" and text.lower() == "none":
                return None
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, date):
            return date.fromisoformat(text)
        if isinstance(default, tuple):
            return tuple(float(p) for p in text.split(",") if p.strip())
        return text
    except ValueError:
        raise ValidationError(f"config key {key}: cannot parse {raw.strip()!r}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    groups = {
        "recommender": {f.name: f for f in fields(RecommenderConfig)},
        "policy": {f.name: f for f in fields(QualificationPolicy)},
        "sim": {f.name: f for f in fields(SimConfig)},
    }
    defaults = RunConfig()
    values: dict[str, dict] = {"recommender": {}, "policy": {}, "sim": {}, "eval": {}}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (p.strip() for p in line.split("=", 1))
        matched = False
        for group, known in groups.items():
            if key in known:
                default = getattr(getattr(defaults, group), key)
                values[group][key] = _convert(key, raw, default)
                matched = True
        if key in _EVAL_KEYS:
            values["eval"][key] = _convert(key, raw, getattr(defaults, key))
            matched = True
        if not matched:
            raise ValidationError(f"{source}:{lineno}: unknown config key {key!r}")
    try:
        return RunConfig(
            recommender=RecommenderConfig(**values["recommender"]),
            policy=QualificationPolicy(**values["policy"]),
            sim=SimConfig(**values["sim"]),
            **values["eval"],
        )
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), str(p))


def dump_config(cfg: RunConfig) -> str:
    """Config text that :func:`parse_config` reads back to ``cfg``."""
    lines = []
    seen = set()
    for group in (cfg.recommender, cfg.policy, cfg.sim):
        for f in dataclasses.fields(group):
            if f.name in seen:
                continue
            seen.add(f.name)
            v = getattr(group, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif isinstance(v, date):
                v = v.isoformat()
            elif v is None:
                v = "none"
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{f.name} = {v}")
    for key in _EVAL_KEYS:
        lines.append(f"{key} = {getattr(cfg, key)}")
    return "\n".join(lines) + "\n"
