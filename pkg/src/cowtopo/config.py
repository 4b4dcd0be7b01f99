"""One JSON file configuring every stage; command-line flags override it."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .cal import CalConfig
from .preprocess import PreprocessConfig
from .refine import RefineConfig
from .tasks import GraphDeriveConfig
from .volume import DEFAULT_CLASS_MAP, ClassMap, ValidationError


@dataclass(frozen=True)
class MetricsConfig:
    classes_mode: str = "present"
    hd95_penalty: float | None = None
    connectivity: int = 26
    boundary_thickness: int = 2

    def __post_init__(self):
        if self.classes_mode not in ("present", "all13"):
            raise ValidationError("classes_mode must be 'present' or 'all13'")
        if self.boundary_thickness < 1:
            raise ValidationError("boundary_thickness must be >= 1")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RunConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    cal: CalConfig = field(default_factory=CalConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    graph: GraphDeriveConfig = field(default_factory=GraphDeriveConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    class_map: ClassMap = DEFAULT_CLASS_MAP

    def to_dict(self) -> dict:
        return {
            "preprocess": self.preprocess.to_dict(),
            "cal": self.cal.to_dict(),
            "refine": self.refine.to_dict(),
            "graph": self.graph.to_dict(),
            "metrics": self.metrics.to_dict(),
            "class_map": self.class_map.to_dict(),
        }


_SECTIONS = {
    "preprocess": PreprocessConfig,
    "cal": CalConfig,
    "refine": RefineConfig,
    "graph": GraphDeriveConfig,
    "metrics": MetricsConfig,
}


def _build(kind, payload: dict):
    known = {f.name for f in fields(kind)}
    unknown = set(payload) - known
    if unknown:
        raise ValidationError(f"unknown {kind.__name__} keys: {sorted(unknown)}")
    return kind(**payload)


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    unknown = set(payload) - set(_SECTIONS) - {"class_map"}
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {name: _build(kind, payload.get(name, {})) for name, kind in _SECTIONS.items()}
    cm = payload.get("class_map")
    if isinstance(cm, str):
        kwargs["class_map"] = ClassMap.from_json(Path(path).parent / cm)
    elif cm is not None:
        kwargs["class_map"] = ClassMap.from_dict(cm)
    return RunConfig(**kwargs)


def override(cfg, **flags):
    """``dataclasses.replace`` with the flags that were actually given."""
    given = {k: v for k, v in flags.items() if v is not None}
    return replace(cfg, **given) if given else cfg
