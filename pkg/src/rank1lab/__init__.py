"""Exact rank-one cutting-and-stacking constructions and their weak limits of powers."""

__version__ = "0.1.0"

from .construction import (  # noqa: E402
    ConstructionSpec,
    TowerStage,
    build_stage,
    make_spec,
    next_height,
    reference_spec,
    spec_from_config,
    total_measure,
)
from .dynamics import CorrelationRecord, apply_power, avg_correlation, correlation, correlation_scan  # noqa: E402
from .levelsets import LevelSet, make_levelset, measure, refine_to, set_ops  # noqa: E402

__all__ = [
    "ConstructionSpec",
    "CorrelationRecord",
    "LevelSet",
    "TowerStage",
    "apply_power",
    "avg_correlation",
    "build_stage",
    "correlation",
    "correlation_scan",
    "make_levelset",
    "make_spec",
    "measure",
    "next_height",
    "reference_spec",
    "refine_to",
    "set_ops",
    "spec_from_config",
    "total_measure",
]
