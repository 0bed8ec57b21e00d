"""Rank-one cutting-and-stacking recipes and their exact tower data.

A stage-``j`` tower has levels ``0..h_j``; every level has raw width
``1/W_j`` with ``W_1 = 1``.  To pass from stage ``j`` to ``j+1`` the tower is
cut into ``r_j`` columns, column ``i`` receives ``s_j(i)`` spacer levels on
top, and the columns are stacked left to right.  Column ``i`` lands at level
``offsets[i]`` of the new tower.

All arithmetic is on Python integers, so heights never overflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Mapping, Sequence

from .errors import InvalidParameters, StageOutOfRange

KINDS = ("staircase", "double_staircase", "double_sidon", "custom")
DOUBLE_KINDS = ("double_staircase", "double_sidon")

REFERENCE_CUTTING = {"rule": "power", "exponent": 0.4, "min_r": 4}


class AdamsConditionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TowerStage:
    j: int
    h: int
    r: int
    spacers: tuple[int, ...]
    offsets: tuple[int, ...]
    width_denominator: int

    @property
    def levels(self) -> int:
        return self.h + 1

    @property
    def next_h(self) -> int:
        return self.offsets[-1] + self.h + self.spacers[-1]

    @property
    def width(self) -> Fraction:
        return Fraction(1, self.width_denominator)


@dataclass(frozen=True, eq=False)
class ConstructionSpec:
    """A validated rank-one recipe.

    ``cutting`` is a mapping ``{"rule": "power", "exponent", "min_r"}``,
    ``{"rule": "constant", "value"}`` or ``{"rule": "explicit", "values"}``.
    ``spacer`` is a mapping with a ``rule`` key (``staircase``,
    ``double_staircase``, ``sidon`` with ``growth``, ``explicit`` with
    ``values``) or, for custom kinds, a callable ``(j, r, h) -> spacers``.
    """

    kind: str
    h1: int
    cutting: Mapping[str, Any]
    spacer: Mapping[str, Any] | Callable[[int, int, int], Sequence[int]]
    max_stage: int
    adams_warning: bool = False
    _stages: list = field(default_factory=list, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def stage(self, j: int) -> TowerStage:
        return build_stage(self, j)

    @property
    def stages(self) -> list[TowerStage]:
        return [build_stage(self, j) for j in range(1, self.max_stage + 1)]

    def height(self, j: int) -> int:
        """h_j for 1 <= j <= max_stage + 1 (the last one is the top of the cap)."""
        if j == self.max_stage + 1:
            return self.stage(self.max_stage).next_h
        return self.stage(j).h

    def width_denominator(self, j: int) -> int:
        if j == self.max_stage + 1:
            s = self.stage(self.max_stage)
            return s.width_denominator * s.r
        return self.stage(j).width_denominator

    def to_config(self) -> dict:
        if callable(self.spacer):
            spacer: Any = "<callable>"
        else:
            spacer = dict(self.spacer)
        return {
            "kind": self.kind,
            "h1": self.h1,
            "cutting": dict(self.cutting),
            "spacer": spacer,
            "max_stage": self.max_stage,
        }


def next_height(h: int, spacers: Sequence[int]) -> int:
    """Height after cutting into ``len(spacers)`` columns and restacking."""
    if h < 0 or not spacers or any(s < 0 for s in spacers):
        raise InvalidParameters("next_height needs h >= 0 and a nonempty nonnegative spacer vector")
    return (h + 1) * len(spacers) + sum(spacers) - 1


def _cut(spec_kind: str, cutting: Mapping[str, Any], j: int, h: int) -> int:
    rule = cutting.get("rule", "power")
    if rule == "power":
        x = float(h) ** float(cutting.get("exponent", 0.4))
        min_r = int(cutting.get("min_r", 4 if spec_kind in DOUBLE_KINDS else 2))
        if spec_kind in DOUBLE_KINDS:
            r = max(min_r, 2 * math.ceil(x / 2))
        else:
            r = max(min_r, math.ceil(x))
    elif rule == "constant":
        r = int(cutting["value"])
    elif rule == "explicit":
        values = cutting["values"]
        if j > len(values):
            raise InvalidParameters(f"explicit cutting list has no entry for stage {j}")
        r = int(values[j - 1])
    else:
        raise InvalidParameters(f"unknown cutting rule {rule!r}")
    return r


def _spacers(spec: ConstructionSpec, j: int, r: int, h: int) -> tuple[int, ...]:
    rule = spec.spacer
    if callable(rule):
        return tuple(int(s) for s in rule(j, r, h))
    name = rule.get("rule")
    if name == "staircase":
        return tuple(range(r))
    if name == "double_staircase":
        half = r // 2
        return tuple(range(half)) * 2
    if name == "sidon":
        return sidon_half_vector(h, r // 2, int(rule.get("growth", 2))) * 2
    if name == "explicit":
        values = rule["values"]
        if j > len(values):
            raise InvalidParameters(f"explicit spacer list has no entry for stage {j}")
        return tuple(int(s) for s in values[j - 1])
    raise InvalidParameters(f"unknown spacer rule {name!r}")


def sidon_half_vector(h: int, r_half: int, growth: int) -> tuple[int, ...]:
    """Minimal spacers with s(1) = G*h and s(i+1) = G*(height stacked through column i+1)."""
    out = [growth * h]
    top = h + 1  # height stacked through column 1, before its spacers
    for _ in range(r_half - 1):
        top += out[-1] + h + 1
        out.append(growth * top)
    return tuple(out)


def _validate(kind: str, j: int, r: int, spacers: Sequence[int]) -> None:
    if r < 2:
        raise InvalidParameters(f"stage {j}: cutting number r={r} < 2")
    if kind in DOUBLE_KINDS and r % 2:
        raise InvalidParameters(f"stage {j}: double constructions need even r, got {r}")
    if len(spacers) != r:
        raise InvalidParameters(f"stage {j}: spacer vector has length {len(spacers)}, expected {r}")
    if any(s < 0 for s in spacers):
        raise InvalidParameters(f"stage {j}: negative spacer")


def _materialize(spec: ConstructionSpec) -> None:
    stages = spec._stages
    if stages:
        return
    h, W = spec.h1, 1
    for j in range(1, spec.max_stage + 1):
        r = _cut(spec.kind, spec.cutting, j, h)
        spacers = _spacers(spec, j, r, h) if r >= 1 else ()
        _validate(spec.kind, j, r, spacers)
        offsets = [0]
        for s in spacers[:-1]:
            offsets.append(offsets[-1] + h + 1 + s)
        stage = TowerStage(j, h, r, tuple(spacers), tuple(offsets), W)
        assert stage.next_h == next_height(h, spacers)
        stages.append(stage)
        h, W = stage.next_h, W * r


def make_spec(
    kind: str,
    h1: int,
    cutting_params: Mapping[str, Any] | None = None,
    spacer_params: Mapping[str, Any] | Callable | None = None,
    max_stage: int = 7,
) -> ConstructionSpec:
    """Validate a recipe and eagerly build its stages ``1..max_stage``."""
    if kind not in KINDS:
        raise InvalidParameters(f"unknown kind {kind!r}")
    if h1 < 1:
        raise InvalidParameters("h1 must be >= 1")
    if max_stage < 1:
        raise InvalidParameters("max_stage must be >= 1")
    cutting = dict(cutting_params or REFERENCE_CUTTING)
    if spacer_params is None:
        if kind == "custom":
            raise InvalidParameters("custom kind needs an explicit spacer rule")
        spacer_params = {"rule": "sidon" if kind == "double_sidon" else kind}
        if kind == "double_sidon":
            spacer_params["growth"] = 2
    elif not callable(spacer_params):
        spacer_params = dict(spacer_params)
    if kind in ("staircase", "double_staircase") and spacer_params != {"rule": kind}:
        raise InvalidParameters(f"{kind} spacers are fixed by the kind")
    spec = ConstructionSpec(kind, int(h1), cutting, spacer_params, int(max_stage))
    _materialize(spec)
    if kind != "double_sidon":
        ratios = [Fraction(s.r * s.r, s.h) for s in spec._stages]
        if any(b >= a for a, b in zip(ratios, ratios[1:])):
            object.__setattr__(spec, "adams_warning", True)
            warnings.warn("r_j^2/h_j is not strictly decreasing", AdamsConditionWarning, stacklevel=2)
    return spec


def reference_spec(max_stage: int = 7) -> ConstructionSpec:
    """Double staircase with h_1 = 10 and r_j = max(4, 2*ceil(h_j^0.4 / 2))."""
    return make_spec("double_staircase", 10, REFERENCE_CUTTING, None, max_stage)


def spec_from_config(config: Mapping[str, Any], max_stage: int | None = None) -> ConstructionSpec:
    """Build a spec from the JSON construction config."""
    try:
        kind = config["kind"]
        h1 = int(config["h1"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParameters(f"bad construction config: {exc}") from None
    cutting = config.get("cutting", REFERENCE_CUTTING)
    spacer = config.get("spacer")
    if kind == "double_sidon" and spacer is None:
        spacer = {"rule": "sidon", "growth": int(config.get("growth", 2))}
    stage_cap = int(max_stage if max_stage is not None else config.get("max_stage", 7))
    return make_spec(kind, h1, cutting, spacer, stage_cap)


def build_stage(spec: ConstructionSpec, j: int) -> TowerStage:
    if not 1 <= j <= spec.max_stage:
        raise StageOutOfRange(f"stage {j} outside 1..{spec.max_stage}")
    _materialize(spec)
    return spec._stages[j - 1]


def total_measure(spec: ConstructionSpec, J: int) -> tuple[Fraction, list[Fraction]]:
    """Raw measure of the stage-J tower and the spacer mass added by each earlier stage."""
    if not 1 <= J <= spec.max_stage + 1:
        raise StageOutOfRange(f"stage {J} outside 1..{spec.max_stage + 1}")
    incs = []
    for j in range(1, J):
        s = build_stage(spec, j)
        incs.append(Fraction(sum(s.spacers), s.width_denominator * s.r))
    total = Fraction(spec.height(J) + 1, spec.width_denominator(J))
    return total, incs
