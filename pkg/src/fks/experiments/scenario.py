"""Declarative scenario documents and initial-condition construction."""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import (BaseModel, ConfigDict, Field, ValidationError, field_validator,
                      model_validator)

from .. import spectral
from ..model import ModelParams
from ..spectral import Grid
from ..stepper import StepControl

SCHEMA_VERSION = 1
SCHEMA_PATH = Path(__file__).with_name("scenario.schema.json")


class SchemaError(ValueError):
    """Invalid scenario document; ``problems`` lists ``(field path, message)``."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        lines = [f"  {loc or '<root>'}: {msg}" for loc, msg in problems]
        super().__init__("invalid scenario:\n" + "\n".join(lines))

    @classmethod
    def from_validation(cls, err: ValidationError) -> "SchemaError":
        return cls([(".".join(str(p) for p in e["loc"]), e["msg"]) for e in err.errors()])


class _Strict(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ConstantIC(_Strict):
    type: Literal["constant"] = "constant"
    a: float = Field(ge=0)

    def build(self, n: int, seed: Optional[int] = None) -> np.ndarray:
        return np.full(n, float(self.a))


class CosineIC(_Strict):
    """``a + b cos(k x)``."""

    type: Literal["cosine"] = "cosine"
    a: float
    b: float
    k: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _nonneg(self):
        if self.a < abs(self.b):
            raise ValueError(f"a + b cos(kx) is negative somewhere (a={self.a}, b={self.b})")
        return self

    def build(self, n: int, seed: Optional[int] = None) -> np.ndarray:
        if self.k >= n // 2:
            raise ValueError(f"cosine wavenumber {self.k} not resolved on n={n}")
        return self.a + self.b * np.cos(self.k * Grid.of(n).x)


class BumpIC(_Strict):
    """Mollified spike centred at ``x = center``.

    An indicator of the interval of length ``width`` is smoothed with the heat
    kernel of width ``mollify`` and rescaled so the peak above ``background``
    reaches ``height`` exactly.
    """

    type: Literal["bump"] = "bump"
    height: float = Field(gt=0)
    width: float = Field(gt=0, lt=2 * math.pi)
    mollify: float = Field(0.01, gt=0)
    background: float = Field(0.0, ge=0)
    center: float = Field(0.0, ge=-math.pi, le=math.pi)

    @model_validator(mode="after")
    def _above_background(self):
        if self.height <= self.background:
            raise ValueError("height must exceed background")
        return self

    def build(self, n: int, seed: Optional[int] = None) -> np.ndarray:
        x = Grid.of(n).x
        d = np.angle(np.exp(1j * (x - self.center)))  # periodic distance
        spike = (np.abs(d) < 0.5 * self.width).astype(float)
        if not spike.any():
            raise ValueError(f"bump width {self.width} is below the grid spacing")
        s = spectral.mollify(spike, self.mollify)
        return self.background + (self.height - self.background) * s / s.max()


class RandomIC(_Strict):
    """Random trigonometric polynomial of degree ``band`` around ``mean``.

    The perturbation is scaled to sup-norm ``amplitude``; values are then
    clamped from below at ``min_clamp``.
    """

    type: Literal["random"] = "random"
    seed: int = 0
    band: int = Field(8, ge=1)
    amplitude: float = Field(0.5, ge=0)
    mean: float = Field(1.0, ge=0)
    min_clamp: float = Field(0.0, ge=0)

    def build(self, n: int, seed: Optional[int] = None) -> np.ndarray:
        if self.band >= n // 2:
            raise ValueError(f"band {self.band} not resolved on n={n}")
        rng = np.random.default_rng(self.seed if seed is None else seed)
        x = Grid.of(n).x
        k = np.arange(1, self.band + 1)
        a, b = rng.standard_normal((2, self.band))
        pert = (a @ np.cos(np.outer(k, x)) + b @ np.sin(np.outer(k, x)))
        scale = np.max(np.abs(pert))
        pert = pert / scale if scale > 0 else pert
        return np.maximum(self.mean + self.amplitude * pert, self.min_clamp)


InitialCondition = Annotated[Union[ConstantIC, CosineIC, BumpIC, RandomIC],
                             Field(discriminator="type")]

CheckName = Literal[
    "blowup_free", "steady", "nonnegativity", "positivity_floor", "ceiling",
    "mass_conservation", "mean_law", "hhalf_linear", "entropy_balance",
    "l2_balance", "weak_residual", "lubo", "maxpoint", "entropy_decay",
    "fisher_decay", "tricomi", "convergence",
]


class CheckSpec(_Strict):
    """Activation of a named check; ``tol`` and ``options`` override defaults."""

    name: CheckName
    tol: Optional[float] = Field(None, ge=0)
    options: dict[str, Any] = Field(default_factory=dict)


class SweepSpec(_Strict):
    eps: list[float] = Field(default_factory=lambda: [1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
                             min_length=2)
    n: list[int] = Field(default_factory=lambda: [64, 128, 256, 512], min_length=2)
    alpha: list[float] = Field(default_factory=lambda: [0.8, 0.9])
    r: list[float] = Field(default_factory=lambda: [0.0, 1.5])

    @field_validator("eps")
    @classmethod
    def _eps(cls, v):
        if any(e < 0 for e in v):
            raise ValueError("viscosities must be nonnegative")
        return v

    @field_validator("n")
    @classmethod
    def _grids(cls, v):
        for n in v:
            Grid.of(n)
        return v


class ScenarioSpec(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    initial_condition: InitialCondition
    mollify: float = Field(0.0, ge=0, description="heat-kernel width applied to u0")
    params: ModelParams
    ctrl: StepControl = Field(default_factory=StepControl)
    n: int = 256
    T: float = Field(gt=0)
    cadence: int = Field(10, ge=1)
    fixed_dt: Optional[float] = Field(None, gt=0)
    snapshot_every: int = Field(1000, ge=1, description="steps between snapshots")
    seed: Optional[int] = None
    checks: list[CheckSpec] = Field(default_factory=list)
    sweep: SweepSpec = Field(default_factory=SweepSpec)

    @field_validator("n")
    @classmethod
    def _grid(cls, v):
        Grid.of(v)
        return v

    @model_validator(mode="after")
    def _initial_state(self):
        u0 = build_initial(self)
        if not np.all(np.isfinite(u0)) or u0.min() < 0:
            raise ValueError(f"initial condition negative after construction "
                             f"(min {u0.min():.3e})")
        return self

    def check(self, name: str) -> Optional[CheckSpec]:
        for c in self.checks:
            if c.name == name:
                return c
        return None

    def with_updates(self, **updates) -> "ScenarioSpec":
        """Validated copy with top-level fields or ``params__field`` replaced."""
        doc = self.model_dump(mode="json")
        for key, val in updates.items():
            node = doc
            *head, last = key.split("__")
            for h in head:
                node = node[h]
            node[last] = val.model_dump(mode="json") if isinstance(val, BaseModel) else val
        return ScenarioSpec.model_validate(doc)


def build_initial(spec: ScenarioSpec) -> np.ndarray:
    """Initial density: the profile on the grid, then the heat mollifier."""
    u = spec.initial_condition.build(spec.n, spec.seed)
    if spec.mollify > 0:
        u = spectral.mollify(u, spec.mollify)
    return u


# -- loading ------------------------------------------------------------------------

def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides: list[str]) -> tuple[dict, dict]:
    """Apply ``dotted.path=value`` overrides to a raw document.

    Paths must exist in the document once defaults are filled in; list
    elements are addressed by index.  Returns the new document and the parsed
    overrides.
    """
    try:
        full = ScenarioSpec.model_validate(doc).model_dump(mode="json")
    except ValidationError:
        full = copy.deepcopy(doc)
    applied: dict[str, Any] = {}
    problems = []
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            problems.append((item, "override must look like path=value"))
            continue
        node = full
        parts = key.split(".")
        try:
            for p in parts[:-1]:
                node = node[int(p)] if isinstance(node, list) else node[p]
            last = parts[-1]
            if isinstance(node, list):
                node[int(last)]
                node[int(last)] = parse_value(raw)
            elif isinstance(node, dict) and last in node:
                node[last] = parse_value(raw)
            else:
                raise KeyError(last)
        except (KeyError, IndexError, ValueError, TypeError):
            problems.append((key, "no such field in the scenario schema"))
            continue
        applied[key] = parse_value(raw)
    if problems:
        raise SchemaError(problems)
    return full, applied


def load_scenario(path, overrides: Optional[list[str]] = None,
                  seed: Optional[int] = None) -> tuple[ScenarioSpec, dict]:
    """Read, override and validate a scenario file.

    Returns the scenario and the applied overrides (``seed`` included when given).
    """
    p = Path(path)
    if not p.is_file():
        raise SchemaError([("config", f"file not found: {p}")])
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise SchemaError([("config", f"not valid JSON: {e}")]) from None
    if not isinstance(doc, dict):
        raise SchemaError([("<root>", "scenario must be a JSON object")])
    doc, applied = apply_overrides(doc, list(overrides or []))
    if seed is not None:
        doc["seed"] = seed
        applied["seed"] = seed
    return validate_scenario(doc), applied


def validate_scenario(doc: dict) -> ScenarioSpec:
    try:
        return ScenarioSpec.model_validate(doc)
    except ValidationError as e:
        raise SchemaError.from_validation(e) from None


def json_schema() -> dict:
    schema = ScenarioSpec.model_json_schema()
    schema["$id"] = f"fks-scenario-v{SCHEMA_VERSION}"
    schema["title"] = "ScenarioSpec"
    return schema


def write_schema(path=SCHEMA_PATH) -> None:
    Path(path).write_text(json.dumps(json_schema(), indent=2, sort_keys=True) + "\n")
