"""Workbench configuration: YAML documents validated with pydantic.

Unknown keys are rejected everywhere.  Validation failures are re-raised as
:class:`ConfigError` with dotted key paths such as ``metric.diagonal.2``.
"""

from __future__ import annotations

import hashlib
import json
import re
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .expr import DEFAULT_SEED, Chart, ExprError, parse
from .spectrum import (
    DEFAULT_GRID,
    CoordinateAlgebra,
    GrassmannFunctionAlgebra,
    GrassmannStage,
    QuotientAlgebra,
    RealStage,
    WeilAlgebra,
)

SCHEMA_VERSION = 1
SYMBOLIC_TOL = 1e-9
NUMERIC_TOL = 1e-6


class ConfigError(ValueError):
    def __init__(self, problems: list[str], source: str = ""):
        self.problems = problems
        head = f"invalid config {source}".rstrip()
        super().__init__(head + ":\n" + "\n".join(f"  {p}" for p in problems))


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Bound = Union[float, int, str]


class ChartBlock(_Block):
    coords: list[str] = Field(min_length=1)
    ranges: Optional[list[tuple[Bound, Bound]]] = None
    params: dict[str, tuple[float, float]] = Field(default_factory=dict)
    grid: int = Field(DEFAULT_GRID, ge=2)
    seed: int = DEFAULT_SEED

    @model_validator(mode="after")
    def _ranges_match(self):
        if self.ranges is not None and len(self.ranges) != len(self.coords):
            raise ValueError(f"{len(self.ranges)} ranges given for {len(self.coords)} coordinates")
        return self

    def build(self) -> Chart:
        ranges = tuple((str(lo), str(hi)) for lo, hi in self.ranges) if self.ranges else ()
        return Chart(tuple(self.coords), ranges, tuple((k, lo, hi) for k, (lo, hi) in self.params.items()))


class MetricBlock(_Block):
    diagonal: Optional[list[str]] = None
    components: Optional[list[list[str]]] = None
    lorentz: bool = True

    @model_validator(mode="after")
    def _one_form(self):
        if (self.diagonal is None) == (self.components is None):
            raise ValueError("give exactly one of 'diagonal' or 'components'")
        return self

    @property
    def rows(self):
        return self.diagonal if self.diagonal is not None else self.components


class EquationBlock(_Block):
    form: Literal["i", "ii"] = "ii"
    cosmological: str = Field("0", alias="lambda")
    T: Optional[list[list[str]]] = None

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @field_validator("cosmological", mode="before")
    @classmethod
    def _text(cls, v):
        return str(v)


class LoopBlock(_Block):
    samples: int = Field(16, ge=2)
    density: int = Field(8, ge=2)
    maps: dict[str, list[str]] = Field(default_factory=dict)
    generators: list[str] = Field(default_factory=list)


class StageBlock(_Block):
    weil: list[int] = Field(default_factory=lambda: [1, 2, 3])
    grassmann: Optional[int] = Field(None, ge=1, le=4)
    density: Optional[int] = Field(None, ge=2)
    loops: Optional[LoopBlock] = None

    @field_validator("weil")
    @classmethod
    def _orders(cls, v):
        if any(k < 1 or k > 3 for k in v):
            raise ValueError("Weil orders must lie in 1..3")
        return v


_STAGE = re.compile(r"^(R|W(\d+)|L(\d+)(_0)?)$")


def parse_stage(text: str):
    m = _STAGE.match(text.strip())
    if not m:
        raise ValueError(f"unknown stage {text!r} (use R, W<k>, L<q> or L<q>_0)")
    if m.group(1) == "R":
        return RealStage()
    if m.group(2):
        return WeilAlgebra(int(m.group(2)))
    return GrassmannStage(int(m.group(3)), bool(m.group(4)))


class AlgebraBlock(_Block):
    kind: Literal["weil", "quotient", "coordinate", "grassmann-functions"]
    order: Optional[int] = Field(None, ge=0, le=3)
    generators: Optional[list[str]] = None
    relations: Optional[list[str]] = None
    q: Optional[int] = Field(None, ge=1, le=4)
    density: Optional[int] = Field(None, ge=2)
    stages: list[str] = Field(default_factory=lambda: ["R"])
    expect_geometric: dict[str, bool] = Field(default_factory=dict)

    @field_validator("stages")
    @classmethod
    def _stages(cls, v):
        for s in v:
            parse_stage(s)
        return v

    @model_validator(mode="after")
    def _fields_for_kind(self):
        need = {"weil": ["order"], "quotient": ["generators", "relations"], "grassmann-functions": ["q"]}
        for name in need.get(self.kind, []):
            if getattr(self, name) is None:
                raise ValueError(f"algebra kind {self.kind!r} needs '{name}'")
        unknown = set(self.expect_geometric) - set(self.stages)
        if unknown:
            raise ValueError(f"expect_geometric names stages not listed in 'stages': {sorted(unknown)}")
        return self


class OutputBlock(_Block):
    format: Literal["json", "text"] = "text"
    tol: float = Field(SYMBOLIC_TOL, gt=0)
    numeric_tol: float = Field(NUMERIC_TOL, gt=0)
    samples: int = Field(200, ge=1)
    timings: bool = False


class WorkbenchConfig(_Block):
    schema_: Literal[1] = Field(alias="schema")
    name: str
    description: str = ""
    chart: Optional[ChartBlock] = None
    metric: Optional[MetricBlock] = None
    equation: Optional[EquationBlock] = None
    stage: Optional[StageBlock] = None
    algebra: Optional[AlgebraBlock] = None
    output: OutputBlock = Field(default_factory=OutputBlock)

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _dependencies(self):
        if self.metric is not None and self.chart is None:
            raise ValueError("a metric block needs a chart block")
        if self.algebra is not None and self.algebra.kind in ("coordinate", "grassmann-functions") \
                and self.chart is None:
            raise ValueError(f"algebra kind {self.algebra.kind!r} needs a chart block")
        return self

    # ----- builders -----

    def build_chart(self) -> Chart:
        return self.chart.build()

    def build_metric(self):
        from .lorentz import Metric
        return Metric.from_strings(self.build_chart(), self.metric.rows, self.name)

    def build_algebra(self):
        a = self.algebra
        if a.kind == "weil":
            return WeilAlgebra(a.order)
        if a.kind == "quotient":
            return QuotientAlgebra(tuple(a.generators), tuple(a.relations))
        density = a.density or self.chart.grid
        if a.kind == "coordinate":
            return CoordinateAlgebra(self.build_chart(), density)
        return GrassmannFunctionAlgebra(self.build_chart(), a.q, density)

    def digest(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json", by_alias=True), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        out.append(f"{path}: {e['msg']}")
    return out


def _check_expressions(cfg: WorkbenchConfig) -> list[str]:
    """Parse every expression string so grammar errors carry their key path."""
    problems = []
    if cfg.chart is None:
        return problems
    try:
        chart = cfg.build_chart()
    except (ExprError, ValueError) as exc:
        return [f"chart: {exc}"]

    def check(path, text, scope=chart):
        try:
            parse(text, scope)
        except ExprError as exc:
            problems.append(f"{path}: {exc}")

    if cfg.metric is not None:
        rows = cfg.metric.rows
        n = chart.dim
        if cfg.metric.diagonal is not None:
            if len(rows) != n:
                problems.append(f"metric.diagonal: expected {n} entries, got {len(rows)}")
            for i, t in enumerate(rows):
                check(f"metric.diagonal.{i}", t)
        else:
            if len(rows) != n or any(len(r) != n for r in rows):
                problems.append(f"metric.components: expected a {n}x{n} matrix")
            for i, r in enumerate(rows):
                for j, t in enumerate(r):
                    check(f"metric.components.{i}.{j}", t)
    if cfg.equation is not None:
        check("equation.lambda", cfg.equation.cosmological)
        for i, r in enumerate(cfg.equation.T or []):
            for j, t in enumerate(r):
                check(f"equation.T.{i}.{j}", t)
    if cfg.stage is not None and cfg.stage.loops is not None:
        pscope = Chart(("p",))
        for name, comps in cfg.stage.loops.maps.items():
            if len(comps) != chart.dim:
                problems.append(f"stage.loops.maps.{name}: expected {chart.dim} components")
            for i, t in enumerate(comps):
                check(f"stage.loops.maps.{name}.{i}", t, pscope)
        for i, t in enumerate(cfg.stage.loops.generators):
            check(f"stage.loops.generators.{i}", t)
    return problems


def load_config(data: dict | str | Path, source: str = "") -> WorkbenchConfig:
    if isinstance(data, (str, Path)):
        path = Path(data)
        source = source or str(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError([f"<yaml>: {exc}"], source) from None
    if not isinstance(data, dict):
        raise ConfigError(["<root>: expected a mapping"], source)
    try:
        cfg = WorkbenchConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc), source) from None
    problems = _check_expressions(cfg)
    if problems:
        raise ConfigError(problems, source)
    return cfg


def catalog_dir():
    return resources.files("eaw") / "configs"


def catalog() -> list[str]:
    """Names of the bundled configs, sorted."""
    return sorted(p.name[:-5] for p in catalog_dir().iterdir() if p.name.endswith(".yaml"))


def load_catalog_entry(name: str) -> WorkbenchConfig:
    entry = catalog_dir() / f"{name}.yaml"
    if not entry.is_file():
        raise ConfigError([f"<catalog>: no bundled config named {name!r}; known: {', '.join(catalog())}"])
    return load_config(yaml.safe_load(entry.read_text(encoding="utf-8")), f"catalog:{name}")
