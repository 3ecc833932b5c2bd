"""
Experiment configuration.

One JSON file describes one run. The models below validate it on load:
shapes and ranges through pydantic, spectral parameters through
validate_lambda, and the per-subcommand required fields in a final model
validator. Every numerical object a runner needs is built from here.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal, get_args

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, FilePath, model_validator

from ._dispersion import validate_lambda
from ._errors import ConfigurationError
from ._forward import ResolventConfig
from ._io import read_json, window_from_document
from ._lattice import SupportDomain
from ._window import SpectralWindow, direction_grid

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

Subcommand = Literal[
    "forward",
    "asympt",
    "invert",
    "nonuniq",
    "phaseless",
    "born-forward",
    "born-invert",
    "born-phaseless",
    "geometry",
]

SUBCOMMANDS: tuple[str, ...] = get_args(Subcommand)

DEFAULT_RADII = tuple(range(20, 201, 20))

# Fields each subcommand cannot run without.
REQUIRED_FIELDS: dict[str, tuple[str, ...]] = {
    "forward": ("window",),
    "asympt": ("lam",),
    "invert": ("window", "domain"),
    "nonuniq": ("roots",),
    "phaseless": ("window", "domain", "background_domain"),
    "born-forward": ("window",),
    "born-invert": ("window", "domain"),
    "born-phaseless": ("window", "domain", "background_domain"),
    "geometry": ("window",),
}


# ---------------------------------------------------------------------------
# Sub-models
# ---------------------------------------------------------------------------


class DomainSpec(BaseModel):
    """A finite lattice domain: a box or an explicit point list."""

    model_config = ConfigDict(extra="forbid")

    box: tuple[list[int], list[int]] | None = None
    points: list[list[int]] | None = None

    @model_validator(mode="after")
    def _one_form(self) -> DomainSpec:
        if (self.box is None) == (self.points is None):
            raise ValueError("give exactly one of 'box' or 'points'")
        return self

    @property
    def dim(self) -> int:
        return len(self.box[0]) if self.box is not None else len(self.points[0])

    def build(self) -> SupportDomain:
        if self.box is not None:
            return SupportDomain.box(*self.box)
        return SupportDomain.of(self.points)


class WindowSpec(BaseModel):
    """Spectral window: a direction grid times a list or band of lambdas.

    A window file, when given, replaces the grid entirely.
    """

    model_config = ConfigDict(extra="forbid")

    file: FilePath | None = None
    n_directions: int = Field(default=64, ge=1)
    lambdas: list[float] | None = None
    band: tuple[float, float] | None = None
    n_lambdas: int = Field(default=8, ge=1)
    both_branches: bool = False

    @property
    def is_set(self) -> bool:
        return self.file is not None or self.lambdas is not None or self.band is not None

    def lambda_values(self, fallback: float | None = None) -> list[float]:
        if self.lambdas is not None:
            return list(self.lambdas)
        if self.band is not None:
            lo, hi = self.band
            return np.linspace(lo, hi, self.n_lambdas).tolist() if self.n_lambdas > 1 else [lo]
        if fallback is not None:
            return [fallback]
        raise ConfigurationError("no lambdas: set window.lambdas, window.band or lambda", field="window")

    def build(self, dim: int, fallback: float | None = None) -> tuple[SpectralWindow, str | None]:
        """The window and, for window files, the sign stored with it."""
        if self.file is not None:
            window, sign = window_from_document(read_json(self.file))
            if window.dim != dim:
                raise ConfigurationError(f"window file has dim {window.dim}, config dim {dim}", field="window.file")
            return window, sign
        directions = direction_grid(dim, self.n_directions)
        return SpectralWindow.product(directions, self.lambda_values(fallback)), None


class ResolventSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epsilon_schedule: list[float] | None = None  # None: per-dimension default
    grid_size: int | None = None
    extrapolation_order: int = 2
    max_nodes: int = Field(default=20_000_000, ge=1)

    def build(self) -> ResolventConfig:
        return ResolventConfig(
            epsilon_schedule=None if self.epsilon_schedule is None else tuple(self.epsilon_schedule),
            grid_size=self.grid_size,
            extrapolation_order=self.extrapolation_order,
            max_nodes=self.max_nodes,
        )


# ---------------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------------


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: int = SCHEMA_VERSION
    subcommand: Subcommand | None = None
    dim: int = Field(default=2, ge=1, le=3)
    lam: float | None = Field(default=None, alias="lambda")
    sign: Literal["plus", "minus", "+", "-"] = "minus"
    window: WindowSpec = Field(default_factory=WindowSpec)
    domain: DomainSpec | None = None
    background_domain: DomainSpec | None = None
    field_file: FilePath | None = None
    background_file: FilePath | None = None
    mode: Literal["far_apart", "disjoint"] = "far_apart"

    # asympt
    direction: list[int] | None = None
    radii: list[int] = Field(default_factory=lambda: list(DEFAULT_RADII))
    resolvent: ResolventSpec = Field(default_factory=ResolventSpec)

    # nonuniq
    roots: list[float] = Field(default_factory=list)
    check_directions: int = Field(default=256, ge=1)

    # born
    incident_directions: int = Field(default=16, ge=1)
    potential_scale: float = Field(default=1.0, gt=0)
    compare_exact: bool = False  # born-forward: also solve Lippmann-Schwinger for the first wave

    # random instances and data
    seed: int = Field(default=0, ge=0)
    noise: float = Field(default=0.0, ge=0)
    zero_threshold: float = Field(default=1e-8, gt=0)
    fit_grid: int | None = None
    output_dir: Path = Path("out")

    @model_validator(mode="after")
    def _check(self) -> ExperimentConfig:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported schema version {self.schema_version} (expected {SCHEMA_VERSION})",
                field="schema_version",
            )
        if self.lam is not None:
            validate_lambda(self.lam, self.dim)
        for lam in self.window.lambdas or ():
            validate_lambda(lam, self.dim)
        for lam in self.window.band or ():
            validate_lambda(lam, self.dim)
        for lam in self.roots:
            validate_lambda(lam, self.dim)
        for name in ("domain", "background_domain"):
            spec = getattr(self, name)
            if spec is not None and spec.dim != self.dim:
                raise ConfigurationError(f"points have {spec.dim} coordinates, dim is {self.dim}", field=name)
        if self.direction is not None and len(self.direction) != self.dim:
            raise ConfigurationError(f"needs {self.dim} integer coordinates", field="direction")
        if self.subcommand is not None:
            self.require(self.subcommand)
        return self

    def require(self, subcommand: str) -> None:
        """Raise ConfigurationError naming the first field ``subcommand`` lacks."""
        for name in REQUIRED_FIELDS[subcommand]:
            if name == "window":
                missing = not self.window.is_set and self.lam is None
            elif name == "roots":
                missing = not self.roots
            else:
                missing = getattr(self, name) is None
            if missing:
                label = "lambda" if name == "lam" else name
                raise ConfigurationError(f"required by '{subcommand}'", field=label)
        if subcommand.startswith("born-") and self.dim < 2:
            raise ConfigurationError("Born scattering runs need d >= 2", field="dim")

    # -- builders -----------------------------------------------------------

    def spectral_window(self) -> tuple[SpectralWindow, str]:
        window, file_sign = self.window.build(self.dim, self.lam)
        return window, file_sign or self.sign

    def lambdas(self) -> list[float]:
        return self.window.lambda_values(self.lam)

    def resolvent_config(self) -> ResolventConfig:
        return self.resolvent.build()


def load_config(path: Path, subcommand: str | None = None) -> ExperimentConfig:
    """Read and validate a config file; ``subcommand`` overrides the file's."""
    raw = read_json(path)
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object", field="config")
    if subcommand is not None:
        stored = raw.get("subcommand")
        if stored is not None and stored != subcommand:
            raise ConfigurationError(
                f"file is for '{stored}', invoked as '{subcommand}'", field="subcommand"
            )
        raw = {**raw, "subcommand": subcommand}
    cfg = ExperimentConfig.model_validate(raw)
    logger.info("loaded %s config from %s", cfg.subcommand, path)
    return cfg
