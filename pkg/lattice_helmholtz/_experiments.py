"""
Experiment runners, one per CLI subcommand.

Each runner takes a validated ExperimentConfig, a random generator and an
ArtifactWriter, writes its CSV/JSON artifacts and returns the error
metrics that go into the run manifest. ``run`` dispatches through
RUNNERS the way the service entry point mounts one router per module.

Random instances come from numpy's Generator over the counter-based
Philox bit generator keyed by the config seed, so the same seed gives the
same instance bytes on every platform.
"""

from __future__ import annotations

import logging
import math
import platform
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import pydantic
import scipy

from . import __version__
from ._born import (
    IncidentWave,
    ScatteringIntensity,
    ScatteringSample,
    born_phaseless_reconstruct,
    born_reconstruct,
    lippmann_schwinger_solve,
    scattering_samples,
)
from ._config import SCHEMA_VERSION, ExperimentConfig
from ._dispersion import geometry_table, validate_lambda
from ._errors import ConfigurationError
from ._forward import Sign, asymptotic_check, decay_slope, far_field_batch, parse_sign
from ._inverse_source import (
    build_sampling_operator,
    nonuniqueness_source,
    reconstruct_phased,
    stability_constant,
    vanishing_derivative_residual,
    vanishing_residual,
)
from ._io import (
    asymptotic_csv,
    far_field_csv,
    field_to_document,
    geometry_csv,
    intensity_csv,
    read_field,
    scattering_csv,
    write_csv,
    write_json,
)
from ._lattice import LatticeField, SupportDomain
from ._phase_retrieval import IntensityDataset, SupportGeometry, phaseless_farfield_reconstruct
from ._window import SpectralWindow, direction_grid

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run-manifest.json"
RECONSTRUCTION_FILE = "reconstruction.json"

Metrics = dict[str, Any]


# ---------------------------------------------------------------------------
# Plumbing
# ---------------------------------------------------------------------------


@dataclass
class ArtifactWriter:
    """Writes into one output directory and remembers what it wrote."""

    root: Path
    written: list[str] = field(default_factory=list)

    def _path(self, name: str) -> Path:
        self.written.append(name)
        return self.root / name

    def json(self, name: str, doc: Any) -> Path:
        return write_json(self._path(name), _jsonable(doc))

    def lattice_field(self, name: str, u: LatticeField) -> Path:
        return write_json(self._path(name), field_to_document(u))

    def csv(self, name: str, table: tuple[Sequence[str], Sequence[Sequence[Any]]]) -> Path:
        return write_csv(self._path(name), *table)


Runner = Callable[[ExperimentConfig, np.random.Generator, ArtifactWriter], Metrics]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def random_field(domain: SupportDomain, rng: np.random.Generator, scale: float = 1.0) -> LatticeField:
    """Independent complex Gaussian values on every point of ``domain``."""
    m = len(domain)
    values = scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return LatticeField.from_vector(domain, values)


def _complex_noise(rng: np.random.Generator, level: float, n: int) -> np.ndarray:
    return level * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)


def _source(cfg: ExperimentConfig, rng: np.random.Generator, scale: float = 1.0) -> LatticeField:
    """The field file if given, else a random field on the domain, else scale * delta_0."""
    if cfg.field_file is not None:
        u = read_field(cfg.field_file)
        if u.dim != cfg.dim:
            raise ConfigurationError(f"field has dim {u.dim}, config dim {cfg.dim}", field="field_file")
        return u
    if cfg.domain is not None:
        return random_field(cfg.domain.build(), rng, scale)
    return LatticeField.delta((0,) * cfg.dim, scale)


def _background(cfg: ExperimentConfig) -> LatticeField:
    """The background file if given, else a unit delta at the first point of D0."""
    if cfg.background_file is not None:
        u = read_field(cfg.background_file)
        if u.dim != cfg.dim:
            raise ConfigurationError(f"field has dim {u.dim}, config dim {cfg.dim}", field="background_file")
        return u
    return LatticeField.delta(cfg.background_domain.build().points[0])


def _relative_error(estimate: LatticeField, truth: LatticeField) -> float:
    scale = truth.norm()
    return (estimate - truth).norm() / scale if scale > 0 else (estimate - truth).norm()


def _signs(cfg: ExperimentConfig, sign: str) -> list[Sign]:
    first = parse_sign(sign)
    if not cfg.window.both_branches:
        return [first]
    return [first, "plus" if first == "minus" else "minus"]


def _sign_label(sign: Sign) -> str:
    return "+" if sign == "plus" else "-"


# ---------------------------------------------------------------------------
# Forward problem
# ---------------------------------------------------------------------------


def run_forward(cfg: ExperimentConfig, rng: np.random.Generator, out: ArtifactWriter) -> Metrics:
    f = _source(cfg, rng)
    window, sign = cfg.spectral_window()
    samples = [s for sg in _signs(cfg, sign) for s in far_field_batch(f, window, sg)]
    out.lattice_field("source.json", f)
    out.csv("far_field.csv", far_field_csv(samples, cfg.dim))
    mags = np.abs([s.value for s in samples])
    return {"samples": len(samples), "max_abs_amplitude": float(mags.max())}


def run_asympt(cfg: ExperimentConfig, rng: np.random.Generator, out: ArtifactWriter) -> Metrics:
    f = _source(cfg, rng)
    sp = validate_lambda(cfg.lam, cfg.dim)
    direction = cfg.direction or [1] + [0] * (cfg.dim - 1)
    rows = asymptotic_check(f, sp, direction, cfg.radii, cfg.resolvent_config(), cfg.sign)
    out.csv("asymptotics.csv", asymptotic_csv(rows))
    scaled = np.array([r.scaled_residual for r in rows])
    last = rows[-1]
    median = float(np.median(scaled))
    return {
        "max_scaled_residual": float(scaled.max()),
        "median_scaled_residual": median,
        "max_over_median": float(scaled.max() / median) if median > 0 else 0.0,
        "relative_error_last": abs(last.psi - last.prediction) / abs(last.psi),
        "decay_slope": decay_slope(rows),
        "max_quadrature_error": max(r.error_estimate for r in rows),
    }


# ---------------------------------------------------------------------------
# Inverse source
# ---------------------------------------------------------------------------


def run_invert(cfg: ExperimentConfig, rng: np.random.Generator, out: ArtifactWriter) -> Metrics:
    domain = cfg.domain.build()
    f = _source(cfg, rng)
    window, sign = cfg.spectral_window()
    op = build_sampling_operator(domain, window, sign)
    samples = far_field_batch(f, window, sign)
    if cfg.noise > 0:
        noise = _complex_noise(rng, cfg.noise, len(samples))
        samples = [replace(s, value=s.value + e) for s, e in zip(samples, noise)]
    rec, report = reconstruct_phased(samples, domain, window, sign, operator=op)
    out.lattice_field("source.json", f)
    out.lattice_field(RECONSTRUCTION_FILE, rec)
    out.csv("far_field.csv", far_field_csv(samples, cfg.dim))
    metrics: Metrics = {
        **report.as_dict(),
        "relative_error": _relative_error(rec, f),
        "field_file": RECONSTRUCTION_FILE,
    }
    metrics["stability_constant"] = stability_constant(op)
    out.json("report.json", metrics)
    return metrics


def run_nonuniq(cfg: ExperimentConfig, rng: np.random.Generator, out: ArtifactWriter) -> Metrics:
    u = read_field(cfg.field_file) if cfg.field_file is not None else LatticeField.delta((0,) * cfg.dim)
    f = nonuniqueness_source(u, cfg.roots)
    out.lattice_field("source.json", f)
    rows = []
    for lam in sorted(set(cfg.roots)):
        sp = validate_lambda(lam, cfg.dim)
        multiplicity = cfg.roots.count(lam)
        residual = vanishing_residual(f, sp, cfg.sign, cfg.check_directions)
        derivative = vanishing_derivative_residual(f, sp, cfg.sign, cfg.check_directions)
        rows.append([lam, multiplicity, residual, derivative])
    out.csv("vanishing.csv", (["lambda", "multiplicity", "residual", "derivative_residual"], rows))
    metrics: Metrics = {"max_residual": max(r[2] for r in rows), "support_size": len(f.support)}
    repeated = [r[3] for r in rows if r[1] > 1]
    if repeated:
        metrics["max_repeated_derivative_residual"] = max(repeated)
    return metrics


# ---------------------------------------------------------------------------
# Phaseless source
# ---------------------------------------------------------------------------


def _intensities(
    g: LatticeField,
    window: SpectralWindow,
    signs: Sequence[Sign],
    rng: np.random.Generator,
    noise: float,
) -> list[IntensityDataset]:
    datasets = []
    for sg in signs:
        values = np.abs([s.value for s in far_field_batch(g, window, sg)]) ** 2
        if noise > 0:
            values = values + noise * rng.standard_normal(len(values))
        datasets.append(IntensityDataset(window, values, sg))
    return datasets


def _intensity_table(labelled: Sequence[tuple[str, IntensityDataset]]) -> tuple[list[str], list[list]]:
    dirs = np.vstack([ds.window.directions for _, ds in labelled])
    lams = np.concatenate([ds.window.lambdas for _, ds in labelled])
    branches = [f"{name}{_sign_label(ds.sign)}" for name, ds in labelled for _ in range(len(ds.window))]
    values = np.concatenate([ds.values for _, ds in labelled])
    return intensity_csv(dirs, lams, branches, values)


def run_phaseless(cfg: ExperimentConfig, rng: np.random.Generator, out: ArtifactWriter) -> Metrics:
    geom = SupportGeometry(cfg.domain.build(), cfg.background_domain.build(), cfg.mode)
    f = _source(cfg, rng)
    f0 = _background(cfg)
    window, sign = cfg.spectral_window()
    signs = _signs(cfg, sign)
    sum_data = _intensities(f + f0, window, signs, rng, cfg.noise)
    source_data = _intensities(f, window, signs, rng, cfg.noise) if cfg.mode == "disjoint" else None
    rec, report = phaseless_farfield_reconstruct(
        sum_data, source_data, f0, geom, cfg.fit_grid, cfg.zero_threshold
    )
    labelled = [("sum", ds) for ds in sum_data] + [("source", ds) for ds in source_data or ()]
    out.lattice_field("source.json", f)
    out.lattice_field("background.json", f0)
    out.lattice_field(RECONSTRUCTION_FILE, rec)
    out.csv("intensity.csv", _intensity_table(labelled))
    metrics: Metrics = {
        **report.as_dict(),
        "relative_error": _relative_error(rec, f),
        "field_file": RECONSTRUCTION_FILE,
    }
    out.json("report.json", metrics)
    return metrics


# ---------------------------------------------------------------------------
# Born scattering
# ---------------------------------------------------------------------------


def _incident_waves(cfg: ExperimentConfig) -> list[IncidentWave]:
    thetas = direction_grid(cfg.dim, cfg.incident_directions)
    return [
        IncidentWave.from_direction(theta, validate_lambda(lam, cfg.dim))
        for lam in cfg.lambdas()
        for theta in thetas
    ]


def _scattering(
    v: LatticeField, cfg: ExperimentConfig
) -> tuple[list[IncidentWave], np.ndarray, list[ScatteringSample]]:
    incident = _incident_waves(cfg)
    omegas = direction_grid(cfg.dim, cfg.window.n_directions)
    return incident, omegas, scattering_samples(v, incident, omegas)


def _scattering_table(samples: Sequence[ScatteringSample], values: np.ndarray) -> tuple[list[str], list[list]]:
    return scattering_csv(
        np.array([s.k for s in samples]),
        np.array([s.omega for s in samples]),
        np.array([s.lam for s in samples]),
        values,
    )


def run_born_forward(cfg: ExperimentConfig, rng: np.random.Generator, out: ArtifactWriter) -> Metrics:
    v = _source(cfg, rng, cfg.potential_scale)
    incident, omegas, samples = _scattering(v, cfg)
    values = np.array([s.value for s in samples])
    out.lattice_field("potential.json", v)
    out.csv("scattering.csv", _scattering_table(samples, values))
    metrics: Metrics = {"samples": len(samples), "max_abs_amplitude": float(np.abs(values).max())}
    if cfg.compare_exact:
        solution = lippmann_schwinger_solve(v, incident[0], cfg.resolvent_config())
        exact = np.array([solution.amplitude(w) for w in omegas])
        born = values[: len(omegas)]
        metrics["born_vs_exact"] = float(np.abs(exact - born).max() / max(np.abs(exact).max(), 1e-300))
        metrics["lippmann_schwinger_iterations"] = solution.iterations
    return metrics


def run_born_invert(cfg: ExperimentConfig, rng: np.random.Generator, out: ArtifactWriter) -> Metrics:
    domain = cfg.domain.build()
    v = _source(cfg, rng, cfg.potential_scale)
    _, _, samples = _scattering(v, cfg)
    if cfg.noise > 0:
        noise = _complex_noise(rng, cfg.noise, len(samples))
        samples = [replace(s, value=s.value + e) for s, e in zip(samples, noise)]
    rec, report = born_reconstruct(samples, domain)
    out.lattice_field("potential.json", v)
    out.lattice_field(RECONSTRUCTION_FILE, rec)
    out.csv("scattering.csv", _scattering_table(samples, np.array([s.value for s in samples])))
    metrics: Metrics = {
        **report.as_dict(),
        "relative_error": _relative_error(rec, v),
        "field_file": RECONSTRUCTION_FILE,
    }
    out.json("report.json", metrics)
    return metrics


def run_born_phaseless(cfg: ExperimentConfig, rng: np.random.Generator, out: ArtifactWriter) -> Metrics:
    geom = SupportGeometry(cfg.domain.build(), cfg.background_domain.build(), cfg.mode)
    v = _source(cfg, rng, cfg.potential_scale)
    v0 = _background(cfg)
    _, _, total = _scattering(v + v0, cfg)
    intensity_total = ScatteringIntensity.from_samples(total)
    intensity_v = None
    if cfg.mode == "disjoint":
        intensity_v = ScatteringIntensity.from_samples(_scattering(v, cfg)[2])
    rec, report = born_phaseless_reconstruct(
        intensity_total, intensity_v, v0, geom, cfg.fit_grid, cfg.zero_threshold
    )
    out.lattice_field("potential.json", v)
    out.lattice_field("background.json", v0)
    out.lattice_field(RECONSTRUCTION_FILE, rec)
    out.csv("intensity.csv", _scattering_table(total, intensity_total.values))
    metrics: Metrics = {
        **report.as_dict(),
        "relative_error": _relative_error(rec, v),
        "field_file": RECONSTRUCTION_FILE,
    }
    out.json("report.json", metrics)
    return metrics


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def run_geometry(cfg: ExperimentConfig, rng: np.random.Generator, out: ArtifactWriter) -> Metrics:
    if cfg.window.file is not None:
        window, _ = cfg.spectral_window()
        directions = np.unique(window.directions, axis=0)
        lambdas = np.unique(window.lambdas).tolist()
    else:
        directions = direction_grid(cfg.dim, cfg.window.n_directions)
        lambdas = cfg.lambdas()
    rows = geometry_table(directions, lambdas)
    out.csv("geometry.csv", geometry_csv(rows, cfg.dim))
    return {
        "rows": len(rows),
        "max_level_residual": max(r.level_residual for r in rows),
        "max_normal_residual": max(r.normal_residual for r in rows),
        "min_abs_curvature": min(abs(r.curvature) for r in rows),
    }


RUNNERS: dict[str, Runner] = {
    "forward": run_forward,
    "asympt": run_asympt,
    "invert": run_invert,
    "nonuniq": run_nonuniq,
    "phaseless": run_phaseless,
    "born-forward": run_born_forward,
    "born-invert": run_born_invert,
    "born-phaseless": run_born_phaseless,
    "geometry": run_geometry,
}


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    subcommand: str
    output_dir: Path
    artifacts: tuple[str, ...]
    metrics: Metrics
    manifest: Path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def versions() -> dict[str, str]:
    return {
        "lattice_helmholtz": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "python": platform.python_version(),
    }


def run(cfg: ExperimentConfig) -> RunResult:
    """Run ``cfg.subcommand`` and write its artifacts plus the run manifest.

    Everything except the manifest's ``timings`` block is a function of the
    config alone.
    """
    if cfg.subcommand is None:
        raise ConfigurationError("no subcommand given", field="subcommand")
    cfg.require(cfg.subcommand)
    runner = RUNNERS[cfg.subcommand]
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    writer = ArtifactWriter(cfg.output_dir)

    started = time.perf_counter()
    metrics = _jsonable(runner(cfg, make_rng(cfg.seed), writer))
    elapsed = time.perf_counter() - started
    logger.info("%s finished in %.2fs: %s", cfg.subcommand, elapsed, metrics)

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": cfg.subcommand,
        "config": cfg.model_dump(mode="json", by_alias=True),
        "versions": versions(),
        "artifacts": sorted(writer.written),
        "metrics": metrics,
        "timings": {"total_s": elapsed},
    }
    path = write_json(cfg.output_dir / MANIFEST_NAME, manifest)
    return RunResult(cfg.subcommand, cfg.output_dir, tuple(sorted(writer.written)), metrics, path)
