"""
Phaseless inverse source problem with a known background source.

The data is |F(f + f0)|^2, whose inverse transform is the autocorrelation

  u = (2 pi)^{-d/2} (f + f0) * (f~ + f0~) = Sigma1 + Sigma2 + Sigma3 + Sigma4,

  Sigma1 = f * f~     supported in B_{diam D}
  Sigma2 = f0 * f~    supported in D0 - D
  Sigma3 = f * f0~    supported in D - D0
  Sigma4 = f0 * f0~   supported in B_{diam D0}

(each with the (2 pi)^{-d/2} factor). When dist(D, D0) > diam D the window
chi_{D - D0} isolates Sigma3 + Sigma4 restricted there, so

  q = chi_{D - D0} (u - (2 pi)^{-d/2} f0 * f0~) = Sigma3,

and F q = (2 pi)^{d/2} (2 pi)^{-d/2} F f conj(F f0) recovers F f wherever F f0
does not vanish. When only dist(D, D0) > 0 holds, Sigma1 may leak into the
window; subtracting the separately measured |F f|^2 removes it.

The far-field pipelines turn intensities |a|^2 on a window into samples of
|F(f + f0)|^2 at the points kappa(+-omega, lambda), fit the finite
trigonometric polynomial whose frequencies are (D u D0) - (D u D0), and
evaluate it on a full torus grid before retrieval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.linalg

from ._errors import ConfigurationError, NumericalError
from ._forward import Sign, parse_sign, window_geometry
from ._lattice import (
    TWO_PI,
    Convention,
    LatticeField,
    SupportDomain,
    TorusSpectrum,
    UnderResolutionError,
    autocorrelation,
    convolve,
    dft,
    diam,
    difference,
    dist,
    fourier_matrix,
    idft,
    min_grid_size,
    reflect_conjugate,
    union,
    window,
)
from ._window import SpectralWindow, WindowMismatchError

logger = logging.getLogger(__name__)

Mode = Literal["far_apart", "disjoint"]

DEFAULT_ZERO_THRESHOLD = 1e-8
MAX_SKIPPED_FRACTION = 0.01
FIT_RANK_RTOL = 1e-10


# ---------------------------------------------------------------------------
# Error types
# ---------------------------------------------------------------------------


class GeometryError(ConfigurationError):
    """The supports of f and f0 do not satisfy the separation condition."""


class BackgroundDegeneracyError(NumericalError):
    """F f0 vanishes on too large a share of the grid to divide by it."""

    def __init__(self, skipped: int, total: int):
        self.skipped = skipped
        self.total = total
        self.fraction = skipped / total
        super().__init__(
            f"background spectrum is below the zero threshold at {skipped} of {total} "
            f"grid nodes ({self.fraction:.2%} > {MAX_SKIPPED_FRACTION:.0%})"
        )


class InsufficientCoverageError(NumericalError):
    """Spectral samples do not determine the autocorrelation polynomial."""

    def __init__(self, sigma_min: float, sigma_max: float, n_samples: int, n_unknowns: int):
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        super().__init__(
            f"{n_samples} spectral samples do not determine {n_unknowns} autocorrelation "
            f"coefficients: fit sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e}"
        )


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SupportGeometry:
    """Supports D of the unknown source and D0 of the background.

    ``strict=False`` skips the mode checks; it exists to demonstrate what
    goes wrong when they fail.
    """

    D: SupportDomain
    D0: SupportDomain
    mode: Mode = "far_apart"
    strict: bool = True
    cross_window: SupportDomain = field(init=False)

    def __post_init__(self) -> None:
        if self.D.dim != self.D0.dim:
            raise GeometryError(f"D has dim {self.D.dim}, D0 has dim {self.D0.dim}")
        if self.mode not in ("far_apart", "disjoint"):
            raise ConfigurationError(f"unknown mode {self.mode!r}", field="mode")
        object.__setattr__(self, "cross_window", difference(self.D, self.D0))
        if not self.strict:
            return
        separation, size = dist(self.D, self.D0), diam(self.D)
        if self.mode == "far_apart" and not separation > size:
            raise GeometryError(
                f"far_apart mode needs dist(D, D0) > diam D, got {separation:.4g} <= {size:.4g}",
                field="mode",
            )
        if self.mode == "disjoint" and not separation > 0:
            raise GeometryError("disjoint mode needs dist(D, D0) > 0", field="mode")
        mirrored = difference(self.D0, self.D)
        if set(self.cross_window.points) & set(mirrored.points):
            raise GeometryError("D - D0 and D0 - D overlap; the cross term cannot be isolated")

    @property
    def dim(self) -> int:
        return self.D.dim

    @property
    def autocorrelation_support(self) -> SupportDomain:
        both = union(self.D, self.D0)
        return difference(both, both)

    def min_grid_size(self) -> int:
        """Smallest even N that resolves |F(f + f0)|^2, f and f0 exactly."""
        extent = max(self.autocorrelation_support.extent(), union(self.D, self.D0).extent())
        return min_grid_size(extent)


# ---------------------------------------------------------------------------
# Sigma decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SigmaTerms:
    sigma1: LatticeField
    sigma2: LatticeField
    sigma3: LatticeField
    sigma4: LatticeField

    @property
    def total(self) -> LatticeField:
        return self.sigma1 + self.sigma2 + self.sigma3 + self.sigma4


def _cross(a: LatticeField, b: LatticeField) -> LatticeField:
    return convolve(a, reflect_conjugate(b)) * TWO_PI ** (-a.dim / 2)


def sigma_decompose(
    f: LatticeField,
    f0: LatticeField,
    D: SupportDomain | None = None,
    D0: SupportDomain | None = None,
) -> SigmaTerms:
    """The four cross-correlation pieces of the autocorrelation of f + f0.

    With D and D0 given, the support of each piece is checked against its
    bound and a GeometryError names the first violation.
    """
    terms = SigmaTerms(_cross(f, f), _cross(f0, f), _cross(f, f0), _cross(f0, f0))
    if D is None or D0 is None:
        return terms
    origin = (0,) * f.dim
    left, right = difference(D0, D), difference(D, D0)
    bounds = (
        ("sigma1", terms.sigma1, lambda x: math.dist(x, origin) <= diam(D) + 1e-9),
        ("sigma2", terms.sigma2, lambda x: x in left),
        ("sigma3", terms.sigma3, lambda x: x in right),
        ("sigma4", terms.sigma4, lambda x: math.dist(x, origin) <= diam(D0) + 1e-9),
    )
    for name, term, inside in bounds:
        outside = [x for x in term.support if not inside(x)]
        if outside:
            raise GeometryError(f"{name} has support outside its bound, e.g. at {outside[0]}")
    return terms


def background_cross_term(u: LatticeField, f0: LatticeField, geom: SupportGeometry) -> LatticeField:
    """q = chi_{D - D0} (u - (2 pi)^{-d/2} f0 * f0~)."""
    return window(u - autocorrelation(f0), geom.cross_window)


# ---------------------------------------------------------------------------
# Fourier retrieval
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RetrievalReport:
    field: LatticeField
    cross_term: LatticeField
    skipped_nodes: int
    total_nodes: int
    grid_size: int
    convention: Convention

    def as_dict(self) -> dict[str, float | int | str]:
        return {
            "skipped_nodes": self.skipped_nodes,
            "total_nodes": self.total_nodes,
            "grid_size": self.grid_size,
            "convention": self.convention,
        }


def _check_spectrum(s: TorusSpectrum, geom: SupportGeometry, name: str) -> None:
    if s.dim != geom.dim:
        raise ConfigurationError(f"{name} has dim {s.dim}, geometry dim {geom.dim}", field=name)
    need = geom.min_grid_size()
    if s.grid_size < need:
        raise UnderResolutionError(
            f"{name} grid {s.grid_size} cannot resolve the autocorrelation (need >= {need})",
            field=name,
        )


def retrieve_source_detailed(
    intensity_sum: TorusSpectrum,
    intensity_f: TorusSpectrum | None,
    f0: LatticeField,
    geom: SupportGeometry,
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD,
) -> RetrievalReport:
    """Recover f on D from |F(f + f0)|^2 (and |F f|^2 in disjoint mode)."""
    if f0.is_zero():
        raise ConfigurationError("background source must not vanish", field="background")
    if f0.dim != geom.dim:
        raise ConfigurationError(f"background has dim {f0.dim}, geometry dim {geom.dim}")
    if geom.mode == "disjoint" and intensity_f is None:
        raise ConfigurationError("disjoint mode needs the intensity of f alone", field="intensity_f")
    _check_spectrum(intensity_sum, geom, "intensity_sum")
    if intensity_f is not None:
        _check_spectrum(intensity_f, geom, "intensity_f")
        if (intensity_f.grid_size, intensity_f.convention) != (
            intensity_sum.grid_size,
            intensity_sum.convention,
        ):
            raise ConfigurationError("intensities must share one grid", field="intensity_f")

    n, conv = intensity_sum.grid_size, intensity_sum.convention
    u = idft(intensity_sum, geom.cross_window)
    if intensity_f is not None:
        u = u - idft(intensity_f, geom.cross_window)
    q = background_cross_term(u, f0, geom)

    fq = dft(q, n, conv).values.reshape(-1)
    f0_hat = dft(f0, n, conv).values.reshape(-1)
    valid = np.abs(f0_hat) >= zero_threshold
    skipped = int((~valid).sum())
    if skipped > MAX_SKIPPED_FRACTION * len(valid):
        raise BackgroundDegeneracyError(skipped, len(valid))

    f_hat = np.zeros_like(fq)
    f_hat[valid] = fq[valid] / np.conj(f0_hat[valid])
    if skipped == 0:
        f = idft(TorusSpectrum(geom.dim, n, f_hat, conv), geom.D)
    else:
        logger.warning("background spectrum vanishes at %d grid nodes; fitting on the rest", skipped)
        nodes = TorusSpectrum(geom.dim, n, f_hat, conv).nodes()[valid]
        design = fourier_matrix(nodes, geom.D.as_array())
        coeffs, *_ = scipy.linalg.lstsq(design, f_hat[valid])
        f = LatticeField.from_vector(geom.D, coeffs)
    logger.info("retrieval on %d^%d grid, %d nodes skipped", n, geom.dim, skipped)
    return RetrievalReport(f, q, skipped, len(valid), n, conv)


def retrieve_source(
    intensity_sum: TorusSpectrum,
    intensity_f: TorusSpectrum | None,
    f0: LatticeField,
    geom: SupportGeometry,
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD,
) -> LatticeField:
    return retrieve_source_detailed(intensity_sum, intensity_f, f0, geom, zero_threshold).field


# ---------------------------------------------------------------------------
# From far-field intensities to spectral samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IntensityDataset:
    """|a|^2 measured on a window with one branch sign."""

    window: SpectralWindow
    values: np.ndarray
    sign: Sign = "minus"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(values) != len(self.window):
            raise WindowMismatchError(f"{len(values)} intensities for a window of {len(self.window)}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sign", parse_sign(self.sign))


@dataclass(frozen=True, eq=False)
class SpectralSamples:
    """Values of |F g|^2 at scattered torus points."""

    points: np.ndarray  # (S, d)
    values: np.ndarray  # (S,)

    def concat(self, other: SpectralSamples) -> SpectralSamples:
        return SpectralSamples(
            np.vstack([self.points, other.points]), np.concatenate([self.values, other.values])
        )

    def __len__(self) -> int:
        return len(self.values)


def intensity_from_farfield(dataset: IntensityDataset) -> SpectralSamples:
    """|F f(kappa(+-omega))|^2 = |a|^2 |K| |grad phi|^2 / (2 pi)."""
    geo = window_geometry(dataset.window, dataset.sign)
    values = dataset.values * np.abs(geo.curvatures) * geo.grad_norms**2 / TWO_PI
    return SpectralSamples(geo.points, values)


# ---------------------------------------------------------------------------
# Autocorrelation fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitReport:
    sigma_min: float
    sigma_max: float
    n_samples: int
    n_unknowns: int

    def as_dict(self) -> dict[str, float | int]:
        return {
            "fit_sigma_min": self.sigma_min,
            "fit_sigma_max": self.sigma_max,
            "fit_samples": self.n_samples,
            "fit_unknowns": self.n_unknowns,
        }


def fit_autocorrelation(
    samples: SpectralSamples,
    support: SupportDomain,
    grid_size: int,
    convention: Convention = "centered_at_O",
) -> tuple[TorusSpectrum, FitReport]:
    """Fit sum_z c_z exp(-i p.z) over z in ``support`` and sample it on a grid.

    Returns the real part of the fitted polynomial on the grid, which is
    the Hermitian projection for a support symmetric under z -> -z.
    """
    freqs = support.as_array()
    design = np.exp(-1j * (samples.points @ freqs.T))
    sv = scipy.linalg.svdvals(design) if len(samples) else np.zeros(0)
    sigma_max = float(sv[0]) if len(sv) else 0.0
    sigma_min = float(sv[-1]) if len(sv) >= len(freqs) else 0.0
    report = FitReport(sigma_min, sigma_max, len(samples), len(freqs))
    if sigma_min <= FIT_RANK_RTOL * sigma_max or sigma_max == 0.0:
        raise InsufficientCoverageError(sigma_min, sigma_max, len(samples), len(freqs))
    coeffs, *_ = scipy.linalg.lstsq(design, samples.values.astype(complex))
    poly = LatticeField.from_vector(support, coeffs)
    # dft carries (2 pi)^{-d/2}; the fitted polynomial does not
    values = dft(poly, grid_size, convention).values * TWO_PI ** (support.dim / 2)
    logger.info(
        "autocorrelation fit: %d samples, %d coefficients, sigma_min %.3e",
        len(samples),
        len(freqs),
        sigma_min,
    )
    return TorusSpectrum(support.dim, grid_size, values.real, convention), report


def _samples_from(datasets: Sequence[IntensityDataset]) -> SpectralSamples:
    if not datasets:
        raise ConfigurationError("no intensity data supplied", field="intensity")
    out = intensity_from_farfield(datasets[0])
    for ds in datasets[1:]:
        out = out.concat(intensity_from_farfield(ds))
    return out


@dataclass(frozen=True, eq=False)
class PhaselessReport:
    sum_fit: FitReport
    source_fit: FitReport | None
    retrieval: RetrievalReport

    def as_dict(self) -> dict[str, float | int | str]:
        out: dict[str, float | int | str] = dict(self.sum_fit.as_dict())
        if self.source_fit is not None:
            out.update({f"source_{k}": v for k, v in self.source_fit.as_dict().items()})
        out.update(self.retrieval.as_dict())
        return out


def reconstruct_from_spectral_samples(
    sum_samples: SpectralSamples,
    source_samples: SpectralSamples | None,
    f0: LatticeField,
    geom: SupportGeometry,
    fit_grid: int | None = None,
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD,
    convention: Convention = "centered_at_O",
) -> tuple[LatticeField, PhaselessReport]:
    """Fit the intensity polynomials from scattered samples, then retrieve f."""
    n = fit_grid or geom.min_grid_size()
    sum_spec, sum_fit = fit_autocorrelation(sum_samples, geom.autocorrelation_support, n, convention)
    source_spec = source_fit = None
    if source_samples is not None:
        source_spec, source_fit = fit_autocorrelation(
            source_samples, difference(geom.D, geom.D), n, convention
        )
    retrieval = retrieve_source_detailed(sum_spec, source_spec, f0, geom, zero_threshold)
    return retrieval.field, PhaselessReport(sum_fit, source_fit, retrieval)


def phaseless_farfield_reconstruct(
    intensity_a1: Sequence[IntensityDataset],
    intensity_a: Sequence[IntensityDataset] | None,
    f0: LatticeField,
    geom: SupportGeometry,
    fit_grid: int | None = None,
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD,
) -> tuple[LatticeField, PhaselessReport]:
    """Recover f from far-field intensities of f + f0 (and of f in disjoint mode).

    Each dataset contributes the band its window covers; pass both branch
    signs to sample kappa(omega) and kappa(-omega).
    """
    if geom.mode == "disjoint" and not intensity_a:
        raise ConfigurationError("disjoint mode needs the intensity of f alone", field="intensity_a")
    sum_samples = _samples_from(intensity_a1)
    source_samples = _samples_from(intensity_a) if intensity_a else None
    return reconstruct_from_spectral_samples(
        sum_samples, source_samples, f0, geom, fit_grid, zero_threshold
    )
