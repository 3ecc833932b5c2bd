"""
Inverse scattering in the Born approximation.

A plane wave psi0(x) = exp(i k.x) with k on Gamma(lambda) hits a finitely
supported potential v. The scattered part solves

  (Delta + v) psi_sc - lambda psi_sc = -v psi0

and radiates with amplitude A(k, omega). Dropping v psi_sc gives the Born
amplitude

  A(k, omega) = -sqrt(2 pi) F v(kappa(-omega) - k) exp(-i (sigma + 2) pi / 4)
                / (sqrt|K(omega)| |grad phi(kappa(omega))|),

which is linear in v and samples F v on the transfer band
B(lambda) = {kappa - k}. Everything downstream (least squares, stability,
phaseless retrieval) reuses the source-problem machinery with
p = kappa(-omega) - k in place of kappa(-omega).

lippmann_schwinger_solve iterates psi_sc <- R^-(-v (psi0 + psi_sc)) on
supp v; its first iterate is the Born field exactly, so the gap between the
converged and the one-step amplitude measures the Born error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._dispersion import LEVEL_TOL, SpectralParam, kappa, phi, validate_lambda
from ._errors import ConfigurationError, NumericalError
from ._forward import (
    ResolventConfig,
    ResolventSolution,
    amplitude_factor,
    far_field,
    green_function,
    resolvent_apply,
)
from ._inverse_source import ReconstructionReport, SamplingOperator, solve_with_report
from ._lattice import TWO_PI, LatticeField, SupportDomain, fourier_matrix, neighbor_sum, unit_shell
from ._phase_retrieval import (
    DEFAULT_ZERO_THRESHOLD,
    PhaselessReport,
    SpectralSamples,
    SupportGeometry,
    reconstruct_from_spectral_samples,
)

logger = logging.getLogger(__name__)

DIVERGENCE_STEPS = 3


# ---------------------------------------------------------------------------
# Error types
# ---------------------------------------------------------------------------


class OffSurfaceError(ConfigurationError):
    """An incident wave vector does not lie on Gamma(lambda)."""


class ContractionError(NumericalError):
    """The Lippmann-Schwinger fixed-point iteration did not contract."""

    def __init__(self, potential_norm: float, iteration: int, increments: Sequence[float]):
        self.potential_norm = potential_norm
        self.iteration = iteration
        self.increments = list(increments)
        tail = ", ".join(f"{x:.3e}" for x in self.increments[-4:])
        super().__init__(
            f"Lippmann-Schwinger iteration failed to contract at step {iteration} "
            f"(||v|| = {potential_norm:.3e}; last increments {tail}); the potential is too strong "
            "for the Born series"
        )


# ---------------------------------------------------------------------------
# Incident waves and samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IncidentWave:
    k: np.ndarray
    sp: SpectralParam

    def __post_init__(self) -> None:
        k = np.asarray(self.k, dtype=float).reshape(-1)
        if k.shape != (self.sp.dim,):
            raise OffSurfaceError(f"wave vector {k.tolist()} does not have {self.sp.dim} components")
        residual = abs(phi(k) - self.sp.lam)
        if residual > LEVEL_TOL:
            raise OffSurfaceError(
                f"wave vector {k.tolist()} is off Gamma({self.sp.lam}): |phi(k) - lambda| = {residual:.3e}",
                field="k",
            )
        object.__setattr__(self, "k", k)

    @classmethod
    def from_direction(cls, theta: Sequence[float], sp: SpectralParam) -> IncidentWave:
        """The wave whose vector is kappa(theta, lambda)."""
        return cls(np.array(kappa(theta, sp).kappa), sp)

    def on(self, points: np.ndarray) -> np.ndarray:
        """psi0 = exp(i k.x) at lattice points (M, d)."""
        return np.exp(1j * (np.asarray(points, dtype=float) @ self.k))


@dataclass(frozen=True)
class ScatteringSample:
    k: tuple[float, ...]
    omega: tuple[float, ...]
    lam: float
    value: complex


def _born_geometry(
    ks: np.ndarray, omegas: np.ndarray, params: Sequence[SpectralParam]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Transfer points p = kappa(-omega) - k, Born factors, |K| and |grad phi|."""
    points, factors, curv, grads = [], [], [], []
    for k, omega, sp in zip(ks, omegas, params):
        gp = kappa(omega, sp)
        points.append(kappa(-gp.omega, sp).kappa - k)
        factors.append(-amplitude_factor(gp, "minus", sp.dim))
        curv.append(abs(gp.curvature))
        grads.append(gp.grad_norm)
    return np.array(points), np.array(factors), np.array(curv), np.array(grads)


def _born_values(v: LatticeField, points: np.ndarray, factors: np.ndarray) -> np.ndarray:
    if v.is_zero():
        return np.zeros(len(points), dtype=complex)
    return factors * (fourier_matrix(points, v.points) * v.values).sum(axis=-1)


def born_amplitude(v: LatticeField, inc: IncidentWave, omega: Sequence[float]) -> complex:
    """Born approximation A(k, omega) of the scattering amplitude."""
    points, factors, _, _ = _born_geometry(inc.k[None, :], np.atleast_2d(omega), [inc.sp])
    return complex(_born_values(v, points, factors)[0])


def scattering_samples(
    v: LatticeField,
    incident: Sequence[IncidentWave],
    omegas: Sequence[Sequence[float]] | np.ndarray,
) -> list[ScatteringSample]:
    """Born amplitudes for every (incident wave, omega) pair, incident-major."""
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    ks = np.array([inc.k for inc in incident for _ in omegas])
    dirs = np.tile(omegas, (len(incident), 1))
    params = [inc.sp for inc in incident for _ in omegas]
    points, factors, _, _ = _born_geometry(ks, dirs, params)
    values = _born_values(v, points, factors)
    return [
        ScatteringSample(tuple(map(float, k)), tuple(map(float, w)), sp.lam, complex(a))
        for k, w, sp, a in zip(ks, dirs, params, values)
    ]


# ---------------------------------------------------------------------------
# Lippmann-Schwinger
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScatteringSolution:
    """Scattered field on supp v and the source that generated it."""

    incident: IncidentWave
    points: np.ndarray  # supp v, (M, d)
    psi_sc: np.ndarray  # (M,)
    source: LatticeField  # -v (psi0 + previous iterate)
    iterations: int
    increments: tuple[float, ...]
    window: ResolventSolution | None = None

    @property
    def field(self) -> LatticeField:
        return LatticeField.from_arrays(self.incident.sp.dim, self.points, self.psi_sc)

    def amplitude(self, omega: Sequence[float]) -> complex:
        """Scattering amplitude A(k, omega) of the computed field."""
        return far_field(self.source, omega, self.incident.sp, "minus")


def lippmann_schwinger_solve(
    v: LatticeField,
    inc: IncidentWave,
    cfg: ResolventConfig | None = None,
    tol: float = 1e-12,
    max_iter: int = 200,
    iterations: int | None = None,
    window: Sequence[Sequence[int]] | None = None,
) -> ScatteringSolution:
    """Fixed-point solution of psi_sc = R^-(-v (psi0 + psi_sc)).

    With ``iterations`` set, exactly that many steps are taken and no
    convergence is required; ``iterations=1`` reproduces the Born field.
    """
    sp = inc.sp
    if v.dim != sp.dim:
        raise ConfigurationError(f"potential has dim {v.dim}, wave dim {sp.dim}")
    pts = v.points
    if v.is_zero():
        empty = np.zeros(0, dtype=complex)
        return ScatteringSolution(inc, pts, empty, LatticeField.zero(sp.dim), 0, ())

    offsets = (pts[:, None, :] - pts[None, :, :]).reshape(-1, sp.dim)
    green, _ = green_function(offsets, sp, "minus", cfg)
    green = green.reshape(len(pts), len(pts))
    psi0 = inc.on(pts)
    pot = v.values
    norm_v = v.norm()

    previous = np.zeros(len(pts), dtype=complex)
    increments: list[float] = []
    step = 0
    while True:
        step += 1
        source = -pot * (psi0 + previous)
        current = green @ source
        increments.append(float(np.linalg.norm(current - previous)))
        previous = current
        logger.debug("lippmann-schwinger step %d: increment %.3e", step, increments[-1])
        if iterations is not None:
            if step >= iterations:
                break
            continue
        if increments[-1] <= tol:
            break
        growing = len(increments) > DIVERGENCE_STEPS and all(
            later > earlier
            for earlier, later in zip(increments[-DIVERGENCE_STEPS - 1 :], increments[-DIVERGENCE_STEPS:])
        )
        if growing or step >= max_iter:
            raise ContractionError(norm_v, step, increments)

    src_field = LatticeField.from_arrays(sp.dim, pts, source)
    window_solution = None
    if window is not None:
        window_solution = resolvent_apply(src_field, sp, "minus", cfg, window)
    logger.info("lippmann-schwinger: %d steps, last increment %.3e", step, increments[-1])
    return ScatteringSolution(inc, pts, current, src_field, step, tuple(increments), window_solution)


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


def born_operator(
    samples: Sequence[ScatteringSample],
    domain: SupportDomain,
    weights: Sequence[float] | None = None,
) -> SamplingOperator:
    """Weighted linear map v|_D -> Born amplitudes at the sample positions."""
    if domain.dim < 2:
        raise ConfigurationError("Born inversion needs d >= 2", field="dim")
    if not samples:
        raise ConfigurationError("no scattering samples", field="samples")
    params = [validate_lambda(s.lam, domain.dim) for s in samples]
    ks = np.array([s.k for s in samples], dtype=float)
    omegas = np.array([s.omega for s in samples], dtype=float)
    points, factors, _, _ = _born_geometry(ks, omegas, params)
    rows = factors[:, None] * fourier_matrix(points, domain.as_array())
    w = np.full(len(samples), 1.0 / len(samples)) if weights is None else np.asarray(weights, float)
    op = SamplingOperator.from_rows(rows, domain, w, "minus")
    logger.info(
        "born operator: %d samples x %d unknowns, sigma in [%.3e, %.3e]",
        len(samples),
        len(domain),
        op.sigma_min,
        op.sigma_max,
    )
    return op


def born_reconstruct(
    samples: Sequence[ScatteringSample],
    domain: SupportDomain,
    weights: Sequence[float] | None = None,
    operator: SamplingOperator | None = None,
    strict: bool = True,
) -> tuple[LatticeField, ReconstructionReport]:
    """Least-squares potential on ``domain`` from Born amplitudes.

    Samples may mix spectral parameters.
    """
    op = operator or born_operator(samples, domain, weights)
    data = np.array([s.value for s in samples], dtype=complex)
    return solve_with_report(op, data, strict=strict)


def born_nonuniqueness(
    u: LatticeField,
    k_list: Sequence[IncidentWave | Sequence[float]],
    sp: SpectralParam | None = None,
) -> LatticeField:
    """v = prod_j (L_{k_j} - lambda_j) u, invisible to Born data at each k_j.

    L_k u(x) = sum_e exp(i k.e) u(x + e). Entries may be IncidentWave
    objects with their own lambda, or raw vectors checked against ``sp``.
    """
    shell = unit_shell(u.dim).astype(float)
    v = u
    for item in k_list:
        if isinstance(item, IncidentWave):
            inc = item
        elif sp is None:
            raise ConfigurationError("raw wave vectors need a spectral parameter", field="sp")
        else:
            inc = IncidentWave(np.asarray(item, dtype=float), sp)
        v = neighbor_sum(v, np.exp(1j * (shell @ inc.k))) - v * inc.sp.lam
    return v


# ---------------------------------------------------------------------------
# Phaseless
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScatteringIntensity:
    """|A(k, omega)|^2 at a list of (k, omega, lambda) triples."""

    ks: np.ndarray
    omegas: np.ndarray
    lambdas: np.ndarray
    values: np.ndarray

    @classmethod
    def from_samples(cls, samples: Sequence[ScatteringSample]) -> ScatteringIntensity:
        return cls(
            np.array([s.k for s in samples], dtype=float),
            np.array([s.omega for s in samples], dtype=float),
            np.array([s.lam for s in samples], dtype=float),
            np.array([abs(s.value) ** 2 for s in samples]),
        )

    def spectral_samples(self) -> SpectralSamples:
        """|F v(p)|^2 = |A|^2 |K| |grad phi|^2 / (2 pi) at p = kappa(-omega) - k."""
        dim = self.ks.shape[1]
        params = [validate_lambda(lam, dim) for lam in self.lambdas]
        points, _, curv, grads = _born_geometry(self.ks, self.omegas, params)
        return SpectralSamples(points, self.values * curv * grads**2 / TWO_PI)


def born_phaseless_reconstruct(
    intensity_A1: ScatteringIntensity,
    intensity_A: ScatteringIntensity | None,
    v0: LatticeField,
    geom: SupportGeometry,
    fit_grid: int | None = None,
    zero_threshold: float = DEFAULT_ZERO_THRESHOLD,
) -> tuple[LatticeField, PhaselessReport]:
    """Recover v from |A|^2 of v + v0 (and of v alone in disjoint mode)."""
    if geom.mode == "disjoint" and intensity_A is None:
        raise ConfigurationError("disjoint mode needs the intensity of v alone", field="intensity_A")
    return reconstruct_from_spectral_samples(
        intensity_A1.spectral_samples(),
        intensity_A.spectral_samples() if intensity_A is not None else None,
        v0,
        geom,
        fit_grid,
        zero_threshold,
    )
