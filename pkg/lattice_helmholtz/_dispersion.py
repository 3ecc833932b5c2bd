"""
Dispersion-surface geometry of the discrete Laplacian.

The symbol of Delta on Z^d is phi(k) = 2 sum_i cos k_i. For a spectral
parameter lambda in the convex band 2d - 4 < |lambda| < 2d the level set
Gamma(lambda) = {phi = lambda} is a smooth, strictly convex closed surface
in the torus, surrounding O = (0,...,0) when lambda > 0 and
O_pi = (pi,...,pi) when lambda < 0. Its Gauss map is therefore invertible:

  kappa(omega, lambda)  the point of Gamma whose outward unit normal is omega
  mu(omega, lambda)     kappa . omega
  K(omega, lambda)      Gaussian curvature of Gamma at kappa

The normal used throughout is grad phi / |grad phi|.

kappa is found by damped Newton on the bordered system

  grad phi(k) - t omega = 0,   phi(k) - lambda = 0

in the unknowns (k, t), started from the best-aligned point of a bundle of
ray / level-set intersections computed by vectorized bisection. Results
are memoized on (omega, lambda).

For lambda < 0, kappa is reported in the cube [0, 2 pi)^d and obtained
from kappa_lambda(omega) = O_pi + kappa_{-lambda}(-omega).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from ._errors import ConfigurationError, NumericalError
from ._lattice import SUPPORTED_DIMS, Convention

logger = logging.getLogger(__name__)

Band = Literal["positive_branch", "negative_branch"]

LEVEL_TOL = 1e-12
NORMAL_TOL = 1e-10
DIRECTION_TOL = 1e-14
MAX_NEWTON_STEPS = 60
CURVATURE_FLOOR = 1e-10
_BISECTION_STEPS = 40
_KAPPA_CACHE_SIZE = 1 << 16


# ---------------------------------------------------------------------------
# Error types
# ---------------------------------------------------------------------------


class SpectralParameterError(ConfigurationError):
    """lambda lies outside the convex band or in the exceptional set S0."""

    def __init__(self, lam: float, dim: int, condition: str):
        self.lam = lam
        self.dim = dim
        self.condition = condition
        super().__init__(f"lambda={lam} rejected for d={dim}: {condition}", field="lambda")


class DirectionError(ConfigurationError):
    """A direction is not a unit vector of the right dimension."""


class KappaConvergenceError(NumericalError):
    """The Gauss-map inversion did not meet its residual tolerances."""

    def __init__(self, omega: np.ndarray, lam: float, level_residual: float, normal_residual: float):
        self.omega = omega
        self.lam = lam
        self.level_residual = level_residual
        self.normal_residual = normal_residual
        super().__init__(
            f"kappa(omega={np.round(omega, 12).tolist()}, lambda={lam}) did not converge: "
            f"|phi-lambda|={level_residual:.3e}, normal residual={normal_residual:.3e}"
        )


class CurvatureDegeneracyError(NumericalError):
    """Gaussian curvature vanished numerically (the surface is leaving the convex band)."""


# ---------------------------------------------------------------------------
# Symbol
# ---------------------------------------------------------------------------


def phi(k: np.ndarray) -> np.ndarray | float:
    """phi(k) = 2 sum_i cos k_i along the last axis."""
    out = 2.0 * np.cos(np.asarray(k, dtype=float)).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def grad_phi(k: np.ndarray) -> np.ndarray:
    return -2.0 * np.sin(np.asarray(k, dtype=float))


def hessian_phi(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return (-2.0 * np.cos(k))[..., None] * np.eye(k.shape[-1])


# ---------------------------------------------------------------------------
# Spectral parameter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralParam:
    lam: float
    dim: int
    band: Band

    @property
    def convention(self) -> Convention:
        return convention_for(self.lam)

    @property
    def sigma(self) -> int:
        """Signature exponent d - 1 of the far-field phase."""
        return self.dim - 1


def convention_for(lam: float) -> Convention:
    # lambda = 0 is only in the band for d = 1; it takes the branch centered at O
    return "centered_at_O" if lam >= 0 else "centered_at_Opi"


def exceptional_values(dim: int) -> tuple[float, ...]:
    """The exceptional set S0 intersected with [-2d, 2d]."""
    # integers n with 2n <= d
    ns = range(0, dim // 2 + 1)
    base = [4 * n for n in ns] if dim % 2 == 0 else [2 * (2 * n + 1) for n in ns]
    return tuple(sorted({float(s * b) for b in base for s in (1, -1)}))


def validate_lambda(lam: float, dim: int) -> SpectralParam:
    """Accept lambda iff it lies in the convex band and outside S0."""
    if dim not in SUPPORTED_DIMS:
        raise ConfigurationError(f"dimension must be one of {SUPPORTED_DIMS}, got {dim}", field="dim")
    lam = float(lam)
    if not math.isfinite(lam):
        raise SpectralParameterError(lam, dim, "lambda must be finite")
    if lam in exceptional_values(dim):
        parity = "even" if dim % 2 == 0 else "odd"
        raise SpectralParameterError(
            lam, dim, f"lambda lies in the exceptional set S0 = {exceptional_values(dim)} (d {parity})"
        )
    lo, hi = 2 * dim - 4, 2 * dim
    if not lo < abs(lam) < hi:
        raise SpectralParameterError(
            lam, dim, f"|lambda| must satisfy {lo} < |lambda| < {hi} (convex band)"
        )
    return SpectralParam(lam, dim, "positive_branch" if lam >= 0 else "negative_branch")


def band_margin(sp: SpectralParam) -> float:
    """Distance from |lambda| to the nearest edge of the convex band."""
    return min(abs(sp.lam) - (2 * sp.dim - 4), 2 * sp.dim - abs(sp.lam))


# ---------------------------------------------------------------------------
# Directions
# ---------------------------------------------------------------------------


def as_direction(omega: Iterable[float], dim: int) -> np.ndarray:
    """Validate a unit direction of the given dimension."""
    w = np.asarray(omega, dtype=float).reshape(-1)
    if w.shape != (dim,):
        raise DirectionError(f"direction {w.tolist()} does not have {dim} components")
    if abs(np.linalg.norm(w) - 1.0) > DIRECTION_TOL:
        raise DirectionError(f"direction {w.tolist()} is not a unit vector")
    return w


def normalize(omega: Iterable[float]) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    n = np.linalg.norm(w, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise DirectionError("zero vector has no direction")
    return w / n


# ---------------------------------------------------------------------------
# Curvature
# ---------------------------------------------------------------------------


def implicit_gauss_curvature(grad: np.ndarray, hess: np.ndarray) -> float:
    """Gaussian curvature of {F = c} from grad F and the Hessian of F.

    K = -det([[H, g], [g^T, 0]]) / |g|^{d+1}. The sign is positive where the
    surface curves away from the side into which F increases; a level set
    of a function that grows outward from a convex body has K > 0.
    """
    grad = np.asarray(grad, dtype=float)
    d = grad.shape[0]
    if d == 1:
        return 1.0
    bordered = np.zeros((d + 1, d + 1))
    bordered[:d, :d] = hess
    bordered[:d, d] = grad
    bordered[d, :d] = grad
    return float(-np.linalg.det(bordered) / np.linalg.norm(grad) ** (d + 1))


# ---------------------------------------------------------------------------
# Gauss-map inverse
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GammaPoint:
    """A point of Gamma(lambda) with the quantities the far field needs."""

    omega: np.ndarray
    lam: float
    kappa: np.ndarray
    grad_norm: float
    curvature: float
    mu: float


@lru_cache(maxsize=4)
def _ray_bundle(dim: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        theta = 2 * np.pi * np.arange(64) / 64
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    n = 512
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    r = np.sqrt(1 - z * z)
    a = np.pi * (1 + 5**0.5) * i
    return np.stack([r * np.cos(a), r * np.sin(a), z], axis=1)


def _ray_hits(rays: np.ndarray, lam: float) -> np.ndarray:
    """Points s * r with phi(s r) = lam, one per ray, by bisection.

    phi decreases along every ray from O until the first coordinate reaches
    pi, where phi <= 2d - 4 < lam.
    """
    lo = np.zeros(len(rays))
    hi = np.pi / np.abs(rays).max(axis=1)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        above = phi(mid[:, None] * rays) > lam
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)[:, None] * rays


def _initial_guess(w: np.ndarray, lam: float) -> np.ndarray:
    rays = np.vstack([_ray_bundle(len(w)), w[None, :]])
    hits = _ray_hits(rays, lam)
    normals = grad_phi(hits)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    best = hits[np.argmax(normals @ w)]
    # polish the ray parameter along the chosen ray with a bracketing solver
    norm = np.linalg.norm(best)
    ray = best / norm
    s_max = np.pi / np.abs(ray).max()
    s = brentq(lambda s: phi(s * ray) - lam, 0.0, s_max, xtol=1e-15)
    return s * ray


def _newton(w: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    d = len(w)
    k = _initial_guess(w, lam)
    g = grad_phi(k)
    t = float(np.linalg.norm(g))

    def residual(k: np.ndarray, t: float) -> np.ndarray:
        return np.append(grad_phi(k) - t * w, phi(k) - lam)

    res = residual(k, t)
    for step in range(MAX_NEWTON_STEPS):
        size = np.linalg.norm(res)
        logger.debug("kappa newton step %d: |F|=%.3e", step, size)
        if size < 1e-15:
            break
        jac = np.zeros((d + 1, d + 1))
        jac[:d, :d] = hessian_phi(k)
        jac[:d, d] = -w
        jac[d, :d] = grad_phi(k)
        delta = np.linalg.solve(jac, -res)
        alpha = 1.0
        while True:
            k_new = k + alpha * delta[:d]
            t_new = t + alpha * delta[d]
            res_new = residual(k_new, t_new)
            if np.linalg.norm(res_new) < (1 - 1e-4 * alpha) * size or alpha < 1e-3:
                break
            alpha *= 0.5
        k, t, res = k_new, t_new, res_new
        if np.linalg.norm(alpha * delta) < 1e-16 * (1 + np.linalg.norm(k)):
            break
    return k, t


def _wrap(k: np.ndarray, lower: float) -> np.ndarray:
    return (k - lower) % (2 * np.pi) + lower


@lru_cache(maxsize=_KAPPA_CACHE_SIZE)
def _kappa_cached(omega: tuple[float, ...], lam: float) -> GammaPoint:
    w = np.array(omega)
    if lam >= 0:
        k, _ = _newton(w, lam)
        k = _wrap(k, -np.pi)
    else:
        q, _ = _newton(-w, -lam)
        k = _wrap(np.pi + q, 0.0)

    g = grad_phi(k)
    grad_norm = float(np.linalg.norm(g))
    level = abs(phi(k) - lam)
    normal = float(np.linalg.norm(g / grad_norm - w)) if grad_norm > 0 else math.inf
    if level > LEVEL_TOL or normal > NORMAL_TOL:
        raise KappaConvergenceError(w, lam, level, normal)

    # orient so the function grows away from the enclosed center
    s = -1.0 if lam >= 0 else 1.0
    curvature = implicit_gauss_curvature(s * g, s * hessian_phi(k))
    if abs(curvature) < CURVATURE_FLOOR:
        raise CurvatureDegeneracyError(
            f"Gaussian curvature {curvature:.3e} at kappa={k.tolist()} (lambda={lam})"
        )
    k.setflags(write=False)
    w.setflags(write=False)
    return GammaPoint(w, lam, k, grad_norm, curvature, float(k @ w))


def kappa(omega: Iterable[float], sp: SpectralParam) -> GammaPoint:
    """The point of Gamma(lambda) whose outward unit normal is omega."""
    w = as_direction(omega, sp.dim)
    return _kappa_cached(tuple(float(c) for c in w), sp.lam)


def mu(omega: Iterable[float], sp: SpectralParam) -> float:
    return kappa(omega, sp).mu


def gauss_curvature(omega: Iterable[float], sp: SpectralParam) -> float:
    return kappa(omega, sp).curvature


def born_transfer_point(
    omega1: Iterable[float], omega2: Iterable[float], sp: SpectralParam
) -> np.ndarray:
    """kappa(omega1) - kappa(omega2), a point of the transfer band B(lambda)."""
    return kappa(omega1, sp).kappa - kappa(omega2, sp).kappa


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeometryRow:
    omega: tuple[float, ...]
    lam: float
    kappa: tuple[float, ...]
    mu: float
    grad_norm: float
    curvature: float
    level_residual: float
    normal_residual: float


def geometry_table(directions: Sequence[Sequence[float]], lambdas: Sequence[float]) -> list[GeometryRow]:
    """Gauss-map data over a direction x lambda grid, lambda-major order."""
    rows: list[GeometryRow] = []
    for lam in lambdas:
        for omega in directions:
            sp = validate_lambda(lam, len(omega))
            gp = kappa(omega, sp)
            g = grad_phi(gp.kappa)
            rows.append(
                GeometryRow(
                    omega=tuple(float(c) for c in gp.omega),
                    lam=sp.lam,
                    kappa=tuple(float(c) for c in gp.kappa),
                    mu=gp.mu,
                    grad_norm=gp.grad_norm,
                    curvature=gp.curvature,
                    level_residual=abs(phi(gp.kappa) - sp.lam),
                    normal_residual=float(np.linalg.norm(g / gp.grad_norm - gp.omega)),
                )
            )
    logger.info("geometry table: %d rows", len(rows))
    return rows
