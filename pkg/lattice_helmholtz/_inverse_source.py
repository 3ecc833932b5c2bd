"""
Phased inverse source problem.

A source supported in a known finite domain D is a vector of M = |D|
unknowns, and the far field on a window is a linear image of it:

  a(omega, lambda) = factor(omega, lambda) * (2 pi)^{-d/2} sum_x f(x) exp(-i kappa . x).

SamplingOperator holds that matrix with rows scaled by sqrt(weight), so its
Euclidean norm is the window's discrete L2 norm. Injectivity shows up as
sigma_min > 0, reconstruction is least squares through the SVD, and the
Lipschitz constant of the inverse is 1 / sigma_min.

Non-uniqueness runs the other way: f = prod_j (Delta - lambda_j) u has
F f = F u * prod_j (phi - lambda_j), which vanishes on every Gamma(lambda_j),
so the far field of f at those lambda is identically zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from ._dispersion import SpectralParam, validate_lambda
from ._errors import NumericalError
from ._forward import (
    FarFieldSample,
    Sign,
    far_field_batch,
    parse_sign,
    window_geometry,
)
from ._lattice import DimensionMismatchError, LatticeField, SupportDomain, fourier_matrix, laplacian_apply
from ._window import SpectralWindow, WindowMismatchError, direction_grid

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-12
SAMPLE_MATCH_TOL = 1e-12


# ---------------------------------------------------------------------------
# Error types
# ---------------------------------------------------------------------------


class IllPosedWindowError(NumericalError):
    """The sampling matrix is numerically rank deficient on the given domain."""

    def __init__(self, sigma_min: float, sigma_max: float, context: str = "window"):
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        super().__init__(
            f"{context} does not determine the source on this domain: "
            f"sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e} "
            f"(rank threshold {RANK_RTOL:.0e} * sigma_max)"
        )


# ---------------------------------------------------------------------------
# Sampling operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SamplingOperator:
    """Weighted linear map from values on D to far-field samples."""

    matrix: np.ndarray  # (S, M), rows already scaled by sqrt(weight)
    domain: SupportDomain
    weights: np.ndarray
    sign: Sign = "minus"
    window: SpectralWindow | None = None
    singular_values: np.ndarray = field(init=False)
    _left: np.ndarray = field(init=False, repr=False)
    _right: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.matrix.shape[1] != len(self.domain):
            raise DimensionMismatchError(
                f"{self.matrix.shape[1]} columns for a domain of {len(self.domain)} points"
            )
        left, sv, right_h = scipy.linalg.svd(self.matrix, full_matrices=False)
        object.__setattr__(self, "singular_values", sv)
        object.__setattr__(self, "_left", left)
        object.__setattr__(self, "_right", right_h.conj().T)

    @classmethod
    def from_rows(
        cls,
        rows: np.ndarray,
        domain: SupportDomain,
        weights: np.ndarray,
        sign: Sign = "minus",
        window: SpectralWindow | None = None,
    ) -> SamplingOperator:
        """Build from unweighted rows (one per sample)."""
        weights = np.asarray(weights, dtype=float)
        return cls(np.sqrt(weights)[:, None] * rows, domain, weights, sign, window)

    # -- spectrum -------------------------------------------------------------

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])

    @property
    def sigma_min(self) -> float:
        """Smallest of the M singular values (0 when there are fewer rows than columns)."""
        if len(self.singular_values) < len(self.domain):
            return 0.0
        return float(self.singular_values[-1])

    @property
    def rank(self) -> int:
        return int(np.sum(self.singular_values > RANK_RTOL * self.sigma_max))

    @property
    def condition_number(self) -> float:
        return self.sigma_max / self.sigma_min if self.sigma_min > 0 else float("inf")

    def is_injective(self) -> bool:
        return self.rank == len(self.domain)

    def extremal_pair(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit right/left singular vectors for sigma_min: A v = sigma_min u."""
        if not self.is_injective():
            raise IllPosedWindowError(self.sigma_min, self.sigma_max)
        return self._right[:, -1], self._left[:, -1]

    # -- maps -----------------------------------------------------------------

    def apply(self, f: LatticeField) -> np.ndarray:
        """Unweighted far-field samples of f (window order)."""
        weighted = self.matrix @ f.to_vector(self.domain)
        return weighted / np.sqrt(self.weights)

    def weighted_norm(self, data: np.ndarray) -> float:
        """Discrete L2 norm over the window."""
        return float(np.linalg.norm(np.sqrt(self.weights) * np.asarray(data)))

    def solve(self, data: np.ndarray, strict: bool = True) -> np.ndarray:
        """Minimum-norm least-squares solution of (unweighted) data.

        Singular values below RANK_RTOL * sigma_max are treated as zero; with
        ``strict`` any such truncation raises instead.
        """
        if strict and not self.is_injective():
            raise IllPosedWindowError(self.sigma_min, self.sigma_max)
        rhs = np.sqrt(self.weights) * np.asarray(data, dtype=complex)
        keep = self.singular_values > RANK_RTOL * self.sigma_max
        if not np.all(keep):
            logger.warning(
                "truncating %d of %d singular values", int((~keep).sum()), len(keep)
            )
        coeffs = (self._left[:, keep].conj().T @ rhs) / self.singular_values[keep]
        return self._right[:, keep] @ coeffs


def build_sampling_operator(
    domain: SupportDomain, window: SpectralWindow, sign: Sign = "minus"
) -> SamplingOperator:
    """The far-field sampling matrix of sources on ``domain``."""
    sign = parse_sign(sign)
    if domain.dim != window.dim:
        raise DimensionMismatchError(f"domain dim {domain.dim}, window dim {window.dim}")
    geo = window_geometry(window, sign)
    rows = geo.factors[:, None] * fourier_matrix(geo.points, domain.as_array())
    op = SamplingOperator.from_rows(rows, domain, window.weights, sign, window)
    logger.info(
        "sampling operator: %d samples x %d unknowns, sigma in [%.3e, %.3e]",
        len(window),
        len(domain),
        op.sigma_min,
        op.sigma_max,
    )
    return op


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReconstructionReport:
    sigma_min: float
    sigma_max: float
    cond: float
    residual: float
    rank: int

    def as_dict(self) -> dict[str, float]:
        return {
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "cond": self.cond,
            "residual": self.residual,
            "rank": self.rank,
        }


def _sample_values(samples: Sequence[FarFieldSample], window: SpectralWindow, sign: Sign) -> np.ndarray:
    if len(samples) != len(window):
        raise WindowMismatchError(f"{len(samples)} samples for a window of {len(window)}")
    for i, (s, omega, lam) in enumerate(zip(samples, window.directions, window.lambdas)):
        if (
            abs(s.lam - lam) > SAMPLE_MATCH_TOL
            or np.max(np.abs(np.asarray(s.omega) - omega)) > SAMPLE_MATCH_TOL
        ):
            raise WindowMismatchError(f"sample {i} is not at window position ({omega.tolist()}, {lam})")
        if parse_sign(s.sign) != sign:
            raise WindowMismatchError(f"sample {i} has sign {s.sign}, expected {sign}")
    return np.array([s.value for s in samples], dtype=complex)


def solve_with_report(
    op: SamplingOperator, data: np.ndarray, strict: bool = True
) -> tuple[LatticeField, ReconstructionReport]:
    """Least-squares source on op.domain plus diagnostics."""
    coeffs = op.solve(data, strict=strict)
    residual = op.weighted_norm(op.matrix @ coeffs / np.sqrt(op.weights) - data)
    report = ReconstructionReport(
        sigma_min=op.sigma_min,
        sigma_max=op.sigma_max,
        cond=op.condition_number,
        residual=residual,
        rank=op.rank,
    )
    logger.info("reconstruction: residual %.3e, cond %.3e", residual, report.cond)
    return LatticeField.from_vector(op.domain, coeffs), report


def reconstruct_phased(
    samples: Sequence[FarFieldSample],
    domain: SupportDomain,
    window: SpectralWindow,
    sign: Sign = "minus",
    operator: SamplingOperator | None = None,
    strict: bool = True,
) -> tuple[LatticeField, ReconstructionReport]:
    """Recover the source on ``domain`` from phased far-field samples."""
    sign = parse_sign(sign)
    data = _sample_values(samples, window, sign)
    op = operator or build_sampling_operator(domain, window, sign)
    return solve_with_report(op, data, strict=strict)


def stability_constant(op: SamplingOperator) -> float:
    """Smallest C with ||f2 - f1|| <= C ||T f2 - T f1|| in the window norm."""
    if op.sigma_min == 0.0 or not op.is_injective():
        raise IllPosedWindowError(op.sigma_min, op.sigma_max)
    return 1.0 / op.sigma_min


# ---------------------------------------------------------------------------
# Non-uniqueness
# ---------------------------------------------------------------------------


def nonuniqueness_source(u: LatticeField, lambdas: Sequence[float]) -> LatticeField:
    """f = prod_j (Delta - lambda_j) u, whose far field vanishes at each lambda_j."""
    f = u
    for lam in lambdas:
        validate_lambda(lam, u.dim)
        f = laplacian_apply(f) - f * lam
    return f


def _dataset(f: LatticeField, sp: SpectralParam, sign: Sign, n_dirs: int) -> np.ndarray:
    window = SpectralWindow.product(direction_grid(sp.dim, n_dirs), [sp.lam])
    return np.array([s.value for s in far_field_batch(f, window, sign)])


def vanishing_residual(
    f: LatticeField, sp: SpectralParam, sign: Sign = "minus", n_dirs: int = 256
) -> float:
    """max |a(omega, lambda)| over an n_dirs-point direction grid."""
    return float(np.abs(_dataset(f, sp, parse_sign(sign), n_dirs)).max())


def vanishing_derivative_residual(
    f: LatticeField,
    sp: SpectralParam,
    sign: Sign = "minus",
    n_dirs: int = 256,
    step: float = 1e-5,
) -> float:
    """max |d a / d lambda| over the direction grid, by central differences.

    Vanishes when lambda is a repeated root of the construction.
    """
    sign = parse_sign(sign)
    lo = validate_lambda(sp.lam - step, sp.dim)
    hi = validate_lambda(sp.lam + step, sp.dim)
    diff = (_dataset(f, hi, sign, n_dirs) - _dataset(f, lo, sign, n_dirs)) / (2 * step)
    return float(np.abs(diff).max())
