"""
Forward problem: limiting-absorption solutions and far-field amplitudes.

For a finitely supported source f the equation

  Delta psi - lambda psi = f

has the two radiating solutions psi^{+-} = lim_{eps -> 0} (Delta - nu)^{-1} f
with nu = lambda +- i eps. We compute them as

  psi(x) = sum_y f(y) G_nu(x - y),
  G_nu(x) = (2 pi)^{-d} int_{T^d} exp(i k.x) / (phi(k) - nu) dk.

One axis of the integral is done exactly: along the axis with the smallest
|x_i| the one-dimensional lattice resolvent is z^{|n|} / (z - 1/z) with
z + 1/z = w and |z| < 1. The remaining d - 1 axes use the periodic
trapezoidal rule. The eps -> 0 limit is taken by polynomial (Neville)
extrapolation over a decreasing eps schedule, and the spread of the last
two extrapolants is reported as the error estimate.

Far fields come from the closed-form amplitude

  a^{+-}(omega) = sqrt(2 pi) F f(kappa(+-omega)) exp(+-i (sigma + 2) pi / 4)
                  / (sqrt|K(omega)| |grad phi(kappa(omega))|),  sigma = d - 1,

with F f evaluated by exact summation at the off-grid point. The minus sign
(nu = lambda - i eps) is the outgoing solution and the default throughout.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from ._dispersion import GammaPoint, SpectralParam, kappa, normalize
from ._errors import ConfigurationError, NumericalError
from ._lattice import LatticeField, axis_nodes, fourier_matrix
from ._window import SpectralWindow

logger = logging.getLogger(__name__)

Sign = Literal["plus", "minus"]

OSCILLATION_NODES = 8  # quadrature nodes per oscillation of exp(i k.x)
OSCILLATION_PAD = 32
POLE_NODES = 64  # nodes per unit of 1/eps, resolves the smoothed pole
_CHUNK = 1 << 18
_STALL_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# Error types
# ---------------------------------------------------------------------------


class ResolventConfigError(ConfigurationError):
    """The quadrature grid or eps schedule cannot meet the resolution rules."""


class ResolventConvergenceError(NumericalError):
    """Successive eps values stopped approaching a limit."""

    def __init__(self, differences: np.ndarray, point_index: int):
        self.differences = differences
        self.point_index = point_index
        diffs = ", ".join(f"{d:.3e}" for d in differences)
        super().__init__(
            f"eps extrapolation is not converging at evaluation point {point_index}: "
            f"successive differences {diffs}"
        )


class NonLatticeDirectionError(ConfigurationError):
    """Asymptotic checks run along x / |x| for a nonzero lattice point x."""


# ---------------------------------------------------------------------------
# Signs
# ---------------------------------------------------------------------------

_SIGN_ALIASES = {"plus": "plus", "+": "plus", "minus": "minus", "-": "minus"}


def parse_sign(sign: str) -> Sign:
    try:
        return _SIGN_ALIASES[sign]  # type: ignore[return-value]
    except KeyError:
        raise ConfigurationError(f"sign must be plus or minus, got {sign!r}", field="sign") from None


def sign_value(sign: str) -> int:
    return 1 if parse_sign(sign) == "plus" else -1


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


# Default eps schedules by dimension. In d=3 the outer grid is two-dimensional,
# so eps_min is raised until POLE_NODES / eps_min squared fits under max_nodes.
DEFAULT_EPSILON_SCHEDULES: dict[int, tuple[float, ...]] = {
    1: (1e-3, 5e-4, 2.5e-4),
    2: (1e-3, 5e-4, 2.5e-4),
    3: (6e-2, 3e-2, 1.5e-2),
}


@dataclass(frozen=True)
class ResolventConfig:
    """Limiting-absorption quadrature settings."""

    epsilon_schedule: tuple[float, ...] | None = None  # None: DEFAULT_EPSILON_SCHEDULES[dim]
    grid_size: int | None = None  # None: sized from reach and eps
    extrapolation_order: int = 2
    max_nodes: int = 20_000_000  # cap on N^(d-1)

    def __post_init__(self) -> None:
        if self.epsilon_schedule is None:
            n_eps = min(len(s) for s in DEFAULT_EPSILON_SCHEDULES.values())
        else:
            eps = tuple(float(e) for e in self.epsilon_schedule)
            if not eps or any(e <= 0 for e in eps):
                raise ResolventConfigError("eps schedule must be nonempty and positive", field="epsilon_schedule")
            if any(b >= a for a, b in zip(eps, eps[1:])):
                raise ResolventConfigError("eps schedule must be strictly decreasing", field="epsilon_schedule")
            object.__setattr__(self, "epsilon_schedule", eps)
            n_eps = len(eps)
        if not 1 <= self.extrapolation_order <= max(1, n_eps - 1):
            raise ResolventConfigError(
                f"extrapolation order {self.extrapolation_order} needs more than "
                f"{n_eps} eps values",
                field="extrapolation_order",
            )
        if self.grid_size is not None and (self.grid_size < 4 or self.grid_size % 2):
            raise ResolventConfigError("grid size must be even and >= 4", field="grid_size")

    def schedule(self, dim: int) -> tuple[float, ...]:
        """The eps schedule used in dimension ``dim``."""
        if self.epsilon_schedule is not None:
            return self.epsilon_schedule
        return DEFAULT_EPSILON_SCHEDULES[dim]

    def quadrature_size(self, reach: float, dim: int = 2) -> int:
        """Nodes per axis for offsets up to Euclidean length ``reach``."""
        eps_min = min(self.schedule(dim))
        floor = OSCILLATION_NODES * math.ceil(reach) + OSCILLATION_PAD
        if self.grid_size is not None:
            if self.grid_size < floor:
                raise ResolventConfigError(
                    f"grid size {self.grid_size} is below the oscillation bound {floor} "
                    f"for offsets of length {reach:.1f}",
                    field="grid_size",
                )
            n = self.grid_size
        else:
            n = max(floor, math.ceil(POLE_NODES / eps_min))
            n += n % 2
        if n * eps_min / 2 < 30:
            logger.warning(
                "quadrature grid %d under-resolves eps=%.2e; trapezoidal error may dominate",
                n,
                eps_min,
            )
        return n


# ---------------------------------------------------------------------------
# Green's function
# ---------------------------------------------------------------------------


def _decaying_root(w: np.ndarray) -> np.ndarray:
    """Root of z + 1/z = w with |z| < 1 (w off the segment [-2, 2])."""
    s = np.sqrt(w * w - 4)
    zp = 0.5 * (w + s)
    zm = 0.5 * (w - s)
    return np.where(np.abs(zp) < np.abs(zm), zp, zm)


def chain_green(n: np.ndarray | int, w: np.ndarray | complex) -> np.ndarray:
    """((Delta_1 - w)^{-1} delta_0)(n) on the one-dimensional chain."""
    z = _decaying_root(np.asarray(w, dtype=complex))
    return z ** np.abs(n) / (z - 1 / z)


def _green_values(keys: np.ndarray, nu: complex, n_nodes: int) -> np.ndarray:
    """G_nu at canonical offsets (coordinates nonnegative, sorted descending)."""
    d = keys.shape[1]
    if d == 1:
        return chain_green(keys[:, 0], np.full(len(keys), nu))
    nodes = axis_nodes(n_nodes)
    outer_shape = (n_nodes,) * (d - 1)
    total = n_nodes ** (d - 1)
    inner = keys[:, -1]
    outer = keys[:, :-1]
    out = np.zeros(len(keys), dtype=complex)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total))
        ks = nodes[np.stack(np.unravel_index(idx, outer_shape), axis=1)]
        w = nu - 2.0 * np.cos(ks).sum(axis=1)
        z = _decaying_root(w)
        denom = z - 1 / z
        chains: dict[int, np.ndarray] = {}
        for j in range(len(keys)):
            b = int(inner[j])
            if b not in chains:
                chains[b] = z**b / denom
            # integrand is even in every outer k, so exp reduces to cos
            phase = np.cos(ks * outer[j]).prod(axis=1)
            out[j] += np.sum(phase * chains[b])
    return out / total


def richardson(
    values: np.ndarray, eps: Sequence[float], order: int
) -> tuple[np.ndarray, np.ndarray]:
    """Extrapolate rows of ``values`` (one row per eps) to eps = 0.

    Returns the extrapolant and |T[n, order] - T[n, order - 1]| as its error
    estimate. Raises ResolventConvergenceError when raw successive
    differences stop shrinking.
    """
    values = np.asarray(values, dtype=complex)
    n = len(eps)
    if n == 1:
        return values[0], np.full(values.shape[1:], np.inf)
    order = min(order, n - 1)

    steps = np.abs(np.diff(values, axis=0))
    if n >= 3:
        scale = _STALL_FLOOR * (1 + np.abs(values[-1]))
        stalled = (steps[-1] >= steps[-2]) & (steps[-1] > scale)
        if np.any(stalled):
            bad = int(np.argmax(stalled))
            raise ResolventConvergenceError(steps[:, bad], bad)

    table: dict[tuple[int, int], np.ndarray] = {(j, 0): values[j] for j in range(n)}
    for m in range(1, order + 1):
        for j in range(m, n):
            e_far, e_near = eps[j - m], eps[j]
            table[j, m] = (e_far * table[j, m - 1] - e_near * table[j - 1, m - 1]) / (e_far - e_near)
    best = table[n - 1, order]
    return best, np.abs(best - table[n - 1, order - 1])


def green_function(
    offsets: np.ndarray,
    sp: SpectralParam,
    sign: Sign = "minus",
    cfg: ResolventConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Limiting-absorption Green's function G^{+-}(x) and error estimates.

    ``offsets`` is an (P, d) integer array; values come back in that order.
    """
    cfg = cfg or ResolventConfig()
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1, sp.dim)
    if len(offsets) == 0:
        return np.zeros(0, dtype=complex), np.zeros(0)
    keys = np.sort(np.abs(offsets), axis=1)[:, ::-1]
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    reach = float(np.linalg.norm(uniq, axis=1).max())
    schedule = cfg.schedule(sp.dim)
    n_nodes = cfg.quadrature_size(reach, sp.dim)
    if sp.dim > 1 and n_nodes ** (sp.dim - 1) > cfg.max_nodes:
        raise ResolventConfigError(
            f"{n_nodes}^{sp.dim - 1} quadrature nodes exceed max_nodes={cfg.max_nodes}; "
            "use a larger eps schedule",
            field="epsilon_schedule",
        )
    s = sign_value(sign)
    rows = []
    for eps in schedule:
        rows.append(_green_values(uniq, complex(sp.lam, s * eps), n_nodes))
        logger.debug("green function: eps=%.2e, %d offsets, N=%d", eps, len(uniq), n_nodes)
    best, err = richardson(np.array(rows), schedule, cfg.extrapolation_order)
    return best[inverse], err[inverse]


# ---------------------------------------------------------------------------
# Resolvent
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResolventSolution:
    """psi at a list of target points with per-point error estimates."""

    dim: int
    targets: np.ndarray  # (T, d)
    values: np.ndarray  # (T,)
    errors: np.ndarray  # (T,)

    @property
    def field(self) -> LatticeField:
        return LatticeField.from_arrays(self.dim, self.targets, self.values)

    @property
    def max_error(self) -> float:
        return float(self.errors.max()) if len(self.errors) else 0.0

    def at(self, x: Sequence[int]) -> complex:
        hits = np.flatnonzero((self.targets == np.asarray(x)).all(axis=1))
        if not len(hits):
            raise KeyError(tuple(x))
        return complex(self.values[hits[0]])


def resolvent_apply(
    f: LatticeField,
    sp: SpectralParam,
    sign: Sign = "minus",
    cfg: ResolventConfig | None = None,
    targets: Iterable[Sequence[int]] = (),
) -> ResolventSolution:
    """psi^{+-} = lim (Delta - lambda -+ i eps)^{-1} f evaluated at ``targets``."""
    if f.dim != sp.dim:
        raise ConfigurationError(f"source has dim {f.dim}, spectral parameter dim {sp.dim}")
    pts = np.array([tuple(t) for t in targets], dtype=np.int64).reshape(-1, sp.dim)
    if f.is_zero() or len(pts) == 0:
        zeros = np.zeros(len(pts))
        return ResolventSolution(sp.dim, pts, zeros.astype(complex), zeros)
    src = f.points
    offsets = (pts[:, None, :] - src[None, :, :]).reshape(-1, sp.dim)
    g, err = green_function(offsets, sp, parse_sign(sign), cfg)
    g = g.reshape(len(pts), len(src))
    err = err.reshape(len(pts), len(src))
    values = g @ f.values
    errors = err @ np.abs(f.values)
    logger.info(
        "resolvent: %d targets, %d source points, max error estimate %.2e",
        len(pts),
        len(src),
        errors.max(),
    )
    return ResolventSolution(sp.dim, pts, values, errors)


# ---------------------------------------------------------------------------
# Far field
# ---------------------------------------------------------------------------


def amplitude_factor(gp: GammaPoint, sign: Sign, dim: int) -> complex:
    """sqrt(2 pi) exp(+-i (sigma+2) pi/4) / (sqrt|K| |grad phi|) at kappa(omega)."""
    s = sign_value(sign)
    sigma = dim - 1
    phase = np.exp(s * 1j * (sigma + 2) * np.pi / 4)
    return complex(math.sqrt(2 * math.pi) * phase / (math.sqrt(abs(gp.curvature)) * gp.grad_norm))


@dataclass(frozen=True, eq=False)
class FarFieldSample:
    omega: tuple[float, ...]
    lam: float
    sign: Sign
    value: complex


@dataclass(frozen=True, eq=False)
class WindowGeometry:
    """Per-sample evaluation points kappa(+-omega) and amplitude factors."""

    points: np.ndarray  # (S, d)
    factors: np.ndarray  # (S,)
    curvatures: np.ndarray
    grad_norms: np.ndarray


def window_geometry(window: SpectralWindow, sign: Sign = "minus") -> WindowGeometry:
    sign = parse_sign(sign)
    s = sign_value(sign)
    points, factors, curv, grads = [], [], [], []
    for omega, sp in zip(window.directions, window.spectral_params()):
        gp = kappa(omega, sp)
        src = gp if s > 0 else kappa(-omega, sp)
        points.append(src.kappa)
        factors.append(amplitude_factor(gp, sign, sp.dim))
        curv.append(gp.curvature)
        grads.append(gp.grad_norm)
    return WindowGeometry(
        np.array(points), np.array(factors), np.array(curv), np.array(grads)
    )


def _amplitudes(f: LatticeField, points: np.ndarray, factors: np.ndarray) -> np.ndarray:
    if f.is_zero():
        return np.zeros(len(points), dtype=complex)
    return factors * (fourier_matrix(points, f.points) * f.values).sum(axis=-1)


def far_field(
    f: LatticeField, omega: Iterable[float], sp: SpectralParam, sign: Sign = "minus"
) -> complex:
    """Far-field amplitude a^{+-}(omega, lambda) of the source f."""
    sign = parse_sign(sign)
    gp = kappa(omega, sp)
    src = gp if sign == "plus" else kappa(-gp.omega, sp)
    factor = np.array([amplitude_factor(gp, sign, sp.dim)])
    return complex(_amplitudes(f, src.kappa[None, :], factor)[0])


def far_field_batch(
    f: LatticeField, window: SpectralWindow, sign: Sign = "minus"
) -> list[FarFieldSample]:
    """far_field at every window sample, in window order."""
    sign = parse_sign(sign)
    geo = window_geometry(window, sign)
    values = _amplitudes(f, geo.points, geo.factors)
    return [
        FarFieldSample(tuple(float(c) for c in omega), float(lam), sign, complex(v))
        for omega, lam, v in zip(window.directions, window.lambdas, values)
    ]


# ---------------------------------------------------------------------------
# Asymptotic consistency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticRow:
    radius: int
    distance: float
    psi: complex
    prediction: complex
    scaled_residual: float
    error_estimate: float


def _lattice_direction(base: Sequence[float], dim: int) -> np.ndarray:
    arr = np.asarray(base, dtype=float).reshape(-1)
    if arr.shape != (dim,):
        raise NonLatticeDirectionError(f"base point {arr.tolist()} does not have {dim} coordinates")
    if not np.all(arr == np.round(arr)) or not np.any(arr):
        raise NonLatticeDirectionError(
            f"{arr.tolist()} is not a nonzero lattice point; asymptotics run along x/|x|",
            field="direction",
        )
    return arr.astype(np.int64)


def asymptotic_check(
    f: LatticeField,
    sp: SpectralParam,
    base_point: Sequence[int],
    radii: Sequence[int],
    cfg: ResolventConfig | None = None,
    sign: Sign = "minus",
) -> list[AsymptoticRow]:
    """Compare psi(r x0) with the leading far-field term for each radius r.

    The residual is scaled by |x|^{(d+1)/2}, the order of the remainder,
    so bounded values confirm the expansion.
    """
    sign = parse_sign(sign)
    x0 = _lattice_direction(base_point, sp.dim)
    radii = [int(r) for r in radii]
    if not radii or radii[0] < 1 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigurationError("radii must be positive and strictly increasing", field="radii")
    omega = normalize(x0.astype(float))
    a = far_field(f, omega, sp, sign)
    phase_rate = kappa(omega, sp).mu
    targets = [tuple(int(r) * x0) for r in radii]
    solution = resolvent_apply(f, sp, sign, cfg, targets)

    s = sign_value(sign)
    rows = []
    for r, psi, err in zip(radii, solution.values, solution.errors):
        dist = r * float(np.linalg.norm(x0))
        pred = a * np.exp(s * 1j * phase_rate * dist) / dist ** ((sp.dim - 1) / 2)
        rows.append(
            AsymptoticRow(
                radius=r,
                distance=dist,
                psi=complex(psi),
                prediction=complex(pred),
                scaled_residual=float(abs(psi - pred) * dist ** ((sp.dim + 1) / 2)),
                error_estimate=float(err),
            )
        )
    return rows


def decay_slope(rows: Sequence[AsymptoticRow]) -> float:
    """Least-squares slope of log|psi| against log|x|."""
    dist = np.log([r.distance for r in rows])
    mag = np.log([abs(r.psi) for r in rows])
    return float(np.polyfit(dist, mag, 1)[0])
