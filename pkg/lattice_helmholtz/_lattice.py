"""
Finitely supported lattice functions and their Fourier transforms on the torus.

Everything else in the package is built on three value types:

  LatticeField    finitely supported complex function on Z^d
  SupportDomain   explicit lattice point set with its bounding box
  TorusSpectrum   samples of a function on T^d over a uniform N^d grid

Transform convention:

  (F u)(k) = (2 pi)^{-d/2} sum_x u(x) exp(-i k.x)

dft evaluates this finite sum exactly at every grid node; idft inverts it
with the periodic trapezoidal rule, which is exact for trigonometric
polynomials whose degree is below the grid Nyquist bound. Transforms are
plain dense sums, not FFTs: the grids here are desk-sized and exactness
drives the resolution rules, not speed.

Grid nodes are k_j = 2 pi j / N + offset per axis, with offset -pi for the
"centered_at_O" convention (cube [-pi, pi)) and 0 for "centered_at_Opi"
(cube [0, 2 pi)). Spectral parameters lambda > 0 use the first, lambda < 0
the second, so the dispersion surface sits strictly inside the cube.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from ._errors import ConfigurationError

logger = logging.getLogger(__name__)

Point = tuple[int, ...]
Convention = Literal["centered_at_O", "centered_at_Opi"]

SUPPORTED_DIMS = (1, 2, 3)
CONVENTIONS: tuple[str, ...] = ("centered_at_O", "centered_at_Opi")
MIN_GRID_SIZE = 4

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# Error types
# ---------------------------------------------------------------------------


class DimensionMismatchError(ConfigurationError):
    """Two operands (or a point and its container) disagree on dimension."""


class UnderResolutionError(ConfigurationError):
    """The torus grid is too coarse to represent a trigonometric polynomial."""


class AliasingError(ConfigurationError):
    """An inverse transform was asked for points beyond the grid Nyquist bound."""


class EmptyDomainError(ConfigurationError):
    """A support domain must contain at least one lattice point."""


def _check_dim(dim: int) -> int:
    if dim not in SUPPORTED_DIMS:
        raise DimensionMismatchError(f"dimension must be one of {SUPPORTED_DIMS}, got {dim}")
    return int(dim)


def _as_point(x: Iterable, dim: int) -> Point:
    pt = tuple(int(c) for c in x)
    if len(pt) != dim:
        raise DimensionMismatchError(f"point {pt} does not have {dim} coordinates")
    return pt


# ---------------------------------------------------------------------------
# LatticeField
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Finitely supported complex function on Z^d.

    Exact zeros are not stored, so ``support`` is the true support and an
    unstored point reads back as complex zero.
    """

    dim: int
    entries: Mapping[Point, complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        dim = _check_dim(self.dim)
        acc: dict[Point, complex] = {}
        for x, value in self.entries.items():
            pt = _as_point(x, dim)
            acc[pt] = acc.get(pt, 0j) + complex(value)
        clean = {pt: v for pt, v in sorted(acc.items()) if v != 0}
        object.__setattr__(self, "entries", MappingProxyType(clean))

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> LatticeField:
        return cls(dim, {})

    @classmethod
    def delta(cls, x: Sequence[int], value: complex = 1.0) -> LatticeField:
        """The point mass value * delta_x."""
        return cls(len(x), {tuple(x): value})

    @classmethod
    def from_arrays(cls, dim: int, points: np.ndarray, values: np.ndarray) -> LatticeField:
        """Build a field from parallel point/value arrays, summing duplicates."""
        points = np.asarray(points, dtype=np.int64).reshape(-1, dim)
        values = np.asarray(values, dtype=complex).reshape(-1)
        if len(points) != len(values):
            raise DimensionMismatchError(
                f"{len(points)} points but {len(values)} values"
            )
        if len(points) == 0:
            return cls.zero(dim)
        uniq, inverse = np.unique(points, axis=0, return_inverse=True)
        acc = np.zeros(len(uniq), dtype=complex)
        np.add.at(acc, inverse.reshape(-1), values)
        return cls(dim, {tuple(int(c) for c in p): v for p, v in zip(uniq, acc)})

    @classmethod
    def from_vector(cls, domain: SupportDomain, vector: np.ndarray) -> LatticeField:
        """Inverse of ``to_vector``: values listed in domain order."""
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        if len(vector) != len(domain):
            raise DimensionMismatchError(
                f"vector of length {len(vector)} does not match domain of size {len(domain)}"
            )
        return cls(domain.dim, dict(zip(domain.points, vector)))

    # -- access ---------------------------------------------------------------

    def __getitem__(self, x: Sequence[int]) -> complex:
        return self.entries.get(tuple(int(c) for c in x), 0j)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def support(self) -> frozenset[Point]:
        return frozenset(self.entries)

    @property
    def points(self) -> np.ndarray:
        """Support points as an (M, dim) integer array, lexicographic order."""
        if not self.entries:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.array(list(self.entries), dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array(list(self.entries.values()), dtype=complex)

    def is_zero(self) -> bool:
        return not self.entries

    def extent(self) -> int:
        """Largest absolute coordinate over the support (0 for the zero field)."""
        if not self.entries:
            return 0
        return int(np.abs(self.points).max())

    def norm(self) -> float:
        """Euclidean l2 norm."""
        return float(np.linalg.norm(self.values)) if self.entries else 0.0

    def to_vector(self, domain: SupportDomain) -> np.ndarray:
        """Values at the domain's points, in domain order."""
        if domain.dim != self.dim:
            raise DimensionMismatchError(
                f"field has dim {self.dim}, domain has dim {domain.dim}"
            )
        return np.array([self.entries.get(p, 0j) for p in domain.points], dtype=complex)

    # -- arithmetic -----------------------------------------------------------

    def _combine(self, other: LatticeField, sign: float) -> LatticeField:
        if not isinstance(other, LatticeField):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionMismatchError(f"cannot combine dim {self.dim} with dim {other.dim}")
        acc = dict(self.entries)
        for x, v in other.entries.items():
            acc[x] = acc.get(x, 0j) + sign * v
        return LatticeField(self.dim, acc)

    def __add__(self, other: LatticeField) -> LatticeField:
        return self._combine(other, 1.0)

    def __sub__(self, other: LatticeField) -> LatticeField:
        return self._combine(other, -1.0)

    def __mul__(self, scalar: complex) -> LatticeField:
        scalar = complex(scalar)
        return LatticeField(self.dim, {x: scalar * v for x, v in self.entries.items()})

    __rmul__ = __mul__

    def __neg__(self) -> LatticeField:
        return self * -1.0

    def __repr__(self) -> str:
        return f"LatticeField(dim={self.dim}, support={len(self.entries)} points)"


# ---------------------------------------------------------------------------
# SupportDomain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupportDomain:
    """Lattice trace D ∩ Z^d of a bounded domain, stored as explicit points.

    ``points`` is kept sorted and duplicate-free; it fixes the column order
    of every sampling matrix built on the domain. ``hull`` is the minimal
    axis-aligned box (lower corner, upper corner).
    """

    dim: int
    points: tuple[Point, ...]
    hull: tuple[Point, Point] = field(init=False, compare=False)

    def __post_init__(self) -> None:
        dim = _check_dim(self.dim)
        pts = sorted({_as_point(p, dim) for p in self.points})
        if not pts:
            raise EmptyDomainError("support domain has no lattice points")
        arr = np.array(pts, dtype=np.int64)
        lower = tuple(int(c) for c in arr.min(axis=0))
        upper = tuple(int(c) for c in arr.max(axis=0))
        object.__setattr__(self, "points", tuple(pts))
        object.__setattr__(self, "hull", (lower, upper))

    @classmethod
    def of(cls, points: Iterable[Sequence[int]]) -> SupportDomain:
        pts = [tuple(p) for p in points]
        if not pts:
            raise EmptyDomainError("support domain has no lattice points")
        return cls(len(pts[0]), tuple(pts))

    @classmethod
    def box(cls, lower: Sequence[int], upper: Sequence[int]) -> SupportDomain:
        """All lattice points of the closed box [lower, upper]."""
        if len(lower) != len(upper):
            raise DimensionMismatchError("box corners differ in dimension")
        if any(lo > hi for lo, hi in zip(lower, upper)):
            raise EmptyDomainError(f"box {tuple(lower)}..{tuple(upper)} is empty")
        axes = [np.arange(lo, hi + 1) for lo, hi in zip(lower, upper)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lower))
        return cls(len(lower), tuple(map(tuple, grid)))

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> SupportDomain:
        """Lattice trace of the open Euclidean ball |x - center| < radius."""
        center = np.asarray(center, dtype=float)
        lo = np.floor(center - radius).astype(int)
        hi = np.ceil(center + radius).astype(int)
        candidates = cls.box(lo, hi).as_array()
        inside = np.linalg.norm(candidates - center, axis=1) < radius
        return cls(len(center), tuple(map(tuple, candidates[inside])))

    @classmethod
    def from_field(cls, u: LatticeField) -> SupportDomain:
        return cls(u.dim, tuple(u.support))

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, x: object) -> bool:
        return tuple(x) in self._lookup  # type: ignore[arg-type]

    @property
    def _lookup(self) -> frozenset[Point]:
        cached = self.__dict__.get("_lookup_cache")
        if cached is None:
            cached = frozenset(self.points)
            object.__setattr__(self, "_lookup_cache", cached)
        return cached

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=np.int64).reshape(-1, self.dim)

    def extent(self) -> int:
        return int(np.abs(self.as_array()).max())


# ---------------------------------------------------------------------------
# TorusSpectrum
# ---------------------------------------------------------------------------


def axis_nodes(grid_size: int, convention: Convention = "centered_at_O") -> np.ndarray:
    """The N quadrature nodes along one torus axis."""
    offset = -np.pi if convention == "centered_at_O" else 0.0
    return TWO_PI * np.arange(grid_size) / grid_size + offset


def _check_grid(grid_size: int, convention: str) -> None:
    if grid_size < MIN_GRID_SIZE or grid_size % 2:
        raise ConfigurationError(
            f"grid size must be even and >= {MIN_GRID_SIZE}, got {grid_size}",
            field="grid_size",
        )
    if convention not in CONVENTIONS:
        raise ConfigurationError(
            f"unknown origin convention {convention!r}", field="convention"
        )


def min_grid_size(extent: int) -> int:
    """Smallest admissible even N with N >= 2 * extent + 1."""
    n = max(MIN_GRID_SIZE, 2 * int(extent) + 1)
    return n + (n % 2)


@dataclass(frozen=True, eq=False)
class TorusSpectrum:
    """Samples of a function on T^d over the uniform N^d grid (row-major)."""

    dim: int
    grid_size: int
    values: np.ndarray
    convention: Convention = "centered_at_O"

    def __post_init__(self) -> None:
        _check_dim(self.dim)
        _check_grid(self.grid_size, self.convention)
        values = np.array(self.values, dtype=complex)
        if values.size != self.grid_size**self.dim:
            raise DimensionMismatchError(
                f"{values.size} values for a {self.grid_size}^{self.dim} grid"
            )
        values = values.reshape((self.grid_size,) * self.dim)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def cell_volume(self) -> float:
        return (TWO_PI / self.grid_size) ** self.dim

    def axis_nodes(self) -> np.ndarray:
        return axis_nodes(self.grid_size, self.convention)

    def nodes(self) -> np.ndarray:
        """All grid nodes as an (N^d, dim) array in row-major order."""
        return grid_nodes(self.dim, self.grid_size, self.convention)


def grid_nodes(dim: int, grid_size: int, convention: Convention = "centered_at_O") -> np.ndarray:
    axes = [axis_nodes(grid_size, convention)] * dim
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

_AXES = "abc"


def _separable_sum(factors: list[np.ndarray], weights: np.ndarray) -> np.ndarray:
    """sum_m weights[m] * prod_a factors[a][:, m] as a dim-way tensor."""
    subs = _AXES[: len(factors)]
    expr = ",".join(f"{s}m" for s in subs) + ",m->" + subs
    return np.einsum(expr, *factors, weights)


def dft(
    u: LatticeField, grid_size: int, convention: Convention = "centered_at_O"
) -> TorusSpectrum:
    """Exact transform of u at every node of the N^d torus grid."""
    _check_grid(grid_size, convention)
    if 2 * u.extent() + 1 > grid_size:
        raise UnderResolutionError(
            f"grid size {grid_size} cannot resolve a field of extent {u.extent()} "
            f"(need >= {2 * u.extent() + 1})",
            field="grid_size",
        )
    d = u.dim
    if u.is_zero():
        return TorusSpectrum(d, grid_size, np.zeros((grid_size,) * d), convention)
    nodes = axis_nodes(grid_size, convention)
    pts = u.points
    factors = [np.exp(-1j * np.outer(nodes, pts[:, a])) for a in range(d)]
    values = _separable_sum(factors, u.values) * TWO_PI ** (-d / 2)
    return TorusSpectrum(d, grid_size, values, convention)


def fourier_matrix(k: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Entries (2 pi)^{-d/2} exp(-i k.x) for k of shape (..., d) and points (M, d).

    The phase is accumulated axis by axis, elementwise, so a row does not
    depend on how many other rows are evaluated with it.
    """
    k = np.asarray(k, dtype=float)
    points = np.asarray(points, dtype=float)
    d = points.shape[-1]
    phase = np.zeros(k.shape[:-1] + (len(points),))
    for a in range(d):
        phase += k[..., a, None] * points[:, a]
    return np.exp(-1j * phase) * TWO_PI ** (-d / 2)


def spectrum_at(u: LatticeField, k: np.ndarray) -> np.ndarray | complex:
    """Exact (F u)(k) at arbitrary torus points; k has shape (..., dim)."""
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != u.dim:
        raise DimensionMismatchError(f"points of dim {k.shape[-1]} for a dim {u.dim} field")
    if u.is_zero():
        out = np.zeros(k.shape[:-1], dtype=complex)
    else:
        out = (fourier_matrix(k, u.points) * u.values).sum(axis=-1)
    return complex(out) if out.ndim == 0 else out


def idft(s: TorusSpectrum, window: SupportDomain) -> LatticeField:
    """Trapezoidal inversion of a spectrum, evaluated on the window's points."""
    if window.dim != s.dim:
        raise DimensionMismatchError(f"spectrum has dim {s.dim}, window has dim {window.dim}")
    if 2 * window.extent() + 1 > s.grid_size:
        raise AliasingError(
            f"window extent {window.extent()} exceeds the Nyquist bound of a "
            f"{s.grid_size}-point grid",
            field="grid_size",
        )
    d = s.dim
    nodes = s.axis_nodes()
    pts = window.as_array()
    factors = [np.exp(1j * np.outer(nodes, pts[:, a])) for a in range(d)]
    subs = _AXES[:d]
    expr = subs + "," + ",".join(f"{c}m" for c in subs) + "->m"
    values = np.einsum(expr, s.values, *factors)
    values *= TWO_PI ** (-d / 2) * s.cell_volume
    return LatticeField.from_vector(window, values)


def simulate_intensity(
    u: LatticeField, grid_size: int, convention: Convention = "centered_at_O"
) -> TorusSpectrum:
    """|F u|^2 on the grid."""
    spec = dft(u, grid_size, convention)
    return TorusSpectrum(u.dim, grid_size, np.abs(spec.values) ** 2, convention)


# ---------------------------------------------------------------------------
# Convolution and friends
# ---------------------------------------------------------------------------


def _same_dim(*fields: LatticeField) -> int:
    dims = {f.dim for f in fields}
    if len(dims) != 1:
        raise DimensionMismatchError(f"mixed dimensions {sorted(dims)}")
    return dims.pop()


def convolve(u1: LatticeField, u2: LatticeField) -> LatticeField:
    """(u1 * u2)(x) = sum_y u1(x - y) u2(y), exactly."""
    d = _same_dim(u1, u2)
    if u1.is_zero() or u2.is_zero():
        return LatticeField.zero(d)
    pts = (u1.points[:, None, :] + u2.points[None, :, :]).reshape(-1, d)
    vals = (u1.values[:, None] * u2.values[None, :]).reshape(-1)
    return LatticeField.from_arrays(d, pts, vals)


def reflect_conjugate(u: LatticeField) -> LatticeField:
    """u~(x) = conj(u(-x))."""
    return LatticeField(u.dim, {tuple(-c for c in x): np.conj(v) for x, v in u.entries.items()})


def autocorrelation(u: LatticeField) -> LatticeField:
    """(2 pi)^{-d/2} (u * u~), the inverse transform of |F u|^2."""
    return convolve(u, reflect_conjugate(u)) * TWO_PI ** (-u.dim / 2)


def window(u: LatticeField, domain: SupportDomain | Iterable[Sequence[int]]) -> LatticeField:
    """Multiply u by the indicator of the given point set."""
    if isinstance(domain, SupportDomain):
        if domain.dim != u.dim:
            raise DimensionMismatchError(f"field has dim {u.dim}, domain has dim {domain.dim}")
        keep = domain._lookup
    else:
        keep = frozenset(tuple(int(c) for c in p) for p in domain)
    return LatticeField(u.dim, {x: v for x, v in u.entries.items() if x in keep})


def unit_shell(dim: int) -> np.ndarray:
    """The 2d nearest-neighbour offsets, ordered +e_1, -e_1, +e_2, ..."""
    eye = np.eye(_check_dim(dim), dtype=np.int64)
    return np.stack([s * eye[a] for a in range(dim) for s in (1, -1)])


def neighbor_sum(u: LatticeField, weights: np.ndarray | None = None) -> LatticeField:
    """(S u)(x) = sum_e w_e u(x + e) over the unit shell.

    Unit weights give the discrete Laplacian; weights exp(i k.e) give the
    modulated Laplacian exp(-i k.x) Delta (exp(i k.x) u).
    """
    shell = unit_shell(u.dim)
    w = np.ones(len(shell), dtype=complex) if weights is None else np.asarray(weights, complex)
    if w.shape != (len(shell),):
        raise DimensionMismatchError(f"expected {len(shell)} shell weights, got {w.shape}")
    if u.is_zero():
        return LatticeField.zero(u.dim)
    # u(y) contributes to x = y - e
    pts = (u.points[None, :, :] - shell[:, None, :]).reshape(-1, u.dim)
    vals = (w[:, None] * u.values[None, :]).reshape(-1)
    return LatticeField.from_arrays(u.dim, pts, vals)


def laplacian_apply(u: LatticeField) -> LatticeField:
    """(Delta u)(x) = sum of the 2d nearest-neighbour values."""
    return neighbor_sum(u)


# ---------------------------------------------------------------------------
# Support algebra
# ---------------------------------------------------------------------------


def diam(domain: SupportDomain) -> float:
    """Euclidean diameter sup |x - y| over the lattice points."""
    if len(domain) < 2:
        return 0.0
    return float(pdist(domain.as_array().astype(float)).max())


def dist(d1: SupportDomain, d2: SupportDomain) -> float:
    """Euclidean distance inf |x - y| between two point sets."""
    if d1.dim != d2.dim:
        raise DimensionMismatchError(f"dist between dim {d1.dim} and dim {d2.dim}")
    return float(cdist(d1.as_array().astype(float), d2.as_array().astype(float)).min())


def negate(domain: SupportDomain) -> SupportDomain:
    return SupportDomain(domain.dim, tuple(map(tuple, -domain.as_array())))


def minkowski_sum(d1: SupportDomain, d2: SupportDomain) -> SupportDomain:
    if d1.dim != d2.dim:
        raise DimensionMismatchError(f"sum of dim {d1.dim} and dim {d2.dim}")
    sums = (d1.as_array()[:, None, :] + d2.as_array()[None, :, :]).reshape(-1, d1.dim)
    return SupportDomain(d1.dim, tuple(map(tuple, np.unique(sums, axis=0))))


def difference(d1: SupportDomain, d2: SupportDomain) -> SupportDomain:
    """D1 - D2 = {x - y : x in D1, y in D2}."""
    return minkowski_sum(d1, negate(d2))


def union(d1: SupportDomain, d2: SupportDomain) -> SupportDomain:
    if d1.dim != d2.dim:
        raise DimensionMismatchError(f"union of dim {d1.dim} and dim {d2.dim}")
    return SupportDomain(d1.dim, d1.points + d2.points)
