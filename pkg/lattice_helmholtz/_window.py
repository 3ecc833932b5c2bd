"""
Spectral sampling windows: finite sets of (direction, lambda) pairs with
quadrature weights.

A window stands in for an open neighbourhood of the sphere times the band.
Samples are stored flat, in the order every dataset, matrix row and CSV
line built from the window follows. Product windows are lambda-major: all
directions for the first lambda, then all directions for the next.

Default weights are the uniform product measure normalized to total mass 1,
so the weighted l2 norm of a dataset is its root-mean-square.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._dispersion import SpectralParam, as_direction, band_margin, normalize, validate_lambda
from ._errors import ConfigurationError
from ._lattice import DimensionMismatchError

DEFAULT_BAND_MARGIN = 1e-3


class WindowMismatchError(ConfigurationError):
    """Data and window disagree on sample count or sample positions."""


def direction_grid(dim: int, n: int, offset: float = 0.0) -> np.ndarray:
    """Quasi-uniform unit directions: circle grid (d=2), Fibonacci sphere (d=3).

    d=1 has exactly two directions and ignores ``n``.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if n < 1:
        raise ConfigurationError(f"need at least one direction, got {n}", field="n_directions")
    if dim == 2:
        theta = 2 * np.pi * np.arange(n) / n + offset
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    r = np.sqrt(np.clip(1 - z * z, 0.0, None))
    a = np.pi * (1 + 5**0.5) * i + offset
    return normalize(np.stack([r * np.cos(a), r * np.sin(a), z], axis=1))


@dataclass(frozen=True, eq=False)
class SpectralWindow:
    directions: np.ndarray  # (S, d), one row per sample
    lambdas: np.ndarray  # (S,)
    weights: np.ndarray  # (S,)
    margin: float = DEFAULT_BAND_MARGIN

    def __post_init__(self) -> None:
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        lams = np.asarray(self.lambdas, dtype=float).reshape(-1)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(dirs) == 0:
            raise ConfigurationError("window has no samples", field="window")
        if not len(dirs) == len(lams) == len(weights):
            raise DimensionMismatchError(
                f"window arrays disagree: {len(dirs)} directions, {len(lams)} lambdas, "
                f"{len(weights)} weights"
            )
        if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
            raise ConfigurationError("quadrature weights must be positive", field="weights")
        dim = dirs.shape[1]
        for omega in dirs:
            as_direction(omega, dim)
        for lam in np.unique(lams):
            sp = validate_lambda(lam, dim)
            if band_margin(sp) < self.margin:
                raise ConfigurationError(
                    f"lambda={lam} is within {self.margin} of the band edge", field="lambdas"
                )
        for arr in (dirs, lams, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "lambdas", lams)
        object.__setattr__(self, "weights", weights)

    # -- constructors -------------------------------------------------------

    @classmethod
    def product(
        cls,
        directions: Sequence[Sequence[float]] | np.ndarray,
        lambdas: Iterable[float],
        weights: Sequence[float] | None = None,
    ) -> SpectralWindow:
        dirs = np.atleast_2d(np.asarray(directions, dtype=float))
        lams = np.asarray(list(lambdas), dtype=float)
        n = len(dirs) * len(lams)
        w = np.full(n, 1.0 / max(n, 1)) if weights is None else np.asarray(weights, float)
        return cls(np.tile(dirs, (len(lams), 1)), np.repeat(lams, len(dirs)), w)

    @classmethod
    def from_samples(
        cls,
        samples: Sequence[tuple[Sequence[float], float]],
        weights: Sequence[float] | None = None,
    ) -> SpectralWindow:
        dirs = np.array([s[0] for s in samples], dtype=float)
        lams = np.array([s[1] for s in samples], dtype=float)
        w = np.full(len(samples), 1.0 / max(len(samples), 1)) if weights is None else weights
        return cls(dirs, lams, np.asarray(w, dtype=float))

    @classmethod
    def band(
        cls, dim: int, n_directions: int, lam_min: float, lam_max: float, n_lambdas: int
    ) -> SpectralWindow:
        """Product window over a direction grid and an evenly spaced lambda grid."""
        lams = np.linspace(lam_min, lam_max, n_lambdas) if n_lambdas > 1 else [lam_min]
        return cls.product(direction_grid(dim, n_directions), lams)

    # -- views ----------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return len(self.lambdas)

    def samples(self) -> list[tuple[np.ndarray, float]]:
        return list(zip(self.directions, self.lambdas.tolist()))

    def spectral_params(self) -> list[SpectralParam]:
        """One validated parameter per sample."""
        cache = {lam: validate_lambda(lam, self.dim) for lam in np.unique(self.lambdas)}
        return [cache[lam] for lam in self.lambdas]

    def subset(self, mask: np.ndarray | Sequence[int]) -> SpectralWindow:
        idx = np.arange(len(self))[mask]
        return SpectralWindow(
            self.directions[idx], self.lambdas[idx], self.weights[idx], self.margin
        )

    def concat(self, other: SpectralWindow) -> SpectralWindow:
        if other.dim != self.dim:
            raise DimensionMismatchError(f"window dims {self.dim} and {other.dim}")
        return SpectralWindow(
            np.vstack([self.directions, other.directions]),
            np.concatenate([self.lambdas, other.lambdas]),
            np.concatenate([self.weights, other.weights]),
            min(self.margin, other.margin),
        )

    def negated(self) -> SpectralWindow:
        """Same samples with every direction reversed."""
        return SpectralWindow(-self.directions, self.lambdas, self.weights, self.margin)
