"""Shared test fixtures for the lattice_helmholtz tests."""

from __future__ import annotations

import sys
from pathlib import Path

# ---------------------------------------------------------------------------
# Path setup: make the package importable without installing it
# ---------------------------------------------------------------------------

_repo_root = Path(__file__).resolve().parent.parent.parent
if str(_repo_root) not in sys.path:
    sys.path.insert(0, str(_repo_root))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from lattice_helmholtz._experiments import make_rng, random_field as _random_field  # noqa: E402
from lattice_helmholtz._lattice import LatticeField, SupportDomain  # noqa: E402

TEST_SEED = 20240611


@pytest.fixture
def rng() -> np.random.Generator:
    """Counter-based generator with a fixed key."""
    return make_rng(TEST_SEED)


@pytest.fixture
def box():
    """Factory for box domains: box(2, 4) is {0..3}^2, box(2, 4, origin=(6, 0)) shifts it."""

    def _make(dim: int, side: int, origin: tuple[int, ...] | None = None) -> SupportDomain:
        lo = list(origin) if origin is not None else [0] * dim
        return SupportDomain.box(lo, [c + side - 1 for c in lo])

    return _make


@pytest.fixture
def random_field(rng):
    """Factory for random complex fields on a domain."""

    def _make(domain: SupportDomain, scale: float = 1.0) -> LatticeField:
        return _random_field(domain, rng, scale)

    return _make
