"""Tests for lattice fields, support domains and the torus transforms."""

from __future__ import annotations

import numpy as np
import pytest

from lattice_helmholtz._dispersion import phi
from lattice_helmholtz._errors import ConfigurationError
from lattice_helmholtz._lattice import (
    AliasingError,
    DimensionMismatchError,
    EmptyDomainError,
    LatticeField,
    SupportDomain,
    TorusSpectrum,
    UnderResolutionError,
    autocorrelation,
    axis_nodes,
    convolve,
    dft,
    diam,
    difference,
    dist,
    idft,
    laplacian_apply,
    min_grid_size,
    minkowski_sum,
    negate,
    neighbor_sum,
    reflect_conjugate,
    simulate_intensity,
    spectrum_at,
    union,
    unit_shell,
    window,
)


def _make_centered_box(dim: int, radius: int = 2) -> SupportDomain:
    return SupportDomain.box([-radius] * dim, [radius] * dim)


def _random_points(rng, dim: int, n: int = 7) -> np.ndarray:
    return rng.uniform(-np.pi, np.pi, size=(n, dim))


# ---------------------------------------------------------------------------
# LatticeField
# ---------------------------------------------------------------------------


class TestLatticeField:
    def test_zero_entries_are_dropped(self):
        u = LatticeField(2, {(0, 0): 1.0, (1, 0): 0.0})
        assert u.support == frozenset({(0, 0)})
        assert u[(1, 0)] == 0j

    def test_unstored_point_reads_zero(self):
        assert LatticeField.delta((3,))[(4,)] == 0j

    def test_from_arrays_sums_duplicates(self):
        u = LatticeField.from_arrays(1, np.array([[0], [0], [2]]), np.array([1.0, 2.0, 5.0]))
        assert u[(0,)] == 3.0
        assert u[(2,)] == 5.0

    def test_cancellation_gives_zero_field(self):
        u = LatticeField.delta((1, 1), 2.0)
        assert (u - u).is_zero()

    def test_scalar_multiplication_both_sides(self):
        u = LatticeField.delta((1,), 1 + 1j)
        assert (2 * u)[(1,)] == (u * 2)[(1,)] == 2 + 2j

    def test_mixed_dimension_arithmetic_raises(self):
        with pytest.raises(DimensionMismatchError):
            LatticeField.delta((0,)) + LatticeField.delta((0, 0))

    def test_unsupported_dimension_raises(self):
        with pytest.raises(DimensionMismatchError):
            LatticeField(4, {})

    def test_vector_round_trip_in_domain_order(self, box, random_field):
        d = box(2, 3)
        u = random_field(d)
        np.testing.assert_array_equal(LatticeField.from_vector(d, u.to_vector(d)).values, u.values)

    def test_extent_and_norm(self):
        u = LatticeField(2, {(-3, 1): 3.0, (0, 2): 4.0})
        assert u.extent() == 3
        assert u.norm() == pytest.approx(5.0)


# ---------------------------------------------------------------------------
# SupportDomain
# ---------------------------------------------------------------------------


class TestSupportDomain:
    def test_points_sorted_and_unique(self):
        d = SupportDomain.of([(2, 0), (0, 0), (2, 0)])
        assert d.points == ((0, 0), (2, 0))
        assert d.hull == ((0, 0), (2, 0))

    def test_box_size(self):
        assert len(SupportDomain.box([0, 0, 0], [1, 2, 3])) == 2 * 3 * 4

    def test_ball_is_open(self):
        d = SupportDomain.ball((0, 0), 1.5)
        assert len(d) == 9
        assert (1, 1) in d
        assert (2, 0) not in d
        assert len(SupportDomain.ball((0,), 1.0)) == 1

    def test_from_field(self):
        u = LatticeField(1, {(4,): 1.0, (-1,): 2.0})
        assert SupportDomain.from_field(u).points == ((-1,), (4,))

    def test_empty_raises(self):
        with pytest.raises(EmptyDomainError):
            SupportDomain.of([])
        with pytest.raises(EmptyDomainError):
            SupportDomain.box([1], [0])

    def test_empty_domain_is_a_configuration_error(self):
        with pytest.raises(ConfigurationError):
            SupportDomain(2, ())


# ---------------------------------------------------------------------------
# Support algebra
# ---------------------------------------------------------------------------


class TestSupportAlgebra:
    def test_diam_of_square(self, box):
        assert diam(box(2, 4)) == pytest.approx(3 * np.sqrt(2))

    def test_diam_of_single_point(self):
        assert diam(SupportDomain.of([(5, 5)])) == 0.0

    def test_dist(self, box):
        assert dist(box(2, 2), box(2, 2, origin=(5, 0))) == pytest.approx(4.0)

    def test_negate(self):
        assert negate(SupportDomain.of([(1,), (3,)])).points == ((-3,), (-1,))

    def test_minkowski_sum(self):
        s = minkowski_sum(SupportDomain.of([(0,), (1,)]), SupportDomain.of([(0,), (10,)]))
        assert s.points == ((0,), (1,), (10,), (11,))

    def test_difference_is_sum_with_negation(self):
        d1, d2 = SupportDomain.of([(5,), (6,)]), SupportDomain.of([(0,), (1,)])
        assert difference(d1, d2).points == ((4,), (5,), (6,))

    def test_union(self):
        u = union(SupportDomain.of([(0,)]), SupportDomain.of([(0,), (2,)]))
        assert u.points == ((0,), (2,))

    def test_window_restricts(self):
        u = LatticeField(1, {(0,): 1.0, (3,): 2.0})
        assert window(u, SupportDomain.of([(3,)])).support == frozenset({(3,)})
        assert window(u, [(0,)]).support == frozenset({(0,)})


# ---------------------------------------------------------------------------
# Grids and transforms
# ---------------------------------------------------------------------------


class TestGrids:
    def test_axis_nodes_conventions(self):
        np.testing.assert_allclose(axis_nodes(4, "centered_at_O"), [-np.pi, -np.pi / 2, 0, np.pi / 2])
        np.testing.assert_allclose(axis_nodes(4, "centered_at_Opi"), [0, np.pi / 2, np.pi, 3 * np.pi / 2])

    def test_min_grid_size_is_even(self):
        assert min_grid_size(0) == 4
        assert min_grid_size(2) == 6
        assert min_grid_size(5) == 12

    def test_odd_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            dft(LatticeField.delta((0,)), 5)

    def test_unknown_convention_rejected(self):
        with pytest.raises(ConfigurationError):
            dft(LatticeField.delta((0,)), 4, "centered_at_X")  # type: ignore[arg-type]

    def test_spectrum_shape_checked(self):
        with pytest.raises(DimensionMismatchError):
            TorusSpectrum(2, 4, np.zeros(15))

    def test_spectrum_is_read_only(self):
        s = dft(LatticeField.delta((0, 0)), 4)
        with pytest.raises(ValueError):
            s.values[0, 0] = 1.0


class TestTransforms:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    @pytest.mark.parametrize("convention", ["centered_at_O", "centered_at_Opi"])
    def test_round_trip(self, dim, convention, random_field):
        domain = _make_centered_box(dim)
        u = random_field(domain)
        n = min_grid_size(domain.extent())
        back = idft(dft(u, n, convention), domain)
        np.testing.assert_allclose(back.to_vector(domain), u.to_vector(domain), atol=1e-12)

    def test_delta_transform_is_constant(self):
        s = dft(LatticeField.delta((0, 0)), 6)
        np.testing.assert_allclose(s.values, np.full((6, 6), 1 / (2 * np.pi)))

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_grid_values_match_spectrum_at(self, dim, random_field):
        domain = _make_centered_box(dim, 1)
        u = random_field(domain)
        s = dft(u, 4)
        np.testing.assert_allclose(s.values.reshape(-1), spectrum_at(u, s.nodes()), atol=1e-12)

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_parseval(self, dim, random_field):
        domain = _make_centered_box(dim)
        u = random_field(domain)
        s = dft(u, min_grid_size(domain.extent()))
        assert np.sum(np.abs(s.values) ** 2) * s.cell_volume == pytest.approx(u.norm() ** 2, rel=1e-12)

    def test_under_resolution(self):
        with pytest.raises(UnderResolutionError):
            dft(LatticeField.delta((3,)), 6)

    def test_aliasing(self):
        s = dft(LatticeField.delta((0,)), 4)
        with pytest.raises(AliasingError):
            idft(s, SupportDomain.of([(2,)]))

    def test_spectrum_at_batch_matches_scalar_bitwise(self, rng, random_field):
        u = random_field(_make_centered_box(2))
        ks = _random_points(rng, 2, 11)
        batch = spectrum_at(u, ks)
        for k, value in zip(ks, batch):
            assert spectrum_at(u, k) == value

    def test_simulate_intensity(self, random_field):
        u = random_field(_make_centered_box(2, 1))
        s = simulate_intensity(u, 4)
        np.testing.assert_allclose(s.values.real, np.abs(dft(u, 4).values) ** 2)


# ---------------------------------------------------------------------------
# Convolution and multipliers
# ---------------------------------------------------------------------------


class TestConvolution:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_convolution_theorem(self, dim, rng, random_field):
        u1 = random_field(_make_centered_box(dim, 1))
        u2 = random_field(_make_centered_box(dim, 2))
        ks = _random_points(rng, dim)
        lhs = spectrum_at(convolve(u1, u2), ks)
        rhs = (2 * np.pi) ** (dim / 2) * spectrum_at(u1, ks) * spectrum_at(u2, ks)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_autocorrelation_transform_is_intensity(self, rng, random_field):
        u = random_field(_make_centered_box(2))
        ks = _random_points(rng, 2)
        np.testing.assert_allclose(
            spectrum_at(autocorrelation(u), ks), np.abs(spectrum_at(u, ks)) ** 2, atol=1e-12
        )

    def test_reflect_conjugate(self):
        u = LatticeField.delta((2, -1), 1 + 2j)
        assert reflect_conjugate(u)[(-2, 1)] == 1 - 2j

    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_laplacian_multiplier(self, dim, rng, random_field):
        u = random_field(_make_centered_box(dim, 1))
        ks = _random_points(rng, dim)
        np.testing.assert_allclose(
            spectrum_at(laplacian_apply(u), ks), phi(ks) * spectrum_at(u, ks), atol=1e-12
        )

    def test_laplacian_of_delta(self):
        lap = laplacian_apply(LatticeField.delta((0, 0)))
        assert lap.support == frozenset({(1, 0), (-1, 0), (0, 1), (0, -1)})

    def test_modulated_neighbor_sum_shifts_symbol(self, rng, random_field):
        u = random_field(_make_centered_box(2, 1))
        k = np.array([0.3, -1.1])
        weights = np.exp(1j * (unit_shell(2) @ k))
        ps = _random_points(rng, 2)
        np.testing.assert_allclose(
            spectrum_at(neighbor_sum(u, weights), ps),
            phi(ps + k) * spectrum_at(u, ps),
            atol=1e-12,
        )

    def test_unit_shell_order(self):
        np.testing.assert_array_equal(unit_shell(2), [[1, 0], [-1, 0], [0, 1], [0, -1]])

    def test_neighbor_sum_weight_count_checked(self):
        with pytest.raises(DimensionMismatchError):
            neighbor_sum(LatticeField.delta((0, 0)), np.ones(3))
