"""Tests for phaseless reconstruction with a known background source."""

from __future__ import annotations

import numpy as np
import pytest

from lattice_helmholtz._errors import ConfigurationError
from lattice_helmholtz._forward import far_field_batch, window_geometry
from lattice_helmholtz._lattice import (
    LatticeField,
    SupportDomain,
    UnderResolutionError,
    autocorrelation,
    simulate_intensity,
    spectrum_at,
)
from lattice_helmholtz._phase_retrieval import (
    BackgroundDegeneracyError,
    GeometryError,
    InsufficientCoverageError,
    IntensityDataset,
    SpectralSamples,
    SupportGeometry,
    fit_autocorrelation,
    intensity_from_farfield,
    phaseless_farfield_reconstruct,
    retrieve_source,
    retrieve_source_detailed,
    sigma_decompose,
)
from lattice_helmholtz._window import SpectralWindow, WindowMismatchError, direction_grid


def _domain(*points) -> SupportDomain:
    return SupportDomain.of([tuple(p) if isinstance(p, tuple) else (p,) for p in points])


def _relative_error(a: LatticeField, b: LatticeField) -> float:
    return (a - b).norm() / b.norm()


def _retrieve(f, f0, geom, grid_size=None, with_source=None):
    n = grid_size or geom.min_grid_size()
    with_source = geom.mode == "disjoint" if with_source is None else with_source
    intensity_f = simulate_intensity(f, n) if with_source else None
    return retrieve_source(simulate_intensity(f + f0, n), intensity_f, f0, geom)


def _datasets(g: LatticeField, window: SpectralWindow, signs=("minus", "plus")) -> list[IntensityDataset]:
    out = []
    for sign in signs:
        values = np.abs([s.value for s in far_field_batch(g, window, sign)]) ** 2
        out.append(IntensityDataset(window, values, sign))
    return out


def _far_field_window(
    n_directions: int = 96, n_lambdas: int = 12, band: tuple[float, float] = (0.5, 3.5)
) -> SpectralWindow:
    return SpectralWindow.product(direction_grid(2, n_directions), np.linspace(*band, n_lambdas))


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


class TestSupportGeometry:
    def test_far_apart_accepted(self):
        geom = SupportGeometry(_domain((6, 0), (7, 0)), _domain((0, 0)))
        assert geom.cross_window.points == ((6, 0), (7, 0))

    def test_far_apart_needs_separation_beyond_diameter(self):
        with pytest.raises(GeometryError) as exc:
            SupportGeometry(_domain(1, 2, 3), _domain(0), "far_apart")
        assert exc.value.field == "mode"

    def test_disjoint_accepted_when_separated(self):
        geom = SupportGeometry(_domain(1, 2, 3), _domain(0), "disjoint")
        assert geom.autocorrelation_support.points == tuple((x,) for x in range(-3, 4))

    def test_disjoint_needs_positive_distance(self):
        with pytest.raises(GeometryError):
            SupportGeometry(_domain(0, 1), _domain(1), "disjoint")

    def test_geometry_error_is_a_configuration_error(self):
        with pytest.raises(ConfigurationError):
            SupportGeometry(_domain(0), _domain((0, 0)))

    def test_unknown_mode(self):
        with pytest.raises(ConfigurationError):
            SupportGeometry(_domain(5), _domain(0), "overlapping")  # type: ignore[arg-type]

    def test_non_strict_skips_checks(self):
        geom = SupportGeometry(_domain(1, 2, 3), _domain(0), "far_apart", strict=False)
        assert not geom.strict

    def test_min_grid_size(self):
        assert SupportGeometry(_domain(5), _domain(0)).min_grid_size() == 12

    def test_min_grid_size_covers_supports_away_from_origin(self):
        geom = SupportGeometry(_domain(20), _domain(12))
        assert geom.autocorrelation_support.extent() == 8
        assert geom.min_grid_size() == 42
        f, f0 = LatticeField.delta((20,), 2.0), LatticeField.delta((12,))
        assert _relative_error(_retrieve(f, f0, geom), f) < 1e-10


# ---------------------------------------------------------------------------
# Sigma decomposition
# ---------------------------------------------------------------------------


class TestSigmaDecomposition:
    def test_terms_sum_to_autocorrelation(self, random_field):
        D, D0 = _domain((6, 0), (7, 0)), _domain((0, 0), (0, 1))
        f, f0 = random_field(D), random_field(D0)
        terms = sigma_decompose(f, f0, D, D0)
        total = terms.total.to_vector(SupportGeometry(D, D0).autocorrelation_support)
        expected = autocorrelation(f + f0).to_vector(SupportGeometry(D, D0).autocorrelation_support)
        np.testing.assert_allclose(total, expected, atol=1e-14)

    def test_cross_term_lives_on_difference_set(self, random_field):
        D, D0 = _domain(10, 11), _domain(0)
        terms = sigma_decompose(random_field(D), random_field(D0), D, D0)
        assert terms.sigma3.support <= {(10,), (11,)}
        assert terms.sigma2.support <= {(-10,), (-11,)}

    def test_support_outside_bound_raises(self, random_field):
        D, D0 = _domain(10), _domain(0)
        wrong = random_field(_domain(12))
        with pytest.raises(GeometryError):
            sigma_decompose(wrong, random_field(D0), D, D0)


# ---------------------------------------------------------------------------
# Retrieval from torus intensities
# ---------------------------------------------------------------------------


class TestRetrieveSource:
    def test_one_dimensional_example(self):
        f0, f = LatticeField.delta((0,)), LatticeField.delta((5,), 2.0)
        geom = SupportGeometry(_domain(5), _domain(0))
        rec = _retrieve(f, f0, geom)
        assert rec[(5,)] == pytest.approx(2.0, abs=1e-12)
        assert rec.support <= {(5,)}

    def test_far_apart_random(self, random_field):
        D, D0 = _domain((6, 0), (7, 0)), _domain((0, 0))
        geom = SupportGeometry(D, D0)
        for _ in range(5):
            f, f0 = random_field(D), random_field(D0)
            assert _relative_error(_retrieve(f, f0, geom), f) < 1e-10

    def test_far_apart_square_with_two_point_background(self, random_field):
        D = SupportDomain.box([8, 8], [9, 9])
        f0 = LatticeField(2, {(0, 0): 1.0, (1, 0): 0.5})
        geom = SupportGeometry(D, SupportDomain.from_field(f0))
        f = random_field(D)
        assert _relative_error(_retrieve(f, f0, geom), f) < 1e-10

    def test_disjoint_random(self, random_field):
        D, D0 = _domain(1, 2, 3), _domain(0)
        geom = SupportGeometry(D, D0, "disjoint")
        for _ in range(5):
            f, f0 = random_field(D), random_field(D0)
            assert _relative_error(_retrieve(f, f0, geom), f) < 1e-10

    def test_larger_grid_gives_the_same_answer(self, random_field):
        D, D0 = _domain(4, 5), _domain(0)
        geom = SupportGeometry(D, D0)
        f, f0 = random_field(D), random_field(D0)
        assert _relative_error(_retrieve(f, f0, geom, grid_size=32), f) < 1e-10

    def test_violated_geometry_gives_wrong_answer(self, random_field):
        # D - D0 overlaps the support of f * f~ and nothing removes it
        D, D0 = _domain(1, 2, 3), _domain(0)
        geom = SupportGeometry(D, D0, "far_apart", strict=False)
        f, f0 = random_field(D), random_field(D0)
        assert _relative_error(_retrieve(f, f0, geom, with_source=False), f) > 1e-3

    def test_disjoint_needs_source_intensity(self, random_field):
        D, D0 = _domain(1, 2, 3), _domain(0)
        geom = SupportGeometry(D, D0, "disjoint")
        f, f0 = random_field(D), random_field(D0)
        with pytest.raises(ConfigurationError):
            retrieve_source(simulate_intensity(f + f0, 8), None, f0, geom)

    def test_zero_background_rejected(self, random_field):
        geom = SupportGeometry(_domain(5), _domain(0))
        f = random_field(geom.D)
        with pytest.raises(ConfigurationError):
            retrieve_source(simulate_intensity(f, 12), None, LatticeField.zero(1), geom)

    def test_coarse_grid_rejected(self):
        geom = SupportGeometry(_domain(5), _domain(0))
        f0 = LatticeField.delta((0,))
        with pytest.raises(UnderResolutionError):
            retrieve_source(simulate_intensity(f0, 10), None, f0, geom)

    def test_degenerate_background(self):
        f0 = LatticeField(1, {(0,): 1.0, (1,): -1.0})
        geom = SupportGeometry(_domain(5), SupportDomain.from_field(f0))
        f = LatticeField.delta((5,))
        with pytest.raises(BackgroundDegeneracyError) as exc:
            _retrieve(f, f0, geom)
        assert exc.value.skipped == 1
        assert exc.value.total == 12

    def test_isolated_background_zero_is_skipped(self):
        f0 = LatticeField(1, {(0,): 1.0, (1,): -1.0})
        geom = SupportGeometry(_domain(5), SupportDomain.from_field(f0))
        f = LatticeField.delta((5,), 1 - 2j)
        n = 200
        report = retrieve_source_detailed(simulate_intensity(f + f0, n), None, f0, geom)
        assert report.skipped_nodes == 1
        assert report.field[(5,)] == pytest.approx(1 - 2j, abs=1e-10)

    def test_report_contents(self, random_field):
        geom = SupportGeometry(_domain(5), _domain(0))
        f0 = LatticeField.delta((0,))
        report = retrieve_source_detailed(
            simulate_intensity(random_field(geom.D) + f0, 12), None, f0, geom
        )
        assert report.as_dict() == {
            "skipped_nodes": 0,
            "total_nodes": 12,
            "grid_size": 12,
            "convention": "centered_at_O",
        }
        assert report.cross_term.support <= {(5,)}


# ---------------------------------------------------------------------------
# Far-field intensities
# ---------------------------------------------------------------------------


class TestIntensityFromFarField:
    def test_matches_spectrum_at_kappa(self, random_field):

        g = random_field(SupportDomain.box([0, 0], [1, 1]))
        window = _far_field_window(8, 3)
        (ds,) = _datasets(g, window, signs=("minus",))
        samples = intensity_from_farfield(ds)
        expected = np.abs(spectrum_at(g, window_geometry(window, "minus").points)) ** 2
        np.testing.assert_allclose(samples.values, expected, rtol=1e-10)

    def test_length_checked(self):
        window = _far_field_window(8, 3)
        with pytest.raises(WindowMismatchError):
            IntensityDataset(window, np.ones(5))


class TestFitAutocorrelation:
    def test_recovers_torus_intensity(self, random_field):
        D = _domain((2, 0), (3, 1))
        g = random_field(D)
        geom = SupportGeometry(D, _domain((0, 0)), strict=False)
        window = _far_field_window(48, 6)
        samples = intensity_from_farfield(_datasets(g, window, signs=("minus",))[0])
        n = geom.min_grid_size()
        spec, report = fit_autocorrelation(samples, geom.autocorrelation_support, n)
        np.testing.assert_allclose(spec.values, simulate_intensity(g, n).values, atol=1e-10)
        assert report.n_samples == 288

    def test_too_few_samples(self):
        samples = SpectralSamples(np.zeros((2, 1)), np.ones(2))
        with pytest.raises(InsufficientCoverageError):
            fit_autocorrelation(samples, _domain(-2, -1, 0, 1, 2), 8)

    def test_repeated_points_do_not_cover(self):
        points = np.tile([[0.3]], (50, 1))
        with pytest.raises(InsufficientCoverageError):
            fit_autocorrelation(SpectralSamples(points, np.ones(50)), _domain(-1, 0, 1), 8)


class TestPhaselessFarField:
    @pytest.mark.parametrize("band", [(0.5, 3.5), (1.5, 2.5)])
    def test_far_apart_pipeline(self, band, random_field):
        D, D0 = _domain((6, 0), (7, 0)), _domain((0, 0))
        geom = SupportGeometry(D, D0)
        f, f0 = random_field(D), random_field(D0)
        window = _far_field_window(band=band)
        rec, report = phaseless_farfield_reconstruct(_datasets(f + f0, window), None, f0, geom)
        assert _relative_error(rec, f) < 1e-8
        assert report.source_fit is None
        assert report.sum_fit.n_samples == 2 * 96 * 12

    @pytest.mark.parametrize("band", [(0.5, 3.5), (1.5, 2.5)])
    def test_disjoint_pipeline(self, band, random_field):
        D, D0 = _domain((1, 0), (2, 0)), _domain((0, 0))
        geom = SupportGeometry(D, D0, "disjoint")
        f, f0 = random_field(D), random_field(D0)
        window = _far_field_window(band=band)
        rec, report = phaseless_farfield_reconstruct(
            _datasets(f + f0, window), _datasets(f, window), f0, geom
        )
        assert _relative_error(rec, f) < 1e-8
        assert "source_fit_sigma_min" in report.as_dict()

    def test_disjoint_pipeline_needs_source_data(self, random_field):
        D, D0 = _domain((1, 0), (2, 0)), _domain((0, 0))
        geom = SupportGeometry(D, D0, "disjoint")
        f, f0 = random_field(D), random_field(D0)
        with pytest.raises(ConfigurationError):
            phaseless_farfield_reconstruct(_datasets(f + f0, _far_field_window()), None, f0, geom)

    def test_no_data_rejected(self, random_field):
        geom = SupportGeometry(_domain((6, 0)), _domain((0, 0)))
        with pytest.raises(ConfigurationError):
            phaseless_farfield_reconstruct([], None, LatticeField.delta((0, 0)), geom)
