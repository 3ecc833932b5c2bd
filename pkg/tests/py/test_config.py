"""Tests for experiment config validation and loading."""

from __future__ import annotations

import json

import numpy as np
import pytest
from pydantic import ValidationError

from lattice_helmholtz._config import (
    DEFAULT_RADII,
    REQUIRED_FIELDS,
    SUBCOMMANDS,
    DomainSpec,
    ExperimentConfig,
    WindowSpec,
    load_config,
)
from lattice_helmholtz._errors import ConfigurationError


def _make_config(**kwargs) -> ExperimentConfig:
    return ExperimentConfig.model_validate(kwargs)


def _write(tmp_path, doc, name: str = "config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


# ---------------------------------------------------------------------------
# Defaults and aliases
# ---------------------------------------------------------------------------


class TestDefaults:
    def test_defaults(self):
        cfg = _make_config()
        assert cfg.dim == 2
        assert cfg.sign == "minus"
        assert cfg.radii == list(DEFAULT_RADII)
        assert cfg.window.n_directions == 64
        assert cfg.resolvent_config().schedule(2) == (1e-3, 5e-4, 2.5e-4)
        assert cfg.resolvent_config().epsilon_schedule is None

    def test_lambda_alias(self):
        assert _make_config(**{"lambda": 2.5}).lam == 2.5
        assert _make_config(lam=2.5).lam == 2.5

    def test_dump_uses_alias(self):
        dumped = _make_config(**{"lambda": 1.0}).model_dump(mode="json", by_alias=True)
        assert dumped["lambda"] == 1.0

    def test_every_subcommand_has_requirements(self):
        assert set(REQUIRED_FIELDS) == set(SUBCOMMANDS)

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            _make_config(lamda=2.0)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


class TestValidation:
    def test_exceptional_lambda_rejected(self):
        with pytest.raises(ValidationError) as exc:
            _make_config(**{"lambda": 4.0})
        assert "S0" in str(exc.value)
        assert "lambda" in str(exc.value)

    def test_window_lambdas_checked(self):
        with pytest.raises(ValidationError):
            _make_config(dim=3, window={"lambdas": [3.0, 1.0]})

    def test_band_endpoints_checked(self):
        with pytest.raises(ValidationError):
            _make_config(window={"band": [0.5, 4.5]})

    def test_roots_checked(self):
        with pytest.raises(ValidationError):
            _make_config(roots=[2.0, -4.0])

    def test_domain_dimension_checked(self):
        with pytest.raises(ValidationError) as exc:
            _make_config(dim=3, domain={"box": [[0, 0], [1, 1]]})
        assert "domain" in str(exc.value)

    def test_direction_length_checked(self):
        with pytest.raises(ValidationError):
            _make_config(direction=[1, 0, 0])

    def test_schema_version_checked(self):
        with pytest.raises(ValidationError) as exc:
            _make_config(schema_version=2)
        assert "schema_version" in str(exc.value)

    def test_dimension_range(self):
        with pytest.raises(ValidationError):
            _make_config(dim=4)

    @pytest.mark.parametrize(
        "subcommand, doc, field",
        [
            ("asympt", {}, "lambda"),
            ("forward", {}, "window"),
            ("invert", {"lambda": 2.0}, "domain"),
            ("nonuniq", {}, "roots"),
            ("phaseless", {"lambda": 2.0, "domain": {"points": [[6, 0]]}}, "background_domain"),
        ],
    )
    def test_missing_field_named(self, subcommand, doc, field):
        with pytest.raises(ConfigurationError) as exc:
            _make_config(**doc).require(subcommand)
        assert exc.value.field == field

    def test_born_forward_runs_without_domain(self):
        cfg = _make_config(**{"lambda": 2.0})
        cfg.require("born-forward")
        assert cfg.domain is None

    def test_explicit_resolvent_schedule_kept(self):
        cfg = _make_config(resolvent={"epsilon_schedule": [1e-2, 5e-3, 2.5e-3]})
        assert cfg.resolvent_config().schedule(3) == (1e-2, 5e-3, 2.5e-3)

    def test_born_needs_two_dimensions(self):
        cfg = _make_config(dim=1, **{"lambda": 1.0}, domain={"points": [[0]]})
        with pytest.raises(ConfigurationError) as exc:
            cfg.require("born-invert")
        assert exc.value.field == "dim"


# ---------------------------------------------------------------------------
# Sub-models
# ---------------------------------------------------------------------------


class TestDomainSpec:
    def test_box(self):
        assert len(DomainSpec(box=([0, 0], [2, 1])).build()) == 6

    def test_points(self):
        spec = DomainSpec(points=[[3, 1], [0, 0]])
        assert spec.dim == 2
        assert spec.build().points == ((0, 0), (3, 1))

    def test_needs_exactly_one_form(self):
        with pytest.raises(ValidationError):
            DomainSpec()
        with pytest.raises(ValidationError):
            DomainSpec(box=([0], [1]), points=[[0]])


class TestWindowSpec:
    def test_lambda_list(self):
        window, _ = WindowSpec(lambdas=[1.0, 2.0], n_directions=5).build(2)
        assert len(window) == 10

    def test_band(self):
        spec = WindowSpec(band=(1.0, 3.0), n_lambdas=5)
        assert spec.lambda_values() == pytest.approx([1.0, 1.5, 2.0, 2.5, 3.0])

    def test_fallback_lambda(self):
        assert WindowSpec().lambda_values(2.0) == [2.0]

    def test_no_lambdas(self):
        with pytest.raises(ConfigurationError) as exc:
            WindowSpec().lambda_values()
        assert exc.value.field == "window"

    def test_window_file(self, tmp_path):
        path = _write(
            tmp_path,
            {"directions": [[1.0, 0.0], [0.0, 1.0]], "lambdas": [1.5], "sign": "plus"},
            "window.json",
        )
        window, sign = WindowSpec(file=path).build(2)
        assert sign == "plus"
        np.testing.assert_array_equal(window.lambdas, [1.5, 1.5])

    def test_window_file_dimension_checked(self, tmp_path):
        path = _write(tmp_path, {"directions": [[1.0]], "lambdas": [1.0]}, "window.json")
        with pytest.raises(ConfigurationError):
            WindowSpec(file=path).build(2)

    def test_missing_window_file(self, tmp_path):
        with pytest.raises(ValidationError):
            WindowSpec(file=tmp_path / "absent.json")

    def test_config_sign_used_without_file(self):
        cfg = _make_config(sign="plus", window={"lambdas": [2.0]})
        assert cfg.spectral_window()[1] == "plus"


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


class TestLoadConfig:
    def test_subcommand_injected(self, tmp_path):
        cfg = load_config(_write(tmp_path, {"roots": [2.0]}), "nonuniq")
        assert cfg.subcommand == "nonuniq"

    def test_stored_subcommand_kept(self, tmp_path):
        cfg = load_config(_write(tmp_path, {"subcommand": "nonuniq", "roots": [2.0]}))
        assert cfg.subcommand == "nonuniq"

    def test_conflicting_subcommand(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc:
            load_config(_write(tmp_path, {"subcommand": "forward", "roots": [2.0]}), "nonuniq")
        assert exc.value.field == "subcommand"

    def test_requirements_checked_on_load(self, tmp_path):
        with pytest.raises(ValidationError) as exc:
            load_config(_write(tmp_path, {}), "nonuniq")
        assert "roots" in str(exc.value)

    def test_non_object_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(_write(tmp_path, [1, 2]), "nonuniq")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "nope.json", "nonuniq")
