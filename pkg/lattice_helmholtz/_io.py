"""
File formats: JSON for fields, spectra and windows, CSV for datasets.

JSON documents are validated with pydantic models on read. Floats are
written with repr precision and rows in a fixed order, so the same data
always produces the same bytes.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Literal, Sequence

import numpy as np
from pydantic import BaseModel, Field, ValidationInfo, field_validator

from ._dispersion import GeometryRow
from ._forward import AsymptoticRow, FarFieldSample
from ._lattice import LatticeField, TorusSpectrum
from ._window import SpectralWindow

# ---------------------------------------------------------------------------
# JSON models
# ---------------------------------------------------------------------------


class FieldEntry(BaseModel):
    x: list[int]
    re: float
    im: float = 0.0


class FieldDocument(BaseModel):
    dim: int = Field(ge=1, le=3)
    entries: list[FieldEntry] = Field(default_factory=list)

    @field_validator("entries")
    @classmethod
    def _points_match_dim(cls, entries: list[FieldEntry], info: ValidationInfo) -> list[FieldEntry]:
        dim = info.data.get("dim")
        for e in entries:
            if dim is not None and len(e.x) != dim:
                raise ValueError(f"point {e.x} does not have {dim} coordinates")
        return entries


class SpectrumDocument(BaseModel):
    dim: int = Field(ge=1, le=3)
    grid_size: int = Field(ge=4)
    convention: Literal["centered_at_O", "centered_at_Opi"] = "centered_at_O"
    values: list[tuple[float, float]]


class WindowDocument(BaseModel):
    directions: list[list[float]] = Field(min_length=1)
    lambdas: list[float] = Field(min_length=1)
    weights: list[float] | None = None
    sign: Literal["+", "-", "plus", "minus"] = "-"


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------


def field_to_document(u: LatticeField) -> dict[str, Any]:
    return {
        "dim": u.dim,
        "entries": [
            {"x": list(x), "re": float(v.real), "im": float(v.imag)} for x, v in u.entries.items()
        ],
    }


def field_from_document(doc: dict[str, Any]) -> LatticeField:
    parsed = FieldDocument.model_validate(doc)
    return LatticeField(parsed.dim, {tuple(e.x): complex(e.re, e.im) for e in parsed.entries})


def spectrum_to_document(s: TorusSpectrum) -> dict[str, Any]:
    flat = s.values.reshape(-1)
    return {
        "dim": s.dim,
        "grid_size": s.grid_size,
        "convention": s.convention,
        "values": [[float(v.real), float(v.imag)] for v in flat],
    }


def spectrum_from_document(doc: dict[str, Any]) -> TorusSpectrum:
    parsed = SpectrumDocument.model_validate(doc)
    values = np.array([complex(re, im) for re, im in parsed.values])
    return TorusSpectrum(parsed.dim, parsed.grid_size, values, parsed.convention)


def window_from_document(doc: dict[str, Any]) -> tuple[SpectralWindow, str]:
    """A product window and its sign; weights, if present, follow sample order."""
    parsed = WindowDocument.model_validate(doc)
    window = SpectralWindow.product(parsed.directions, parsed.lambdas, parsed.weights)
    return window, parsed.sign


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_json(path: Path, doc: Any) -> Path:
    path.write_text(dumps(doc), encoding="utf-8")
    return path


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def read_field(path: Path) -> LatticeField:
    return field_from_document(read_json(path))


def write_field(path: Path, u: LatticeField) -> Path:
    return write_json(path, field_to_document(u))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(x: float | int | str) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def render_csv(header: Sequence[str], rows: Iterable[Sequence[float | int | str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[float | int | str]]) -> Path:
    path.write_text(render_csv(header, rows), encoding="utf-8")
    return path


def _axes(prefix: str, dim: int) -> list[str]:
    return [f"{prefix}_{i + 1}" for i in range(dim)]


def far_field_csv(samples: Sequence[FarFieldSample], dim: int) -> tuple[list[str], list[list]]:
    header = _axes("omega", dim) + ["lambda", "sign", "re", "im"]
    rows = [
        [*s.omega, s.lam, "+" if s.sign == "plus" else "-", s.value.real, s.value.imag]
        for s in samples
    ]
    return header, rows


def asymptotic_csv(rows: Sequence[AsymptoticRow]) -> tuple[list[str], list[list]]:
    header = ["radius", "psi_re", "psi_im", "pred_re", "pred_im", "scaled_residual"]
    body = [
        [r.radius, r.psi.real, r.psi.imag, r.prediction.real, r.prediction.imag, r.scaled_residual]
        for r in rows
    ]
    return header, body


def geometry_csv(rows: Sequence[GeometryRow], dim: int) -> tuple[list[str], list[list]]:
    header = _axes("omega", dim) + ["lambda"] + _axes("kappa", dim) + ["mu", "grad_norm", "curvature"]
    body = [[*r.omega, r.lam, *r.kappa, r.mu, r.grad_norm, r.curvature] for r in rows]
    return header, body


def intensity_csv(
    directions: np.ndarray, lambdas: np.ndarray, branches: Sequence[str], values: np.ndarray
) -> tuple[list[str], list[list]]:
    dim = directions.shape[1]
    header = _axes("omega", dim) + ["lambda", "branch", "intensity"]
    body = [[*w, lam, b, v] for w, lam, b, v in zip(directions, lambdas, branches, values)]
    return header, body


def scattering_csv(
    ks: np.ndarray, omegas: np.ndarray, lambdas: np.ndarray, values: np.ndarray
) -> tuple[list[str], list[list]]:
    """Complex amplitudes give re/im columns, real intensities one column."""
    dim = ks.shape[1]
    complex_data = np.iscomplexobj(values)
    header = _axes("k", dim) + _axes("omega", dim) + ["lambda"]
    header += ["re", "im"] if complex_data else ["intensity"]
    body = []
    for k, w, lam, v in zip(ks, omegas, lambdas, values):
        tail = [v.real, v.imag] if complex_data else [v]
        body.append([*k, *w, lam, *tail])
    return header, body
