"""JSON and CSV encodings of matrices, mesh settings, calibration tables and
experiment reports.

Output is byte-stable: object keys are sorted and every float is written
with 17 significant digits (``%.17g``), which round-trips IEEE doubles
exactly. Matrices are ``{"re": [[...]], "im": [[...]]}``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any

import jsonschema
import numpy as np

from .calibration import CalibrationTable, FringeFit, MZICalibration
from .decompose import MeshSettings
from .errors import ValidationError
from .mesh import MZISetting, TuningCurve
from .protocols import ExperimentReport, SwitchResult, TritterResult

__all__ = [
    "MATRIX_SCHEMA",
    "SETTINGS_SCHEMA",
    "calibration_from_json",
    "calibration_to_csv",
    "calibration_to_json",
    "dumps",
    "intensities_to_csv",
    "loads",
    "matrix_from_json",
    "matrix_to_json",
    "report_to_csv",
    "report_to_json",
    "settings_from_json",
    "settings_to_json",
    "switch_to_csv",
    "switch_to_json",
    "table_csv",
    "tritter_to_csv",
    "tritter_to_json",
    "validate",
]

_real_rows = {"type": "array", "minItems": 1,
              "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}

MATRIX_SCHEMA = {
    "type": "object",
    "properties": {"re": _real_rows, "im": _real_rows},
    "required": ["re", "im"],
    "additionalProperties": False,
}

_setting = {
    "type": "object",
    "properties": {"theta": {"type": "number"}, "phi": {"type": "number"}},
    "required": ["theta", "phi"],
    "additionalProperties": False,
}

SETTINGS_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"const": "mesh_settings"},
        "n_modes": {"type": "integer", "minimum": 2},
        "layers": {"type": "array", "items": {"type": "array", "items": _setting}},
        "output_phases": {"type": "array", "items": {"type": "number"}},
        "global_phase": {"type": "number"},
    },
    "required": ["kind", "n_modes", "layers", "output_phases"],
    "additionalProperties": False,
}


# --- canonical JSON ------------------------------------------------------

def _float(x: float) -> str:
    t = "%.17g" % x
    # keep floats recognisable as floats after a round trip
    return t if any(c in t for c in ".en") else t + ".0"


def _encode(obj: Any, out: list[str]):
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValidationError(f"cannot encode non-finite float {x} as JSON")
        out.append(_float(x))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj, key=str)):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)) + ": ")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(", ")
            _encode(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__} as JSON")


def dumps(obj: Any) -> str:
    """Canonical JSON text: sorted keys, ``%.17g`` floats, trailing newline."""
    out: list[str] = []
    _encode(obj, out)
    return "".join(out) + "\n"


def loads(text: str, source: str = "<input>") -> Any:
    """Parse JSON, reporting syntax errors as ``source:line:col: message``."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def validate(doc: Any, schema: dict, source: str = "<input>"):
    """Schema check with a ``source: field 'a.b': message`` diagnostic."""
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"{source}: field '{where}': {exc.message}") from None


# --- matrices and settings -------------------------------------------------

def matrix_to_json(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_json(doc: Any, source: str = "<input>") -> np.ndarray:
    validate(doc, MATRIX_SCHEMA, source)
    try:
        re = np.array(doc["re"], dtype=float)
        im = np.array(doc["im"], dtype=float)
    except ValueError:
        raise ValidationError(f"{source}: field 're'/'im': rows must have equal length") from None
    if re.ndim != 2 or re.shape != im.shape:
        raise ValidationError(f"{source}: field 're'/'im': shapes {re.shape} and {im.shape} differ")
    return re + 1j * im


def settings_to_json(s: MeshSettings) -> dict:
    return {
        "kind": "mesh_settings",
        "n_modes": s.n_modes,
        "layers": [[{"theta": m.theta, "phi": m.phi} for m in layer] for layer in s.layers],
        "output_phases": list(s.output_phases),
        "global_phase": s.global_phase,
    }


def settings_from_json(doc: Any, source: str = "<input>") -> MeshSettings:
    validate(doc, SETTINGS_SCHEMA, source)
    layers = tuple(tuple(MZISetting(m["theta"], m["phi"]) for m in layer) for layer in doc["layers"])
    try:
        return MeshSettings(doc["n_modes"], layers, tuple(doc["output_phases"]),
                            doc.get("global_phase", 0.0))
    except ValueError as exc:
        raise ValidationError(f"{source}: field 'layers': {exc}") from None


# --- calibration ------------------------------------------------------------

def _fit_to_json(fit: FringeFit | None) -> dict | None:
    if fit is None:
        return None
    return {"alpha": fit.curve.alpha, "phi0": fit.curve.phi0, "levels": fit.curve.levels,
            "offset": fit.offset, "amplitude": fit.amplitude, "phase": fit.phase,
            "residual_rms": fit.residual_rms, "visibility": fit.visibility,
            "coupling_product": fit.coupling_product}


def _fit_from_json(d: dict | None) -> FringeFit | None:
    if d is None:
        return None
    curve = TuningCurve(d["alpha"], d["phi0"], d["levels"])
    return FringeFit(curve, d["offset"], d["amplitude"], d["phase"], d["residual_rms"])


def calibration_to_json(table: CalibrationTable) -> dict:
    return {
        "kind": "calibration_table",
        "entries": [{"module": k, "mzi": j,
                     "internal": _fit_to_json(c.internal),
                     "external": _fit_to_json(c.external)}
                    for (k, j), c in sorted(table.entries.items())],
    }


def calibration_from_json(doc: Any, source: str = "<input>") -> CalibrationTable:
    if not isinstance(doc, dict) or doc.get("kind") != "calibration_table":
        raise ValidationError(f"{source}: field 'kind': expected 'calibration_table'")
    try:
        return CalibrationTable({
            (e["module"], e["mzi"]): MZICalibration(_fit_from_json(e["internal"]),
                                                    _fit_from_json(e.get("external")))
            for e in doc["entries"]})
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{source}: field 'entries': {exc}") from None


def calibration_to_csv(table: CalibrationTable) -> str:
    """Columns: module, mzi, heater, alpha, phi0, visibility, coupling_product, residual_rms."""
    rows = []
    for (k, j), c in sorted(table.entries.items()):
        for name, fit in (("internal", c.internal), ("external", c.external)):
            if fit is not None:
                rows.append([k, j, name, fit.curve.alpha, fit.curve.phi0, fit.visibility,
                             fit.coupling_product, fit.residual_rms])
    return table_csv(["module", "mzi", "heater", "alpha", "phi0", "visibility",
                 "coupling_product", "residual_rms"], rows)


# --- experiments --------------------------------------------------------------

def _words(words) -> list:
    return [np.asarray(w, dtype=float).tolist() for w in words]


def report_to_json(report: ExperimentReport) -> dict:
    return {
        "kind": report.kind,
        "modes": list(report.modes),
        "summary": report.summary(),
        "records": [{
            "trial": r.trial,
            "target": None if r.target is None else matrix_to_json(r.target),
            "settings": None if r.settings is None else settings_to_json(r.settings),
            "measured": None if r.measured is None else np.asarray(r.measured).tolist(),
            "fidelity": r.fidelity,
            "error": r.error,
        } for r in report.records],
    }


def report_to_csv(report: ExperimentReport) -> str:
    """Columns: trial, fidelity, error (empty fields when absent)."""
    return table_csv(["trial", "fidelity", "error"],
                [[r.trial, "" if r.fidelity is None else r.fidelity, r.error or ""]
                 for r in report.records])


def switch_to_json(results: list[SwitchResult]) -> dict:
    return {
        "kind": "switch",
        "input_mode": results[0].input_mode if results else None,
        "results": [{
            "output_mode": r.output_mode,
            "path": [list(p) for p in r.path],
            "routed_fraction": r.routed_fraction,
            "output_powers": r.output_powers.tolist(),
            "sweeps": r.sweeps,
            "words": _words(r.words),
        } for r in results],
    }


def switch_to_csv(results: list[SwitchResult]) -> str:
    """Bar-plot layout, one row per (target, output mode) pair.

    Columns: input_mode, target_output, output_mode, normalized_power,
    routed_fraction. Output modes span the reachable set of the input.
    """
    outs = [r.output_mode for r in results]
    rows = []
    for r in results:
        total = r.output_powers.sum()
        for m in outs:
            rows.append([r.input_mode, r.output_mode, m, r.output_powers[m] / total,
                         r.routed_fraction])
    return table_csv(["input_mode", "target_output", "output_mode", "normalized_power",
                 "routed_fraction"], rows)


def tritter_to_json(result: TritterResult) -> dict:
    return {
        "kind": "tritter",
        "modes": list(result.modes),
        "intensities": np.asarray(result.intensities).tolist(),
        "objective": result.objective,
        "converged": result.converged,
        "n_steps": len(result.history),
        "words": _words(result.words),
    }


def tritter_to_csv(result: TritterResult) -> str:
    """Bar-plot layout. Columns: input_mode, output_mode, intensity,
    normalized_intensity (column-normalised over the three outputs)."""
    p = np.asarray(result.intensities)
    q = p / p.sum(axis=0)
    rows = [[result.modes[j], result.modes[i], p[i, j], q[i, j]]
            for j in range(p.shape[1]) for i in range(p.shape[0])]
    return table_csv(["input_mode", "output_mode", "intensity", "normalized_intensity"], rows)


def intensities_to_csv(modes, measured: np.ndarray, ideal: np.ndarray) -> str:
    """Columns: input_mode, output_mode, measured, ideal."""
    rows = [[modes[j], modes[i], measured[i, j], ideal[i, j]]
            for j in range(measured.shape[1]) for i in range(measured.shape[0])]
    return table_csv(["input_mode", "output_mode", "measured", "ideal"], rows)


def table_csv(header: list[str], rows: list[list]) -> str:
    """CSV text with ``%.17g`` floats and ``\\n`` line endings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_float(float(v)) if isinstance(v, (float, np.floating)) else v
                    for v in row])
    return buf.getvalue()
