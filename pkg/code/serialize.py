#!/usr/bin/env python3
"""JSON file formats for matrices, points, realizations, measures and reports.

Every float is written as a hex-float string (`float.hex`), which round trips
bit for bit; a `*_decimal` mirror is written next to it for people and is
never read back. Loaders accept either hex strings or plain JSON numbers.

MatrixFile        {"rows", "cols", "re", "re_decimal"[, "im", "im_decimal"]}
point file        {"k", "n", "X": [MatrixFile, ...]}  (a bare MatrixFile is k = 1)
RealizationFile   {"k", "m", "e", "A0": MatrixFile, "A": [MatrixFile, ...]}
MeasureFile       {"n", "atoms": [MatrixFile, ...], "weights"}
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from measures import Coupling, DiscreteMeasure, UpperSetCertificate
from numlin import DimensionError, MatrixTuple
from pencil import PencilRealization
from verify import DecompositionCertificate, VerificationReport


def to_hex(x: float) -> str:
    return float(x).hex()


def from_number(value: Any) -> float:
    if isinstance(value, str):
        return float.fromhex(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError(f"expected a number or hex-float string, got {value!r}")
    return float(value)


def _hex_list(values) -> list:
    return [to_hex(v) for v in np.asarray(values, dtype=float).reshape(-1)]


def _num_list(values: Sequence) -> np.ndarray:
    return np.array([from_number(v) for v in values], dtype=float)


def _grid(rows: Sequence, n_rows: int, n_cols: int, name: str) -> np.ndarray:
    if len(rows) != n_rows or any(len(r) != n_cols for r in rows):
        raise DimensionError(f"{name} is not a {n_rows} x {n_cols} grid")
    return np.array([[from_number(v) for v in r] for r in rows], dtype=float).reshape(n_rows, n_cols)


# ---------- matrices and points ----------

def matrix_to_dict(a) -> dict:
    a = np.asarray(a)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    re = np.real(a).astype(float)
    out = {
        "rows": a.shape[0],
        "cols": a.shape[1],
        "re": [[to_hex(v) for v in row] for row in re],
        "re_decimal": re.tolist(),
    }
    if np.iscomplexobj(a):
        im = np.imag(a).astype(float)
        out["im"] = [[to_hex(v) for v in row] for row in im]
        out["im_decimal"] = im.tolist()
    return out


def matrix_from_dict(d: dict) -> np.ndarray:
    rows, cols = int(d["rows"]), int(d["cols"])
    re = _grid(d["re"], rows, cols, "re")
    if "im" in d:
        return re + 1j * _grid(d["im"], rows, cols, "im")
    return re


def point_to_dict(items: Sequence[np.ndarray]) -> dict:
    items = [np.asarray(x) for x in items]
    return {"k": len(items), "n": items[0].shape[0], "X": [matrix_to_dict(x) for x in items]}


def point_from_dict(d: dict) -> list[np.ndarray]:
    if "X" not in d:
        return [matrix_from_dict(d)]
    items = [matrix_from_dict(x) for x in d["X"]]
    if len(items) != int(d.get("k", len(items))):
        raise DimensionError(f"point declares k={d['k']} but lists {len(items)} matrices")
    n = int(d.get("n", items[0].shape[0]))
    if any(x.shape != (n, n) for x in items):
        raise DimensionError(f"point coordinates must all be {n} x {n}")
    return items


def real_point(items: Sequence[np.ndarray]) -> MatrixTuple:
    if any(np.iscomplexobj(x) for x in items):
        raise ValueError("this command needs a real (self-adjoint) point; drop the 'im' field or use --complex")
    return MatrixTuple(tuple(items))


# ---------- realizations and measures ----------

def realization_to_dict(r: PencilRealization) -> dict:
    return {
        "k": r.k,
        "m": r.m,
        "e": _hex_list(r.e),
        "e_decimal": r.e.tolist(),
        "A0": matrix_to_dict(r.a0),
        "A": [matrix_to_dict(a) for a in r.coeffs],
    }


def realization_from_dict(d: dict) -> PencilRealization:
    return PencilRealization(
        k=int(d["k"]),
        m=int(d["m"]),
        e=_num_list(d["e"]),
        a0=matrix_from_dict(d["A0"]),
        coeffs=tuple(matrix_from_dict(a) for a in d["A"]),
    )


def measure_to_dict(mu: DiscreteMeasure) -> dict:
    return {
        "n": mu.n,
        "atoms": [matrix_to_dict(a) for a in mu.atoms],
        "weights": _hex_list(mu.weights),
        "weights_decimal": mu.weights.tolist(),
    }


def measure_from_dict(d: dict) -> DiscreteMeasure:
    atoms = tuple(matrix_from_dict(a) for a in d["atoms"])
    n = int(d["n"])
    if any(a.shape != (n, n) for a in atoms):
        raise DimensionError(f"measure declares n={n} but an atom has another shape")
    return DiscreteMeasure(atoms, _num_list(d["weights"]))


# ---------- reports and certificates ----------

def report_to_dict(report: VerificationReport) -> dict:
    out = report.to_dict()
    out["worst_violation_decimal"] = out["worst_violation"]
    out["worst_violation"] = to_hex(out["worst_violation"])
    out["tol_decimal"] = out["tol"]
    out["tol"] = to_hex(out["tol"])
    return out


def report_from_dict(d: dict) -> VerificationReport:
    report = VerificationReport(
        suite=d["suite"], dims=tuple(d["dims"]), trials=int(d["trials"]),
        seed=int(d["seed"]), tol=from_number(d["tol"]),
        failures=int(d["failures"]), skipped=int(d["skipped"]),
        worst_violation=from_number(d["worst_violation"]),
        first_failing_seed=d["first_failing_seed"],
    )
    if bool(d["pass"]) != report.passed:
        raise ValueError("report 'pass' flag disagrees with its failure count")
    return report


def coupling_to_dict(coupling: Coupling) -> dict:
    return {"verdict": True, "coupling": matrix_to_dict(coupling.gamma)}


def upper_set_to_dict(cert: UpperSetCertificate) -> dict:
    return {
        "verdict": False,
        "U": list(cert.mu_indices),
        "nu_indices": list(cert.nu_indices),
        "mu_mass": to_hex(cert.mu_mass),
        "mu_mass_decimal": cert.mu_mass,
        "nu_mass": to_hex(cert.nu_mass),
        "nu_mass_decimal": cert.nu_mass,
    }


def decomposition_to_dict(cert: DecompositionCertificate) -> dict:
    return {
        "V": matrix_to_dict(cert.isometry),
        "tuples": matrix_to_dict(cert.tuples),
        "sizes": list(cert.sizes),
        "weights": _hex_list(cert.weights),
        "weights_decimal": cert.weights.tolist(),
        "z": to_hex(cert.z),
    }


def decomposition_from_dict(d: dict) -> DecompositionCertificate:
    return DecompositionCertificate(
        isometry=matrix_from_dict(d["V"]),
        tuples=matrix_from_dict(d["tuples"]),
        sizes=tuple(int(s) for s in d["sizes"]),
        z=from_number(d["z"]),
    )


# ---------- files ----------

def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2)


def read_json(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object at the top level")
    return data


def write_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")
