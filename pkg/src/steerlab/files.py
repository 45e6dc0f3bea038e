"""Readers and writers for target matrices, schedules and CSV tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .linalg import StateValidationError, check_density_matrix
from .protocol import MeasurementStep, ProtocolError, ProtocolSchedule, check_basis

FLOAT_FORMAT = "{:.15g}"


class TargetFileError(ValueError):
    """The target file is not valid JSON or lacks the expected fields."""


def parse_target_file(path) -> np.ndarray:
    """Read ``{"dim": 4, "re": [[...]], "im": [[...]]}`` and validate it as a density matrix."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TargetFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "re" not in doc:
        raise TargetFileError(f"{path}: expected an object with keys 'dim', 're' and optionally 'im'")
    try:
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc.get("im", np.zeros_like(re)), dtype=float)
    except (TypeError, ValueError) as exc:
        raise TargetFileError(f"{path}: matrix entries must be numbers ({exc})") from exc
    dim = doc.get("dim", 4)
    if dim != 4 or re.shape != (4, 4) or im.shape != (4, 4):
        raise StateValidationError("shape", f"target must be 4x4 with dim 4, got dim={dim}, re{re.shape}, im{im.shape}")
    return check_density_matrix(re + 1j * im, dim=4)


def write_target_file(path, rho) -> None:
    rho = np.asarray(rho, dtype=complex)
    doc = {"dim": rho.shape[0], "re": rho.real.tolist(), "im": rho.imag.tolist()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def schedule_to_dict(schedule: ProtocolSchedule) -> dict:
    return {
        "tau": schedule.tau,
        "basis": [[[z.real, z.imag] for z in schedule.basis[:, k]] for k in range(4)],
        "g": schedule.g.tolist(),
        "J": schedule.couplings.tolist(),
        "steps": [{"target": s.target, "source": s.source} for s in schedule.steps],
    }


def schedule_from_dict(doc: dict) -> ProtocolSchedule:
    try:
        tau = float(doc["tau"])
        basis = np.array([[complex(re, im) for re, im in vec] for vec in doc["basis"]]).T
        g = np.asarray(doc["g"], dtype=float)
        couplings = np.asarray(doc["J"], dtype=float)
        order = [(int(s["target"]), int(s["source"])) for s in doc["steps"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed schedule document: {exc}") from exc
    basis = check_basis(basis)
    expected = np.sqrt(12 * g / tau)
    if not np.allclose(couplings, expected, rtol=1e-9, atol=0):
        raise ProtocolError("couplings J are inconsistent with g = J^2 tau / 12")
    steps = tuple(MeasurementStep(i, j, float(couplings[i]), tau) for i, j in order)
    if sorted(order) != sorted((i, j) for i in range(4) for j in range(4) if i != j):
        raise ProtocolError("steps must cover every (target, source) pair exactly once")
    return ProtocolSchedule(basis, tau, g, couplings, steps)


def write_schedule(path, schedule: ProtocolSchedule) -> None:
    Path(path).write_text(json.dumps(schedule_to_dict(schedule), indent=2) + "\n", encoding="utf-8")


def read_schedule(path) -> ProtocolSchedule:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TargetFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return schedule_from_dict(doc)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FORMAT.format(float(value))


def write_csv(path, columns, rows) -> None:
    """Write dict rows (or sequences) with a header, LF line endings and 15 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            values = [row[c] for c in columns] if isinstance(row, dict) else row
            w.writerow([_fmt(v) for v in values])
