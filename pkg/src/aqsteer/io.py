"""JSON file formats.

Complex numbers are ``[re, im]`` pairs and matrices are row-major nested
lists.  Every file carries a ``"type"`` tag so the CLI can dispatch on it.
Matrices are Hermitised before writing, which makes write -> read -> write a
fixed point.
"""
from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .ghjw import Realization
from .moments import MomentMatrix
from .quantum import Assemblage, Correlation, MeasurementSet, hermitize
from .tomography import TomographyFrame
from .words import Scenario


def complex_to_json(z) -> list:
    z = complex(z)
    return [float(z.real) + 0.0, float(z.imag) + 0.0]   # + 0.0 drops signed zeros, keeping write/read/write stable


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[complex_to_json(z) for z in row] for row in m]


def matrix_from_json(obj) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        raise InvalidInputError("matrix entries must be [re, im] pairs") from None
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise InvalidInputError(f"matrix must be a nested list of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _label(outputs, inputs) -> str:
    return ",".join(str(a) for a in outputs) + "|" + ",".join(str(x) for x in inputs)


def _parse_label(label: str, n: int) -> tuple:
    try:
        outs, ins = label.split("|")
        a = tuple(int(v) for v in outs.split(","))
        x = tuple(int(v) for v in ins.split(","))
    except ValueError:
        raise InvalidInputError(f"malformed label {label!r}; expected 'a1,...,aN|x1,...,xN'") from None
    if len(a) != n or len(x) != n:
        raise InvalidInputError(f"label {label!r} does not have {n} outputs and inputs")
    return a, x


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise InvalidInputError(f"{where}: missing field {key!r}")
    return obj[key]


# ---------------------------------------------------------------------------
# per-type encoders

def assemblage_to_json(a: Assemblage) -> dict:
    s = a.scenario
    el = hermitize(a.elements)
    elements = {}
    for outs in itertools.product(*(range(o) for o in s.outputs)):
        for ins in itertools.product(*(range(i) for i in s.inputs)):
            elements[_label(outs, ins)] = matrix_to_json(el[outs + ins])
    return {"type": "assemblage", "scenario": s.to_json(), "elements": elements}


def assemblage_from_json(obj: dict) -> Assemblage:
    s = Scenario.from_json(_require(obj, "scenario", "assemblage"))
    raw = _require(obj, "elements", "assemblage")
    d = s.bob_dim
    el = np.zeros(s.outputs + s.inputs + (d, d), dtype=complex)
    seen = set()
    for label, m in raw.items():
        a, x = _parse_label(label, s.n_parties)
        try:
            el[a + x] = matrix_from_json(m)
        except (IndexError, ValueError):
            raise InvalidInputError(f"assemblage element {label!r} is out of range or has the wrong shape") from None
        seen.add(a + x)
    if len(seen) != int(np.prod(s.outputs + s.inputs)):
        raise InvalidInputError("assemblage: some elements are missing")
    return Assemblage(s, el)


def correlation_to_json(c: Correlation) -> dict:
    p = {}
    n = c.n_parties
    for idx in itertools.product(*(range(k) for k in c.outputs + c.inputs)):
        p[_label(idx[:n], idx[n:])] = float(c.p[idx])
    out = {"type": "correlation", "shape": {"outputs": list(c.outputs), "inputs": list(c.inputs)}, "p": p}
    if c.frame is not None:
        out["frame"] = frame_to_json(c.frame)
    return out


def correlation_from_json(obj: dict) -> Correlation:
    shape = _require(obj, "shape", "correlation")
    outputs = tuple(int(v) for v in _require(shape, "outputs", "correlation shape"))
    inputs = tuple(int(v) for v in _require(shape, "inputs", "correlation shape"))
    p = np.zeros(outputs + inputs)
    raw = _require(obj, "p", "correlation")
    for label, value in raw.items():
        a, x = _parse_label(label, len(outputs))
        try:
            p[a + x] = float(value)
        except IndexError:
            raise InvalidInputError(f"correlation entry {label!r} out of range") from None
    if len(raw) != p.size:
        raise InvalidInputError("correlation: some probabilities are missing")
    frame = frame_from_json(obj["frame"]) if "frame" in obj else None
    return Correlation(outputs, inputs, p, frame)


def realization_to_json(r: Realization) -> dict:
    ops = hermitize(r.measurements.operators)
    projectors = {f"{a}|{x}": matrix_to_json(ops[x, a])
                  for x in range(ops.shape[0]) for a in range(ops.shape[1])}
    return {"type": "realization", "alice_dim": r.alice_dim, "bob_dim": r.bob_dim,
            "state": [complex_to_json(z) for z in r.state], "projectors": projectors}


def realization_from_json(obj: dict) -> Realization:
    dim_a = int(_require(obj, "alice_dim", "realization"))
    dim_b = int(_require(obj, "bob_dim", "realization"))
    state = np.asarray(_require(obj, "state", "realization"), dtype=float)
    if state.ndim != 2 or state.shape[1] != 2:
        raise InvalidInputError("realization: state must be a list of [re, im] pairs")
    raw = _require(obj, "projectors", "realization")
    labels = [tuple(int(v) for v in k.split("|")) for k in raw]
    n_out = max(a for a, _ in labels) + 1
    n_in = max(x for _, x in labels) + 1
    ops = np.zeros((n_in, n_out, dim_a, dim_a), dtype=complex)
    for key, m in raw.items():
        a, x = (int(v) for v in key.split("|"))
        ops[x, a] = matrix_from_json(m)
    return Realization(dim_a, dim_b, state[:, 0] + 1j * state[:, 1], MeasurementSet(ops))


def frame_to_json(f: TomographyFrame) -> dict:
    ops = hermitize(f.measurements.operators)
    meas = {f"{b}|{y}": matrix_to_json(ops[y, b]) for y in range(f.n_inputs) for b in range(f.n_outputs)}
    dual = {f"{b}|{y}": matrix_to_json(f.dual[y, b]) for y in range(f.n_inputs) for b in range(f.n_outputs)}
    return {"type": "frame", "name": f.name, "dim": f.dim, "measurements": meas, "dual": dual}


def frame_from_json(obj: dict) -> TomographyFrame:
    d = int(_require(obj, "dim", "frame"))
    raw = _require(obj, "measurements", "frame")
    labels = [tuple(int(v) for v in k.split("|")) for k in raw]
    n_out = max(b for b, _ in labels) + 1
    n_in = max(y for _, y in labels) + 1
    ops = np.zeros((n_in, n_out, d, d), dtype=complex)
    for key, m in raw.items():
        b, y = (int(v) for v in key.split("|"))
        ops[y, b] = matrix_from_json(m)
    # duals are recomputed so a file cannot smuggle in an inconsistent reconstruction map
    return TomographyFrame.from_measurements(MeasurementSet(ops), obj.get("name", "custom"))


def moment_to_json(m: MomentMatrix) -> dict:
    herm = (m.entries + np.conj(np.transpose(m.entries, (1, 0, 3, 2)))) / 2
    return MomentMatrix(m.scenario, m.words, herm, m.kind).to_json()


_DECODERS = {
    "assemblage": assemblage_from_json,
    "correlation": correlation_from_json,
    "realization": realization_from_json,
    "frame": frame_from_json,
    "moment-matrix": MomentMatrix.from_json,
}


def to_json(obj) -> dict:
    if isinstance(obj, Assemblage):
        return assemblage_to_json(obj)
    if isinstance(obj, Correlation):
        return correlation_to_json(obj)
    if isinstance(obj, Realization):
        return realization_to_json(obj)
    if isinstance(obj, TomographyFrame):
        return frame_to_json(obj)
    if isinstance(obj, MomentMatrix):
        return moment_to_json(obj)
    if isinstance(obj, dict):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(to_json(obj), indent=1, ensure_ascii=False) + "\n"


def save(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def loads(text: str, expected=None):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict) or "type" not in obj:
        raise InvalidInputError("file must be a JSON object with a 'type' field")
    kind = obj["type"]
    if expected is not None:
        allowed = (expected,) if isinstance(expected, str) else tuple(expected)
        if kind not in allowed:
            raise InvalidInputError(f"expected a {' or '.join(allowed)} file, got {kind!r}")
    if kind not in _DECODERS:
        raise InvalidInputError(f"unknown file type {kind!r}")
    try:
        return _DECODERS[kind](obj)
    except (TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed {kind} file: {exc}") from None


def load(path, expected=None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, expected)
