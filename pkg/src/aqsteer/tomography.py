"""Tomographically complete measurement frames and linear-inversion reconstruction."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import InvalidInputError
from .quantum import Assemblage, Correlation, MeasurementSet, assemblage_correlation

MAX_FRAME_DIM = 8

_PAULI_BASES = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
    "Z": np.eye(2, dtype=complex),
}


def _real_coordinates(ops: np.ndarray) -> np.ndarray:
    """Rows are real vectors whose dot product is the Hilbert-Schmidt inner product."""
    flat = ops.reshape(ops.shape[0], -1)
    return np.concatenate([flat.real, flat.imag], axis=1)


def span_rank(ops, tol: float = 1e-9) -> int:
    ops = np.asarray(ops, dtype=complex)
    ops = ops.reshape((-1,) + ops.shape[-2:])
    return int(np.linalg.matrix_rank(_real_coordinates(ops), tol=tol))


@dataclass(frozen=True)
class TomographyFrame:
    """Projective measurements ``measurements.operators[y, b]`` and duals ``dual[y, b]``.

    ``Σ_{b,y} Tr(Π_{b|y} H) dual[y, b] = H`` for every d×d matrix H.
    """

    measurements: MeasurementSet
    dual: np.ndarray
    name: str = "custom"

    @property
    def dim(self) -> int:
        return self.measurements.dim

    @property
    def n_inputs(self) -> int:
        return self.measurements.n_inputs

    @property
    def n_outputs(self) -> int:
        return self.measurements.n_outputs

    @property
    def rank(self) -> int:
        return span_rank(self.measurements.operators)

    @classmethod
    def from_measurements(cls, meas: MeasurementSet, name: str = "custom") -> "TomographyFrame":
        if not meas.is_valid(1e-8):
            raise InvalidInputError("frame measurements must be complete and positive")
        d = meas.dim
        ops = meas.operators.reshape((-1, d, d))
        coords = _real_coordinates(ops)
        if np.linalg.matrix_rank(coords, tol=1e-9) != d * d:
            raise InvalidInputError(f"measurements span less than the {d * d}-dimensional operator space")
        # minimum-norm dual frame; rows of pinv(coords).T are the dual operators
        dual_coords = np.linalg.pinv(coords).T
        half = d * d
        dual = (dual_coords[:, :half] + 1j * dual_coords[:, half:]).reshape(meas.operators.shape)
        return cls(meas, dual, name)

    def probabilities(self, h) -> np.ndarray:
        """``p[b, y] = Tr(Π_{b|y} H)``; complex when H is not Hermitian."""
        h = np.asarray(h, dtype=complex)
        p = np.einsum("ybij,...ji->...by", self.measurements.operators, h)
        return p.real if np.isrealobj(h) or np.allclose(p.imag, 0, atol=1e-15) else p


def pauli_frame(n_qubits: int) -> TomographyFrame:
    """Eigenbases of all n-fold tensor products of X, Y and Z."""
    if n_qubits < 1 or 2 ** n_qubits > MAX_FRAME_DIM:
        raise InvalidInputError(f"pauli_frame supports 1..{int(np.log2(MAX_FRAME_DIM))} qubits")
    bases = []
    for labels in itertools.product("XYZ", repeat=n_qubits):
        basis = np.ones((1, 1), dtype=complex)
        for lab in labels:
            basis = np.kron(basis, _PAULI_BASES[lab])
        bases.append(basis)
    return TomographyFrame.from_measurements(MeasurementSet.from_bases(bases), name=f"pauli-{n_qubits}")


def gell_mann_frame(dim: int) -> TomographyFrame:
    """Computational basis plus the eigenbases of the off-diagonal Gell-Mann operators.

    Each pair j < k contributes ``(|j> ± |k>)/√2`` and ``(|j> ± i|k>)/√2``,
    completed with the remaining computational basis vectors.
    """
    if dim < 1 or dim > MAX_FRAME_DIM:
        raise InvalidInputError(f"frame dimension must be in 1..{MAX_FRAME_DIM}")
    eye = np.eye(dim, dtype=complex)
    bases = [eye]
    for j, k in itertools.combinations(range(dim), 2):
        for phase in (1.0, 1j):
            basis = eye.copy()
            basis[:, j] = (eye[:, j] + phase * eye[:, k]) / np.sqrt(2)
            basis[:, k] = (eye[:, j] - phase * eye[:, k]) / np.sqrt(2)
            bases.append(basis)
    return TomographyFrame.from_measurements(MeasurementSet.from_bases(bases), name=f"gell-mann-{dim}")


def default_frame(dim: int) -> TomographyFrame:
    n = int(round(np.log2(dim))) if dim > 1 else 0
    if n >= 1 and 2 ** n == dim:
        return pauli_frame(n)
    return gell_mann_frame(dim)


ProbInput = Union[np.ndarray, Mapping]


def _probability_array(probs: ProbInput, frame: TomographyFrame) -> np.ndarray:
    shape = (frame.n_outputs, frame.n_inputs)
    if isinstance(probs, Mapping):
        arr = np.zeros(shape, dtype=complex)
        for b, y in itertools.product(range(shape[0]), range(shape[1])):
            if (b, y) not in probs:
                raise InvalidInputError(f"missing probability for outcome {b} of setting {y}")
            arr[b, y] = probs[(b, y)]
        return arr
    arr = np.asarray(probs)
    if arr.shape[-2:] != shape:
        raise InvalidInputError(f"probabilities need trailing shape {shape}, got {arr.shape}")
    return arr


def reconstruct(probs: ProbInput, frame: TomographyFrame) -> np.ndarray:
    """Linear inversion ``Σ_{b,y} p[b, y] D_{b|y}``; leading batch axes are kept."""
    arr = _probability_array(probs, frame)
    out = np.einsum("...by,ybij->...ij", arr, frame.dual)
    return out


def is_tomographically_complete(meas: MeasurementSet, dim: int) -> bool:
    if meas.dim != dim:
        return False
    return span_rank(meas.operators) == dim * dim


def tomographic_correlation(assemblage: Assemblage, frame: TomographyFrame) -> Correlation:
    """Bell correlation of the Alices together with Bob measuring the frame."""
    corr = assemblage_correlation(assemblage, frame.measurements)
    corr.frame = frame
    return corr


def reconstruct_assemblage(corr: Correlation, frame: TomographyFrame, scenario) -> Assemblage:
    """Invert :func:`tomographic_correlation` element by element."""
    n = corr.n_parties - 1
    # p layout: alice outputs, b, alice inputs, y  ->  alice outputs, alice inputs, b, y
    order = list(range(n)) + list(range(n + 1, 2 * n + 1)) + [n, 2 * n + 1]
    return Assemblage(scenario, reconstruct(np.transpose(corr.p, order), frame))
