"""Quantum realizations of bipartite non-signalling assemblages.

Two constructions:

* assemblage -> moment matrix: purify Bob's reduced state, turn each element
  into a POVM on the purifying system, dilate the POVMs to projective
  measurements and read off the moments of the resulting pure state;
* moment matrix -> realization: factor the moment matrix into Gram vectors,
  take the vectors of the empty word as the shared state and project onto the
  span of each outcome's vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentMomentMatrixError, InvalidInputError, NotPSDError
from .moments import MomentMatrix, moment_from_state
from .quantum import Assemblage, MeasurementSet, born_assemblage, check_nonsignalling, proj, reduced_state
from .sdp import gram_vectors
from .words import Scenario, generate_aq_words

SUPPORT_TOL = 1e-10
SPAN_TOL = 1e-8
OVERLAP_TOL = 1e-6


@dataclass
class Realization:
    """Pure state on ``C^alice_dim ⊗ C^bob_dim`` (Alice first) and Alice's projectors."""

    alice_dim: int
    bob_dim: int
    state: np.ndarray
    measurements: MeasurementSet

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=complex).reshape(-1)
        if self.state.size != self.alice_dim * self.bob_dim:
            raise InvalidInputError("state size does not match alice_dim * bob_dim")
        if self.measurements.dim != self.alice_dim:
            raise InvalidInputError("projector dimension does not match alice_dim")

    @property
    def scenario(self) -> Scenario:
        m = self.measurements
        return Scenario(1, m.n_inputs, m.n_outputs, self.bob_dim)

    def invariant_violation(self) -> float:
        """Largest breach of normalisation, projectivity, orthogonality or completeness."""
        ops = self.measurements.operators
        worst = abs(np.linalg.norm(self.state) - 1.0)
        worst = max(worst, self.measurements.completeness_error())
        for x in range(ops.shape[0]):
            for a in range(ops.shape[1]):
                for a2 in range(ops.shape[1]):
                    target = ops[x, a] if a == a2 else 0.0
                    worst = max(worst, float(np.max(np.abs(ops[x, a] @ ops[x, a2] - target))))
        return float(worst)

    def assemblage(self) -> Assemblage:
        return born_assemblage(self.state, [self.measurements], self.scenario)


def _check_bipartite(assemblage: Assemblage, tol: float = 1e-8):
    if assemblage.n_parties != 1:
        raise InvalidInputError("the construction needs exactly one untrusted party")
    report = check_nonsignalling(assemblage, tol)
    if not report.ok:
        raise InvalidInputError(f"assemblage rejected: {report}")


def _unitary_completion(isometry: np.ndarray) -> np.ndarray:
    """Unitary whose leading columns are those of ``isometry``."""
    rows, cols = isometry.shape
    q, _ = np.linalg.qr(np.concatenate([isometry, np.eye(rows)], axis=1))
    return np.concatenate([isometry, q[:, cols:]], axis=1)


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def _nearest_povm(povm: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues of ``povm[a, x]`` and restore ``Σ_a N_a = 1`` for every x.

    Elements within the PSD tolerance can be slightly indefinite; left alone,
    the square roots below would turn an O(ε) defect into O(√ε) noise.
    """
    w, v = np.linalg.eigh(povm)
    clipped = np.einsum("...ik,...k,...jk->...ij", v, np.clip(w, 0, None), v.conj())
    total = clipped.sum(axis=0)
    tw, tv = np.linalg.eigh(total)
    inv_sqrt = np.einsum("...ik,...k,...jk->...ij", tv, 1 / np.sqrt(tw), tv.conj())
    return inv_sqrt[None] @ clipped @ inv_sqrt[None]


def dilate(assemblage: Assemblage):
    """Pure state on aux ⊗ aux′ ⊗ B and projectors on aux ⊗ aux′ realizing ``assemblage``.

    Returns ``(psi, projectors, alice_dim)`` with ``projectors[x][a]``.
    """
    _check_bipartite(assemblage)
    sigma = assemblage.elements      # (a, x, d, d)
    n_out, n_in = sigma.shape[0], sigma.shape[1]
    rho_r = reduced_state(assemblage)
    lam, f = np.linalg.eigh(rho_r)
    keep = lam > SUPPORT_TOL
    lam, f = lam[keep], f[:, keep]
    r = lam.size
    inv_sqrt = f / np.sqrt(lam)            # columns f_k / sqrt(lambda_k)
    # POVM on the purifying system: transpose of rho_R^{-1/2} sigma rho_R^{-1/2} in the eigenbasis
    povm = np.einsum("ik,axij,jl->axlk", inv_sqrt.conj(), sigma, inv_sqrt)
    povm = _nearest_povm((povm + np.conj(np.swapaxes(povm, -1, -2))) / 2)
    # psi = sum_k sqrt(lambda_k) |k>_aux |f_k>_B, extended by |0> on the outcome register
    psi_aux_b = (np.sqrt(lam)[:, None] * f.T)          # (r, d)
    d = assemblage.dim
    psi = np.zeros((r, n_out, d), dtype=complex)
    psi[:, 0, :] = psi_aux_b
    alice_dim = r * n_out
    projectors = []
    for x in range(n_in):
        # W|phi> = sum_a sqrt(N_a)|phi> ⊗ |a>, embedded as the |0>-columns of a unitary
        w = np.zeros((r, n_out, r), dtype=complex)
        for a in range(n_out):
            w[:, a, :] = _sqrtm_psd(povm[a, x])
        w = w.reshape(alice_dim, r)
        cols = np.zeros((alice_dim, alice_dim), dtype=complex)
        u = _unitary_completion(w)          # first r columns = W
        # place W's columns at the positions of |k>|0>; the rest fill the remaining slots
        input_slots = [k * n_out for k in range(r)]
        other_slots = [s for s in range(alice_dim) if s not in input_slots]
        cols[:, input_slots] = u[:, :r]
        cols[:, other_slots] = u[:, r:]
        per_outcome = []
        for a in range(n_out):
            reg = np.zeros(n_out)
            reg[a] = 1.0
            p_reg = np.kron(np.eye(r), np.diag(reg))
            pi = cols.conj().T @ p_reg @ cols
            per_outcome.append((pi + pi.conj().T) / 2)
        projectors.append(per_outcome)
    return psi.reshape(alice_dim, d), projectors, alice_dim


def ns_to_moment(assemblage: Assemblage) -> MomentMatrix:
    """Almost-quantum EPR moment matrix of a bipartite non-signalling assemblage."""
    psi, projectors, alice_dim = dilate(assemblage)
    s = assemblage.scenario
    alice = Scenario(1, s.inputs, s.outputs)
    return moment_from_state(alice, psi, [projectors], [alice_dim], s.bob_dim, kind="block")


def _span_projector(vectors: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the column span (symmetric orthogonalisation of an SVD basis)."""
    if vectors.size == 0:
        return np.zeros((vectors.shape[0], vectors.shape[0]), dtype=complex)
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    scale = max(1.0, float(s[0])) if s.size else 1.0
    basis = u[:, s > SPAN_TOL * scale]
    return basis @ basis.conj().T


def moment_to_realization(gamma: MomentMatrix, clip_tol: float = 1e-8) -> Realization:
    """Realization whose assemblage reproduces the pinned entries of ``gamma``."""
    s = gamma.scenario
    if s.n_parties != 1:
        raise InvalidInputError("realization extraction is bipartite only")
    words = gamma.words
    if words != generate_aq_words(Scenario(1, s.inputs, s.outputs)):
        raise InvalidInputError("moment matrix is not indexed by the almost-quantum word list")
    d = gamma.dim
    full = gamma.full()
    try:
        v = gram_vectors(full, clip_tol)
    except NotPSDError as exc:
        raise NotPSDError(f"moment matrix is not PSD: {exc}") from None
    # entries[(v,i),(w,j)] = <r_{w,j}, r_{v,i}>, so the vectors are the conjugated Gram columns
    vecs = np.conj(v).reshape(v.shape[0], len(words), d)      # (D, word, i)
    dim_a = vecs.shape[0]
    n_out, n_in = s.outputs[0], s.inputs[0]
    state = vecs[:, 0, :]                                      # empty word first
    norm = np.linalg.norm(state)
    if norm <= 0:
        raise InconsistentMomentMatrixError("the empty-word block vanishes")
    state = state / norm
    ops = np.zeros((n_in, n_out, dim_a, dim_a), dtype=complex)
    index = {w: i for i, w in enumerate(words)}
    for x in range(n_in):
        for a in range(n_out):
            word = next(w for w in words if len(w) == 1 and w.letters[0].input == x and w.letters[0].output == a)
            ops[x, a] = _span_projector(vecs[:, index[word], :])
        for a in range(n_out):
            for a2 in range(a + 1, n_out):
                overlap = float(np.max(np.abs(ops[x, a] @ ops[x, a2])))
                if overlap > OVERLAP_TOL:
                    raise InconsistentMomentMatrixError(
                        f"outcome spans {a} and {a2} of input {x} overlap ({overlap:.2e})")
        # numerical complement of all outcome spans goes to outcome 0
        ops[x, 0] += _span_projector(_range_basis(np.eye(dim_a) - ops[x].sum(axis=0)))
    return Realization(dim_a, d, state.reshape(-1), MeasurementSet(ops))


def _range_basis(p: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((p + p.conj().T) / 2)
    return v[:, w > 0.5]


def realize(assemblage: Assemblage) -> Realization:
    return moment_to_realization(ns_to_moment(assemblage))


def verify_realization(r: Realization, assemblage: Assemblage) -> float:
    """Largest entrywise deviation between the realization's assemblage and the target."""
    if r.bob_dim != assemblage.dim:
        raise InvalidInputError("Bob dimensions differ")
    if r.measurements.n_inputs != assemblage.scenario.inputs[0] or \
            r.measurements.n_outputs != assemblage.scenario.outputs[0]:
        raise InvalidInputError("measurement cardinalities differ from the assemblage")
    produced = born_assemblage(r.state, [r.measurements], assemblage.scenario)
    return float(np.max(np.abs(produced.elements - assemblage.elements)))


def realization_state_matrix(r: Realization) -> np.ndarray:
    return proj(r.state)
