"""From assemblage certificates to Bell certificates and back.

* ``prop1_check``: an almost-quantum assemblage, measured by Bob, yields an
  almost-quantum Bell correlation.  Checked twice: by building the Bell moment
  matrix directly from the assemblage certificate and by an independent solve.
* ``lift``: a Bell moment matrix whose last party is a tomographically
  complete measurement on Bob's system is mapped block by block through the
  reconstruction map to an EPR moment matrix.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError, LiftInconsistencyError, PreconditionError
from .moments import (MomentMatrix, MembershipReport, assemblage_marginals, compile_bell, entry_key,
                      membership, moment_from_state)
from .quantum import Assemblage, Correlation, MeasurementSet, assemblage_correlation
from .sdp import SolverOptions
from .tomography import TomographyFrame, reconstruct
from .words import EMPTY, NULL, Letter, Scenario, Word, generate_aq_words

log = logging.getLogger(__name__)

CERT_TOL = 1e-6
STRUCTURE_TOL = 1e-7
PSD_TOL = 1e-8


def _certificate_mismatch(assemblage: Assemblage, gamma: MomentMatrix) -> float:
    """Largest deviation of the data entries Γ(∅, a_S|x_S) from the assemblage marginals."""
    marginals = assemblage_marginals(assemblage)
    worst = float(np.max(np.abs(gamma.entry_block(EMPTY, EMPTY) - marginals[()])))
    for w in gamma.words:
        if w == EMPTY:
            continue
        subset = tuple(l.party for l in w.letters)
        idx = tuple(l.output for l in w.letters) + tuple(l.input for l in w.letters)
        worst = max(worst, float(np.max(np.abs(gamma.entry_block(EMPTY, w) - marginals[subset][idx]))))
    return worst


def bell_certificate_from_epr(gamma: MomentMatrix, bob: MeasurementSet) -> MomentMatrix:
    """Bell moment matrix of the Alices plus Bob, built from an EPR certificate.

    With Bob's operators commuting with the Alices', entry ``((v, β), (w, β'))``
    equals ``Tr(N_β' N_β Γ(v, w))``.  If Γ is the Gram matrix of vectors
    ``r_{v,i}``, the result is the Gram matrix of ``⊕_k Σ_i N_β[k, i] r_{v,i}``.
    """
    alice = gamma.scenario
    d = gamma.dim
    if bob.dim != d:
        raise InvalidInputError("Bob's measurement dimension differs from the certificate blocks")
    scenario = Scenario(alice.n_parties + 1, alice.inputs + (bob.n_inputs,), alice.outputs + (bob.n_outputs,))
    words = generate_aq_words(scenario)
    bob_party = scenario.n_parties
    ops = {EMPTY: np.eye(d)}
    index = {w: i for i, w in enumerate(gamma.words)}
    n = len(words)
    split = []
    for w in words:
        alice_part = Word(tuple(l for l in w.letters if l.party != bob_party))
        bob_letters = [l for l in w.letters if l.party == bob_party]
        n_op = bob.operators[bob_letters[0].input, bob_letters[0].output] if bob_letters else ops[EMPTY]
        split.append((index[alice_part], n_op))
    ent = np.zeros((n, n, 1, 1), dtype=complex)
    for i, (vi, nv) in enumerate(split):
        for j, (wj, nw) in enumerate(split):
            ent[i, j, 0, 0] = np.trace(nw @ nv @ gamma.entries[vi, wj])
    return MomentMatrix(scenario, words, ent, "scalar")


@dataclass
class Prop1Report:
    feasible: bool
    constructive_min_eig: float
    constructive_structure: float
    membership: MembershipReport
    correlation: Correlation

    @property
    def t_star(self) -> float:
        return self.membership.t_star

    def __str__(self):
        return (f"Bell correlation {'almost-quantum' if self.feasible else 'NOT almost-quantum'}: "
                f"t_star = {self.t_star:.3e}; constructive certificate min eigenvalue "
                f"{self.constructive_min_eig:.3e}, structure deviation {self.constructive_structure:.1e}")


def prop1_check(assemblage: Assemblage, epr_certificate: MomentMatrix, bob: MeasurementSet,
                opts: Optional[SolverOptions] = None) -> Prop1Report:
    """Bell almost-quantum test of the correlation Bob's measurement draws from a certified assemblage."""
    opts = opts or SolverOptions()
    if not bob.is_valid(1e-8) or not bob.is_projective(1e-8):
        raise PreconditionError("Bob's measurement must be complete and projective")
    if epr_certificate.min_eig() < -max(opts.feas_tol, 1e-7):
        raise PreconditionError("the EPR certificate is not positive semidefinite")
    if _certificate_mismatch(assemblage, epr_certificate) > CERT_TOL:
        raise PreconditionError("the EPR certificate does not match the assemblage")
    if epr_certificate.structure_violation() > CERT_TOL:
        raise PreconditionError("the EPR certificate breaks the moment-matrix structure")
    corr = assemblage_correlation(assemblage, bob)
    constructive = bell_certificate_from_epr(epr_certificate, bob)
    report = membership(compile_bell(corr), opts)
    return Prop1Report(report.feasible, constructive.min_eig(), constructive.structure_violation(),
                       report, corr)


# ---------------------------------------------------------------------------
# block decomposition and lift

@dataclass
class BlockDecomposition:
    """``blocks[i, j, b, y] = Γ_B(v_i, w_j · (b|y))`` over Alice words ``v_i, w_j``."""

    alice_scenario: Scenario
    alice_words: list
    blocks: np.ndarray

    def block(self, v: Word, w: Word) -> np.ndarray:
        return self.blocks[self.alice_words.index(v), self.alice_words.index(w)]


def decompose_bell_moment(gamma_b: MomentMatrix, frame: TomographyFrame) -> BlockDecomposition:
    s = gamma_b.scenario
    if s.n_parties < 2:
        raise InvalidInputError("the Bell moment matrix needs at least one Alice and Bob")
    bob = s.n_parties
    if s.inputs[-1] != frame.n_inputs or s.outputs[-1] != frame.n_outputs:
        raise InvalidInputError(
            f"Bob's letters ({s.outputs[-1]} outcomes, {s.inputs[-1]} settings) do not match the frame")
    alice = Scenario(bob - 1, s.inputs[:-1], s.outputs[:-1])
    words = generate_aq_words(alice)
    index = {w: i for i, w in enumerate(gamma_b.words)}
    n = len(words)
    blocks = np.zeros((n, n, frame.n_outputs, frame.n_inputs), dtype=complex)
    for j, w in enumerate(words):
        for b, y in itertools.product(range(frame.n_outputs), range(frame.n_inputs)):
            wb = Word(w.letters + (Letter(bob, y, b),))
            if wb not in index:
                raise InvalidInputError(f"word {wb} missing from the Bell moment matrix")
            col = index[wb]
            for i, v in enumerate(words):
                if v not in index:
                    raise InvalidInputError(f"word {v} missing from the Bell moment matrix")
                blocks[i, j, b, y] = gamma_b.entries[index[v], col, 0, 0]
    return BlockDecomposition(alice, words, blocks)


@dataclass
class LiftReport:
    gamma: MomentMatrix
    min_eig: float
    structure_violation: float
    verdict: str        # ok | hypothesis-violation
    retried: bool = False   # set when a tightened re-solve was needed

    @property
    def psd(self) -> bool:
        return self.verdict == "ok"

    def __str__(self):
        return (f"lift {self.verdict}: min eigenvalue {self.min_eig:.3e}, "
                f"structure deviation {self.structure_violation:.1e}")


def lift(gamma_b: MomentMatrix, frame: TomographyFrame, psd_tol: float = PSD_TOL) -> LiftReport:
    """EPR moment matrix ``Γ(v, w) = reconstruct(Λ_{v,w})`` with a PSD verdict."""
    d = frame.dim
    if frame.rank != d * d:
        raise InvalidInputError("the frame is not tomographically complete")
    dec = decompose_bell_moment(gamma_b, frame)
    entries = reconstruct(dec.blocks, frame)
    scenario = Scenario(dec.alice_scenario.n_parties, dec.alice_scenario.inputs,
                        dec.alice_scenario.outputs, d)
    gamma = MomentMatrix(scenario, dec.alice_words, entries, "block" if d > 1 else "scalar")
    structure = gamma.structure_violation()
    trace_dev = abs(np.trace(gamma.entries[0, 0]) - 1.0)
    if structure > STRUCTURE_TOL or trace_dev > STRUCTURE_TOL:
        raise LiftInconsistencyError(
            f"lifted matrix breaks the moment structure (deviation {structure:.2e}, trace error {trace_dev:.2e})")
    lam = gamma.min_eig()
    verdict = "ok" if lam >= -psd_tol else "hypothesis-violation"
    return LiftReport(gamma, lam, structure, verdict)


def lift_correlation(corr: Correlation, frame: TomographyFrame,
                     opts: Optional[SolverOptions] = None) -> LiftReport:
    """Solve for a Bell certificate of a tomographic correlation, then lift it.

    A lift that fails the PSD test is retried once with tightened solver
    tolerances; a second failure is attributed to the certificate lacking the
    factorised structure the lift relies on.
    """
    opts = opts or SolverOptions()
    report = membership(compile_bell(corr), opts)
    if not report.feasible:
        raise PreconditionError(f"the correlation is not almost-quantum (t_star {report.t_star:.3e})")
    first = lift(report.certificate, frame)
    if first.psd:
        return first
    retry = membership(compile_bell(corr), opts.tightened())
    second = lift(retry.certificate, frame)
    second.retried = True
    return second


def commuting_bell_certificate(psi, alice_projectors: list, alice_dims, frame: TomographyFrame,
                               alice_scenario: Scenario) -> MomentMatrix:
    """Bell moment matrix of a pure state with Bob measuring the frame on his own factor."""
    d = frame.dim
    scenario = Scenario(alice_scenario.n_parties + 1, alice_scenario.inputs + (frame.n_inputs,),
                        alice_scenario.outputs + (frame.n_outputs,))
    bob_proj = [[frame.measurements.operators[y, b] for b in range(frame.n_outputs)]
                for y in range(frame.n_inputs)]
    return moment_from_state(scenario, psi, list(alice_projectors) + [bob_proj],
                             list(alice_dims) + [d], 1, kind="scalar")


def build_pr_product_fixture(bob_state) -> Assemblage:
    """``σ_{a1 a2|x1 x2} = P_PR(a1 a2|x1 x2) ρ0``: non-signalling, beyond the almost-quantum set."""
    rho0 = np.asarray(bob_state, dtype=complex)
    if rho0.ndim != 2 or rho0.shape[0] != rho0.shape[1]:
        raise InvalidInputError("bob_state must be a square matrix")
    if np.max(np.abs(rho0 - rho0.conj().T)) > 1e-8 or np.linalg.eigvalsh((rho0 + rho0.conj().T) / 2)[0] < -1e-9 \
            or abs(np.trace(rho0) - 1) > 1e-9:
        raise InvalidInputError("bob_state must be a density matrix")
    d = rho0.shape[0]
    p = pr_box()
    return Assemblage(Scenario(2, 2, 2, d), p[..., None, None] * rho0)


def pr_box() -> np.ndarray:
    """``P_PR[a1, a2, x1, x2] = 1/2`` when ``a1 ⊕ a2 = x1 x2``."""
    p = np.zeros((2, 2, 2, 2))
    for a1, a2, x1, x2 in itertools.product(range(2), repeat=4):
        p[a1, a2, x1, x2] = 0.5 if (a1 ^ a2) == x1 * x2 else 0.0
    return p
