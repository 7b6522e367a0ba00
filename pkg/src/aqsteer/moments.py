"""Almost-quantum moment matrices and their compilation into SDPs.

Entry ``(v, w)`` of a moment matrix stands for the operator ``w† v``: in a
quantum model it equals ``<ψ|P_w† P_v|ψ>`` (Bell, scalar entries) or
``Tr_A[P_v ρ P_w†]`` (EPR, d×d blocks).  With this convention the matrix
indexed by ``(word, Bob index)`` is the Gram matrix of the vectors
``(P_v ⊗ <i|)|ψ>`` and therefore positive semidefinite.

Entries whose operators agree modulo the rewrite rules share one variable,
entries of null operators vanish, and entries whose operator is itself a word
of the almost-quantum set are pinned to the observed (marginal) data.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import IllDefinedMarginalError, InvalidInputError, SolverFailure
from .quantum import Assemblage, Correlation, check_nonsignalling, marginal_array
from .sdp import SdpProblem, SdpSolution, SolverOptions, solve
from .words import (EMPTY, NULL, Letter, Scenario, Word, dagger_key, generate_aq_words,
                    is_aq_word, parse_word, product_key)

log = logging.getLogger(__name__)

NS_TOL = 1e-8
REAL_TOL = 1e-13


def entry_key(v: Word, w: Word):
    """Key of the operator ``w† v`` represented by entry ``(v, w)``."""
    return product_key(w, v)


# ---------------------------------------------------------------------------
# moment matrices

@dataclass
class MomentMatrix:
    """Square array of d×d blocks indexed by a word list (d = 1 for Bell matrices)."""

    scenario: Scenario
    words: list
    entries: np.ndarray
    kind: str = "block"   # "scalar" | "block"

    def __post_init__(self):
        n = len(self.words)
        ent = np.asarray(self.entries, dtype=complex)
        if ent.ndim == 2:
            ent = ent[:, :, None, None]
        if ent.shape[:2] != (n, n) or ent.shape[2] != ent.shape[3]:
            raise InvalidInputError(f"moment entries of shape {ent.shape} do not match {n} words")
        self.entries = ent
        if self.kind not in ("scalar", "block"):
            raise InvalidInputError(f"unknown moment-matrix kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.entries.shape[-1]

    @property
    def size(self) -> int:
        return len(self.words)

    def index(self, word: Word) -> int:
        try:
            return self._index[word]
        except AttributeError:
            self._index = {w: i for i, w in enumerate(self.words)}
            return self._index[word]
        except KeyError:
            raise InvalidInputError(f"word {word} is not indexed by this moment matrix") from None

    def entry(self, v: Word, w: Word) -> np.ndarray:
        e = self.entries[self.index(v), self.index(w)]
        return e[0, 0] if self.kind == "scalar" else e

    def entry_block(self, v: Word, w: Word) -> np.ndarray:
        return self.entries[self.index(v), self.index(w)]

    def full(self) -> np.ndarray:
        n, d = self.size, self.dim
        return np.transpose(self.entries, (0, 2, 1, 3)).reshape(n * d, n * d)

    def min_eig(self) -> float:
        f = self.full()
        return float(np.linalg.eigvalsh((f + f.conj().T) / 2)[0])

    def is_real(self, tol: float = REAL_TOL) -> bool:
        return bool(np.max(np.abs(self.entries.imag), initial=0.0) <= tol)

    def structure_violation(self) -> float:
        """Largest breach of Hermiticity, equal-operator sharing or null vanishing."""
        ent = self.entries
        worst = float(np.max(np.abs(ent - np.conj(np.transpose(ent, (1, 0, 3, 2))))))
        seen: dict = {}
        for i, v in enumerate(self.words):
            for j, w in enumerate(self.words):
                key = entry_key(v, w)
                if key is NULL:
                    worst = max(worst, float(np.max(np.abs(ent[i, j]))))
                    continue
                if key in seen:
                    worst = max(worst, float(np.max(np.abs(ent[i, j] - seen[key]))))
                else:
                    seen[key] = ent[i, j]
        return worst

    def to_json(self) -> dict:
        from .io import matrix_to_json
        return {
            "type": "moment-matrix",
            "kind": self.kind,
            "scenario": self.scenario.to_json(),
            "words": [str(w) for w in self.words],
            "entries": [[matrix_to_json(self.entries[i, j]) for j in range(self.size)]
                        for i in range(self.size)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MomentMatrix":
        from .io import matrix_from_json
        try:
            scenario = Scenario.from_json(obj["scenario"])
            words = [parse_word(w, scenario) for w in obj["words"]]
            entries = np.array([[matrix_from_json(e) for e in row] for row in obj["entries"]])
            return cls(scenario, words, entries, obj.get("kind", "block"))
        except KeyError as exc:
            raise InvalidInputError(f"moment matrix: missing field {exc.args[0]!r}") from None


def moment_from_vectors(scenario: Scenario, words: list, vectors: np.ndarray, kind: str) -> MomentMatrix:
    """Moment matrix with ``entries[v, w] = vectors[v]^T conj(vectors[w])``.

    ``vectors`` has shape ``(n_words, D, d)``: column i of slice v is ``(P_v ⊗ <i|)|ψ>``.
    """
    ent = np.einsum("vai,waj->vwij", vectors, vectors.conj())
    return MomentMatrix(scenario, words, ent, kind)


def apply_word(psi: np.ndarray, word: Word, projectors: list) -> np.ndarray:
    """Apply the letters of ``word`` (rightmost first) to a state tensor.

    ``psi`` has one axis per party followed by any number of spectator axes;
    ``projectors[k-1][x][a]`` is party k's projector.
    """
    out = psi
    for letter in reversed(word.letters):
        k = letter.party - 1
        p = projectors[k][letter.input][letter.output]
        out = np.moveaxis(np.tensordot(p, out, axes=([1], [k])), 0, k)
    return out


def moment_from_state(scenario: Scenario, psi, projectors: list, party_dims, bob_dim: int = 1,
                      words: Optional[list] = None, kind: Optional[str] = None) -> MomentMatrix:
    """Moment matrix of a pure state on ``⊗_k H_k ⊗ C^bob_dim`` under party projectors."""
    words = generate_aq_words(scenario) if words is None else words
    dims = tuple(int(x) for x in party_dims)
    psi = np.asarray(psi, dtype=complex).reshape(dims + (bob_dim,))
    total = int(np.prod(dims))
    vecs = np.stack([apply_word(psi, w, projectors).reshape(total, bob_dim) for w in words])
    if kind is None:
        kind = "scalar" if bob_dim == 1 else "block"
    return moment_from_vectors(scenario, words, vecs, kind)


# ---------------------------------------------------------------------------
# compilation

def _hermitian_basis(d: int, real: bool) -> list:
    basis = []
    for k in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[k, k] = 1
        basis.append(e)
    for k, l in itertools.combinations(range(d), 2):
        e = np.zeros((d, d), dtype=complex)
        e[k, l] = e[l, k] = 1
        basis.append(e)
        if not real:
            e = np.zeros((d, d), dtype=complex)
            e[k, l], e[l, k] = 1j, -1j
            basis.append(e)
    return basis


def _general_basis(d: int, real: bool) -> list:
    basis = []
    for k, l in itertools.product(range(d), repeat=2):
        e = np.zeros((d, d), dtype=complex)
        e[k, l] = 1
        basis.append(e)
        if not real:
            basis.append(1j * e)
    return basis


@dataclass
class FreeClass:
    """Entries sharing one operator (up to adjoint) and one block variable."""

    rep: Word
    hermitian: bool
    positions: list                     # (i, j, daggered)
    basis: list
    offset: int = 0                     # index of the first coordinate in y


@dataclass
class MomentLayout:
    """How the variables of a compiled problem populate a moment matrix."""

    scenario: Scenario
    words: list
    dim: int
    kind: str
    real_mode: bool
    base_entries: np.ndarray
    classes: list
    slots: dict = field(repr=False, default_factory=dict)   # (i, j) -> "null" | "pinned" | class index

    @property
    def n_vars(self) -> int:
        return sum(len(c.basis) for c in self.classes)

    def moment_matrix(self, y) -> MomentMatrix:
        ent = self.base_entries.copy()
        y = np.asarray(y, dtype=float)
        for c in self.classes:
            block = sum(coef * e for coef, e in zip(y[c.offset:c.offset + len(c.basis)], c.basis))
            for i, j, dag in c.positions:
                ent[i, j] = block.conj().T if dag else block
        return MomentMatrix(self.scenario, self.words, ent, self.kind)

    def class_of_key(self, key) -> Optional[int]:
        for idx, c in enumerate(self.classes):
            if c.rep == key or c.rep == dagger_key(key):
                return idx
        return None


def _class_rep(key: Word) -> Word:
    dag = key.dagger()
    return min(key, dag)


def _realify(mat: sp.spmatrix, real_mode: bool) -> sp.csr_matrix:
    mat = sp.csr_matrix(mat)
    if real_mode:
        if mat.nnz and np.max(np.abs(mat.data.imag)) > REAL_TOL:
            raise InvalidInputError("complex direction in a real-mode problem")
        return sp.csr_matrix(mat.real)
    re, im = sp.csr_matrix(mat.real), sp.csr_matrix(mat.imag)
    return sp.bmat([[re, -im], [im, re]], format="csr")


def _realify_dense(mat: np.ndarray, real_mode: bool) -> np.ndarray:
    if real_mode:
        return np.ascontiguousarray(mat.real)
    return np.block([[mat.real, -mat.imag], [mat.imag, mat.real]])


def build_problem(scenario: Scenario, words: list, dim: int, data, kind: str,
                  real_mode: bool, free_data: bool = False) -> SdpProblem:
    """Compile the moment-matrix constraints over ``words``.

    ``data(key)`` returns the d×d block pinned to an almost-quantum word key.
    With ``free_data`` every non-empty word key becomes a Hermitian variable
    instead (used when optimising over the whole set).
    """
    n = len(words)
    base = np.zeros((n, n, dim, dim), dtype=complex)
    classes: list = []
    class_index: dict = {}
    slots: dict = {}
    pinned_cache: dict = {}
    for i, v in enumerate(words):
        for j, w in enumerate(words):
            key = entry_key(v, w)
            if key is NULL:
                slots[i, j] = "null"
                continue
            if is_aq_word(key) and not (free_data and key != EMPTY):
                if key not in pinned_cache:
                    block = np.asarray(data(key), dtype=complex).reshape(dim, dim)
                    pinned_cache[key] = block
                base[i, j] = pinned_cache[key]
                slots[i, j] = "pinned"
                continue
            rep = _class_rep(key)
            if rep not in class_index:
                hermitian = rep == rep.dagger()
                basis = _hermitian_basis(dim, real_mode) if hermitian else _general_basis(dim, real_mode)
                class_index[rep] = len(classes)
                classes.append(FreeClass(rep, hermitian, [], basis))
            c = classes[class_index[rep]]
            c.positions.append((i, j, (not c.hermitian) and key != rep))
            slots[i, j] = class_index[rep]

    offset = 0
    directions = []
    nd = n * dim
    for c in classes:
        c.offset = offset
        offset += len(c.basis)
        for e in c.basis:
            rows, cols, vals = [], [], []
            for i, j, dag in c.positions:
                block = e.conj().T if dag else e
                r, s = np.nonzero(block)
                rows.extend(i * dim + r)
                cols.extend(j * dim + s)
                vals.extend(block[r, s])
            mat = sp.coo_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(nd, nd))
            direction = _realify(mat, real_mode)
            if direction.nnz == 0:
                raise InvalidInputError(f"empty direction for operator class {c.rep}")
            directions.append(direction)

    layout = MomentLayout(scenario, list(words), dim, kind, real_mode, base, classes, slots)
    full_base = np.transpose(base, (0, 2, 1, 3)).reshape(nd, nd)
    full_base = (full_base + full_base.conj().T) / 2
    return SdpProblem(_realify_dense(full_base, real_mode), directions, layout=layout)


def _data_from_marginals(marginals: dict, dim: int):
    def data(key: Word) -> np.ndarray:
        if key == EMPTY:
            return marginals[()]
        subset = tuple(l.party for l in key.letters)
        arr = marginals[subset]
        idx = tuple(l.output for l in key.letters) + tuple(l.input for l in key.letters)
        return np.asarray(arr[idx]).reshape(dim, dim)
    return data


def _all_subsets(n: int):
    for r in range(n + 1):
        yield from itertools.combinations(range(1, n + 1), r)


def correlation_marginals(corr: Correlation, tol: float = NS_TOL) -> dict:
    if not corr.is_valid(1e-8):
        raise InvalidInputError("correlation is not a normalised probability distribution")
    if corr.ns_violation() > tol:
        raise InvalidInputError(f"correlation is signalling (violation {corr.ns_violation():.2e})")
    try:
        return {s: corr.marginal(s, tol) if s else np.ones(()) for s in _all_subsets(corr.n_parties)}
    except IllDefinedMarginalError as exc:
        raise InvalidInputError(str(exc)) from None


def assemblage_marginals(assemblage: Assemblage, tol: float = NS_TOL) -> dict:
    report = check_nonsignalling(assemblage, tol)
    if report.max_ns_violation > tol or report.trace_deviation > tol:
        raise InvalidInputError(f"assemblage is not non-signalling ({report})")
    try:
        return {s: marginal_array(assemblage, s, tol) for s in _all_subsets(assemblage.n_parties)}
    except IllDefinedMarginalError as exc:
        raise InvalidInputError(str(exc)) from None


def compile_bell(corr: Correlation, cap: int = 20_000) -> SdpProblem:
    """Bell almost-quantum membership problem for a non-signalling correlation."""
    scenario = corr.scenario
    marginals = correlation_marginals(corr)
    words = generate_aq_words(scenario, cap)
    return build_problem(scenario, words, 1, _data_from_marginals(marginals, 1), "scalar", real_mode=True)


def compile_epr(assemblage: Assemblage, cap: int = 20_000) -> SdpProblem:
    """EPR almost-quantum membership problem for a non-signalling assemblage."""
    scenario = assemblage.scenario
    marginals = assemblage_marginals(assemblage)
    d = scenario.bob_dim
    words = generate_aq_words(Scenario(scenario.n_parties, scenario.inputs, scenario.outputs), cap)
    real_mode = bool(np.max(np.abs(assemblage.elements.imag), initial=0.0) <= REAL_TOL)
    kind = "scalar" if d == 1 else "block"
    return build_problem(scenario, words, d, _data_from_marginals(marginals, d), kind, real_mode)


# ---------------------------------------------------------------------------
# membership

@dataclass
class MembershipReport:
    feasible: bool
    t_star: float
    certificate: Optional[MomentMatrix]
    witness: Optional[np.ndarray]
    solution: SdpSolution = field(repr=False)
    witness_value: Optional[float] = None

    def to_json(self) -> dict:
        out = {"feasible": self.feasible, "t_star": self.t_star, "status": self.solution.status,
               "iterations": self.solution.iters, "gap": self.solution.gap}
        if self.witness_value is not None:
            out["witness_value"] = self.witness_value
        return out

    def __str__(self):
        verdict = "almost-quantum" if self.feasible else "NOT almost-quantum"
        return (f"{verdict}: t_star = {self.t_star:.6e} ({self.solution.status}, "
                f"{self.solution.iters} iterations, gap {self.solution.gap:.1e})")


def membership(problem: SdpProblem, opts: Optional[SolverOptions] = None) -> MembershipReport:
    """Maximise the smallest eigenvalue; feasible iff it reaches ``-feas_tol``."""
    opts = opts or SolverOptions()
    if not problem.maximize_min_eig:
        raise InvalidInputError("membership needs a max-min-eigenvalue problem")
    sol = solve(problem, opts)
    if sol.status != "optimal":
        raise SolverFailure(
            f"solver stopped with status {sol.status} after {sol.iters} iterations "
            f"(gap {sol.gap:.2e}, primal residual {sol.primal_residual:.2e}, "
            f"dual residual {sol.dual_residual:.2e}, t = {sol.t_star:.3e})", sol)
    feasible = sol.t_star >= -opts.feas_tol
    certificate = witness = None
    if feasible and isinstance(problem.layout, MomentLayout):
        certificate = problem.layout.moment_matrix(sol.y)
    elif not feasible:
        # X has unit trace, annihilates every free direction and pairs to t_star < 0 with
        # the pinned data, so it separates the data from every PSD completion
        witness = sol.X
    value = float(np.sum(problem.base * witness)) if witness is not None else None
    return MembershipReport(bool(feasible), float(sol.t_star), certificate, witness, sol, value)


# ---------------------------------------------------------------------------
# linear functionals over the Bell set

def collins_gisin_words(scenario: Scenario, cap: int = 20_000) -> list:
    """Almost-quantum words that avoid each party's last outcome."""
    return [w for w in generate_aq_words(scenario, cap)
            if all(l.output < scenario.outputs[l.party - 1] - 1 for l in w.letters)]


def collins_gisin_expansion(scenario: Scenario):
    """Map ``(a⃗, x⃗)`` to ``{word: coefficient}`` writing ``p(a⃗|x⃗)`` in reduced coordinates.

    The empty word carries the constant term.  Outcomes equal to the last
    label are eliminated with ``p(..last..) = p_without_k - Σ_{a<last} p(..a..)``.
    """
    cache: dict = {}

    def expand(letters: tuple) -> dict:
        if letters in cache:
            return cache[letters]
        out: dict = {}
        for pos, l in enumerate(letters):
            last = scenario.outputs[l.party - 1] - 1
            if l.output == last:
                rest = letters[:pos] + letters[pos + 1:]
                for word, c in expand(rest).items():
                    out[word] = out.get(word, 0.0) + c
                for a in range(last):
                    swapped = letters[:pos] + (Letter(l.party, l.input, a),) + letters[pos + 1:]
                    for word, c in expand(swapped).items():
                        out[word] = out.get(word, 0.0) - c
                break
        else:
            out = {Word(letters): 1.0}
        cache[letters] = out
        return out

    def coefficients(outputs, inputs) -> dict:
        letters = tuple(Letter(k + 1, int(x), int(a)) for k, (a, x) in enumerate(zip(outputs, inputs)))
        return expand(letters)

    return coefficients


def compile_functional(scenario: Scenario, coeffs) -> SdpProblem:
    """``maximize Σ c[a⃗, x⃗] p(a⃗|x⃗)`` over almost-quantum Bell moment matrices."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != scenario.outputs + scenario.inputs:
        raise InvalidInputError(f"coefficients need shape {scenario.outputs + scenario.inputs}, got {coeffs.shape}")
    words = collins_gisin_words(scenario)
    problem = build_problem(scenario, words, 1, lambda key: np.ones((1, 1)), "scalar",
                            real_mode=True, free_data=True)
    layout: MomentLayout = problem.layout
    expansion = collins_gisin_expansion(scenario)
    objective = np.zeros(problem.n_vars)
    constant = 0.0
    n = scenario.n_parties
    for idx in itertools.product(*(range(s) for s in coeffs.shape)):
        c = coeffs[idx]
        if c == 0:
            continue
        for word, weight in expansion(idx[:n], idx[n:]).items():
            if word == EMPTY:
                constant += c * weight
                continue
            cls = layout.classes[layout.class_of_key(word)]
            objective[cls.offset] += c * weight
    problem.objective = objective
    problem.objective_constant = constant
    problem.maximize_min_eig = False
    return problem


def maximize_functional(scenario: Scenario, coeffs, opts: Optional[SolverOptions] = None) -> float:
    """Largest value of a Bell functional over the almost-quantum set."""
    problem = compile_functional(scenario, coeffs)
    sol = solve(problem, opts or SolverOptions())
    if sol.status != "optimal":
        raise SolverFailure(f"functional optimisation stopped with status {sol.status}", sol)
    return float(sol.value)


# ---------------------------------------------------------------------------
# export

def write_sdpa(problem: SdpProblem, path, comment: str = "almost-quantum moment problem") -> None:
    """Sparse SDPA: minimise c·x subject to Σ_k F_k x_k - F_0 ⪰ 0 (one block).

    Variables are the free coordinates followed by t when the problem
    maximises the smallest eigenvalue.
    """
    n = problem.dim
    mats = list(problem.directions)
    c = [-v for v in (problem.objective if problem.objective is not None else np.zeros(len(mats)))]
    if problem.maximize_min_eig:
        mats.append(-sp.identity(n, format="csr"))
        c.append(-1.0)
    lines = [f'"{comment}"', str(len(mats)), "1", str(n), " ".join(_fmt(v) for v in c)]

    def emit(k, mat):
        coo = sp.triu(sp.coo_matrix(mat)).tocoo()
        for i, j, v in sorted(zip(coo.row, coo.col, coo.data)):
            if v != 0:
                lines.append(f"{k} 1 {i + 1} {j + 1} {_fmt(v)}")

    emit(0, -sp.csr_matrix(problem.base))
    for k, mat in enumerate(mats, start=1):
        emit(k, mat)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(v: float) -> str:
    return repr(float(v) + 0.0)  # no signed zeros
