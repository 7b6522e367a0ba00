"""Assemblages, correlations and measurements.

Arrays are laid out outputs-first: an assemblage over N parties is an array of
shape ``outputs + inputs + (d, d)``, a correlation drops the trailing block.
Measurement sets are arrays of shape ``(n_inputs, n_outputs, d, d)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import IllDefinedMarginalError, InvalidInputError
from .words import Scenario

PSD_TOL = 1e-9
HERMITIAN_TOL = 1e-8


def hermitize(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``(H + H†)/2``; reject inputs whose anti-Hermitian part exceeds ``tol``."""
    h = np.asarray(h, dtype=complex)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise InvalidInputError(f"expected square matrices, got shape {h.shape}")
    adj = np.conj(np.swapaxes(h, -1, -2))
    if h.size and np.max(np.abs(h - adj)) > 2 * tol:
        raise InvalidInputError("matrix is not Hermitian within tolerance")
    return (h + adj) / 2


def min_eig(h) -> float:
    """Smallest eigenvalue of a Hermitian matrix (or stack of matrices)."""
    h = np.asarray(h)
    if h.size == 0:
        return 0.0
    return float(np.min(np.linalg.eigvalsh(h)))


def is_psd(h, tol: float = PSD_TOL) -> bool:
    return min_eig(h) >= -tol


def ket(*amplitudes) -> np.ndarray:
    return np.asarray(amplitudes, dtype=complex)


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def partial_trace_first(rho: np.ndarray, dim_a: int, dim_b: int) -> np.ndarray:
    """Trace out the first tensor factor of an operator on A ⊗ B."""
    return np.einsum("ibic->bc", rho.reshape(dim_a, dim_b, dim_a, dim_b))


# ---------------------------------------------------------------------------
# measurement sets

@dataclass(frozen=True)
class MeasurementSet:
    """Operators ``M[y, b]`` on a ``dim``-dimensional space."""

    operators: np.ndarray

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=complex)
        if ops.ndim != 4 or ops.shape[-1] != ops.shape[-2]:
            raise InvalidInputError(f"measurement operators need shape (inputs, outputs, d, d), got {ops.shape}")
        object.__setattr__(self, "operators", hermitize(ops))

    @property
    def n_inputs(self) -> int:
        return self.operators.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.operators.shape[1]

    @property
    def dim(self) -> int:
        return self.operators.shape[-1]

    def completeness_error(self) -> float:
        total = self.operators.sum(axis=1)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def psd_violation(self) -> float:
        return max(0.0, -min_eig(self.operators))

    def is_valid(self, tol: float = 1e-9) -> bool:
        return self.completeness_error() <= tol and self.psd_violation() <= tol

    def is_projective(self, tol: float = 1e-9) -> bool:
        ops = self.operators
        return bool(np.max(np.abs(ops @ ops - ops)) <= tol)

    @classmethod
    def from_bases(cls, bases: Sequence[np.ndarray]) -> "MeasurementSet":
        """One projective measurement per orthonormal basis (columns are outcomes)."""
        ops = []
        for basis in bases:
            basis = np.asarray(basis, dtype=complex)
            ops.append([proj(basis[:, b]) for b in range(basis.shape[1])])
        return cls(np.asarray(ops))

    @classmethod
    def trivial(cls, dim: int) -> "MeasurementSet":
        return cls(np.eye(dim, dtype=complex)[None, None])


# ---------------------------------------------------------------------------
# correlations and assemblages

@dataclass
class Correlation:
    """Conditional distribution ``p[a_1..a_N, x_1..x_N]`` over N Bell parties.

    ``frame`` is set when the last party is a tomographic measurement frame.
    """

    outputs: tuple
    inputs: tuple
    p: np.ndarray
    frame: Optional[object] = None

    def __post_init__(self):
        self.outputs = tuple(int(o) for o in self.outputs)
        self.inputs = tuple(int(i) for i in self.inputs)
        self.p = np.asarray(self.p, dtype=float)
        if self.p.shape != self.outputs + self.inputs:
            raise InvalidInputError(f"probabilities have shape {self.p.shape}, expected {self.outputs + self.inputs}")

    @property
    def n_parties(self) -> int:
        return len(self.outputs)

    @property
    def scenario(self) -> Scenario:
        return Scenario(self.n_parties, self.inputs, self.outputs, 1)

    def normalization_error(self) -> float:
        n = self.n_parties
        return float(np.max(np.abs(self.p.sum(axis=tuple(range(n))) - 1.0)))

    def is_valid(self, tol: float = 1e-9) -> bool:
        return bool(self.p.min() >= -tol) and self.normalization_error() <= tol

    def ns_violation(self) -> float:
        return _ns_violation(self.p, self.n_parties)

    def marginal(self, subset, tol: float = 1e-9) -> np.ndarray:
        """Marginal distribution of the parties in ``subset`` (1-based, sorted)."""
        return _marginal_array(self.p, self.n_parties, subset, tol)


@dataclass
class Assemblage:
    """Subnormalised states ``elements[a_1..a_N, x_1..x_N]`` of Bob's d-dim system."""

    scenario: Scenario
    elements: np.ndarray

    def __post_init__(self):
        s = self.scenario
        expected = s.outputs + s.inputs + (s.bob_dim, s.bob_dim)
        el = np.asarray(self.elements, dtype=complex)
        if el.shape != expected:
            raise InvalidInputError(f"assemblage elements have shape {el.shape}, expected {expected}")
        self.elements = hermitize(el)

    @property
    def n_parties(self) -> int:
        return self.scenario.n_parties

    @property
    def dim(self) -> int:
        return self.scenario.bob_dim

    def element(self, outputs, inputs) -> np.ndarray:
        return self.elements[tuple(outputs) + tuple(inputs)]

    def alice_correlation(self) -> Correlation:
        """Distribution of the Alices' outcomes alone (traces of the elements)."""
        p = np.real(np.trace(self.elements, axis1=-2, axis2=-1))
        s = self.scenario
        return Correlation(s.outputs, s.inputs, p)

    def __add__(self, other: "Assemblage") -> "Assemblage":
        return Assemblage(self.scenario, self.elements + other.elements)

    def scaled(self, factor: float) -> "Assemblage":
        return Assemblage(self.scenario, factor * self.elements)


def _ns_violation(arr: np.ndarray, n: int) -> float:
    """Largest input-dependence of any single-party output sum."""
    worst = 0.0
    for k in range(n):
        summed = arr.sum(axis=k)  # drops output axis k; input axis k now sits at n - 1 + k
        x_axis = n - 1 + k
        moved = np.moveaxis(summed, x_axis, 0)
        for x, x2 in itertools.combinations(range(moved.shape[0]), 2):
            worst = max(worst, float(np.max(np.abs(moved[x] - moved[x2]), initial=0.0)))
    return worst


def _marginal_array(arr: np.ndarray, n: int, subset, tol: float) -> np.ndarray:
    subset = sorted(int(k) for k in subset)
    if any(not 1 <= k <= n for k in subset):
        raise InvalidInputError(f"subset {subset} out of range for {n} parties")
    others = [k for k in range(1, n + 1) if k not in subset]
    out_axes = tuple(k - 1 for k in others)
    summed = arr.sum(axis=out_axes) if out_axes else arr
    # remaining layout: outputs of subset, inputs of all parties, block dims
    m = len(subset)
    in_axes_others = tuple(m + k - 1 for k in others)
    if not in_axes_others:
        return summed
    moved = np.moveaxis(summed, in_axes_others, tuple(range(len(others))))
    flat = moved.reshape((-1,) + moved.shape[len(others):])
    ref = flat[0]
    spread = float(np.max(np.abs(flat - ref[None]), initial=0.0))
    if spread > tol:
        raise IllDefinedMarginalError(
            f"marginal over parties {subset} depends on other inputs (spread {spread:.3e} > {tol:.1e})")
    return ref


# ---------------------------------------------------------------------------
# operations

def born_assemblage(state, alice_measurements: Sequence[MeasurementSet], scenario: Scenario,
                    alice_dims: Optional[Sequence[int]] = None) -> Assemblage:
    """Assemblage of ``state`` on A_1 ⊗ ... ⊗ A_N ⊗ B under the Alices' measurements."""
    n = scenario.n_parties
    if len(alice_measurements) != n:
        raise InvalidInputError(f"expected {n} measurement sets, got {len(alice_measurements)}")
    dims = [m.dim for m in alice_measurements] if alice_dims is None else [int(x) for x in alice_dims]
    if [m.dim for m in alice_measurements] != dims:
        raise InvalidInputError("measurement dimensions do not match the declared Alice dimensions")
    for k, m in enumerate(alice_measurements):
        if m.n_inputs != scenario.inputs[k] or m.n_outputs != scenario.outputs[k]:
            raise InvalidInputError(f"party {k + 1}: measurement cardinalities do not match the scenario")
        if not m.is_valid(1e-8):
            raise InvalidInputError(f"party {k + 1}: measurement set is not complete and positive")
    d = scenario.bob_dim
    rho = np.asarray(state, dtype=complex)
    total = int(np.prod(dims)) * d
    if rho.ndim == 1:
        rho = proj(rho)
    if rho.shape != (total, total):
        raise InvalidInputError(f"state has shape {rho.shape}, expected {(total, total)}")
    rho = hermitize(rho)

    # sigma[a, x] = sum_{ij} (prod_k M_k[x_k, a_k, i_k, j_k]) rho[j_1..j_N b, i_1..i_N c]
    letters = iter("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz")
    ax = [next(letters) for _ in range(n)]
    xs = [next(letters) for _ in range(n)]
    rows = [next(letters) for _ in range(n)]
    cols = [next(letters) for _ in range(n)]
    b, c = next(letters), next(letters)
    terms = [f"{xs[k]}{ax[k]}{cols[k]}{rows[k]}" for k in range(n)]
    terms.append("".join(rows) + b + "".join(cols) + c)
    spec = ",".join(terms) + "->" + "".join(ax) + "".join(xs) + b + c
    t = rho.reshape(tuple(dims) + (d,) + tuple(dims) + (d,))
    elements = np.einsum(spec, *[m.operators for m in alice_measurements], t, optimize=True)
    return Assemblage(scenario, elements)


@dataclass
class NSReport:
    ok: bool
    max_psd_violation: float
    max_ns_violation: float
    trace_deviation: float

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "max_psd_violation": self.max_psd_violation,
            "max_ns_violation": self.max_ns_violation,
            "trace_deviation": self.trace_deviation,
        }

    def __str__(self):
        verdict = "non-signalling" if self.ok else "NOT non-signalling"
        return (f"{verdict}: psd violation {self.max_psd_violation:.3e}, "
                f"ns violation {self.max_ns_violation:.3e}, trace deviation {self.trace_deviation:.3e}")


def check_nonsignalling(assemblage: Assemblage, tol: float = PSD_TOL) -> NSReport:
    el = assemblage.elements
    n = assemblage.n_parties
    psd = max(0.0, -min_eig(el))
    ns = _ns_violation(el, n)
    totals = el.sum(axis=tuple(range(n)))
    traces = np.real(np.trace(totals, axis1=-2, axis2=-1))
    trace_dev = float(np.max(np.abs(traces - 1.0)))
    ok = psd <= tol and ns <= tol and trace_dev <= tol
    return NSReport(ok, psd, ns, trace_dev)


def marginal(assemblage: Assemblage, subset, outputs=(), inputs=(), tol: float = 1e-8) -> np.ndarray:
    """Marginal element ``σ_S(a_S|x_S)``; ``subset`` holds 1-based party indices."""
    subset = sorted(int(k) for k in subset)
    arr = _marginal_array(assemblage.elements, assemblage.n_parties, subset, tol)
    if len(outputs) != len(subset) or len(inputs) != len(subset):
        raise InvalidInputError("outputs and inputs must have one entry per party in the subset")
    # after marginalisation: outputs of subset, inputs of subset (others fixed), block
    return arr[tuple(outputs) + tuple(inputs)]


def marginal_array(assemblage: Assemblage, subset, tol: float = 1e-8) -> np.ndarray:
    """All marginal elements of ``subset``, shape ``outputs_S + inputs_S + (d, d)``."""
    return _marginal_array(assemblage.elements, assemblage.n_parties, subset, tol)


def reduced_state(assemblage: Assemblage, tol: float = 1e-8) -> np.ndarray:
    return marginal(assemblage, (), (), (), tol)


def assemblage_correlation(assemblage: Assemblage, bob: MeasurementSet) -> Correlation:
    """``p(a⃗ b | x⃗ y) = Tr(N_{b|y} σ_{a⃗|x⃗})`` with Bob as the last Bell party."""
    if bob.dim != assemblage.dim:
        raise InvalidInputError(f"Bob's operators are {bob.dim}-dimensional, assemblage blocks are {assemblage.dim}")
    n = assemblage.n_parties
    # Tr(N σ) = sum_ij N_ij σ_ji
    p = np.real(np.einsum("ybij,...ji->...by", bob.operators, assemblage.elements))
    # p axes: outputs(n), inputs(n), b, y -> outputs, b, inputs, y
    p = np.moveaxis(p, 2 * n, n)
    s = assemblage.scenario
    return Correlation(s.outputs + (bob.n_outputs,), s.inputs + (bob.n_inputs,), p)


def correlation_from_assemblage(assemblage: Assemblage) -> Correlation:
    return assemblage.alice_correlation()


def chsh_coefficients() -> np.ndarray:
    """Coefficients ``c[a, b, x, y]`` with ``Σ c p = CHSH`` (local bound 2)."""
    c = np.zeros((2, 2, 2, 2))
    for a, b, x, y in itertools.product(range(2), repeat=4):
        c[a, b, x, y] = (-1) ** (a + b + x * y)
    return c


def evaluate_functional(coeffs, corr: Correlation) -> float:
    return float(np.sum(np.asarray(coeffs) * corr.p))


def local_bound(coeffs, outputs, inputs) -> float:
    """Maximum of a Bell functional over local deterministic strategies (brute force)."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = len(outputs)
    per_party = [list(itertools.product(range(outputs[k]), repeat=inputs[k])) for k in range(n)]
    best = -np.inf
    for strategy in itertools.product(*per_party):
        value = 0.0
        for xs in itertools.product(*(range(i) for i in inputs)):
            a = tuple(strategy[k][xs[k]] for k in range(n))
            value += coeffs[a + xs]
        best = max(best, value)
    return float(best)


def deterministic_strategies(outputs, inputs):
    """Yield every local deterministic box as a probability array."""
    n = len(outputs)
    per_party = [list(itertools.product(range(outputs[k]), repeat=inputs[k])) for k in range(n)]
    for strategy in itertools.product(*per_party):
        p = np.zeros(tuple(outputs) + tuple(inputs))
        for xs in itertools.product(*(range(i) for i in inputs)):
            a = tuple(strategy[k][xs[k]] for k in range(n))
            p[a + xs] = 1.0
        yield p


def is_bell_local(corr: Correlation, tol: float = 1e-9) -> bool:
    """Feasibility LP: is ``corr`` a mixture of local deterministic boxes?"""
    from scipy.optimize import linprog

    verts = np.array([v.ravel() for v in deterministic_strategies(corr.outputs, corr.inputs)])
    n_v = verts.shape[0]
    a_eq = np.vstack([verts.T, np.ones((1, n_v))])
    b_eq = np.concatenate([corr.p.ravel(), [1.0]])
    res = linprog(np.zeros(n_v), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        return False
    return bool(np.max(np.abs(a_eq @ res.x - b_eq)) <= max(tol, 1e-8))
