"""Reference assemblages, correlations and seeded random generators."""
from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.stats import unitary_group

from .lift import build_pr_product_fixture, pr_box
from .quantum import Assemblage, Correlation, MeasurementSet, born_assemblage, check_nonsignalling, proj
from .words import Scenario

FIXTURES = ("singlet", "product", "deterministic", "pr-box", "pr-product", "random-ns")

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def singlet_measurements() -> MeasurementSet:
    """Alice's computational basis (x = 0) and Hadamard basis (x = 1)."""
    return MeasurementSet.from_bases([np.eye(2), HADAMARD])


def singlet_assemblage() -> Assemblage:
    """Maximally entangled two-qubit state |Φ+>, Alice measuring Z then X."""
    return born_assemblage(PHI_PLUS, [singlet_measurements()], Scenario(1, 2, 2, 2))


DEFAULT_PRODUCT_P = np.array([[0.7, 0.25], [0.3, 0.75]])        # p[a, x]
DEFAULT_RHO0 = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])


def product_assemblage(p=None, rho0=None) -> Assemblage:
    """Unsteered assemblage ``σ_{a|x} = p(a|x) ρ0``."""
    p = DEFAULT_PRODUCT_P if p is None else np.asarray(p, dtype=float)
    rho0 = DEFAULT_RHO0 if rho0 is None else np.asarray(rho0, dtype=complex)
    n_out, n_in = p.shape
    return Assemblage(Scenario(1, n_in, n_out, rho0.shape[0]), p[:, :, None, None] * rho0)


def deterministic_assemblage(n_inputs: int = 2, n_outputs: int = 2, dim: int = 2) -> Assemblage:
    """``σ_{a|x} = δ_{a,0} |0><0|``."""
    el = np.zeros((n_outputs, n_inputs, dim, dim), dtype=complex)
    el[0, :, 0, 0] = 1.0
    return Assemblage(Scenario(1, n_inputs, n_outputs, dim), el)


def pr_box_correlation() -> Correlation:
    return Correlation((2, 2), (2, 2), pr_box())


def pr_product_assemblage(rho0=None) -> Assemblage:
    return build_pr_product_fixture(np.eye(2) / 2 if rho0 is None else rho0)


# ---------------------------------------------------------------------------
# random objects

def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(dim, random_state=rng)


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_projective_measurement(dim: int, n_inputs: int, n_outputs: int,
                                  rng: np.random.Generator) -> MeasurementSet:
    """Random bases with basis vector k assigned to outcome ``k mod n_outputs``."""
    ops = np.zeros((n_inputs, n_outputs, dim, dim), dtype=complex)
    for x in range(n_inputs):
        u = random_unitary(dim, rng)
        for k in range(dim):
            ops[x, k % n_outputs] += proj(u[:, k])
    return MeasurementSet(ops)


def random_born_assemblage(scenario: Scenario, rng: np.random.Generator, alice_dim: int = 2,
                           pure: bool = True):
    """Assemblage of a random state under random projective measurements.

    Returns ``(assemblage, state, measurements)``.
    """
    dims = [alice_dim] * scenario.n_parties
    total = alice_dim ** scenario.n_parties * scenario.bob_dim
    state = random_pure_state(total, rng) if pure else random_density_matrix(total, rng)
    meas = [random_projective_measurement(alice_dim, scenario.inputs[k], scenario.outputs[k], rng)
            for k in range(scenario.n_parties)]
    return born_assemblage(state, meas, scenario, dims), state, meas


def random_ns_assemblage(rng: np.random.Generator, n_inputs: int = 3, n_outputs: int = 2,
                         dim: int = 2) -> Assemblage:
    """Bipartite non-signalling assemblage: a mixture of two Born assemblages plus a
    perturbation whose outcome sums vanish, rejected and shrunk until PSD."""
    s = Scenario(1, n_inputs, n_outputs, dim)
    alice_dim = max(dim, n_outputs)     # every outcome gets a basis vector, so no element is forced to 0
    first, _, _ = random_born_assemblage(s, rng, alice_dim=alice_dim, pure=False)
    second, _, _ = random_born_assemblage(s, rng, alice_dim=alice_dim, pure=True)
    w = rng.uniform(0.2, 0.8)
    base = w * first.elements + (1 - w) * second.elements
    h = rng.normal(size=(n_outputs, n_inputs, dim, dim)) + 1j * rng.normal(size=(n_outputs, n_inputs, dim, dim))
    h = (h + np.conj(np.swapaxes(h, -1, -2))) / 2
    h -= h.mean(axis=0, keepdims=True)            # Σ_a Δ_{a|x} = 0 keeps every constraint
    scale = 0.1
    for _ in range(60):
        cand = Assemblage(s, base + scale * h)
        if np.linalg.eigvalsh(cand.elements).min() >= 0:
            return cand
        scale /= 2
    return Assemblage(s, base)


def make_fixture(name: str, seed: int = 0, n_inputs: int = 3, n_outputs: int = 2, dim: int = 2):
    if name == "singlet":
        return singlet_assemblage()
    if name == "product":
        return product_assemblage()
    if name == "deterministic":
        return deterministic_assemblage()
    if name == "pr-box":
        return pr_box_correlation()
    if name == "pr-product":
        return pr_product_assemblage()
    if name == "random-ns":
        return random_ns_assemblage(np.random.default_rng(seed), n_inputs, n_outputs, dim)
    raise ValueError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
