"""Independent reference computations used to freeze expected values.

These avoid the package's code paths: explicit Kronecker products, loop-based
partial traces and plain enumeration.
"""
import itertools

import numpy as np


def partial_trace_alices(rho, alice_dim, bob_dim):
    out = np.zeros((bob_dim, bob_dim), dtype=complex)
    for k in range(alice_dim):
        bra = np.zeros(alice_dim)
        bra[k] = 1
        left = np.kron(bra, np.eye(bob_dim))
        out += left @ rho @ left.T
    return out


def born_element(rho, alice_ops, bob_dim):
    """Tr_A[(M_1 ⊗ ... ⊗ M_N ⊗ 1) rho] with explicit Kronecker products."""
    op = np.eye(1)
    for m in alice_ops:
        op = np.kron(op, m)
    alice_dim = op.shape[0]
    full = np.kron(op, np.eye(bob_dim)) @ rho
    return partial_trace_alices(full, alice_dim, bob_dim)


def count_aq_words(n_parties, n_outputs, n_inputs):
    """Each party contributes nothing or one (input, output) letter."""
    per_party = [None] + list(itertools.product(range(n_inputs), range(n_outputs)))
    return sum(1 for _ in itertools.product(per_party, repeat=n_parties))


def chsh_value(p):
    total = 0.0
    for a, b, x, y in itertools.product(range(2), repeat=4):
        total += (-1) ** (a + b + x * y) * p[a, b, x, y]
    return total


def local_chsh_max():
    """Enumerate the 16 deterministic strategies (a0, a1, b0, b1)."""
    best = -np.inf
    for a0, a1, b0, b1 in itertools.product(range(2), repeat=4):
        a, b = (a0, a1), (b0, b1)
        value = sum((-1) ** (a[x] + b[y] + x * y) for x in range(2) for y in range(2))
        best = max(best, value)
    return best


def real_span_rank(ops):
    vecs = [np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in ops]
    return np.linalg.matrix_rank(np.array(vecs), tol=1e-9)
