import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqsteer.errors import InvalidInputError, LiftInconsistencyError, PreconditionError
from aqsteer.fixtures import (PHI_PLUS, pr_product_assemblage, random_born_assemblage, random_ns_assemblage,
                              random_projective_measurement, singlet_assemblage, singlet_measurements)
from aqsteer.ghjw import ns_to_moment
from aqsteer.lift import (MomentMatrix, bell_certificate_from_epr, build_pr_product_fixture,
                          commuting_bell_certificate, decompose_bell_moment, lift, lift_correlation,
                          prop1_check)
from aqsteer.moments import compile_bell, compile_epr, membership
from aqsteer.quantum import Assemblage, Correlation, MeasurementSet, assemblage_correlation, is_bell_local
from aqsteer.tomography import TomographyFrame, pauli_frame, tomographic_correlation
from aqsteer.words import EMPTY, Letter, Scenario, Word


def projector_lists(meas):
    return [[[m.operators[x, a] for a in range(m.n_outputs)] for x in range(m.n_inputs)] for m in meas]


def singlet_certificate(frame=None):
    frame = frame or pauli_frame(1)
    alice = Scenario(1, 2, 2)
    return commuting_bell_certificate(PHI_PLUS, projector_lists([singlet_measurements()]), [2], frame, alice)


def test_constructive_bell_certificate(rng):
    a = random_ns_assemblage(rng)
    bob = random_projective_measurement(2, 2, 2, rng)
    gamma_b = bell_certificate_from_epr(ns_to_moment(a), bob)
    assert gamma_b.min_eig() >= -1e-10
    assert gamma_b.structure_violation() <= 1e-10
    corr = assemblage_correlation(a, bob)
    # pinned entries carry the Bell correlation
    for w in gamma_b.words:
        if len(w) == 2:
            (la, lb) = w.letters
            assert gamma_b.entry(EMPTY, w).real == pytest.approx(corr.p[la.output, lb.output, la.input, lb.input],
                                                                 abs=1e-10)


def test_prop1_on_singlet(rng):
    a = singlet_assemblage()
    cert = membership(compile_epr(a)).certificate
    report = prop1_check(a, cert, random_projective_measurement(2, 2, 2, rng))
    assert report.feasible
    assert report.constructive_min_eig >= -1e-8
    assert report.constructive_structure <= 1e-8


def test_prop1_requires_projective_bob(rng):
    a = singlet_assemblage()
    cert = membership(compile_epr(a)).certificate
    povm = MeasurementSet(np.array([[np.eye(2) / 2, np.eye(2) / 2]]))
    with pytest.raises(PreconditionError):
        prop1_check(a, cert, povm)


def test_prop1_rejects_foreign_certificate(rng):
    cert = membership(compile_epr(singlet_assemblage())).certificate
    other = random_ns_assemblage(rng, n_inputs=2)
    with pytest.raises(PreconditionError):
        prop1_check(other, cert, random_projective_measurement(2, 2, 2, rng))


def test_prop1_with_trivial_bob():
    # a one-outcome Bob adds nothing: the Bell test reduces to the Alices' correlation
    a = singlet_assemblage()
    cert = membership(compile_epr(a)).certificate
    report = prop1_check(a, cert, MeasurementSet.trivial(2))
    assert report.feasible
    np.testing.assert_allclose(report.correlation.p[:, 0, :, 0], a.alice_correlation().p, atol=1e-12)


def test_lift_of_commuting_certificate_is_exact():
    report = lift(singlet_certificate(), pauli_frame(1))
    assert report.psd and not report.retried
    a = singlet_assemblage()
    gamma = report.gamma
    for w in gamma.words[1:]:
        l = w.letters[0]
        np.testing.assert_allclose(gamma.entry_block(EMPTY, w), a.elements[l.output, l.input], atol=1e-12)
    assert gamma.min_eig() >= -1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 1.0))
def test_lift_is_linear_in_the_certificate(seed, w):
    rng = np.random.default_rng(seed)
    frame = pauli_frame(1)
    alice = Scenario(1, 2, 2)
    certs = []
    for _ in range(2):
        _, state, meas = random_born_assemblage(Scenario(1, 2, 2, 2), rng)
        certs.append(commuting_bell_certificate(state, projector_lists(meas), [2], frame, alice))
    mix = MomentMatrix(certs[0].scenario, certs[0].words, w * certs[0].entries + (1 - w) * certs[1].entries,
                       "scalar")
    lifted = [lift(c, frame).gamma.entries for c in certs]
    np.testing.assert_allclose(lift(mix, frame).gamma.entries, w * lifted[0] + (1 - w) * lifted[1], atol=1e-12)


def test_decomposition_blocks_are_frame_statistics():
    dec = decompose_bell_moment(singlet_certificate(), pauli_frame(1))
    corr = tomographic_correlation(singlet_assemblage(), pauli_frame(1))
    # block (∅, a|x) holds p(a b | x y)
    for a, x in itertools.product(range(2), range(2)):
        j = dec.alice_words.index(next(w for w in dec.alice_words
                                       if len(w) == 1 and w.letters[0].input == x and w.letters[0].output == a))
        np.testing.assert_allclose(dec.blocks[0, j].real, corr.p[a, :, x, :], atol=1e-12)


def test_frame_mismatch_rejected():
    frame2 = pauli_frame(2)
    with pytest.raises(InvalidInputError):
        decompose_bell_moment(singlet_certificate(), frame2)


def test_incomplete_frame_rejected():
    z_only = MeasurementSet.from_bases([np.eye(2), np.eye(2), np.eye(2)])
    frame = TomographyFrame(z_only, np.zeros((3, 2, 2, 2), dtype=complex), "z")
    with pytest.raises(InvalidInputError):
        lift(singlet_certificate(), frame)


def test_structure_breach_raises():
    cert = singlet_certificate()
    ent = cert.entries.copy()
    j = cert.index(Word((Letter(2, 0, 0),)))
    # Bob's outcome statistics for one setting no longer sum to one
    ent[0, j] += 0.3
    ent[j, 0] += 0.3
    with pytest.raises(LiftInconsistencyError):
        lift(MomentMatrix(cert.scenario, cert.words, ent, "scalar"), pauli_frame(1))


def test_solver_certificate_lift_is_flagged():
    # a generic Bell certificate need not factor through Bob's system; the lift reports it
    corr = tomographic_correlation(singlet_assemblage(), pauli_frame(1))
    report = lift_correlation(corr, pauli_frame(1))
    assert report.retried
    assert report.verdict == "hypothesis-violation"
    assert report.min_eig < -1e-3


def test_pr_product_is_steering_post_quantum():
    a = pr_product_assemblage()
    assert membership(compile_epr(a)).t_star <= -1e-3
    corr = tomographic_correlation(a, pauli_frame(1))
    assert membership(compile_bell(corr)).t_star <= -1e-3
    alice = a.alice_correlation()
    assert not is_bell_local(alice)


def test_pr_product_with_trivial_bob():
    a = build_pr_product_fixture(np.ones((1, 1)))
    assert a.dim == 1
    assert membership(compile_epr(a)).t_star <= -1e-3


def test_pr_product_rejects_bad_state():
    with pytest.raises(InvalidInputError):
        build_pr_product_fixture(np.diag([1.0, 1.0]))


def test_singlet_decomposition_entries():
    frame = pauli_frame(1)
    dec = decompose_bell_moment(singlet_certificate(frame), frame)
    np.testing.assert_allclose(dec.block(EMPTY, EMPTY).sum(axis=0), 1.0, atol=1e-12)
    a = singlet_assemblage()
    for x, o in itertools.product(range(2), repeat=2):
        w = Word((Letter(1, x, o),))
        # summing Bob's outcomes leaves Alice's marginal for every setting y
        np.testing.assert_allclose(dec.block(w, w).sum(axis=0), np.real(np.trace(a.elements[o, x])), atol=1e-12)
        other = Word((Letter(1, x, 1 - o),))
        np.testing.assert_allclose(dec.block(w, other), 0, atol=1e-12)
    gamma = lift(singlet_certificate(frame), frame).gamma
    np.testing.assert_allclose(gamma.entry(EMPTY, EMPTY), np.eye(2) / 2, atol=1e-12)


def test_prop1_with_pauli_z_bob():
    a = singlet_assemblage()
    cert = membership(compile_epr(a)).certificate
    report = prop1_check(a, cert, MeasurementSet.from_bases([np.eye(2)]))
    assert report.feasible and report.constructive_min_eig >= -1e-8


def test_pr_product_local_across_alices_bob_cut():
    a = pr_product_assemblage()
    corr = tomographic_correlation(a, pauli_frame(1))
    joint = corr.p.transpose(0, 1, 3, 4, 2, 5)      # [a1, a2, x1, x2, b, y]
    composite = joint.reshape(4, 4, 2, 3)             # Alices merged: [A, X, b, y]
    # Bob's statistics never depend on the Alices' outcomes: a product across the cut
    prod = composite.sum(axis=2, keepdims=True) * composite.sum(axis=0, keepdims=True)[:1, :1]
    np.testing.assert_allclose(composite, prod, atol=1e-12)
    assert is_bell_local(Correlation((4, 2), (4, 3), composite.transpose(0, 2, 1, 3)))
