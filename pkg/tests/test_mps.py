"""MPS tests against dense state vectors and exact diagonalization."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fidcert import mps
from fidcert.models import IsingSpec, eigenstates_ed
from helpers import dense_op, random_complex

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def random_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    v = random_complex(rng, 2**n)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------- from_dense


def test_from_dense_product_state_has_unit_bonds():
    v = np.zeros(2**5)
    v[0] = 1
    m = mps.from_dense(v, 2, tol=1e-12)
    assert m.bond_dims == [1, 1, 1, 1]


def test_from_dense_ghz_has_bond_two():
    v = np.zeros(2**6)
    v[0] = v[-1] = 1 / np.sqrt(2)
    m = mps.from_dense(v, 2, tol=1e-12)
    assert m.max_bond == 2
    np.testing.assert_allclose(m.to_dense(), v, atol=1e-14)
    np.testing.assert_allclose(mps.ghz_state(6).to_dense(), v, atol=1e-14)


def test_from_dense_random_round_trip(rng):
    v = random_vector(rng, 8)
    m = mps.from_dense(v, 2, chi_max=16)
    assert m.max_bond <= 16
    assert abs(np.vdot(m.to_dense(), v)) ** 2 >= 1 - 1e-12
    assert mps.canonical_defects(m) <= 1e-10


def test_from_dense_weight_budget(rng):
    v = random_vector(rng, 8)
    tol = 1e-2
    m = mps.from_dense(v, 2, tol=tol)
    assert np.vdot(m.to_dense(), v).real >= 1 - tol
    assert m.max_bond < 16


def test_from_dense_rejects_bad_length():
    with pytest.raises(ValueError):
        mps.from_dense(np.ones(6), 2)


def test_qutrit_from_dense(rng):
    v = random_complex(rng, 27)
    m = mps.from_dense(v, 3)
    assert m.phys_dims == [3, 3, 3]
    np.testing.assert_allclose(m.to_dense(), v, atol=1e-12)


# ---------------------------------------------------------------- inner


def test_inner_normalized_is_one(rng):
    m = mps.random_mps(7, 2, 5, rng)
    assert mps.inner(m, m) == pytest.approx(1.0, abs=1e-12)


def test_inner_orthogonal_basis_states():
    assert mps.inner(mps.basis_state([0] * 5), mps.basis_state([1] * 5)) == 0


def test_inner_matches_dense(rng):
    a = mps.random_mps(6, 2, 4, rng)
    b = mps.random_mps(6, 2, 3, rng)
    assert mps.inner(a, b) == pytest.approx(np.vdot(a.to_dense(), b.to_dense()), abs=1e-12)


def test_inner_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        mps.inner(mps.random_mps(4, 2, 2, rng), mps.random_mps(5, 2, 2, rng))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**16), n=st.integers(1, 6), chi=st.integers(1, 4))
def test_inner_conjugate_symmetry(seed, n, chi):
    rng = np.random.default_rng(seed)
    a = mps.random_mps(n, 2, chi, rng)
    b = mps.random_mps(n, 2, chi, rng)
    assert mps.inner(a, b) == pytest.approx(np.conj(mps.inner(b, a)), abs=1e-12)


def test_normalize_refuses_zero():
    z = mps.MPS((np.zeros((1, 2, 1)),))
    with pytest.raises(ValueError):
        mps.normalize(z)


# ---------------------------------------------------------------- canonical_compress


def test_compress_fixed_point(rng):
    m = mps.canonical_compress(mps.random_mps(6, 2, 4, rng), center=2)
    again = mps.canonical_compress(m, center=2, tol=1e-14)
    assert abs(mps.inner(m, again)) >= 1 - 1e-12
    assert mps.canonical_defects(again) <= 1e-10


def test_compress_ghz_to_product_loses_half():
    m = mps.canonical_compress(mps.ghz_state(6), center=0, chi_max=1)
    assert m.max_bond == 1
    overlap = abs(mps.inner(mps.ghz_state(6), mps.normalize(m))) ** 2
    assert overlap == pytest.approx(0.5, abs=1e-12)


def test_compress_overlap_matches_discarded_schmidt_weight(rng):
    v = random_vector(rng, 8)
    schmidt = np.linalg.svd(v.reshape(16, 16), compute_uv=False)
    discarded = float(np.sum(schmidt[8:] ** 2))
    m = mps.canonical_compress(mps.from_dense(v, 2), center=3, chi_max=8)
    assert m.max_bond <= 8
    assert mps.canonical_defects(m) <= 1e-10
    assert np.vdot(v, m.to_dense()).real == pytest.approx(1 - discarded, abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**16), center=st.integers(0, 5))
def test_compress_lossless_preserves_inner_products(seed, center):
    rng = np.random.default_rng(seed)
    m = mps.random_mps(6, 2, 4, rng)
    other = mps.random_mps(6, 2, 3, rng)
    c = mps.canonical_compress(m, center=center)
    assert c.center == center
    assert mps.canonical_defects(c) <= 1e-10
    assert mps.inner(other, c) == pytest.approx(mps.inner(other, m), abs=1e-12)


# ---------------------------------------------------------------- site operators and correlators


def test_apply_identity_is_noop(rng):
    m = mps.random_mps(5, 2, 3, rng)
    np.testing.assert_allclose(mps.apply_site_op(m, 2, np.eye(2)).to_dense(), m.to_dense())


def test_apply_x_flips_basis_state():
    out = mps.apply_site_op(mps.basis_state([0, 0, 0]), 1, X).to_dense()
    expected = np.zeros(8)
    expected[0b010] = 1
    np.testing.assert_allclose(out, expected)


def test_apply_z_matches_dense(rng):
    m = mps.random_mps(6, 2, 4, rng)
    out = mps.apply_site_op(m, 4, Z)
    assert out.bond_dims == m.bond_dims
    np.testing.assert_allclose(out.to_dense(), dense_op(6, {4: Z}) @ m.to_dense(), atol=1e-12)


def test_apply_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        mps.apply_site_op(mps.random_mps(3, 2, 2, rng), 0, np.eye(3))


def test_two_point_trivial_cases():
    assert mps.two_point(mps.basis_state([0] * 5), Z, 1, Z, 3) == pytest.approx(1)
    g = mps.ghz_state(6)
    for i, j in [(0, 5), (2, 3), (1, 4)]:
        assert mps.two_point(g, Z, i, Z, j) == pytest.approx(1, abs=1e-12)
        # X_i X_j maps GHZ to an orthogonal state once N > 2
        assert mps.two_point(g, X, i, X, j) == pytest.approx(0, abs=1e-12)
    assert mps.two_point(mps.ghz_state(2), X, 0, X, 1) == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        mps.two_point(g, X, 2, X, 2)


def test_two_point_critical_ising_matches_ed():
    es = eigenstates_ed(IsingSpec(12), k=1)
    psi = es.vectors[0]
    m = mps.from_dense(psi, 2)  # lossless, unlike the compressed states in ``es``
    for i, j in [(0, 1), (0, 6), (3, 10)]:
        dense = np.vdot(psi, dense_op(12, {i: X, j: X}) @ psi)
        assert mps.two_point(m, X, i, X, j) == pytest.approx(dense, abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**16), i=st.integers(0, 4), j=st.integers(0, 4))
def test_two_point_equals_double_application(seed, i, j):
    if i == j:
        return
    rng = np.random.default_rng(seed)
    m = mps.random_mps(5, 2, 3, rng)
    a = random_complex(rng, 2, 2)
    b = random_complex(rng, 2, 2)
    twice = mps.apply_site_op(mps.apply_site_op(m, j, b), i, a)
    assert mps.two_point(m, a, i, b, j) == pytest.approx(mps.inner(m, twice), abs=1e-12)


def test_profiles_match_dense(rng):
    bra = mps.random_mps(5, 2, 3, rng)
    ket = mps.random_mps(5, 2, 2, rng)
    vb, vk = bra.to_dense(), ket.to_dense()
    one = mps.one_point_profile(bra, ket, Z)
    two = mps.two_point_matrix(bra, ket, Z)
    for i in range(5):
        assert one[i] == pytest.approx(np.vdot(vb, dense_op(5, {i: Z}) @ vk), abs=1e-12)
        for j in range(5):
            ops = {i: Z} if i == j else {i: Z, j: Z}
            ref = np.vdot(vb, dense_op(5, ops) @ vk) if i != j else np.vdot(vb, vk)
            assert two[i, j] == pytest.approx(ref, abs=1e-12)
