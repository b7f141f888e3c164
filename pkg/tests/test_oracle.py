"""Exact reference computations cross-checked against each other."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import sqrtm

from fidcert import lpdo as lp
from fidcert.models import IsingSpec, dephase_dense, eigenstates_ed
from fidcert.oracle import (
    LowRankFactor,
    brute_force_uhlmann,
    dense_fidelity,
    dense_trace_norm,
    dephased_pure_fidelity,
    dephased_pure_fidelity_translation,
    gram_fidelity,
    low_rank_fidelity,
    uhlmann_overlap,
)
from helpers import random_complex, random_density


def reduced(psi: np.ndarray) -> np.ndarray:
    """Partial trace over the purifying factor of a ``(d_s, d_p)`` matrix."""
    return psi @ psi.conj().T


def random_purification(rng: np.random.Generator, d_s: int, d_p: int) -> np.ndarray:
    a = random_complex(rng, d_s, d_p)
    return a / np.linalg.norm(a)


# ---------------------------------------------------------------- dense_fidelity


def test_fidelity_with_itself(rng):
    rho = random_density(rng, 8)
    assert dense_fidelity(rho, rho) == pytest.approx(1, abs=1e-12)


def test_pure_vs_maximally_mixed():
    for n in (1, 2, 4):
        rho = np.zeros((2**n, 2**n))
        rho[0, 0] = 1
        assert dense_fidelity(rho, np.eye(2**n) / 2**n) == pytest.approx(2 ** (-n / 2), abs=1e-12)


def test_commuting_pair_bhattacharyya(rng):
    p, q = rng.random(16), rng.random(16)
    p, q = p / p.sum(), q / q.sum()
    assert dense_fidelity(np.diag(p), np.diag(q)) == pytest.approx(np.sum(np.sqrt(p * q)), abs=1e-12)


def test_fidelity_against_scipy_sqrtm(rng):
    rho, sigma = random_density(rng, 6), random_density(rng, 6, rank=2)
    r = sqrtm(rho)
    ref = np.trace(sqrtm(r @ sigma @ r)).real
    assert dense_fidelity(rho, sigma) == pytest.approx(ref, abs=1e-8)


def test_fidelity_is_symmetric_and_exact_on_low_rank(rng):
    rho, sigma = random_density(rng, 16, rank=3), random_density(rng, 16, rank=2)
    assert dense_fidelity(rho, sigma) == pytest.approx(dense_fidelity(sigma, rho), abs=1e-10)


def test_fidelity_input_validation(rng):
    with pytest.raises(ValueError):
        dense_fidelity(np.eye(2), np.eye(2) / 2)
    with pytest.raises(ValueError):
        dense_fidelity(np.diag([1.5, -0.5]), np.eye(2) / 2)
    with pytest.raises(ValueError):
        dense_fidelity(np.eye(2) / 2, np.eye(4) / 4)
    with pytest.raises(ValueError):
        dense_fidelity(np.eye(2**13) / 2**13, np.eye(2**13) / 2**13)


def test_tiny_negative_eigenvalues_are_clamped(rng):
    rho = random_density(rng, 4, rank=2)
    w, v = np.linalg.eigh(rho)
    w[0] = -5e-11
    w /= w.sum()
    noisy = (v * w) @ v.conj().T
    assert dense_fidelity(noisy, noisy) == pytest.approx(1, abs=1e-9)


# ---------------------------------------------------------------- dense_trace_norm


def test_trace_norm_closed_forms():
    zero, one = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert dense_trace_norm(zero, zero) == pytest.approx(0)
    assert dense_trace_norm(zero, one) == pytest.approx(2)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**16), dim=st.integers(2, 8))
def test_fuchs_van_de_graaf(seed, dim):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, dim, rank=int(rng.integers(1, dim + 1)))
    sigma = random_density(rng, dim, rank=int(rng.integers(1, dim + 1)))
    f = dense_fidelity(rho, sigma)
    t = dense_trace_norm(rho, sigma)
    assert 1 - f <= t / 2 + 1e-10
    assert t / 2 <= np.sqrt(max(1 - f**2, 0)) + 1e-10


# ---------------------------------------------------------------- low rank


def test_low_rank_trivial():
    v = np.zeros(8)
    v[3] = 1
    assert low_rank_fidelity(LowRankFactor(v), LowRankFactor(v)) == pytest.approx(1)
    w = np.zeros((8, 2))
    w[0, 0] = w[1, 1] = 1 / np.sqrt(2)
    assert low_rank_fidelity(LowRankFactor(v), LowRankFactor(w)) == 0


def test_low_rank_matches_dense(rng):
    a = random_complex(rng, 256, 3)
    b = random_complex(rng, 256, 3)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    fa, fb = LowRankFactor(a), LowRankFactor(b)
    assert fa.rank == 3 and fa.dim == 256
    assert low_rank_fidelity(fa, fb) == pytest.approx(dense_fidelity(fa.to_dense(), fb.to_dense()), abs=1e-10)
    assert gram_fidelity(a.conj().T @ b) == pytest.approx(low_rank_fidelity(fa, fb))


def test_low_rank_validation():
    with pytest.raises(ValueError):
        LowRankFactor(np.zeros((4, 0)))
    with pytest.raises(ValueError):
        LowRankFactor(np.array([np.nan, 1.0]))
    with pytest.raises(ValueError):
        low_rank_fidelity(LowRankFactor(np.ones(2)), LowRankFactor(np.ones(3)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**16), ra=st.integers(1, 4), rb=st.integers(1, 4))
def test_low_rank_gauge_invariance(seed, ra, rb):
    rng = np.random.default_rng(seed)
    a, b = random_complex(rng, 16, ra), random_complex(rng, 16, rb)
    ua, _ = np.linalg.qr(random_complex(rng, ra, ra))
    ub, _ = np.linalg.qr(random_complex(rng, rb, rb))
    f = low_rank_fidelity(LowRankFactor(a), LowRankFactor(b))
    g = low_rank_fidelity(LowRankFactor(a @ ua), LowRankFactor(b @ ub))
    assert g == pytest.approx(f, abs=1e-10 * max(1.0, f))


# ---------------------------------------------------------------- Uhlmann


def test_uhlmann_identical(rng):
    psi = random_purification(rng, 4, 4)
    f, u = brute_force_uhlmann(psi, psi)
    assert f == pytest.approx(1, abs=1e-12)
    phase = u[0, 0]
    np.testing.assert_allclose(u, phase * np.eye(4), atol=1e-10)


def test_uhlmann_pure_vs_mixed_qubit():
    psi_rho = np.array([[1.0, 0.0], [0.0, 0.0]])
    psi_sigma = np.eye(2) / np.sqrt(2)
    f, u = brute_force_uhlmann(psi_rho, psi_sigma)
    assert f == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    assert abs(uhlmann_overlap(psi_rho, psi_sigma, u)) == pytest.approx(f, abs=1e-12)


def test_uhlmann_is_dense_fidelity(rng):
    for _ in range(100):
        a, b = random_purification(rng, 8, 4), random_purification(rng, 8, 4)
        f, u = brute_force_uhlmann(a, b)
        assert f == pytest.approx(dense_fidelity(reduced(a), reduced(b)), abs=1e-10)
        assert abs(uhlmann_overlap(a, b, u)) == pytest.approx(f, abs=1e-10)
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-10


def test_uhlmann_cap():
    with pytest.raises(ValueError):
        brute_force_uhlmann(np.ones((1, 2**11)), np.ones((1, 2**11)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_fidelity_squared_between_moment_bounds(seed):
    rng = np.random.default_rng(seed)
    rho, sigma = random_density(rng, 8, rank=int(rng.integers(1, 9))), random_density(rng, 8)
    f = dense_fidelity(rho, sigma)
    sub, sup = lp.dense_moment_bounds(rho, sigma)
    assert sub <= f**2 + 1e-10
    assert f**2 <= sup + 1e-10


# ---------------------------------------------------------------- dephased pure states


@pytest.mark.parametrize("axis", ["Z", "X"])
def test_dephased_oracle_matches_dense(axis, rng):
    psi, phi = random_complex(rng, 32), random_complex(rng, 32)
    psi, phi = psi / np.linalg.norm(psi), phi / np.linalg.norm(phi)
    ref = dense_fidelity(dephase_dense(psi, 0.3, axis), dephase_dense(phi, 0.3, axis))
    assert dephased_pure_fidelity(psi, phi, 0.3, axis) == pytest.approx(ref, abs=1e-10)


def test_dephased_oracle_limits(rng):
    psi = random_complex(rng, 16)
    psi /= np.linalg.norm(psi)
    phi = random_complex(rng, 16)
    phi /= np.linalg.norm(phi)
    assert dephased_pure_fidelity(psi, psi, 0.4) == pytest.approx(1, abs=1e-12)
    assert dephased_pure_fidelity(psi, phi, 0.0) == pytest.approx(abs(np.vdot(psi, phi)), abs=1e-12)


@pytest.mark.parametrize("axis", ["Z", "X"])
def test_translation_blocked_oracle(axis):
    es = eigenstates_ed(IsingSpec(8), k=3)
    psi, phi = es.vectors[0], es.vectors[2]
    full = dephased_pure_fidelity(psi, phi, 0.3, axis)
    assert dephased_pure_fidelity_translation(psi, phi, 0.3, axis) == pytest.approx(full, abs=1e-10)


def test_translation_oracle_rejects_non_invariant(rng):
    psi = random_complex(rng, 16).real
    with pytest.raises(ValueError):
        dephased_pure_fidelity_translation(psi, psi, 0.3)
