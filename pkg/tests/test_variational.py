"""Overlap networks, gate environments and the certified-bound optimizers."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fidcert import circuit as C
from fidcert import lpdo as lp
from fidcert import mps
from fidcert import variational as V
from fidcert.network import ColumnNetwork, Node
from fidcert.oracle import dense_fidelity, dense_trace_norm

LAYOUTS = [C.Layout.SEQUENTIAL_ANCILLA, C.Layout.SEQUENTIAL_NO_ANCILLA, C.Layout.FDLU_ANCILLA]
FAST = V.OptimizerConfig(max_sweeps=8, restarts=1)


def d_a_for(layout: C.Layout) -> int:
    return 2 if layout.has_ancilla else 1


def wire_tensor(s: lp.LPDO, chain: C.WireChain) -> np.ndarray:
    """Dense purification as ``(D_s, D_wires)`` with ancillas in |0>."""
    t = s.purification_vector().reshape(-1, *s.kraus_dims)
    if chain.has_ancilla:
        for k in reversed(range(len(s))):
            zero = np.eye(chain.wires[chain.ancilla_wire(k)].dim)[0]
            t = np.moveaxis(np.tensordot(t, zero, axes=0), -1, 2 + k)
    return t.reshape(t.shape[0], -1)


def dense_overlap(r: lp.LPDO, s: lp.LPDO, c: C.SequentialCircuit) -> complex:
    """<<psi_r| (1 x U) |psi_s>> with U assembled densely."""
    a, b = wire_tensor(r, c.chain), wire_tensor(s, c.chain)
    return complex(np.vdot(a, C.apply_to_vector(c, b.T).T))


def random_pair(rng: np.random.Generator, n: int, chi: int = 2, d_p: int = 2) -> tuple[lp.LPDO, lp.LPDO]:
    return lp.random_lpdo(n, 2, d_p, chi, rng), lp.random_lpdo(n, 2, d_p, chi, rng)


# ---------------------------------------------------------------- networks


def test_column_network_validates_legs():
    with pytest.raises(ValueError):
        ColumnNetwork([Node(np.ones(2), (0,), 0)], 1)
    with pytest.raises(ValueError):
        ColumnNetwork([Node(np.ones(2), (0,), 0), Node(np.ones(3), (0,), 0)], 1)


def test_column_network_value_and_environment(rng):
    a, b, m = rng.normal(size=3), rng.normal(size=4), rng.normal(size=(3, 4))
    net = ColumnNetwork([Node(a, (0,), 0), Node(m, (0, 1), 1), Node(b, (1,), 2)], 3)
    assert net.value() == pytest.approx(a @ m @ b)
    np.testing.assert_allclose(net.environment(1), np.outer(a, b))
    net.set_array(1, 2 * m)
    assert net.value() == pytest.approx(2 * a @ m @ b)
    with pytest.raises(ValueError):
        net.set_array(1, np.ones((2, 2)))


# ---------------------------------------------------------------- overlap


def test_overlap_identical_purifications_is_one(rng):
    s = lp.random_lpdo(4, 2, 2, 3, rng)
    for layout in LAYOUTS:
        c = C.build_circuit(4, 1, layout, d_a=d_a_for(layout))
        assert V.overlap(s, s, c) == pytest.approx(1, abs=1e-12)


def test_overlap_orthogonal_products_is_zero():
    r = lp.from_pure(mps.basis_state([0, 0, 0]))
    s = lp.from_pure(mps.basis_state([1, 0, 1]))
    c = C.build_circuit(3, 1, "sequential_ancilla", d_p=1, init="haar", seed=3)
    assert abs(V.overlap(r, s, c)) <= 1e-14


@pytest.mark.parametrize("layout", LAYOUTS)
def test_overlap_matches_dense(layout, rng):
    r, s = random_pair(rng, 4)
    c = C.build_circuit(4, 1, layout, d_a=d_a_for(layout), init="haar", seed=1)
    assert V.overlap(r, s, c) == pytest.approx(dense_overlap(r, s, c), abs=1e-11)


def test_overlap_rejects_dim_mismatch(rng):
    r = lp.random_lpdo(3, 2, 2, 2, rng)
    s = lp.random_lpdo(3, 2, 3, 2, rng)
    with pytest.raises(ValueError):
        V.overlap(r, s, C.build_circuit(3, 1, "sequential_ancilla"))


# ---------------------------------------------------------------- environments


def test_single_gate_environment_matches_removed_gate_assembly(rng):
    r, s = random_pair(rng, 3)
    chain = C.WireChain.build([2, 2, 2], None)
    g = C.build_circuit(3, 1, "sequential_no_ancilla", d_a=1, init="haar", seed=2).gates[1]
    c = C.SequentialCircuit(chain, 1, C.Layout.SEQUENTIAL_NO_ANCILLA, [g])
    e = V.gate_environment(r, s, c, 0)
    a = r.purification_vector().reshape(8, 2, 2, 2)
    b = s.purification_vector().reshape(8, 2, 2, 2)
    lo = g.wires[0]
    # E[(x), (w)] = sum over the untouched legs of conj(a)[.., w, ..] b[.., x, ..]
    if lo == 0:
        dense = np.einsum("swvz,sxyz->xywv", a.conj(), b).reshape(4, 4)
    else:
        dense = np.einsum("szwv,szxy->xywv", a.conj(), b).reshape(4, 4)
    np.testing.assert_allclose(e, dense, atol=1e-12)
    assert np.trace(g.matrix @ e) == pytest.approx(V.overlap(r, s, c), abs=1e-12)


@pytest.mark.parametrize("layout", LAYOUTS)
def test_environment_reproduces_overlap(layout, rng):
    r, s = random_pair(rng, 3)
    c = C.build_circuit(3, 2, layout, d_a=d_a_for(layout), init="haar", seed=9)
    problem = V.fidelity_problem(r, s, c)
    ov = problem.overlap()
    for i, g in enumerate(c.gates):
        assert np.trace(g.matrix @ problem.environment(i)) == pytest.approx(ov, abs=1e-11)
    with pytest.raises(IndexError):
        problem.environment(len(c.gates))


def test_identity_network_environment(rng):
    s = lp.random_lpdo(3, 2, 2, 2, rng)
    c = C.build_circuit(3, 1, "sequential_ancilla")
    e = V.gate_environment(s, s, c, 3)
    assert np.trace(e) == pytest.approx(1, abs=1e-12)


def test_polar_updates_are_monotone_over_many_trials():
    worst = np.inf
    trials = 0
    for seed in range(25):
        rng = np.random.default_rng(seed)
        layout = LAYOUTS[seed % 3]
        r, s = random_pair(rng, 3)
        c = C.build_circuit(3, 1, layout, d_a=d_a_for(layout), init="haar", seed=seed)
        problem = V.fidelity_problem(r, s, c)
        for _ in range(40):
            i = int(rng.integers(len(c.gates)))
            before = abs(problem.overlap())
            problem.update(i)
            after = abs(problem.overlap())
            worst = min(worst, after - before)
            trials += 1
    assert trials == 1000
    assert worst >= -1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**16), lam=st.floats(-2, 2))
def test_overlap_is_affine_in_each_gate(seed, lam):
    rng = np.random.default_rng(seed)
    r, s = random_pair(rng, 3)
    c = C.build_circuit(3, 1, "fdlu_ancilla", init="haar", seed=seed)
    problem = V.fidelity_problem(r, s, c)
    i = int(rng.integers(len(c.gates)))
    d = c.gates[i].matrix.shape[0]
    g1 = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    g2 = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    values = []
    for g in (g1, g2, (1 - lam) * g1 + lam * g2):
        problem.set_gate(i, g)
        values.append(problem.overlap())
    assert values[2] == pytest.approx((1 - lam) * values[0] + lam * values[1], abs=1e-11 * (1 + abs(lam)) * 10)


# ---------------------------------------------------------------- fidelity lower bound


def test_equal_states_need_no_sweeps(rng):
    s = lp.random_lpdo(4, 2, 2, 2, rng)
    rep = V.maximize_fidelity_lower(s, s, "sequential_ancilla", 1, V.OptimizerConfig(restarts=1))
    assert rep.value >= 1 - 1e-9
    assert rep.sweeps_used == 0 and rep.converged


def test_pure_vs_maximally_mixed_closed_form():
    rho = lp.from_pure(mps.basis_state([0] * 4))
    sigma = lp.maximally_mixed(4)
    rep = V.maximize_fidelity_lower(rho, sigma, "sequential_ancilla", 1, V.OptimizerConfig(restarts=2))
    assert rep.value == pytest.approx(2.0**-2, abs=1e-6)
    assert dense_fidelity(rho.to_dense(), sigma.to_dense()) == pytest.approx(0.25, abs=1e-12)


def test_fidelity_lower_regression_target():
    rng = np.random.default_rng(0)
    r, s = random_pair(rng, 5)
    f = dense_fidelity(r.to_dense(), s.to_dense())
    rep = V.maximize_fidelity_lower(r, s, "sequential_ancilla", 2, V.OptimizerConfig(max_sweeps=200, restarts=8))
    assert rep.value <= f + 1e-9
    assert rep.value >= 0.9 * f


def test_fidelity_lower_rejects_unnormalized(rng):
    s = lp.random_lpdo(3, 2, 2, 2, rng, normalized=False)
    with pytest.raises(ValueError):
        V.maximize_fidelity_lower(s, s)


def test_history_is_nondecreasing(rng):
    r, s = random_pair(rng, 4)
    cfg = V.OptimizerConfig(max_sweeps=30, restarts=2, record_history=True)
    rep = V.maximize_fidelity_lower(r, s, "fdlu_ancilla", 2, cfg)
    h = np.array(rep.objective_history)
    assert len(h) > 1
    assert np.all(np.diff(h) >= -1e-12)
    assert h[-1] == pytest.approx(rep.value, abs=1e-10)


def test_depth_monotonicity_with_nested_init(rng):
    r, s = random_pair(rng, 4)
    cfg = V.OptimizerConfig(max_sweeps=40, restarts=2)
    prev = V.maximize_fidelity_lower(r, s, "sequential_ancilla", 1, cfg)
    for t in (2, 3):
        nxt = V.maximize_fidelity_lower(r, s, "sequential_ancilla", t, cfg, init_circuit=prev.circuit)
        assert nxt.value >= prev.value - 1e-12
        prev = nxt


def test_report_json_round_trip(rng):
    r, s = random_pair(rng, 3)
    rep = V.maximize_fidelity_lower(r, s, "sequential_no_ancilla", 1, FAST)
    back = V.BoundReport.from_json(rep.to_json())
    assert back == rep
    assert set(rep.to_record()) >= {"kind", "value", "layout", "depth_t", "sweeps_used", "converged",
                                    "objective_history", "seed", "wall_seconds"}


def test_config_validation():
    with pytest.raises(ValueError):
        V.OptimizerConfig(max_sweeps=0)
    with pytest.raises(ValueError):
        V.OptimizerConfig(restarts=0)
    with pytest.raises(ValueError):
        V.OptimizerConfig(rel_tol=0)


def test_restart_seeds_are_reported(rng):
    r, s = random_pair(rng, 3)
    rep = V.maximize_fidelity_lower(r, s, "sequential_ancilla", 1, V.OptimizerConfig(max_sweeps=5, restarts=3, seed=10))
    assert rep.seed in (None, 11, 12)


# ---------------------------------------------------------------- trace norm and upper bound


def test_trace_norm_equal_states(rng):
    s = lp.random_lpdo(3, 2, 2, 2, rng)
    for t in (1, 2):
        assert V.maximize_trace_norm_lower(s, s, t, FAST).value <= 1e-9


def test_trace_norm_orthogonal_single_site():
    zero = lp.from_pure(mps.basis_state([0]))
    one = lp.from_pure(mps.basis_state([1]))
    rep = V.maximize_trace_norm_lower(zero, one, 1, V.OptimizerConfig(restarts=2))
    assert rep.value == pytest.approx(2.0, abs=1e-9)


def test_trace_norm_regression_target():
    rng = np.random.default_rng(101)
    r, s = random_pair(rng, 4)
    tn = dense_trace_norm(r.to_dense(), s.to_dense())
    rep = V.maximize_trace_norm_lower(r, s, 2, V.OptimizerConfig(max_sweeps=200, restarts=8))
    assert rep.value <= tn + 1e-9
    assert rep.value >= 0.95 * tn


def test_trace_norm_circuit_without_ancilla_only(rng):
    s = lp.random_lpdo(3, 2, 2, 2, rng)
    with pytest.raises(ValueError):
        V.trace_norm_problem(s, s, C.build_circuit(3, 1, "sequential_ancilla"))


def test_fvdg_closed_forms():
    assert V.fvdg_upper(0.0) == 1.0
    assert V.fvdg_upper(2.0) == 0.0
    assert V.fvdg_upper(1.0) == pytest.approx(np.sqrt(3) / 2)
    assert V.fvdg_upper(2 + 1e-10) == 0.0
    with pytest.raises(ValueError):
        V.fvdg_upper(2.1)
    with pytest.raises(ValueError):
        V.fvdg_upper(-0.5)


# ---------------------------------------------------------------- certification


def test_certify_equal_states(rng):
    s = lp.random_lpdo(3, 2, 2, 2, rng)
    iv = V.certify_pair(s, s, cfg=FAST)
    assert iv.f_lower >= 1 - 1e-9
    assert iv.f_lower <= iv.f_upper + 1e-9
    assert iv.f_upper >= 1 - 1e-9


def test_certify_orthogonal_pure_states():
    r = lp.from_pure(mps.basis_state([0, 0, 0, 0]))
    s = lp.from_pure(mps.basis_state([1, 1, 1, 1]))
    iv = V.certify_pair(r, s, cfg=V.OptimizerConfig(max_sweeps=20, restarts=2))
    assert iv.f_upper <= 1e-4
    assert iv.f_lower <= 1e-9
    assert [rep.kind for rep in iv.reports] == ["fidelity_lower", "trace_norm_lower", "fidelity_upper"]


def test_certify_random_pair_brackets_dense(rng):
    r, s = random_pair(rng, 4)
    rd, sd = r.to_dense(), s.to_dense()
    f = dense_fidelity(rd, sd)
    iv = V.certify_pair(r, s, depth_t=2, cfg=V.OptimizerConfig(max_sweeps=50, restarts=2))
    assert iv.f_lower <= f + 1e-9
    assert f <= iv.f_upper + 1e-9
    assert iv.subfidelity <= f**2 + 1e-10
    assert f**2 <= iv.superfidelity + 1e-10
    assert iv.sqrt_subfidelity <= f + 1e-9
    rec = iv.to_record()
    assert rec["f_lower"] == iv.f_lower and len(rec["reports"]) == 3


def test_certification_over_many_random_pairs():
    checked = 0
    cfg = V.OptimizerConfig(max_sweeps=2, restarts=1, seed=0)
    for seed in range(200):
        rng = np.random.default_rng(10_000 + seed)
        n = int(rng.integers(2, 7))
        chi = int(rng.integers(1, 4))
        d_p = int(rng.integers(1, 3))
        r = lp.random_lpdo(n, 2, d_p, chi, rng)
        s = lp.random_lpdo(n, 2, d_p, chi, rng)
        f = dense_fidelity(r.to_dense(), s.to_dense())
        for t in (1, 2):
            tn = V.maximize_trace_norm_lower(r, s, t, cfg)
            assert f <= V.fvdg_upper(tn.value) + 1e-9
            for layout in LAYOUTS:
                lower = V.maximize_fidelity_lower(r, s, layout, t, cfg)
                assert lower.value <= f + 1e-9
                checked += 1
    assert checked == 1200
