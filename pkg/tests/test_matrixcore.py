import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqc import matrixcore as mc


def test_special_unitarize_identity():
    for d in (2, 4, 8):
        assert np.allclose(mc.special_unitarize(np.eye(d)), np.eye(d), atol=1e-15)


def test_special_unitarize_cnot_two_qubits():
    cx = mc.cnot_matrix(2, 1, 2)
    assert np.linalg.det(cx) == pytest.approx(-1)
    w = mc.special_unitarize(cx)
    assert np.allclose(w, np.exp(-1j * np.pi / 4) * cx, atol=1e-14)
    assert abs(np.linalg.det(w) - 1) <= mc.DET_TOL


def test_special_unitarize_idempotent():
    u = mc.haar_random(3, 5) * np.exp(0.7j)
    once = mc.special_unitarize(u)
    assert np.max(np.abs(mc.special_unitarize(once) - once)) <= 1e-12
    assert mc.is_special_unitary(once)


def test_special_unitarize_rejects_non_unitary():
    with pytest.raises(mc.NotUnitaryError, match="exceeds"):
        mc.special_unitarize(np.diag([1.0, 2.0]))


def test_frobenius_cost_examples():
    u = mc.haar_random(3, 1)
    assert mc.frobenius_cost(u, u) == pytest.approx(0, abs=1e-12)
    assert mc.frobenius_cost(-u, u) == pytest.approx(16)
    assert mc.frobenius_cost(1j * u, u) == pytest.approx(8)


def test_frobenius_cost_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        mc.frobenius_cost(np.eye(2), np.eye(4))


def test_metrics_examples():
    u = mc.haar_random(2, 3)
    assert mc.metrics(u, u) == pytest.approx(mc.MetricReport(0, 0, 1))
    m = mc.metrics(-u, u)
    assert (m.frobenius_cost, m.hst_cost, m.frobenius_fidelity) == pytest.approx((8, 0, 1))


def test_metrics_orthogonal_trace():
    # Tr[V^dag U] = 0 for V = Z (x) I against U = I
    d = 4
    v = mc.kron(mc.Z, mc.I2)
    m = mc.metrics(v, np.eye(d))
    assert m.hst_cost == pytest.approx(1)
    # fidelity formula evaluated by hand at f = d
    assert m.frobenius_fidelity == pytest.approx(1 - d / (d + 1) + 0.0)
    assert m.frobenius_cost == pytest.approx(d)


def test_kron_identities():
    assert np.array_equal(mc.kron(mc.I2, mc.I2), np.eye(4))
    p0 = np.array([[1, 0], [0, 0]])
    p1 = np.array([[0, 0], [0, 1]])
    cx = mc.kron(p0, mc.I2) + mc.kron(p1, mc.X)
    assert np.array_equal(cx, mc.cnot_matrix(2, 1, 2))
    swap = mc.cnot_matrix(2, 1, 2) @ mc.cnot_matrix(2, 2, 1) @ mc.cnot_matrix(2, 1, 2)
    assert np.allclose(swap @ mc.kron(mc.X, mc.Z) @ swap, mc.kron(mc.Z, mc.X))
    assert not np.allclose(mc.kron(mc.X, mc.Z), mc.kron(mc.Z, mc.X))


def test_cnot_printed_matrices():
    cx12 = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]
    cx21 = [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]]
    assert np.array_equal(mc.cnot_matrix(2, 1, 2), cx12)
    assert np.array_equal(mc.cnot_matrix(2, 2, 1), cx21)


@pytest.mark.parametrize("j,k", [(1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)])
def test_cnot_three_qubits_is_special_permutation(j, k):
    m = mc.cnot_matrix(3, j, k)
    assert np.linalg.det(m) == pytest.approx(1)
    assert set(np.unique(m)) <= {0, 1}
    assert np.array_equal(m.sum(axis=0), np.ones(8))


@pytest.mark.parametrize("bad", [(0, 1), (1, 4), (2, 2)])
def test_cnot_rejects_bad_indices(bad):
    with pytest.raises(ValueError):
        mc.cnot_matrix(3, *bad)


def test_haar_unitary_and_deterministic():
    a = mc.haar_random(4, 99)
    assert mc.is_special_unitary(a)
    assert np.array_equal(a, mc.haar_random(4, 99))
    assert not np.array_equal(a, mc.haar_random(4, 100))


def test_haar_first_moment():
    rng = np.random.default_rng(0)
    vals = [abs(mc.haar_random(1, rng)[0, 0]) ** 2 for _ in range(10_000)]
    assert np.mean(vals) == pytest.approx(0.5, abs=0.02)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 2**31), st.integers(1, 3))
def test_frobenius_cost_invariances(s1, s2, n):
    u, v, w = mc.haar_random(n, s1), mc.haar_random(n, s2), mc.haar_random(n, s1 ^ s2)
    c = mc.frobenius_cost(v, u)
    assert mc.frobenius_cost(u, v) == pytest.approx(c)
    assert mc.frobenius_cost(w @ v, w @ u) == pytest.approx(c)
    assert 0 <= c <= 2 * 2**n + 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_hst_phase_invariance(seed, n):
    rng = np.random.default_rng(seed)
    u, v = mc.haar_random(n, rng), mc.haar_random(n, rng)
    base = mc.metrics(v, u)
    for alpha in rng.uniform(0, 2 * np.pi, 100):
        m = mc.metrics(np.exp(1j * alpha) * v, u)
        assert m.hst_cost == pytest.approx(base.hst_cost, abs=1e-12)
    # the Frobenius fidelity depends on Re Tr only through (d - f)^2,
    # so it survives V -> -V but not a general phase
    m = mc.metrics(-v, u)
    assert m.frobenius_fidelity == pytest.approx(base.frobenius_fidelity, abs=1e-12)


def test_frobenius_fidelity_not_phase_invariant():
    u = np.eye(4)
    assert mc.metrics(1j * u, u).frobenius_fidelity < mc.metrics(u, u).frobenius_fidelity


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_fidelity_minorizes_average_fidelity(seed, n):
    rng = np.random.default_rng(seed)
    u, v = mc.haar_random(n, rng), mc.haar_random(n, rng)
    d = 2**n
    m = mc.metrics(v, u)
    assert m.frobenius_fidelity <= 1 - d / (d + 1) * m.hst_cost + 1e-9
    assert m.frobenius_fidelity <= mc.average_fidelity(v, u) + 1e-9


def test_special_unitarize_preserves_hst():
    u, ref = mc.haar_random(2, 1) * 1j, mc.haar_random(2, 2)
    assert mc.metrics(mc.special_unitarize(u), ref).hst_cost == pytest.approx(
        mc.metrics(u, ref).hst_cost
    )


def test_align_phase_picks_root_of_unity():
    u = mc.haar_random(3, 4)
    v = u * np.exp(2j * np.pi * 3 / 8)
    w = mc.align_phase(u, v)
    assert np.allclose(w, v)
    assert mc.is_special_unitary(w)


def test_unitary_file_round_trip(tmp_path):
    u = mc.haar_random(3, 11)
    path = tmp_path / "u.txt"
    mc.write_unitary(path, u)
    assert np.array_equal(mc.read_unitary(path), u)


def test_unitary_file_rejects_out_of_order(tmp_path):
    path = tmp_path / "u.txt"
    path.write_text("n 1\n0 0 1 0\n1 0 0 0\n0 1 0 0\n1 1 1 0\n")
    with pytest.raises(ValueError, match="row-major"):
        mc.read_unitary(path)


def test_unitary_file_rejects_duplicate(tmp_path):
    path = tmp_path / "u.txt"
    path.write_text("n 1\n0 0 1 0\n0 0 1 0\n1 0 0 0\n1 1 1 0\n")
    with pytest.raises(ValueError, match="duplicate"):
        mc.read_unitary(path)


@pytest.mark.parametrize("rot", ["zyz", "xyx"])
def test_euler_angles_reconstruct(rot):
    rng = np.random.default_rng(3)
    for _ in range(50):
        u = mc.haar_random(1, rng)
        if rot == "zyz":
            a, b, c = mc.zyz_angles(u)
            w = mc.rz(a) @ mc.ry(b) @ mc.rz(c)
        else:
            a, b, c = mc.xyx_angles(u)
            w = mc.rx(a) @ mc.ry(b) @ mc.rx(c)
        assert mc.metrics(w, u).hst_cost < 1e-12
    for special in (np.eye(2), mc.X, mc.Z, mc.ry(np.pi)):
        a, b, c = mc.zyz_angles(special)
        assert mc.metrics(mc.rz(a) @ mc.ry(b) @ mc.rz(c), special).hst_cost < 1e-12


def test_class_metrics_ignores_root_of_unity():
    u = mc.haar_random(3, 6)
    v = u * np.exp(2j * np.pi / 8)
    assert mc.metrics(v, u).frobenius_fidelity < 0.6
    assert mc.class_metrics(v, u) == pytest.approx(mc.MetricReport(0, 0, 1), abs=1e-12)
