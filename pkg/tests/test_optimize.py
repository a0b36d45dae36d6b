import numpy as np
import pytest

from aqc import matrixcore as mc
from aqc import optimize as O
from aqc import structures as S
from aqc.circuit import Structure, assemble, group_slice
from aqc.gradient import cost, smoothness_bound


def test_config_validation():
    with pytest.raises(ValueError):
        O.OptimizerConfig(method="adam")
    with pytest.raises(ValueError):
        O.OptimizerConfig(step=-1)
    with pytest.raises(ValueError):
        O.OptimizerConfig(max_iters=0)
    with pytest.raises(ValueError):
        O.OptimizerConfig(lam=-0.1)
    assert O.OptimizerConfig(step="0.5").step == 0.5
    assert O.OptimizerConfig().as_dict()["method"] == "nesterov"


@pytest.mark.parametrize("method", ["gd", "nesterov"])
def test_start_at_solution(method, rng):
    s = S.sequ(3, 4)
    theta0 = rng.uniform(0, 2 * np.pi, s.num_params)
    u = assemble(s, theta0)
    res = O.optimize(s, u, O.OptimizerConfig(method=method), theta0)
    assert res.iterations == 0
    assert res.converged
    assert res.final_cost <= 1e-12


@pytest.mark.parametrize("method", ["gd", "nesterov"])
@pytest.mark.parametrize("seed", range(5))
def test_single_qubit_rotation(method, seed):
    res = O.optimize(Structure(1), mc.ry(1.0), O.OptimizerConfig(method=method, seed=seed))
    assert res.converged
    assert res.final_cost <= 1e-10


def test_gd_descent_with_safe_step(rng):
    for i in range(20):
        n = 2 + i % 2
        s = S.sequ(n, 3)
        u = mc.haar_random(n, rng)
        cfg = O.OptimizerConfig(
            method="gd", step=1 / smoothness_bound(n, 3), max_iters=40, seed=i,
            record_history=True,
        )
        hist = O.gd(s, u, cfg).history
        assert np.all(np.diff(hist) <= 1e-12)


def test_prox_objective_monotone_with_safe_step():
    s = S.cart(3)
    u = mc.haar_random(3, 8)
    cfg = O.OptimizerConfig(
        method="prox", lam=0.05, step=1 / smoothness_bound(3, len(s)), max_iters=200,
        record_history=True,
    )
    hist = O.prox_group_lasso(s, u, cfg).history
    assert np.all(np.diff(hist) <= 1e-12)


def test_nesterov_beats_gd_on_iterations():
    wins = 0
    for seed in range(6):
        s = S.sequ(3, 4)
        u = mc.haar_random(3, 50 + seed)
        a = O.gd(s, u, O.OptimizerConfig(method="gd", seed=seed, max_iters=5000))
        b = O.nesterov(s, u, O.OptimizerConfig(seed=seed, max_iters=5000))
        wins += b.iterations <= a.iterations
    assert wins >= 5


def test_nesterov_reaches_surjective_fit():
    # four units keep det V = +1; with an odd count the phase-sensitive
    # Frobenius cost cannot reach zero against an SU(4) target
    s = S.sequ(2, 4)
    hits = 0
    for seed in range(5):
        u = mc.haar_random(2, 300 + seed)
        res = O.nesterov(s, u, O.OptimizerConfig(seed=seed))
        hits += mc.metrics(assemble(s, res.theta), u).frobenius_fidelity >= 0.999
    assert hits >= 4


def test_result_angles_wrapped_and_consistent():
    s = S.sequ(2, 3)
    u = mc.haar_random(2, 1)
    res = O.nesterov(s, u, O.OptimizerConfig(seed=2, max_iters=500))
    assert np.all((res.theta >= 0) & (res.theta < O.PERIOD))
    assert cost(s, res.theta, u) == pytest.approx(res.final_cost, abs=1e-9)


def test_determinism():
    s = S.sequ(3, 6)
    u = mc.haar_random(3, 2)
    a = O.nesterov(s, u, O.OptimizerConfig(seed=4, max_iters=300))
    b = O.nesterov(s, u, O.OptimizerConfig(seed=4, max_iters=300))
    assert np.array_equal(a.theta, b.theta)
    assert a.final_cost == b.final_cost


def test_prox_lambda_zero_equals_gd():
    s = S.sequ(3, 5)
    u = mc.haar_random(3, 3)
    kw = dict(seed=1, max_iters=50, tol=1e-30)
    a = O.gd(s, u, O.OptimizerConfig(method="gd", **kw))
    b = O.prox_group_lasso(s, u, O.OptimizerConfig(method="prox", lam=0.0, **kw))
    assert np.array_equal(a.theta, b.theta)
    assert b.zero_groups == ()


def test_block_soft_threshold():
    groups = np.array([[3.0, 4.0, 0, 0], [0.1, 0, 0, 0.1]])
    out = O.block_soft_threshold(groups, 1.0)
    assert np.allclose(out[0], [2.4, 3.2, 0, 0])
    assert np.array_equal(out[1], np.zeros(4))


def test_prox_kills_small_group():
    s = Structure(2, ((1, 2),))
    theta0 = np.zeros(s.num_params)
    theta0[group_slice(2, 1)] = 1e-4
    u = assemble(s, np.zeros(s.num_params))
    cfg = O.OptimizerConfig(method="prox", lam=1.0, step=0.01, max_iters=1)
    res = O.prox_group_lasso(s, u, cfg, theta0)
    assert res.zero_groups == (1,)


def test_canonicalize_preserves_matrix(rng):
    s = S.sequ(3, 5)
    theta = rng.uniform(-20, 20, s.num_params)
    c = O.canonicalize(s, theta)
    assert np.all(np.abs(c[9:]) <= np.pi + 1e-12)
    assert np.allclose(assemble(s, c), assemble(s, theta), atol=1e-12)


def test_zero_groups_grow_with_lambda():
    s = S.cart(3)
    u = mc.haar_random(3, 21)
    counts = []
    for lam in (1e-4, 1e-3, 1e-2, 1e-1):
        cfg = O.OptimizerConfig(method="prox", lam=lam, max_iters=3000, seed=0)
        counts.append(len(O.prox_group_lasso(s, u, cfg).zero_groups))
    inversions = sum(b < a for a, b in zip(counts, counts[1:]))
    assert inversions <= 1
    assert counts[-1] > counts[0]


def test_eigenphase_spread():
    u = mc.haar_random(2, 0)
    assert O.eigenphase_spread(np.exp(0.3j) * u, u) <= 1e-12
    v = np.diag([1, np.exp(0.2j)])
    assert O.eigenphase_spread(v, np.eye(2)) == pytest.approx(0.1)


def test_auto_step_not_below_safe_step():
    s = S.sequ(3, 6)
    u = mc.haar_random(3, 0)
    theta = O.random_angles(s, 0)
    assert O.auto_step(s, theta, u) >= 1 / smoothness_bound(3, 6)
