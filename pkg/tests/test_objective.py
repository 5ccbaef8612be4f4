import numpy as np
import pytest
import scipy.sparse as sp

from gossipopt.errors import ContractViolationError
from gossipopt.objective import (
    GlobalObjective,
    RegularizedLogisticObjective,
    estimate_smoothness,
    global_loss_and_gradient,
    local_gradient,
    local_loss,
)


def unit(d, k):
    e = np.zeros(d)
    e[k] = 1.0
    return e


def random_objective(rng, d, m, alpha):
    A = rng.standard_normal((m, d))
    y = rng.choice([-1.0, 1.0], size=m)
    return RegularizedLogisticObjective(A, y, alpha)


def fd_gradient(obj, x, h=1e-5):
    """Central finite differences of local_loss, the independent check."""
    g = np.zeros_like(x)
    for k in range(x.size):
        step = h * unit(x.size, k)
        g[k] = (local_loss(obj, x + step) - local_loss(obj, x - step)) / (2 * h)
    return g


def power_iteration_lambda_max(mat, iters=2000):
    """Dominant eigenvalue of a PSD matrix, written independently here."""
    v = np.ones(mat.shape[0]) / np.sqrt(mat.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = mat @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = float(v @ (mat @ v))
    return lam


def test_loss_single_sample_at_zero():
    obj = RegularizedLogisticObjective(np.array([[1.0]]), np.array([1.0]), alpha=0.0)
    assert local_loss(obj, np.zeros(1)) == pytest.approx(np.log(2.0), abs=1e-12)


def test_regularizer_contribution_at_unit_point():
    A = np.zeros((3, 2))  # data term is log 2 regardless of x
    y = np.array([1.0, -1.0, 1.0])
    with_reg = RegularizedLogisticObjective(A, y, alpha=0.01)
    without = RegularizedLogisticObjective(A, y, alpha=0.0)
    x = unit(2, 0)
    assert local_loss(with_reg, x) - local_loss(without, x) == pytest.approx(0.005, abs=1e-15)


def test_loss_symmetric_under_label_flip():
    A = np.vstack([unit(3, 0), unit(3, 0)])
    y = np.array([1.0, -1.0])
    obj = RegularizedLogisticObjective(A, y, alpha=0.0)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.standard_normal(3)
        flipped = x.copy()
        flipped[0] = -flipped[0]
        assert local_loss(obj, x) == pytest.approx(local_loss(obj, flipped), rel=1e-12)


def test_gradient_single_sample_at_zero():
    obj = RegularizedLogisticObjective(np.array([[1.0, 0.0]]), np.array([1.0]), alpha=0.0)
    g = local_gradient(obj, np.zeros(2))
    assert np.allclose(g, [-0.5, 0.0], atol=1e-15)


def test_regularizer_gradient_at_unit_point():
    obj = RegularizedLogisticObjective(np.zeros((2, 2)), np.array([1.0, -1.0]), alpha=0.01)
    g = local_gradient(obj, unit(2, 0))
    # data term vanishes coordinate-wise for zero features (gradient only
    # from the penalty): d/dx [x^2/(1+x^2)] = 2x/(1+x^2)^2 = 1/2 at x=1
    assert g[0] == pytest.approx(0.01 * 0.5, abs=1e-15)
    assert g[1] == 0.0


@pytest.mark.parametrize("alpha", [0.0, 0.01])
def test_gradient_matches_finite_differences(alpha):
    rng = np.random.default_rng(11)
    for _ in range(10):
        d = int(rng.integers(2, 11))
        m = int(rng.integers(1, 21))
        obj = random_objective(rng, d, m, alpha)
        x = rng.standard_normal(d)
        g = local_gradient(obj, x)
        g_fd = fd_gradient(obj, x)
        assert np.linalg.norm(g - g_fd) <= 1e-5 * max(np.linalg.norm(g_fd), 1e-8)


def test_loss_nonnegative():
    rng = np.random.default_rng(5)
    for _ in range(20):
        obj = random_objective(rng, 4, 6, alpha=0.01)
        assert local_loss(obj, 10.0 * rng.standard_normal(4)) >= 0.0


def test_sparse_and_dense_features_agree():
    rng = np.random.default_rng(9)
    A = rng.standard_normal((6, 4))
    A[A < 0.4] = 0.0
    y = rng.choice([-1.0, 1.0], size=6)
    dense = RegularizedLogisticObjective(A, y, alpha=0.01)
    sparse = RegularizedLogisticObjective(sp.csr_matrix(A), y, alpha=0.01)
    x = rng.standard_normal(4)
    assert local_loss(dense, x) == pytest.approx(local_loss(sparse, x), rel=1e-14)
    assert np.allclose(local_gradient(dense, x), local_gradient(sparse, x), atol=1e-14)


def test_global_single_agent_equals_local():
    rng = np.random.default_rng(2)
    obj = random_objective(rng, 4, 5, alpha=0.01)
    glob = GlobalObjective([obj])
    x = rng.standard_normal(4)
    loss, grad = global_loss_and_gradient(glob, x)
    assert loss == pytest.approx(local_loss(obj, x), rel=1e-14)
    assert np.allclose(grad, local_gradient(obj, x), atol=1e-14)


def test_global_identical_locals_equals_either():
    rng = np.random.default_rng(4)
    obj = random_objective(rng, 3, 4, alpha=0.0)
    glob = GlobalObjective([obj, obj])
    x = rng.standard_normal(3)
    loss, grad = global_loss_and_gradient(glob, x)
    assert loss == pytest.approx(local_loss(obj, x), rel=1e-12)
    assert np.allclose(grad, local_gradient(obj, x), atol=1e-12)


def test_global_matches_summation_oracle():
    rng = np.random.default_rng(7)
    locals_ = [random_objective(rng, 5, 6, alpha=0.01) for _ in range(3)]
    glob = GlobalObjective(locals_)
    x = rng.standard_normal(5)
    loss, grad = global_loss_and_gradient(glob, x)
    expected_loss = sum(local_loss(o, x) for o in locals_) / 3
    expected_grad = sum(local_gradient(o, x) for o in locals_) / 3
    assert loss == pytest.approx(expected_loss, abs=1e-12)
    assert np.allclose(grad, expected_grad, atol=1e-12)


def test_smoothness_estimate_bounded_by_hessian_bound():
    rng = np.random.default_rng(13)
    locals_ = []
    bound = 0.0
    for _ in range(3):
        A = rng.standard_normal((8, 5))
        y = rng.choice([-1.0, 1.0], size=8)
        locals_.append(RegularizedLogisticObjective(A, y, alpha=0.0))
        bound = max(bound, 0.25 * power_iteration_lambda_max(A.T @ A) / 8)
    glob = GlobalObjective(locals_)
    estimate = estimate_smoothness(glob, probes=40, radius=2.0, rng=np.random.default_rng(1))
    assert 0.0 < estimate <= bound + 1e-8


def test_smoothness_zero_dataset_is_zero():
    obj = RegularizedLogisticObjective(np.zeros((4, 3)), np.ones(4), alpha=0.0)
    glob = GlobalObjective([obj])
    est = estimate_smoothness(glob, probes=3, radius=1.0, rng=np.random.default_rng(0))
    assert est == 0.0


class _ReplayRNG:
    """Replays queued draws so the first probe pair is exactly degenerate."""

    def __init__(self, normals, uniforms):
        self.normals = list(normals)
        self.uniforms = list(uniforms)

    def standard_normal(self, size):
        return np.array(self.normals.pop(0), dtype=float)

    def random(self):
        return self.uniforms.pop(0)


def test_smoothness_degenerate_pair_resampled():
    obj = RegularizedLogisticObjective(np.eye(2), np.array([1.0, -1.0]), alpha=0.0)
    glob = GlobalObjective([obj])
    same = [1.0, 0.0]
    rng = _ReplayRNG(normals=[same, same, [0.0, 1.0]], uniforms=[0.5, 0.5, 0.25])
    est = estimate_smoothness(glob, probes=1, radius=1.0, rng=rng)
    assert np.isfinite(est) and est >= 0.0


def test_contract_violations():
    with pytest.raises(ContractViolationError):
        RegularizedLogisticObjective(np.eye(2), np.array([1.0, 2.0]))  # bad label
    with pytest.raises(ContractViolationError):
        RegularizedLogisticObjective(np.eye(2), np.array([1.0, -1.0]), alpha=-0.1)
    with pytest.raises(ContractViolationError):
        RegularizedLogisticObjective(np.eye(2), np.array([1.0]))  # length mismatch
    obj = RegularizedLogisticObjective(np.eye(2), np.array([1.0, -1.0]))
    with pytest.raises(ContractViolationError):
        local_loss(obj, np.zeros(3))
    with pytest.raises(ContractViolationError):
        local_gradient(obj, np.zeros(5))
    with pytest.raises(ContractViolationError):
        GlobalObjective([])
    with pytest.raises(ContractViolationError):
        estimate_smoothness(GlobalObjective([obj]), probes=0, radius=1.0, rng=np.random.default_rng(0))
