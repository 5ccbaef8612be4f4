"""Local and global objective functions for the agent network.

Each agent holds a binary logistic loss over its local samples plus a
bounded nonconvex penalty; the network objective is the uniform average
of the local ones.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ContractViolationError


class RegularizedLogisticObjective:
    """Logistic loss over local samples with a bounded nonconvex penalty.

    loss(x) = (1/m) sum_j log(1 + exp(-y_j a_j.x))
              + alpha * sum_k x_k^2 / (1 + x_k^2)

    ``features`` may be a scipy sparse matrix (CSR preferred) or a dense
    ndarray; small dense blocks evaluate much faster. Labels are +/-1.
    """

    def __init__(self, features, labels, alpha: float = 0.0):
        if sp.issparse(features):
            features = features.tocsr()
        else:
            features = np.asarray(features, dtype=float)
            if features.ndim != 2:
                raise ContractViolationError("features must be a 2-d matrix")
        labels = np.asarray(labels, dtype=float)
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ContractViolationError(
                f"labels shape {labels.shape} does not match "
                f"{features.shape[0]} samples"
            )
        if labels.shape[0] == 0:
            raise ContractViolationError("objective needs at least one sample")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ContractViolationError("labels must be exactly -1 or +1")
        if not alpha >= 0:
            raise ContractViolationError(f"alpha must be nonnegative, got {alpha}")
        self.features = features
        self.labels = labels
        self.alpha = float(alpha)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ContractViolationError(
                f"point has shape {x.shape}, objective dimension is {self.dim}"
            )
        return x


class GlobalObjective:
    """Average of one local objective per agent, all over the same R^d."""

    def __init__(self, locals_: list[RegularizedLogisticObjective]):
        if len(locals_) == 0:
            raise ContractViolationError("need at least one local objective")
        dims = {obj.dim for obj in locals_}
        if len(dims) != 1:
            raise ContractViolationError(f"local dimensions disagree: {sorted(dims)}")
        self.locals = list(locals_)

    @property
    def n_agents(self) -> int:
        return len(self.locals)

    @property
    def dim(self) -> int:
        return self.locals[0].dim


def data_loss(features, labels, x: np.ndarray) -> float:
    """Mean stable softplus of the sample margins, log(1 + exp(-y a.x))."""
    z = labels * (features @ x)
    return float(np.mean(np.logaddexp(0.0, -z)))


def data_gradient(features, labels, x: np.ndarray) -> np.ndarray:
    """Gradient of ``data_loss``: -(1/m) A^T (y * sigma(-y A x))."""
    z = labels * (features @ x)
    w = labels * expit(-z)
    g = features.T @ w
    if sp.issparse(features):
        g = np.asarray(g).ravel()
    return -g / labels.shape[0]


def local_loss(obj: RegularizedLogisticObjective, x: np.ndarray) -> float:
    x = obj._check_point(x)
    xx = x * x
    penalty = obj.alpha * float(np.sum(xx / (1.0 + xx)))
    return data_loss(obj.features, obj.labels, x) + penalty


def local_gradient(obj: RegularizedLogisticObjective, x: np.ndarray) -> np.ndarray:
    x = obj._check_point(x)
    A = obj.features
    y = obj.labels
    z = y * (A @ x)
    w = y * expit(-z)
    g = A.T @ w
    if sp.issparse(A):
        g = np.asarray(g).ravel()
    g *= -1.0 / y.shape[0]
    if obj.alpha != 0.0:
        g += obj.alpha * 2.0 * x / (1.0 + x * x) ** 2
    return g


def global_loss_and_gradient(
    glob: GlobalObjective, x: np.ndarray
) -> tuple[float, np.ndarray]:
    """F(x) = (1/n) sum_i f_i(x) and its gradient."""
    loss = 0.0
    grad = np.zeros(glob.dim)
    for obj in glob.locals:
        loss += local_loss(obj, x)
        grad += local_gradient(obj, x)
    n = glob.n_agents
    return loss / n, grad / n


def curvature_upper_bound(obj: RegularizedLogisticObjective) -> float:
    """Analytic bound on the local gradient's Lipschitz constant.

    The logistic Hessian is (1/m) A^T D A with D diagonal in (0, 1/4], so
    its norm is at most lambda_max(A^T A) / (4m); the penalty's second
    derivative peaks at 2*alpha (at the origin).
    """
    A = obj.features
    gram = A.T @ A
    if sp.issparse(gram):
        gram = gram.toarray()
    lam_max = float(np.linalg.eigvalsh(gram)[-1]) if obj.dim > 0 else 0.0
    return 0.25 * lam_max / obj.n_samples + 2.0 * obj.alpha


def _ball_point(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    v = rng.standard_normal(dim)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return np.zeros(dim)
    r = radius * rng.random() ** (1.0 / dim)
    return v * (r / norm)


def estimate_smoothness(
    glob: GlobalObjective,
    probes: int,
    radius: float,
    rng: np.random.Generator,
) -> float:
    """Estimate a usable Lipschitz constant for the local gradients.

    Probes random pairs inside the ball of the given radius and takes the
    worst gradient-difference ratio across agents; the analytic curvature
    bound is folded in, and the larger of the two is returned.
    """
    if probes < 1:
        raise ContractViolationError(f"probes must be >= 1, got {probes}")
    if not radius > 0:
        raise ContractViolationError(f"radius must be positive, got {radius}")
    d = glob.dim
    best = max(curvature_upper_bound(obj) for obj in glob.locals)
    for _ in range(probes):
        x = _ball_point(rng, d, radius)
        y = _ball_point(rng, d, radius)
        # degenerate pairs would divide by zero; resample the second point
        while np.linalg.norm(x - y) < 1e-12:
            y = _ball_point(rng, d, radius)
        gap = np.linalg.norm(x - y)
        for obj in glob.locals:
            diff = np.linalg.norm(local_gradient(obj, x) - local_gradient(obj, y))
            ratio = diff / gap
            if ratio > best:
                best = ratio
    return best
