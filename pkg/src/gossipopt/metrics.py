"""Per-iteration error quantities computed with exact gradients.

Whatever noise or bias the algorithm sees, the tracked quantities are
defined through the true local and global gradients, so they are
computed here from scratch at every evaluation point.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import ContractViolationError, MetricsError
from .objective import GlobalObjective, local_gradient, local_loss


@dataclass
class IterationRecord:
    """One evaluation of the tracked error quantities.

    ``consensus_err`` and ``tracking_err`` are squared Frobenius
    deviations of the models and the tracker from their column means;
    ``avg_mom_err`` compares the column sums of the true gradients and
    the momentum, ``mom_est_err`` the full matrices.
    """

    t: int
    loss: float
    grad_norm_sq: float
    consensus_err: float
    tracking_err: float
    avg_mom_err: float
    mom_est_err: float
    heterogeneity_at_mean: float


def record(state, glob: GlobalObjective) -> IterationRecord:
    """Evaluate every tracked quantity on a network-state snapshot."""
    X = state.models
    V = state.tracker
    M = state.momentum
    n = glob.n_agents
    xbar = X.mean(axis=1)
    loss = 0.0
    grads_at_mean = np.empty_like(X)
    local_grads = np.empty_like(X)
    for i, obj in enumerate(glob.locals):
        loss += local_loss(obj, xbar)
        grads_at_mean[:, i] = local_gradient(obj, xbar)
        local_grads[:, i] = local_gradient(obj, X[:, i])
    grad = grads_at_mean.mean(axis=1)
    het_dev = grads_at_mean - grad[:, None]
    x_dev = X - xbar[:, None]
    v_dev = V - V.mean(axis=1, keepdims=True)
    avg_diff = local_grads.sum(axis=1) - M.sum(axis=1)
    mom_diff = M - local_grads
    return IterationRecord(
        t=state.t,
        loss=loss / n,
        grad_norm_sq=float(grad @ grad),
        consensus_err=float(np.sum(x_dev * x_dev)),
        tracking_err=float(np.sum(v_dev * v_dev)),
        avg_mom_err=float(avg_diff @ avg_diff),
        mom_est_err=float(np.sum(mom_diff * mom_diff)),
        heterogeneity_at_mean=float(np.sum(het_dev * het_dev)) / n,
    )


_VALUE_FIELDS = tuple(f.name for f in fields(IterationRecord) if f.name != "t")


def ensure_finite(rec: IterationRecord) -> None:
    """Abort the run on NaN or infinity, naming the offending fields."""
    bad = [name for name in _VALUE_FIELDS if not np.isfinite(getattr(rec, name))]
    if bad:
        values = ", ".join(f"{name}={getattr(rec, name)}" for name in bad)
        raise MetricsError(f"non-finite metrics at iteration {rec.t}: {values}")


def running_average_grad_norm(records: list[IterationRecord]) -> float:
    """Mean squared gradient norm over the recorded iterations."""
    if not records:
        raise ContractViolationError("need at least one record")
    return float(np.mean([r.grad_norm_sq for r in records]))
