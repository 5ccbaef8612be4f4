"""Decentralized optimization steps behind one state-machine interface.

All methods keep a d-by-n column-per-agent state and advance it one
synchronous round at a time. The momentum-tracking method gossips both
the models and its tracker; the update order is load-bearing: models
move first, the oracle is then queried at the moved models, and the
fresh momentum difference feeds the tracker.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from . import oracle
from .errors import ContractViolationError
from .objective import GlobalObjective
from .oracle import OracleSpec
from .topology import MixingMatrix

BIASED_DMT = "biased_dmt"
DSGD = "dsgd"
DSGDM = "dsgdm"
GT_DSGD = "gt_dsgd"
ALGORITHMS = (BIASED_DMT, DSGD, DSGDM, GT_DSGD)


@dataclass
class AgentNetworkState:
    """Column-per-agent network state: models plus method-specific buffers.

    ``momentum`` and ``tracker`` drive the momentum-tracking method (the
    heavy-ball baseline reuses ``tracker`` as its velocity buffer, the
    gradient-tracking baseline as its tracker); ``grad_prev`` holds the
    previous round's sampled gradients for gradient tracking only.
    Buffers a method does not use stay zero.
    """

    models: np.ndarray
    momentum: np.ndarray
    tracker: np.ndarray
    grad_prev: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class AlgoConfig:
    """Algorithm choice plus its scalar knobs.

    ``momentum`` is the fresh-gradient weight in (0, 1] for the
    momentum-tracking method (1 disables averaging) and the heavy-ball
    coefficient in [0, 1) for the momentum baseline (0 disables it);
    the plain and gradient-tracking baselines ignore it.
    """

    algorithm: str
    step_size: float
    momentum: float = 1.0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ContractViolationError(f"unknown algorithm {self.algorithm!r}")
        if not self.step_size > 0:
            raise ContractViolationError(f"step_size must be positive, got {self.step_size}")
        if self.algorithm == BIASED_DMT and not 0.0 < self.momentum <= 1.0:
            raise ContractViolationError(
                f"momentum must lie in (0, 1] for {BIASED_DMT}, got {self.momentum}"
            )
        if self.algorithm == DSGDM and not 0.0 <= self.momentum < 1.0:
            raise ContractViolationError(
                f"momentum must lie in [0, 1) for {DSGDM}, got {self.momentum}"
            )


def sample_gradients(
    spec: OracleSpec,
    glob: GlobalObjective,
    X: np.ndarray,
    streams: list[np.random.Generator],
) -> np.ndarray:
    """One oracle draw per agent at that agent's column of X."""
    G = np.empty_like(X)
    for i, (obj, rng) in enumerate(zip(glob.locals, streams)):
        G[:, i] = oracle.sample(spec, obj, X[:, i], rng)
    return G


def init_state(
    cfg: AlgoConfig,
    glob: GlobalObjective,
    mix: MixingMatrix,
    spec: OracleSpec,
    x0: np.ndarray,
    streams: list[np.random.Generator],
) -> AgentNetworkState:
    """Start every agent at the same point, so initial disagreement is zero.

    Momentum-tracking seeds both its buffers with one shared oracle draw
    per agent; gradient tracking seeds its tracker and gradient memory
    the same way. The other methods start with zero buffers and query
    nothing.
    """
    n = glob.n_agents
    if mix.n != n:
        raise ContractViolationError(f"mixing matrix is {mix.n}x{mix.n}, network has {n} agents")
    if len(streams) != n:
        raise ContractViolationError(f"need {n} rng streams, got {len(streams)}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (glob.dim,):
        raise ContractViolationError(f"x0 has shape {x0.shape}, dimension is {glob.dim}")
    X = np.tile(x0[:, None], (1, n))
    zeros = np.zeros_like(X)
    if cfg.algorithm == BIASED_DMT:
        M = sample_gradients(spec, glob, X, streams)
        return AgentNetworkState(models=X, momentum=M, tracker=M.copy(), grad_prev=zeros)
    if cfg.algorithm == GT_DSGD:
        G = sample_gradients(spec, glob, X, streams)
        return AgentNetworkState(models=X, momentum=zeros, tracker=G.copy(), grad_prev=G)
    return AgentNetworkState(models=X, momentum=zeros, tracker=zeros.copy(), grad_prev=zeros.copy())


def step_biased_dmt(
    state: AgentNetworkState,
    cfg: AlgoConfig,
    glob: GlobalObjective,
    mix: MixingMatrix,
    spec: OracleSpec,
    streams: list[np.random.Generator],
) -> AgentNetworkState:
    """One momentum-tracking round.

    Gossip the models and descend along the tracker, query the oracle at
    the moved models, refresh the momentum, then gossip the tracker and
    add the momentum increment. The tracker's column mean stays equal to
    the momentum's column mean at every round by construction.
    """
    W = mix.weights
    lam = cfg.momentum
    X_next = state.models @ W - cfg.step_size * state.tracker
    G = sample_gradients(spec, glob, X_next, streams)
    M_next = (1.0 - lam) * state.momentum + lam * G
    V_next = state.tracker @ W + M_next - state.momentum
    return AgentNetworkState(
        models=X_next,
        momentum=M_next,
        tracker=V_next,
        grad_prev=state.grad_prev,
        t=state.t + 1,
    )


def step_dsgd(
    state: AgentNetworkState,
    cfg: AlgoConfig,
    glob: GlobalObjective,
    mix: MixingMatrix,
    spec: OracleSpec,
    streams: list[np.random.Generator],
) -> AgentNetworkState:
    """Plain decentralized SGD: gossip, then step along the local draw."""
    G = sample_gradients(spec, glob, state.models, streams)
    X_next = state.models @ mix.weights - cfg.step_size * G
    return AgentNetworkState(
        models=X_next,
        momentum=state.momentum,
        tracker=state.tracker,
        grad_prev=state.grad_prev,
        t=state.t + 1,
    )


def step_dsgdm(
    state: AgentNetworkState,
    cfg: AlgoConfig,
    glob: GlobalObjective,
    mix: MixingMatrix,
    spec: OracleSpec,
    streams: list[np.random.Generator],
) -> AgentNetworkState:
    """Heavy-ball baseline; the velocity buffer lives in the tracker slot."""
    G = sample_gradients(spec, glob, state.models, streams)
    U_next = cfg.momentum * state.tracker + G
    X_next = state.models @ mix.weights - cfg.step_size * U_next
    return AgentNetworkState(
        models=X_next,
        momentum=state.momentum,
        tracker=U_next,
        grad_prev=state.grad_prev,
        t=state.t + 1,
    )


def step_gt_dsgd(
    state: AgentNetworkState,
    cfg: AlgoConfig,
    glob: GlobalObjective,
    mix: MixingMatrix,
    spec: OracleSpec,
    streams: list[np.random.Generator],
) -> AgentNetworkState:
    """Gradient-tracking baseline: the gossiped tracker accumulates the
    difference of consecutive sampled gradients, so its column mean
    follows the network-average gradient exactly."""
    W = mix.weights
    X_next = state.models @ W - cfg.step_size * state.tracker
    G = sample_gradients(spec, glob, X_next, streams)
    Y_next = state.tracker @ W + G - state.grad_prev
    return AgentNetworkState(
        models=X_next,
        momentum=state.momentum,
        tracker=Y_next,
        grad_prev=G,
        t=state.t + 1,
    )


_STEPPERS = {
    BIASED_DMT: step_biased_dmt,
    DSGD: step_dsgd,
    DSGDM: step_dsgdm,
    GT_DSGD: step_gt_dsgd,
}


def stepper(cfg: AlgoConfig):
    return _STEPPERS[cfg.algorithm]


def parameter_guard(
    n: int,
    spectral_gap: float,
    momentum: float,
    step_size: float,
    lipschitz: float,
    relative_bias: float,
) -> list[dict]:
    """Check the schedule against the theory's topology-aware conditions.

    Each entry reports one condition (value, bound, pass/fail); callers
    log the report rather than hard-failing, since practical schedules
    routinely run past these conservative bounds.
    """
    momentum_bound = spectral_gap / (4.0 * sqrt(n))
    if lipschitz > 0:
        step_bound = min(
            1.0 / lipschitz,
            spectral_gap * momentum / (8.0 * lipschitz),
            momentum / (16.0 * lipschitz * (1.0 + relative_bias)),
        )
    else:
        step_bound = float("inf")
    checks = [
        {
            "name": "momentum_within_gap_bound",
            "value": momentum,
            "bound": momentum_bound,
            "ok": momentum <= momentum_bound,
        },
        {
            "name": "step_size_within_caps",
            "value": step_size,
            "bound": step_bound,
            "ok": step_size <= step_bound,
        },
        {
            "name": "relative_bias_small",
            "value": relative_bias,
            "bound": oracle.RELATIVE_BIAS_LIMIT,
            "ok": relative_bias <= oracle.RELATIVE_BIAS_LIMIT,
        },
    ]
    return checks
