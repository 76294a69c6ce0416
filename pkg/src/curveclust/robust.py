"""Robust EM: entropy-penalized fitting that also estimates the number of clusters.

The fit starts with one component per curve. Each iteration the mixing
proportions get an entropy-penalty correction that favors already large
components; components whose proportion falls below ``1/n`` are discarded.
The penalty weight ``lambda`` adapts from iteration to iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._linalg import solve_normal_equations
from .basis import DesignSpec
from .dataset import Dataset, validate
from .em import FitError, _m_step_regression, e_step_with_loglik
from .mixture import (
    LOG_2PI,
    Designs,
    RegressionMixture,
    _log_pi,
    build_designs,
    entropy_penalty,
    log_density_matrix,
    residual_ss,
    variance_floor,
)
from .trace import FitTrace, TraceRecord

log = logging.getLogger(__name__)

__all__ = [
    "FitTrace",
    "RobustConfig",
    "RobustState",
    "fit_robust",
    "init_robust",
    "lambda_update",
    "prune",
    "robust_pi_update",
    "robust_step",
]


@dataclass(frozen=True)
class RobustConfig:
    """Settings for :func:`fit_robust`.

    ``lambda_init`` is the penalty weight used by the first proportion update.
    ``scale_by_max_pi`` multiplies the entropy denominator of the adaptive
    penalty weight by the largest current proportion (see :func:`lambda_update`).
    With ``settle`` the penalty is switched off once the coefficients have
    converged, or once K has not changed for ``settle_after`` iterations, and
    the fit continues as plain EM until the coefficients converge again.
    ``fixed_lambda`` and ``prune`` exist for diagnostics: they freeze the
    penalty weight and switch off component removal.
    """

    tol: float = 1e-6
    max_iter: int = 500
    seed: int = 0
    lambda_init: float = 1.0
    fixed_lambda: float | None = None
    prune: bool = True
    scale_by_max_pi: bool = True
    settle: bool = True
    settle_after: int = 60

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 <= self.lambda_init <= 1.0:
            raise ValueError("lambda_init must lie in [0, 1]")


@dataclass
class RobustState:
    model: RegressionMixture
    lam: float
    ids: np.ndarray  # original component ids (0-based curve index of the seeding curve)
    logdens: np.ndarray  # (n, K) log-densities of the current parameters


def _pi_log_pi(pi: np.ndarray) -> np.ndarray:
    out = np.zeros_like(pi)
    pos = pi > 0
    out[pos] = pi[pos] * np.log(pi[pos])
    return out


def robust_pi_update(tau, pi_old, lam: float, clamp: bool = True) -> np.ndarray:
    """Entropy-penalized proportion update.

    ``pi_k = mean_i tau_ik + lam * pi_k_old * (log pi_k_old - sum_h pi_h_old log pi_h_old)``.
    The correction terms sum to zero, so the result already sums to one. With
    ``clamp`` negative entries are set to zero and the vector is renormalized.
    """
    tau = np.asarray(tau, dtype=float)
    pi_old = np.asarray(pi_old, dtype=float)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    mean_log = _pi_log_pi(pi_old).sum()
    logp = _log_pi(pi_old)
    corr = np.where(pi_old > 0, pi_old * (logp - mean_log), 0.0)
    pi = tau.sum(axis=0) / tau.shape[0] + lam * corr
    if clamp and np.any(pi < 0):
        pi = np.maximum(pi, 0.0)
        pi /= pi.sum()
    return pi


def _eta(m: int) -> float:
    return min(1.0, 0.5 ** np.floor(m / 2.0 - 1.0))


def lambda_update(pi_new, pi_old, tau, n: int, m: int, scale_by_max_pi: bool = False) -> float:
    """Adaptive penalty weight, clipped to ``[0, 1]``.

    The first candidate is the mean of ``exp(-eta n |pi_new - pi_old|)`` with
    ``eta = min(1, 0.5**floor(m/2 - 1))``; it shrinks while proportions keep
    moving. The second is ``(1 - max_k mean_i tau_ik)`` over the entropy of
    ``pi_old``, or over the entropy times ``max_k pi_old_k`` when
    ``scale_by_max_pi`` is set (the form :func:`fit_robust` uses by default;
    it keeps the penalty strong enough to break up split clusters). A zero
    entropy gives ``0``.
    """
    pi_new = np.asarray(pi_new, dtype=float)
    pi_old = np.asarray(pi_old, dtype=float)
    tau = np.asarray(tau, dtype=float)
    H = -_pi_log_pi(pi_old).sum()
    if H <= 0:
        return 0.0
    first = float(np.mean(np.exp(-_eta(m) * n * np.abs(pi_new - pi_old))))
    if scale_by_max_pi:
        H *= np.max(pi_old)
    second = float((1.0 - np.max(tau.sum(axis=0) / n)) / H)
    return float(np.clip(min(first, second), 0.0, 1.0))


def prune(model: RegressionMixture, tau, n: int | None = None, logw=None):
    """Drop components with ``pi_k < 1/n`` and renormalize.

    Returns ``(model, tau, pruned)`` where ``pruned`` holds the removed
    0-based component indices. Responsibility rows are renormalized over the
    survivors; when the weighted log-densities ``logw`` behind ``tau`` are
    supplied the renormalization is done from them in log space, which stays
    exact for rows whose mass sat entirely on removed components.
    """
    tau = np.asarray(tau, dtype=float)
    if n is None:
        n = tau.shape[0]
    keep = model.pi >= 1.0 / n
    if not keep.any():
        raise FitError("mixture collapsed")
    pruned = np.nonzero(~keep)[0]
    pi = model.pi[keep]
    pi = pi / pi.sum()
    if logw is not None:
        lw = np.asarray(logw)[:, keep]
        tau_new = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
    else:
        tau_new = tau[:, keep]
        s = tau_new.sum(axis=1, keepdims=True)
        empty = s[:, 0] == 0
        tau_new[empty] = 1.0 / keep.sum()
        s[empty] = 1.0
        tau_new = tau_new / s
    tau_new /= tau_new.sum(axis=1, keepdims=True)
    new = RegressionMixture(pi, model.beta[keep], model.sigma2[keep])
    return new, tau_new, pruned


def init_robust(designs: Designs, floor: float | None = None, lambda_init: float = 1.0):
    """One component per curve.

    Component ``k`` gets the least-squares fit of curve ``k`` and, for every
    component, the variance is the median over curves ``i`` of
    ``||y_i - X_i beta_k||^2 / m_i``. Proportions start uniform; one E-step and
    one proportion update follow.

    Returns ``(model, tau)``.
    """
    if floor is None:
        floor = variance_floor(designs)
    n = designs.n
    beta, jittered = solve_normal_equations(designs.gram, designs.xty)
    if jittered.any():
        log.debug("ridge jitter on %d per-curve fits", int(jittered.sum()))
    rss = residual_ss(designs, beta)
    sigma2 = np.median(rss / designs.m[:, None], axis=0)
    sigma2 = np.maximum(sigma2, floor)
    model = RegressionMixture(np.full(n, 1.0 / n), beta, sigma2)
    tau, _ = e_step_with_loglik(model, designs)
    model.pi = robust_pi_update(tau, model.pi, lambda_init)
    return model, tau


def robust_step(state: RobustState, designs: Designs, floor: float, m_rep: int, do_prune: bool = True,
                fixed_lambda: float | None = None, scale_by_max_pi: bool = False):
    """One robust EM iteration.

    E-step, penalized proportion update, new penalty weight, pruning and the
    weighted least-squares update, in that order. Returns the new state plus
    ``(tau, pruned, max_beta_change, jittered, clamped)``.
    """
    n = designs.n
    model = state.model
    logw = _log_pi(model.pi)[None, :] + state.logdens
    lse = logsumexp(logw, axis=1, keepdims=True)
    tau = np.exp(logw - lse)
    tau /= tau.sum(axis=1, keepdims=True)

    lam = state.lam if fixed_lambda is None else fixed_lambda
    pi_new = robust_pi_update(tau, model.pi, lam)
    lam_new = lambda_update(pi_new, model.pi, tau, n, m_rep, scale_by_max_pi) if fixed_lambda is None else fixed_lambda

    proposal = RegressionMixture(pi_new, model.beta, model.sigma2)
    ids = state.ids
    pruned = np.array([], dtype=int)
    if do_prune:
        proposal, tau, pruned = prune(proposal, tau, n, logw=logw)
        keep = np.setdiff1d(np.arange(model.K), pruned)
        ids = ids[keep]
        old_beta = model.beta[keep]
    else:
        old_beta = model.beta

    beta, sigma2, rss, jittered, clamped = _m_step_regression(tau, designs, floor)
    change = float(np.max(np.linalg.norm(beta - old_beta, axis=1)))
    new_model = RegressionMixture(proposal.pi, beta, sigma2)
    logdens = -0.5 * designs.m[:, None] * (LOG_2PI + np.log(sigma2)[None, :]) - rss / (2.0 * sigma2[None, :])
    new_state = RobustState(new_model, lam_new, ids, logdens)
    return new_state, tau, state.ids[pruned], change, jittered, clamped


def _objective(state: RobustState, n: int):
    ll = float(np.sum(logsumexp(_log_pi(state.model.pi)[None, :] + state.logdens, axis=1)))
    return ll, ll - state.lam * entropy_penalty(state.model.pi, n)


def fit_robust(dataset: Dataset, spec: DesignSpec, config: RobustConfig | None = None):
    """Fit a regression mixture and its number of components at once.

    Returns ``(model, tau, trace)``. ``trace.records[0]`` describes the
    initial state (``K = n``); record ``q`` describes the parameters after
    iteration ``q``. Iteration stops when the largest coefficient change over
    surviving components drops below ``config.tol``; ``trace.converged`` is
    False when ``max_iter`` was hit first.
    """
    validate(dataset)
    designs = build_designs(dataset, spec)
    return fit_robust_designs(designs, config or RobustConfig())


def fit_robust_designs(designs: Designs, config: RobustConfig):
    n = designs.n
    floor = variance_floor(designs)
    m_rep = int(designs.m.min())
    model, _ = init_robust(designs, floor, config.lambda_init)
    lam0 = config.lambda_init if config.fixed_lambda is None else config.fixed_lambda
    state = RobustState(model, lam0, np.arange(n), log_density_matrix(model, designs))

    trace = FitTrace()
    ll, pen = _objective(state, n)
    trace.append(TraceRecord(0, model.K, ll, pen, state.lam, np.nan))
    fixed = config.fixed_lambda
    settling = False
    last_k_change = 0
    for q in range(1, config.max_iter + 1):
        state, _, pruned_ids, change, jit, clamped = robust_step(
            state, designs, floor, m_rep, config.prune, 0.0 if settling else fixed, config.scale_by_max_pi
        )
        if jit.any():
            trace.note(q, f"ridge jitter on {int(jit.sum())} components")
        if clamped.any():
            trace.note(q, f"variance clamped on components {list(state.ids[clamped])}")
        if len(pruned_ids):
            last_k_change = q
        ll, pen = _objective(state, n)
        trace.append(TraceRecord(q, state.model.K, ll, pen, state.lam, change, tuple(int(i) for i in pruned_ids)))
        trace.n_iter = q
        can_settle = config.settle and fixed is None and not settling
        stalled = q - last_k_change >= config.settle_after
        if change < config.tol and not can_settle:
            trace.converged = True
            break
        if can_settle and (change < config.tol or stalled):
            settling = True
            state.lam = 0.0
            trace.settle_iter = q
            trace.note(q, "penalty switched off")
    if not trace.converged:
        log.warning("robust EM did not converge in %d iterations", config.max_iter)
    tau, _ = e_step_with_loglik(state.model, designs, state.logdens)
    trace.ids = state.ids
    return state.model, tau, trace
