"""Standard EM for regression mixtures with a fixed number of components."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._linalg import solve_normal_equations
from .basis import DesignSpec
from .dataset import Dataset, validate
from .mixture import (
    Designs,
    RegressionMixture,
    build_designs,
    log_density_matrix,
    residual_ss,
    variance_floor,
    _log_pi,
)
from .trace import FitTrace, TraceRecord

log = logging.getLogger(__name__)

EMPTY_COMPONENT = 1e-10
INITS = ("random_partition", "kmeans_partition")


class FitError(RuntimeError):
    """A fit could not produce a valid mixture (empty or collapsed components)."""


@dataclass(frozen=True)
class EmConfig:
    K: int
    max_iter: int = 1000
    tol: float = 1e-6
    n_restarts: int = 10
    init: str = "random_partition"
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1 or self.n_restarts < 1:
            raise ValueError("max_iter and n_restarts must be >= 1")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")


def rng_streams(seed: int, count: int) -> list:
    """Independent counter-based generators derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def e_step_with_loglik(model: RegressionMixture, designs: Designs, logdens: np.ndarray | None = None):
    """Responsibilities and observed-data log-likelihood from one pass."""
    if logdens is None:
        logdens = log_density_matrix(model, designs)
    logw = _log_pi(model.pi)[None, :] + logdens
    lse = logsumexp(logw, axis=1)
    tau = np.exp(logw - lse[:, None])
    tau /= tau.sum(axis=1, keepdims=True)
    return tau, float(np.sum(lse))


def e_step(model: RegressionMixture, designs: Designs) -> np.ndarray:
    """Posterior component probabilities, one simplex row per curve."""
    return e_step_with_loglik(model, designs)[0]


def m_step_proportions(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    return tau.sum(axis=0) / tau.shape[0]


def _m_step_regression(tau: np.ndarray, designs: Designs, floor: float):
    A = np.einsum("ik,ide->kde", tau, designs.gram)
    b = tau.T @ designs.xty
    beta, jittered = solve_normal_equations(A, b)
    rss = residual_ss(designs, beta)
    denom = tau.T @ designs.m.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma2 = np.einsum("ik,ik->k", tau, rss) / denom
    clamped = ~(sigma2 >= floor)
    sigma2 = np.where(clamped, floor, sigma2)
    return beta, sigma2, rss, jittered, clamped


def m_step_regression(tau, designs: Designs, floor: float | None = None):
    """Weighted least-squares update of every component.

    ``beta_k`` solves ``(sum_i tau_ik X_i'X_i) beta = sum_i tau_ik X_i'y_i``
    and ``sigma2_k`` is the responsibility-weighted residual sum of squares
    divided by ``sum_i tau_ik m_i``, clamped below at ``floor``.
    """
    tau = np.asarray(tau, dtype=float)
    if floor is None:
        floor = variance_floor(designs)
    beta, sigma2, *_ = _m_step_regression(tau, designs, floor)
    return beta, sigma2


def random_partition(n: int, K: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, K, size=n)


def kmeans_partition(designs: Designs, K: int, rng: np.random.Generator, n_iter: int = 10) -> np.ndarray:
    """Lloyd's k-means on the raw response vectors (shared grid only)."""
    if np.any(designs.m != designs.m[0]):
        raise ValueError("kmeans_partition needs curves sampled on a shared grid")
    Y = designs.Y
    n = Y.shape[0]
    centers = Y[rng.choice(n, size=K, replace=False)].copy()
    z = np.zeros(n, dtype=int)
    for _ in range(n_iter):
        dist = ((Y[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        z = np.argmin(dist, axis=1)
        for k in range(K):
            members = z == k
            if members.any():
                centers[k] = Y[members].mean(axis=0)
            else:
                far = int(np.argmax(dist[np.arange(n), z]))
                centers[k] = Y[far]
                z[far] = k
    return z


def init_from_partition(z: np.ndarray, K: int, designs: Designs, floor: float) -> RegressionMixture:
    """Fit one regression per cluster of a hard partition (labels ``0..K-1``)."""
    tau = np.zeros((designs.n, K))
    tau[np.arange(designs.n), z] = 1.0
    counts = tau.sum(axis=0)
    if np.any(counts == 0):
        raise FitError("initial partition has an empty cluster")
    beta, sigma2, *_ = _m_step_regression(tau, designs, floor)
    return RegressionMixture(counts / designs.n, beta, sigma2)


def run_em(designs: Designs, model: RegressionMixture, max_iter: int, tol: float, floor: float | None = None):
    """EM iterations from a given starting model.

    Returns ``(model, tau, trace)``. The log-likelihood recorded at iteration
    ``q`` is that of the parameters entering iteration ``q``; iterations stop
    once the increment drops below ``tol``.
    """
    if floor is None:
        floor = variance_floor(designs)
    model = model.copy()
    trace = FitTrace()
    prev_ll = -np.inf
    prev_beta = None
    for q in range(max_iter + 1):
        tau, ll = e_step_with_loglik(model, designs)
        change = np.nan if prev_beta is None else float(np.max(np.linalg.norm(model.beta - prev_beta, axis=1)))
        trace.append(TraceRecord(q, model.K, ll, ll, 0.0, change))
        trace.n_iter = q
        if ll - prev_ll < tol:
            trace.converged = True
            break
        if q == max_iter:
            break
        prev_ll = ll
        sizes = tau.sum(axis=0)
        if np.any(sizes < EMPTY_COMPONENT):
            raise FitError(f"iteration {q}: component {int(np.argmin(sizes)) + 1} became empty")
        prev_beta = model.beta
        beta, sigma2, _, jit, clamped = _m_step_regression(tau, designs, floor)
        if jit.any():
            trace.note(q, f"ridge jitter on components {list(np.nonzero(jit)[0] + 1)}")
        if clamped.any():
            trace.note(q, f"variance clamped on components {list(np.nonzero(clamped)[0] + 1)}")
        model = RegressionMixture(m_step_proportions(tau), beta, sigma2)
    return model, tau, trace


def fit_em(dataset: Dataset, spec: DesignSpec, config: EmConfig):
    """Best-of-restarts EM fit with a fixed number of components.

    Returns ``(model, tau, trace)`` for the restart reaching the highest final
    log-likelihood. Restarts that hit an empty component are skipped; if all
    fail, :class:`FitError` is raised.
    """
    validate(dataset)
    if config.K > dataset.n:
        raise ValueError(f"K={config.K} exceeds the number of curves n={dataset.n}")
    designs = build_designs(dataset, spec)
    return fit_em_designs(designs, config)


def fit_em_designs(designs: Designs, config: EmConfig):
    floor = variance_floor(designs)
    best = None
    failures = []
    for r, rng in enumerate(rng_streams(config.seed, config.n_restarts)):
        try:
            if config.init == "random_partition":
                z = random_partition(designs.n, config.K, rng)
            else:
                z = kmeans_partition(designs, config.K, rng)
            model0 = init_from_partition(z, config.K, designs, floor)
            model, tau, trace = run_em(designs, model0, config.max_iter, config.tol, floor)
        except FitError as exc:
            log.debug("restart %d failed: %s", r, exc)
            failures.append((r, str(exc)))
            continue
        final = trace.records[-1].loglik
        if best is None or final > best[2].records[-1].loglik:
            best = (model, tau, trace)
    if best is None:
        raise FitError(f"all {config.n_restarts} restarts failed: {failures[0][1]}")
    for r, msg in failures:
        best[2].note(-1, f"restart {r} failed: {msg}")
    return best
