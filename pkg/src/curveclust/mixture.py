"""Regression mixture parameters, log-densities and the (penalized) log-likelihood.

Everything is kept in log space; probabilities only appear as normalized
responsibility rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .basis import DesignSpec, design_matrix
from .dataset import Dataset

LOG_2PI = np.log(2.0 * np.pi)
VARIANCE_FLOOR_FACTOR = 1e-8
# elements per residual block in log_density_matrix
_BLOCK = 1 << 22


@dataclass(frozen=True)
class Designs:
    """Per-curve design matrices, zero-padded to a common length.

    Padding rows are zero in both ``X`` and ``Y`` so they contribute nothing
    to Gram matrices, cross products or residuals; ``m`` keeps the true
    curve lengths.
    """

    X: np.ndarray  # (n, m_max, d)
    Y: np.ndarray  # (n, m_max)
    m: np.ndarray  # (n,)
    gram: np.ndarray = field(init=False, repr=False)  # (n, d, d)
    xty: np.ndarray = field(init=False, repr=False)  # (n, d)

    def __post_init__(self):
        object.__setattr__(self, "gram", np.einsum("imd,ime->ide", self.X, self.X))
        object.__setattr__(self, "xty", np.einsum("imd,im->id", self.X, self.Y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[2]

    def subset(self, idx) -> "Designs":
        idx = np.asarray(idx)
        return Designs(self.X[idx], self.Y[idx], self.m[idx])


def build_designs(dataset: Dataset, spec: DesignSpec) -> Designs:
    m = dataset.lengths
    n, m_max, d = dataset.n, int(m.max()), spec.dim
    X = np.zeros((n, m_max, d))
    Y = np.zeros((n, m_max))
    if dataset.shared_grid:
        X[:] = design_matrix(dataset.curves[0].x, spec)
        Y[:] = dataset.response_matrix()
    else:
        for i, c in enumerate(dataset.curves):
            X[i, : c.m] = design_matrix(c.x, spec)
            Y[i, : c.m] = c.y
    return Designs(X, Y, m)


def variance_floor(designs: Designs) -> float:
    """Lower bound on component variances: a tiny fraction of the pooled response variance."""
    mask = np.arange(designs.Y.shape[1])[None, :] < designs.m[:, None]
    var = float(np.var(designs.Y[mask]))
    return VARIANCE_FLOOR_FACTOR * var if var > 0 else VARIANCE_FLOOR_FACTOR


@dataclass
class RegressionMixture:
    """Mixing proportions ``pi`` (K,), coefficients ``beta`` (K, d) and noise variances ``sigma2`` (K,)."""

    pi: np.ndarray
    beta: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float).ravel()
        self.beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        self.sigma2 = np.asarray(self.sigma2, dtype=float).ravel()
        K = self.pi.size
        if self.beta.shape[0] != K or self.sigma2.size != K:
            raise ValueError("pi, beta and sigma2 must describe the same number of components")

    @property
    def K(self) -> int:
        return self.pi.size

    @property
    def d(self) -> int:
        return self.beta.shape[1]

    def copy(self) -> "RegressionMixture":
        return RegressionMixture(self.pi.copy(), self.beta.copy(), self.sigma2.copy())

    def check(self, atol: float = 1e-10) -> None:
        if np.any(self.pi < 0) or abs(self.pi.sum() - 1.0) > atol:
            raise ValueError("mixing proportions are not on the simplex")
        if np.any(self.sigma2 <= 0):
            raise ValueError("variances must be positive")

    def permuted(self, perm) -> "RegressionMixture":
        perm = np.asarray(perm)
        return RegressionMixture(self.pi[perm], self.beta[perm], self.sigma2[perm])

    def mean_curves(self, X: np.ndarray) -> np.ndarray:
        """Component mean functions on a design ``X`` (m, d), shape ``(K, m)``."""
        return self.beta @ X.T

    def save(self, path) -> None:
        """Write ``K d`` then one ``pi sigma2 beta_0 ... beta_{d-1}`` line per component."""
        with open(path, "w") as fh:
            fh.write(f"{self.K} {self.d}\n")
            for k in range(self.K):
                vals = [self.pi[k], self.sigma2[k], *self.beta[k]]
                fh.write(" ".join(f"{v:.17g}" for v in vals) + "\n")

    @classmethod
    def load(cls, path) -> "RegressionMixture":
        with open(path) as fh:
            lines = [ln.split() for ln in fh if ln.strip()]
        K, d = int(lines[0][0]), int(lines[0][1])
        rows = np.array([[float(v) for v in ln] for ln in lines[1:]])
        if rows.shape != (K, d + 2):
            raise ValueError(f"model file: expected {K} rows of {d + 2} values, got shape {rows.shape}")
        return cls(rows[:, 0], rows[:, 2:], rows[:, 1])


def log_component_density(y, X, beta_k, sigma2_k) -> float:
    """Log of the spherical Gaussian density N(y; X beta_k, sigma2_k I)."""
    y = np.asarray(y, dtype=float)
    r = y - np.asarray(X) @ np.asarray(beta_k)
    m = y.size
    return float(-0.5 * m * (LOG_2PI + np.log(sigma2_k)) - (r @ r) / (2.0 * sigma2_k))


def residual_ss(designs: Designs, beta: np.ndarray) -> np.ndarray:
    """Squared residual norms ``||y_i - X_i beta_k||^2`` as an ``(n, K)`` matrix."""
    n, m_max, _ = designs.X.shape
    K = beta.shape[0]
    out = np.empty((n, K))
    step = max(1, _BLOCK // max(1, K * m_max))
    for s in range(0, n, step):
        Xb = designs.X[s : s + step]
        pred = np.einsum("imd,kd->ikm", Xb, beta)
        r = designs.Y[s : s + step, None, :] - pred
        out[s : s + step] = np.einsum("ikm,ikm->ik", r, r)
    return out


def log_density_matrix(model: RegressionMixture, designs: Designs) -> np.ndarray:
    """``(n, K)`` matrix of ``log N(y_i; X_i beta_k, sigma2_k I)``."""
    rss = residual_ss(designs, model.beta)
    m = designs.m[:, None]
    return -0.5 * m * (LOG_2PI + np.log(model.sigma2)[None, :]) - rss / (2.0 * model.sigma2[None, :])


def _log_pi(pi: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(pi)


def weighted_log_density(model: RegressionMixture, designs: Designs) -> np.ndarray:
    return _log_pi(model.pi)[None, :] + log_density_matrix(model, designs)


def loglik(model: RegressionMixture, designs: Designs) -> float:
    """Observed-data log-likelihood, summed over curves in index order."""
    return float(np.sum(logsumexp(weighted_log_density(model, designs), axis=1)))


def entropy_penalty(pi, n: int) -> float:
    """``-n * sum_k pi_k log pi_k`` with ``0 log 0 = 0``."""
    pi = np.asarray(pi, dtype=float)
    nz = pi[pi > 0]
    return float(-n * np.sum(nz * np.log(nz)))


def penalized_loglik(model: RegressionMixture, designs: Designs, lam: float, ll: float | None = None) -> float:
    """Log-likelihood minus ``lam`` times the label entropy.

    ``ll`` may be passed to reuse an already computed log-likelihood.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if ll is None:
        ll = loglik(model, designs)
    return ll - lam * entropy_penalty(model.pi, designs.n)


def map_partition(tau) -> np.ndarray:
    """Hard labels ``1..K`` by maximum responsibility; ties go to the lowest index."""
    tau = np.asarray(tau)
    return np.argmax(tau, axis=1) + 1
