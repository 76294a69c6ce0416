"""Clustering evaluation: matched misclassification rate, Rand index, mean-curve error."""

from __future__ import annotations

import functools
import itertools
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

# label sets up to this size are matched by exhaustive permutation search
EXACT_MATCH_MAX_K = 8


def confusion(z_hat, z_true):
    """Contingency table plus the sorted label values of each argument."""
    z_hat = np.asarray(z_hat)
    z_true = np.asarray(z_true)
    if z_hat.shape != z_true.shape:
        raise ValueError("partitions must have equal length")
    a, ia = np.unique(z_hat, return_inverse=True)
    b, ib = np.unique(z_true, return_inverse=True)
    C = np.zeros((a.size, b.size), dtype=int)
    np.add.at(C, (ia, ib), 1)
    return C, a, b


@functools.lru_cache(maxsize=None)
def _permutations(size: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(size))), dtype=np.intp).reshape(-1, size)


def match_labels(z_hat, z_true, exact_max_k: int = EXACT_MATCH_MAX_K) -> dict:
    """Mapping ``estimated label -> true label`` maximizing agreement.

    Labels left over when the two label sets differ in size are not mapped.
    """
    C, a, b = confusion(z_hat, z_true)
    size = max(C.shape)
    S = np.zeros((size, size), dtype=int)
    S[: C.shape[0], : C.shape[1]] = C
    if size <= exact_max_k:
        perms = _permutations(size)
        rows = np.arange(size)
        agree = S[rows[None, :], perms].sum(axis=1)
        pairs = zip(rows, perms[int(np.argmax(agree))])
    else:
        r, c = linear_sum_assignment(-S)
        pairs = zip(r, c)
    return {a[i].item(): b[j].item() for i, j in pairs if i < a.size and j < b.size}


def misclassification_error(z_hat, z_true, exact_max_k: int = EXACT_MATCH_MAX_K) -> float:
    """Smallest mismatch fraction over one-to-one label mappings."""
    z_hat = np.asarray(z_hat)
    z_true = np.asarray(z_true)
    mapping = match_labels(z_hat, z_true, exact_max_k)
    mapped = np.array([mapping.get(v.item(), None) for v in z_hat], dtype=object)
    agree = sum(1 for u, v in zip(mapped, z_true) if u is not None and u == v.item())
    return 1.0 - agree / z_true.size


def rand_index(z_hat, z_true) -> float:
    """Fraction of curve pairs on which the two partitions agree."""
    C, _, _ = confusion(z_hat, z_true)
    n = int(C.sum())
    if n < 2:
        raise ValueError("rand index needs at least two items")
    pairs = n * (n - 1) / 2.0
    comb = lambda v: (v * (v - 1) / 2.0).sum()
    both = comb(C)
    same_hat = comb(C.sum(axis=1))
    same_true = comb(C.sum(axis=0))
    # pairs together in both + pairs apart in both
    return float((pairs + 2 * both - same_hat - same_true) / pairs)


def approx_error_terms(est_means, true_means, matching: dict | None = None):
    """Per-cluster squared errors ``||mu_hat - mu||^2`` of matched mean curves.

    ``est_means`` is ``(K_hat, m)``, ``true_means`` ``(K_true, m)``. ``matching``
    maps 0-based estimated rows to 0-based true rows; by default the assignment
    with the smallest total squared error is used. Returns
    ``(errors, true_rows, complete)`` with ``complete`` False when some true
    cluster had no estimated partner.
    """
    est = np.atleast_2d(np.asarray(est_means, dtype=float))
    true = np.atleast_2d(np.asarray(true_means, dtype=float))
    if matching is None:
        cost = ((est[:, None, :] - true[None, :, :]) ** 2).sum(axis=2)
        r, c = linear_sum_assignment(cost)
        matching = dict(zip(r.tolist(), c.tolist()))
    pairs = sorted(matching.items(), key=lambda kv: kv[1])
    errors = np.array([((est[i] - true[j]) ** 2).sum() for i, j in pairs])
    rows = np.array([j for _, j in pairs], dtype=int)
    complete = len(set(rows.tolist())) == true.shape[0]
    return errors, rows, complete


def approx_error(est_means, true_means, matching: dict | None = None) -> float:
    """``sum_k ||mu_hat_k - mu_k||^2 / sum_k ||mu_k||^2`` over matched clusters."""
    true = np.atleast_2d(np.asarray(true_means, dtype=float))
    errors, rows, _ = approx_error_terms(est_means, true, matching)
    if rows.size == 0:
        return float("nan")
    return float(errors.sum() / (true[rows] ** 2).sum())


@dataclass
class EvalReport:
    k_estimated: int
    rand_index: float
    k_true: int | None = None
    misclassification_rate: float | None = None
    approx_error: float | None = None
    approx_error_per_cluster: tuple | None = None
    approx_complete: bool | None = None

    def to_text(self) -> str:
        lines = []
        for key, val in asdict(self).items():
            if val is None:
                continue
            if isinstance(val, tuple):
                val = ";".join(f"{v:.12g}" for v in val)
            elif isinstance(val, float):
                val = f"{val:.12g}"
            lines.append(f"{key}={val}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EvalReport":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        out = {}
        for key, val in kv.items():
            if key in ("k_estimated", "k_true"):
                out[key] = int(val)
            elif key == "approx_error_per_cluster":
                out[key] = tuple(float(v) for v in val.split(";") if v)
            elif key == "approx_complete":
                out[key] = val == "True"
            else:
                out[key] = float(val)
        return cls(**out)


def evaluate(z_hat, z_true=None, est_means=None, true_means=None) -> EvalReport:
    """Assemble an :class:`EvalReport`; mean curves are matched through the label matching."""
    z_hat = np.asarray(z_hat)
    k_est = int(np.unique(z_hat).size) if est_means is None else int(np.atleast_2d(est_means).shape[0])
    if z_true is None:
        return EvalReport(k_estimated=k_est, rand_index=float("nan"))
    z_true = np.asarray(z_true)
    rep = EvalReport(
        k_estimated=k_est,
        rand_index=rand_index(z_hat, z_true),
        k_true=int(np.unique(z_true).size),
        misclassification_rate=misclassification_error(z_hat, z_true),
    )
    if est_means is not None and true_means is not None:
        mapping = match_labels(z_hat, z_true)
        # labels are 1-based component / class indices
        matching = {int(h) - 1: int(t) - 1 for h, t in mapping.items()}
        errors, _, complete = approx_error_terms(est_means, true_means, matching)
        rep.approx_error = approx_error(est_means, true_means, matching)
        rep.approx_error_per_cluster = tuple(float(e) for e in errors)
        rep.approx_complete = complete
    return rep
