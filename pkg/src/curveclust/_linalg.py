from __future__ import annotations

import numpy as np

COND_LIMIT = 1e12
JITTER = 1e-8


def solve_normal_equations(A: np.ndarray, b: np.ndarray):
    """Solve a stack of symmetric systems ``A[k] @ beta[k] = b[k]``.

    Each system is equilibrated by its diagonal before solving. When the
    equilibrated condition number exceeds ``COND_LIMIT`` (or the matrix is
    singular) ``JITTER * trace / d`` is added to the diagonal.

    Returns ``(beta, jittered)`` where ``jittered`` flags the ridged systems.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    single = A.ndim == 2
    if single:
        A, b = A[None], b[None]
    K, d, _ = A.shape
    A = A.copy()
    diag = np.einsum("kii->ki", A)
    jittered = np.zeros(K, dtype=bool)

    scale = np.where(diag > 0, diag, 1.0) ** -0.5
    As = A * scale[:, :, None] * scale[:, None, :]
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(As)
    bad = ~np.isfinite(cond) | (cond > COND_LIMIT) | np.any(diag <= 0, axis=1)
    if np.any(bad):
        tr = np.trace(A[bad], axis1=1, axis2=2)
        ridge = np.where(tr > 0, JITTER * tr / d, JITTER)
        idx = np.nonzero(bad)[0]
        A[idx, np.arange(d)[:, None], np.arange(d)[:, None]] += ridge[None, :]
        jittered[idx] = True
        diag = np.einsum("kii->ki", A)
        scale = np.where(diag > 0, diag, 1.0) ** -0.5
        As = A * scale[:, :, None] * scale[:, None, :]

    bs = b * scale
    beta = np.linalg.solve(As, bs[..., None])[..., 0] * scale
    if single:
        return beta[0], bool(jittered[0])
    return beta, jittered
