"""Regression design matrices: polynomial, truncated-power spline and B-spline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("polynomial", "spline", "bspline")


@dataclass(frozen=True)
class DesignSpec:
    """Basis family plus its degree/order and knots.

    For ``polynomial`` only ``degree`` matters. For the two spline families
    ``order`` is ``M = degree + 1``, ``interior_knots`` holds the L interior
    knots and ``boundary`` the pair ``(xi_0, xi_{L+1})``.
    """

    family: str
    degree: int
    interior_knots: tuple = field(default=())
    boundary: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        knots = tuple(float(k) for k in self.interior_knots)
        object.__setattr__(self, "interior_knots", knots)
        if self.family == "polynomial":
            if knots:
                raise ValueError("polynomial designs take no knots")
            return
        if self.boundary is None:
            raise ValueError(f"{self.family} designs need boundary knots")
        lo, hi = (float(b) for b in self.boundary)
        object.__setattr__(self, "boundary", (lo, hi))
        seq = np.array((lo,) + knots + (hi,))
        if np.any(np.diff(seq) <= 0):
            raise ValueError("knots must satisfy xi_0 < xi_1 < ... < xi_L < xi_{L+1}")

    @property
    def order(self) -> int:
        return self.degree + 1

    @property
    def n_knots(self) -> int:
        return len(self.interior_knots)

    @property
    def dim(self) -> int:
        if self.family == "polynomial":
            return self.degree + 1
        return self.n_knots + self.order

    @classmethod
    def polynomial(cls, degree: int) -> "DesignSpec":
        return cls("polynomial", degree)

    @classmethod
    def equispaced(cls, family: str, order: int, n_knots: int, x_min: float, x_max: float) -> "DesignSpec":
        """Spline spec of order ``order`` with ``n_knots`` interior knots evenly spread over the range."""
        if order < 1:
            raise ValueError("order must be >= 1")
        return cls(family, order - 1, tuple(equispaced_knots(x_min, x_max, n_knots)), (x_min, x_max))

    def to_dict(self) -> dict:
        """Flat ``key=value`` form; the keys double as ``curveclust fit`` config keys."""
        if self.family == "polynomial":
            return {"basis": "poly", "degree": self.degree}
        return {
            "basis": self.family,
            "order": self.order,
            "knot_positions": ";".join(repr(k) for k in self.interior_knots),
            "boundary": ";".join(repr(b) for b in self.boundary),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpec":
        family = {"poly": "polynomial"}.get(d["basis"], d["basis"])
        if family == "polynomial":
            return cls(family, int(d["degree"]))
        knots = parse_float_list(d.get("knot_positions", ""))
        return cls(family, int(d["order"]) - 1, knots, parse_float_list(d["boundary"]))


def parse_float_list(text) -> tuple:
    return tuple(float(v) for v in str(text).replace(",", ";").split(";") if v.strip())


def equispaced_knots(x_min: float, x_max: float, L: int) -> np.ndarray:
    if L < 0:
        raise ValueError("number of knots must be >= 0")
    if not x_min < x_max:
        raise ValueError("x_min must be < x_max")
    ell = np.arange(1, L + 1)
    return x_min + ell * (x_max - x_min) / (L + 1)


def polynomial_design(x, p: int) -> np.ndarray:
    """Vandermonde matrix with rows ``(1, x, ..., x**p)``."""
    if p < 0:
        raise ValueError("degree must be >= 0")
    x = np.asarray(x, dtype=float).ravel()
    return np.vander(x, p + 1, increasing=True)


def _truncated_power(u: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return (u >= 0).astype(float)
    return np.where(u > 0, u, 0.0) ** p


def spline_design(x, spec: DesignSpec) -> np.ndarray:
    """Truncated-power spline basis: polynomial columns then ``(x - xi_l)_+^p`` per knot."""
    if spec.family != "spline":
        raise ValueError("spline_design needs a 'spline' spec")
    x = np.asarray(x, dtype=float).ravel()
    knots = np.asarray(spec.interior_knots)
    poly = polynomial_design(x, spec.degree)
    if knots.size == 0:
        return poly
    trunc = _truncated_power(x[:, None] - knots[None, :], spec.degree)
    return np.hstack([poly, trunc])


def augment_knots(spec: DesignSpec) -> np.ndarray:
    """Augmented knot sequence with the boundary knots repeated ``M`` times."""
    if spec.family != "bspline":
        raise ValueError("augment_knots needs a 'bspline' spec")
    lo, hi = spec.boundary
    M = spec.order
    return np.concatenate([np.full(M, lo), np.asarray(spec.interior_knots, dtype=float), np.full(M, hi)])


def _safe_ratio(num: np.ndarray, den: float) -> np.ndarray:
    # 0/0 (repeated knots) resolves to 0
    if den == 0.0:
        return np.zeros_like(num)
    return num / den


def bspline_design(x, spec: DesignSpec) -> np.ndarray:
    """B-spline basis of order M by the Cox-de Boor recursion.

    Returns an ``(m, L + M)`` matrix. The last non-degenerate order-1 interval
    is closed on the right so that ``x = xi_{L+1}`` is covered.
    """
    zeta = augment_knots(spec)
    M = spec.order
    lo, hi = spec.boundary
    x = np.asarray(x, dtype=float).ravel()
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError(f"abscissae outside the boundary knots [{lo}, {hi}]")

    n_int = zeta.size - 1
    B = np.zeros((x.size, n_int))
    for l in range(n_int):
        B[:, l] = (x >= zeta[l]) & (x < zeta[l + 1])
    last = np.nonzero(zeta[1:] > zeta[:-1])[0][-1]
    B[x == zeta[last + 1], last] = 1.0

    for order in range(2, M + 1):
        n_fun = zeta.size - order
        nxt = np.empty((x.size, n_fun))
        for l in range(n_fun):
            left = _safe_ratio(x - zeta[l], zeta[l + order - 1] - zeta[l])
            right = _safe_ratio(zeta[l + order] - x, zeta[l + order] - zeta[l + 1])
            nxt[:, l] = left * B[:, l] + right * B[:, l + 1]
        B = nxt
    return B


def design_matrix(x, spec: DesignSpec) -> np.ndarray:
    if spec.family == "polynomial":
        return polynomial_design(x, spec.degree)
    if spec.family == "spline":
        return spline_design(x, spec)
    return bspline_design(x, spec)
