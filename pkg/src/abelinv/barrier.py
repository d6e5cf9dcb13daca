"""Log-barrier constraints, their proximity operators, and Jacobians.

Two constraint families are supported: a per-coordinate box
``x_min <= x_i <= x_max`` and a moment slab ``0 <= <w, x> <= 1`` with
nonnegative weights.  The hard constraints are relaxed to logarithmic
barriers, so the proximity operators keep every iterate strictly
interior.  Proxes are taken in the plain Euclidean metric of the mesh
basis; firm nonexpansiveness is metric-scale invariant, so the property
carries over to the h-weighted norm unchanged.

All scalar root equations here are strictly monotone on their bracket,
so a Newton iteration with a bisection safeguard cannot fail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ITER = 200


class ProxSolveError(RuntimeError):
    """The safeguarded Newton solve did not reach its residual tolerance."""


@dataclass(frozen=True)
class Box:
    """Pointwise bounds x_min < x_i < x_max."""

    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("box requires x_min < x_max")


@dataclass(frozen=True)
class MomentSlab:
    """Affine band 0 < <w, x> < 1 on the moment of order j.

    ``w_i = h * t_i^j`` discretizes the integral of t^j x(t).
    """

    j: int
    w: np.ndarray

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("moment order must be a positive integer")
        w = np.asarray(self.w, dtype=float)
        if np.any(w < 0) or not np.any(w > 0):
            raise ValueError("slab weights must be nonnegative and not all zero")
        object.__setattr__(self, "w", w)

    @classmethod
    def from_grid(cls, grid, j: int) -> "MomentSlab":
        return cls(j=j, w=grid.h * grid.nodes**j)


def barrier_value(x: np.ndarray, constraint) -> float:
    """Evaluate -sum(log c_i(x)), +inf outside the strict interior."""
    x = np.asarray(x, dtype=float)
    if isinstance(constraint, Box):
        lo = x - constraint.x_min
        hi = constraint.x_max - x
        if np.any(lo <= 0) or np.any(hi <= 0):
            return np.inf
        return float(-np.sum(np.log(lo)) - np.sum(np.log(hi)))
    if isinstance(constraint, MomentSlab):
        u = float(np.dot(constraint.w, x))
        if u <= 0.0 or u >= 1.0:
            return np.inf
        return float(-np.log(u) - np.log(1.0 - u))
    raise TypeError(f"unknown constraint {constraint!r}")


def _residual_tol(v: np.ndarray) -> np.ndarray:
    return 1e-12 * (1.0 + np.abs(v))


def prox_box(v: np.ndarray, gamma: float, x_min: float, x_max: float) -> np.ndarray:
    """Per-coordinate prox of the box barrier.

    Solves ``x - v = gamma * (1/(x - x_min) - 1/(x_max - x))`` on the open
    interval; the residual is monotone increasing in x, so the bracketed
    Newton iteration below always converges.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    v = np.asarray(v, dtype=float)
    width = x_max - x_min
    lo = np.full_like(v, x_min)
    hi = np.full_like(v, x_max)
    x = np.clip(v, x_min + 0.25 * width, x_max - 0.25 * width)
    tol = _residual_tol(v)
    eps = np.finfo(float).eps
    for _ in range(MAX_ITER):
        inv_lo = 1.0 / (x - x_min)
        inv_hi = 1.0 / (x_max - x)
        res = x - v - gamma * (inv_lo - inv_hi)
        # a collapsed bracket means the root is resolved to machine precision
        # even where the residual slope makes the literal tolerance unreachable
        stuck = (hi - lo) <= 4.0 * eps * (np.abs(lo) + np.abs(hi))
        if np.all((np.abs(res) <= tol) | stuck):
            return x
        lo = np.where(res < 0, x, lo)
        hi = np.where(res > 0, x, hi)
        slope = 1.0 + gamma * (inv_lo**2 + inv_hi**2)
        x_new = x - res / slope
        outside = (x_new <= lo) | (x_new >= hi)
        x = np.where(outside, 0.5 * (lo + hi), x_new)
    raise ProxSolveError("box prox did not converge")


def prox_slab(v: np.ndarray, gamma: float, w: np.ndarray) -> np.ndarray:
    """Prox of the slab barrier, reduced to a scalar equation along w.

    The output is ``x = v + alpha * w`` where ``u = <w, x>`` solves
    ``u = <w, v> + |w|^2 gamma (1/u - 1/(1-u))``.  The step is rebuilt as
    ``alpha = (u - <w, v>) / |w|^2`` rather than through the barrier
    gradient at u: the two agree at the root, but this form keeps
    ``<w, x>`` consistent with the solved u to rounding even when the
    root sits against a pole.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    w2 = float(np.dot(w, w))
    if w2 <= 0:
        raise ValueError("slab weights must have positive norm")
    q = float(np.dot(w, v))
    u = _solve_slab_u(q, gamma, w2)
    alpha = (u - q) / w2
    return v + alpha * w


def _solve_slab_u(q: float, gamma: float, w2: float) -> float:
    lo, hi = 0.0, 1.0
    u = min(max(q, 0.25), 0.75)
    tol = 1e-12 * (1.0 + abs(q))
    eps = np.finfo(float).eps
    for _ in range(MAX_ITER):
        res = u - q - w2 * gamma * (1.0 / u - 1.0 / (1.0 - u))
        if abs(res) <= tol or (hi - lo) <= 4.0 * eps * (abs(lo) + abs(hi)):
            return u
        if res < 0:
            lo = u
        else:
            hi = u
        slope = 1.0 + w2 * gamma * (1.0 / u**2 + 1.0 / (1.0 - u) ** 2)
        u_new = u - res / slope
        if u_new <= lo or u_new >= hi:
            u_new = 0.5 * (lo + hi)
        u = u_new
    raise ProxSolveError("slab prox did not converge")


def prox(v: np.ndarray, gamma: float, constraint) -> np.ndarray:
    if isinstance(constraint, Box):
        return prox_box(v, gamma, constraint.x_min, constraint.x_max)
    if isinstance(constraint, MomentSlab):
        return prox_slab(v, gamma, constraint.w)
    raise TypeError(f"unknown constraint {constraint!r}")


@dataclass
class ProxJacobian:
    """Derivative data of a solved prox, for reverse mode.

    Box proxes have a diagonal Jacobian ``diag``; slab proxes are
    ``I + rho * w w^T``.  ``dx_dgamma`` carries the sensitivity to the
    barrier weight, needed because gamma = lambda_n * mu_n is learned.
    """

    kind: str  # "box" | "slab"
    dx_dgamma: np.ndarray
    diag: np.ndarray | None = None
    w: np.ndarray | None = None
    rho: float = 0.0

    def apply(self, g: np.ndarray) -> np.ndarray:
        """J @ g; the Jacobian is symmetric so this is also J^T @ g."""
        if self.kind == "box":
            return self.diag * g
        return g + self.rho * self.w * np.dot(self.w, g)

    def matrix(self, n: int) -> np.ndarray:
        if self.kind == "box":
            return np.diag(self.diag)
        return np.eye(n) + self.rho * np.outer(self.w, self.w)


def prox_jacobian(v: np.ndarray, gamma: float, constraint, x: np.ndarray | None = None) -> ProxJacobian:
    """Implicit-differentiation Jacobian of the prox at (v, gamma).

    ``x`` may pass in an already-solved prox output to skip the solve.
    """
    v = np.asarray(v, dtype=float)
    if isinstance(constraint, Box):
        if x is None:
            x = prox_box(v, gamma, constraint.x_min, constraint.x_max)
        phi = 1.0 / (x - constraint.x_min) - 1.0 / (constraint.x_max - x)
        curself = 1.0 / (x - constraint.x_min) ** 2 + 1.0 / (constraint.x_max - x) ** 2
        diag = 1.0 / (1.0 + gamma * curself)
        return ProxJacobian(kind="box", diag=diag, dx_dgamma=phi * diag)
    if isinstance(constraint, MomentSlab):
        w = constraint.w
        w2 = float(np.dot(w, w))
        if x is None:
            x = prox_slab(v, gamma, w)
        u = float(np.dot(w, x))
        sigma = 1.0 / u - 1.0 / (1.0 - u)
        dsigma = -1.0 / u**2 - 1.0 / (1.0 - u) ** 2
        denom = 1.0 - gamma * dsigma * w2  # > 1 since dsigma < 0
        rho = gamma * dsigma / denom
        dx_dgamma = (sigma / denom) * w
        return ProxJacobian(kind="slab", w=w, rho=rho, dx_dgamma=dx_dgamma)
    raise TypeError(f"unknown constraint {constraint!r}")
