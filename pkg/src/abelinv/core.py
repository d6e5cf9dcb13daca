"""Discrete Abel operator, spectral basis, and forward-data synthesis.

Mesh vectors ("elt") hold samples on the uniform N-point grid over [0, 1];
spectral vectors ("eigen") hold the first K coefficients in the discrete
eigenbasis of T*T.  Inner products on mesh vectors are h-weighted,
``<x, y> = h * sum_i x_i y_i``, so that discrete norms track L2(0, 1)
norms.  With a uniform weight the adjoint of the operator matrix is its
plain transpose.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

FORMAT_VERSION = 1


class BasisError(ValueError):
    """A vector was supplied in the wrong basis or with the wrong length."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform mesh t_i = i*h on [0, 1], h = 1/(n-1)."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid needs at least 2 nodes, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)


@dataclass
class Signal:
    """Coefficient vector tagged with the basis it lives in."""

    coeffs: np.ndarray
    basis: str  # "elt" or "eigen"

    def __post_init__(self):
        if self.basis not in ("elt", "eigen"):
            raise BasisError(f"unknown basis tag {self.basis!r}")
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 1:
            raise BasisError("signal coefficients must be one-dimensional")


@dataclass
class AbelSystem:
    """Discretized fractional-integration operator and its spectral data.

    ``beta_t`` holds the analytic eigenvalues of T*T,
    ``(4 / (pi^2 (1+2k)^2))^a``; ``beta_t_numeric`` the eigenvalues of the
    assembled matrix.  Certification and the network consume the analytic
    values by default, the numeric ones are kept for diagnostics and for
    the spectral baselines.  ``beta_d = beta_t^(-r/a)`` are the eigenvalues
    of the order-r regularizer D*D.  ``basis_v`` columns are orthonormal in
    the h-weighted inner product.
    """

    a: float
    r: float
    grid: GridSpec
    k: int
    telt: np.ndarray
    basis_v: np.ndarray
    beta_t: np.ndarray
    beta_t_numeric: np.ndarray
    beta_d: np.ndarray

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    def hash(self) -> str:
        """Stable identifier of the system, used to tag checkpoints."""
        m = hashlib.sha256()
        m.update(f"{self.a!r}|{self.r!r}|{self.n}|{self.k}|".encode())
        m.update(np.ascontiguousarray(self.beta_t).tobytes())
        return m.hexdigest()[:16]


def norm_h(v: np.ndarray, h: float) -> float:
    """Discrete L2(0,1) norm, sqrt(h * sum v_i^2)."""
    return float(np.sqrt(h) * np.linalg.norm(v))


def dot_h(u: np.ndarray, v: np.ndarray, h: float) -> float:
    return float(h * np.dot(u, v))


def build_telt(a: float, grid: GridSpec) -> np.ndarray:
    """Assemble the N x N trapezoidal discretization of the Abel operator.

    Entry (i, j) is ``h^a / (2 a Gamma(a))`` times
    ``(i-j+1)^a - (i-j-1)^a`` for 0 < j < i, ``i^a - (i-1)^a`` for j = 0
    and i > 0, ``1`` on the diagonal for i > 0, and zero elsewhere
    (row 0 is identically zero).
    """
    if a <= 0:
        raise ValueError(f"ill-posedness order must be positive, got {a}")
    n = grid.n
    h = grid.h
    i = np.arange(n)[:, None].astype(float)
    j = np.arange(n)[None, :].astype(float)
    d = i - j

    telt = np.zeros((n, n))
    inner = (j > 0) & (j < i)
    dm = np.where(inner, d, 2.0)  # dummy >= 1 keeps fractional powers real
    telt = np.where(inner, (dm + 1.0) ** a - (dm - 1.0) ** a, telt)
    first = (j == 0) & (i > 0)
    im = np.where(first, i, 1.0)
    telt = np.where(first, im**a - (im - 1.0) ** a, telt)
    telt = np.where((j == i) & (i > 0), 1.0, telt)
    return telt * (h**a / (2.0 * a) / gamma_fn(a))


def analytic_beta_t(a: float, k: int) -> np.ndarray:
    ks = np.arange(k)
    return (4.0 / (np.pi**2 * (1.0 + 2.0 * ks) ** 2)) ** a


def build_basis(a: float, r: float, grid: GridSpec, k: int, telt: np.ndarray | None = None):
    """Eigendecompose the discrete T*T and return its leading basis.

    Returns ``(basis_v, beta_numeric, beta_analytic, beta_d)`` where
    ``basis_v`` is N x K with columns orthonormal under the h-weighted
    product and signed so that the largest-magnitude entry is positive.
    """
    if k > grid.n:
        raise ValueError(f"requested {k} eigenvectors from an {grid.n}-point grid")
    if telt is None:
        telt = build_telt(a, grid)
    m = telt.T @ telt
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    w = w[::-1][:k].copy()
    v = v[:, ::-1][:, :k].copy()
    if np.any(w <= 0):
        raise ValueError("non-positive eigenvalue among the leading modes; grid too coarse")
    # unit h-weighted norm, deterministic sign
    v /= np.sqrt(grid.h)
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(k)])
    v *= signs
    beta_analytic = analytic_beta_t(a, k)
    beta_d = beta_analytic ** (-r / a)
    return v, w, beta_analytic, beta_d


def build_system(a: float = 1.0, n: int = 2000, k: int = 50, r: float = 1.0) -> AbelSystem:
    grid = GridSpec(n)
    telt = build_telt(a, grid)
    basis_v, beta_num, beta_ana, beta_d = build_basis(a, r, grid, k, telt=telt)
    return AbelSystem(
        a=a,
        r=r,
        grid=grid,
        k=k,
        telt=telt,
        basis_v=basis_v,
        beta_t=beta_ana,
        beta_t_numeric=beta_num,
        beta_d=beta_d,
    )


def _coeffs(x, basis: str, size: int, what: str) -> np.ndarray:
    if isinstance(x, Signal):
        if x.basis != basis:
            raise BasisError(f"{what} expects a {basis!r} signal, got {x.basis!r}")
        arr = x.coeffs
    else:
        arr = np.asarray(x, dtype=float)
    if arr.shape != (size,):
        raise BasisError(f"{what} expects length {size}, got shape {arr.shape}")
    return arr


def to_eigen(x, system: AbelSystem):
    """Project a mesh vector onto the K leading eigenvectors."""
    arr = _coeffs(x, "elt", system.n, "to_eigen")
    out = system.h * (system.basis_v.T @ arr)
    if isinstance(x, Signal):
        return Signal(out, "eigen")
    return out


def to_elt(c, system: AbelSystem):
    """Reconstruct a mesh vector from eigenbasis coefficients."""
    arr = _coeffs(c, "eigen", system.k, "to_elt")
    out = system.basis_v @ arr
    if isinstance(c, Signal):
        return Signal(out, "elt")
    return out


def make_noisy_data(x, system: AbelSystem, noise_frac: float, seed: int):
    """Forward signal through T and add rescaled white Gaussian noise.

    The noise draw is rescaled so that the realized discrete L2 level
    ``||y_noisy - y_clean||`` equals ``noise_frac * ||y_clean||`` exactly;
    the returned ``delta`` is that value.  Deterministic given ``seed``.
    """
    if noise_frac < 0:
        raise ValueError("noise_frac must be nonnegative")
    arr = _coeffs(x, "elt", system.n, "make_noisy_data")
    y_clean = system.telt @ arr
    if noise_frac == 0.0:
        return y_clean, y_clean.copy(), 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(system.n)
    v_norm = norm_h(v, system.h)
    target = noise_frac * norm_h(y_clean, system.h)
    if v_norm == 0.0 or target == 0.0:
        return y_clean, y_clean.copy(), 0.0
    y_noisy = y_clean + v * (target / v_norm)
    return y_clean, y_noisy, target


def bias_from_data(y, system: AbelSystem):
    """Back-project data through the h-weighted adjoint, b0 = P T^adj y."""
    arr = _coeffs(y, "elt", system.n, "bias_from_data")
    out = system.h * (system.basis_v.T @ (system.telt.T @ arr))
    if isinstance(y, Signal):
        return Signal(out, "eigen")
    return out


def save_system(path, system: AbelSystem) -> None:
    """Serialize the system (without the dense operator, which is rebuilt)."""
    np.savez(
        path,
        format_version=np.int64(FORMAT_VERSION),
        a=system.a,
        r=system.r,
        n=np.int64(system.n),
        k=np.int64(system.k),
        beta_t=system.beta_t,
        beta_t_numeric=system.beta_t_numeric,
        beta_d=system.beta_d,
        basis_v=np.ascontiguousarray(system.basis_v),
    )


def load_system(path) -> AbelSystem:
    with np.load(path) as f:
        version = int(f["format_version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported system format version {version}")
        a = float(f["a"])
        r = float(f["r"])
        grid = GridSpec(int(f["n"]))
        return AbelSystem(
            a=a,
            r=r,
            grid=grid,
            k=int(f["k"]),
            telt=build_telt(a, grid),
            basis_v=f["basis_v"],
            beta_t=f["beta_t"],
            beta_t_numeric=f["beta_t_numeric"],
            beta_d=f["beta_d"],
        )
