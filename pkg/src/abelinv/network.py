"""The unrolled forward-backward network.

Each layer performs one gradient step on the quadratic data-fidelity +
derivative-regularization objective, diagonally in the operator
eigenbasis, followed by a barrier prox taken in the mesh basis (with a
basis change on either side).  The per-layer step size, regularization
weight and barrier weight are learned scalars squashed through Softplus;
the regularization weight additionally carries a data-driven factor
estimated from the spectral tail of the bias b0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from abelinv.barrier import Box, MomentSlab, ProxJacobian, prox, prox_jacobian
from abelinv.certification import LayerSpectra
from abelinv.core import AbelSystem, to_eigen, to_elt

CHECKPOINT_VERSION = 1


class DegenerateDataError(ValueError):
    """The low band of b0 vanishes, so the noise level cannot be estimated."""


def softplus(x, beta: float = 1.0):
    """Overflow-safe (1/beta) * log(1 + exp(beta x))."""
    if beta <= 0:
        raise ValueError("softplus beta must be positive")
    z = beta * np.asarray(x, dtype=float)
    out = np.where(z > 0, z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    out = out / beta
    return float(out) if np.isscalar(x) else out


def softplus_prime(x, beta: float = 1.0):
    """d/dx softplus = sigmoid(beta x)."""
    z = beta * np.asarray(x, dtype=float)
    ez = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return float(out) if np.isscalar(x) else out


def softplus_inv(y, beta: float = 1.0):
    """x with softplus(x, beta) = y, for y > 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("softplus is positive; cannot invert nonpositive values")
    z = beta * y
    # log(expm1(z)) without overflow: for large z this is z + log1p(-exp(-z))
    out = np.where(
        z > 30.0,
        z + np.log1p(-np.exp(-np.clip(z, 1e-12, 700.0))),
        np.log(np.expm1(np.minimum(z, 30.0))),
    )
    out = out / beta
    return float(out) if out.ndim == 0 else out


@dataclass
class NetConfig:
    """Structural configuration of the unrolled network."""

    m: int = 10
    a: float = 1.0
    r: float = 1.0
    q: float = 2.0
    f_max: int = 25
    constraint: object = field(default_factory=lambda: Box(0.0, 1.0))  # None disables the barrier (test hook)
    eta: np.ndarray | None = None
    softplus_beta: float = 1.0
    init: str = "bias"  # "bias" (x0 = b0) or "zero"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one layer")
        if self.init not in ("bias", "zero"):
            raise ValueError(f"unknown init mode {self.init!r}")
        if self.eta is None:
            self.eta = np.ones(self.m)
        self.eta = np.asarray(self.eta, dtype=float)
        if self.eta.shape != (self.m,):
            raise ValueError("eta needs one factor per layer")
        if np.any(self.eta <= 0):
            raise ValueError("leakage factors must be positive")


@dataclass
class NetParams:
    """Raw learnables; lambda/tau/mu are softplus images of c/d/e."""

    c: np.ndarray
    d: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.d = np.asarray(self.d, dtype=float)
        self.e = np.asarray(self.e, dtype=float)
        if not (self.c.shape == self.d.shape == self.e.shape) or self.c.ndim != 1:
            raise ValueError("c, d, e must be equal-length vectors")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.d)) and np.all(np.isfinite(self.e))):
            raise ValueError("raw parameters must be finite")

    def copy(self) -> "NetParams":
        return NetParams(self.c.copy(), self.d.copy(), self.e.copy())


@dataclass
class LayerRecord:
    """Everything one reverse-mode sweep needs from one layer."""

    x_prev: np.ndarray
    beta: np.ndarray
    pre: np.ndarray
    x_out: np.ndarray
    lam: float
    tau: float
    mu: float
    gamma: float
    eta_prod: float
    jac: ProxJacobian | None


@dataclass
class Trace:
    x0: np.ndarray
    b0: np.ndarray
    rho: float
    layers: list
    x_out: np.ndarray


def noise_ratio_factor(b0: np.ndarray, cfg: NetConfig, system: AbelSystem) -> float:
    """Data factor of the regularization weight, (|hi| / |lo|_q)^(2(a+r)/(a+q)).

    ``hi`` is the spectral tail of b0 beyond f_max (taken as noise), ``lo``
    the retained band measured in a Sobolev-type weighted norm with weights
    ``beta_d^(q / 2r)``.  A zero tail gives 0; a zero band with a nonzero
    tail leaves the level undefined.
    """
    b0 = np.asarray(b0, dtype=float)
    if not 0 < cfg.f_max < system.k:
        raise ValueError("f_max must split the retained band, 0 < f_max < K")
    lo = b0[: cfg.f_max]
    hi = b0[cfg.f_max :]
    hi_norm = float(np.linalg.norm(hi))
    if hi_norm == 0.0:
        return 0.0
    weights = system.beta_d[: cfg.f_max] ** (cfg.q / (2.0 * cfg.r))
    lo_norm = float(np.sqrt(np.sum(weights * lo**2)))
    if lo_norm == 0.0:
        raise DegenerateDataError("degenerate data for noise estimation")
    expo = 2.0 * (cfg.a + cfg.r) / (cfg.a + cfg.q)
    return (hi_norm / lo_norm) ** expo


def step_size(c_n: float, softplus_beta: float = 1.0) -> float:
    return float(softplus(c_n, softplus_beta))


def reg_param(d_n: float, b0: np.ndarray, cfg: NetConfig, system: AbelSystem) -> float:
    return float(softplus(d_n, cfg.softplus_beta)) * noise_ratio_factor(b0, cfg, system)


def barrier_param(e_n: float, softplus_beta: float = 1.0) -> float:
    return float(softplus(e_n, softplus_beta))


def hyper_parameters(params: NetParams, cfg: NetConfig, system: AbelSystem,
                     b0: np.ndarray | None = None, tau_override: np.ndarray | None = None):
    """Per-layer (lam, tau, mu, rho) from raw parameters and data."""
    lam = softplus(params.c, cfg.softplus_beta)
    mu = softplus(params.e, cfg.softplus_beta)
    if tau_override is not None:
        tau = np.asarray(tau_override, dtype=float)
        if tau.shape != (cfg.m,):
            raise ValueError("tau override needs one value per layer")
        rho = np.nan
    else:
        if b0 is None:
            raise ValueError("need b0 to derive the regularization weights")
        rho = noise_ratio_factor(b0, cfg, system)
        tau = softplus(params.d, cfg.softplus_beta) * rho
    return lam, tau, mu, rho


def forward_layer(x_prev: np.ndarray, b0: np.ndarray, lam: float, tau: float, mu: float,
                  eta_prod: float, cfg: NetConfig, system: AbelSystem):
    """One unrolled iteration: diagonal affine map, then the barrier prox."""
    beta = 1.0 - lam * (system.beta_t + tau * system.beta_d)
    pre = beta * x_prev + (lam * eta_prod) * b0
    if cfg.constraint is None:
        x_out = pre
        jac = None
    else:
        gamma = lam * mu
        pre_elt = to_elt(pre, system)
        out_elt = prox(pre_elt, gamma, cfg.constraint)
        jac = prox_jacobian(pre_elt, gamma, cfg.constraint, x=out_elt)
        x_out = to_eigen(out_elt, system)
    rec = LayerRecord(
        x_prev=x_prev, beta=beta, pre=pre, x_out=x_out,
        lam=lam, tau=tau, mu=mu, gamma=lam * mu, eta_prod=eta_prod, jac=jac,
    )
    return x_out, rec


def forward(x0: np.ndarray, b0: np.ndarray, params: NetParams, cfg: NetConfig,
            system: AbelSystem, tau_override: np.ndarray | None = None):
    """Run all m layers; returns (x_m, Trace)."""
    x0 = np.asarray(x0, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    if x0.shape != (system.k,) or b0.shape != (system.k,):
        raise ValueError("x0 and b0 must be eigen-basis vectors of length K")
    lam, tau, mu, rho = hyper_parameters(params, cfg, system, b0=b0, tau_override=tau_override)
    x = x0
    records = []
    eta_prod = 1.0
    for n in range(cfg.m):
        if n > 0:
            eta_prod *= cfg.eta[n - 1]
        x, rec = forward_layer(x, b0, float(lam[n]), float(tau[n]), float(mu[n]),
                               eta_prod, cfg, system)
        records.append(rec)
    return x, Trace(x0=x0, b0=b0, rho=rho, layers=records, x_out=x)


def initial_state(b0: np.ndarray, cfg: NetConfig) -> np.ndarray:
    return np.asarray(b0, dtype=float).copy() if cfg.init == "bias" else np.zeros_like(b0)


def objective(x: np.ndarray, y_delta: np.ndarray, tau: float, system: AbelSystem) -> float:
    """Monitoring objective 0.5 ||T x - y||_h^2 + (tau/2) sum beta_d x_k^2."""
    x = np.asarray(x, dtype=float)
    resid = system.telt @ to_elt(x, system) - np.asarray(y_delta, dtype=float)
    fidelity = 0.5 * system.h * float(np.dot(resid, resid))
    reg = 0.5 * tau * float(np.sum(system.beta_d * x**2))
    return fidelity + reg


def spectra_of(params: NetParams, cfg: NetConfig, system: AbelSystem,
               b0: np.ndarray | None = None, rho: float | None = None) -> LayerSpectra:
    """Freeze the network at a representative b0 into certifiable spectra."""
    lam = softplus(params.c, cfg.softplus_beta)
    if rho is None:
        if b0 is None:
            raise ValueError("need b0 or rho to freeze the regularization weights")
        rho = noise_ratio_factor(b0, cfg, system)
    tau = softplus(params.d, cfg.softplus_beta) * rho
    return LayerSpectra(lam=lam, tau=tau, eta=cfg.eta.copy(),
                        beta_t=system.beta_t.copy(), beta_d=system.beta_d.copy())


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def _constraint_to_json(constraint):
    if constraint is None:
        return {"kind": "none"}
    if isinstance(constraint, Box):
        return {"kind": "box", "x_min": constraint.x_min, "x_max": constraint.x_max}
    if isinstance(constraint, MomentSlab):
        return {"kind": "moment", "j": constraint.j}
    raise TypeError(f"unknown constraint {constraint!r}")


def _constraint_from_json(obj, system: AbelSystem):
    kind = obj["kind"]
    if kind == "none":
        return None
    if kind == "box":
        return Box(obj["x_min"], obj["x_max"])
    if kind == "moment":
        return MomentSlab.from_grid(system.grid, obj["j"])
    raise ValueError(f"unknown constraint kind {kind!r}")


def save_checkpoint(path, params: NetParams, cfg: NetConfig, system: AbelSystem) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "system_hash": system.hash(),
        "system": {"a": system.a, "r": system.r, "n": system.n, "k": system.k},
        "config": {
            "m": cfg.m,
            "a": cfg.a,
            "r": cfg.r,
            "q": cfg.q,
            "f_max": cfg.f_max,
            "softplus_beta": cfg.softplus_beta,
            "init": cfg.init,
            "eta": cfg.eta.tolist(),
            "constraint": _constraint_to_json(cfg.constraint),
        },
        "params": {"c": params.c.tolist(), "d": params.d.tolist(), "e": params.e.tolist()},
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


def load_checkpoint(path, system: AbelSystem):
    """Load (params, cfg) and verify the checkpoint matches the system."""
    with open(path) as f:
        payload = json.load(f)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')!r}")
    if payload["system_hash"] != system.hash():
        raise ValueError("checkpoint was trained against a different operator system")
    cj = payload["config"]
    cfg = NetConfig(
        m=cj["m"], a=cj["a"], r=cj["r"], q=cj["q"], f_max=cj["f_max"],
        softplus_beta=cj["softplus_beta"], init=cj["init"],
        eta=np.asarray(cj["eta"], dtype=float),
        constraint=_constraint_from_json(cj["constraint"], system),
    )
    pj = payload["params"]
    params = NetParams(np.asarray(pj["c"]), np.asarray(pj["d"]), np.asarray(pj["e"]))
    return params, cfg
