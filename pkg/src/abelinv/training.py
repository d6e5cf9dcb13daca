"""End-to-end training of the unrolled network.

Reverse mode is written by hand: the prox Jacobians from
:mod:`abelinv.barrier` are chained with the diagonal affine maps and the
softplus squashings.  The regularization weight's data factor rho(b0) is
treated as a constant of the backward pass, so its gradient flows only
into the raw d parameters.  Optimization is plain Adam, batch size one.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from abelinv.core import AbelSystem, bias_from_data
from abelinv.network import (
    NetConfig,
    NetParams,
    Trace,
    forward,
    initial_state,
    noise_ratio_factor,
    softplus_inv,
    softplus_prime,
    spectra_of,
)
from abelinv.certification import seminorm_variants


@dataclass
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-3
    batch_size: int = 1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # initialization targets: lambda_1 at half the convergent-step bound,
    # later layers rising geometrically toward init_step_top of that bound,
    # softplus(d) scaling the data-driven tau factor
    init_step_frac: float = 0.5
    init_step_top: float = 0.95
    init_tau_scale: float = 0.05
    init_tau_absolute: float | None = None  # if set, aim softplus(d)*rho_ref at this tau
    init_mu: float = 2e-4
    init_jitter: float = 0.1

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size != 1:
            raise ValueError("only batch size one is supported")


@dataclass
class EpochReport:
    epoch: int
    train_loss: float
    val_loss: float
    lipschitz_case1: float
    lipschitz_case2: float
    seconds: float


@dataclass
class Grads:
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def mse_loss(x_out: np.ndarray, x_true: np.ndarray) -> float:
    x_out = np.asarray(x_out, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x_out.shape != x_true.shape:
        raise ValueError("output/target length mismatch")
    diff = x_out - x_true
    return float(np.dot(diff, diff) / x_out.size)


def backward(trace: Trace, x_true: np.ndarray, params: NetParams, cfg: NetConfig,
             system: AbelSystem) -> Grads:
    """Adjoint sweep of mse_loss(forward(...)) through all m layers."""
    k = system.k
    g = (2.0 / k) * (trace.x_out - np.asarray(x_true, dtype=float))
    gc = np.zeros(cfg.m)
    gd = np.zeros(cfg.m)
    ge = np.zeros(cfg.m)
    sp_beta = cfg.softplus_beta
    for n in reversed(range(cfg.m)):
        rec = trace.layers[n]
        if rec.jac is None:
            gp = g
            g_gamma = 0.0
        else:
            g_elt = system.h * (system.basis_v @ g)       # adjoint of to_eigen
            g_prox_in = rec.jac.apply(g_elt)              # Jacobian is symmetric
            g_gamma = float(np.dot(rec.jac.dx_dgamma, g_elt))
            gp = system.basis_v.T @ g_prox_in             # adjoint of to_elt
        # pre = beta * x_prev + lam * eta_prod * b0, beta = 1 - lam (bT + tau bD)
        s = system.beta_t + rec.tau * system.beta_d
        g_lam = float(np.dot(gp, -s * rec.x_prev + rec.eta_prod * trace.b0))
        g_tau = float(np.dot(gp, -rec.lam * system.beta_d * rec.x_prev))
        g = rec.beta * gp
        g_lam += g_gamma * rec.mu
        g_mu = g_gamma * rec.lam
        gc[n] = g_lam * softplus_prime(params.c[n], sp_beta)
        gd[n] = g_tau * softplus_prime(params.d[n], sp_beta) * trace.rho
        ge[n] = g_mu * softplus_prime(params.e[n], sp_beta)
    return Grads(gc, gd, ge)


def adam_step(params: NetParams, grads: Grads, state: AdamState, cfg: TrainConfig) -> None:
    """In-place Adam update with bias correction."""
    state.t += 1
    t = state.t
    for name in ("c", "d", "e"):
        g = getattr(grads, name)
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        state.m[name] = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        state.v[name] = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g**2
        m_hat = state.m[name] / (1.0 - cfg.beta1**t)
        v_hat = state.v[name] / (1.0 - cfg.beta2**t)
        p = getattr(params, name)
        p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


def reference_ratio(records, cfg: NetConfig, system: AbelSystem, limit: int = 16) -> float:
    """Median data factor rho over (up to) the first few training records."""
    vals = []
    for rec in records[:limit]:
        b0 = bias_from_data(rec.y_noisy, system)
        vals.append(noise_ratio_factor(b0, cfg, system))
    vals = [v for v in vals if v > 0]
    if not vals:
        raise ValueError("cannot calibrate tau initialization on noiseless data")
    return float(np.median(vals))


def init_params(cfg: NetConfig, system: AbelSystem, rho_ref: float,
                tcfg: TrainConfig, rng: np.random.Generator) -> NetParams:
    """Draw raw parameters around the configured magnitude targets.

    The first layer's step starts at ``init_step_frac`` over the
    convergent-step denominator; later layers climb geometrically toward
    ``init_step_top`` of the full bound ``2 / (beta_T_0 + tau beta_D_K-1)``
    so the untrained cascade already sweeps a range of spectral scales.
    """
    sp_beta = cfg.softplus_beta
    if tcfg.init_tau_absolute is not None:
        if rho_ref <= 0:
            raise ValueError("tau calibration needs a positive data factor")
        d_scale = tcfg.init_tau_absolute / rho_ref
    else:
        d_scale = tcfg.init_tau_scale
    tau0 = d_scale * rho_ref
    denom = system.beta_t[0] + tau0 * system.beta_d[-1]
    lam1 = tcfg.init_step_frac / denom
    lam_top = max(tcfg.init_step_top * 2.0 / denom, lam1)
    lam_targets = np.geomspace(lam1, lam_top, cfg.m) if cfg.m > 1 else np.array([lam1])
    jitter = lambda: np.exp(tcfg.init_jitter * rng.standard_normal(cfg.m))
    c = softplus_inv(lam_targets * jitter(), sp_beta)
    d = softplus_inv(d_scale * jitter(), sp_beta)
    e = softplus_inv(tcfg.init_mu * jitter(), sp_beta)
    return NetParams(c, d, e)


def _epoch_certificate(params: NetParams, cfg: NetConfig, system: AbelSystem, rho: float):
    spectra = spectra_of(params, cfg, system, rho=rho)
    semis = seminorm_variants(spectra)
    scale = 2.0 ** (cfg.m - 1)
    if semis["theta_hat1"] is None:
        return np.nan, np.nan
    return semis["theta_hat1"] / scale, semis["theta_hat2"] / scale


def _check_finite(what: str, *arrays) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite {what} encountered during training")


def train(dataset, tcfg: TrainConfig, cfg: NetConfig, system: AbelSystem,
          params: NetParams | None = None):
    """Train on (train_records, val_records); returns (best_params, reports).

    The best checkpoint is selected by validation loss, evaluated every
    epoch along with the certified Lipschitz constants of both concrete
    initializations.
    """
    train_records, val_records = dataset
    rng = np.random.default_rng(tcfg.seed)
    if params is None:
        rho_ref = reference_ratio(train_records, cfg, system)
        params = init_params(cfg, system, rho_ref, tcfg, rng)
    else:
        params = params.copy()

    b0_train = [bias_from_data(rec.y_noisy, system) for rec in train_records]
    b0_val = [bias_from_data(rec.y_noisy, system) for rec in val_records]
    rho_rep = noise_ratio_factor(b0_train[0], cfg, system) if train_records else np.nan

    state = AdamState()
    reports = []
    best = (np.inf, params.copy())
    for epoch in range(1, tcfg.epochs + 1):
        tic = time.perf_counter()
        order = rng.permutation(len(train_records))
        losses = []
        for idx in order:
            rec = train_records[idx]
            b0 = b0_train[idx]
            x, trace = forward(initial_state(b0, cfg), b0, params, cfg, system)
            loss = mse_loss(x, rec.x_eigen)
            grads = backward(trace, rec.x_eigen, params, cfg, system)
            _check_finite("loss", [loss])
            _check_finite("gradient", grads.c, grads.d, grads.e)
            adam_step(params, grads, state, tcfg)
            _check_finite("parameters", params.c, params.d, params.e)
            losses.append(loss)
        val_loss = validation_loss(params, val_records, b0_val, cfg, system)
        lip1, lip2 = _epoch_certificate(params, cfg, system, rho_rep)
        reports.append(
            EpochReport(
                epoch=epoch,
                train_loss=float(np.mean(losses)) if losses else np.nan,
                val_loss=val_loss,
                lipschitz_case1=lip1,
                lipschitz_case2=lip2,
                seconds=time.perf_counter() - tic,
            )
        )
        if val_loss < best[0]:
            best = (val_loss, params.copy())
    if not reports:
        return params.copy(), []
    return best[1], reports


def validation_loss(params: NetParams, records, b0s, cfg: NetConfig, system: AbelSystem) -> float:
    if not records:
        return np.nan
    losses = []
    for rec, b0 in zip(records, b0s):
        x, _ = forward(initial_state(b0, cfg), b0, params, cfg, system)
        losses.append(mse_loss(x, rec.x_eigen))
    return float(np.mean(losses))


def evaluate(params: NetParams, records, cfg: NetConfig, system: AbelSystem) -> float:
    """Mean relative reconstruction error ||x_out - x_true|| / ||x_true||."""
    errs = []
    for rec in records:
        b0 = bias_from_data(rec.y_noisy, system)
        x, _ = forward(initial_state(b0, cfg), b0, params, cfg, system)
        truth = np.linalg.norm(rec.x_eigen)
        if truth == 0:
            raise ValueError("zero-norm ground truth in evaluation set")
        errs.append(np.linalg.norm(x - rec.x_eigen) / truth)
    return float(np.mean(errs))


METRICS_FIELDS = ("epoch", "train_loss", "val_loss", "lipschitz_case1", "lipschitz_case2", "seconds")


def write_metrics_csv(path, reports) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_FIELDS)
        for rep in reports:
            writer.writerow([rep.epoch] + [f"{getattr(rep, k):.17g}" for k in METRICS_FIELDS[1:]])
