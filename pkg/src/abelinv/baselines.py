"""Classical spectral baselines for the comparison table.

Both baselines invert in the operator eigenbasis: a hard spectral cutoff
(keep the first k_c modes, divide by the operator eigenvalues) and the
closed-form minimizer of the quadratic objective with the derivative
regularizer.  The division uses the numeric eigenvalues of the assembled
operator so the noiseless inverses are exact on the retained span; the
regularizer keeps its analytic power-law eigenvalues, matching the
monitoring objective.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from abelinv.core import AbelSystem, bias_from_data


@dataclass
class BaselineConfig:
    method: str = "spectral-cutoff"  # or "tikhonov"
    cutoff_index: int | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.method not in ("spectral-cutoff", "tikhonov"):
            raise ValueError(f"unknown baseline method {self.method!r}")
        if self.method == "tikhonov" and (self.tau is None or self.tau <= 0):
            raise ValueError("tikhonov baseline needs tau > 0")


def _beta_t(system: AbelSystem, use: str) -> np.ndarray:
    if use == "numeric":
        return system.beta_t_numeric
    if use == "analytic":
        return system.beta_t
    raise ValueError(f"unknown eigenvalue source {use!r}")


def spectral_cutoff_inverse(y_noisy: np.ndarray, k_c: int, system: AbelSystem,
                            use: str = "numeric") -> np.ndarray:
    """Keep the first k_c eigen coefficients of b0 / beta_T, zero the rest."""
    if not 1 <= k_c <= system.k:
        raise ValueError(f"cutoff index must lie in [1, {system.k}]")
    b0 = bias_from_data(y_noisy, system)
    x = np.zeros(system.k)
    beta = _beta_t(system, use)
    x[:k_c] = b0[:k_c] / beta[:k_c]
    return x


def tikhonov_inverse(y_noisy: np.ndarray, tau: float, system: AbelSystem,
                     use: str = "numeric") -> np.ndarray:
    """Closed-form minimizer x_k = b0_k / (beta_T_k + tau * beta_D_k)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    b0 = bias_from_data(y_noisy, system)
    return b0 / (_beta_t(system, use) + tau * system.beta_d)


def relative_error(x: np.ndarray, x_true: np.ndarray) -> float:
    truth = np.linalg.norm(x_true)
    if truth == 0:
        raise ValueError("zero-norm ground truth")
    return float(np.linalg.norm(x - x_true) / truth)


def mean_relative_error(records, invert, system: AbelSystem) -> float:
    """Average of ||invert(y) - x_true|| / ||x_true|| over the records."""
    return float(np.mean([relative_error(invert(rec.y_noisy, system), rec.x_eigen)
                          for rec in records]))


def select_cutoff(records, system: AbelSystem, use: str = "numeric") -> int:
    """Grid-search the cutoff index minimizing the mean error on records."""
    best = (np.inf, 1)
    for k_c in range(1, system.k + 1):
        err = mean_relative_error(
            records, lambda y, s, k_c=k_c: spectral_cutoff_inverse(y, k_c, s, use=use), system
        )
        if err < best[0]:
            best = (err, k_c)
    return best[1]


def select_tau(records, system: AbelSystem, grid=None, use: str = "numeric") -> float:
    if grid is None:
        grid = np.logspace(-8, 1, 28)
    best = (np.inf, grid[0])
    for tau in grid:
        err = mean_relative_error(
            records, lambda y, s, tau=tau: tikhonov_inverse(y, tau, s, use=use), system
        )
        if err < best[0]:
            best = (err, tau)
    return float(best[1])


def compare(eval_sets: dict, methods: dict):
    """Evaluate every method on every (a, delta) cell.

    ``eval_sets`` maps (a, delta) -> (records, system); ``methods`` maps a
    method name to ``fn(y_noisy, system, a, delta) -> x_eigen``.  Returns a
    list of row dicts (a, delta, method, error).
    """
    rows = []
    for (a, delta), (records, system) in sorted(eval_sets.items()):
        for name, fn in methods.items():
            err = float(np.mean([
                relative_error(fn(rec.y_noisy, system, a, delta), rec.x_eigen)
                for rec in records
            ]))
            rows.append({"a": a, "delta": delta, "method": name, "error": err})
    return rows


def write_comparison_csv(path, rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["a", "delta", "method", "error"])
        for row in rows:
            writer.writerow([row["a"], row["delta"], row["method"], f"{row['error']:.17g}"])
