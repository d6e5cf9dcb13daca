"""Closed-form robustness certificates for the unrolled network.

Every layer of the network acts diagonally on the operator eigenbasis,
so the linear part of the augmented (state, bias) system is described by
three scalar families per eigenindex p:

* ``beta[n, p] = 1 - lam_n (beta_T_p + tau_n beta_D_p)``, the state gain,
* ``beta_c[i, n, p]``, the product of state gains over layers i..n,
* ``beta_tilde[i, n, p]``, the accumulated bias-to-state gain,

together with the bias leakage products ``eta[i, n]``.  From these the
module evaluates the spectral norms of all partial layer compositions,
the Lipschitz constants of the virtual and the concrete networks (both
initializations), and the sufficient averagedness conditions over a grid
of alpha values.  ``brute_force_certificate`` recomputes everything from
explicitly assembled block matrices and SVDs; it exists for tests only.

Indices ``i`` and ``n`` are 1-based layer labels throughout, matching
the recursions they implement.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, asdict

import numpy as np

ALPHA_GRID_POINTS = 64


class CertificateError(ValueError):
    """Inconsistent certificate request (bad indices, sizes, radicands)."""


@dataclass
class LayerSpectra:
    """Per-layer hyper-parameters plus operator spectra.

    ``lam``, ``tau`` and ``eta`` have one entry per layer; ``beta_t`` and
    ``beta_d`` one entry per retained eigenindex.  ``tau`` must already be
    frozen to concrete per-layer values (the data-dependence of the
    regularization weight is neglected by construction).
    """

    lam: np.ndarray
    tau: np.ndarray
    eta: np.ndarray
    beta_t: np.ndarray
    beta_d: np.ndarray

    def __post_init__(self):
        self.lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        self.tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        self.eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        self.beta_t = np.atleast_1d(np.asarray(self.beta_t, dtype=float))
        self.beta_d = np.atleast_1d(np.asarray(self.beta_d, dtype=float))
        if not (len(self.lam) == len(self.tau) == len(self.eta)):
            raise CertificateError("lam, tau, eta must share one entry per layer")
        if len(self.beta_t) != len(self.beta_d):
            raise CertificateError("beta_t and beta_d must share one entry per eigenindex")
        if self.m < 1 or self.k < 1:
            raise CertificateError("need at least one layer and one eigenindex")

    @property
    def m(self) -> int:
        return len(self.lam)

    @property
    def k(self) -> int:
        return len(self.beta_t)

    def layer_gain(self) -> np.ndarray:
        """State gains beta[n, p], shape (m, K)."""
        return 1.0 - self.lam[:, None] * (self.beta_t[None, :] + self.tau[:, None] * self.beta_d[None, :])

    def eta_prod(self, i: int, j: int) -> float:
        """prod_{k=i..j} eta_k (1-based, inclusive); empty products are 1."""
        if j < i:
            return 1.0
        return float(np.prod(self.eta[i - 1 : j]))


def composite_betas(spectra: LayerSpectra, i: int, n: int):
    """Composite gains (beta_c, beta_tilde, eta_in) over layers i..n.

    ``beta_tilde`` follows the stable one-layer-at-a-time recurrence
    ``bt(i, i) = lam_i``, ``bt(i, n) = beta_n * bt(i, n-1) + lam_n * eta(i, n-1)``.
    """
    _check_range(spectra, i, n)
    gains = spectra.layer_gain()
    beta_c = gains[i - 1].copy()
    beta_tilde = np.full(spectra.k, spectra.lam[i - 1])
    for j in range(i + 1, n + 1):
        beta_c = beta_c * gains[j - 1]
        beta_tilde = gains[j - 1] * beta_tilde + spectra.lam[j - 1] * spectra.eta_prod(i, j - 1)
    return beta_c, beta_tilde, spectra.eta_prod(i, n)


def _check_range(spectra: LayerSpectra, i: int, n: int) -> None:
    if not 1 <= i <= n <= spectra.m:
        raise CertificateError(f"need 1 <= i <= n <= m, got i={i}, n={n}, m={spectra.m}")


def _top_quadratic_root(x: np.ndarray, y: np.ndarray, z) -> np.ndarray:
    """Largest eigenvalue of [[x^2, x y], [x y, z^2 + y^2]], vectorized over p."""
    x2 = np.asarray(x) ** 2
    y2 = np.asarray(y) ** 2
    z2 = np.asarray(z) ** 2
    s = x2 + y2 + z2
    disc = s**2 - 4.0 * x2 * z2
    return 0.5 * (s + np.sqrt(np.maximum(disc, 0.0)))


def a_in(spectra: LayerSpectra, i: int, n: int, with_index: bool = False):
    """Squared norm of the layer block U_n o ... o U_i.

    The norm is the sup over eigenindices of the top eigenvalue of a 2x2
    Gram matrix in (beta_c, beta_tilde, eta); with eta == 0 it collapses
    exactly to ``sup (beta_c^2 + beta_tilde^2)``.
    """
    beta_c, beta_tilde, eta_in = composite_betas(spectra, i, n)
    if eta_in == 0.0:
        vals = beta_c**2 + beta_tilde**2
    else:
        vals = _top_quadratic_root(beta_c, beta_tilde, eta_in)
    p = int(np.argmax(vals))
    if with_index:
        return float(vals[p]), p
    return float(vals[p])


def theta_virtual(spectra: LayerSpectra):
    """Lipschitz recursion theta_n = sum_i theta_{i-1} sqrt(a_{i,n}).

    Returns ``(theta, lipschitz_virtual)`` with ``theta`` of length m and
    ``lipschitz_virtual = theta_m / 2^(m-1)``.
    """
    m = spectra.m
    sqrt_a = _sqrt_a_table(spectra)
    theta = np.zeros(m + 1)
    theta[0] = 1.0
    for n in range(1, m + 1):
        theta[n] = sum(theta[i - 1] * sqrt_a[i][n] for i in range(1, n + 1))
    return theta[1:], theta[m] / 2.0 ** (m - 1)


def _sqrt_a_table(spectra: LayerSpectra):
    m = spectra.m
    return {i: {n: np.sqrt(a_in(spectra, i, n)) for n in range(i, m + 1)} for i in range(1, m + 1)}


def seminorm_variants(spectra: LayerSpectra):
    """Seminorm and concrete-network quantities.

    Returns a dict with

    * ``a_bar``: length-m array of sup_p (beta_c^2 + beta_tilde^2) over
      layers i..m (the eta-free final-segment norms),
    * ``theta_bar``: the (x0, b0) -> x_m constant numerator,
    * ``a_hat1`` / ``a_hat2``: length-m arrays of the case-1 (x0 = 0) and
      case-2 (x0 = b0) first-segment norms; entry n < m is the interior
      value (with leakage), entry m the decimated final value,
    * ``theta_hat1`` / ``theta_hat2``: the matching recursions (need m >= 2).
    """
    m = spectra.m
    sqrt_a = _sqrt_a_table(spectra)
    theta = np.zeros(m + 1)
    theta[0] = 1.0
    for n in range(1, m):
        theta[n] = sum(theta[i - 1] * sqrt_a[i][n] for i in range(1, n + 1))

    a_bar = np.zeros(m)
    for i in range(1, m + 1):
        beta_c, beta_tilde, _ = composite_betas(spectra, i, m)
        a_bar[i - 1] = float(np.max(beta_c**2 + beta_tilde**2))
    theta_bar = sum(theta[i - 1] * np.sqrt(a_bar[i - 1]) for i in range(1, m + 1))

    out = {"a_bar": a_bar, "theta_bar": float(theta_bar)}
    if m < 2:
        out["a_hat1"] = out["a_hat2"] = out["theta_hat1"] = out["theta_hat2"] = None
        return out

    a_hat = {1: np.zeros(m), 2: np.zeros(m)}
    for n in range(1, m + 1):
        beta_c, beta_tilde, eta_in = composite_betas(spectra, 1, n)
        eta_sq = eta_in**2 if n < m else 0.0  # final segment is decimated
        a_hat[1][n - 1] = float(np.max(beta_tilde**2) + eta_sq)
        a_hat[2][n - 1] = float(np.max((beta_c + beta_tilde) ** 2) + eta_sq)

    for case in (1, 2):
        theta_hat = np.zeros(m + 1)
        theta_hat[1] = np.sqrt(a_hat[case][0])
        for n in range(2, m + 1):
            acc = np.sqrt(a_hat[case][n - 1])
            for i in range(2, n + 1):
                seg = sqrt_a[i][n] if n < m else np.sqrt(a_bar[i - 1])
                acc += theta_hat[i - 1] * seg
            theta_hat[n] = acc
        out[f"a_hat{case}"] = a_hat[case]
        out[f"theta_hat{case}"] = float(theta_hat[m])
    return out


def vartheta(spectra: LayerSpectra, theta_m: float):
    """Data-sensitivity constants derived from the virtual constant.

    ``fixed`` bounds the b0 -> x_m map when x0 is held fixed,
    ``data`` the same map when x0 = b0.
    """
    m = spectra.m
    eta_1m = spectra.eta_prod(1, m)
    rad_fixed = theta_m**2 / 2.0 ** (2 * (m - 1)) - eta_1m**2
    rad_data = theta_m**2 / 2.0 ** (2 * m - 3) - eta_1m**2
    if rad_fixed < -1e-12 or rad_data < -1e-12:
        raise CertificateError("inconsistent certificate: negative radicand")
    return float(np.sqrt(max(rad_fixed, 0.0))), float(np.sqrt(max(rad_data, 0.0)))


def averagedness(spectra: LayerSpectra, alpha: float, aux: dict | None = None):
    """Sufficient alpha-averagedness test for each network variant.

    Returns a dict with the shifted norms ``b``, ``b_bar``, ``b_hat1``,
    ``b_hat2`` and the matching boolean flags.  ``aux`` may carry
    precomputed certificate scalars to avoid recomputation.
    """
    if not 0.5 <= alpha <= 1.0:
        raise CertificateError("alpha must lie in [1/2, 1]")
    m = spectra.m
    if aux is None:
        aux = _certificate_scalars(spectra)
    gamma = 2.0**m * (1.0 - alpha)
    beta_c, beta_tilde, eta_1m = composite_betas(spectra, 1, m)

    b = float(np.max(_top_quadratic_root(beta_c - gamma, beta_tilde, eta_1m - gamma)))
    b_bar = float(np.max(_top_quadratic_root(beta_c - gamma, beta_tilde, -gamma)))
    res = {
        "b": b,
        "b_bar": b_bar,
        "flag_virtual": bool(
            np.sqrt(b) - np.sqrt(aux["a_1m"]) <= 2.0**m * alpha - 2.0 * aux["theta_m"]
        ),
        "flag_pair": bool(
            np.sqrt(b_bar) - np.sqrt(aux["a_bar_1m"]) <= 2.0**m * alpha - 2.0 * aux["theta_bar"]
        ),
    }
    if aux["theta_hat1"] is not None:
        b_hat1 = float(np.max((beta_tilde - gamma) ** 2))
        b_hat2 = float(np.max((beta_c + beta_tilde - gamma) ** 2))
        res["b_hat1"] = b_hat1
        res["b_hat2"] = b_hat2
        res["flag_case1"] = bool(
            np.sqrt(b_hat1) - np.sqrt(aux["a_hat1_m"]) <= 2.0**m * alpha - 2.0 * aux["theta_hat1"]
        )
        res["flag_case2"] = bool(
            np.sqrt(b_hat2) - np.sqrt(aux["a_hat2_m"]) <= 2.0**m * alpha - 2.0 * aux["theta_hat2"]
        )
    else:
        res["b_hat1"] = res["b_hat2"] = None
        res["flag_case1"] = res["flag_case2"] = None
    return res


def _certificate_scalars(spectra: LayerSpectra) -> dict:
    theta, _ = theta_virtual(spectra)
    semis = seminorm_variants(spectra)
    return {
        "theta_m": float(theta[-1]),
        "a_1m": a_in(spectra, 1, spectra.m),
        "a_bar_1m": float(semis["a_bar"][0]),
        "theta_bar": semis["theta_bar"],
        "a_hat1_m": None if semis["a_hat1"] is None else float(semis["a_hat1"][-1]),
        "a_hat2_m": None if semis["a_hat2"] is None else float(semis["a_hat2"][-1]),
        "theta_hat1": semis["theta_hat1"],
        "theta_hat2": semis["theta_hat2"],
    }


@dataclass
class Certificate:
    """Full robustness report for one parameter set.

    Lipschitz constants are the theta numerators divided by 2^(m-1):
    ``lipschitz_virtual`` for the augmented (x, b) system,
    ``lipschitz_pair`` for (x0, b0) -> x_m, and ``lipschitz_case1/2`` for
    the concrete b0 -> x_m networks with x0 = 0 and x0 = b0.  The
    ``vartheta`` pair carries the direct data-sensitivity constants.
    ``attaining`` maps quantity names to the eigenindex achieving the sup.
    """

    m: int
    k: int
    eta_is_one: bool
    a: np.ndarray            # (m, m); a[i-1, n-1] for i <= n, NaN elsewhere
    theta: np.ndarray        # (m,)
    a_bar: np.ndarray        # (m,)
    theta_bar: float
    a_hat1: np.ndarray | None
    a_hat2: np.ndarray | None
    theta_hat1: float | None
    theta_hat2: float | None
    lipschitz_virtual: float
    lipschitz_pair: float
    lipschitz_case1: float | None
    lipschitz_case2: float | None
    vartheta_fixed: float
    vartheta_data: float
    alphas: np.ndarray
    b_alpha: np.ndarray
    b_bar_alpha: np.ndarray
    b_hat1_alpha: np.ndarray | None
    b_hat2_alpha: np.ndarray | None
    flags_virtual: np.ndarray
    flags_pair: np.ndarray
    flags_case1: np.ndarray | None
    flags_case2: np.ndarray | None
    attaining: dict = field(default_factory=dict)

    def smallest_averaged_alpha(self, family: str):
        """Smallest grid alpha whose flag holds, or None."""
        flags = {
            "virtual": self.flags_virtual,
            "pair": self.flags_pair,
            "case1": self.flags_case1,
            "case2": self.flags_case2,
        }[family]
        if flags is None:
            return None
        hits = np.flatnonzero(flags)
        return float(self.alphas[hits[0]]) if hits.size else None


def default_alpha_grid(points: int = ALPHA_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.5, 1.0, points)


def certificate(spectra: LayerSpectra, alphas: np.ndarray | None = None) -> Certificate:
    """Evaluate every closed-form robustness quantity for one spectra set."""
    m = spectra.m
    if alphas is None:
        alphas = default_alpha_grid()
    alphas = np.asarray(alphas, dtype=float)

    a_table = np.full((m, m), np.nan)
    attaining = {}
    for i in range(1, m + 1):
        for n in range(i, m + 1):
            val, p = a_in(spectra, i, n, with_index=True)
            a_table[i - 1, n - 1] = val
            if (i, n) == (1, m):
                attaining["a_1m"] = p

    theta, lip_virtual = theta_virtual(spectra)
    semis = seminorm_variants(spectra)
    vth_fixed, vth_data = vartheta(spectra, float(theta[-1]))

    beta_c, beta_tilde, _ = composite_betas(spectra, 1, m)
    attaining["a_bar_1m"] = int(np.argmax(beta_c**2 + beta_tilde**2))
    if semis["a_hat1"] is not None:
        attaining["a_hat1_m"] = int(np.argmax(beta_tilde**2))
        attaining["a_hat2_m"] = int(np.argmax((beta_c + beta_tilde) ** 2))

    aux = {
        "theta_m": float(theta[-1]),
        "a_1m": float(a_table[0, m - 1]),
        "a_bar_1m": float(semis["a_bar"][0]),
        "theta_bar": semis["theta_bar"],
        "a_hat1_m": None if semis["a_hat1"] is None else float(semis["a_hat1"][-1]),
        "a_hat2_m": None if semis["a_hat2"] is None else float(semis["a_hat2"][-1]),
        "theta_hat1": semis["theta_hat1"],
        "theta_hat2": semis["theta_hat2"],
    }

    rows = [averagedness(spectra, float(al), aux=aux) for al in alphas]
    has_hats = semis["theta_hat1"] is not None
    scale = 2.0 ** (m - 1)
    return Certificate(
        m=m,
        k=spectra.k,
        eta_is_one=bool(np.all(spectra.eta == 1.0)),
        a=a_table,
        theta=theta,
        a_bar=semis["a_bar"],
        theta_bar=semis["theta_bar"],
        a_hat1=semis["a_hat1"],
        a_hat2=semis["a_hat2"],
        theta_hat1=semis["theta_hat1"],
        theta_hat2=semis["theta_hat2"],
        lipschitz_virtual=lip_virtual,
        lipschitz_pair=semis["theta_bar"] / scale,
        lipschitz_case1=None if not has_hats else semis["theta_hat1"] / scale,
        lipschitz_case2=None if not has_hats else semis["theta_hat2"] / scale,
        vartheta_fixed=vth_fixed,
        vartheta_data=vth_data,
        alphas=alphas,
        b_alpha=np.array([r["b"] for r in rows]),
        b_bar_alpha=np.array([r["b_bar"] for r in rows]),
        b_hat1_alpha=np.array([r["b_hat1"] for r in rows]) if has_hats else None,
        b_hat2_alpha=np.array([r["b_hat2"] for r in rows]) if has_hats else None,
        flags_virtual=np.array([r["flag_virtual"] for r in rows], dtype=bool),
        flags_pair=np.array([r["flag_pair"] for r in rows], dtype=bool),
        flags_case1=np.array([r["flag_case1"] for r in rows], dtype=bool) if has_hats else None,
        flags_case2=np.array([r["flag_case2"] for r in rows], dtype=bool) if has_hats else None,
        attaining=attaining,
    )


# ---------------------------------------------------------------------------
# Dense oracle.  Everything below exists for validation only: it assembles
# the block operators explicitly and measures norms by SVD, plus the
# subset-sum form of the theta numerator.
# ---------------------------------------------------------------------------


def _dense_layers(spectra: LayerSpectra):
    k = spectra.k
    gains = spectra.layer_gain()
    eye = np.eye(k)
    layers = []
    for n in range(spectra.m):
        top = np.hstack([np.diag(gains[n]), spectra.lam[n] * eye])
        bot = np.hstack([np.zeros((k, k)), spectra.eta[n] * eye])
        layers.append(np.vstack([top, bot]))
    return layers


def _segment_products(layers):
    """prods[i][n] = U_n ... U_i (1-based, inclusive)."""
    m = len(layers)
    prods = {}
    for i in range(1, m + 1):
        acc = layers[i - 1]
        prods[(i, i)] = acc
        for n in range(i + 1, m + 1):
            acc = layers[n - 1] @ acc
            prods[(i, n)] = acc
    return prods


def _spec_norm(mat: np.ndarray) -> float:
    return float(np.linalg.svd(mat, compute_uv=False)[0])


def theta_combinatorial(norms, m: int) -> float:
    """Subset-sum form of the theta numerator over segment norms.

    ``norms[(i, n)]`` must give the norm of the composition of layers
    i..n.  Sums products of segment norms over all break placements in
    {1, .., m-1}.
    """
    total = 0.0
    for bits in itertools.product((0, 1), repeat=m - 1):
        cuts = [idx + 1 for idx, b in enumerate(bits) if b]
        bounds = [0] + cuts + [m]
        prod = 1.0
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            prod *= norms[(lo + 1, hi)]
        total += prod
    return total


def brute_force_certificate(spectra: LayerSpectra, alphas: np.ndarray | None = None) -> Certificate:
    """Recompute the certificate from dense block matrices (tests only)."""
    m, k = spectra.m, spectra.k
    if 2 * k * m > 64:
        raise CertificateError("dense oracle guard: 2*K*m must stay <= 64")
    if alphas is None:
        alphas = default_alpha_grid()
    alphas = np.asarray(alphas, dtype=float)

    layers = _dense_layers(spectra)
    prods = _segment_products(layers)
    eye2k = np.eye(2 * k)
    dx = np.hstack([np.eye(k), np.zeros((k, k))])
    up1_case1 = layers[0] @ np.vstack([np.zeros((k, k)), np.eye(k)])
    up1_case2 = layers[0] @ np.vstack([np.eye(k), np.eye(k)])

    a_table = np.full((m, m), np.nan)
    norms = {}
    for (i, n), mat in prods.items():
        norms[(i, n)] = _spec_norm(mat)
        a_table[i - 1, n - 1] = norms[(i, n)] ** 2

    theta = np.zeros(m + 1)
    theta[0] = 1.0
    for n in range(1, m + 1):
        theta[n] = theta_combinatorial({key: norms[key] for key in norms if key[1] <= n}, n)

    a_bar = np.array([_spec_norm(dx @ prods[(i, m)]) ** 2 for i in range(1, m + 1)])
    theta_bar = sum(theta[i - 1] * np.sqrt(a_bar[i - 1]) for i in range(1, m + 1))

    if m >= 2:
        a_hat = {1: np.zeros(m), 2: np.zeros(m)}
        for case, up1 in ((1, up1_case1), (2, up1_case2)):
            for n in range(1, m + 1):
                comp = up1 if n == 1 else prods[(2, n)] @ up1
                if n == m:
                    comp = dx @ comp
                a_hat[case][n - 1] = _spec_norm(comp) ** 2
        theta_hat = {}
        for case in (1, 2):
            th = np.zeros(m + 1)
            th[1] = np.sqrt(a_hat[case][0])
            for n in range(2, m + 1):
                acc = np.sqrt(a_hat[case][n - 1])
                for i in range(2, n + 1):
                    seg = norms[(i, n)] if n < m else np.sqrt(a_bar[i - 1])
                    acc += th[i - 1] * seg
                th[n] = acc
            theta_hat[case] = float(th[m])
    else:
        a_hat = {1: None, 2: None}
        theta_hat = {1: None, 2: None}

    eta_1m = spectra.eta_prod(1, m)
    rad_fixed = theta[m] ** 2 / 2.0 ** (2 * (m - 1)) - eta_1m**2
    rad_data = theta[m] ** 2 / 2.0 ** (2 * m - 3) - eta_1m**2

    u_full = prods[(1, m)]
    u_pair = np.vstack([dx @ u_full, np.zeros((k, 2 * k))])
    b_rows = {"b": [], "b_bar": [], "b_hat1": [], "b_hat2": [],
              "flag_virtual": [], "flag_pair": [], "flag_case1": [], "flag_case2": []}
    for alpha in alphas:
        gamma = 2.0**m * (1.0 - alpha)
        b = _spec_norm(u_full - gamma * eye2k) ** 2
        b_bar = _spec_norm(u_pair - gamma * eye2k) ** 2
        b_rows["b"].append(b)
        b_rows["b_bar"].append(b_bar)
        b_rows["flag_virtual"].append(
            np.sqrt(b) - norms[(1, m)] <= 2.0**m * alpha - 2.0 * theta[m]
        )
        b_rows["flag_pair"].append(
            np.sqrt(b_bar) - np.sqrt(a_bar[0]) <= 2.0**m * alpha - 2.0 * theta_bar
        )
        if m >= 2:
            for case, up1 in ((1, up1_case1), (2, up1_case2)):
                comp = dx @ (prods[(2, m)] @ up1)
                b_hat = _spec_norm(comp - gamma * np.eye(k)) ** 2
                b_rows[f"b_hat{case}"].append(b_hat)
                b_rows[f"flag_case{case}"].append(
                    np.sqrt(b_hat) - np.sqrt(a_hat[case][m - 1])
                    <= 2.0**m * alpha - 2.0 * theta_hat[case]
                )

    scale = 2.0 ** (m - 1)
    has_hats = m >= 2
    return Certificate(
        m=m,
        k=k,
        eta_is_one=bool(np.all(spectra.eta == 1.0)),
        a=a_table,
        theta=theta[1:],
        a_bar=a_bar,
        theta_bar=float(theta_bar),
        a_hat1=a_hat[1],
        a_hat2=a_hat[2],
        theta_hat1=theta_hat[1],
        theta_hat2=theta_hat[2],
        lipschitz_virtual=float(theta[m] / scale),
        lipschitz_pair=float(theta_bar / scale),
        lipschitz_case1=None if not has_hats else theta_hat[1] / scale,
        lipschitz_case2=None if not has_hats else theta_hat[2] / scale,
        vartheta_fixed=float(np.sqrt(max(rad_fixed, 0.0))),
        vartheta_data=float(np.sqrt(max(rad_data, 0.0))),
        alphas=alphas,
        b_alpha=np.array(b_rows["b"]),
        b_bar_alpha=np.array(b_rows["b_bar"]),
        b_hat1_alpha=np.array(b_rows["b_hat1"]) if has_hats else None,
        b_hat2_alpha=np.array(b_rows["b_hat2"]) if has_hats else None,
        flags_virtual=np.array(b_rows["flag_virtual"], dtype=bool),
        flags_pair=np.array(b_rows["flag_pair"], dtype=bool),
        flags_case1=np.array(b_rows["flag_case1"], dtype=bool) if has_hats else None,
        flags_case2=np.array(b_rows["flag_case2"], dtype=bool) if has_hats else None,
    )


def save_certificate(path, cert: Certificate) -> None:
    """Write the certificate as structured text (JSON)."""
    raw = asdict(cert)
    payload = {"format_version": 1}
    for key, val in raw.items():
        if isinstance(val, np.ndarray):
            payload[key] = val.tolist()
        elif isinstance(val, dict):
            payload[key] = {kk: int(vv) for kk, vv in val.items()}
        else:
            payload[key] = val
    for family in ("virtual", "pair", "case1", "case2"):
        payload[f"min_averaged_alpha_{family}"] = cert.smallest_averaged_alpha(family)
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")
