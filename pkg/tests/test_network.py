"""Layer maps, hyper-parameter squashings, full forward pass, objective."""

import numpy as np
import pytest

from abelinv import barrier, core, network as net


def decaying_bias(system, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal(system.k) * system.beta_t


def test_softplus_values():
    assert abs(net.softplus(0.0) - np.log(2.0)) <= 1e-15
    assert abs(net.softplus(100.0) - 100.0) <= 1e-12
    assert abs(net.softplus(1.0, beta=2.0) - 0.5 * np.log(1.0 + np.exp(2.0))) <= 1e-14
    assert net.softplus(1000.0) == 1000.0  # no overflow
    assert net.softplus(-1000.0) == 0.0  # underflow to the asymptote


def test_softplus_prime_and_inverse():
    xs = np.array([-30.0, -2.0, 0.0, 3.0, 40.0])
    for beta in (1.0, 2.5):
        back = net.softplus_inv(net.softplus(xs, beta), beta)
        assert np.abs(back - xs).max() <= 1e-9
        eps = 1e-6
        fd = (net.softplus(xs + eps, beta) - net.softplus(xs - eps, beta)) / (2 * eps)
        assert np.abs(net.softplus_prime(xs, beta) - fd).max() <= 1e-9
    with pytest.raises(ValueError):
        net.softplus_inv(-1.0)


def test_step_size():
    assert abs(net.step_size(0.0) - np.log(2.0)) <= 1e-15
    assert abs(net.step_size(-10.0) - 4.54e-5) <= 1e-7
    cs = np.linspace(-5, 5, 50)
    lams = [net.step_size(c) for c in cs]
    assert np.all(np.diff(lams) > 0)


def test_barrier_param():
    assert abs(net.barrier_param(0.0) - np.log(2.0)) <= 1e-15
    assert abs(net.barrier_param(5.0) - 5.0067) <= 1e-4
    assert net.barrier_param(-50.0) > 0.0


def test_reg_param_zero_tail(sys120):
    cfg = net.NetConfig(m=3, a=1.0, f_max=8)
    b0 = np.zeros(16)
    b0[:8] = 1.0
    assert net.reg_param(0.3, b0, cfg, sys120) == 0.0


def test_reg_param_unit_ratio(sys120):
    cfg = net.NetConfig(m=3, a=1.0, q=2.0, r=1.0, f_max=8)
    b0 = np.zeros(16)
    b0[0] = 1.0 / np.sqrt(sys120.beta_d[0])  # weighted band norm 1
    b0[8] = 1.0  # tail norm 1
    for d in (-1.0, 0.0, 2.0):
        assert abs(net.reg_param(d, b0, cfg, sys120) - net.softplus(d)) <= 1e-14


def test_reg_param_regression_fixture(sys120):
    cfg = net.NetConfig(m=3, a=1.0, f_max=8)
    b0 = 1.0 / (1.0 + np.arange(16)) ** 2
    tau = net.reg_param(0.0, b0, cfg, sys120)
    assert abs(tau - 0.0012672289097868331) <= 1e-15


def test_reg_param_degenerate(sys120):
    cfg = net.NetConfig(m=3, a=1.0, f_max=8)
    b0 = np.zeros(16)
    b0[12] = 1.0  # tail only
    with pytest.raises(net.DegenerateDataError):
        net.reg_param(0.0, b0, cfg, sys120)


def test_forward_layer_identity_limit(sys120):
    cfg = net.NetConfig(m=1, a=1.0, f_max=8)
    x_prev = np.abs(decaying_bias(sys120, seed=1)) + 0.05
    b0 = decaying_bias(sys120, seed=2)
    x_out, _ = net.forward_layer(x_prev, b0, 1e-8, 0.1, 1.0, 1.0, cfg, sys120)
    assert np.linalg.norm(x_out - x_prev) <= 1e-5


def test_forward_layer_diagonal_action(sys120):
    cfg = net.NetConfig(m=1, a=1.0, f_max=8, constraint=None)
    for k in (0, 5):
        b0 = np.zeros(16)
        b0[k] = 1.0
        x_out, rec = net.forward_layer(np.zeros(16), b0, 0.3, 0.2, 0.5, 0.7, cfg, sys120)
        expected = np.zeros(16)
        expected[k] = 0.3 * 0.7
        assert np.array_equal(x_out, expected)
        assert rec.jac is None


def test_forward_layer_is_gradient_step(sys120):
    # without regularization or barrier, one layer is x + lam*(b0 - T*T x)
    cfg = net.NetConfig(m=1, a=1.0, f_max=8, constraint=None)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(16)
    b0 = rng.standard_normal(16)
    lam = 0.8
    x_out, _ = net.forward_layer(x, b0, lam, 0.0, 1.0, 1.0, cfg, sys120)
    w = np.eye(16) - lam * np.diag(sys120.beta_t)
    expected = w @ x + lam * b0
    assert np.abs(x_out - expected).max() <= 1e-10


def test_forward_single_layer_reduction(sys120):
    cfg = net.NetConfig(m=1, a=1.0, f_max=8)
    params = net.NetParams(c=[0.1], d=[-1.0], e=[-2.0])
    b0 = np.abs(decaying_bias(sys120, seed=4)) + 0.01
    x0 = np.zeros(16)
    out_full, trace = net.forward(x0, b0, params, cfg, sys120)
    lam, tau, mu, _ = net.hyper_parameters(params, cfg, sys120, b0=b0)
    out_layer, _ = net.forward_layer(x0, b0, float(lam[0]), float(tau[0]), float(mu[0]), 1.0, cfg, sys120)
    assert np.array_equal(out_full, out_layer)
    assert len(trace.layers) == 1


def test_forward_matches_dense_iteration(sys120):
    # prox disabled: the pass must equal explicit dense-matrix iteration
    m = 4
    cfg = net.NetConfig(m=m, a=1.0, f_max=8, constraint=None,
                        eta=np.array([1.0, 0.9, 1.1, 0.8]))
    rng = np.random.default_rng(5)
    params = net.NetParams(c=rng.normal(-1, 0.3, m), d=rng.normal(-1, 0.3, m), e=np.zeros(m))
    b0 = decaying_bias(sys120, seed=6)
    x0 = decaying_bias(sys120, seed=7)
    out, _ = net.forward(x0, b0, params, cfg, sys120)

    lam, tau, _, _ = net.hyper_parameters(params, cfg, sys120, b0=b0)
    x = x0.copy()
    eta_prod = 1.0
    for n in range(m):
        if n > 0:
            eta_prod *= cfg.eta[n - 1]
        w = np.eye(16) - lam[n] * (np.diag(sys120.beta_t) + tau[n] * np.diag(sys120.beta_d))
        v = lam[n] * eta_prod * np.eye(16)
        x = w @ x + v @ b0
    assert np.abs(out - x).max() <= 1e-10


def test_unit_leakage_matches_plain_recursion(sys500):
    # eta == 1 must reproduce the plain network bit for bit
    m = 3
    cfg = net.NetConfig(m=m, a=1.0, f_max=25)
    rng = np.random.default_rng(8)
    params = net.NetParams(c=rng.normal(-1, 0.3, m), d=rng.normal(-2, 0.3, m), e=rng.normal(-4, 0.3, m))
    b0 = np.abs(decaying_bias(sys500, seed=9, scale=0.5))
    out, _ = net.forward(b0.copy(), b0, params, cfg, sys500)

    lam, tau, mu, _ = net.hyper_parameters(params, cfg, sys500, b0=b0)
    x = b0.copy()
    for n in range(m):
        beta = 1.0 - lam[n] * (sys500.beta_t + tau[n] * sys500.beta_d)
        pre = beta * x + lam[n] * b0
        x = core.to_eigen(barrier.prox(core.to_elt(pre, sys500), lam[n] * mu[n], cfg.constraint), sys500)
    assert np.array_equal(out, x)


def test_forward_deterministic(sys120):
    cfg = net.NetConfig(m=3, a=1.0, f_max=8)
    rng = np.random.default_rng(10)
    params = net.NetParams(c=rng.normal(-1, 0.3, 3), d=rng.normal(-1, 0.3, 3), e=rng.normal(-3, 0.3, 3))
    b0 = np.abs(decaying_bias(sys120, seed=11)) + 0.01
    out1, _ = net.forward(b0.copy(), b0, params, cfg, sys120)
    out2, _ = net.forward(b0.copy(), b0, params, cfg, sys120)
    assert np.array_equal(out1, out2)


def test_forward_converges_to_quadratic_minimizer():
    system = core.build_system(a=1.0, n=200, k=16)
    m = 400
    tau = system.beta_t[0] / system.beta_d[-1]
    lam = 0.9 * 2.0 / (system.beta_t[0] + tau * system.beta_d[-1])
    cfg = net.NetConfig(m=m, a=1.0, f_max=8, constraint=None)
    params = net.NetParams(c=np.full(m, net.softplus_inv(lam)), d=np.zeros(m), e=np.zeros(m))
    b0 = decaying_bias(system, seed=12)
    out, _ = net.forward(np.zeros(16), b0, params, cfg, system, tau_override=np.full(m, tau))
    minimizer = b0 / (system.beta_t + tau * system.beta_d)
    rel = np.abs(out - minimizer) / np.abs(minimizer)
    assert rel.max() <= 1e-6


def test_forward_iterates_contract_below_step_bound(sys500):
    m = 30
    tau = 0.05
    lam = 0.8 * 2.0 / (sys500.beta_t[0] + tau * sys500.beta_d[-1])
    cfg = net.NetConfig(m=m, a=1.0, f_max=25, constraint=None)
    params = net.NetParams(c=np.full(m, net.softplus_inv(lam)), d=np.zeros(m), e=np.zeros(m))
    b0 = decaying_bias(sys500, seed=13)
    _, trace = net.forward(np.zeros(sys500.k), b0, params, cfg, sys500,
                           tau_override=np.full(m, tau))
    xs = [trace.x0] + [rec.x_out for rec in trace.layers]
    diffs = [np.linalg.norm(b - a) for a, b in zip(xs[:-1], xs[1:])]
    assert np.all(np.diff(diffs) <= 1e-12)
    assert diffs[-1] < diffs[0]


def test_forward_diverges_above_step_bound(sys500):
    tau = 0.05
    lam = 1.1 * 2.0 / (sys500.beta_t[0] + tau * sys500.beta_d[-1])
    b0 = np.ones(sys500.k)
    outs = {}
    for m in (30, 60):
        cfg = net.NetConfig(m=m, a=1.0, f_max=25, constraint=None)
        params = net.NetParams(c=np.full(m, net.softplus_inv(lam)), d=np.zeros(m), e=np.zeros(m))
        out, _ = net.forward(np.zeros(sys500.k), b0, params, cfg, sys500,
                             tau_override=np.full(m, tau))
        outs[m] = abs(out[-1])
    assert outs[60] >= 10.0 * outs[30]


def test_objective_at_zero(sys120):
    rng = np.random.default_rng(14)
    y = rng.standard_normal(sys120.n)
    val = net.objective(np.zeros(16), y, 0.3, sys120)
    assert abs(val - 0.5 * core.norm_h(y, sys120.h) ** 2) <= 1e-12


def test_objective_at_true_preimage(sys120):
    x = decaying_bias(sys120, seed=15)
    y = sys120.telt @ core.to_elt(x, sys120)
    assert net.objective(x, y, 0.0, sys120) <= 1e-18


def test_objective_decreases_along_forward(sys120):
    m = 25
    tau = 1e-4
    lam = 0.3 * 2.0 / (sys120.beta_t[0] + tau * sys120.beta_d[-1])
    cfg = net.NetConfig(m=m, a=1.0, f_max=8, constraint=None)
    params = net.NetParams(c=np.full(m, net.softplus_inv(lam)), d=np.zeros(m), e=np.zeros(m))
    x_true = np.abs(decaying_bias(sys120, seed=16)) + 0.01
    y = sys120.telt @ core.to_elt(x_true, sys120)
    b0 = core.bias_from_data(y, sys120)
    _, trace = net.forward(np.zeros(16), b0, params, cfg, sys120, tau_override=np.full(m, tau))
    vals = [net.objective(rec.x_out, y, tau, sys120) for rec in trace.layers]
    assert np.all(np.diff(vals) <= 1e-14)


def test_checkpoint_round_trip(tmp_path, sys120):
    cfg = net.NetConfig(m=3, a=1.0, f_max=8, constraint=barrier.MomentSlab.from_grid(sys120.grid, 2))
    rng = np.random.default_rng(17)
    params = net.NetParams(c=rng.normal(size=3), d=rng.normal(size=3), e=rng.normal(size=3))
    p1 = tmp_path / "ck.json"
    p2 = tmp_path / "ck2.json"
    net.save_checkpoint(p1, params, cfg, sys120)
    loaded, cfg2 = net.load_checkpoint(p1, sys120)
    net.save_checkpoint(p2, loaded, cfg2, sys120)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(loaded.c, params.c)
    assert isinstance(cfg2.constraint, barrier.MomentSlab) and cfg2.constraint.j == 2


def test_checkpoint_rejects_wrong_system(tmp_path, sys120):
    other = core.build_system(a=0.5, n=120, k=16)
    cfg = net.NetConfig(m=2, a=1.0, f_max=8)
    params = net.NetParams(c=np.zeros(2), d=np.zeros(2), e=np.zeros(2))
    path = tmp_path / "ck.json"
    net.save_checkpoint(path, params, cfg, sys120)
    with pytest.raises(ValueError):
        net.load_checkpoint(path, other)
