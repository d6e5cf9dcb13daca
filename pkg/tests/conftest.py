"""Shared fixtures: operator systems, desk-scale datasets, trained nets.

The expensive objects (N=2000 eigendecomposition, trained checkpoints)
are session-scoped so the acceptance tests and module tests share them.
"""

import numpy as np
import pytest

from abelinv import core, data as dat, network as net, training as tr


@pytest.fixture(scope="session")
def sys2000():
    return core.build_system(a=1.0, n=2000, k=50)


@pytest.fixture(scope="session")
def sys500():
    return core.build_system(a=1.0, n=500, k=50)


@pytest.fixture(scope="session")
def sys500_a05():
    return core.build_system(a=0.5, n=500, k=50)


@pytest.fixture(scope="session")
def sys120():
    return core.build_system(a=1.0, n=120, k=16)


@pytest.fixture(scope="session")
def desk_data(sys500):
    spec = dat.DatasetSpec(n_train=100, n_val=50, noise_frac=0.05, a=1.0, seed=0)
    return dat.make_dataset(spec, sys500)


@pytest.fixture(scope="session")
def desk_data_a05(sys500_a05):
    spec = dat.DatasetSpec(n_train=100, n_val=50, noise_frac=0.05, a=0.5, seed=0)
    return dat.make_dataset(spec, sys500_a05)


@pytest.fixture(scope="session")
def trained_a1(sys500, desk_data):
    """Accuracy-profile checkpoint, the desk-scale training protocol."""
    cfg = net.NetConfig(m=10, a=1.0, f_max=25)
    tcfg = tr.TrainConfig(epochs=10, seed=0)
    params, reports = tr.train(desk_data, tcfg, cfg, sys500)
    return params, cfg, reports


@pytest.fixture(scope="session")
def trained_a05(sys500_a05, desk_data_a05):
    cfg = net.NetConfig(m=10, a=0.5, f_max=25)
    tcfg = tr.TrainConfig(epochs=10, seed=0)
    params, reports = tr.train(desk_data_a05, tcfg, cfg, sys500_a05)
    return params, cfg, reports


@pytest.fixture(scope="session")
def cert_profile(sys500):
    """Regularization-heavy checkpoint whose certificate is contractive.

    Trained briefly at a large absolute regularization weight, so the
    layer steps stay small; this is the operating point whose certified
    constants are informative (the accuracy profile's certificate is
    necessarily large, since it genuinely inverts).
    """
    spec = dat.DatasetSpec(n_train=40, n_val=20, noise_frac=0.05, a=1.0, seed=1)
    data = dat.make_dataset(spec, sys500)
    cfg = net.NetConfig(m=10, a=1.0, f_max=25)
    tcfg = tr.TrainConfig(epochs=5, seed=0, init_tau_absolute=0.05)
    params, _ = tr.train(data, tcfg, cfg, sys500)
    b0_rep = core.bias_from_data(data[0][0].y_noisy, sys500)
    return params, cfg, b0_rep
