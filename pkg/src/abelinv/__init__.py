"""Constrained inversion of the 1D fractional-integration (Abel) operator.

The package builds the discretized operator and its spectral basis
(:mod:`abelinv.core`), evaluates interior-point log-barrier proximity
operators (:mod:`abelinv.barrier`), runs and trains the unrolled
forward-backward network (:mod:`abelinv.network`, :mod:`abelinv.training`),
certifies its robustness through closed-form Lipschitz and averagedness
bounds (:mod:`abelinv.certification`), generates synthetic corpora
(:mod:`abelinv.data`), and compares against classical spectral baselines
(:mod:`abelinv.baselines`).  :mod:`abelinv.cli` ties everything into
reproducible command-line experiments.
"""

from abelinv.core import (
    AbelSystem,
    GridSpec,
    Signal,
    bias_from_data,
    build_basis,
    build_system,
    build_telt,
    load_system,
    make_noisy_data,
    save_system,
    to_eigen,
    to_elt,
)
from abelinv.barrier import Box, MomentSlab, barrier_value, prox, prox_jacobian
from abelinv.network import (
    NetConfig,
    NetParams,
    forward,
    load_checkpoint,
    objective,
    save_checkpoint,
    softplus,
)
from abelinv.certification import (
    Certificate,
    LayerSpectra,
    brute_force_certificate,
    certificate,
)
from abelinv.training import TrainConfig, evaluate, init_params, train
from abelinv.data import DatasetSpec, SignalRecord, make_dataset

__all__ = [
    "AbelSystem",
    "Box",
    "Certificate",
    "DatasetSpec",
    "GridSpec",
    "LayerSpectra",
    "MomentSlab",
    "NetConfig",
    "NetParams",
    "Signal",
    "SignalRecord",
    "TrainConfig",
    "barrier_value",
    "bias_from_data",
    "brute_force_certificate",
    "build_basis",
    "build_system",
    "build_telt",
    "certificate",
    "evaluate",
    "forward",
    "init_params",
    "load_checkpoint",
    "load_system",
    "make_dataset",
    "make_noisy_data",
    "objective",
    "prox",
    "prox_jacobian",
    "save_checkpoint",
    "save_system",
    "softplus",
    "to_eigen",
    "to_elt",
    "train",
]
