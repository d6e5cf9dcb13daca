"""Command-line surface tying the modules into reproducible experiments.

Every command is driven by a flat key=value configuration file; any key
can be overridden by a flag of the same name.  Commands are
deterministic given their resolved configuration (seeds included), and
each run writes the fully-resolved configuration next to its outputs.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from abelinv import baselines as bl
from abelinv import certification as cert
from abelinv import data as dat
from abelinv import network as net
from abelinv import training as tr
from abelinv.core import bias_from_data, build_system
from abelinv.barrier import Box, MomentSlab


class ConfigError(ValueError):
    pass


# key -> (parser, default); parser None means optional float ("" disables)
def _opt_float(s):
    return None if s in ("", "none", "None") else float(s)


CONFIG_KEYS = {
    # operator / discretization
    "a": (float, 1.0),
    "r": (float, 1.0),
    "n": (int, 2000),
    "k": (int, 50),
    # network structure
    "m": (int, 10),
    "q": (float, 2.0),
    "f_max": (int, 25),
    "softplus_beta": (float, 1.0),
    "init": (str, "bias"),
    "eta": (float, 1.0),
    "constraint": (str, "box"),
    "x_min": (float, 0.0),
    "x_max": (float, 1.0),
    "moment_j": (int, 1),
    # dataset
    "n_train": (int, 400),
    "n_val": (int, 200),
    "noise_frac": (float, 0.05),
    "seed": (int, 0),
    "source": (str, "synthetic-mixture"),
    "raw_csv": (str, ""),
    # training
    "epochs": (int, 30),
    "learning_rate": (float, 1e-3),
    "batch_size": (int, 1),
    "init_step_frac": (float, 0.5),
    "init_tau_scale": (float, 0.05),
    "init_tau_absolute": (_opt_float, None),
    "init_mu": (float, 1e-2),
    "init_jitter": (float, 0.1),
    # certification / baselines
    "alpha_points": (int, 64),
    "cutoff_index": (int, 0),   # 0 = grid-search on a selection set
    "tikhonov_tau": (float, 0.0),  # 0 = grid-search
    # paths
    "dataset": (str, "dataset.csv"),
    "checkpoint": (str, "checkpoint.json"),
    "checkpoint_a1": (str, ""),
    "checkpoint_a05": (str, ""),
    "out": (str, ""),
}


def load_config(path: str | None) -> dict:
    cfg = {key: default for key, (_, default) in CONFIG_KEYS.items()}
    if path is None:
        return cfg
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            parser = CONFIG_KEYS[key][0]
            try:
                cfg[key] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return cfg


def apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            parser = CONFIG_KEYS[key][0]
            try:
                cfg[key] = parser(val)
            except ValueError as exc:
                raise ConfigError(f"bad value for --{key}: {exc}") from exc
    return cfg


def echo_config(cfg: dict, anchor_path: str, command: str) -> None:
    """Write the fully-resolved configuration next to the command output."""
    directory = os.path.dirname(os.path.abspath(anchor_path))
    path = os.path.join(directory, f"{command}.config.txt")
    with open(path, "w") as f:
        for key in sorted(cfg):
            val = cfg[key]
            f.write(f"{key} = {'' if val is None else val}\n")


def _require_file(path: str, what: str) -> None:
    if not path:
        raise ConfigError(f"missing path for {what}")
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")


def _system(cfg: dict, a: float | None = None):
    return build_system(a=cfg["a"] if a is None else a, n=cfg["n"], k=cfg["k"], r=cfg["r"])


def _constraint(cfg: dict, system):
    kind = cfg["constraint"]
    if kind == "box":
        return Box(cfg["x_min"], cfg["x_max"])
    if kind == "moment":
        return MomentSlab.from_grid(system.grid, cfg["moment_j"])
    if kind == "none":
        return None
    raise ConfigError(f"unknown constraint {kind!r}")


def _net_config(cfg: dict, system, a: float | None = None) -> net.NetConfig:
    return net.NetConfig(
        m=cfg["m"],
        a=cfg["a"] if a is None else a,
        r=cfg["r"],
        q=cfg["q"],
        f_max=cfg["f_max"],
        softplus_beta=cfg["softplus_beta"],
        init=cfg["init"],
        eta=np.full(cfg["m"], cfg["eta"]),
        constraint=_constraint(cfg, system),
    )


def _train_config(cfg: dict) -> tr.TrainConfig:
    return tr.TrainConfig(
        epochs=cfg["epochs"],
        learning_rate=cfg["learning_rate"],
        batch_size=cfg["batch_size"],
        seed=cfg["seed"],
        init_step_frac=cfg["init_step_frac"],
        init_tau_scale=cfg["init_tau_scale"],
        init_tau_absolute=cfg["init_tau_absolute"],
        init_mu=cfg["init_mu"],
        init_jitter=cfg["init_jitter"],
    )


def _dataset_spec(cfg: dict) -> dat.DatasetSpec:
    return dat.DatasetSpec(
        n_train=cfg["n_train"],
        n_val=cfg["n_val"],
        noise_frac=cfg["noise_frac"],
        a=cfg["a"],
        seed=cfg["seed"],
        source=cfg["source"],
        raw_csv=cfg["raw_csv"] or None,
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_gen_data(cfg: dict) -> int:
    out = cfg["out"] or cfg["dataset"]
    spec = _dataset_spec(cfg)
    if spec.source == "csv-ingest":
        _require_file(spec.raw_csv, "ingest csv")
    system = _system(cfg)
    train, val = dat.make_dataset(spec, system)
    dat.write_dataset_csv(out, train, val, system)
    echo_config(cfg, out, "gen-data")
    records = train + val
    decay = [abs(r.x_eigen[10]) / abs(r.x_eigen[0]) for r in records if system.k > 10 and r.x_eigen[0] != 0]
    print(f"wrote {len(records)} records ({len(train)} train / {len(val)} val) to {out}")
    if decay:
        print(f"coefficient decay |x_10|/|x_0|: mean {np.mean(decay):.3e}")
    print(f"realized noise level delta: mean {np.mean([r.delta for r in records]):.6g}")
    return 0


def _load_dataset(cfg: dict, system):
    _require_file(cfg["dataset"], "dataset")
    return dat.read_dataset_csv(cfg["dataset"], system)


def cmd_train(cfg: dict) -> int:
    system = _system(cfg)
    train_records, val_records = _load_dataset(cfg, system)
    netcfg = _net_config(cfg, system)
    tcfg = _train_config(cfg)
    rng = np.random.default_rng(tcfg.seed)
    rho_ref = tr.reference_ratio(train_records, netcfg, system)
    params0 = tr.init_params(netcfg, system, rho_ref, tcfg, rng)

    b0_val = [bias_from_data(r.y_noisy, system) for r in val_records]
    b0_rep = bias_from_data(train_records[0].y_noisy, system)
    rho_rep = net.noise_ratio_factor(b0_rep, netcfg, system)
    lip1, lip2 = tr._epoch_certificate(params0, netcfg, system, rho_rep)
    initial = tr.EpochReport(
        epoch=0,
        train_loss=np.nan,
        val_loss=tr.validation_loss(params0, val_records, b0_val, netcfg, system),
        lipschitz_case1=lip1,
        lipschitz_case2=lip2,
        seconds=0.0,
    )
    best, reports = tr.train((train_records, val_records), tcfg, netcfg, system, params=params0)
    ck_path = cfg["checkpoint"]
    net.save_checkpoint(ck_path, best, netcfg, system)
    metrics_path = cfg["out"] or os.path.splitext(ck_path)[0] + ".metrics.csv"
    tr.write_metrics_csv(metrics_path, [initial] + reports)
    echo_config(cfg, ck_path, "train")
    last_val = reports[-1].val_loss if reports else initial.val_loss
    print(f"trained {tcfg.epochs} epochs (m={netcfg.m}); best val loss {min([initial.val_loss] + [r.val_loss for r in reports]):.6g}")
    print(f"checkpoint: {ck_path}\nmetrics: {metrics_path}")
    return 0


def cmd_certify(cfg: dict) -> int:
    system = _system(cfg)
    _require_file(cfg["checkpoint"], "checkpoint")
    params, netcfg = net.load_checkpoint(cfg["checkpoint"], system)
    train_records, _ = _load_dataset(cfg, system)
    b0 = bias_from_data(train_records[0].y_noisy, system)
    spectra = net.spectra_of(params, netcfg, system, b0=b0)
    alphas = cert.default_alpha_grid(cfg["alpha_points"])
    report = cert.certificate(spectra, alphas)
    out = cfg["out"] or os.path.splitext(cfg["checkpoint"])[0] + ".certificate.json"
    cert.save_certificate(out, report)
    echo_config(cfg, out, "certify")
    print(f"layers m={report.m}, retained modes K={report.k}, eta==1: {report.eta_is_one}")
    print(f"lipschitz_virtual   = {report.lipschitz_virtual:.6g}  (attained at p={report.attaining.get('a_1m')})")
    print(f"lipschitz_pair      = {report.lipschitz_pair:.6g}  (attained at p={report.attaining.get('a_bar_1m')})")
    print(f"lipschitz_case1     = {report.lipschitz_case1:.6g}  (x0 = 0,  attained at p={report.attaining.get('a_hat1_m')})")
    print(f"lipschitz_case2     = {report.lipschitz_case2:.6g}  (x0 = b0, attained at p={report.attaining.get('a_hat2_m')})")
    print(f"vartheta_fixed      = {report.vartheta_fixed:.6g}")
    print(f"vartheta_data       = {report.vartheta_data:.6g}")
    for family in ("virtual", "pair", "case1", "case2"):
        alpha = report.smallest_averaged_alpha(family)
        print(f"smallest averaged alpha [{family}]: {'none' if alpha is None else f'{alpha:.4f}'}")
    print(f"certificate: {out}")
    return 0


def _read_signal_file(path: str, n: int) -> np.ndarray:
    vals = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            vals.extend(float(tok) for tok in line.replace(",", " ").split())
    arr = np.asarray(vals, dtype=float)
    if arr.size != n:
        raise ValueError(f"signal file must hold {n} samples, got {arr.size}")
    return arr


def cmd_invert(cfg: dict, signal_path: str) -> int:
    system = _system(cfg)
    _require_file(cfg["checkpoint"], "checkpoint")
    _require_file(signal_path, "signal file")
    params, netcfg = net.load_checkpoint(cfg["checkpoint"], system)
    y = _read_signal_file(signal_path, system.n)
    b0 = bias_from_data(y, system)
    x, _ = net.forward(net.initial_state(b0, netcfg), b0, params, netcfg, system)
    x_elt = system.basis_v @ x
    out = cfg["out"] or os.path.splitext(signal_path)[0] + ".reconstruction.csv"
    with open(out, "w") as f:
        f.write("t,x\n")
        for t, v in zip(system.grid.nodes, x_elt):
            f.write(f"{t:.17g},{v:.17g}\n")
    echo_config(cfg, out, "invert")
    print(f"reconstruction: {out}")
    return 0


def cmd_compare(cfg: dict) -> int:
    deltas = (0.1, 0.05, 0.01)
    a_values = {1.0: cfg["checkpoint_a1"], 0.5: cfg["checkpoint_a05"]}
    for a, ck in a_values.items():
        _require_file(ck, f"checkpoint for a={a}")

    eval_sets = {}
    methods = {}
    nets = {}
    cutoffs = {}
    taus = {}
    for a, ck in a_values.items():
        system = _system(cfg, a=a)
        params, netcfg = net.load_checkpoint(ck, system)
        nets[a] = (params, netcfg, system)
        for delta in deltas:
            sel_spec = dat.DatasetSpec(n_train=0, n_val=cfg["n_val"], noise_frac=delta,
                                       a=a, seed=cfg["seed"] + 1)
            _, select = dat.make_dataset(sel_spec, system)
            eval_spec = dat.DatasetSpec(n_train=0, n_val=cfg["n_val"], noise_frac=delta,
                                        a=a, seed=cfg["seed"] + 2)
            _, records = dat.make_dataset(eval_spec, system)
            eval_sets[(a, delta)] = (records, system)
            cutoffs[(a, delta)] = cfg["cutoff_index"] or bl.select_cutoff(select, system)
            taus[(a, delta)] = cfg["tikhonov_tau"] or bl.select_tau(select, system)

    def network_method(y, system, a, delta):
        params, netcfg, _ = nets[a]
        b0 = bias_from_data(y, system)
        x, _ = net.forward(net.initial_state(b0, netcfg), b0, params, netcfg, system)
        return x

    methods["network"] = network_method
    methods["spectral-cutoff"] = lambda y, s, a, d: bl.spectral_cutoff_inverse(y, cutoffs[(a, d)], s)
    methods["tikhonov"] = lambda y, s, a, d: bl.tikhonov_inverse(y, taus[(a, d)], s)

    rows = bl.compare(eval_sets, methods)
    out = cfg["out"] or "comparison.csv"
    bl.write_comparison_csv(out, rows)
    echo_config(cfg, out, "compare")
    for row in rows:
        print(f"a={row['a']:<4} delta={row['delta']:<5} {row['method']:<16} error={row['error']:.4f}")
    print(f"table: {out}")
    return 0


def cmd_eval(cfg: dict) -> int:
    system = _system(cfg)
    _require_file(cfg["checkpoint"], "checkpoint")
    params, netcfg = net.load_checkpoint(cfg["checkpoint"], system)
    _, val_records = _load_dataset(cfg, system)
    err = tr.evaluate(params, val_records, netcfg, system)
    print(f"mean relative error over {len(val_records)} validation records: {err:.6g}")
    if cfg["out"]:
        with open(cfg["out"], "w") as f:
            f.write(f"mean_relative_error,{err:.17g}\n")
        echo_config(cfg, cfg["out"], "eval")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abelinv",
                                     description="Unrolled forward-backward Abel inversion")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "gen-data": "synthesize a dataset CSV",
        "train": "train the unrolled network on a dataset",
        "certify": "compute the robustness certificate of a checkpoint",
        "invert": "invert a single measured signal",
        "compare": "run the baseline comparison grid",
        "eval": "evaluate a checkpoint on a dataset's validation split",
    }
    for name, descr in commands.items():
        p = sub.add_parser(name, help=descr)
        p.add_argument("--config", default=None, help="key = value configuration file")
        for key in CONFIG_KEYS:
            p.add_argument(f"--{key}", default=None, metavar="V")
        if name == "invert":
            p.add_argument("signal", help="file with N measured samples")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        if args.command == "gen-data":
            return cmd_gen_data(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "invert":
            return cmd_invert(cfg, args.signal)
        if args.command == "compare":
            return cmd_compare(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error config: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, OSError) as exc:
        print(f"error io: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # numerical and contract failures
        print(f"error runtime: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
