"""Smoothing filter, bump generator, signal pipeline, dataset persistence."""

import numpy as np
import pytest

from abelinv import core, data as dat


def savgol_oracle(v, window=21, order=5):
    """Per-window least-squares fit; evaluates the boundary polynomials."""
    half = window // 2
    n = v.size
    out = np.empty(n)
    offsets = np.arange(-half, half + 1)
    design = np.vander(offsets, order + 1, increasing=True)
    for i in range(half, n - half):
        coef, *_ = np.linalg.lstsq(design, v[i - half : i + half + 1], rcond=None)
        out[i] = coef[0]
    head_coef, *_ = np.linalg.lstsq(design, v[:window], rcond=None)
    tail_coef, *_ = np.linalg.lstsq(design, v[n - window :], rcond=None)
    for i in range(half):
        out[i] = np.polyval(head_coef[::-1], offsets[i])
        out[n - half + i] = np.polyval(tail_coef[::-1], offsets[half + 1 + i])
    return out


def test_savgol_reproduces_low_degree_polynomials():
    t = np.linspace(0, 1, 200)
    for coeffs in ([1.0], [0.3, -2.0, 1.0], [0.1, 0.0, 1.0, -0.5, 0.2, 0.05]):
        v = np.polyval(coeffs, t)
        out = dat.savgol_smooth(v)
        assert np.abs(out - v).max() <= 1e-9


def test_savgol_constant():
    out = dat.savgol_smooth(np.full(100, 3.7))
    assert np.abs(out - 3.7).max() <= 1e-12


def test_savgol_matches_least_squares_oracle():
    rng = np.random.default_rng(0)
    v = np.linspace(0, 1, 150) + 0.05 * rng.standard_normal(150)
    out = dat.savgol_smooth(v)
    oracle = savgol_oracle(v)
    assert np.abs(out - oracle).max() <= 1e-10


def test_savgol_preconditions():
    with pytest.raises(ValueError):
        dat.savgol_smooth(np.zeros(100), window=20)
    with pytest.raises(ValueError):
        dat.savgol_smooth(np.zeros(100), window=7, order=7)
    with pytest.raises(ValueError):
        dat.savgol_smooth(np.zeros(10))


def test_generate_raw_range_and_determinism():
    v1 = dat.generate_raw(42, 300)
    v2 = dat.generate_raw(42, 300)
    assert np.array_equal(v1, v2)
    assert v1.min() >= 0.0 and v1.max() == 1.0
    assert not np.array_equal(v1, dat.generate_raw(43, 300))
    with pytest.raises(ValueError):
        dat.generate_raw(0, 30)


def test_generate_raw_component_counts():
    counts = set()
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        count, centers, widths, heights = dat._bump_parameters(rng)
        counts.add(count)
        assert np.all((centers > 0.1) & (centers < 0.9))
        assert np.all((widths >= 0.02) & (widths <= 0.2))
        assert np.all((heights >= 0.2) & (heights <= 1.0))
    assert counts == {2, 3, 4}


def test_regularize_boundary_behavior(sys500):
    for seed in range(5):
        raw = dat.generate_raw(seed, sys500.n)
        x = dat.regularize_signal(raw, sys500)
        x_elt = core.to_elt(x, sys500)
        assert abs(x_elt[-1]) <= 1e-2 * np.abs(x_elt).max()


def test_regularize_eigenvector_pass_through(sys500):
    v = sys500.basis_v[:, 1].copy()
    x = dat.regularize_signal(v, sys500)
    expected = np.zeros(sys500.k)
    expected[1] = 1.0
    assert np.linalg.norm(x - expected) / np.linalg.norm(expected) <= 0.05


def test_regularize_near_idempotent(sys500):
    raw = dat.generate_raw(7, sys500.n)
    once = dat.regularize_signal(raw, sys500)
    twice = dat.regularize_signal(core.to_elt(once, sys500), sys500)
    assert np.linalg.norm(twice - once) / np.linalg.norm(once) <= 0.02


def test_make_dataset_counts_and_determinism(tmp_path, sys120):
    spec = dat.DatasetSpec(n_train=7, n_val=3, noise_frac=0.05, a=1.0, seed=5)
    train, val = dat.make_dataset(spec, sys120)
    assert len(train) == 7 and len(val) == 3
    p1 = tmp_path / "d1.csv"
    p2 = tmp_path / "d2.csv"
    dat.write_dataset_csv(p1, train, val, sys120)
    train2, val2 = dat.make_dataset(spec, sys120)
    dat.write_dataset_csv(p2, train2, val2, sys120)
    assert p1.read_bytes() == p2.read_bytes()


def test_make_dataset_noiseless(sys120):
    spec = dat.DatasetSpec(n_train=2, n_val=1, noise_frac=0.0, a=1.0, seed=6)
    train, val = dat.make_dataset(spec, sys120)
    for rec in train + val:
        assert rec.delta == 0.0
        assert np.array_equal(rec.y_noisy, sys120.telt @ rec.x_elt)


def test_records_live_in_retained_span(sys120):
    spec = dat.DatasetSpec(n_train=4, n_val=2, noise_frac=0.05, a=1.0, seed=7)
    train, val = dat.make_dataset(spec, sys120)
    for rec in train + val:
        assert np.array_equal(rec.x_elt, core.to_elt(rec.x_eigen, sys120))
        back = core.to_eigen(rec.x_elt, sys120)
        assert np.abs(back - rec.x_eigen).max() <= 1e-10
        realized = core.norm_h(rec.y_noisy - sys120.telt @ rec.x_elt, sys120.h)
        assert abs(realized - rec.delta) <= 1e-12 * (1.0 + rec.delta)


def test_train_val_streams_disjoint(sys120):
    spec = dat.DatasetSpec(n_train=5, n_val=5, noise_frac=0.05, a=1.0, seed=8)
    train, val = dat.make_dataset(spec, sys120)
    for t in train:
        for v in val:
            assert not np.array_equal(t.x_eigen, v.x_eigen)


def test_corpus_coefficient_decay(desk_data):
    # the corpus must stay dominated by the leading eigenmodes; the narrow
    # detail bumps keep a genuine spectral tail, so the pinned bound is
    # looser than the broad-bump-only regime
    train, val = desk_data
    ratios = [abs(r.x_eigen[10]) / abs(r.x_eigen[0]) for r in train + val]
    assert np.mean(ratios) <= 8e-2


def test_dataset_round_trip(tmp_path, sys120):
    spec = dat.DatasetSpec(n_train=3, n_val=2, noise_frac=0.05, a=1.0, seed=9)
    train, val = dat.make_dataset(spec, sys120)
    path = tmp_path / "data.csv"
    dat.write_dataset_csv(path, train, val, sys120)
    train2, val2 = dat.read_dataset_csv(path, sys120)
    assert len(train2) == 3 and len(val2) == 2
    for a, b in zip(train + val, train2 + val2):
        assert a.record_id == b.record_id
        assert np.array_equal(a.x_eigen, b.x_eigen)
        assert np.array_equal(a.y_noisy, b.y_noisy)
        assert a.delta == b.delta


def test_csv_ingest(tmp_path, sys120):
    rng = np.random.default_rng(10)
    rows = np.abs(rng.standard_normal((6, sys120.n))) + 0.1
    path = tmp_path / "raw.csv"
    np.savetxt(path, rows, delimiter=",")
    spec = dat.DatasetSpec(n_train=4, n_val=2, noise_frac=0.05, a=1.0, seed=11,
                           source="csv-ingest", raw_csv=str(path))
    train, val = dat.make_dataset(spec, sys120)
    assert len(train) + len(val) == 6
    short = dat.DatasetSpec(n_train=10, n_val=2, noise_frac=0.05, a=1.0, seed=11,
                            source="csv-ingest", raw_csv=str(path))
    with pytest.raises(ValueError):
        dat.make_dataset(short, sys120)


def test_spec_validation():
    with pytest.raises(ValueError):
        dat.DatasetSpec(n_train=-1)
    with pytest.raises(ValueError):
        dat.DatasetSpec(noise_frac=-0.1)
    with pytest.raises(ValueError):
        dat.DatasetSpec(source="images")
    with pytest.raises(ValueError):
        dat.DatasetSpec(source="csv-ingest")
