import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppmrf.metrics import ConfusionCounts, confusion, metrics, porosity
from dppmrf.synth import PORE_VALUE, SOLID_VALUE, PhantomSpec, corrupt, gen_phantom, make_dataset

# std of N(128, 100^2) clamped to [0, 255], by numerical integration of the clamped density
CLAMPED_STD_128 = 82.175


def test_phantom_values_and_fraction():
    truth, clean = gen_phantom(PhantomSpec(128, 128, 0.25, seed=42))
    assert set(np.unique(truth)) <= {0, 1}
    assert np.all(clean[truth == 1] == PORE_VALUE) and np.all(clean[truth == 0] == SOLID_VALUE)
    assert 0.20 <= truth.mean() <= 0.30
    assert truth.mean() == pytest.approx(0.2451171875)


def test_zero_pore_fraction_is_all_solid():
    truth, clean = gen_phantom(PhantomSpec(32, 32, 0.0))
    assert truth.sum() == 0 and np.all(clean == 200)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), frac=st.floats(0.05, 0.6), size=st.integers(48, 160))
def test_pore_fraction_within_tolerance(seed, frac, size):
    truth, _ = gen_phantom(PhantomSpec(size, size, frac, seed=seed))
    assert abs(truth.mean() - frac) <= 0.05


def test_seeded_and_reproducible():
    spec = PhantomSpec(64, 64, 0.3, seed=7, sp_rate=0.05, gauss_sigma=100, ringing=True)
    a, b = make_dataset(spec), make_dataset(spec)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    other = make_dataset(PhantomSpec(64, 64, 0.3, seed=8, sp_rate=0.05, gauss_sigma=100, ringing=True))
    assert not np.array_equal(a[1], other[1])


def test_corruption_examples():
    clean = np.random.default_rng(0).integers(0, 256, (40, 40)).astype(np.uint8)
    assert np.array_equal(corrupt(clean, PhantomSpec(40, 40)), clean)
    out = corrupt(clean, PhantomSpec(40, 40, sp_rate=1.0))
    assert set(np.unique(out)) <= {0, 255}
    flat = np.full((1000, 1000), 128, dtype=np.uint8)
    noisy = corrupt(flat, PhantomSpec(1000, 1000, 0.0, seed=1, gauss_sigma=100))
    assert 70 <= noisy.std() <= 95
    assert noisy.std() == pytest.approx(CLAMPED_STD_128, abs=0.3)


def test_salt_and_pepper_rate():
    flat = np.full((500, 500), 128, dtype=np.uint8)
    out = corrupt(flat, PhantomSpec(500, 500, sp_rate=0.1, seed=3))
    assert np.mean(out == 0) == pytest.approx(0.05, abs=0.003)
    assert np.mean(out == 255) == pytest.approx(0.05, abs=0.003)


def test_ringing_amplitude():
    flat = np.full((128, 128), 128, dtype=np.uint8)
    out = corrupt(flat, PhantomSpec(128, 128, ringing=True, seed=2)).astype(int) - 128
    assert np.abs(out).max() <= 15 and np.abs(out).max() >= 10


def test_phantom_validation():
    for bad in (dict(width=0), dict(pore_fraction=1.0), dict(sp_rate=1.5), dict(gauss_sigma=-1)):
        with pytest.raises(ValueError):
            PhantomSpec(**bad)


def test_confusion_and_metrics_examples():
    t = np.array([1, 1, 0, 0])
    assert confusion(t, t) == ConfusionCounts(2, 2, 0, 0)
    assert confusion(1 - t, t).tp == 0 and confusion(1 - t, t).tn == 0
    c = confusion(np.array([1, 0, 0, 1]), t)
    assert c == ConfusionCounts(tp=1, tn=1, fp=1, fn=1)
    assert metrics(c) == (0.5, 0.5, 0.5)
    assert metrics(confusion(t, t)) == (1.0, 1.0, 1.0)
    assert metrics(ConfusionCounts(0, 4, 0, 0)).precision is None
    with pytest.raises(ValueError):
        confusion(np.array([1, 0]), np.array([1, 0, 1]))
    with pytest.raises(ValueError):
        confusion(np.array([2, 0]), np.array([1, 0]))


def test_porosity_examples():
    assert porosity(np.ones((3, 3))) == 1.0
    assert porosity(np.array([[1, 0], [0, 1]])) == 0.5
    img = np.zeros((4, 4))
    img[0] = 1
    assert porosity(img) == 0.25


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 400))
def test_metric_invariants(seed, n):
    rng = np.random.default_rng(seed)
    pred, truth = rng.integers(0, 2, n), rng.integers(0, 2, n)
    c = confusion(pred, truth)
    assert c.total == n
    assert metrics(c).accuracy == (c.tp + c.tn) / n
    perm = rng.permutation(n)
    assert confusion(pred[perm], truth[perm]) == c
    assert abs(porosity(pred) - porosity(truth)) <= (c.fp + c.fn) / n + 1e-15
