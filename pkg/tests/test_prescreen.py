import numpy as np
import pytest

from swa import Dataset, screen_threshold, screen_top_k
from swa.prescreen import marginal_correlations
from swa.simlab import draw, make_example2


def _dataset(x, y):
    return Dataset(x, y, tuple(f"V{j+1}" for j in range(x.shape[1])))

def naive_corr(x, y):
    out = np.zeros(x.shape[1])
    for j in range(x.shape[1]):
        xs = x[:, j]
        if xs.std() == 0:
            continue
        out[j] = np.corrcoef(xs, y)[0, 1]
    return out

def test_correlations_match_two_pass_oracle():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((40, 12))
    y = rng.standard_normal(40)
    d = _dataset(x, y)
    r, _ = marginal_correlations(d)
    assert np.allclose(r, naive_corr(x, y), atol=1e-12)

def test_top_k_all_columns():
    rng = np.random.default_rng(1)
    d = _dataset(rng.standard_normal((20, 5)), rng.standard_normal(20))
    res = screen_top_k(d, 5)
    assert sorted(res.kept) == [0, 1, 2, 3, 4]

def test_perfect_correlation_ranks_first():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((30, 6))
    d = _dataset(x, x[:, 3].copy())
    res = screen_top_k(d, 2)
    assert res.kept[0] == 3
    assert abs(res.correlations[3]) == pytest.approx(1.0)

def test_constant_column_never_beats_nonzero():
    x = np.column_stack([np.full(20, 7.0), np.linspace(0, 1, 20)])
    y = np.linspace(0, 1, 20) + 0.01 * np.sin(np.arange(20))
    d = _dataset(x, y)
    res = screen_top_k(d, 1)
    assert res.kept == (1,)
    assert res.constant_columns == (0,)
    assert res.correlations[0] == 0.0

def test_threshold_direct():
    rng = np.random.default_rng(3)
    n = 4000
    z = rng.standard_normal((n, 3))
    y = rng.standard_normal(n)
    # build columns with target correlations 0.1, 0.25, 0.5
    targets = (0.1, 0.25, 0.5)
    cols = [t * (y - y.mean()) / y.std() + np.sqrt(1 - t**2) * z[:, i]
            for i, t in enumerate(targets)]
    d = _dataset(np.column_stack(cols), y)
    res = screen_threshold(d, 0.20)
    assert set(res.kept) == {1, 2}

def test_threshold_empty_is_valid():
    rng = np.random.default_rng(4)
    d = _dataset(rng.standard_normal((50, 4)), rng.standard_normal(50))
    r, _ = marginal_correlations(d)
    res = screen_threshold(d, min(0.99, np.abs(r).max() + 1e-6))
    assert res.kept == ()
    assert res.reduced is None

def test_threshold_idempotent():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((60, 8))
    y = x[:, 0] + 0.5 * x[:, 3] + rng.standard_normal(60)
    d = _dataset(x, y)
    first = screen_threshold(d, 0.2)
    again = screen_threshold(first.reduced, 0.2)
    assert len(again.kept) == len(first.kept)

def test_top_k_nesting():
    rng = np.random.default_rng(6)
    d = _dataset(rng.standard_normal((40, 10)), rng.standard_normal(40))
    k3 = set(screen_top_k(d, 3).kept)
    k7 = set(screen_top_k(d, 7).kept)
    assert k3 <= k7

def test_reduced_view_identity():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((30, 6))
    y = x[:, 4] + rng.standard_normal(30) * 0.1
    d = _dataset(x, y)
    res = screen_top_k(d, 2)
    assert res.reduced.source_index[0] == 4
    assert res.reduced.feature_names[0] == "V5"

def test_example2_embedded_recovery():
    # Survival through top-100 screening of p=1000 rises with |beta|: the
    # very strong features (beta >= 4) essentially always pass, and survival
    # is monotone in signal strength.  (With n=80 the |r| cutoff for 100 of
    # 1000 columns sits near 0.19, so beta=1 passes only ~30% of the time.)
    spec = make_example2(p_total=1000)
    trials = 100
    survive = np.zeros(10)
    for seed in range(trials):
        d = draw(spec, seed)
        kept = set(screen_top_k(d, 100).kept)
        for j in range(10):
            survive[j] += j in kept
    rate = survive / trials
    assert rate[8] >= 0.95 and rate[9] >= 0.95
    order = np.argsort(spec.beta[:10])
    assert rate[order[0]] <= rate[order[-1]]
    assert all(rate[order[i]] <= rate[order[i + 2]] + 0.05 for i in range(8))
