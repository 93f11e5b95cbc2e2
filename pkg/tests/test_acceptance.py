"""Acceptance suite: one test per criterion at its stated tolerance.

Heavy Monte-Carlo reproductions run at their full stated sizes, so the whole
module takes tens of minutes on a single core.  Each test prints one
criterion line with the measured values.

Three criteria are expected to fail and are left red deliberately; see
README ("Known-red acceptance criteria") for the analysis: the exact-s
multipanel recovery rates (criterion 6), the ultra-high-dimension pipeline
(criterion 7), and the global-null family-wise error bound (criterion 10)
assert reproductions that do not follow from the procedures as stated,
each confirmed against independent oracle implementations.
"""

import json
import math
import time
from itertools import combinations

import numpy as np
import pytest

import swa
from swa.cli import main as cli_main
from swa.engine import RSS_FLOOR, SubsampleFit

pytestmark = pytest.mark.acceptance


def report(line: str) -> None:
    print(f"\n[acceptance] {line}")


@pytest.fixture(scope="module")
def table_s30(tmp_path_factory):
    """Shared Table 1/2 reproduction: example2, s=30, m=5000, 1000 trials."""
    out = tmp_path_factory.mktemp("crit12")
    t0 = time.time()
    code = cli_main([
        "simulate", "--scenario", "example2", "--s", "30", "--m", "5000",
        "--trials", "1000", "--adjust", "bonferroni", "--seed", "42",
        "--out", str(out),
    ])
    assert code == 0
    doc = json.loads((out / "capture_table.json").read_text())
    doc["_elapsed_min"] = (time.time() - t0) / 60
    return doc


def test_criterion1_false_alarm_full(table_s30):
    frac = table_s30["zero_false_fraction"]
    report(f"criterion 1 (full): zero-false fraction = {frac:.3f} "
           f"(target [0.93, 0.98]; paper 0.956) "
           f"elapsed {table_s30['_elapsed_min']:.1f} min")
    assert 0.93 <= frac <= 0.98


def test_criterion1_false_alarm_smoke(tmp_path):
    t0 = time.time()
    code = cli_main([
        "simulate", "--scenario", "example2", "--s", "30", "--m", "5000",
        "--trials", "200", "--adjust", "bonferroni", "--seed", "43",
        "--out", str(tmp_path),
    ])
    assert code == 0
    doc = json.loads((tmp_path / "capture_table.json").read_text())
    frac = doc["zero_false_fraction"]
    report(f"criterion 1 (smoke, 200 trials): zero-false = {frac:.3f} "
           f"(target [0.90, 1.00]) elapsed {(time.time()-t0)/60:.1f} min")
    assert 0.90 <= frac <= 1.00


def test_criterion2_true_detection(table_s30):
    cdf = table_s30["true_capture_cdf"]
    c7, c8, c9 = cdf["7"], cdf["8"], cdf["9"]
    report(f"criterion 2: capture 7+={c7:.1f}% (>=99; paper 99.9) "
           f"8+={c8:.1f}% ([93,99]; paper 96.2) 9+={c9:.1f}% ([20,34]; paper 26.7)")
    assert 93.0 <= c8 <= 99.0
    assert c7 >= 99.0
    assert 20.0 <= c9 <= 34.0


def test_criterion3_structural_cutoff():
    spec = swa.make_example2()
    cfg = swa.SwaConfig(s=5, q="auto", m=1000, seed=7)
    table = swa.run_trials(spec, cfg, trials=100)
    report(f"criterion 3: capture cdf[6] = {table.true_capture_cdf[6]} (must be exactly 0)")
    assert table.true_capture_cdf[6] == 0.0


def enumerate_capture(p, p0, s):
    hits = sum(1 for c in combinations(range(p), s) if set(range(p0)) <= set(c))
    return hits / math.comb(p, s)


def test_criterion4_proposition1_bracketing():
    gamma = 0.05
    checked = 0
    for p in range(2, 13):
        for s in range(1, p + 1):
            for p0 in range(1, s + 1):
                alpha = enumerate_capture(p, p0, s)
                assert swa.capture_probability(p, p0, s) == pytest.approx(alpha, abs=1e-12)
                b = swa.m_bounds(p, p0, s, gamma)
                m_exact = 1.0 if alpha >= 1 else math.log(gamma) / math.log1p(-alpha)
                assert b.lower <= m_exact * (1 + 1e-12) + 1e-12
                assert m_exact <= b.upper * (1 + 1e-12) + 1e-12
                checked += 1
    report(f"criterion 4: bracketing + enumeration verified on {checked} (p,p0,s) triples")


# Frozen from a 60-digit mpmath evaluation of the bound formulas.
MP_LOWER = 507328.39316424247
MP_UPPER = 6993971.866890638


def test_criterion5_mbounds_spot_value():
    b = swa.m_bounds(100, 10, 30, 0.05)
    report(f"criterion 5: m bounds = [{b.lower:.6g}, {b.upper:.6g}] "
           f"(oracle [{MP_LOWER:.6g}, {MP_UPPER:.6g}], 1e-6 rel)")
    assert b.lower == pytest.approx(MP_LOWER, rel=1e-6)
    assert b.upper == pytest.approx(MP_UPPER, rel=1e-6)


def _mpa_rate(spec, grid, want_s, want_arm, seeds):
    ok = 0
    for master in range(seeds):
        d = swa.draw(spec, seed=master)
        rep = swa.tune(d, grid, m=5000, seed=master)
        arm = set(rep.upper_arms.get(want_s, ()))
        ok += rep.recommended_s == want_s and want_arm <= arm
    return ok


def test_criterion6_mpa_recovery():
    # Known red: exact-s recovery at >= 80% is not reachable with keep_top=s
    # weight curves; see the ledger analysis. Implemented as stated.
    t0 = time.time()
    ok1 = _mpa_rate(swa.make_example1(), [3, 5, 6, 9, 12, 15], 6, {1, 2}, 100)
    ok2 = _mpa_rate(swa.make_example2(), [5, 10, 20, 30, 40, 50], 30,
                    set(range(3, 10)), 100)
    report(f"criterion 6: MPA exact recovery example1 {ok1}/100, "
           f"example2 {ok2}/100 (targets >= 80) "
           f"elapsed {(time.time()-t0)/60:.1f} min")
    assert ok1 >= 80, f"example1 MPA recovery {ok1}/100 < 80 (known red; see README)"
    assert ok2 >= 80, f"example2 MPA recovery {ok2}/100 < 80 (known red; see README)"


def test_criterion7_ultra_high_pipeline():
    t0 = time.time()
    spec = swa.make_example2(p_total=1000)
    cfg = swa.SwaConfig(s=30, m=5000, seed=42, bonferroni_divisor=100)
    table = swa.run_trials(spec, cfg, trials=200, prescreen_top_k=100)
    zf = table.zero_false_fraction()
    c8 = table.true_capture_cdf[8]
    report(f"criterion 7: ultra-high zero-false = {zf:.3f} (>= 0.90; paper 0.965), "
           f"8+ detection = {c8:.1f}% (>= 90; paper 96.6) "
           f"elapsed {(time.time()-t0)/60:.1f} min")
    # Known red (both halves): the 100 columns surviving the screen are the
    # extreme order statistics of 1000 null correlations, so divisor 100
    # under-corrects the false alarms; and a beta=1 feature survives the
    # screen only ~30% of the time at n=80, capping 8+ detection near 7%.
    assert zf >= 0.90, f"zero-false {zf:.3f} < 0.90 (known red; see README)"
    assert c8 >= 90.0, f"8+ detection {c8:.1f}% < 90% (known red; see README)"


def _naive_scores(fits, keep_top, p):
    order = sorted(range(len(fits)), key=lambda i: (fits[i].rss, i))
    kept = order[:keep_top]
    w = np.zeros(p)
    cnt = np.zeros(p, dtype=int)
    for j in range(p):
        acc = c = 0
        for i in kept:
            t = fits[i].t_by_feature.get(j, 0.0)
            if t != 0.0:
                acc += abs(t) / np.sqrt(max(fits[i].rss, RSS_FLOOR))
                c += 1
        if c:
            w[j], cnt[j] = acc / c, c
    return w, cnt


def test_criterion8_oracle_equivalence():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        p = int(rng.integers(2, 21))
        m = int(rng.integers(1, 51))
        fits = []
        for _ in range(m):
            k = int(rng.integers(1, min(p, 6) + 1))
            cols = rng.choice(p, size=k, replace=False)
            tmap = {int(c): float(rng.normal()) for c in cols}
            tmap = {c: t for c, t in tmap.items() if t != 0.0}
            fits.append(SubsampleFit(cols, float(rng.uniform(0, 5)), tmap))
        keep = int(rng.integers(1, m + 1))
        table = swa.score_features(fits, keep, p)
        w_ref, c_ref = _naive_scores(fits, keep, p)
        assert np.allclose(table.w, w_ref, atol=1e-12)
        assert np.array_equal(table.s_count, c_ref)

    for i in range(200):
        x = rng.standard_normal((20, 5))
        y = rng.standard_normal(20)
        d = swa.Dataset(x, y, tuple(f"V{j}" for j in range(5)))
        f = swa.fit(d, range(5))
        ref = np.linalg.solve(x.T @ x, x.T @ y)
        assert np.allclose(f.coefficients, ref, rtol=1e-8)
    report("criterion 8: scoring oracle (1000 instances, 1e-12) and "
           "normal-equations oracle (200 problems, 1e-8) agree")


def test_criterion9_worker_determinism(tmp_path):
    # simulate
    blobs = []
    for w in ("1", "8"):
        out = tmp_path / f"sim_w{w}"
        code = cli_main(["simulate", "--scenario", "example2", "--s", "10",
                         "--m", "200", "--trials", "12", "--seed", "5",
                         "--workers", w, "--out", str(out)])
        assert code == 0
        blobs.append((out / "capture_table.json").read_bytes())
    assert blobs[0] == blobs[1]
    # select
    d = swa.draw(swa.make_example2(), seed=6)
    xp, yp = str(tmp_path / "x.csv"), str(tmp_path / "y.csv")
    swa.save_csv(d, xp, yp)
    blobs = []
    for w in ("1", "8"):
        out = tmp_path / f"sel_w{w}"
        code = cli_main(["select", "--x", xp, "--y", yp, "--s", "20", "--m",
                         "700", "--seed", "5", "--workers", w, "--out", str(out)])
        assert code == 0
        blobs.append((out / "selection.json").read_bytes())
    assert blobs[0] == blobs[1]
    report("criterion 9: byte-identical JSON for --workers 1 vs 8 (simulate, select)")


def test_criterion10_null_control():
    t0 = time.time()
    spec = swa.make_null(n=80, p=100)
    cfg = swa.SwaConfig(s=10, m=1000, seed=42, adjustment="bonferroni", alpha=0.05)
    table = swa.run_trials(spec, cfg, trials=1000)
    frac_any = 1.0 - table.zero_false_fraction()
    report(f"criterion 10: null-control any-finalist fraction = {frac_any:.3f} "
           f"(<= 0.07) elapsed {(time.time()-t0)/60:.1f} min")
    # Known red: under the global null the score stage selects the members
    # of the luckiest jointly-overfitting subsets, which Bonferroni over the
    # p marginal tests does not cover; an independent naive implementation
    # reproduces the same ~0.2 family-wise error. See README and the tests
    # in test_simlab for the behavior that does hold.
    assert frac_any <= 0.07, f"any-finalist fraction {frac_any:.3f} > 0.07 (known red; see README)"
