"""Scenario generators and the Monte-Carlo trial runner.

Scenarios draw y = X beta + sigma * z with standard-normal covariates; an
optional AR-style block gives cor(x_i, x_j) = rho^|i-j| on the leading
columns.  The trial runner repeats draw -> (optional prescreen) -> select
and aggregates how many true/false features end up as finalists.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .engine import SwaConfig, select
from .errors import SwaError
from .parallel import run_tasks
from .prescreen import screen_top_k
from .streams import SCENARIO_STREAM, TRIAL_STREAM, child_seeds, substream

__all__ = [
    "ScenarioSpec",
    "CaptureTable",
    "make_example1",
    "make_example2",
    "make_null",
    "draw",
    "run_trials",
]

EXAMPLE2_BETA = (0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0)


@dataclass(frozen=True)
class ScenarioSpec:
    """Generating model for one simulation scenario.

    ``beta`` has zeros for nuisance features; ``correlated_block`` is the
    number of leading columns carrying the rho^|i-j| structure (one more
    than the sparsity of the standard correlated design).
    """

    n: int
    p: int
    beta: np.ndarray
    rho: float = 0.0
    sigma: float = 1.0
    correlated_block: int = 11

    def __post_init__(self) -> None:
        beta = np.ascontiguousarray(self.beta, dtype=np.float64)
        if beta.shape != (self.p,):
            raise ValueError(f"beta must have length p={self.p}, got {beta.shape}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0,1), got {self.rho}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @property
    def p0(self) -> int:
        return int(np.count_nonzero(self.beta))

    def true_features(self) -> frozenset[int]:
        return frozenset(int(j) for j in np.flatnonzero(self.beta))


def make_example1() -> ScenarioSpec:
    """Three true features (2, 3, 5) among 100 columns, n=20, iid noise."""
    beta = np.zeros(100)
    beta[:3] = (2.0, 3.0, 5.0)
    return ScenarioSpec(n=20, p=100, beta=beta)


def make_example2(p_total: int = 100, rho: float = 0.0, sigma: float = 1.0) -> ScenarioSpec:
    """Ten true features from extremely weak (0.1) to very strong (5), n=80.

    ``p_total=1000`` gives the ultra-high-dimension variant.
    """
    if p_total < 10:
        raise ValueError(f"p_total must be at least 10, got {p_total}")
    beta = np.zeros(p_total)
    beta[:10] = EXAMPLE2_BETA
    return ScenarioSpec(n=80, p=p_total, beta=beta, rho=rho, sigma=sigma)


def make_null(n: int = 80, p: int = 100, sigma: float = 1.0) -> ScenarioSpec:
    """Pure-noise control: beta = 0, so every finalist is a false alarm."""
    return ScenarioSpec(n=n, p=p, beta=np.zeros(p), sigma=sigma)


def draw(spec: ScenarioSpec, seed: int) -> Dataset:
    """Draw one dataset from the scenario, deterministically per seed."""
    rng = substream(seed, SCENARIO_STREAM, 0)
    x = rng.standard_normal((spec.n, spec.p))
    if spec.rho > 0.0 and spec.correlated_block > 1:
        b = min(spec.correlated_block, spec.p)
        idx = np.arange(b)
        cov = spec.rho ** np.abs(idx[:, None] - idx[None, :])
        x[:, :b] = x[:, :b] @ np.linalg.cholesky(cov).T
    y = x @ spec.beta + spec.sigma * rng.standard_normal(spec.n)
    names = tuple(f"V{j + 1}" for j in range(spec.p))
    return Dataset(x=x, y=y, feature_names=names)


@dataclass(frozen=True)
class CaptureTable:
    """Aggregate detection record over independent trials.

    ``true_capture_cdf[k]`` is the percentage of trials whose finalists
    include at least k true features (reported for every k = 0..p0);
    ``false_count_histogram`` counts trials by their exact number of false
    finalists and sums to ``trials``.
    """

    trials: int
    true_capture_cdf: dict[int, float] = field(default_factory=dict)
    false_count_histogram: dict[int, int] = field(default_factory=dict)

    def zero_false_fraction(self) -> float:
        return self.false_count_histogram.get(0, 0) / self.trials

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "true_capture_cdf": {str(k): v for k, v in self.true_capture_cdf.items()},
            "false_count_histogram": {
                str(k): v for k, v in self.false_count_histogram.items()
            },
            "zero_false_fraction": self.zero_false_fraction(),
        }


def _run_trial(
    spec: ScenarioSpec, cfg: SwaConfig, prescreen_k: int | None, trial: int
) -> tuple[int, int]:
    data_seed, engine_seed = child_seeds(cfg.seed, TRIAL_STREAM, trial, 2)
    ds = draw(spec, data_seed)
    if prescreen_k is not None:
        ds = screen_top_k(ds, prescreen_k).reduced
    result = select(ds, dataclasses.replace(cfg, seed=engine_seed), workers=1)
    finalists = set(result.finalist_indices())
    true = spec.true_features()
    return len(finalists & true), len(finalists - true)


def _trial_chunk(spec, cfg, prescreen_k, lo: int, hi: int) -> list[tuple[int, int]]:
    out = []
    for t in range(lo, hi):
        try:
            out.append(_run_trial(spec, cfg, prescreen_k, t))
        except SwaError as exc:
            raise type(exc)(f"trial {t}: {exc}") from exc
    return out


def run_trials(
    spec: ScenarioSpec,
    cfg: SwaConfig,
    trials: int,
    prescreen_top_k: int | None = None,
    workers: int = 1,
) -> CaptureTable:
    """Repeat draw/screen/select over independent per-trial substreams.

    ``cfg.seed`` acts as the master seed; any single trial can be replayed
    in isolation.  A failing trial aborts the whole run with its index.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if prescreen_top_k is not None and not 1 <= prescreen_top_k <= spec.p:
        raise ValueError(f"prescreen_top_k must be in 1..p={spec.p}")
    chunk = 16
    bounds = [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
    chunks = run_tasks(
        _trial_chunk,
        [(spec, cfg, prescreen_top_k, lo, hi) for lo, hi in bounds],
        workers,
    )
    results = [r for c in chunks for r in c]

    p0 = spec.p0
    captured = np.array([r[0] for r in results])
    false_counts = [r[1] for r in results]
    cdf = {
        k: 100.0 * float(np.count_nonzero(captured >= k)) / trials
        for k in range(p0 + 1)
    }
    hist: dict[int, int] = {}
    for c in false_counts:
        hist[c] = hist.get(c, 0) + 1
    return CaptureTable(
        trials=trials,
        true_capture_cdf=cdf,
        false_count_histogram=dict(sorted(hist.items())),
    )
