"""Subsampling-winner selection engine.

The engine repeatedly regresses the response on random column subsets,
rates each feature by how strongly it shows up in the best-fitting
submodels, and then runs one confirmatory least-squares fit on the top
scorers.  Scores for feature j average |t| / sqrt(RSS) over the kept
submodels in which j appeared with a nonzero t.

Every stochastic stage draws from a substream fully determined by
(seed, task index), so results are reproducible and independent of the
number of workers.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from . import ols
from .dataset import Dataset
from .errors import NumericalError
from .parallel import run_tasks
from .streams import SUBSAMPLE_STREAM, substream

__all__ = [
    "SwaConfig",
    "SubsampleFit",
    "ScoreTable",
    "FeatureResult",
    "SelectionResult",
    "draw_subsample",
    "run_subsamples",
    "score_features",
    "compute_scores",
    "pick_semifinalists",
    "adjust",
    "select",
]

# Floor applied to RSS inside the scoring square root; guards the 1/sqrt(RSS)
# singularity of near-perfect submodel fits.
RSS_FLOOR = 1e-12

# Subsample tasks are processed in fixed-size chunks so numerical results do
# not depend on how many workers the chunks are spread over.
_CHUNK = 512

# Cholesky fast path bails out to the pivoted-QR fit below this diagonal ratio.
_CHOL_RTOL = 1e-7

ADJUSTMENTS = ("bonferroni", "bh", "none")


@dataclass(frozen=True)
class SwaConfig:
    """Run parameters for one selection pass.

    ``q`` (semifinalist count), ``keep_top`` (number of best submodels that
    feed the scores) and ``bonferroni_divisor`` accept "auto": q and
    keep_top default to s, the divisor to the number of candidate features
    entering the run (post-screening).
    """

    s: int
    m: int = 5000
    q: int | str = "auto"
    keep_top: int | str = "auto"
    adjustment: str = "bonferroni"
    alpha: float = 0.05
    bonferroni_divisor: int | str = "auto"
    stepwise_final: bool = False
    stepwise_subsample: bool = False
    intercept: bool = False
    seed: int = 42

    def __post_init__(self) -> None:
        if self.s < 1:
            raise ValueError(f"s must be positive, got {self.s}")
        if self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")
        for name in ("q", "keep_top", "bonferroni_divisor"):
            v = getattr(self, name)
            if not (v == "auto" or (isinstance(v, int) and v >= 1)):
                raise ValueError(f'{name} must be a positive integer or "auto"')
        if self.adjustment not in ADJUSTMENTS:
            raise ValueError(f"adjustment must be one of {ADJUSTMENTS}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    def resolved_q(self) -> int:
        return self.s if self.q == "auto" else int(self.q)

    def resolved_keep_top(self) -> int:
        k = self.s if self.keep_top == "auto" else int(self.keep_top)
        return min(k, self.m)

    def resolved_divisor(self, p: int) -> int:
        return p if self.bonferroni_divisor == "auto" else int(self.bonferroni_divisor)

    def validate_for(self, d: Dataset) -> None:
        if self.s > d.p:
            raise NumericalError(f"s={self.s} exceeds p={d.p}")
        if self.s + int(self.intercept) >= d.n:
            raise NumericalError(
                f"s={self.s} leaves no residual degrees of freedom for n={d.n}"
            )
        q = self.resolved_q()
        if q > d.p:
            raise NumericalError(f"q={q} exceeds p={d.p}")
        if q + int(self.intercept) >= d.n:
            raise NumericalError(
                f"q={q} semifinalists cannot be refit with n={d.n} rows"
            )


@dataclass(frozen=True)
class SubsampleFit:
    """One subsample analysis: drawn columns, fit RSS, and nonzero t-values."""

    columns: np.ndarray
    rss: float
    t_by_feature: dict[int, float]


@dataclass(frozen=True)
class ScoreTable:
    """Per-feature scores over the kept submodels.

    ``w[j]`` is zero whenever feature j never appeared (``s_count[j] == 0``);
    ``kept_rss`` holds the RSS of the kept submodels in ascending order.
    """

    w: np.ndarray
    s_count: np.ndarray
    kept_rss: np.ndarray


@dataclass(frozen=True)
class FeatureResult:
    index: int
    name: str
    coefficient: float
    t: float
    p_raw: float
    p_adjusted: float


@dataclass(frozen=True)
class SelectionResult:
    """Finalists plus full provenance of how they were chosen.

    Feature indices are reported in the coordinates of the original
    (unscreened) dataset when the input was a screened view.
    """

    finalists: tuple[FeatureResult, ...]
    semifinalists: tuple[int, ...]
    semifinalist_details: tuple[dict, ...]
    score_table: ScoreTable
    config: SwaConfig
    dataset_fingerprint: str
    provenance: dict = field(default_factory=dict)

    def finalist_indices(self) -> tuple[int, ...]:
        return tuple(f.index for f in self.finalists)

    def to_json_dict(self) -> dict:
        cfg = dataclasses.asdict(self.config)
        return {
            "config": cfg,
            "dataset_fingerprint": self.dataset_fingerprint,
            "provenance": self.provenance,
            "semifinalists": list(self.semifinalist_details),
            "finalists": [dataclasses.asdict(f) for f in self.finalists],
            "kept_rss": {
                "count": int(self.score_table.kept_rss.size),
                "min": float(self.score_table.kept_rss[0]),
                "median": float(np.median(self.score_table.kept_rss)),
                "max": float(self.score_table.kept_rss[-1]),
            },
        }


def score_table_csv(table: ScoreTable, d: Dataset) -> str:
    """Render the full score table as CSV (index, name, w, s_count), ranked
    by weight descending with original feature identities."""
    import csv
    import io

    order = np.lexsort((np.arange(table.w.size), -table.w))
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["index", "name", "w", "s_count"])
    for j in order:
        w.writerow([
            d.original_index(int(j)),
            d.feature_names[int(j)],
            repr(float(table.w[j])),
            int(table.s_count[j]),
        ])
    return buf.getvalue()


def draw_subsample(p: int, s: int, task_index: int, seed: int) -> np.ndarray:
    """Draw s distinct column indices from {0..p-1}, uniformly without
    replacement, fully determined by (seed, task_index)."""
    if not 1 <= s <= p:
        raise ValueError(f"need 1 <= s <= p, got s={s}, p={p}")
    rng = substream(seed, SUBSAMPLE_STREAM, task_index)
    return rng.choice(p, size=s, replace=False)


# ---------------------------------------------------------------------------
# Fast subsample fitting.
#
# The ranking stage needs only RSS per subsample (t-values matter just for
# the kept submodels), so the hot loop solves the normal equations from a
# precomputed Gram matrix and falls back to the robust pivoted-QR fit
# whenever the Cholesky factor looks ill-conditioned.
# ---------------------------------------------------------------------------


class _GramPack:
    __slots__ = ("g", "xty", "yty", "n", "off", "use_full")

    def __init__(self, d: Dataset, intercept: bool):
        self.n = d.n
        self.off = 1 if intercept else 0
        if intercept:
            xe = np.empty((d.n, d.p + 1))
            xe[:, 0] = 1.0
            xe[:, 1:] = d.x
        else:
            xe = d.x
        # Precomputing the full Gram matrix pays off until p*p dominates.
        self.use_full = xe.shape[1] <= 2048
        if self.use_full:
            self.g = xe.T @ xe
        else:
            self.g = xe
        self.xty = xe.T @ d.y
        self.yty = float(d.y @ d.y)

    def sub_gram(self, design_cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.use_full:
            g = self.g[design_cols[:, None], design_cols[None, :]]
        else:
            xs = self.g[:, design_cols]
            g = xs.T @ xs
        return g, self.xty[design_cols]


def _fast_fit(pack: _GramPack, design_cols: np.ndarray):
    """Solve the normal equations for one column subset.

    Returns (beta, rss, chol_factor) or None when the subset is too
    ill-conditioned for the fast path.
    """
    g, xty = pack.sub_gram(design_cols)
    c, beta, info = lapack.dposv(g, xty, lower=0)
    if info != 0:
        return None
    diag = np.abs(np.diagonal(c))
    if diag.min() <= _CHOL_RTOL * diag.max():
        return None
    rss = pack.yty - 2.0 * float(beta @ xty) + float(beta @ (g @ beta))
    return beta, max(rss, 0.0), c


def _t_values(pack: _GramPack, beta: np.ndarray, rss: float, chol: np.ndarray) -> np.ndarray:
    df = pack.n - beta.size
    ginv, info = lapack.dpotri(chol, lower=0)
    if info != 0:
        raise NumericalError("failed to invert normal-equations factor")
    sigma2 = rss / df
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / np.sqrt(sigma2 * np.diagonal(ginv))
    return np.nan_to_num(t, nan=0.0, posinf=np.inf, neginf=-np.inf)


def _design_cols(cols: np.ndarray, intercept: bool) -> np.ndarray:
    if not intercept:
        return cols
    return np.concatenate(([0], cols + 1))


def _robust_subsample_fit(d: Dataset, cfg: SwaConfig, cols: np.ndarray) -> SubsampleFit:
    if cfg.stepwise_subsample:
        f = ols.stepwise_backward(d, cols, threshold=cfg.alpha, intercept=cfg.intercept)
    else:
        f = ols.fit(d, cols, intercept=cfg.intercept)
    tmap = {
        int(j): float(t)
        for j, t in zip(f.columns, f.t_values)
        if t != 0.0
    }
    return SubsampleFit(columns=np.asarray(cols), rss=f.rss, t_by_feature=tmap)


def _fit_task(d: Dataset, cfg: SwaConfig, pack: _GramPack, task: int) -> SubsampleFit:
    cols = draw_subsample(d.p, cfg.s, task, cfg.seed)
    if cfg.stepwise_subsample:
        return _robust_subsample_fit(d, cfg, cols)
    res = _fast_fit(pack, _design_cols(cols, cfg.intercept))
    if res is None:
        return _robust_subsample_fit(d, cfg, cols)
    beta, rss, chol = res
    t = _t_values(pack, beta, rss, chol)
    off = pack.off
    tmap = {int(j): float(t[i + off]) for i, j in enumerate(cols) if t[i + off] != 0.0}
    return SubsampleFit(columns=cols, rss=rss, t_by_feature=tmap)


def _subsample_chunk(d: Dataset, cfg: SwaConfig, start: int, stop: int) -> list[SubsampleFit]:
    pack = _GramPack(d, cfg.intercept)
    return [_fit_task(d, cfg, pack, t) for t in range(start, stop)]


def _rss_chunk(d: Dataset, cfg: SwaConfig, start: int, stop: int):
    """RSS-only scan; t-values are recomputed later for the kept tasks."""
    pack = _GramPack(d, cfg.intercept)
    cols_out = np.empty((stop - start, cfg.s), dtype=np.intp)
    rss_out = np.empty(stop - start)
    for t in range(start, stop):
        cols = draw_subsample(d.p, cfg.s, t, cfg.seed)
        res = _fast_fit(pack, _design_cols(cols, cfg.intercept))
        if res is None:
            rss_out[t - start] = _robust_subsample_fit(d, cfg, cols).rss
        else:
            rss_out[t - start] = res[1]
        cols_out[t - start] = cols
    return cols_out, rss_out


def _chunk_bounds(m: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + _CHUNK, m)) for lo in range(0, m, _CHUNK)]


def run_subsamples(d: Dataset, cfg: SwaConfig, workers: int = 1) -> list[SubsampleFit]:
    """Run the m subsample analyses; results come back in task order."""
    cfg.validate_for(d)
    chunks = run_tasks(
        _subsample_chunk,
        [(d, cfg, lo, hi) for lo, hi in _chunk_bounds(cfg.m)],
        workers,
    )
    return [f for chunk in chunks for f in chunk]


def score_features(fits, keep_top: int, p: int) -> ScoreTable:
    """Score every feature from the keep_top lowest-RSS submodels.

    Ties on RSS are broken by task order.  For each feature the score is
    the mean of |t| / sqrt(RSS) over kept submodels where it appeared with
    a nonzero t; features never appearing score zero.
    """
    if not fits:
        raise ValueError("no subsample fits to score")
    if keep_top < 1:
        raise ValueError("keep_top must be >= 1")
    rss = np.array([f.rss for f in fits])
    kept = np.argsort(rss, kind="stable")[: min(keep_top, len(fits))]
    w_sum = np.zeros(p)
    s_cnt = np.zeros(p, dtype=np.int64)
    for i in kept:
        f = fits[i]
        inv_root = 1.0 / np.sqrt(max(f.rss, RSS_FLOOR))
        for j, t in f.t_by_feature.items():
            if t != 0.0:
                w_sum[j] += abs(t) * inv_root
                s_cnt[j] += 1
    with np.errstate(invalid="ignore"):
        w = np.where(s_cnt > 0, w_sum / np.maximum(s_cnt, 1), 0.0)
    return ScoreTable(w=w, s_count=s_cnt, kept_rss=rss[kept])


def _score_via_scan(d: Dataset, cfg: SwaConfig, workers: int) -> ScoreTable:
    """Equivalent to score_features(run_subsamples(...)) without computing
    t-values for submodels that cannot enter the kept set."""
    chunks = run_tasks(
        _rss_chunk,
        [(d, cfg, lo, hi) for lo, hi in _chunk_bounds(cfg.m)],
        workers,
    )
    cols_all = np.concatenate([c for c, _ in chunks])
    rss_all = np.concatenate([r for _, r in chunks])
    keep = cfg.resolved_keep_top()
    kept = np.sort(np.argsort(rss_all, kind="stable")[: min(keep, cfg.m)])
    pack = _GramPack(d, cfg.intercept)
    fits = [_fit_task(d, cfg, pack, int(i)) for i in kept]
    return score_features(fits, keep, d.p)


def compute_scores(d: Dataset, cfg: SwaConfig, workers: int = 1) -> ScoreTable:
    """Subsample, rank submodels and score features (no finalist stage)."""
    cfg.validate_for(d)
    if cfg.stepwise_subsample:
        fits = run_subsamples(d, cfg, workers)
        return score_features(fits, cfg.resolved_keep_top(), d.p)
    return _score_via_scan(d, cfg, workers)


def pick_semifinalists(table: ScoreTable, q: int) -> np.ndarray:
    """Indices of the q largest scores, descending; ties favor smaller index."""
    p = table.w.size
    if not 1 <= q <= p:
        raise ValueError(f"need 1 <= q <= p, got q={q}, p={p}")
    order = np.lexsort((np.arange(p), -table.w))
    return order[:q]


def adjust(p_values, method: str, divisor: int) -> np.ndarray:
    """Multiplicity adjustment: bonferroni, bh (step-up), or none."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("p-values must lie in [0,1]")
    if method not in ADJUSTMENTS:
        raise ValueError(f"unknown adjustment {method!r}")
    if method == "none":
        return p.copy()
    if divisor < 1:
        raise ValueError("divisor must be a positive integer")
    if method == "bonferroni":
        if divisor < p.size:
            raise ValueError(
                f"bonferroni divisor {divisor} is smaller than the number "
                f"of p-values ({p.size})"
            )
        return np.minimum(1.0, p * divisor)
    # Benjamini-Hochberg step-up: adjusted p_(k) = min over j >= k of
    # p_(j) * divisor / j, clamped to [0,1].
    order = np.argsort(p, kind="stable")
    ranked = p[order] * divisor / np.arange(1, p.size + 1)
    tail_min = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty_like(p)
    out[order] = np.minimum(1.0, tail_min)
    return out


def select(d: Dataset, cfg: SwaConfig, workers: int = 1) -> SelectionResult:
    """Full selection pass: subsample, score, shortlist, confirmatory fit.

    Finalists are the semifinalists whose multiplicity-adjusted p-value from
    the confirmatory fit is at most ``cfg.alpha``.  An empty finalist set is
    a valid outcome.
    """
    table = compute_scores(d, cfg, workers)
    semis = pick_semifinalists(table, cfg.resolved_q())
    if cfg.stepwise_final:
        final_fit = ols.stepwise_backward(
            d, semis, threshold=cfg.alpha, intercept=cfg.intercept
        )
    else:
        final_fit = ols.fit(d, semis, intercept=cfg.intercept)

    divisor = cfg.resolved_divisor(d.p)
    p_adj = adjust(final_fit.p_values, cfg.adjustment, divisor)

    finalists = []
    for i, c in enumerate(final_fit.columns):
        if p_adj[i] <= cfg.alpha:
            finalists.append(
                FeatureResult(
                    index=d.original_index(int(c)),
                    name=d.feature_names[int(c)],
                    coefficient=float(final_fit.coefficients[i]),
                    t=float(final_fit.t_values[i]),
                    p_raw=float(final_fit.p_values[i]),
                    p_adjusted=float(p_adj[i]),
                )
            )
    finalists.sort(key=lambda f: f.index)

    details = tuple(
        {
            "index": d.original_index(int(j)),
            "name": d.feature_names[int(j)],
            "w": float(table.w[j]),
            "s_count": int(table.s_count[j]),
        }
        for j in semis
    )
    return SelectionResult(
        finalists=tuple(finalists),
        semifinalists=tuple(d.original_index(int(j)) for j in semis),
        semifinalist_details=details,
        score_table=table,
        config=cfg,
        dataset_fingerprint=d.fingerprint(),
        provenance={"mode": "select", "adjust_divisor": divisor},
    )
