"""Marginal-correlation prescreening for ultra-high dimension.

One fixed pass: rank columns by |Pearson correlation with y| and keep either
the top k or everything above a threshold.  The reduced dataset keeps the
original column identities so downstream reports name the right features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

__all__ = ["ScreenResult", "screen_top_k", "screen_threshold", "marginal_correlations"]


@dataclass(frozen=True)
class ScreenResult:
    """Outcome of one screening pass.

    ``kept`` is ordered by |correlation| descending; ``reduced`` is the
    matching dataset view.  Constant columns get correlation 0 and are
    listed in ``constant_columns``.
    """

    kept: tuple[int, ...]
    correlations: np.ndarray
    rule: dict
    reduced: Dataset | None
    constant_columns: tuple[int, ...] = ()


def marginal_correlations(d: Dataset) -> tuple[np.ndarray, tuple[int, ...]]:
    """Pearson correlation of every column with y; constant columns give 0."""
    xc = d.x - d.x.mean(axis=0)
    yc = d.y - d.y.mean()
    x_ss = np.einsum("ij,ij->j", xc, xc)
    y_ss = float(yc @ yc)
    num = xc.T @ yc
    den = np.sqrt(x_ss * y_ss)
    constant = tuple(int(j) for j in np.flatnonzero(x_ss == 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / den, 0.0)
    # Rounding can push |r| infinitesimally past 1.
    return np.clip(r, -1.0, 1.0), constant


def _ranked(r: np.ndarray) -> np.ndarray:
    return np.lexsort((np.arange(r.size), -np.abs(r)))


def screen_top_k(d: Dataset, k: int) -> ScreenResult:
    """Keep the k columns with the largest |correlation|; ties favor smaller index."""
    if not 1 <= k <= d.p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={d.p}")
    r, constant = marginal_correlations(d)
    kept = tuple(int(j) for j in _ranked(r)[:k])
    return ScreenResult(
        kept=kept,
        correlations=r,
        rule={"rule": "top_k", "k": int(k)},
        reduced=d.select_columns(kept),
        constant_columns=constant,
    )


def screen_threshold(d: Dataset, r_min: float) -> ScreenResult:
    """Keep exactly the columns with |correlation| >= r_min (possibly none)."""
    if not 0.0 < r_min < 1.0:
        raise ValueError(f"need 0 < r_min < 1, got {r_min}")
    r, constant = marginal_correlations(d)
    kept = tuple(int(j) for j in _ranked(r) if abs(r[j]) >= r_min)
    reduced = d.select_columns(kept) if kept else None
    return ScreenResult(
        kept=kept,
        correlations=r,
        rule={"rule": "threshold", "r_min": float(r_min)},
        reduced=reduced,
        constant_columns=constant,
    )
