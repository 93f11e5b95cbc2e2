"""Least-squares base procedure: fitting, t-statistics and backward elimination.

This is the analysis run on every subsample and on the semifinalist set.
Rank deficiency is handled by pivoted QR with a relative drop tolerance;
dropped columns are excluded from the fit and carry no evidence downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import stats as sst

from .dataset import Dataset
from .errors import NumericalError

__all__ = ["OlsFit", "fit", "stepwise_backward"]

# Relative pivot threshold: columns whose |R_jj| falls below this fraction of
# the largest diagonal are treated as rank deficient and dropped.
DROP_TOL = 1e-10


@dataclass(frozen=True)
class OlsFit:
    """Result of a least-squares fit on a column subset.

    ``columns`` lists the retained requested columns in request order;
    ``coefficients``, ``t_values`` and ``p_values`` align with it.
    ``intercept`` is the fitted constant (None when not requested).
    """

    columns: tuple[int, ...]
    coefficients: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    rss: float
    df_residual: int
    dropped_columns: frozenset[int]
    intercept: float | None = None


def _null_fit(d: Dataset, dropped: frozenset[int]) -> OlsFit:
    # No regressors at all: residual is y itself.
    rss = float(d.y @ d.y)
    empty = np.empty(0)
    return OlsFit((), empty, empty, empty, rss, d.n, dropped, None)


def fit(d: Dataset, columns, intercept: bool = False) -> OlsFit:
    """Least-squares fit of y on the given columns (plus optional intercept).

    Uses pivoted QR; columns below the drop tolerance are listed in
    ``dropped_columns`` and excluded.  t and p-values use the unbiased
    variance estimate rss / df_residual with df_residual = n - #fitted.

    Raises
    ------
    ValueError
        Empty column set without an intercept, or duplicate/out-of-range
        column indices.
    NumericalError
        Saturated model (df_residual would be 0).
    """
    cols = [int(c) for c in columns]
    if not cols and not intercept:
        raise ValueError("empty column set with intercept=False")
    if len(set(cols)) != len(cols):
        raise ValueError("duplicate column indices requested")
    for c in cols:
        if not 0 <= c < d.p:
            raise ValueError(f"column index {c} out of range for p={d.p}")
    k = len(cols) + int(intercept)
    if k >= d.n:
        raise NumericalError(
            f"saturated model: {k} parameters for n={d.n} observations"
        )

    if intercept:
        a = np.empty((d.n, k))
        a[:, 0] = 1.0
        a[:, 1:] = d.x[:, cols]
    else:
        a = d.x[:, cols]
    y = d.y

    q, r, piv = sla.qr(a, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > DROP_TOL * diag[0])) if diag[0] > 0 else 0
    kept_piv = piv[:rank]
    dropped_piv = piv[rank:]

    design_to_col = ([-1] + cols) if intercept else cols  # -1 marks the constant
    dropped = frozenset(design_to_col[j] for j in dropped_piv if design_to_col[j] >= 0)

    if rank == 0:
        if intercept:
            raise NumericalError("rank-zero design")
        return _null_fit(d, dropped)

    qty = q.T @ y
    beta_piv = sla.solve_triangular(r[:rank, :rank], qty[:rank], check_finite=False)
    resid = y - a[:, kept_piv] @ beta_piv
    rss = float(resid @ resid)
    df = d.n - rank
    if df == 0:
        raise NumericalError("saturated model: zero residual degrees of freedom")

    rinv = sla.solve_triangular(
        r[:rank, :rank], np.eye(rank), check_finite=False
    )
    xtx_inv_diag = np.sum(rinv * rinv, axis=1)
    sigma2 = rss / df
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.sqrt(sigma2 * xtx_inv_diag)
        t_piv = beta_piv / se
    t_piv = np.nan_to_num(t_piv, nan=0.0, posinf=np.inf, neginf=-np.inf)
    p_piv = 2.0 * sst.t.sf(np.abs(t_piv), df)

    # Scatter pivot-ordered stats back to request order.
    beta_all = np.zeros(k)
    t_all = np.zeros(k)
    p_all = np.zeros(k)
    kept_mask = np.zeros(k, dtype=bool)
    beta_all[kept_piv] = beta_piv
    t_all[kept_piv] = t_piv
    p_all[kept_piv] = p_piv
    kept_mask[kept_piv] = True

    off = int(intercept)
    retained = tuple(c for j, c in enumerate(cols) if kept_mask[j + off])
    sel = [j + off for j in range(len(cols)) if kept_mask[j + off]]
    icpt = float(beta_all[0]) if intercept and kept_mask[0] else (0.0 if intercept else None)
    return OlsFit(
        columns=retained,
        coefficients=beta_all[sel],
        t_values=t_all[sel],
        p_values=p_all[sel],
        rss=rss,
        df_residual=df,
        dropped_columns=dropped,
        intercept=icpt,
    )


def stepwise_backward(
    d: Dataset, columns, threshold: float, intercept: bool = False
) -> OlsFit:
    """Backward elimination from the full requested set.

    Refits after removing the retained column with the largest p-value while
    that p-value exceeds ``threshold`` (exact ties: larger column index goes
    first).  Returns the terminal fit; its ``columns`` are the survivors.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0,1), got {threshold}")
    current = list(dict.fromkeys(int(c) for c in columns))
    dropped_all: set[int] = set()
    while True:
        if not current and not intercept:
            return _null_fit(d, frozenset(dropped_all))
        f = fit(d, current, intercept)
        dropped_all.update(f.dropped_columns)
        if not f.columns:
            return OlsFit(
                f.columns, f.coefficients, f.t_values, f.p_values,
                f.rss, f.df_residual, frozenset(dropped_all), f.intercept,
            )
        worst = max(range(len(f.columns)), key=lambda j: (f.p_values[j], f.columns[j]))
        if f.p_values[worst] <= threshold:
            return OlsFit(
                f.columns, f.coefficients, f.t_values, f.p_values,
                f.rss, f.df_residual, frozenset(dropped_all), f.intercept,
            )
        removed = f.columns[worst]
        current = [c for c in f.columns if c != removed]
