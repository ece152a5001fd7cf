"""Least squares with listwise deletion, single and rolling-window.

Fits go through a QR factorisation of the column-equilibrated design.  A
fit is flagged ``ok=False`` (never raised) when there are too few usable
rows or the design is numerically rank deficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Surplus observations required beyond the number of coefficients.
MIN_DOF = 8
#: Share of a rolling window that must be usable.
MIN_WINDOW_FRACTION = 0.75
#: Relative threshold on |diag(R)| of the equilibrated design.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class OlsResult:
    coefficients: np.ndarray  # intercept first when fitted; NaN when not ok
    residuals: np.ndarray  # one per input row, NaN where the row was dropped
    n_used: int
    ok: bool
    condition_number: float = math.nan

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])


def _as_design(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != n:
        raise ValueError(f"design has shape {X.shape}, expected ({n}, k)")
    return X


def _qr_solve(A: np.ndarray, b: np.ndarray):
    """Solve stacked least-squares problems ``A[i] c = b[i]``.

    ``A`` has shape (B, n, p), ``b`` (B, n).  Returns coefficients (B, p),
    a full-rank flag (B,) and condition numbers (B,).  Columns are scaled to
    unit norm before factorising so the rank test is unit free.
    """
    norms = np.sqrt(np.einsum("bnp,bnp->bp", A, A))
    safe = np.where(norms > 0, norms, 1.0)
    Q, R = np.linalg.qr(A / safe[:, None, :])
    d = np.abs(np.diagonal(R, axis1=1, axis2=2))
    full = np.all(norms > 0, axis=1) & np.all(d > RANK_RTOL * np.max(d, axis=1, initial=0.0)[:, None], axis=1)
    p = A.shape[2]
    R = np.where(full[:, None, None], R, np.eye(p))
    qtb = np.einsum("bnp,bn->bp", Q, b)
    coef = np.linalg.solve(R, qtb[..., None])[..., 0] / safe
    sv = np.linalg.svd(R, compute_uv=False)
    cond = np.where(full, sv[:, 0] / sv[:, -1], np.inf)
    coef[~full] = np.nan
    return coef, full, cond


def ols(y, X, include_intercept: bool = True, min_dof: int = MIN_DOF) -> OlsResult:
    """Ordinary least squares of ``y`` on the columns of ``X``.

    Rows where ``y`` or any regressor is NaN are dropped.  ``ok`` is False
    when fewer than ``n_coef + min_dof`` rows survive or the kept design is
    rank deficient.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = _as_design(X, y.shape[0])
    keep = np.isfinite(y) & np.all(np.isfinite(X), axis=1)
    A = X[keep]
    if include_intercept:
        A = np.column_stack([np.ones(A.shape[0]), A])
    p = A.shape[1]
    n_used = int(keep.sum())
    residuals = np.full(y.shape[0], np.nan)
    if n_used < p + min_dof or p == 0:
        return OlsResult(np.full(p, np.nan), residuals, n_used, False)
    coef, full, cond = _qr_solve(A[None], y[keep][None])
    if not full[0]:
        return OlsResult(np.full(p, np.nan), residuals, n_used, False, float(cond[0]))
    residuals[keep] = y[keep] - A @ coef[0]
    return OlsResult(coef[0], residuals, n_used, True, float(cond[0]))


def min_rows_for_window(window: int, n_coef: int, min_dof: int = MIN_DOF) -> int:
    return max(math.ceil(MIN_WINDOW_FRACTION * window), n_coef + min_dof)


def rolling_ols_panel(
    Y: np.ndarray,
    X: np.ndarray,
    window: int,
    include_intercept: bool = True,
    min_dof: int = MIN_DOF,
):
    """Rolling fits of every column of ``Y`` on shared regressors ``X``.

    The fit dated t uses rows t-window .. t-1 only.  Returns ``coef`` of
    shape (T, N, n_coef) with NaN where not ok, ``ok`` (T, N) and
    ``n_used`` (T, N).
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    T, N = Y.shape
    X = _as_design(X, T)
    p = X.shape[1] + int(include_intercept)
    if window < p + min_dof:
        raise ValueError(f"window {window} too short for {p} coefficients")
    need = min_rows_for_window(window, p, min_dof)
    coef = np.full((T, N, p), np.nan)
    ok = np.zeros((T, N), dtype=bool)
    n_used = np.zeros((T, N), dtype=int)
    x_ok = np.all(np.isfinite(X), axis=1)
    Xf = np.where(np.isfinite(X), X, 0.0)
    if include_intercept:
        Xf = np.column_stack([np.ones(T), Xf])
    for t in range(window, T):
        lo = t - window
        keep = np.isfinite(Y[lo:t]) & x_ok[lo:t, None]  # (window, N)
        counts = keep.sum(axis=0)
        n_used[t] = counts
        cols = np.flatnonzero(counts >= need)
        if cols.size == 0:
            continue
        k = keep[:, cols].T  # (B, window)
        # zeroed rows contribute nothing to the normal equations: equivalent
        # to deleting them
        A = Xf[None, lo:t, :] * k[:, :, None]
        b = np.where(k, Y[lo:t, cols].T, 0.0)
        c, full, _ = _qr_solve(A, b)
        coef[t, cols[full]] = c[full]
        ok[t, cols[full]] = True
    return coef, ok, n_used


def rolling_ols(y, X, window: int, include_intercept: bool = True, min_dof: int = MIN_DOF) -> list[OlsResult]:
    """Per-date :class:`OlsResult` for one series; see :func:`rolling_ols_panel`."""
    y = np.asarray(y, dtype=float).ravel()
    X = _as_design(X, y.shape[0])
    coef, ok, n_used = rolling_ols_panel(y[:, None], X, window, include_intercept, min_dof)
    design = np.column_stack([np.ones(len(y)), X]) if include_intercept else X
    out = []
    for t in range(len(y)):
        resid = np.full(len(y), np.nan)
        if ok[t, 0]:
            lo = t - window
            resid[lo:t] = y[lo:t] - design[lo:t] @ coef[t, 0]
        out.append(OlsResult(coef[t, 0], resid, int(n_used[t, 0]), bool(ok[t, 0])))
    return out
