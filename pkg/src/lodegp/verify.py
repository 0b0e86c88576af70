"""The evaluation protocol: finite-difference ODE residuals of a trajectory,
RMSE against noiseless references.

Residuals follow the shifted-duplicate scheme: base points uniform in the
interval (500 when only first derivatives are needed, else 333, keeping the
total near 1000), duplicated at t + delta (and t + 2*delta for second
derivatives), with derivatives from forward differences.  For second-order
systems the equation is evaluated at the center point t + delta, where the
two stacked forward differences form a central second difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError, UnsupportedOrderError
from .opalgebra import ratfun_eval

DELTA = 1e-3


@dataclass(frozen=True)
class OdeErrorReport:
    per_equation: list
    mean: float
    point_count: int
    delta: float
    smoothing: str  # "none" or "ma5"

    def as_dict(self) -> dict:
        return {
            "per_equation_ode_error": [float(x) for x in self.per_equation],
            "mean_ode_error": float(self.mean),
            "point_count": self.point_count,
            "delta": self.delta,
            "smoothing": self.smoothing,
        }


def moving_average(values: np.ndarray, window: int = 5) -> np.ndarray:
    """Centered moving average along axis 0, window truncated at the edges."""
    n = values.shape[0]
    half = window // 2
    out = np.empty_like(values, dtype=float)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out[i] = values[lo:hi].mean(axis=0)
    return out


def _row_coefficients(spec, params: dict):
    """coeffs[r][ch] = list of float coefficients by derivative order."""
    A = spec.matrix
    rows = []
    for r in range(A.rows):
        row = []
        for ch in range(A.cols):
            entry = A.entries[r][ch]
            row.append(
                [ratfun_eval(c, params) if not c.is_zero() else 0.0 for c in entry.coeffs]
            )
        rows.append(row)
    return rows


def ode_residual(
    eval_fn,
    spec,
    interval,
    params: dict | None = None,
    delta: float = DELTA,
    smoothing: str = "none",
) -> OdeErrorReport:
    """Mean absolute ODE residual of a trajectory function.

    eval_fn maps a sorted time array to an (N, channels) value array.  The
    optional "ma5" smoothing passes the first-difference sequences through a
    centered window-5 moving average before the second difference; the
    default leaves them untouched (see OdeErrorReport.smoothing).
    """
    if params is None:
        params = {}
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise ValueError("interval must be nonempty")
    max_order = spec.matrix.max_degree()
    if max_order > 2:
        raise UnsupportedOrderError(
            f"residual protocol supports derivative order <= 2, got {max_order}"
        )
    second = max_order >= 2
    base_count = 333 if second else 500
    base = np.linspace(lo, hi, base_count)
    if second:
        times = np.concatenate([base, base + delta, base + 2 * delta])
    else:
        times = np.concatenate([base, base + delta])
    order = np.argsort(times, kind="stable")
    values = np.asarray(eval_fn(times[order]), dtype=float)
    unorder = np.empty_like(order)
    unorder[order] = np.arange(order.size)
    values = values[unorder]

    v0 = values[:base_count]
    v1 = values[base_count : 2 * base_count]
    d1 = (v1 - v0) / delta
    if second:
        v2 = values[2 * base_count :]
        d1_shift = (v2 - v1) / delta
        if smoothing == "ma5":
            d1s = moving_average(d1)
            d1_shift_s = moving_average(d1_shift)
        elif smoothing == "none":
            d1s, d1_shift_s = d1, d1_shift
        else:
            raise ValueError(f"unknown smoothing {smoothing!r}")
        d2 = (d1_shift_s - d1s) / delta
        # evaluate at the center t + delta: the stacked forward differences
        # are a central second difference there and the exact sample exists
        state = {0: v1, 1: d1_shift, 2: d2}
    else:
        if smoothing not in ("none", "ma5"):
            raise ValueError(f"unknown smoothing {smoothing!r}")
        state = {0: v0, 1: d1}

    coeffs = _row_coefficients(spec, params)
    per_equation = []
    for row in coeffs:
        residual = np.zeros(base_count)
        for ch, by_order in enumerate(row):
            for k, c in enumerate(by_order):
                if c:
                    residual = residual + c * state[k][:, ch]
        per_equation.append(float(np.mean(np.abs(residual))))
    return OdeErrorReport(
        per_equation=per_equation,
        mean=float(np.mean(per_equation)),
        point_count=base_count,
        delta=delta,
        smoothing=smoothing,
    )


def rmse(pred: np.ndarray, ref: np.ndarray) -> float:
    """Root mean squared elementwise difference."""
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if pred.shape != ref.shape:
        raise ShapeMismatchError(f"shape {pred.shape} vs {ref.shape}")
    return float(np.sqrt(np.mean((pred - ref) ** 2)))
