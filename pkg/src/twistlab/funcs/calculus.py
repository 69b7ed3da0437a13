"""Numerical calculus on descriptors: Lipschitz constants, equivalence,
approximate additivity, Hyers linearisation and the two class tests."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .descriptors import Func, eval_d2, evaluate
from .growth import (
    GrowthConfig,
    GrowthReport,
    LogGrid,
    classify_growth,
)

DEFAULT_GRID = LogGrid()


def lipschitz_bounds(
    f: Func, grid: LogGrid = DEFAULT_GRID, n_random: int = 20000, seed: int = 0
) -> tuple[float, float]:
    """Empirical (lower, upper) Lipschitz constants.

    Difference quotients over adjacent grid points (with t = 0 prepended)
    plus ``n_random`` random pairs drawn from the grid.
    """
    t = np.concatenate([[0.0], grid.samples()])
    v = evaluate(f, t)
    q = np.abs(np.diff(v)) / np.diff(t)
    if n_random:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, len(t), n_random)
        j = rng.integers(0, len(t), n_random)
        keep = i != j
        i, j = i[keep], j[keep]
        q = np.concatenate([q, np.abs(v[i] - v[j]) / np.abs(t[i] - t[j])])
    return float(q.min()), float(q.max())


def _windowed(h, mag, grid: LogGrid):
    maxima, mags = [], []
    for k, ts in grid.windows():
        maxima.append((k, float(np.max(h(ts)))))
        mags.append(float(np.max(mag(ts))))
    return maxima, mags


def _difference_report(f, g, a, grid, config) -> GrowthReport:
    def h(ts):
        return np.abs(evaluate(f, ts) - a * evaluate(g, ts))

    def mag(ts):
        return np.maximum(np.abs(evaluate(f, ts)), np.abs(a * evaluate(g, ts)))

    maxima, mags = _windowed(h, mag, grid)
    return classify_growth(maxima, config, mags)


def equivalence_test(
    f: Func, g: Func, grid: LogGrid = DEFAULT_GRID, config: GrowthConfig = GrowthConfig()
) -> GrowthReport:
    """Growth of |f(t) - g(t)|; Bounded means the maps are equivalent."""
    return _difference_report(f, g, 1.0, grid, config)


def _best_scalar(objective, lo, hi, start):
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 500})
    x = float(res.x)
    return x if objective(x) <= objective(start) else start


def projective_equivalence_test(
    f: Func,
    g: Func,
    grid: LogGrid = DEFAULT_GRID,
    a_search: tuple[float, float] | None = None,
    config: GrowthConfig = GrowthConfig(),
) -> tuple[complex, GrowthReport]:
    """Find a minimising the final-window max of |f - a g|, then classify
    |f - a g| over all windows.

    Real maps use a bounded scalar search; complex maps alternate the search
    over the real and imaginary parts of a.  The search starts from the
    least-squares ratio on the final window; ``a_search`` overrides the
    real-part bracket.
    """
    ts = grid.last_window()
    fv, gv = evaluate(f, ts), evaluate(g, ts)
    gnorm = float(np.vdot(gv, gv).real)
    if gnorm == 0.0:
        raise ValueError("g vanishes on the final window; projective test is degenerate")
    a_ls = complex(np.vdot(gv, fv) / gnorm)

    def objective(a):
        return float(np.max(np.abs(fv - a * gv)))

    is_real = not (np.any(fv.imag) or np.any(gv.imag))
    width = 1.0 + abs(a_ls)
    lo, hi = a_search if a_search is not None else (a_ls.real - width, a_ls.real + width)
    if is_real:
        start = min(max(a_ls.real, lo), hi)
        a = complex(_best_scalar(objective, lo, hi, start))
    else:
        a = complex(min(max(a_ls.real, lo), hi), a_ls.imag)
        for _ in range(30):
            prev = a
            re = _best_scalar(lambda x: objective(complex(x, a.imag)), lo, hi, a.real)
            im = _best_scalar(lambda y: objective(complex(re, y)),
                              a.imag - width, a.imag + width, a.imag)
            a = complex(re, im)
            if abs(a - prev) < 1e-13 * width:
                break
    return a, _difference_report(f, g, a, grid, config)


def _split_pairs(ts: np.ndarray, n_splits: int):
    s = np.linspace(0.0, 0.5, n_splits + 1)[1:]
    tt = np.repeat(ts, len(s))
    a = tt * np.tile(s, len(ts))
    return tt, a, tt - a


def additivity_defect(
    f: Func,
    grid: LogGrid = DEFAULT_GRID,
    config: GrowthConfig = GrowthConfig(),
    n_splits: int = 16,
    stride: int = 8,
) -> GrowthReport:
    """Window maxima of |f(a + b) - f(a) - f(b)| over pairs with a + b in the
    window (every ``stride``-th grid point split at ``n_splits`` ratios)."""
    maxima, mags = [], []
    for k, ts in grid.windows():
        tt, a, b = _split_pairs(ts[::stride], n_splits)
        ft, fa, fb = evaluate(f, tt), evaluate(f, a), evaluate(f, b)
        maxima.append((k, float(np.max(np.abs(ft - fa - fb)))))
        mags.append(float(np.max(np.maximum(np.abs(ft), np.maximum(np.abs(fa), np.abs(fb))))))
    return classify_growth(maxima, config, mags)


def hyers_linearize(
    f: Func, grid: LogGrid = DEFAULT_GRID, config: GrowthConfig = GrowthConfig()
) -> tuple[complex, GrowthReport]:
    """Slope c = mean of f(T)/T over the final window, and the growth report
    of the residual |f(t) - c t|."""
    ts = grid.last_window()
    ratios = evaluate(f, ts) / ts
    c = complex(np.mean(ratios.real), np.mean(ratios.imag))
    return c, _difference_report(f, _LinearRef(), c, grid, config)


class _LinearRef(Func):
    def _value(self, t):
        return t


def in_L_bis(
    f: Func, grid: LogGrid = DEFAULT_GRID, eps_bis: float = 1e-6
) -> tuple[list[tuple[int, float]], bool]:
    """Per-window max |f''| and whether the final window is below ``eps_bis``."""
    evidence = [(k, float(np.max(np.abs(eval_d2(f, ts))))) for k, ts in grid.windows()]
    return evidence, evidence[-1][1] < eps_bis


def bid_quotient(f: Func, n):
    """(f(log n) - f(log sqrt n)) / log sqrt n for n >= 2."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 2):
        raise ValueError("bid functional needs n >= 2")
    half = 0.5 * np.log(n)
    q = (evaluate(f, 2.0 * half) - evaluate(f, half)) / half
    return q


def bid_functional(f: Func, n: int, m: int) -> float:
    """|q(n) - q(m)| with q the log-scale difference quotient."""
    qn, qm = bid_quotient(f, n), bid_quotient(f, m)
    return float(abs(qn - qm))


def bid_sweep(
    f: Func, exponents: Sequence[int], part: str | None = None
) -> tuple[float, tuple[int, int]]:
    """Max of the bid functional over n, m in {2^e}; ``part`` in
    {None, 're', 'im'} restricts to one component of a complex map."""
    ns = 2.0 ** np.asarray(exponents, dtype=float)
    q = np.asarray(bid_quotient(f, ns))
    if part == "re":
        q = q.real
    elif part == "im":
        q = q.imag
    d = np.abs(q[:, None] - q[None, :])
    i, j = np.unravel_index(int(np.argmax(d)), d.shape)
    return float(d[i, j]), (2 ** int(exponents[i]), 2 ** int(exponents[j]))
