"""Log-spaced sampling grids and the bounded/growing classification."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

BOUNDED = "Bounded"
GROWING = "Growing"
INCONCLUSIVE = "Inconclusive"

# Round-off in f(t) at scale t is a few ulps of |f|; maxima below this many
# machine epsilons of the window magnitude are treated as exact zeros.
NOISE_ULPS = 64


@dataclass(frozen=True)
class LogGrid:
    """Dyadic windows [b^k, b^(k+1)] clipped to [t_min, t_max], each sampled
    with ``points_per_window`` log-spaced points (endpoints included)."""

    t_min: float = 2.0**-20
    t_max: float = 2.0**40
    points_per_window: int = 512
    window_base: float = 2.0

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max):
            raise ValueError("need 0 < t_min < t_max")
        if self.points_per_window < 2:
            raise ValueError("points_per_window must be >= 2")
        if self.window_base <= 1:
            raise ValueError("window_base must exceed 1")

    def _edges(self) -> list[tuple[int, float, float]]:
        b = self.window_base
        k0 = math.floor(math.log(self.t_min, b) + 1e-12)
        out = []
        k = k0
        while True:
            lo = max(b**k, self.t_min)
            hi = min(b ** (k + 1), self.t_max)
            if lo >= self.t_max:
                break
            if hi > lo:
                out.append((k, lo, hi))
            k += 1
        return out

    def windows(self) -> list[tuple[int, np.ndarray]]:
        return [
            (k, np.geomspace(lo, hi, self.points_per_window))
            for k, lo, hi in self._edges()
        ]

    def samples(self) -> np.ndarray:
        return np.unique(np.concatenate([s for _, s in self.windows()]))

    def last_window(self) -> np.ndarray:
        return self.windows()[-1][1]


@dataclass(frozen=True)
class GrowthConfig:
    """Thresholds for turning window maxima into a verdict.

    Only windows with index >= ``tail_start`` take part (growth is a notion
    at infinity).  The bounded cap is ``cap_factor`` times the first tail
    maximum plus ``cap_abs``.

    With ``log_axis`` the regression runs against log k instead of k, which
    detects growth polynomial in the index (e.g. quantities like log n
    sampled at n = 2^k); indices must then be positive.
    """

    tau_grow: float = 0.05
    tau_flat: float = 0.02
    cap_factor: float = 10.0
    cap_abs: float = 1e-9
    floor: float = 1e-6
    min_windows: int = 12
    tail_start: int = 0
    log_offset: float = 1e-12
    log_axis: bool = False


@dataclass
class GrowthReport:
    window_maxima: list[tuple[int, float]]
    slope: float
    verdict: str
    thresholds: dict = field(default_factory=dict)

    @property
    def maxima(self) -> np.ndarray:
        return np.array([m for _, m in self.window_maxima])

    @property
    def max(self) -> float:
        return float(self.maxima.max()) if self.window_maxima else 0.0

    def to_dict(self) -> dict:
        return {
            "window_maxima": [[int(k), float(m)] for k, m in self.window_maxima],
            "slope": float(self.slope),
            "verdict": self.verdict,
            "thresholds": dict(self.thresholds),
        }


def classify_growth(
    maxima: Iterable[tuple[int, float]],
    config: GrowthConfig = GrowthConfig(),
    magnitudes: Iterable[float] | None = None,
) -> GrowthReport:
    """Classify window maxima ``(k, M_k)``.

    ``magnitudes`` (one per window) give the size of the quantities whose
    difference produced ``M_k``; maxima within round-off of them are zeroed.
    """
    pairs = [(int(k), float(m)) for k, m in maxima]
    if magnitudes is not None:
        mags = list(magnitudes)
        eps = np.finfo(float).eps
        pairs = [
            (k, 0.0 if m <= NOISE_ULPS * eps * mag else m)
            for (k, m), mag in zip(pairs, mags)
        ]
    tail = [(k, m) for k, m in pairs if k >= config.tail_start]
    thresholds = asdict(config)
    if len(tail) < max(config.min_windows, 2):
        return GrowthReport(pairs, float("nan"), INCONCLUSIVE, thresholds)

    ks = np.array([k for k, _ in tail], dtype=float)
    if config.log_axis:
        if ks.min() <= 0:
            raise ValueError("log_axis needs positive window indices")
        ks = np.log(ks)
    ms = np.array([m for _, m in tail])
    slope = float(np.polyfit(ks, np.log(ms + config.log_offset), 1)[0])
    cap = config.cap_factor * ms[0] + config.cap_abs
    thresholds["cap"] = float(cap)

    if slope > config.tau_grow and ms[-1] > config.floor:
        verdict = GROWING
    elif ms.max() <= cap and slope <= config.tau_flat:
        verdict = BOUNDED
    else:
        verdict = INCONCLUSIVE
    return GrowthReport(pairs, slope, verdict, thresholds)
