"""Per-mode and per-band summaries of a decomposition: mean period,
Pearson and Kendall correlations with the source, and variance shares."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .emd import Decomposition, Imf, find_local_extrema

SHORT, MEDIUM, LONG = "short-run", "medium-run", "long-run"
HIGH, LOW, TREND = "high-frequency", "low-frequency", "trend"

# IMF1-2 short, IMF3-4 medium, IMF5-7 long
SEVEN_MODE_BANDS = {1: SHORT, 2: SHORT, 3: MEDIUM, 4: MEDIUM, 5: LONG, 6: LONG, 7: LONG}


class CorrelationError(ValueError):
    pass


def significance_stars(p: float | None) -> str:
    if p is None or not math.isfinite(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


def mean_period(imf: Imf | Sequence[float]) -> float:
    """Length divided by the number of local maxima; ``inf`` with no peaks."""
    values = imf.values if isinstance(imf, Imf) else np.asarray(imf, dtype=float)
    if values.size < 3:
        raise ValueError("mean_period needs at least 3 samples")
    peaks = find_local_extrema(values)[0].size
    if peaks == 0:
        return math.inf
    return values.size / peaks


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise CorrelationError(f"inputs must be 1-d and equal length, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise CorrelationError("correlation needs at least 3 observations")
    return x, y


def pearson_corr(x, y) -> tuple[float, float]:
    """Sample Pearson r with a two-sided p-value from Student's t on n-2 df."""
    x, y = _pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise CorrelationError("correlation undefined for a constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    n = x.size
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return r, min(1.0, p)


def kendall_tau(x, y) -> tuple[float, float]:
    """Kendall tau-b and its two-sided normal-approximation p-value.

    The z-score divides the concordance statistic ``S = C - D`` by
    ``sqrt(n (n - 1) (2n + 5) / 18)``.
    """
    x, y = _pair(x, y)
    n = x.size
    iu = np.triu_indices(n, k=1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    s = float(np.sum(sx * sy))
    untied_x = float(np.count_nonzero(sx))
    untied_y = float(np.count_nonzero(sy))
    if untied_x == 0 or untied_y == 0:
        raise CorrelationError("Kendall tau undefined for a constant input")
    tau = s / math.sqrt(untied_x * untied_y)
    tau = max(-1.0, min(1.0, tau))
    var_s = n * (n - 1) * (2 * n + 5) / 18.0
    z = s / math.sqrt(var_s)
    p = 2.0 * float(stats.norm.sf(abs(z)))
    return tau, min(1.0, p)


def variance_shares(d: Decomposition) -> np.ndarray:
    """Each component's sample variance over the summed variances of all
    IMFs and the residue. The last entry is the residue.

    A decomposition whose components all have zero variance assigns the
    whole share to the residue.
    """
    comps = d.components()
    var = comps.var(axis=1, ddof=1)
    total = float(var.sum())
    if total == 0.0:
        out = np.zeros(comps.shape[0])
        out[-1] = 1.0
        return out
    return var / total


def _total_variance(d: Decomposition) -> float:
    return float(d.components().var(axis=1, ddof=1).sum())


@dataclass(frozen=True)
class ImfSummary:
    mode: str
    mean_period: float | None
    pearson_r: float | None
    pearson_p: float | None
    kendall_tau: float | None
    kendall_p: float | None
    variance_share: float

    @property
    def pearson_stars(self) -> str:
        return significance_stars(self.pearson_p)

    @property
    def kendall_stars(self) -> str:
        return significance_stars(self.kendall_p)


@dataclass(frozen=True, eq=False)
class BandSummary:
    band: str
    series: np.ndarray
    members: tuple[int, ...]
    pearson_r: float | None
    pearson_p: float | None
    kendall_tau: float | None
    kendall_p: float | None
    variance_share: float

    @property
    def pearson_stars(self) -> str:
        return significance_stars(self.pearson_p)

    @property
    def kendall_stars(self) -> str:
        return significance_stars(self.kendall_p)


def _correlations(component, source):
    try:
        r, rp = pearson_corr(component, source)
        tau, tp = kendall_tau(component, source)
    except CorrelationError:
        return None, None, None, None
    return r, rp, tau, tp


def summarize_decomposition(d: Decomposition) -> list[ImfSummary]:
    """One row per IMF plus a final residue row.

    The residue row carries no mean period. Correlations of a constant
    component are left as ``None``.
    """
    shares = variance_shares(d)
    src = d.source.values
    rows = []
    for imf, share in zip(d.imfs, shares[:-1]):
        mp = mean_period(imf)
        rows.append(
            ImfSummary(
                f"IMF{imf.index}",
                None if math.isinf(mp) else mp,
                *_correlations(imf.values, src),
                variance_share=float(share),
            )
        )
    rows.append(ImfSummary("residue", None, *_correlations(d.residue, src), float(shares[-1])))
    return rows


def default_band_map(n_imfs: int) -> dict[int, str]:
    """Fixed assignment for seven modes; otherwise split into thirds with
    the short band taking ``ceil(K / 3)`` modes and medium ``ceil`` of half
    the remainder."""
    if n_imfs == 7:
        return dict(SEVEN_MODE_BANDS)
    n_short = math.ceil(n_imfs / 3)
    n_medium = math.ceil((n_imfs - n_short) / 2)
    out = {}
    for k in range(1, n_imfs + 1):
        if k <= n_short:
            out[k] = SHORT
        elif k <= n_short + n_medium:
            out[k] = MEDIUM
        else:
            out[k] = LONG
    return out


def band_map_from_groups(groups: Mapping[str, Sequence[int]]) -> dict[int, str]:
    """Build a band map from ``{"short": [...], "medium": [...], "long": [...]}``."""
    names = {"short": SHORT, "medium": MEDIUM, "long": LONG, SHORT: SHORT, MEDIUM: MEDIUM, LONG: LONG}
    out: dict[int, str] = {}
    for key, modes in groups.items():
        if key not in names:
            raise ValueError(f"unknown band {key!r}")
        for k in modes:
            if k in out:
                raise ValueError(f"mode {k} assigned to more than one band")
            out[int(k)] = names[key]
    return out


def aggregate_bands(d: Decomposition, band_map: Mapping[int, str] | None = None) -> list[BandSummary]:
    """High-frequency (short-run modes), low-frequency (medium and long-run
    modes) and trend (residue) components, each summarized against the source.

    Variance shares use the same denominator as :func:`variance_shares`, so
    the trend share equals the residue share.
    """
    band_map = default_band_map(d.n_imfs) if band_map is None else dict(band_map)
    missing = [k for k in range(1, d.n_imfs + 1) if k not in band_map]
    if missing:
        raise ValueError(f"band map does not cover modes {missing}")
    n = d.residue.size
    high = np.zeros(n)
    low = np.zeros(n)
    high_members, low_members = [], []
    for imf in d.imfs:
        if band_map[imf.index] == SHORT:
            high = high + imf.values
            high_members.append(imf.index)
        else:
            low = low + imf.values
            low_members.append(imf.index)
    total = _total_variance(d)
    src = d.source.values
    out = []
    for band, series, members in (
        (HIGH, high, high_members),
        (LOW, low, low_members),
        (TREND, d.residue.copy(), []),
    ):
        var = float(np.var(series, ddof=1))
        if total == 0.0:
            share = 1.0 if band == TREND else 0.0
        else:
            share = var / total
        r, rp, tau, tp = _correlations(series, src)
        out.append(BandSummary(band, series, tuple(members), r, rp, tau, tp, share))
    return out
