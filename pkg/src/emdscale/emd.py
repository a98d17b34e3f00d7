"""
Empirical mode decomposition by envelope-mean sifting.

  find_local_extrema
  zero_crossings
  envelope
  mean_envelope
  sift_once
  extract_imf
  decompose

A series is split into intrinsic mode functions (IMFs), highest frequency
first, plus a residue such that ``source == sum(imfs) + residue``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.interpolate import CubicSpline

from .series import Period, TimeSeries

logger = logging.getLogger(__name__)

BOUNDARY_POLICIES = ("mirror", "clamp")
TIE_POLICIES = ("plateau-midpoint",)
# residues whose range is below this fraction of max|source| are rounding noise
NEGLIGIBLE_AMPLITUDE = 1e-12


class EnvelopeError(ValueError):
    """Not enough extrema to build an envelope; extraction must stop."""


class DecompositionError(ValueError):
    pass


@dataclass(frozen=True)
class SiftConfig:
    """Sifting controls.

    ``sd_threshold`` bounds the Cauchy-type change ratio
    ``sum((h_prev - h)**2) / sum(h_prev**2)`` between consecutive sifts.
    ``max_imfs`` optionally lowers the hard cap of ``floor(log2 N)`` modes.
    """

    sd_threshold: float = 0.25
    max_sift_iterations: int = 100
    boundary_policy: str = "mirror"
    extremum_tie_policy: str = "plateau-midpoint"
    max_imfs: int | None = None

    def __post_init__(self):
        if not self.sd_threshold > 0:
            raise ValueError(f"sd_threshold must be > 0, got {self.sd_threshold}")
        if self.max_sift_iterations < 1:
            raise ValueError(f"max_sift_iterations must be >= 1, got {self.max_sift_iterations}")
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise ValueError(f"boundary_policy must be one of {BOUNDARY_POLICIES}")
        if self.extremum_tie_policy not in TIE_POLICIES:
            raise ValueError(f"extremum_tie_policy must be one of {TIE_POLICIES}")
        if self.max_imfs is not None and self.max_imfs < 0:
            raise ValueError("max_imfs must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "sd_threshold": self.sd_threshold,
            "max_sift_iterations": self.max_sift_iterations,
            "boundary_policy": self.boundary_policy,
            "extremum_tie_policy": self.extremum_tie_policy,
            "max_imfs": self.max_imfs,
        }


@dataclass(frozen=True, eq=False)
class Imf:
    values: np.ndarray
    index: int
    sift_iterations: int

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class Decomposition:
    source: TimeSeries
    imfs: list[Imf]
    residue: np.ndarray
    config: SiftConfig = field(default_factory=SiftConfig)
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def n_imfs(self) -> int:
        return len(self.imfs)

    def components(self) -> np.ndarray:
        """Array of shape (n_imfs + 1, N): IMFs then the residue."""
        return np.vstack([*(c.values for c in self.imfs), self.residue])

    def reconstruct(self) -> np.ndarray:
        total = np.zeros_like(self.residue)
        for c in self.imfs:
            total = total + c.values
        return total + self.residue

    def imf(self, k: int) -> np.ndarray:
        """IMF ``k`` (1-based); modes beyond the extracted count are zero."""
        if 1 <= k <= len(self.imfs):
            return self.imfs[k - 1].values
        return np.zeros_like(self.residue)


def imf_cap(n: int) -> int:
    """floor(log2 n), computed exactly on integers."""
    if n < 1:
        return 0
    return int(n).bit_length() - 1


def find_local_extrema(values) -> tuple[np.ndarray, np.ndarray]:
    """Interior local maxima and minima.

    Runs of equal values count once, at their midpoint index (rounded down),
    when flanked on both sides by lower (maximum) or higher (minimum)
    neighbours. Endpoints are never returned.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise ValueError("find_local_extrema needs a 1-d sequence of length >= 3")
    change = np.flatnonzero(np.diff(x) != 0) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change - 1, [x.size - 1]))
    if starts.size < 3:
        empty = np.array([], dtype=int)
        return empty, empty.copy()
    run_vals = x[starts]
    left, mid, right = run_vals[:-2], run_vals[1:-1], run_vals[2:]
    centers = (starts[1:-1] + ends[1:-1]) // 2
    maxima = centers[(mid > left) & (mid > right)]
    minima = centers[(mid < left) & (mid < right)]
    return maxima.astype(int), minima.astype(int)


def zero_crossings(values) -> int:
    """Number of sign changes, skipping exact zeros."""
    s = np.sign(np.asarray(values, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def is_monotone_or_trivial(values) -> bool:
    x = np.asarray(values, dtype=float)
    if x.size < 3:
        return True
    d = np.diff(x)
    if np.all(d >= 0) or np.all(d <= 0):
        return True
    maxima, minima = find_local_extrema(x)
    return maxima.size + minima.size < 2


def is_imf_shaped(values) -> bool:
    """Extrema and zero-crossing counts differ by at most one."""
    maxima, minima = find_local_extrema(values)
    return abs(maxima.size + minima.size - zero_crossings(values)) <= 1


def _extend_knots(n: int, knots: np.ndarray, values: np.ndarray, policy: str):
    pos = knots.astype(float)
    vals = values[knots]
    if policy == "mirror":
        # reflect the two knots nearest each end about that end
        left = knots[knots > 0][:2]
        right = knots[knots < n - 1][-2:]
        pos = np.concatenate((-left[::-1].astype(float), pos, 2.0 * (n - 1) - right[::-1]))
        vals = np.concatenate((values[left[::-1]], vals, values[right[::-1]]))
    elif policy == "clamp":
        if knots.size == 0 or knots[0] != 0:
            pos = np.concatenate(([0.0], pos))
            vals = np.concatenate(([values[0]], vals))
        if knots.size == 0 or knots[-1] != n - 1:
            pos = np.concatenate((pos, [float(n - 1)]))
            vals = np.concatenate((vals, [values[-1]]))
    else:
        raise ValueError(f"unknown boundary policy {policy!r}")
    return pos, vals


def envelope(values, knots, policy: str = "mirror") -> np.ndarray:
    """Natural cubic spline through ``values[knots]`` evaluated on every index.

    Under ``mirror`` the two knots nearest each end are reflected about that
    end; under ``clamp`` the end samples themselves become knots.
    """
    x = np.asarray(values, dtype=float)
    k = np.asarray(knots, dtype=int)
    if k.size == 0 and policy == "mirror":
        raise EnvelopeError("no knots to build an envelope from")
    if k.size and (np.any(np.diff(k) <= 0) or k[0] < 0 or k[-1] >= x.size):
        raise ValueError("knots must be strictly increasing indices into values")
    pos, vals = _extend_knots(x.size, k, x, policy)
    if pos.size < 2:
        raise EnvelopeError(f"need at least 2 knots after boundary extension, got {pos.size}")
    spline = CubicSpline(pos, vals, bc_type="natural")
    return spline(np.arange(x.size, dtype=float))


def mean_envelope(values, config: SiftConfig | None = None) -> np.ndarray:
    config = config or SiftConfig()
    x = np.asarray(values, dtype=float)
    if x.size < 3:
        raise EnvelopeError("series too short to have interior extrema")
    maxima, minima = find_local_extrema(x)
    if maxima.size == 0 or minima.size == 0:
        raise EnvelopeError(
            f"need both maxima and minima (found {maxima.size} maxima, {minima.size} minima)"
        )
    upper = envelope(x, maxima, config.boundary_policy)
    lower = envelope(x, minima, config.boundary_policy)
    return 0.5 * (upper + lower)


def sift_once(h, config: SiftConfig | None = None) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    return h - mean_envelope(h, config)


def sd_change(previous: np.ndarray, current: np.ndarray) -> float:
    denom = float(np.sum(previous * previous))
    if denom == 0.0:
        return 0.0
    return float(np.sum((previous - current) ** 2)) / denom


def extract_imf(residual, config: SiftConfig | None = None, index: int = 1) -> tuple[Imf, np.ndarray]:
    """Sift ``residual`` into one IMF.

    Sifting stops once the change ratio drops below ``sd_threshold`` and the
    candidate has IMF shape (extrema and zero crossings within one), or at
    ``max_sift_iterations``.

    Returns
    -------
    imf : Imf
    remaining : ndarray
        ``residual - imf.values``.

    Raises
    ------
    EnvelopeError
        When any sift lacks the extrema for an envelope. The caller keeps the
        residual unchanged and stops decomposing.
    """
    config = config or SiftConfig()
    r = np.asarray(residual, dtype=float)
    h = r
    iterations = 0
    while iterations < config.max_sift_iterations:
        h_new = sift_once(h, config)
        iterations += 1
        converged = sd_change(h, h_new) < config.sd_threshold and is_imf_shaped(h_new)
        h = h_new
        if converged:
            break
    else:
        logger.debug("IMF %d hit max_sift_iterations=%d", index, config.max_sift_iterations)
    return Imf(values=h, index=index, sift_iterations=iterations), r - h


def _as_series(s) -> TimeSeries:
    if isinstance(s, TimeSeries):
        return s
    return TimeSeries("series", Period(2000, 1), np.asarray(s, dtype=float))


def decompose(s, config: SiftConfig | None = None) -> Decomposition:
    """Decompose ``s`` into IMFs plus a residue.

    Extraction stops when the residue is monotone (or has fewer than two
    interior extrema), when it has shrunk to rounding noise, when an
    envelope cannot be built, or when
    ``floor(log2 N)`` modes exist. The last case is a hard stop and is
    recorded as ``diagnostics["cap_hit"]``.
    """
    config = config or SiftConfig()
    series = _as_series(s)
    x = series.values
    n = x.size
    if n < 8:
        raise DecompositionError(f"series {series.name!r} too short for EMD: {n} < 8")
    cap = imf_cap(n)
    if config.max_imfs is not None:
        cap = min(cap, config.max_imfs)

    imfs: list[Imf] = []
    residual = x.copy()
    termination = "monotone residue"
    cap_hit = False
    floor = NEGLIGIBLE_AMPLITUDE * float(np.max(np.abs(x)))
    while True:
        if is_monotone_or_trivial(residual):
            termination = "monotone residue"
            break
        if np.ptp(residual) <= floor:
            termination = "negligible residue"
            break
        if len(imfs) >= cap:
            termination = "imf cap"
            cap_hit = True
            break
        try:
            imf, remaining = extract_imf(residual, config, index=len(imfs) + 1)
        except EnvelopeError as exc:
            termination = f"envelope failure: {exc}"
            break
        imfs.append(imf)
        residual = remaining

    warnings: list[str] = []
    if cap_hit:
        warnings.append(
            f"{series.name}: IMF cap floor(log2 {n}) = {cap} reached with an oscillating residue"
        )
    warnings.extend(_ordering_warnings(series.name, imfs))
    for w in warnings:
        logger.warning(w)
    diagnostics = {
        "n_obs": n,
        "imf_cap": cap,
        "cap_hit": cap_hit,
        "termination": termination,
        "sift_iterations": [c.sift_iterations for c in imfs],
        "warnings": warnings,
    }
    return Decomposition(series, imfs, residual, config, diagnostics)


def _ordering_warnings(name: str, imfs: list[Imf]) -> list[str]:
    out = []
    peaks = [find_local_extrema(c.values)[0].size for c in imfs]
    for i in range(len(imfs) - 1):
        a, b = peaks[i], peaks[i + 1]
        if a >= 2 and b >= 2 and not (len(imfs[i]) / a < len(imfs[i + 1]) / b):
            out.append(f"{name}: mean period of IMF{i + 1} is not below IMF{i + 2}")
    return out
