"""Synthetic series with known structure, and brute-force oracles.

Random numbers
--------------
All randomness comes from :class:`PortableRng`. Its integer stream is
numpy's PCG64 (PCG XSL RR 128/64) seeded through ``SeedSequence(seed)``;
``random_raw()`` yields the 64-bit words. Uniforms are ``(w >> 11) * 2**-53``
and standard normals use the Box-Muller transform on consecutive uniform
pairs ``(u1, u2)``::

    r = sqrt(-2 ln(1 - u1))
    z0 = r cos(2 pi u2), z1 = r sin(2 pi u2)

emitted in the order z0, z1. Nothing else touches the stream, so results
replicate in any language with a PCG64 implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .series import Period, SeriesTable, TimeSeries


class PortableRng:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._bits = np.random.PCG64(np.random.SeedSequence(self.seed))

    def raw(self, n: int) -> np.ndarray:
        return np.asarray(self._bits.random_raw(int(n)), dtype=np.uint64)

    def uniform(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    def normal(self, n: int) -> np.ndarray:
        n = int(n)
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.column_stack([r * np.cos(theta), r * np.sin(theta)]).ravel()
        return z[:n]


@dataclass(frozen=True)
class Tone:
    frequency: float
    amplitude: float = 1.0
    phase: float = 0.0


@dataclass(frozen=True)
class ToneMixSpec:
    """Sum of sinusoids ``a sin(2 pi f t + phase)`` on ``t = 0..length-1``
    plus a polynomial trend ``c0 + c1 t + c2 t**2 + ...`` and Gaussian noise."""

    tones: tuple[Tone, ...] = ()
    trend: tuple[float, ...] = ()
    noise_sd: float = 0.0
    length: int = 256
    seed: int = 0
    name: str = "tone_mix"
    start: str = "1990Q1"

    def __post_init__(self):
        tones = tuple(t if isinstance(t, Tone) else Tone(*t) for t in self.tones)
        object.__setattr__(self, "tones", tones)
        object.__setattr__(self, "trend", tuple(float(c) for c in self.trend))
        for t in tones:
            if not 0 < t.frequency < 0.5:
                raise ValueError(f"tone frequency must be in (0, 0.5), got {t.frequency}")
        if self.length < 8:
            raise ValueError("length must be >= 8")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


def gen_tone_mix(spec: ToneMixSpec) -> TimeSeries:
    t = np.arange(spec.length, dtype=float)
    x = np.zeros(spec.length)
    for tone in spec.tones:
        x = x + tone.amplitude * np.sin(2.0 * np.pi * tone.frequency * t + tone.phase)
    if spec.trend:
        x = x + np.polynomial.polynomial.polyval(t, spec.trend)
    if spec.noise_sd > 0:
        x = x + spec.noise_sd * PortableRng(spec.seed).normal(spec.length)
    return TimeSeries(spec.name, Period.parse(spec.start), x)


@dataclass(frozen=True)
class VarGenSpec:
    """Bivariate VAR(p): ``coefs[l-1][i][j]`` is the lag-``l`` effect of
    variable j on variable i."""

    coefs: np.ndarray
    cov: np.ndarray = field(default_factory=lambda: np.eye(2))
    length: int = 500
    burn_in: int = 500
    seed: int = 0
    intercepts: tuple[float, float] = (0.0, 0.0)
    names: tuple[str, str] = ("x", "y")
    start: str = "1990Q1"

    def __post_init__(self):
        coefs = np.asarray(self.coefs, dtype=float)
        if coefs.ndim == 2:
            coefs = coefs[None]
        if coefs.ndim != 3 or coefs.shape[1:] != (2, 2) or coefs.shape[0] < 1:
            raise ValueError(f"coefs must have shape (p, 2, 2), got {coefs.shape}")
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ValueError("cov must be a symmetric 2x2 matrix")
        if self.burn_in < 100:
            raise ValueError("burn_in must be >= 100")
        if self.length < 1:
            raise ValueError("length must be >= 1")
        object.__setattr__(self, "coefs", coefs)
        object.__setattr__(self, "cov", cov)
        rho = companion_radius(coefs)
        if rho >= 1.0:
            raise ValueError(f"non-stationary VAR: companion spectral radius {rho:.4f} >= 1")

    @property
    def p(self) -> int:
        return self.coefs.shape[0]


def companion_radius(coefs: np.ndarray) -> float:
    p = coefs.shape[0]
    top = np.hstack(list(coefs))
    if p > 1:
        top = np.vstack([top, np.hstack([np.eye(2 * (p - 1)), np.zeros((2 * (p - 1), 2))])])
    return float(np.max(np.abs(np.linalg.eigvals(top))))


def gen_var_process(spec: VarGenSpec) -> tuple[TimeSeries, TimeSeries]:
    """Simulate from zero initial conditions and drop the burn-in."""
    total = spec.length + spec.burn_in
    chol = np.linalg.cholesky(spec.cov)
    shocks = PortableRng(spec.seed).normal(2 * total).reshape(total, 2) @ chol.T
    mu = np.asarray(spec.intercepts, dtype=float)
    p = spec.p
    data = np.zeros((total + p, 2))
    for t in range(total):
        acc = mu + shocks[t]
        for l in range(1, p + 1):
            acc = acc + spec.coefs[l - 1] @ data[p + t - l]
        data[p + t] = acc
    kept = data[p + spec.burn_in :]
    start = Period.parse(spec.start)
    return (
        TimeSeries(spec.names[0], start, kept[:, 0]),
        TimeSeries(spec.names[1], start, kept[:, 1]),
    )


def brute_force_ols(y: Sequence[float], X: Sequence[Sequence[float]]) -> list[float]:
    """Normal equations solved by Gauss-Jordan elimination with partial
    pivoting, in plain Python floats. X is used as given (no intercept added).
    """
    if len(X) and np.ndim(X[0]) == 0:
        rows = [[float(v)] for v in X]
    else:
        rows = [[float(v) for v in r] for r in X]
    yv = [float(v) for v in y]
    n, k = len(rows), len(rows[0])
    A = [[sum(rows[t][i] * rows[t][j] for t in range(n)) for j in range(k)] for i in range(k)]
    b = [sum(rows[t][i] * yv[t] for t in range(n)) for i in range(k)]
    M = [A[i] + [b[i]] for i in range(k)]
    for col in range(k):
        pivot = max(range(col, k), key=lambda r: abs(M[r][col]))
        if M[pivot][col] == 0.0:
            raise ValueError("singular normal equations")
        M[col], M[pivot] = M[pivot], M[col]
        piv = M[col][col]
        M[col] = [v / piv for v in M[col]]
        for r in range(k):
            if r != col and M[r][col] != 0.0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[i][k] for i in range(k)]


def brute_force_extrema(values: Sequence[float]) -> tuple[list[int], list[int]]:
    """Exhaustive interior extremum scan; plateaus report their midpoint."""
    v = [float(a) for a in values]
    n = len(v)
    if n < 3:
        raise ValueError("need at least 3 values")
    maxima, minima = [], []
    for i in range(1, n - 1):
        lo = i
        while lo > 0 and v[lo - 1] == v[i]:
            lo -= 1
        hi = i
        while hi < n - 1 and v[hi + 1] == v[i]:
            hi += 1
        if lo == 0 or hi == n - 1 or i != (lo + hi) // 2:
            continue
        if v[lo - 1] < v[i] and v[hi + 1] < v[i]:
            maxima.append(i)
        elif v[lo - 1] > v[i] and v[hi + 1] > v[i]:
            minima.append(i)
    return maxima, minima


DEMO_START = "1990Q1"
DEMO_END = "2015Q3"


def demo_dataset(seed: int = 2011) -> SeriesTable:
    """Quarterly 1990Q1-2015Q3 table shaped like a small open economy.

    Levels (``gdp``, ``pop``) and ratios are strictly positive so that the
    per-capita and log transforms apply. ``rem_gdp`` leads ``ggdp`` through a
    slow channel and ``cons_gdp`` through a fast one.
    """
    start = Period.parse(DEMO_START)
    n = Period.parse(DEMO_END) - start + 1
    rng = PortableRng(seed)
    t = np.arange(n, dtype=float)

    def ar1(phi, sd):
        e = sd * rng.normal(n + 100)
        out = np.zeros(n + 100)
        for i in range(1, n + 100):
            out[i] = phi * out[i - 1] + e[i]
        return out[100:]

    rem = 4.0 + 0.01 * t + 0.35 * np.sin(2 * np.pi * t / 22.0) + 0.15 * np.sin(2 * np.pi * t / 3.1) + ar1(0.6, 0.08)
    rem_lag = np.concatenate(([rem[0]], rem[:-1]))
    rem_lag2 = np.concatenate(([rem[0]] * 2, rem[:-2]))
    fdi = 2.5 + 0.3 * np.sin(2 * np.pi * t / 17.0 + 1.0) + ar1(0.5, 0.1)
    open_ = 85.0 + 0.05 * t + 3.0 * np.sin(2 * np.pi * t / 26.0) + ar1(0.7, 0.8)
    reer = 100.0 - 0.1 * t + 4.0 * np.sin(2 * np.pi * t / 30.0 + 0.5) + ar1(0.8, 1.0)
    cpi = 60.0 * np.exp(0.009 * t) + ar1(0.5, 0.3)
    inv = 24.0 - 0.5 * (rem_lag - 4.0) + 1.5 * np.sin(2 * np.pi * t / 2.6) + ar1(0.4, 0.4)
    ggdp = 1.0 + 0.6 * (rem_lag + rem_lag2 - 8.0) + 0.08 * (inv - 24.0) + 0.9 * np.sin(2 * np.pi * t / 5.3) + ar1(0.3, 0.35)
    cons = 65.0 + 2.0 * (rem_lag - 4.0) - 0.3 * ggdp + 1.2 * np.sin(2 * np.pi * t / 2.3) + ar1(0.5, 0.5)
    pop = 8.2e6 * np.exp(0.0035 * t)
    gdp = 4.5e9 * np.exp(0.008 * t + 0.01 * np.cumsum(ggdp - 1.0) / 4.0)
    cols = {
        "gdp": gdp,
        "pop": pop,
        "ggdp": ggdp,
        "rem_gdp": rem,
        "inv_gdp": inv,
        "cons_gdp": cons,
        "fdi_gdp": fdi,
        "open": open_,
        "reer": reer,
        "cpi": cpi,
    }
    return SeriesTable({k: TimeSeries(k, start, np.round(v, 6)) for k, v in cols.items()})
