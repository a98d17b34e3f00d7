"""Frequency-domain Granger causality for a bivariate VAR(p).

The hypothesis that ``x`` does not cause ``y`` at frequency ``omega`` is the
pair of linear restrictions

    sum_l b_l cos(l omega) = 0,   sum_l b_l sin(l omega) = 0

on the lag coefficients ``b_1 .. b_p`` of ``x`` in the ``y`` equation. The
Wald statistic is compared with the chi-square(2) 5% critical value.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .regression import RegressionError, check_rank

logger = logging.getLogger(__name__)

CHI2_2DF_5PCT = 5.99
CHI2_1DF_5PCT = 3.84
NEAR_UNIT_ROOT = 0.98


class VarError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VarModel:
    """Bivariate VAR(p) fitted equation by equation.

    ``coefs[l - 1, i, j]`` is the effect of variable ``j`` at lag ``l`` in the
    equation of variable ``i``. Each equation's regressors are ordered
    ``[1, x(t-1), y(t-1), x(t-2), y(t-2), ...]`` and ``coef_cov[i]`` is the
    classical least-squares covariance of that equation's coefficients.
    """

    p: int
    coefs: np.ndarray
    intercepts: np.ndarray
    sigma: np.ndarray
    coef_cov: np.ndarray
    n_obs: int
    names: tuple[str, str] = ("x", "y")

    def lag_index(self, variable: int, lag: int) -> int:
        return 1 + 2 * (lag - 1) + variable

    def cross_coefficients(self, cause: int, effect: int) -> tuple[np.ndarray, np.ndarray]:
        """Lag coefficients of ``cause`` in the ``effect`` equation and their covariance."""
        idx = [self.lag_index(cause, l) for l in range(1, self.p + 1)]
        beta = self.coefs[:, effect, cause].copy()
        cov = self.coef_cov[effect][np.ix_(idx, idx)]
        return beta, cov

    def companion(self) -> np.ndarray:
        p = self.p
        top = np.hstack([self.coefs[l] for l in range(p)])
        if p == 1:
            return top
        bottom = np.hstack([np.eye(2 * (p - 1)), np.zeros((2 * (p - 1), 2))])
        return np.vstack([top, bottom])

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))


def _lag_design(data: np.ndarray, p: int, start: int) -> np.ndarray:
    n = data.shape[0]
    cols = [np.ones(n - start)]
    for l in range(1, p + 1):
        cols.append(data[start - l : n - l, 0])
        cols.append(data[start - l : n - l, 1])
    return np.column_stack(cols)


def _pair(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise VarError(f"x and y must be 1-d with equal length, got {x.shape} and {y.shape}")
    return np.column_stack([x, y])


def fit_var(x, y, p: int, names: tuple[str, str] = ("x", "y")) -> VarModel:
    """Least-squares VAR(p) with intercepts.

    The residual covariance divides cross-products by ``n - p``; coefficient
    covariances use each equation's ``n - p - (2p + 1)`` degrees of freedom.
    """
    data = _pair(x, y)
    n = data.shape[0]
    if p < 1:
        raise VarError(f"lag order must be >= 1, got {p}")
    k = 2 * p + 1
    T = n - p
    if T <= k:
        raise VarError(f"insufficient observations: n={n} for a VAR({p}) needs n - p > {k}")
    D = _lag_design(data, p, p)
    labels = ["const"] + [f"{nm}(t-{l})" for l in range(1, p + 1) for nm in names]
    try:
        check_rank(D, labels, "VAR lag matrix")
    except RegressionError as exc:
        raise VarError(str(exc)) from None
    Y = data[p:]
    q, r = np.linalg.qr(D)
    B = linalg.solve_triangular(r, q.T @ Y)
    E = Y - D @ B
    r_inv = linalg.solve_triangular(r, np.eye(k))
    xtx_inv = r_inv @ r_inv.T
    s2 = np.sum(E * E, axis=0) / (T - k)
    coef_cov = np.stack([s2[i] * xtx_inv for i in range(2)])
    coefs = np.empty((p, 2, 2))
    for l in range(1, p + 1):
        for j in range(2):
            coefs[l - 1, :, j] = B[1 + 2 * (l - 1) + j]
    sigma = E.T @ E / T
    return VarModel(p, coefs, B[0].copy(), sigma, coef_cov, T, tuple(names))


def var_aic(x, y, p_max: int = 8) -> dict[int, float]:
    """AIC for p = 1..p_max on the common sample that starts at ``p_max``."""
    data = _pair(x, y)
    n = data.shape[0]
    if p_max < 1:
        raise VarError("p_max must be >= 1")
    T = n - p_max
    if T <= 2 * p_max + 1:
        raise VarError(f"insufficient observations for lag selection up to p={p_max}: n={n}")
    Y = data[p_max:]
    out = {}
    for p in range(1, p_max + 1):
        D = _lag_design(data, p, p_max)
        B, *_ = np.linalg.lstsq(D, Y, rcond=None)
        E = Y - D @ B
        sign, logdet = np.linalg.slogdet(E.T @ E / T)
        if sign <= 0:
            raise VarError(f"singular residual covariance at p={p}")
        out[p] = logdet + 2.0 * (2 * (2 * p + 1)) / T
    return out


def select_lag(x, y, p_max: int = 8) -> int:
    """Lag order minimising AIC; ties go to the smaller order."""
    if p_max == 1:
        _pair(x, y)
        return 1
    aic = var_aic(x, y, p_max)
    return min(aic, key=lambda p: (aic[p], p))


def restriction_matrix(omega: float, p: int) -> np.ndarray:
    lags = np.arange(1, p + 1)
    return np.vstack([np.cos(lags * omega), np.sin(lags * omega)])


def _check_omega(omega) -> np.ndarray:
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(w <= 0) or np.any(w >= math.pi):
        raise VarError("omega must lie strictly inside (0, pi); sin rows vanish at the ends")
    return w


def bc_statistics(model: VarModel, omegas, cause: int = 0, effect: int = 1) -> np.ndarray:
    """Vectorised :func:`bc_statistic` over a frequency grid."""
    w = _check_omega(omegas)
    beta, V = model.cross_coefficients(cause, effect)
    if model.p == 1:
        # one coefficient: the two rows collapse to the single restriction b_1 = 0
        return np.full(w.shape, float(beta[0] ** 2 / V[0, 0]))
    lags = np.arange(1, model.p + 1)
    R = np.stack([np.cos(np.outer(w, lags)), np.sin(np.outer(w, lags))], axis=1)
    Rb = R @ beta
    RVR = R @ V @ np.transpose(R, (0, 2, 1))
    sol = np.linalg.solve(RVR, Rb[..., None])[..., 0]
    return np.maximum(np.einsum("ij,ij->i", Rb, sol), 0.0)


def bc_statistic(model: VarModel, omega: float, cause: int = 0, effect: int = 1) -> float:
    """Wald statistic for no causality from ``cause`` to ``effect`` at ``omega``.

    Uses the unrestricted least-squares covariance of the effect equation.
    For p = 1 the restriction has rank one and the statistic is constant in
    ``omega``.
    """
    return float(bc_statistics(model, [omega], cause, effect)[0])


def omega_to_cycle(omega: float) -> float:
    """Cycle length ``2 pi / omega`` in observation periods."""
    if not 0 < omega <= math.pi:
        raise ValueError(f"omega must lie in (0, pi], got {omega}")
    return 2.0 * math.pi / omega


def default_grid(n_points: int = 99, lo: float = 0.01, hi: float = 0.99) -> np.ndarray:
    """Uniform grid over ``[lo * pi, hi * pi]``."""
    if n_points < 2:
        raise ValueError("grid needs at least 2 points")
    if not 0 < lo < hi < 1:
        raise ValueError("grid bounds must satisfy 0 < lo < hi < 1 (fractions of pi)")
    return np.linspace(lo * math.pi, hi * math.pi, n_points)


@dataclass(frozen=True, eq=False)
class CausalitySpectrum:
    cause: str
    effect: str
    p: int
    grid: np.ndarray
    statistics: np.ndarray
    critical_value: float
    test: str = "chi2"
    n_obs: int = 0
    spectral_radius: float = float("nan")
    notes: list[str] = field(default_factory=list)

    @property
    def significant(self) -> np.ndarray:
        return self.statistics > self.critical_value

    @property
    def significant_bands(self) -> list[tuple[float, float]]:
        """Maximal runs of grid points above the critical value, as (lo, hi)."""
        sig = self.significant
        bands = []
        i = 0
        while i < sig.size:
            if sig[i]:
                j = i
                while j + 1 < sig.size and sig[j + 1]:
                    j += 1
                bands.append((float(self.grid[i]), float(self.grid[j])))
                i = j + 1
            else:
                i += 1
        return bands

    @property
    def cycle_bands(self) -> list[tuple[float, float]]:
        return [(omega_to_cycle(a), omega_to_cycle(b)) for a, b in self.significant_bands]


def prewhiten(x, y, controls) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of x and y after least squares on an intercept and controls."""
    data = _pair(x, y)
    C = np.asarray(controls, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] != data.shape[0]:
        raise VarError("controls must have one row per observation")
    D = np.column_stack([np.ones(data.shape[0]), C])
    B, *_ = np.linalg.lstsq(D, data, rcond=None)
    E = data - D @ B
    return E[:, 0], E[:, 1]


def _critical(test: str, q: int, df: int) -> float:
    if test == "chi2":
        return CHI2_2DF_5PCT if q == 2 else CHI2_1DF_5PCT
    if test == "f":
        return float(stats.f.ppf(0.95, q, df))
    raise ValueError(f"test must be 'chi2' or 'f', got {test!r}")


def spectrum_from_model(
    model: VarModel,
    cause: int = 0,
    effect: int = 1,
    grid=None,
    test: str = "chi2",
) -> CausalitySpectrum:
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    stat = bc_statistics(model, grid, cause, effect)
    q = 2 if model.p >= 2 else 1
    df = model.n_obs - (2 * model.p + 1)
    notes = []
    if q == 1:
        notes.append("p = 1: restriction has rank 1; compared with chi2(1) 5% value")
    if test == "f":
        stat = stat / q
    crit = _critical(test, q, df)
    rho = model.spectral_radius()
    if rho > NEAR_UNIT_ROOT:
        notes.append(f"near unit root: companion spectral radius {rho:.4f} > {NEAR_UNIT_ROOT}")
    return CausalitySpectrum(
        cause=model.names[cause],
        effect=model.names[effect],
        p=model.p,
        grid=grid,
        statistics=stat,
        critical_value=crit,
        test=test,
        n_obs=model.n_obs,
        spectral_radius=rho,
        notes=notes,
    )


def causality_spectrum(
    x,
    y,
    p: int | None = None,
    grid=None,
    *,
    p_max: int = 8,
    test: str = "chi2",
    controls=None,
    names: tuple[str, str] = ("x", "y"),
    both: bool = False,
):
    """Causality from x to y across a frequency grid.

    ``p=None`` selects the lag order by AIC up to ``p_max``. With
    ``both=True`` returns ``(x_to_y, y_to_x)`` from the same fit.
    ``controls`` pre-whitens both series by least squares on them first.
    """
    if controls is not None:
        x, y = prewhiten(x, y, controls)
    if p is None:
        p = select_lag(x, y, p_max)
    model = fit_var(x, y, p, names)
    forward = spectrum_from_model(model, 0, 1, grid, test)
    for note in forward.notes:
        logger.warning("%s -> %s: %s", names[0], names[1], note)
    if not both:
        return forward
    return forward, spectrum_from_model(model, 1, 0, grid, test)
