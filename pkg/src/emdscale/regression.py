"""Time-domain and per-scale regressions: OLS, lagged-instrument 2SLS and the
Cragg-Donald weak-instrument statistic."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg, stats

from .emd import Decomposition
from .series import SeriesTable

logger = logging.getLogger(__name__)

# Stock-Yogo critical values for one endogenous regressor: 10% and 15%
# maximal IV size.
STOCK_YOGO_10PCT = 17.02
STOCK_YOGO_15PCT = 13.85

TIME_DOMAIN = "Time domain"
INTERCEPT_NAME = "C"


class RegressionError(ValueError):
    pass


class RankDeficiencyError(RegressionError):
    pass


@dataclass(frozen=True)
class StockYogoFlags:
    strong: bool
    marginal: bool

    @property
    def label(self) -> str:
        if self.strong:
            return "strong"
        if self.marginal:
            return "marginal"
        return "weak"


def stock_yogo_flags(f_stat: float) -> StockYogoFlags:
    return StockYogoFlags(strong=f_stat > STOCK_YOGO_10PCT, marginal=f_stat > STOCK_YOGO_15PCT)


@dataclass(frozen=True, eq=False)
class RegressionResult:
    names: list[str]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    n_obs: int
    df_resid: int
    estimator: str
    residuals: np.ndarray
    r_squared: float | None = None
    cragg_donald_f: float | None = None

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def tstat(self, name: str) -> float:
        return float(self.t_stats[self.names.index(name)])

    @property
    def stock_yogo(self) -> StockYogoFlags | None:
        if self.cragg_donald_f is None:
            return None
        return stock_yogo_flags(self.cragg_donald_f)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise RegressionError(f"regressor matrix must be 2-d, got shape {X.shape}")
    return X


def _design(X: np.ndarray, intercept: bool) -> np.ndarray:
    if intercept:
        return np.column_stack([np.ones(X.shape[0]), X])
    return X


def _names(k: int, names: Sequence[str] | None, intercept: bool) -> list[str]:
    if names is None:
        names = [f"x{i + 1}" for i in range(k)]
    names = list(names)
    if len(names) != k:
        raise RegressionError(f"{len(names)} names given for {k} regressors")
    return [INTERCEPT_NAME, *names] if intercept else names


def check_rank(D: np.ndarray, names: Sequence[str], what: str = "design") -> None:
    """Raise naming the first column that is a linear combination of earlier ones."""
    if np.linalg.matrix_rank(D) == D.shape[1]:
        return
    for j in range(D.shape[1]):
        if np.linalg.matrix_rank(D[:, : j + 1]) <= j:
            raise RankDeficiencyError(f"{what} is rank deficient: column {names[j]!r} is collinear")
    raise RankDeficiencyError(f"{what} is rank deficient")


def _fit(y, D, D_hat):
    """Least squares of y on D_hat; residuals and errors measured with D."""
    n, p = D.shape
    q, r = np.linalg.qr(D_hat)
    beta = linalg.solve_triangular(r, q.T @ y)
    resid = y - D @ beta
    df = n - p
    sigma2 = float(resid @ resid) / df
    r_inv = linalg.solve_triangular(r, np.eye(p))
    cov = sigma2 * (r_inv @ r_inv.T)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    pvals = 2.0 * stats.t.sf(np.abs(t), df)
    return beta, se, t, pvals, resid, df


def ols(y, X, intercept: bool = True, names: Sequence[str] | None = None) -> RegressionResult:
    """Ordinary least squares with classical (homoskedastic) standard errors.

    R-squared is centred when an intercept is present and uncentred otherwise.
    """
    y = np.asarray(y, dtype=float)
    X = _as_matrix(X)
    if X.shape[0] != y.size:
        raise RegressionError(f"y has {y.size} rows but X has {X.shape[0]}")
    labels = _names(X.shape[1], names, intercept)
    D = _design(X, intercept)
    n, p = D.shape
    if n <= p:
        raise RegressionError(f"insufficient observations: n={n} for {p} parameters")
    check_rank(D, labels)
    beta, se, t, pvals, resid, df = _fit(y, D, D)
    ssr = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2)) if intercept else float(y @ y)
    r2 = 1.0 - ssr / sst if sst > 0 else float("nan")
    if intercept and np.isfinite(r2):
        r2 = min(1.0, max(0.0, r2))
    return RegressionResult(labels, beta, se, t, pvals, n, df, "ols", resid, r_squared=r2)


def build_instruments(X, lags: int = 1) -> np.ndarray:
    """Lags 1..``lags`` of every column of X.

    Row ``i`` of the result aligns with row ``i + lags`` of X: callers drop
    the first ``lags`` rows of y and X. Columns run lag-1 of each regressor,
    then lag-2, and so on.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    if lags < 1:
        raise RegressionError("instrument lags must be >= 1")
    if lags >= n:
        raise RegressionError(f"insufficient data: {lags} lags on a {n}-row sample")
    return np.column_stack([X[lags - l : n - l] for l in range(1, lags + 1)])


def _resolve_columns(selection, names: Sequence[str] | None, k: int) -> list[int]:
    out = []
    for item in selection:
        if isinstance(item, (int, np.integer)):
            idx = int(item)
        else:
            if names is None or item not in names:
                raise RegressionError(f"unknown regressor {item!r}")
            idx = list(names).index(item)
        if not 0 <= idx < k:
            raise RegressionError(f"regressor index {idx} out of range")
        out.append(idx)
    return sorted(set(out))


def _residualize(A: np.ndarray, B: np.ndarray | None) -> np.ndarray:
    if B is None or B.shape[1] == 0:
        return A
    coef, *_ = np.linalg.lstsq(B, A, rcond=None)
    return A - B @ coef


def cragg_donald(endogenous, exogenous, Z, intercept: bool = True) -> float:
    """Cragg-Donald minimum-eigenvalue statistic without small-sample correction.

    With a single endogenous regressor this is the first-stage F statistic on
    the excluded instruments after partialling out the exogenous regressors
    (and intercept). A perfect first stage returns ``inf``.
    """
    Xe = _as_matrix(endogenous)
    Z = _as_matrix(Z)
    n = Xe.shape[0]
    parts = [np.ones((n, 1))] if intercept else []
    if exogenous is not None:
        W = _as_matrix(exogenous)
        if W.shape[1]:
            parts.append(W)
    W1 = np.column_stack(parts) if parts else None
    k1 = 0 if W1 is None else W1.shape[1]
    k2 = Z.shape[1]
    if k2 == 0:
        raise RegressionError("Cragg-Donald needs at least one excluded instrument")
    df = n - k1 - k2
    if df <= 0:
        raise RegressionError(f"insufficient observations for Cragg-Donald: n={n}, k={k1 + k2}")
    Xt = _residualize(Xe, W1)
    Zt = _residualize(Z, W1)
    check_rank(Zt, [f"z{i + 1}" for i in range(k2)], "partialled instrument matrix")
    fitted = Zt @ np.linalg.lstsq(Zt, Xt, rcond=None)[0]
    explained = Xt.T @ fitted
    unexplained = Xt.T @ (Xt - fitted) / df
    if Xe.shape[1] == 1:
        total = float(Xt[:, 0] @ Xt[:, 0])
        if total == 0.0:
            return 0.0
        den = float(unexplained[0, 0])
        # residual sum of squares at rounding level: perfect first stage
        if den * df <= 1e-16 * total:
            return float("inf")
        return float(explained[0, 0]) / k2 / den
    w, v = np.linalg.eigh(unexplained)
    if np.min(w) <= 0:
        return float("inf")
    root_inv = v @ np.diag(w ** -0.5) @ v.T
    g = root_inv @ explained @ root_inv / k2
    return float(np.min(np.linalg.eigvalsh(g)))


def two_sls(
    y,
    X,
    endogenous: Sequence = (),
    Z=None,
    intercept: bool = True,
    names: Sequence[str] | None = None,
) -> RegressionResult:
    """Two-stage least squares.

    Stage 1 regresses each endogenous column of X on the exogenous columns
    (plus intercept) and the excluded instruments Z. Stage 2 is least squares
    of y on the fitted endogenous and the exogenous columns. Standard errors
    use ``y - X b`` with the original X and ``n - k`` degrees of freedom.
    """
    y = np.asarray(y, dtype=float)
    X = _as_matrix(X)
    n, k = X.shape
    if y.size != n:
        raise RegressionError(f"y has {y.size} rows but X has {n}")
    labels = _names(k, names, intercept)
    endo = _resolve_columns(endogenous, names, k)
    Z = np.zeros((n, 0)) if Z is None else _as_matrix(Z)
    if Z.shape[0] != n:
        raise RegressionError(f"instrument matrix has {Z.shape[0]} rows, expected {n}")
    if Z.shape[1] < len(endo):
        raise RegressionError(
            f"under-identified: {Z.shape[1]} excluded instruments for {len(endo)} endogenous regressors"
        )
    D = _design(X, intercept)
    p = D.shape[1]
    if n <= p:
        raise RegressionError(f"insufficient observations: n={n} for {p} parameters")
    check_rank(D, labels)

    D_hat = D
    cd = None
    if endo:
        exo = [j for j in range(k) if j not in endo]
        W = _design(np.column_stack([X[:, exo], Z]) if exo else Z, intercept)
        w_labels = ([INTERCEPT_NAME] if intercept else []) + [labels[j + intercept] for j in exo]
        w_labels += [f"z{i + 1}" for i in range(Z.shape[1])]
        if n <= W.shape[1]:
            raise RegressionError(f"insufficient observations for first stage: n={n}")
        check_rank(W, w_labels, "first-stage instrument matrix")
        first = np.linalg.lstsq(W, X[:, endo], rcond=None)[0]
        X_hat = X.copy()
        X_hat[:, endo] = W @ first
        D_hat = _design(X_hat, intercept)
        check_rank(D_hat, labels, "second-stage design")
        cd = cragg_donald(X[:, endo], X[:, exo] if exo else None, Z, intercept)
    beta, se, t, pvals, resid, df = _fit(y, D, D_hat)
    return RegressionResult(labels, beta, se, t, pvals, n, df, "tsls", resid, cragg_donald_f=cd)


@dataclass(frozen=True)
class RegressionSpec:
    dependent: str
    regressors: tuple[str, ...]
    intercept: bool = True
    estimator: str = "ols"
    endogenous: tuple[str, ...] = ()
    instrument_lags: int = 1
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "regressors", tuple(self.regressors))
        object.__setattr__(self, "endogenous", tuple(self.endogenous))
        if self.estimator not in ("ols", "tsls"):
            raise ValueError(f"estimator must be 'ols' or 'tsls', got {self.estimator!r}")
        if not set(self.endogenous) <= set(self.regressors):
            raise ValueError("endogenous regressors must be a subset of the regressors")
        if self.estimator == "tsls" and self.instrument_lags < 1:
            raise ValueError("instrument_lags must be >= 1 for tsls")
        if not self.regressors:
            raise ValueError("at least one regressor is required")
        if self.dependent in self.regressors:
            raise ValueError("dependent variable cannot also be a regressor")

    @property
    def variables(self) -> tuple[str, ...]:
        return (self.dependent, *self.regressors)

    @property
    def label(self) -> str:
        return self.name or self.dependent


@dataclass(eq=False)
class ResultGrid:
    spec: RegressionSpec
    columns: list[str]
    cells: dict[str, RegressionResult | None]
    errors: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def row_names(self) -> list[str]:
        return _names(len(self.spec.regressors), self.spec.regressors, self.spec.intercept)


def fit_spec(y, X, spec: RegressionSpec) -> RegressionResult:
    if spec.estimator == "ols":
        return ols(y, X, spec.intercept, spec.regressors)
    X = _as_matrix(X)
    L = spec.instrument_lags
    Z = build_instruments(X, L)
    endo = [n for n in spec.regressors if n in spec.endogenous]
    return two_sls(y[L:], X[L:], endo, Z, spec.intercept, spec.regressors)


def scale_regressions(
    table: SeriesTable,
    decompositions: Mapping[str, Decomposition],
    spec: RegressionSpec,
) -> ResultGrid:
    """Time-domain regression plus one regression per IMF index.

    Column ``IMFk`` regresses IMF k of the dependent variable on IMF k of each
    regressor. Variables with fewer modes contribute zero series for the
    missing indices and the grid records a warning; cells that cannot be
    estimated carry an error message instead of a result.
    """
    missing = [v for v in spec.variables if v not in decompositions]
    if missing:
        raise RegressionError(f"no decomposition for variables {missing}")
    counts = {v: decompositions[v].n_imfs for v in spec.variables}
    n_modes = max(counts.values())
    warnings = []
    if len(set(counts.values())) > 1:
        warnings.append(
            f"{spec.label}: unequal mode counts {counts}; missing modes treated as zero series"
        )
    columns = [TIME_DOMAIN] + [f"IMF{k}" for k in range(1, n_modes + 1)]
    cells: dict[str, RegressionResult | None] = {}
    errors: dict[str, str] = {}
    for col in columns:
        if col == TIME_DOMAIN:
            y = table[spec.dependent].values
            X = np.column_stack([table[r].values for r in spec.regressors])
        else:
            k = int(col[3:])
            y = decompositions[spec.dependent].imf(k)
            X = np.column_stack([decompositions[r].imf(k) for r in spec.regressors])
        try:
            cells[col] = fit_spec(np.asarray(y, dtype=float), X, spec)
        except (RegressionError, np.linalg.LinAlgError) as exc:
            cells[col] = None
            errors[col] = str(exc)
            warnings.append(f"{spec.label} [{spec.estimator}] {col}: {exc}")
    for w in warnings:
        logger.warning(w)
    return ResultGrid(spec, columns, cells, errors, warnings)
