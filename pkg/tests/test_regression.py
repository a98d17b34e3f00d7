import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emdscale.emd import Decomposition, Imf, decompose
from emdscale.regression import (
    STOCK_YOGO_10PCT,
    STOCK_YOGO_15PCT,
    TIME_DOMAIN,
    RankDeficiencyError,
    RegressionError,
    RegressionSpec,
    build_instruments,
    cragg_donald,
    ols,
    scale_regressions,
    stock_yogo_flags,
    two_sls,
)
from emdscale.series import Period, TimeSeries, table_from_arrays
from emdscale.synth import brute_force_ols


def first_stage_f(x_endo, W, Z):
    """Excluded-instrument F from restricted and unrestricted residual sums."""
    n = len(x_endo)
    Wc = np.column_stack([np.ones(n), W]) if W is not None else np.ones((n, 1))
    full = np.column_stack([Wc, Z])
    rss_r = np.sum((x_endo - Wc @ np.linalg.lstsq(Wc, x_endo, rcond=None)[0]) ** 2)
    rss_u = np.sum((x_endo - full @ np.linalg.lstsq(full, x_endo, rcond=None)[0]) ** 2)
    q = Z.shape[1]
    return ((rss_r - rss_u) / q) / (rss_u / (n - full.shape[1]))


class TestOls:
    def test_exact_fit(self):
        r = ols([1, 2, 3], [1, 2, 3])
        np.testing.assert_allclose(r.coefficients, [0.0, 1.0], atol=1e-12)
        assert r.r_squared == 1.0
        assert r.names == ["C", "x1"]

    def test_explicit_two_by_two_inverse(self):
        x = np.array([1.0, 2, 3, 4])
        y = x + np.array([0.1, -0.1, 0.1, -0.1])
        n, sx, sxx = 4.0, x.sum(), (x * x).sum()
        sy, sxy = y.sum(), (x * y).sum()
        det = n * sxx - sx * sx
        b0 = (sxx * sy - sx * sxy) / det
        b1 = (n * sxy - sx * sy) / det
        np.testing.assert_allclose(ols(y, x).coefficients, [b0, b1], rtol=1e-10, atol=1e-12)

    def test_duplicate_columns(self):
        x = np.arange(10.0)
        with pytest.raises(RankDeficiencyError, match="'b'"):
            ols(np.sin(x), np.column_stack([x, x]), names=["a", "b"])

    def test_too_few_observations(self):
        with pytest.raises(RegressionError, match="insufficient"):
            ols([1.0, 2.0], [1.0, 3.0])

    def test_no_intercept(self):
        r = ols([2.0, 4.0, 6.1], [1.0, 2.0, 3.0], intercept=False)
        assert r.names == ["x1"]
        assert r.coefficients[0] == pytest.approx(brute_force_ols([2.0, 4.0, 6.1], [1.0, 2.0, 3.0])[0], rel=1e-12)

    def test_matches_statsmodels_style_formulas(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 2))
        y = 1 + X @ [0.5, -1.0] + rng.normal(size=30)
        r = ols(y, X)
        D = np.column_stack([np.ones(30), X])
        beta = np.linalg.solve(D.T @ D, D.T @ y)
        e = y - D @ beta
        se = np.sqrt(np.diag(e @ e / 27 * np.linalg.inv(D.T @ D)))
        np.testing.assert_allclose(r.std_errors, se, rtol=1e-10)
        assert r.df_resid == 27
        assert 0.0 <= r.r_squared <= 1.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.001, 1000))
    def test_scaling_equivariance(self, seed, a):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(15, 2))
        y = rng.normal(size=15)
        base = ols(y, X)
        Xs = X.copy()
        Xs[:, 0] *= a
        moved = ols(y, Xs)
        assert moved.coefficients[1] == pytest.approx(base.coefficients[1] / a, rel=1e-8)
        assert moved.t_stats[1] == pytest.approx(base.t_stats[1], rel=1e-10, abs=1e-10)


class TestInstruments:
    def test_shift(self):
        Z = build_instruments([1.0, 2, 3, 4], 1)
        assert Z[:, 0].tolist() == [1.0, 2.0, 3.0]

    def test_two_lags(self):
        Z = build_instruments([1.0, 2, 3, 4], 2)
        assert Z.shape == (2, 2)
        assert Z.tolist() == [[2.0, 1.0], [3.0, 2.0]]

    def test_too_many_lags(self):
        with pytest.raises(RegressionError, match="insufficient"):
            build_instruments([1.0, 2, 3, 4], 4)


class TestTwoSls:
    def test_empty_endogenous_is_ols(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(40, 3))
        y = rng.normal(size=40)
        a, b = two_sls(y, X), ols(y, X)
        np.testing.assert_allclose(a.coefficients, b.coefficients, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(a.t_stats, b.t_stats, rtol=1e-10, atol=1e-12)

    def test_self_instrument_is_ols(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 2))
        y = X @ [1.0, 2.0] + rng.normal(size=40)
        a = two_sls(y, X, [0], X[:, [0]])
        np.testing.assert_allclose(a.coefficients, ols(y, X).coefficients, rtol=1e-10, atol=1e-12)
        assert a.cragg_donald_f >= 1e12
        assert a.stock_yogo.strong

    def test_just_identified_closed_form(self):
        rng = np.random.default_rng(6)
        n = 200
        z = rng.normal(size=n)
        u = rng.normal(size=n)
        x = 0.8 * z + 0.5 * u + rng.normal(size=n)
        y = 1.0 + 2.0 * x + u
        r = two_sls(y, x, [0], z)
        Zc = np.column_stack([np.ones(n), z])
        Xc = np.column_stack([np.ones(n), x])
        np.testing.assert_allclose(r.coefficients, np.linalg.solve(Zc.T @ Xc, Zc.T @ y), rtol=1e-8)

    def test_named_endogenous(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(50, 2))
        Z = rng.normal(size=(50, 1)) + X[:, [1]]
        r = two_sls(X @ [1, 1] + rng.normal(size=50), X, ["b"], Z, names=["a", "b"])
        assert r.names == ["C", "a", "b"]
        assert r.estimator == "tsls" and r.r_squared is None

    def test_under_identified(self):
        X = np.random.default_rng(8).normal(size=(30, 2))
        with pytest.raises(RegressionError, match="under-identified"):
            two_sls(X[:, 0], X, [0, 1], X[:, [0]])

    def test_unknown_endogenous(self):
        X = np.random.default_rng(8).normal(size=(30, 2))
        with pytest.raises(RegressionError, match="unknown"):
            two_sls(X[:, 0], X, ["zz"], X[:, [0]], names=["a", "b"])


class TestCraggDonald:
    def test_equals_first_stage_f(self):
        rng = np.random.default_rng(9)
        n = 120
        W = rng.normal(size=(n, 2))
        Z = rng.normal(size=(n, 3))
        x = W @ [0.3, -0.2] + Z @ [0.4, 0.1, 0.0] + rng.normal(size=n)
        assert cragg_donald(x, W, Z) == pytest.approx(first_stage_f(x, W, Z), rel=1e-10)

    def test_perfect_instrument(self):
        z = np.random.default_rng(10).normal(size=50)
        f = cragg_donald(3 * z, None, z)
        assert f >= 1e12
        assert stock_yogo_flags(f).strong

    def test_null_median_near_one(self):
        fs = []
        for s in range(500):
            rng = np.random.default_rng(20_000 + s)
            fs.append(cragg_donald(rng.normal(size=200), None, rng.normal(size=200)))
        assert 0.3 <= np.median(fs) <= 2.0

    def test_multiple_endogenous_bounded_by_single(self):
        rng = np.random.default_rng(11)
        Z = rng.normal(size=(100, 3))
        X = Z @ rng.normal(size=(3, 2)) + rng.normal(size=(100, 2))
        joint = cragg_donald(X, None, Z)
        assert 0 < joint <= min(cragg_donald(X[:, [0]], None, Z), cragg_donald(X[:, [1]], None, Z)) + 1e-9

    @pytest.mark.parametrize(
        "f,label",
        [
            (STOCK_YOGO_10PCT + 1e-9, "strong"),
            (STOCK_YOGO_10PCT, "marginal"),
            (STOCK_YOGO_15PCT + 1e-9, "marginal"),
            (STOCK_YOGO_15PCT, "weak"),
            (1.0, "weak"),
        ],
    )
    def test_flags_flip_at_thresholds(self, f, label):
        assert stock_yogo_flags(f).label == label


def _decomposition(name, imfs, residue):
    source = sum(imfs, np.zeros_like(residue)) + residue
    return Decomposition(TimeSeries(name, Period(1990, 1), source), [Imf(v, i + 1, 1) for i, v in enumerate(imfs)], residue)


class TestScaleGrid:
    def _setup(self, n_modes=7, n=120):
        rng = np.random.default_rng(12)
        modes = {v: [rng.normal(size=n) for _ in range(n_modes)] for v in ("x", "w")}
        decs = {v: _decomposition(v, m, rng.normal(size=n) * 0.01) for v, m in modes.items()}
        decs["y"] = _decomposition("y", [a.copy() for a in modes["x"]], np.zeros(n))
        table = table_from_arrays({v: d.source.values for v, d in decs.items()})
        return table, decs

    def test_shape_and_exact_fit(self):
        table, decs = self._setup()
        grid = scale_regressions(table, decs, RegressionSpec("y", ("x", "w")))
        assert grid.columns == [TIME_DOMAIN] + [f"IMF{k}" for k in range(1, 8)]
        for k in range(1, 8):
            cell = grid.cells[f"IMF{k}"]
            assert cell.coef("x") == pytest.approx(1.0, abs=1e-10)
            assert cell.coef("w") == pytest.approx(0.0, abs=1e-10)
            assert cell.r_squared == pytest.approx(1.0, abs=1e-12)
        assert not grid.errors

    def test_unequal_modes_zero_padded(self):
        table, decs = self._setup(n_modes=3)
        short = decs["w"]
        decs["w"] = _decomposition("w", [c.values for c in short.imfs[:2]], short.residue)
        grid = scale_regressions(table, decs, RegressionSpec("y", ("x", "w")))
        assert any("unequal mode counts" in w for w in grid.warnings)
        assert grid.cells["IMF3"] is None
        assert "collinear" in grid.errors["IMF3"]

    def test_tsls_grid_trims_lag_rows(self):
        table, decs = self._setup(n_modes=2)
        spec = RegressionSpec("y", ("x", "w"), estimator="tsls", endogenous=("x",), instrument_lags=2)
        grid = scale_regressions(table, decs, spec)
        cell = grid.cells[TIME_DOMAIN]
        assert cell.n_obs == 118
        assert cell.cragg_donald_f is not None

    def test_not_additive_across_scales(self):
        rng = np.random.default_rng(13)
        n = 200
        t = np.arange(n)
        x = np.sin(2 * np.pi * 0.2 * t) + np.sin(2 * np.pi * 0.03 * t) + 0.1 * rng.normal(size=n)
        y = 2 * np.sin(2 * np.pi * 0.2 * t) - np.sin(2 * np.pi * 0.03 * t) + 0.1 * rng.normal(size=n)
        table = table_from_arrays({"y": y, "x": x})
        decs = {"y": decompose(table["y"]), "x": decompose(table["x"])}
        grid = scale_regressions(table, decs, RegressionSpec("y", ("x",)))
        td = grid.cells[TIME_DOMAIN]
        fitted_sum = sum(
            grid.cells[c].coefficients[0] + grid.cells[c].coefficients[1] * decs["x"].imf(int(c[3:]))
            for c in grid.columns[1:]
            if grid.cells[c] is not None
        )
        assert not np.allclose(fitted_sum, td.coefficients[0] + td.coefficients[1] * x, atol=1e-3)

    def test_missing_decomposition(self):
        table, decs = self._setup(n_modes=1)
        del decs["w"]
        with pytest.raises(RegressionError, match="'w'"):
            scale_regressions(table, decs, RegressionSpec("y", ("x", "w")))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"estimator": "gmm"},
        {"endogenous": ("z",)},
        {"estimator": "tsls", "instrument_lags": 0},
        {"regressors": ()},
        {"regressors": ("y",)},
    ],
)
def test_spec_validation(kwargs):
    base = {"dependent": "y", "regressors": ("x",)}
    base.update(kwargs)
    with pytest.raises(ValueError):
        RegressionSpec(**base)
