import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from misfolio.timeseries import (
    EmptyUniverseError,
    InsufficientDataError,
    PriceFileError,
    PricePanel,
    ReturnMatrix,
    business_days,
    correlation,
    load_prices,
    log_returns,
    synth_panel,
    volatility,
    write_prices,
)


def panel_from(prices, tickers=None):
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    n_dates, n_tickers = prices.shape
    tickers = tickers or tuple(f"T{i}" for i in range(n_tickers))
    return PricePanel(dates=business_days("2020-01-01", n_dates), tickers=tuple(tickers), prices=prices)


def returns_from(values):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    return ReturnMatrix(
        dates=business_days("2020-01-01", values.shape[0]),
        tickers=tuple(f"T{i}" for i in range(values.shape[1])),
        values=values,
    )


# --- loading ---------------------------------------------------------------

def write_csv(tmp_path, text):
    path = tmp_path / "prices.csv"
    path.write_text(text, encoding="utf-8")
    return path


def test_load_well_formed(tmp_path):
    path = write_csv(tmp_path, "date,AAA,BBB\n2020-01-01,10,20\n2020-01-02,11,21\n2020-01-03,12,22\n")
    panel = load_prices(path)
    assert panel.tickers == ("AAA", "BBB")
    assert panel.prices.shape == (3, 2)
    assert panel.dates[0] == "2020-01-01"


def test_load_drops_ticker_with_missing_cell(tmp_path, caplog):
    path = write_csv(tmp_path, "date,AAA,BBB\n2020-01-01,10,20\n2020-01-02,,21\n2020-01-03,12,22\n")
    with caplog.at_level("WARNING"):
        panel = load_prices(path)
    assert panel.tickers == ("BBB",)
    assert any("AAA" in r.message for r in caplog.records)


def test_load_drops_ticker_with_negative_price(tmp_path, caplog):
    path = write_csv(tmp_path, "date,AAA,BBB\n2020-01-01,10,20\n2020-01-02,-1,21\n")
    with caplog.at_level("WARNING"):
        panel = load_prices(path)
    assert panel.tickers == ("BBB",)
    assert any("AAA" in r.message for r in caplog.records)


def test_load_malformed_number_reports_row_and_column(tmp_path):
    path = write_csv(tmp_path, "date,AAA\n2020-01-01,10\n2020-01-02,oops\n")
    with pytest.raises(PriceFileError, match=r"row 3, column 2"):
        load_prices(path)


def test_load_ragged_row_rejected(tmp_path):
    path = write_csv(tmp_path, "date,AAA,BBB\n2020-01-01,10,20\n2020-01-02,11\n")
    with pytest.raises(PriceFileError, match="row 3"):
        load_prices(path)


def test_load_bad_date_rejected(tmp_path):
    path = write_csv(tmp_path, "date,AAA\nJan 5,10\n")
    with pytest.raises(PriceFileError, match="bad date"):
        load_prices(path)


def test_load_non_increasing_dates_rejected(tmp_path):
    path = write_csv(tmp_path, "date,AAA\n2020-01-02,10\n2020-01-01,11\n")
    with pytest.raises(PriceFileError, match="increasing"):
        load_prices(path)


def test_load_empty_universe(tmp_path):
    path = write_csv(tmp_path, "date,AAA\n2020-01-01,\n")
    with pytest.raises(EmptyUniverseError):
        load_prices(path)


def test_write_then_load_round_trip(tmp_path):
    panel = synth_panel(4, 30, 2, seed=11)
    write_prices(panel, tmp_path / "p.csv")
    again = load_prices(tmp_path / "p.csv")
    assert again.tickers == panel.tickers
    assert again.dates == panel.dates
    assert np.array_equal(again.prices, panel.prices)


# --- log returns -----------------------------------------------------------

def test_log_returns_flat_price_is_zero():
    r = log_returns(panel_from([[100.0], [100.0]]))
    assert r.values[0, 0] == 0.0


def test_log_returns_e_ratio_is_one():
    r = log_returns(panel_from([[100.0], [100.0 * math.e]]))
    assert r.values[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_log_returns_ten_percent():
    # ln(1.1) from an independent high-precision evaluation
    r = log_returns(panel_from([[100.0], [110.0]]))
    assert r.values[0, 0] == pytest.approx(0.09531017980432486, abs=1e-12)


def test_log_returns_needs_two_dates():
    with pytest.raises(InsufficientDataError):
        log_returns(panel_from([[100.0]]))


def test_log_returns_shape_and_dates():
    panel = synth_panel(3, 10, 1, seed=0)
    r = log_returns(panel)
    assert r.values.shape == (9, 3)
    assert r.dates == panel.dates[1:]
    assert np.isfinite(r.values).all()


def test_round_trip_returns_to_prices_and_back():
    rng = np.random.default_rng(1)
    rets = 0.02 * rng.standard_normal((50, 4))
    prices = np.vstack([np.full(4, 100.0), 100.0 * np.exp(np.cumsum(rets, axis=0))])
    back = log_returns(panel_from(prices))
    assert np.allclose(back.values, rets, atol=1e-12)


# --- volatility ------------------------------------------------------------

def test_volatility_constant_series_is_zero():
    assert volatility(returns_from(np.full((10, 1), 0.013)), 10)[0] == 0.0


def test_volatility_alternating_series_population_std():
    r = 0.004
    series = np.array([[r], [-r]] * 5)
    assert volatility(returns_from(series), 10)[0] == pytest.approx(r, abs=1e-18)


def test_volatility_matches_two_pass_oracle():
    rng = np.random.default_rng(7)
    vals = 0.01 * rng.standard_normal((756, 3))
    got = volatility(returns_from(vals), 756)
    for i in range(3):
        col = vals[:, i]
        mean = sum(col) / len(col)
        var = sum((x - mean) ** 2 for x in col) / len(col)
        assert got[i] == pytest.approx(math.sqrt(var), abs=1e-12)


def test_volatility_window_restricts_to_trailing_rows():
    vals = np.vstack([np.full((5, 1), 99.0), np.zeros((5, 1))])
    assert volatility(returns_from(vals), 5)[0] == 0.0


def test_volatility_insufficient_rows():
    with pytest.raises(InsufficientDataError):
        volatility(returns_from(np.zeros((3, 1))), 5)


@given(st.floats(-5, 5), st.floats(-3, 3), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_volatility_affine_scaling(a, b, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((30, 2))
    base = volatility(returns_from(vals), 30)
    scaled = volatility(returns_from(a * vals + b), 30)
    assert np.allclose(scaled, abs(a) * base, atol=1e-12)


# --- correlation -----------------------------------------------------------

def test_correlation_identical_columns():
    rng = np.random.default_rng(3)
    col = rng.standard_normal(40)
    c = correlation(returns_from(np.column_stack([col, col])), 40)
    assert c.values[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert c.values[0, 0] == 1.0


def test_correlation_negated_column():
    rng = np.random.default_rng(4)
    col = rng.standard_normal(40)
    c = correlation(returns_from(np.column_stack([col, -col])), 40)
    assert c.values[0, 1] == pytest.approx(-1.0, abs=1e-12)


def test_correlation_matches_double_loop_oracle():
    rng = np.random.default_rng(5)
    vals = rng.standard_normal((5, 3))
    got = correlation(returns_from(vals), 5).values
    for i in range(3):
        for j in range(3):
            xi, xj = vals[:, i], vals[:, j]
            di, dj = xi - xi.mean(), xj - xj.mean()
            want = (di * dj).sum() / math.sqrt((di * di).sum() * (dj * dj).sum())
            assert got[i, j] == pytest.approx(want, abs=1e-12)


def test_correlation_bitwise_symmetric_and_clamped():
    rng = np.random.default_rng(6)
    c = correlation(returns_from(rng.standard_normal((100, 8))), 100).values
    assert np.array_equal(c, c.T)
    assert (c >= -1.0).all() and (c <= 1.0).all()


def test_correlation_zero_variance_column_flagged_and_zeroed():
    rng = np.random.default_rng(8)
    vals = rng.standard_normal((30, 3))
    vals[:, 1] = 0.007  # constant
    c = correlation(returns_from(vals), 30)
    assert c.zero_variance == (1,)
    assert (c.values[1, :] == 0.0).all() and (c.values[:, 1] == 0.0).all()
    assert c.values[0, 0] == 1.0 and c.values[2, 2] == 1.0


def test_correlation_insufficient_rows():
    with pytest.raises(InsufficientDataError):
        correlation(returns_from(np.zeros((3, 2))), 10)


@given(
    st.floats(0.1, 10),
    st.floats(-0.05, 0.05),
    st.integers(0, 2**32 - 1),
)
@settings(max_examples=40, deadline=None)
def test_correlation_invariant_under_positive_affine(a, b, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal((25, 3))
    base = correlation(returns_from(vals), 25).values
    vals2 = vals.copy()
    vals2[:, 0] = a * vals2[:, 0] + b
    shifted = correlation(returns_from(vals2), 25).values
    assert np.allclose(shifted, base, atol=1e-10)


# --- synthetic panels ------------------------------------------------------

def test_synth_panel_deterministic():
    a = synth_panel(5, 50, 2, seed=42)
    b = synth_panel(5, 50, 2, seed=42)
    assert a.dates == b.dates and a.tickers == b.tickers
    assert np.array_equal(a.prices, b.prices)
    c = synth_panel(5, 50, 2, seed=43)
    assert not np.array_equal(a.prices, c.prices)


def test_synth_panel_shape_and_invariants():
    panel = synth_panel(7, 30, 3, seed=1)
    assert panel.prices.shape == (30, 7)
    assert (panel.prices > 0).all()
    assert panel.prices[0, 0] == 100.0


def test_synth_panel_no_factors_near_zero_correlation():
    panel = synth_panel(6, 1000, 0, seed=9)
    c = correlation(log_returns(panel), 999).values
    off = c[~np.eye(6, dtype=bool)]
    assert np.abs(off).max() < 0.2


def test_synth_panel_single_dominant_factor_high_correlation():
    panel = synth_panel(6, 1000, 1, seed=10, idio_vol=0.003, loading_spread=0.0)
    c = correlation(log_returns(panel), 999).values
    off = c[~np.eye(6, dtype=bool)]
    assert off.min() > 0.8


def test_synth_panel_rejects_bad_counts():
    with pytest.raises(ValueError):
        synth_panel(0, 10, 1, seed=0)
    with pytest.raises(ValueError):
        synth_panel(3, 0, 1, seed=0)


def test_business_days_skip_weekends():
    days = business_days("2020-01-03", 4)  # Friday start
    assert days == ("2020-01-03", "2020-01-06", "2020-01-07", "2020-01-08")
