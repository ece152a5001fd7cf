import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorbt.ingest import (
    FIELDS,
    Override,
    ParseError,
    RawDataset,
    build_dataset,
    load_dataset,
    log_returns,
    momentum,
    ncd_index,
    read_ncd_csv,
    read_overrides,
    read_wide_csv,
    write_dataset,
)
from factorbt.panel import MonthStamp, Panel, lag

from conftest import grid


def raw_dataset(n_dates=30, n_stocks=4, seed=0):
    rng = np.random.default_rng(seed)
    start = MonthStamp.parse("2001-01")
    names = [f"S{j}" for j in range(n_stocks)]
    fields = {
        f: Panel(start, names, np.exp(rng.standard_normal((n_dates, n_stocks))))
        for f in FIELDS
    }
    fields["tri"] = Panel(start, names, 100 * np.exp(np.cumsum(0.05 * rng.standard_normal((n_dates, n_stocks)), axis=0)))
    ncd = Panel(start, ["yield"], np.full((n_dates, 1), 0.08))
    return RawDataset(**fields, ncd_yield=ncd)


class TestLogReturns:
    def test_flat_level(self):
        assert log_returns(grid([100.0, 100.0])).array[1, 0] == 0.0

    def test_ten_percent(self):
        r = log_returns(grid([100.0, 110.0])).array
        assert np.isnan(r[0, 0])
        assert r[1, 0] == pytest.approx(0.0953102, abs=1e-6)

    def test_zero_level_is_missing(self):
        r = log_returns(grid([100.0, 0.0, 100.0]))
        assert not r.valid[1, 0] and not r.valid[2, 0]

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=30))
    def test_sum_telescopes(self, levels):
        r = log_returns(grid(levels)).array[1:, 0]
        assert r.sum() == pytest.approx(math.log(levels[-1] / levels[0]), abs=1e-9)


class TestMomentum:
    def test_constant_returns(self):
        r = grid(np.full((20, 3), 0.01))
        m = momentum(r, 12, 1).array
        assert np.isnan(m[12]).all()
        np.testing.assert_allclose(m[13:], 0.12, atol=1e-12)

    def test_degenerate_window_is_lag(self, rng):
        r = grid(rng.standard_normal((10, 2)))
        assert momentum(r, 1, 0).equals(lag(r, 1))

    def test_brute_force(self, rng):
        x = rng.standard_normal((40, 3))
        x[17, 1] = np.nan
        r = grid(x)
        m = momentum(r, 12, 1).array
        for t in range(40):
            for j in range(3):
                ks = range(t - 13, t - 1)
                want = math.nan if t < 13 else sum(x[k, j] for k in ks)
                if math.isnan(want):
                    assert np.isnan(m[t, j])
                else:
                    assert m[t, j] == pytest.approx(want, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 3))
    def test_additive_in_window(self, a, b, skip):
        x = np.random.default_rng(a * 7 + b).standard_normal((30, 2))
        r = grid(x)
        whole = momentum(r, a + b, skip).array
        parts = momentum(r, a, skip).array + momentum(r, b, skip + a).array
        ok = np.isfinite(whole)
        np.testing.assert_allclose(whole[ok], parts[ok], atol=1e-12)


class TestNcdIndex:
    def test_eight_percent(self):
        out = ncd_index(grid([0.08, 0.08]))
        assert out.cell("2000-02", "ret") == pytest.approx(0.0066007, abs=1e-6)
        assert out.cell("2000-02", "ret") == pytest.approx(math.log(1.02) / 3, rel=1e-12)

    def test_zero_yield(self):
        assert ncd_index(grid([0.0, 0.0])).cell("2000-02", "ret") == 0.0

    def test_quarter_compounds_to_two_percent(self):
        out = ncd_index(grid([0.08] * 4))
        assert out.cell("2000-01", "level") == 1.0
        assert out.cell("2000-04", "level") == pytest.approx(1.02, rel=1e-12)

    def test_missing_quote_keeps_level_flat(self):
        out = ncd_index(grid([0.08, np.nan, 0.08]))
        assert out.cell("2000-03", "ret") is None
        assert out.cell("2000-03", "level") == out.cell("2000-02", "level")


class TestCsv:
    def test_round_trip(self, tmp_path):
        raw = raw_dataset()
        write_dataset(raw, tmp_path)
        back = read_wide_csv(tmp_path / "btp.csv")
        assert back.equals(raw.btp)
        assert read_ncd_csv(tmp_path / "ncd.csv").equals(raw.ncd_yield)

    def test_gap_month_named(self, tmp_path):
        f = tmp_path / "tri.csv"
        f.write_text("date,A\n2000-01,1\n2000-02,2\n2000-04,3\n", encoding="utf-8")
        with pytest.raises(ParseError, match="gap") as info:
            read_wide_csv(f)
        assert info.value.row == 4 and "tri.csv" in str(info.value)
        assert "2000-02 -> 2000-04" in str(info.value)

    @pytest.mark.parametrize(
        "text, needle",
        [
            ("date,A,A\n2000-01,1,2\n", "duplicate"),
            ("date,A\n2000-02,1\n2000-01,2\n", "not increasing"),
            ("date,A\n2000-01,abc\n", "not a number"),
            ("date,A\n2000-01,1,2\n", "expected 2 fields"),
            ("ticker,A\n2000-01,1\n", "first column"),
        ],
    )
    def test_structured_errors(self, tmp_path, text, needle):
        f = tmp_path / "x.csv"
        f.write_text(text, encoding="utf-8")
        with pytest.raises(ParseError, match=needle):
            read_wide_csv(f)

    def test_blank_cell_is_missing(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("date,A,B\n2000-01,,2\n", encoding="utf-8")
        p = read_wide_csv(f)
        assert p.cell("2000-01", "A") is None and p.cell("2000-01", "B") == 2.0

    def test_ncd_out_of_range(self, tmp_path):
        f = tmp_path / "ncd.csv"
        f.write_text("date,yield\n2000-01,8.0\n", encoding="utf-8")
        with pytest.raises(ParseError, match="outside"):
            read_ncd_csv(f)


class TestDataset:
    def test_fundamentals_are_lagged_a_quarter(self):
        raw = raw_dataset()
        ds = build_dataset(raw)
        for key, fld in (("BTP", "btp"), ("MV", "mv"), ("DY", "dy"), ("EY", "ey")):
            assert ds.characteristics[key].equals(lag(raw.panel(fld), 3))
        assert ds.characteristics["VOL"].equals(raw.vol)

    def test_override_replaces_only_its_cells(self, tmp_path):
        raw = raw_dataset()
        write_dataset(raw, tmp_path)
        (tmp_path / "overrides.csv").write_text(
            "ticker,field,date,value\nS1,btp,2001-05,9.5\nS1,btp,2001-06,9.75\n", encoding="utf-8"
        )
        ds = load_dataset(tmp_path)
        base = build_dataset(raw)
        diff = ds.raw.btp.array != base.raw.btp.array
        assert np.argwhere(diff).tolist() == [[4, 1], [5, 1]]
        assert ds.raw.btp.cell("2001-06", "S1") == 9.75
        # the quarter lag carries the override into the characteristic
        assert ds.characteristics["BTP"].cell("2001-09", "S1") == 9.75

    def test_override_unknown_stock(self):
        with pytest.raises(ValueError, match="unknown stock"):
            build_dataset(raw_dataset(), [Override("ZZZ", "btp", MonthStamp.parse("2001-02"), 1.0)])

    def test_override_file_header(self, tmp_path):
        f = tmp_path / "o.csv"
        f.write_text("a,b,c,d\n", encoding="utf-8")
        with pytest.raises(ParseError):
            read_overrides(f)

    def test_infinite_characteristic_is_missing(self):
        raw = raw_dataset()
        btp = raw.btp.array
        btp[2, 0] = np.inf
        ds = build_dataset(raw.replace(btp=raw.btp.with_values(btp)))
        assert ds.characteristics["BTP"].cell("2001-06", "S0") is None

    def test_trimmed_to_cash_series(self):
        raw = raw_dataset()
        ncd = raw.ncd_yield.slice_dates(MonthStamp.parse("2001-03"), MonthStamp.parse("2002-06"))
        ds = build_dataset(raw.replace(ncd_yield=ncd))
        assert str(ds.returns.start) == "2001-03" and str(ds.returns.end) == "2002-06"
        assert ds.ncd_index.shape[0] == ds.returns.n_dates
