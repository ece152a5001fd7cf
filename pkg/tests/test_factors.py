import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorbt.factors import (
    PORTFOLIOS,
    FactorSeries,
    SortSpec,
    assign_buckets,
    hml,
    six_portfolios,
    smb,
)
from factorbt.panel import MonthStamp, Panel
from factorbt.universe import select_universe

from conftest import grid


def six(values):
    return Panel(MonthStamp.parse("2000-01"), PORTFOLIOS, np.atleast_2d(values))


def held_panels(btp_row, mv_row, ret_row):
    """Two-month panels: sort data at month 0, returns at month 1."""
    n = len(btp_row)
    btp = grid([btp_row, [np.nan] * n])
    mv = grid([mv_row, [np.nan] * n])
    ret = grid([[0.0] * n, ret_row])
    return ret, btp, mv, select_universe(mv, n)


def test_spec_validation():
    with pytest.raises(ValueError):
        SortSpec(value_breakpoints=(70, 30))
    with pytest.raises(ValueError):
        SortSpec(weighting="median")


def test_one_stock_per_bucket():
    # sizes: S S S B B B ; btp spread so each size half hits L, M, H once
    btp = [1.0, 5.0, 9.0, 2.0, 6.0, 10.0]
    mv = [1.0, 2.0, 3.0, 10.0, 20.0, 30.0]
    size, value = assign_buckets(np.array(btp), np.array(mv))
    assert sorted(v + s for v, s in zip(value, size)) == sorted(PORTFOLIOS)
    rets = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06]
    out = six_portfolios(*held_panels(btp, mv, rets))
    labels = {v + s: r for v, s, r in zip(value, size, rets)}
    for name in PORTFOLIOS:
        assert out.cell("2000-02", name) == pytest.approx(math.expm1(labels[name]), rel=1e-12)


def test_identical_btp_all_middle():
    n = 10
    out = six_portfolios(*held_panels([1.0] * n, list(range(1, n + 1)), [0.01] * n))
    for name in ("HS", "HB", "LS", "LB"):
        assert out.cell("2000-02", name) is None
    assert out.cell("2000-02", "MS") is not None and out.cell("2000-02", "MB") is not None


def test_sixty_stocks_match_rank_oracle(rng):
    n = 60
    btp, mv = rng.permutation(n) + 0.5, rng.permutation(n) + 0.5
    size, value = assign_buckets(btp, mv)
    rb = np.argsort(np.argsort(btp))
    rm = np.argsort(np.argsort(mv))
    for i in range(n):
        # a linear-interpolated percentile sits at fractional rank p(n-1)
        assert (size[i] == "S") == (rm[i] < 0.5 * (n - 1))
        want = "L" if rb[i] < 0.3 * (n - 1) else "H" if rb[i] > 0.7 * (n - 1) else "M"
        assert value[i] == want


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_monotone_transform_invariance(seed):
    rng = np.random.default_rng(seed)
    btp = rng.permutation(40) / 4 + 1
    mv = rng.permutation(40) / 4 + 1
    base = assign_buckets(btp, mv)
    moved = assign_buckets(np.log(btp) * 3 - 2, mv**3)
    assert (base[0] == moved[0]).all() and (base[1] == moved[1]).all()


class TestSpreads:
    def test_equal_returns_cancel(self):
        x = six([0.02] * 6)
        assert smb(x).array[0, 0] == 0.0 and hml(x).array[0, 0] == 0.0

    def test_smb_scalar(self):
        x = six([0.02, 0.02, 0.02, 0.01, 0.01, 0.01])  # HS MS LS HB MB LB
        assert smb(x).array[0, 0] == pytest.approx(0.01, abs=1e-15)

    def test_smb_antisymmetric(self, rng):
        v = rng.standard_normal(6)
        swapped = v[[3, 4, 5, 0, 1, 2]]
        assert smb(six(swapped)).array[0, 0] == pytest.approx(-smb(six(v)).array[0, 0])

    def test_hml_scalar_and_ignores_middle(self):
        x = [0.03, 0.7, 0.01, 0.03, -0.4, 0.01]
        assert hml(six(x)).array[0, 0] == pytest.approx(0.02, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-0.5, 0.5), min_size=6, max_size=6), st.floats(-0.5, 0.5))
    def test_constant_shift_cancels(self, v, c):
        a, b = six(v), six([x + c for x in v])
        assert smb(b).array[0, 0] == pytest.approx(smb(a).array[0, 0], abs=1e-12)
        assert hml(b).array[0, 0] == pytest.approx(hml(a).array[0, 0], abs=1e-12)


def test_cumulative_levels():
    fs = FactorSeries.from_arrays(
        "2000-01",
        mkt=np.array([np.nan, 0.1, -0.05]),
        rfr=np.array([np.nan, 0.01, 0.01]),
        smb=np.array([np.nan, 0.02, 0.03]),
        hml=np.array([np.nan, -0.01, np.nan]),
    )
    cum = fs.cumulative()
    assert cum.cell("2000-03", "mkt") == pytest.approx(math.exp(0.05))
    assert cum.cell("2000-03", "smb") == pytest.approx(1.02 * 1.03)
    assert cum.cell("2000-03", "hml") == pytest.approx(0.99)
    np.testing.assert_allclose(fs["mkt_excess"][1:], [0.09, -0.06])


def test_factor_csv(tmp_path, small_synth):
    from factorbt.factors import build_factor_series

    ds, _ = small_synth
    fs = build_factor_series(ds, select_universe(ds.mv, 50))
    fs.to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0].split(",")[:5] == ["date", "mkt", "rfr", "smb", "hml"]
    assert len(lines) == ds.returns.n_dates + 1
