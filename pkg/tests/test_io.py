import os

import numpy as np
import pytest

from hawkes_impact.estimation import MetaorderRecord, PriceSeries
from hawkes_impact.io import (
    build_daily_records,
    filter_records,
    read_closes,
    read_csv_columns,
    read_curve_columns,
    read_events,
    read_index_map,
    read_json,
    read_metaorders,
    read_price_dir,
    read_price_series,
    read_sampled,
    write_csv,
    write_events,
    write_impact_curve,
    write_json,
    write_metaorders,
    write_price_series,
    write_sampled,
)
from hawkes_impact.estimation import ImpactCurve
from hawkes_impact.kernels import SampledFunction
from hawkes_impact.simulate import EventStream


def _record(k=0, instrument="AAA", date="2024-01-02", side=1, **kw):
    defaults = dict(t0=1200.0, duration=900.0, v=5e3, V=1e6, vbar=5e4)
    defaults.update(kw)
    return MetaorderRecord(
        id=f"m{k}", instrument=instrument, date=date, side=side, **defaults
    )


def test_json_roundtrip_and_no_temp_leftovers(tmp_path):
    path = tmp_path / "out.json"
    obj = {"b": [1, 2.5], "a": {"nested": "x"}}
    write_json(path, obj)
    assert read_json(path) == obj
    write_json(path, obj)
    assert [p for p in os.listdir(tmp_path) if p != "out.json"] == []
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')  # keys are sorted


def test_metaorders_roundtrip(tmp_path):
    path = tmp_path / "meta.csv"
    records = [
        _record(0, side=1, sigma=0.02, psi=3e-4),
        _record(1, side=-1),
    ]
    write_metaorders(path, records)
    back = read_metaorders(path)
    assert len(back) == 2
    for orig, got in zip(records, back):
        assert got.id == orig.id
        assert got.side == orig.side
        assert got.t0 == orig.t0
        assert got.duration == orig.duration
        assert got.v == orig.v
    assert back[0].sigma == 0.02
    assert np.isnan(back[1].sigma)
    # rewriting produces byte-identical files
    first = path.read_bytes()
    write_metaorders(path, records)
    assert path.read_bytes() == first


def test_side_spellings(tmp_path):
    path = tmp_path / "meta.csv"
    header = "id,instrument,date,t0_seconds,duration_seconds,side,v,V,vbar"
    rows = [
        f"m{k},A,2024-01-02,0.0,600.0,{side},10.0,1000.0,100.0"
        for k, side in enumerate(["B", "b", "1", "+1", "S", "s", "-1"])
    ]
    path.write_text("\n".join([header] + rows) + "\n")
    back = read_metaorders(path)
    assert [r.side for r in back] == [1, 1, 1, 1, -1, -1, -1]
    path.write_text("\n".join([header, rows[0].replace(",B,", ",buy,")]) + "\n")
    with pytest.raises(ValueError, match="unrecognised side"):
        read_metaorders(path)


def test_missing_column_is_named(tmp_path):
    path = tmp_path / "meta.csv"
    path.write_text("id,instrument,date\nm0,A,2024-01-02\n")
    with pytest.raises(ValueError, match="t0_seconds"):
        read_metaorders(path)
    with pytest.raises(ValueError, match="empty file"):
        (tmp_path / "empty.csv").write_text("")
        read_csv_columns(tmp_path / "empty.csv", ["x"])


def test_price_series_roundtrip_and_directory(tmp_path):
    series = PriceSeries([0.0, 10.0, 20.0], [100.0, 100.5, 99.75])
    write_price_series(tmp_path / "AAA_2024-01-02.csv", series)
    back = read_price_series(tmp_path / "AAA_2024-01-02.csv")
    np.testing.assert_array_equal(back.times, series.times)
    np.testing.assert_array_equal(back.prices, series.prices)

    write_price_series(tmp_path / "AB_C_2024-01-03.csv", series)
    table = read_price_dir(tmp_path)
    assert set(table) == {("AAA", "2024-01-02"), ("AB_C", "2024-01-03")}

    write_price_series(tmp_path / "noseparator.csv", series)
    with pytest.raises(ValueError, match="instrument"):
        read_price_dir(tmp_path)


def test_events_roundtrip(tmp_path):
    stream = EventStream([0.5, 1.25, 4.0], [0, 1, 0], d=2, horizon=5.0)
    path = tmp_path / "events.csv"
    write_events(path, stream)
    back = read_events(path)
    np.testing.assert_array_equal(back.times, stream.times)
    np.testing.assert_array_equal(back.dims, stream.dims)
    assert back.d == 2
    assert back.horizon == 4.0  # inferred from the last event


def test_sampled_function_roundtrip(tmp_path):
    fn = SampledFunction(0.25, [0.0, 1.0, 0.5, 0.25], tail_mass=0.01)
    path = tmp_path / "kernel.csv"
    write_sampled(path, fn)
    assert path.read_text().startswith("# {")
    back = read_sampled(path)
    assert back.dt == fn.dt
    assert back.tail_mass == fn.tail_mass
    np.testing.assert_array_equal(back.values, fn.values)

    bare = tmp_path / "bare.csv"
    write_csv(bare, ["t", "value"], zip(fn.t, fn.values))
    with pytest.raises(ValueError, match="JSON header"):
        read_sampled(bare)


def test_impact_curve_csv_with_bands(tmp_path):
    s = np.linspace(0.0, 2.0, 5)
    curve = ImpactCurve(
        s,
        s**2,
        np.full(5, 12),
        bands={0.25: s**2 - 0.1, 0.75: s**2 + 0.1},
    )
    path = tmp_path / "curve.csv"
    write_impact_curve(path, curve)
    cols = read_curve_columns(path)
    assert cols["__header__"] == ["s", "mean", "n", "q0.25", "q0.75"]
    np.testing.assert_allclose(cols["mean"], s**2)
    np.testing.assert_allclose(cols["q0.75"] - cols["q0.25"], 0.2)


def _write_closes(path, key_col, names, dates, base):
    rows = []
    for name in names:
        for j, date in enumerate(dates):
            rows.append([name, date, base + j])
    write_csv(path, [key_col, "date", "close"], rows)


def test_closes_index_map_and_daily_assembly(tmp_path):
    dates = [f"d{j:02d}" for j in range(45)]
    _write_closes(tmp_path / "closes.csv", "instrument", ["S1"], dates, 100.0)
    _write_closes(tmp_path / "index.csv", "index", ["X1"], dates, 50.0)
    write_csv(tmp_path / "map.csv", ["instrument", "index"], [["S1", "X1"]])

    closes = read_closes(tmp_path / "closes.csv")
    index_closes = read_closes(tmp_path / "index.csv")
    index_map = read_index_map(tmp_path / "map.csv")
    assert index_map == {"S1": "X1"}
    assert closes["S1"][0] == dates

    records = [
        _record(0, instrument="S1", date="d22"),   # full window
        _record(1, instrument="S1", date="d02"),   # too close to the start
        _record(2, instrument="S9", date="d22"),   # unknown instrument
        _record(3, instrument="S1", date="nope"),  # date missing
    ]
    daily, skipped = build_daily_records(records, closes, index_closes, index_map)
    assert skipped == 3
    assert len(daily) == 1
    assert daily[0].record.id == "m0"
    assert daily[0].closes[0] == 101.0   # d01, 21 days before d22
    assert daily[0].closes[-1] == 142.0  # d42, 20 days after
    assert daily[0].index_closes[0] == 51.0


def test_filter_records_reasons():
    good = _record(0, t0=1000.0, duration=600.0, v=1e4, V=1e6, vbar=1e5)
    records = [
        good,
        _record(1, duration=100.0),                      # too short
        _record(2, v=5e4, V=1e6, vbar=1e5),              # rate 0.5
        _record(3, v=3e5, V=1e6, vbar=3e6),              # participation 0.3
        _record(4, t0=29000.0, duration=1000.0),         # runs into the close
    ]
    kept, reasons = filter_records(records)
    assert kept == [good]
    assert reasons == {"duration": 1, "rate": 1, "participation": 1, "window": 1}
    loose, reasons2 = filter_records(records, min_duration=50.0, rate_range=(0.0, 1.0),
                                     participation_range=(0.0, 1.0))
    assert len(loose) == 4  # only the closing-window violation remains
    assert reasons2["window"] == 1
