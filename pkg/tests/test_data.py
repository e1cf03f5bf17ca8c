import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fbrad.data import (
    TimeSeries,
    generate_synthetic,
    load_skab_csv,
    make_windows,
    split_series,
    standardize_apply,
    standardize_fit,
)
from fbrad.errors import DataError, FormatError, ParseError, ValidationError

SKAB_HEADER = ("datetime;Accelerometer1RMS;Accelerometer2RMS;Current;Pressure;"
               "Temperature;Thermocouple;Voltage;Volume Flow RateRMS;anomaly;changepoint")


def write_skab(path, rows, header=SKAB_HEADER):
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


def skab_rows(n, labels=None, start=0):
    rng = np.random.default_rng(3)
    rows = []
    for i in range(n):
        vals = ";".join(f"{v:.6f}" for v in rng.normal(size=8))
        lab = 0 if labels is None else labels[i]
        hour = 10 + (start + i) // 3600
        ts = f"2020-03-09 {hour:02d}:{(start + i) // 60 % 60:02d}:{(start + i) % 60:02d}"
        rows.append(f"{ts};{vals};{lab};0")
    return rows


class TestLoadSkab:
    def test_skab_shape(self, tmp_path):
        labels = [0] * 900 + [1] * 200
        ts = load_skab_csv(write_skab(tmp_path / "a.csv", skab_rows(1100, labels)))
        assert (ts.n, ts.d) == (1100, 8)
        assert ts.labels.sum() == 200
        assert ts.feature_names[0] == "Accelerometer1RMS"
        assert "changepoint" not in ts.feature_names

    def test_all_normal_labels(self, tmp_path):
        ts = load_skab_csv(write_skab(tmp_path / "a.csv", skab_rows(20)))
        assert ts.labels.sum() == 0

    def test_duplicate_timestamp(self, tmp_path):
        rows = skab_rows(3)
        rows[2] = rows[1].split(";", 1)[0] + ";" + rows[2].split(";", 1)[1]
        stamps = [r.split(";")[0] for r in rows]
        # oracle: a strict-monotonicity scan finds the repeat
        assert not all(a < b for a, b in zip(stamps, stamps[1:]))
        with pytest.raises(DataError):
            load_skab_csv(write_skab(tmp_path / "a.csv", rows))

    def test_non_numeric_cell_reports_row(self, tmp_path):
        rows = skab_rows(5)
        parts = rows[3].split(";")
        parts[2] = "abc"
        rows[3] = ";".join(parts)
        with pytest.raises(ParseError, match="row 3"):
            load_skab_csv(write_skab(tmp_path / "a.csv", rows))

    def test_missing_value(self, tmp_path):
        rows = skab_rows(5)
        parts = rows[1].split(";")
        parts[4] = ""
        rows[1] = ";".join(parts)
        with pytest.raises(DataError, match="missing"):
            load_skab_csv(write_skab(tmp_path / "a.csv", rows))

    def test_missing_label_column(self, tmp_path):
        header = SKAB_HEADER.replace(";anomaly;changepoint", "")
        rows = [";".join(r.split(";")[:-2]) for r in skab_rows(5)]
        path = write_skab(tmp_path / "a.csv", rows, header)
        with pytest.raises(FormatError):
            load_skab_csv(path)
        assert load_skab_csv(path, require_labels=False).labels is None

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        with pytest.raises(FormatError):
            load_skab_csv(p)

    def test_generic_label_column_and_delimiter(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("t,a,b,flag\n1,0.5,1.5,0\n2,0.7,1.1,1\n3,0.1,0.2,0\n")
        ts = load_skab_csv(p, delimiter=",", label_col="flag")
        assert ts.d == 2 and list(ts.labels) == [0, 1, 0]
        assert ts.timestamps.dtype == np.float64


class TestSynthetic:
    def test_label_count(self):
        ts = generate_synthetic(2000, 8, 0.05, 2, 5.0, seed=7)
        injected = int(ts.labels.sum())
        assert injected == math.ceil(0.05 * 2000) == 100

    def test_deterministic(self):
        a = generate_synthetic(500, 4, 0.1, 1, 3.0, seed=11)
        b = generate_synthetic(500, 4, 0.1, 1, 3.0, seed=11)
        assert a.values.tobytes() == b.values.tobytes()
        assert np.array_equal(a.labels, b.labels)

    @pytest.mark.parametrize("affected", [1, 2, 8])
    def test_affected_columns(self, affected):
        ts = generate_synthetic(800, 8, 0.05, affected, 5.0, seed=2)
        clean = generate_synthetic(800, 8, 0.05, affected, 0.0, seed=2)
        changed = ts.values != clean.values
        assert not changed[ts.labels == 0].any()
        assert np.all(changed[ts.labels == 1].sum(axis=1) == affected)

    def test_every_stratum_has_anomalies(self):
        ts = generate_synthetic(2000, 8, 0.05, 2, 5.0, seed=1, segments=3)
        for k in range(3):
            assert ts.labels[k * 666:(k + 1) * 666].sum() > 0

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
    def test_bad_fraction(self, fraction):
        with pytest.raises(ValidationError):
            generate_synthetic(200, 4, fraction, 1, 3.0, seed=0)


class TestStandardize:
    def test_reference_formulas(self):
        x = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        s = standardize_fit(x)
        assert s.means[0] == 2.0
        assert s.stds[0] == pytest.approx(math.sqrt(((1 - 2) ** 2 + 0 + (3 - 2) ** 2) / 3), abs=1e-15)
        assert s.means[1] == 5.0 and s.stds[1] == 1.0

    def test_idempotent_on_standardized(self):
        rng = np.random.default_rng(0)
        x = rng.normal(3, 2, size=(200, 5))
        z = standardize_apply(standardize_fit(x), x)
        s = standardize_fit(z)
        assert np.allclose(s.means, 0, atol=1e-9) and np.allclose(s.stds, 1, atol=1e-9)

    def test_direct_formula(self):
        from fbrad.data import Standardizer

        out = standardize_apply(Standardizer(np.array([2.0]), np.array([2.0])), [[4.0]])
        assert out.tolist() == [[1.0]]

    def test_identity_case(self):
        from fbrad.data import Standardizer

        x = np.random.default_rng(1).normal(size=(10, 3))
        s = Standardizer(np.zeros(3), np.ones(3))
        assert np.allclose(standardize_apply(s, x), x, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 50), st.integers(1, 6), st.integers(0, 10_000))
    def test_round_trip(self, n, d, seed):
        x = np.random.default_rng(seed).normal(10, 5, size=(n, d))
        s = standardize_fit(x)
        assert np.allclose(s.inverse(standardize_apply(s, x)), x, rtol=0, atol=1e-12 * max(1, np.abs(x).max()))

    def test_errors(self):
        with pytest.raises(ValidationError):
            standardize_fit(np.ones((1, 3)))
        s = standardize_fit(np.random.default_rng(0).normal(size=(5, 3)))
        with pytest.raises(ValidationError):
            standardize_apply(s, np.ones((4, 2)))


class TestWindows:
    def test_small(self):
        w = make_windows(np.arange(10.0).reshape(5, 2), 3, 1)
        assert len(w) == 3 and w.end_indices.tolist() == [2, 3, 4]
        assert np.array_equal(w.windows[1], np.arange(10.0).reshape(5, 2)[1:4])

    def test_boundary(self):
        assert len(make_windows(np.zeros((5, 2)), 5, 1)) == 1

    def test_stride(self):
        w = make_windows(np.zeros((10, 2)), 4, 2)
        # by hand: windows end at 3, 5, 7, 9
        assert w.end_indices.tolist() == [3, 5, 7, 9]

    def test_flat_layout(self):
        x = np.arange(12.0).reshape(6, 2)
        w = make_windows(x, 3, 1)
        assert w.flat[0].tolist() == [0, 1, 2, 3, 4, 5]

    def test_too_short(self):
        with pytest.raises(ValidationError):
            make_windows(np.zeros((3, 2)), 4, 1)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 60), st.integers(1, 20), st.integers(1, 5))
    def test_count_and_coverage(self, n, w, stride):
        if n < w:
            return
        ws = make_windows(np.arange(2.0 * n).reshape(n, 2), w, stride)
        assert len(ws) == (n - w) // stride + 1
        assert np.all(np.diff(ws.end_indices) > 0)
        if stride == 1:
            assert ws.end_indices.tolist() == list(range(w - 1, n))


class TestSplit:
    def test_halves(self):
        assert split_series(100, [0.5, 0.5]).parts == ((0, 50), (50, 100))

    def test_thirds_remainder(self):
        sizes = [b - a for a, b in split_series(100, [1 / 3, 1 / 3, 1 / 3]).parts]
        assert sizes == [33, 33, 34]

    def test_part_too_small(self):
        with pytest.raises(ValidationError):
            split_series(10, [0.5, 0.5], min_size=6)

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            split_series(100, [0.5, 0.4])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(10, 5000), st.lists(st.integers(1, 10), min_size=1, max_size=5))
    def test_partition(self, n, weights):
        fractions = [w / sum(weights) for w in weights]
        fractions[-1] = 1 - sum(fractions[:-1])
        assume(all(math.floor(f * n + 1e-9) >= 1 for f in fractions[:-1]))
        parts = split_series(n, fractions).parts
        covered = [i for a, b in parts for i in range(a, b)]
        assert covered == list(range(n))

    def test_apply_slices_labels(self):
        ts = generate_synthetic(200, 4, 0.1, 1, 3.0, seed=0)
        a, b = split_series(ts, [0.5, 0.5]).apply(ts)
        assert a.n == b.n == 100
        assert np.array_equal(np.concatenate([a.labels, b.labels]), ts.labels)


def test_timeseries_invariants():
    with pytest.raises(ValidationError):
        TimeSeries(np.arange(3), np.zeros((3, 1)))
    with pytest.raises(DataError):
        TimeSeries(np.array([0, 1, 1]), np.zeros((3, 2)))
    with pytest.raises(DataError):
        TimeSeries(np.arange(3), np.zeros((3, 2)), labels=np.array([0, 2, 0]))
