from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppgof.errors import InsufficientDataError, InvalidInputError
from ppgof.ingest import (
    CASE_STUDIES,
    EARTHQUAKE,
    CatalogSchema,
    EventList,
    fixture_path,
    jitter,
    load_case_study,
    load_events,
)
from ppgof.simulate import SeedSpec

WEEKLY = CatalogSchema("week_start", "weekly", count_column="cases", epoch=date(1960, 1, 1), window_end=date(2012, 1, 1))


def write(tmp_path, text, name="cat.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.fixture
def quake_csv(tmp_path):
    return write(
        tmp_path,
        "date,magnitude\n1900-03-02,6.4\n1885-01-01,7.1\n1900-03-02,5.9\n1950-06-30,6.0\n1900-03-02,6.2\n",
    )


class TestSchema:
    def test_cutoff_needs_marks(self):
        with pytest.raises(InvalidInputError):
            CatalogSchema("t", mark_cutoff=6.0)

    def test_resolution_checked(self):
        with pytest.raises(InvalidInputError):
            CatalogSchema("t", "hourly")

    def test_horizons(self):
        assert EARTHQUAKE.horizon == (date(1981, 1, 1) - date(1885, 1, 1)).days
        assert WEEKLY.horizon == (date(2012, 1, 1) - date(1960, 1, 1)).days
        assert WEEKLY.bucket_width == 7.0


class TestLoadEvents:
    def test_cutoff_and_sorting(self, quake_csv):
        ev = load_events(quake_csv, EARTHQUAKE)
        day = (date(1900, 3, 2) - date(1885, 1, 1)).days
        np.testing.assert_array_equal(ev.times, [0.0, day, day, (date(1950, 6, 30) - date(1885, 1, 1)).days])
        np.testing.assert_array_equal(ev.marks, [7.1, 6.2, 6.4, 6.0])

    def test_count_expansion(self, tmp_path):
        path = write(tmp_path, "week_start,cases\n1960-01-08,2\n1960-01-01,0\n1961-01-06,1\n")
        ev = load_events(path, WEEKLY)
        np.testing.assert_array_equal(ev.times, [7.0, 7.0, 371.0])
        assert ev.marks is None

    def test_bad_rows_listed(self, tmp_path):
        path = write(tmp_path, "date,magnitude\n1900-01-01,6.1\nnot-a-date,6.3\n1901-01-01,big\n")
        with pytest.raises(InvalidInputError, match=r"\[3, 4\]"):
            load_events(path, EARTHQUAKE)

    def test_missing_column(self, tmp_path):
        path = write(tmp_path, "when,magnitude\n1900-01-01,6.1\n")
        with pytest.raises(InvalidInputError, match="date"):
            load_events(path, EARTHQUAKE)

    def test_empty_after_filter(self, tmp_path):
        path = write(tmp_path, "date,magnitude\n1900-01-01,5.1\n")
        with pytest.raises(InsufficientDataError):
            load_events(path, EARTHQUAKE)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidInputError):
            load_events(tmp_path / "nope.csv", EARTHQUAKE)

    def test_idempotent(self, quake_csv):
        a, b = load_events(quake_csv, EARTHQUAKE), load_events(quake_csv, EARTHQUAKE)
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.marks, b.marks)

    @settings(max_examples=30, deadline=None)
    @given(st.permutations(list(range(6))))
    def test_row_order_insensitive(self, tmp_path_factory, perm):
        rows = ["1900-01-01,6.5", "1890-05-05,6.0", "1900-01-01,6.1", "1970-12-31,7.7", "1899-02-28,5.0", "1890-05-05,6.9"]
        d = tmp_path_factory.mktemp("perm")
        base = load_events(write(d, "date,magnitude\n" + "\n".join(rows) + "\n", "a.csv"), EARTHQUAKE)
        shuffled = load_events(write(d, "date,magnitude\n" + "\n".join(rows[i] for i in perm) + "\n", "b.csv"), EARTHQUAKE)
        np.testing.assert_array_equal(base.times, shuffled.times)
        np.testing.assert_array_equal(base.marks, shuffled.marks)


class TestJitter:
    def test_exact_is_identity(self):
        schema = CatalogSchema("t", "exact", window_end=10.0)
        ev = EventList(np.array([0.5, 2.0, 7.25]))
        real = jitter(ev, schema, 0)
        np.testing.assert_array_equal(real.times, ev.times)
        assert real.horizon == 10.0

    def test_same_week_distinct(self):
        ev = EventList(np.array([14.0, 14.0, 14.0, 21.0]))
        real = jitter(ev, WEEKLY, 3)
        assert np.all(np.diff(real.times) > 0)
        assert np.all((real.times[:3] >= 14.0) & (real.times[:3] < 21.0))
        assert 21.0 <= real.times[3] < 28.0

    def test_deterministic(self):
        ev = EventList(np.repeat(np.arange(0.0, 700.0, 7.0), 3))
        a, b = jitter(ev, WEEKLY, SeedSpec(5, 0)), jitter(ev, WEEKLY, SeedSpec(5, 0))
        np.testing.assert_array_equal(a.times, b.times)
        assert not np.array_equal(a.times, jitter(ev, WEEKLY, SeedSpec(6, 0)).times)

    @settings(max_examples=40, deadline=None)
    @given(
        days=st.lists(st.integers(0, 400), min_size=1, max_size=60),
        seed=st.integers(0, 2**31),
    )
    def test_bucket_invariants(self, days, seed):
        schema = CatalogSchema("t", "daily", window_end=500.0)
        starts = np.sort(np.array(days, dtype=float))
        real = jitter(EventList(starts), schema, seed)
        assert real.n_events == starts.size
        assert np.all(np.diff(real.times) > 0)
        np.testing.assert_array_equal(np.floor(real.times), starts)

    def test_marks_follow_events(self):
        ev = EventList(np.array([3.0, 3.0, 8.0]), np.array([6.1, 6.7, 6.3]))
        real = jitter(ev, CatalogSchema("t", "daily", "m", window_end=20.0), 1)
        by_day = {(int(t), m) for t, m in zip(real.times, real.marks)}
        assert by_day == {(3, 6.1), (3, 6.7), (8, 6.3)}


class TestCaseStudies:
    def test_names(self):
        assert set(CASE_STUDIES) == {"earthquake", "california", "florida"}

    def test_unknown(self):
        with pytest.raises(InvalidInputError):
            fixture_path("mars")

    @pytest.mark.parametrize("name,count", [("earthquake", 483), ("california", 67), ("florida", 191)])
    def test_event_counts(self, name, count):
        if not fixture_path(name).exists():
            pytest.skip(f"catalog {fixture_path(name).name} is not bundled")
        assert load_case_study(name, 0).n_events == count
