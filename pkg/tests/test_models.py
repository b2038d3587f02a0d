import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppgof.errors import DomainError, InvalidInputError, InvalidStateError
from ppgof.models import (
    KINDS,
    History,
    ModelSpec,
    Realization,
    compensator,
    compensator_at,
    event_intensities,
    intensity,
    intensity_at,
    mean_rate,
    stability_check,
    time_rescale,
)
from ppgof.simulate import SeedSpec, simulate


def history(times, horizon=10.0, t=None, model=None, **kw):
    real = Realization(np.asarray(times, dtype=float), horizon, **kw)
    return History.before(real, horizon if t is None else t, model)


class TestRealization:
    def test_rejects_unsorted(self):
        with pytest.raises(InvalidInputError):
            Realization([1.0, 0.5], 2.0)

    def test_rejects_ties(self):
        with pytest.raises(InvalidInputError):
            Realization([1.0, 1.0], 2.0)

    def test_rejects_outside_window(self):
        with pytest.raises(InvalidInputError):
            Realization([0.5, 2.5], 2.0)

    def test_coords_checked_against_dim(self):
        with pytest.raises(InvalidInputError):
            Realization([0.5, 1.0], 2.0, coords=[1, 3], dim=2)

    def test_marks_length(self):
        with pytest.raises(InvalidInputError):
            Realization([0.5, 1.0], 2.0, marks=[6.1])

    def test_arrays_are_read_only(self):
        r = Realization([0.5, 1.0], 2.0)
        with pytest.raises(ValueError):
            r.times[0] = 0.1

    def test_counts_and_coordinate(self):
        r = Realization([0.1, 0.2, 0.3], 1.0, coords=[2, 1, 2], dim=2)
        assert r.counts().tolist() == [1, 2]
        assert r.coordinate(2).times.tolist() == [0.1, 0.3]

    def test_history_is_strictly_before(self):
        r = Realization([0.5, 1.0, 1.5], 2.0)
        assert History.before(r, 1.0).times.tolist() == [0.5]
        assert History.before(r, 1.0 + 1e-12).times.tolist() == [0.5, 1.0]


class TestModelSpec:
    @pytest.mark.parametrize("kind,count", [
        ("ExpHawkes", 3), ("PowerLawHawkes", 3), ("ShotNoise", 3), ("SelfCorrecting", 3),
        ("PeriodicPoisson", 4), ("EtasTemporal", 4), ("Recursive", 4),
    ])
    def test_parameter_count(self, kind, count):
        with pytest.raises(InvalidInputError):
            ModelSpec(kind, (0.5,) * (count + 1), cutoff=6.0)

    def test_unknown_kind(self):
        with pytest.raises(InvalidInputError):
            ModelSpec("Hawkes", (1, 1, 1))

    def test_params_strictly_inside_bounds(self):
        with pytest.raises(InvalidInputError):
            ModelSpec("ExpHawkes", (0.0, 1.0, 2.0))
        with pytest.raises(InvalidInputError):
            ModelSpec("SelfCorrecting", (1.0, 1.0, 2.0))
        with pytest.raises(InvalidInputError):
            ModelSpec("ExpHawkes", (0.5, 1.0, 2.0), bounds=((0.5, 1), (0, 10), (0, 10)))

    def test_wide_default_box(self):
        assert ModelSpec("ShotNoise", (0.2, 10.0, 2.0)).bounds[1] == (0.0, 1e6)

    def test_etas_needs_cutoff(self):
        with pytest.raises(InvalidInputError):
            ModelSpec("EtasTemporal", (0.1, 0.1, 0.1, 1.0))


class TestIntensity:
    def test_baseline_only(self, exph):
        assert intensity(exph, 1.0, history([], t=1.0))[0] == 0.5

    def test_one_event(self, exph):
        t = math.log(2) / 2
        assert intensity(exph, t, history([0.0], t=t))[0] == pytest.approx(1.0, abs=1e-14)

    def test_self_correcting(self, self_correcting):
        assert intensity(self_correcting, 1.0, history([0.2, 0.7], t=1.0))[0] == pytest.approx(0.5, abs=1e-14)

    def test_periodic_at_zero(self, periodic):
        assert intensity(periodic, 0.0, history([], t=0.0))[0] == 1.25

    def test_power_law(self):
        m = ModelSpec("PowerLawHawkes", (0.5, 1.0, 2.0))
        assert intensity(m, 1.0, history([0.0], t=1.0))[0] == pytest.approx(0.5 + 0.25)

    def test_etas(self):
        m = ModelSpec("EtasTemporal", (0.1, 0.2, 0.5, 1.5), cutoff=6.0)
        h = history([0.0], t=1.5, marks=[7.0])
        assert intensity(m, 1.5, h)[0] == pytest.approx(0.1 + math.exp(1.5) * 0.2 / 2.0)

    def test_etas_without_marks(self):
        m = ModelSpec("EtasTemporal", (0.1, 0.2, 0.5, 1.5), cutoff=6.0)
        with pytest.raises(InvalidInputError):
            intensity(m, 1.5, history([0.0], t=1.5))

    def test_shot_noise_uses_shots_not_events(self):
        m = ModelSpec("ShotNoise", (1.0, 2.0, 2.0))
        real = Realization([0.9], 2.0, latent={"shots": [0.5]})
        lam = intensity(m, 1.0, History.before(real, 1.0))[0]
        assert lam == pytest.approx(2.0 * math.exp(-1.0))

    def test_shot_noise_without_shots(self):
        m = ModelSpec("ShotNoise", (1.0, 2.0, 2.0))
        with pytest.raises(InvalidStateError):
            intensity(m, 1.0, history([0.5], t=1.0))

    def test_recursive_by_hand(self):
        m = ModelSpec("Recursive", (0.5, 0.4, 1.0, 0.5))
        real = Realization([0.0, 1.0], 3.0)
        h = History.before(real, 2.0, m)
        lam1 = 0.5 + 0.4 * 0.5**-0.5 * math.exp(-1.0)
        expected = 0.5 + 0.4 * 0.5**-0.5 * math.exp(-2.0) + 0.4 * lam1**-0.5 * math.exp(-1.0)
        assert h.event_intensity.tolist() == pytest.approx([0.5, lam1])
        assert intensity(m, 2.0, h)[0] == pytest.approx(expected, rel=1e-13)

    def test_recursive_without_cache(self):
        m = ModelSpec("Recursive", (0.5, 0.4, 1.0, 0.5))
        with pytest.raises(InvalidStateError):
            intensity(m, 2.0, history([0.0, 1.0], t=2.0))

    def test_domain(self, exph):
        with pytest.raises(DomainError):
            intensity(exph, 11.0, history([], horizon=10.0, t=10.0))


class TestCompensator:
    def test_zero_at_origin(self, all_models):
        for m in all_models:
            real = simulate(m, 20.0, SeedSpec(1)) if m.kind != "EtasTemporal" else Realization([], 20.0, marks=[])
            assert compensator_at(m, real, [0.0])[0, 0] == 0.0

    def test_exp_hawkes_one_event(self, exph):
        h = history([0.0], t=1.0)
        expected = 0.5 + 0.5 * (1 - math.exp(-2))
        assert compensator(exph, 1.0, h)[0] == pytest.approx(0.932332, abs=1e-6)
        assert compensator(exph, 1.0, h)[0] == pytest.approx(expected, rel=1e-14)
        assert compensator(exph, 1.0, h, method="quadrature")[0] == pytest.approx(expected, rel=1e-10)

    def test_periodic_full_period(self, periodic):
        t = 10 * math.pi
        assert compensator(periodic, t, history([], horizon=40.0, t=t))[0] == pytest.approx(12.5 * math.pi, rel=1e-14)

    def test_power_law_log_branch(self):
        m = ModelSpec("PowerLawHawkes", (0.5, 0.3, 1.0))
        c = compensator(m, 3.0, history([1.0], t=3.0))[0]
        assert c == pytest.approx(1.5 + 0.3 * math.log(3.0), rel=1e-14)

    def test_etas_term(self):
        m = ModelSpec("EtasTemporal", (0.1, 0.2, 0.5, 1.5), cutoff=6.0)
        c = compensator(m, 2.0, history([0.5], t=2.0, marks=[6.5]))[0]
        assert c == pytest.approx(0.2 + math.exp(0.75) * 0.2 * math.log(2.0 / 0.5), rel=1e-14)

    def test_domain_error(self, exph):
        real = Realization([], 5.0)
        with pytest.raises(DomainError):
            compensator_at(exph, real, [6.0])
        with pytest.raises(DomainError):
            compensator_at(exph, real, [-1.0])

    def test_unsorted_queries(self, exph):
        real = simulate(exph, 50.0, SeedSpec(2))
        q = np.array([30.0, 5.0, 17.0])
        np.testing.assert_array_equal(compensator_at(exph, real, q)[:, 0], compensator_at(exph, real, np.sort(q))[[2, 0, 1], 0])


class TestStability:
    def test_exp_hawkes(self):
        assert stability_check(ModelSpec("ExpHawkes", (0.5, 1, 2)))
        assert not stability_check(ModelSpec("ExpHawkes", (0.5, 3, 2)))

    def test_power_law(self):
        assert not stability_check(ModelSpec("PowerLawHawkes", (0.5, 1, 2)))
        assert stability_check(ModelSpec("PowerLawHawkes", (0.5, 0.9, 2)))
        assert not stability_check(ModelSpec("PowerLawHawkes", (0.5, 0.1, 0.9)))

    def test_periodic_boundary_allowed(self):
        assert stability_check(ModelSpec("PeriodicPoisson", (1.0, 1.0, 0.2, 0.0)))
        assert not stability_check(ModelSpec("PeriodicPoisson", (0.9, 1.0, 0.2, 0.0)))

    def test_report_only_families(self):
        assert stability_check(ModelSpec("ShotNoise", (1, 2, 2)))
        st_ = stability_check(ModelSpec("Recursive", (0.5, 0.5, 1, 0.5)))
        assert st_ and "report only" in st_.message

    def test_mean_rate(self):
        assert mean_rate(ModelSpec("ExpHawkes", (0.5, 1, 2))) == pytest.approx(1.0)
        assert mean_rate(ModelSpec("ShotNoise", (1, 2, 2))) == pytest.approx(1.0)


def _simulated(kind_index, seed, T=15.0):
    models = [
        ModelSpec("ExpHawkes", (0.5, 1.0, 2.0)),
        ModelSpec("PowerLawHawkes", (0.5, 0.9, 2.0)),
        ModelSpec("ShotNoise", (1.0, 2.0, 2.0)),
        ModelSpec("PeriodicPoisson", (1.25, 1.0, 0.2, 0.0)),
        ModelSpec("SelfCorrecting", (1.0, 0.5, math.log(2.0))),
        ModelSpec("EtasTemporal", (0.3, 0.05, 0.05, 1.2), cutoff=6.0),
        ModelSpec("Recursive", (0.5, 0.5, 1.0, 0.5)),
    ]
    m = models[kind_index]
    return m, simulate(m, T, SeedSpec(seed))


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(k=st.integers(0, len(KINDS) - 1), seed=st.integers(0, 2**32), data=st.data())
    def test_compensator_monotone_and_continuous(self, k, seed, data):
        m, real = _simulated(k, seed)
        grid = np.linspace(0.0, real.horizon, 3001)
        c = compensator_at(m, real, grid)[:, 0]
        assert np.all(np.diff(c) >= -1e-12)
        # no jumps: increments are bounded by max intensity * step
        lam = intensity_at(m, real, grid)[:, 0]
        step = grid[1] - grid[0]
        bound = (lam.max() + m.params[1] * (m.kind != "PeriodicPoisson") * 10) * step
        assert np.max(np.diff(c)) <= bound + 1e-9

    @settings(max_examples=25, deadline=None)
    @given(k=st.integers(0, len(KINDS) - 1), seed=st.integers(0, 2**32), frac=st.floats(0.05, 1.0))
    def test_closed_form_matches_quadrature(self, k, seed, frac):
        m, real = _simulated(k, seed, T=8.0)
        t = frac * real.horizon
        h = History.before(real, t, m)
        closed = compensator(m, t, h)[0]
        quad = compensator(m, t, h, method="quadrature")[0]
        assert abs(closed - quad) <= 1e-8 * max(abs(closed), 1e-2)

    @settings(max_examples=40, deadline=None)
    @given(k=st.integers(0, len(KINDS) - 1), seed=st.integers(0, 2**32))
    def test_intensity_nonnegative(self, k, seed):
        m, real = _simulated(k, seed)
        assert stability_check(m)
        grid = np.linspace(0.0, real.horizon, 2001)
        assert np.all(intensity_at(m, real, grid) >= 0)

    def test_exp_recursion_matches_direct_sum(self, exph):
        real = simulate(exph, 1200.0, SeedSpec(3))
        assert real.n_events >= 1000
        t = real.times
        mu, a, b = exph.params
        diff = t[:, None] - t[None, :]
        direct = mu + a * np.sum(np.where(diff > 0, np.exp(-b * np.where(diff > 0, diff, 0.0)), 0.0), axis=1)
        np.testing.assert_allclose(event_intensities(exph, real), direct, rtol=1e-10, atol=0)


class TestMultivariate:
    def test_product_model_coordinates_are_separate(self, exph, periodic):
        real = Realization([0.5, 1.0, 2.0], 3.0, coords=[1, 2, 1], dim=2)
        c = compensator_at([exph, periodic], real, [3.0])[0]
        c1 = compensator_at(exph, Realization([0.5, 2.0], 3.0), [3.0])[0, 0]
        c2 = compensator_at(periodic, Realization([1.0], 3.0), [3.0])[0, 0]
        assert c.tolist() == [c1, c2]

    def test_time_rescale_uses_own_coordinate(self, exph, periodic):
        real = Realization([0.5, 1.0, 2.0], 3.0, coords=[1, 2, 1], dim=2)
        tr = time_rescale(real, [exph, periodic])
        assert tr[1] == pytest.approx(compensator_at(periodic, Realization([1.0], 3.0), [1.0])[0, 0])

    def test_spec_count_must_match_dim(self, exph):
        real = Realization([0.5], 1.0, coords=[2], dim=2)
        with pytest.raises(InvalidInputError):
            compensator_at(exph, real, [1.0])
