import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rssi_chest.channel_model import GainDisclosure, PilotObservation, SystemConfig
from rssi_chest.estimators import (
    ConditionalSecondMoment,
    EstimatorTag,
    conditional_second_moment,
    estimate,
    map_classical,
    map_feedback,
    mmse_estimate,
    shrinkage,
    unit_phase,
)


def cfg(n=4, bp=1.0, n0=1.0, prior=None):
    prior = np.ones((1, n)) if prior is None else np.atleast_2d(prior)
    return SystemConfig(n, 1, bp, n0, prior)


def obs(values):
    return PilotObservation(np.asarray(values, dtype=complex))


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
complexes = st.builds(complex, finite, finite)
# no subnormal components: products of tiny values underflow in the assertions
component = st.one_of(st.just(0.0), st.floats(1e-6, 1e3), st.floats(-1e3, -1e-6))
normal_complexes = st.builds(complex, component, component)
positive = st.floats(1e-6, 1e6)


class TestConditionalSecondMoment:
    def test_empty_disclosure_is_prior(self):
        m = conditional_second_moment(GainDisclosure(), [1, 1, 1, 1])
        assert m.per_antenna.tolist() == [1, 1, 1, 1]

    def test_substitution(self):
        d = GainDisclosure((0, 1), {0: 4.0, 1: 0.25})
        m = conditional_second_moment(d, [1, 1, 1, 1])
        assert m.per_antenna.tolist() == [4.0, 0.25, 1.0, 1.0]

    def test_full_disclosure_is_gains(self):
        g = [0.3, 2.0, 0.0, 7.5]
        d = GainDisclosure((0, 1, 2, 3), dict(enumerate(g)))
        m = conditional_second_moment(d, [1, 2, 3, 4])
        assert m.per_antenna.tolist() == g

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            conditional_second_moment(GainDisclosure((5,), {5: 1.0}), [1, 1])


class TestMmse:
    def test_unit_example(self):
        est = mmse_estimate(obs([1.0]), ConditionalSecondMoment(np.array([1.0])), cfg(n=1))
        assert est.values.tolist() == [0.5 + 0j]
        assert est.estimator_tag is EstimatorTag.MMSE_FEEDBACK

    def test_zero_moment_pins_to_zero(self):
        mu = ConditionalSecondMoment(np.array([0.0, 1.0]))
        est = mmse_estimate(obs([5 - 3j, 1.0]), mu, cfg(n=2))
        assert est.values[0] == 0

    def test_high_snr_limit(self):
        s = np.array([0.3 - 1.1j, 2.0 + 0.5j])
        bp = 1e12
        est = mmse_estimate(obs(s), ConditionalSecondMoment(np.array([1.0, 0.2])), cfg(n=2, bp=bp))
        np.testing.assert_allclose(math.sqrt(bp) * est.values, s, rtol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mmse_estimate(obs([1, 2]), ConditionalSecondMoment(np.ones(3)), cfg(n=2))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(complexes, min_size=4, max_size=4), complexes,
           st.lists(st.floats(0, 1e3), min_size=4, max_size=4), positive, positive)
    def test_linear_in_observation(self, s, c, mu, bp, n0):
        conf = cfg(bp=bp, n0=n0)
        moment = ConditionalSecondMoment(np.array(mu))
        a = mmse_estimate(obs(np.array(s) * c), moment, conf).values
        b = c * mmse_estimate(obs(s), moment, conf).values
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * (1 + np.abs(b).max()))

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-6, 1e6), positive, positive)
    def test_coefficient_range(self, mu, bp, n0):
        coef = shrinkage(mu, bp, n0)
        assert 0 < coef < 1 / math.sqrt(bp)

    @pytest.mark.parametrize("bp,n0", [(1.0, 1.0), (1e-3, 1.0), (100.0, 0.5)])
    def test_coefficient_increasing_in_moment(self, bp, n0):
        # finite differences over a log grid of moments
        mu = np.logspace(-6, 3, 400)
        coef = shrinkage(mu, bp, n0)
        assert np.all(np.diff(coef) > 0)


class TestMapClassical:
    def test_example(self):
        est = map_classical(obs([2.0]), cfg(n=1))
        assert est.values.tolist() == [1 + 0j]
        assert est.estimator_tag is EstimatorTag.MAP_CLASSICAL

    def test_zero_observation(self):
        assert np.all(map_classical(obs([0, 0, 0, 0]), cfg()).values == 0)

    def test_matches_mmse_on_random_inputs(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            prior = rng.exponential(size=(1, n))
            conf = cfg(n=n, bp=10 ** rng.uniform(-4, 4), n0=10 ** rng.uniform(-2, 2), prior=prior)
            s = rng.normal(size=n) + 1j * rng.normal(size=n)
            a = map_classical(obs(s), conf).values
            b = mmse_estimate(obs(s), conditional_second_moment(GainDisclosure(), prior[0]), conf).values
            assert a.tobytes() == b.tobytes()


class TestMapFeedback:
    def test_modulus_snap(self):
        d = GainDisclosure((0,), {0: 4.0})
        est = map_feedback(obs([3 + 4j]), d, cfg(n=1))
        np.testing.assert_allclose(est.values, [1.2 + 1.6j], rtol=1e-15)

    def test_undisclosed_is_classical(self):
        s = [3 + 4j, -1 + 0.5j, 2j, 0.1]
        d = GainDisclosure((0, 2), {0: 4.0, 2: 9.0})
        fb = map_feedback(obs(s), d, cfg()).values
        cl = map_classical(obs(s), cfg()).values
        assert fb[1] == cl[1] and fb[3] == cl[3]

    def test_zero_gain(self):
        est = map_feedback(obs([3 + 4j]), GainDisclosure((0,), {0: 0.0}), cfg(n=1))
        assert est.values[0] == 0

    def test_zero_observation_convention(self):
        est = map_feedback(obs([0j]), GainDisclosure((0,), {0: 4.0}), cfg(n=1))
        assert est.values.tolist() == [2 + 0j]

    def test_unit_phase_subnormal(self):
        u = unit_phase(np.array([5e-324 + 5e-324j]))
        assert abs(u[0]) == pytest.approx(1.0)

    def test_unit_phase(self):
        u = unit_phase(np.array([0j, -2.0, 3j]))
        assert u.tolist() == [1 + 0j, -1 + 0j, 1j]

    @settings(max_examples=200, deadline=None)
    @given(st.lists(complexes, min_size=4, max_size=4),
           st.lists(st.floats(0, 1e4), min_size=4, max_size=4),
           st.integers(0, 4))
    def test_modulus_exact_and_phase_kept(self, s, g, m):
        s = np.array(s)
        d = GainDisclosure(tuple(range(m)), {i: g[i] for i in range(m)})
        est = map_feedback(obs(s), d, cfg()).values
        for i in range(m):
            assert abs(est[i]) == pytest.approx(math.sqrt(g[i]), rel=4e-16, abs=1e-300)
            if s[i] != 0 and g[i] > 0:
                np.testing.assert_allclose(est[i] / abs(est[i]), s[i] / abs(s[i]), rtol=0, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(normal_complexes, min_size=4, max_size=4),
       st.lists(st.one_of(st.just(0.0), st.floats(1e-6, 100)), min_size=4, max_size=4),
       st.integers(0, 4), st.sampled_from(list(EstimatorTag)), positive, positive)
def test_every_estimator_preserves_phase(s, g, m, tag, bp, n0):
    s = np.array(s)
    d = GainDisclosure(tuple(range(m)), {i: g[i] for i in range(m)})
    est = estimate(tag, obs(s), d, cfg(bp=bp, n0=n0)).values
    for i in range(4):
        if s[i] != 0 and est[i] != 0:
            # multipliers are non-negative reals: the product with conj(s) is real positive
            prod = est[i] * np.conj(s[i])
            assert prod.real > 0
            assert abs(prod.imag) <= 1e-12 * abs(prod)


def test_estimate_dispatch_tags():
    s = obs([1 + 1j, 2, -1j, 0.5])
    d = GainDisclosure((0,), {0: 2.0})
    for tag in EstimatorTag:
        assert estimate(tag.value, s, d, cfg()).estimator_tag is tag


def test_unknown_tag():
    with pytest.raises(ValueError, match="unknown estimator"):
        EstimatorTag.parse("lmmse")


def test_non_finite_observation_rejected():
    with pytest.raises(ValueError):
        map_classical(obs([np.nan, 1, 1, 1]), cfg())
