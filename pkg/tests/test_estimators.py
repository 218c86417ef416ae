import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmchain import chain, estimators as E
from kmchain.upper import harmonic


def trace(jumps, sigma):
    return chain.JumpTrace(np.asarray(sigma, float), np.asarray(jumps))


class TestSpeedEstimate:
    def test_arithmetic(self):
        est = E.speed_estimate(trace([2, 1, 3], [0.5, 1.2, 2.0]))
        assert est.spd_sigma == pytest.approx(3.0) and est.spd_count == pytest.approx(2.0)

    def test_unit(self):
        n = 100
        est = E.speed_estimate(trace([1] * n, np.arange(1, n + 1)))
        assert est.spd_sigma == pytest.approx(1.0) and est.spd_count == 1.0
        assert est.stderr == pytest.approx(0.0)

    def test_start_time_offset(self):
        tr = trace([1, 1], [11.0, 12.0])
        tr.meta["t0"] = 10.0
        assert E.speed_estimate(tr).spd_sigma == pytest.approx(1.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            E.speed_estimate(trace([], []))

    def test_truncated(self):
        tr = trace([1], [1.0])
        tr.truncation_hit = True
        with pytest.raises(ValueError):
            E.speed_estimate(tr)
        assert not E.speed_estimate(tr, allow_truncated=True).valid

    def test_normalizations_agree(self):
        rng = np.random.default_rng(1)
        s = chain.new_state(chain.Pattern.coin(), 2048, rng)
        est = E.speed_estimate(chain.run(s, rng, n_leading_flips=50_000))
        assert abs(est.spd_sigma / est.spd_count - 1) < 0.03
        assert 1.2 < est.spd_sigma < 2.5

    def test_checkpoints(self):
        tr = trace([2, 1, 3, 1], [1, 2, 3, 4])
        cp = E.speed_checkpoints(tr)
        assert cp["n"] == [1, 2, 4]
        assert cp["spd"] == [2.0, 1.5, 1.75]
        assert cp["running_min"] == [2.0, 1.5, 1.5] and cp["running_max"] == [2.0, 2.0, 2.0]


class TestJumpLaw:
    def test_j1(self):
        assert E.jump1_law_exact(1).as_dict() == {1: 1.0}

    def test_j3(self):
        law = E.jump1_law_exact(3)
        assert np.allclose(law.values, [1 / 2, 1 / 6, 1 / 3])
        assert law.mean() == pytest.approx(11 / 6)

    def test_j2_mean(self):
        assert E.jump1_law_exact(2).mean() == pytest.approx(1.5)

    def test_bad(self):
        with pytest.raises(ValueError):
            E.jump1_law_exact(0)

    @pytest.mark.parametrize("j", [1, 7, 100, 10**4])
    def test_sum_and_mean(self, j):
        law = E.jump1_law_exact(j)
        assert abs(law.values.sum() - 1) < 1e-10
        assert abs(law.mean() - harmonic(j)) < 1e-10

    def test_exact_rational(self):
        j = 6
        pmf = [Fraction(1, k * (k + 1)) for k in range(1, j)] + [Fraction(1, j)]
        assert sum(pmf) == 1
        assert sum(k * p for k, p in enumerate(pmf, 1)) == sum(Fraction(1, k) for k in range(1, j + 1))


class TestThetaAndS:
    def test_theta_values(self):
        assert E.theta_survival(1) == 1.0
        assert E.theta_survival(2) == pytest.approx(0.75)
        assert E.theta_survival(3) == pytest.approx(11 / 18)

    def test_theta_monotone(self):
        v = E.theta_survival(np.arange(1, 10**5))
        assert np.all(np.diff(v) <= 0)

    def test_theta_domain(self):
        with pytest.raises(ValueError):
            E.theta_survival(0)

    def test_increment_values(self):
        assert E.s_increment_pmf(1) == pytest.approx(1 / 3)
        assert E.s_increment_pmf(2) == pytest.approx(1 / 6)
        assert E.s_increment_pmf(3) == pytest.approx(1 / 10)
        with pytest.raises(ValueError):
            E.s_increment_pmf(0)

    def test_increment_sum(self):
        K = 10**6
        total = math.fsum(E.s_increment_pmf(np.arange(1, K + 1)))
        assert abs(total + 2 / (K + 2) - 1) < 1e-12

    def test_s_pmf_recursion(self):
        p = E.s_pmf(50).values
        assert p[0] == 0.5
        # P(S = 1) = P(G = 2) P(I = 1) = 1/4 * 1/3
        assert p[1] == pytest.approx(1 / 12)
        assert p[2] == pytest.approx(0.25 * (1 / 6) + 0.125 * (1 / 9))

    def test_sample_s(self):
        rng = np.random.default_rng(2)
        s = E.sample_S(rng, 200_000)
        assert abs((s == 0).mean() - 0.5) < 3 * math.sqrt(0.25 / 200_000)
        exact = E.s_pmf(10).values
        for k in range(1, 5):
            assert abs((s == k).mean() - exact[k]) < 4 * math.sqrt(exact[k] / 200_000)
        assert isinstance(E.sample_S(rng), int)

    def test_sample_theta(self):
        rng = np.random.default_rng(3)
        t = E.sample_theta(rng, 200_000)
        assert t.min() >= 1
        for j in (1, 2, 3, 10, 100, 10**4):
            p = E.theta_survival(j)
            assert abs((t >= j).mean() - p) < 4 * math.sqrt(p * (1 - p) / 200_000) + 1e-12

    def test_sample_theta_far_tail(self):
        class Fixed:
            def random(self, n):
                return np.full(n, 1 - 1e-7)
        # u = 1e-7 lands beyond the table
        t = E.sample_theta(Fixed(), 1)[0]
        assert E.theta_survival(int(t)) >= 1e-7 > E.theta_survival(int(t) + 1)

    def test_sample_theta_cap(self):
        class Fixed:
            def random(self, n):
                return np.full(n, 1 - 1e-12)
        assert E.sample_theta(Fixed(), 1)[0] == E.THETA_CAP

    def test_shift_survival(self):
        law = E.s_shift_survival(2, cutoff=100)
        assert law.support[0] == 1 and law.values[0] == 1.0 and law.values[1] == 1.0
        assert law.values[2] == pytest.approx(0.5)


class TestDominance:
    def test_self_dominance(self):
        rng = np.random.default_rng(4)
        t = E.sample_theta(rng, 100_000)
        sup = np.arange(1, 51)
        rep = E.dominance_check(E.empirical_survival(t, sup), E.theta_law(50), 100_000)
        assert rep.passed

    def test_detects_violation(self):
        sup = np.arange(1, 6)
        emp = E.LawTable(sup, [1, 0.9, 0.8, 0.7, 0.6], "x", survival=True)
        ref = E.LawTable(sup, [1, 0.5, 0.4, 0.3, 0.2], "x", survival=True)
        rep = E.dominance_check(emp, ref, 10_000)
        assert not rep.passed and rep.max_violation == pytest.approx(0.4)

    def test_mismatch(self):
        a = E.LawTable([1, 2], [1, 0.5], "x", survival=True)
        b = E.LawTable([1, 3], [1, 0.5], "x", survival=True)
        with pytest.raises(ValueError):
            E.dominance_check(a, b, 10)

    def test_report_json(self, tmp_path):
        a = E.LawTable([1, 2], [1, 0.5], "x", survival=True)
        rep = E.dominance_check(a, a, 100)
        rep.to_json(tmp_path / "r.json", seed=5)
        assert '"seed": 5' in (tmp_path / "r.json").read_text()

    def test_lemma_eight_small(self):
        rng = np.random.default_rng(5)
        rep, info = E.lemma_eight_check(5, 50_000, rng, L=128)
        assert rep.passed and info["degenerate"] == 0

    def test_lemma_eight_zero_tail_degenerate_fraction(self):
        rng = np.random.default_rng(6)
        rep, info = E.lemma_eight_check(4, 40_000, rng, L=128, tail="zeros")
        assert rep.passed
        assert info["all_ones"] / 40_000 > 0.25 - 4 * math.sqrt(0.1875 / 40_000)

    def test_lemma_second_small(self):
        rng = np.random.default_rng(7)
        rep, _ = E.lemma_second_check(2, 50_000, rng, L=128)
        assert rep.passed


class TestConditionalBound:
    @pytest.mark.parametrize("k,j,v", [(1, 1, 1.0), (2, 3, 0.6), (5, 1, 1.0)])
    def test_values(self, k, j, v):
        assert E.conditional_zeros_bound(k, j) == pytest.approx(v)

    def test_conditioned_samples(self):
        rng = np.random.default_rng(8)
        out = chain.first_leading_samples(chain.Pattern((1,) * 6 + (0,), "coin"), 128, 100_000, rng)
        for k in (1, 2, 3):
            zs = out[out[:, 0] == k, 3]
            n = len(zs)
            for j in (2, 4, 8):
                p = E.conditional_zeros_bound(k, j)
                assert (zs >= j).mean() <= p + 4 * math.sqrt(p * (1 - p) / n) + 1 / n


class TestCensus:
    def test_width_zero(self, rng):
        s = chain.new_state(chain.Pattern.coin(), 64, rng)
        assert E.window_census(s, rng, 3, 0) == {}

    def test_deterministic(self, rng):
        s = chain.new_state(chain.Pattern.explicit((1, 0, 1, 1)), 8)
        assert E.window_census(s, rng, 1, 2, identify_complement=False) == {"01": 1}
        assert E.window_census(s, rng, 1, 2) == {"01": 1}
        assert E.window_census(s, rng, 2, 2) == {"00": 1}

    def test_outside(self, rng):
        s = chain.new_state(chain.Pattern.single(), 8)
        with pytest.raises(ValueError):
            E.window_census(s, rng, 5, 4)

    def test_single_bit_far_right(self):
        rng = np.random.default_rng(9)
        s = chain.new_state(chain.Pattern.coin(), 1024, rng)
        counts = E.window_census(s, rng, 300, 1, n_samples=400, dt=0.5, identify_complement=False)
        assert sum(counts.values()) == 400 and set(counts) <= {"0", "1"}


def test_law_table_csv(tmp_path):
    law = E.jump1_law_exact(3)
    law.to_csv(tmp_path / "l.csv")
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == "k,pmf"
    surv = law.to_survival()
    assert surv.values[0] == pytest.approx(1.0) and surv.survival


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 500))
def test_jump_law_property(j):
    law = E.jump1_law_exact(j)
    assert abs(law.values.sum() - 1) < 1e-12
    assert np.all(law.values > 0)
    assert abs(law.mean() - harmonic(j)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=1, max_size=200))
def test_empirical_survival_property(xs):
    sup = np.arange(0, 32)
    emp = E.empirical_survival(xs, sup)
    assert emp.values[0] == 1.0
    assert np.all(np.diff(emp.values) <= 0)
    for k in (0, 5, 17):
        assert emp.values[k] == pytest.approx(sum(x >= k for x in xs) / len(xs))
