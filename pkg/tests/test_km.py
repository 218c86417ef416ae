import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmchain import km
from kmchain.km import CubeState, Gf2Matrix

from reference import exact_expected_steps


class TestWalks:
    def test_examples(self, rng):
        assert str(km.random_edge_step(CubeState.parse("01"), rng)) == "00"
        assert str(km.random_edge_step(CubeState.parse("10"), rng)) == "01"

    def test_two_ones(self):
        rng = np.random.default_rng(0)
        outs = [str(km.random_edge_step(CubeState.parse("11"), rng)) for _ in range(4000)]
        assert set(outs) == {"00", "10"}
        assert abs(outs.count("00") / 4000 - 0.5) < 0.04

    def test_absorbing(self, rng):
        with pytest.raises(ValueError):
            km.random_edge_step(CubeState.parse("000"), rng)

    def test_suppressed(self, rng):
        s, eff = km.suppressed_step(CubeState.parse("000"), rng)
        assert str(s) == "000" and not eff
        s, eff = km.suppressed_step(CubeState.parse("1"), rng)
        assert str(s) == "0" and eff
        r = np.random.default_rng(1)
        effs = [km.suppressed_step(CubeState.parse("10"), r)[1] for _ in range(4000)]
        assert abs(np.mean(effs) - 0.5) < 0.04

    def test_state_validation(self):
        with pytest.raises(ValueError):
            CubeState(2, (1, 2))
        with pytest.raises(ValueError):
            CubeState.parse("10").flip(2)
        assert CubeState.from_value(5, 4).bits == (0, 1, 0, 1)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=12), st.integers(0, 2**32))
    def test_value_decreases(self, bits, seed):
        s = CubeState(len(bits), tuple(bits))
        rng = np.random.default_rng(seed)
        n_moves = 0
        while s.value:
            t = km.random_edge_step(s, rng)
            assert t.value < s.value
            s = t
            n_moves += 1
        assert n_moves <= 2 ** len(bits) - 1


class TestDp:
    def test_small(self):
        assert km.expected_steps_dp(1) == 0.5
        assert km.expected_steps_dp(2) == 1.25

    def test_hand_values(self):
        t = km.step_table(2)
        assert list(t) == [0.0, 1.0, 2.0, 2.0]

    @pytest.mark.parametrize("n", [3, 5, 7])
    def test_rational_oracle(self, n):
        assert km.expected_steps_dp(n) == pytest.approx(float(exact_expected_steps(n)), rel=1e-13)

    def test_bounds(self):
        for n in range(1, 21):
            lo, hi = km.ghz_bounds(n)
            assert lo <= km.expected_steps_dp(n) <= hi

    def test_too_large(self):
        with pytest.raises(ValueError):
            km.expected_steps_dp(25)


class TestLStar:
    def test_examples(self):
        assert km.l_star_dp(1, 1) == 1.0
        assert km.l_star_dp(1, 2, "pad-left-zeros") == 2.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            km.l_star_dp(1, 2, "sideways")
        with pytest.raises(ValueError):
            km.l_star_dp(3, 2)

    def test_resolution(self):
        conv, worst = km.resolve_convention()
        assert conv == "pad-left-zeros"
        assert worst["standalone-length-r"] > 0.1 and worst["ones-prefix"] > 0.1

    def test_identity(self):
        for n in range(1, 9):
            assert km.ghz_residual(n, "pad-left-zeros") < 1e-10

    def test_l_star_rational(self):
        # n = 2: L*(01) = 2, L*(11) = 1 + (0 + L*(10)) / 2, L*(10) = 2 + L*(01)
        assert list(km.l_star_table(2, "pad-left-zeros")) == [2.0, 3.0]

    def test_km_exact(self):
        res = km.km_exact(6)
        assert res.convention == "pad-left-zeros" and res.residual < 1e-10
        assert "convention_residuals" in res.as_dict()


class TestMonteCarlo:
    @pytest.mark.parametrize("n", [1, 2, 8])
    def test_matches_dp(self, n):
        rng = np.random.default_rng(n)
        est = km.en_simulate(n, 50_000, rng)
        assert abs(est.mean - km.expected_steps_dp(n)) < 4 * est.stderr

    def test_reproducible(self):
        a = km.en_simulate(30, 50, np.random.default_rng(3), keep=True)
        b = km.en_simulate(30, 50, np.random.default_rng(3), keep=True)
        assert np.array_equal(a.samples, b.samples)

    def test_invalid(self, rng):
        with pytest.raises(ValueError):
            km.en_simulate(0, 5, rng)


class TestGf2:
    def test_identity_step(self):
        M = km.coupling_apply(Gf2Matrix.identity(2), 1)
        assert M.column(1) == 0b10 and M.column(2) == 0b10  # (0,1) and (0,1)
        assert M.apply(0b01) == 0b10

    def test_rank_span_kernel(self):
        M = Gf2Matrix.from_rows([0b011, 0b110, 0b101], 3)
        assert M.rank() == 2
        ker = M.kernel()
        assert len(ker) == 1 and M.apply(ker[0]) == 0
        assert M.in_column_span(M.apply(0b001))
        assert M.transpose().transpose() == M

    def test_range(self):
        with pytest.raises(ValueError):
            km.coupling_apply(Gf2Matrix.identity(3), 4)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_linearity_exhaustive(self, n):
        assert km.linearity_check(n)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(5, 40).flatmap(lambda n: st.tuples(
        st.just(n), st.lists(st.integers(1, n), max_size=30),
        st.integers(0, 2**n - 1), st.integers(0, 2**n - 1))))
    def test_linearity_random(self, data):
        n, seq, x, y = data
        M = km.coupling_matrix(seq, n)
        assert M.apply(x ^ y) == M.apply(x) ^ M.apply(y)
        v = x
        for j in seq:
            v = km.coupling_step(v, j, n)
        assert M.apply(x) == v
        assert M.rank() <= n

    def test_kernel_is_absorbed_starts(self):
        for seq in itertools.product(range(1, 4), repeat=4):
            M = km.coupling_matrix(seq, 3)
            absorbed = {x for x in range(8) if M.apply(x) == 0}
            span = {0}
            for v in M.kernel():
                span |= {s ^ v for s in span}
            assert absorbed == span


class TestDuality:
    @pytest.mark.parametrize("n,t", [(1, 0), (1, 1)])
    def test_trivial(self, n, t):
        rep = km.duality_check(n, t)
        assert rep.single[0]["lhs"] == rep.single[0]["rhs"] == (0.5 if t == 0 else 0.0)

    def test_exact_n3(self):
        rep = km.duality_check(3, 5)
        assert rep.passed and rep.max_single_residual < 1e-12 and rep.set_max_residual < 1e-12

    def test_dual_row_relation(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            n = int(rng.integers(2, 12))
            seq = list(map(int, rng.integers(1, n + 1, size=int(rng.integers(0, 20)))))
            M = km.coupling_matrix(seq, n)
            for r in range(1, n + 1):
                assert km.dual_state(seq, r, n) == km.suffix_parity(M.row(r), n)

    def test_mc(self):
        rep = km.duality_check(5, 6, "mc", samples=400, rng=np.random.default_rng(5))
        assert rep.passed and rep.realization_mismatches == 0

    def test_too_large(self):
        with pytest.raises(ValueError):
            km.duality_check(6, 9)
        with pytest.raises(ValueError):
            km.duality_check(2, 2, mode="other")
