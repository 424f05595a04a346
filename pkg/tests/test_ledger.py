import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arithspec.asymptotics import riemann_zeta
from arithspec.errors import AccuracyError, CapacityError, ParameterError, RangeError
from arithspec.ledger import (EigenvalueLedger, LocalTable, counting, cross_validate, eigenvalue_at,
                              enumerate_above, product_constant, truncated_global)
from arithspec.linalg import sym_eig
from arithspec.local import local_spectrum
from arithspec.numtheory import Sieve, SpectralParams

P13 = SpectralParams(1.0, 3.0)

# lambda_0(E_2) and lambda_2(E_2) from the mpmath oracle (60 digits, K=50)
LAM0_2 = 1.2942356326679469024
LAM2_2 = -0.015625617965059495691


@pytest.fixture(scope="module")
def ledger():
    return enumerate_above(P13, 1e-6)


@pytest.fixture(scope="module")
def table():
    return LocalTable.build(P13, 10**4, depth_for=10**4)


class TestProductConstant:
    def test_small_P_rejected(self):
        with pytest.raises(ParameterError):
            product_constant(P13, 99)

    def test_monotone_partial_products(self, table):
        assert np.all(table.lambda0 >= 1.0)
        partial = np.cumprod(table.lambda0)
        assert np.all(np.diff(partial) >= 0)

    def test_single_factor(self, table):
        assert table.lambda0[0] == local_spectrum(2, P13).lambda_plus
        assert table.lambda0[0] == pytest.approx(LAM0_2, rel=1e-14)

    def test_P_convergence(self, table):
        c4 = product_constant(P13, 10**4, table=table)
        c5 = product_constant(P13, 10**5)
        assert abs(c5.C - c4.C) / c5.C <= 1e-4
        # the remainder estimate at 10^4 covers the change up to 10^5
        assert math.log(c5.C / c4.C) <= c4.remainder
        assert c5.C_extrapolated >= c5.C

    def test_legacy(self):
        pc = product_constant(SpectralParams.from_sigma_tau(0.0, 1.0), 1000)
        assert pc.C > 1 and pc.remainder > 0


class TestEigenvalueAt:
    def test_examples(self, table):
        C = product_constant(P13, 10**4, table=table).C
        assert eigenvalue_at(1, P13, table, C) == C
        assert eigenvalue_at(6, P13, table, C) > 0
        v4 = eigenvalue_at(4, P13, table, C)
        assert v4 < 0
        assert v4 == pytest.approx(C * LAM2_2 / LAM0_2, rel=1e-13)

    def test_unresolved(self, table):
        with pytest.raises(AccuracyError):
            eigenvalue_at(2**60, P13, table, 1.0)

    def test_matches_ledger(self, ledger):
        tab = LocalTable.build(P13, 2000, depth_for=2000)
        C = ledger.product_constant
        for n in range(1, 2001, 7):
            if n > ledger.N:
                break
            assert eigenvalue_at(n, P13, tab, C) == pytest.approx(ledger.value(n), rel=1e-13)
        assert eigenvalue_at(5, P13, ledger) == ledger.value(5)

    def test_bad_n(self, table):
        with pytest.raises(ParameterError):
            eigenvalue_at(0, P13, table, 1.0)


class TestLedger:
    def test_complete_and_certified(self, ledger):
        assert len(ledger.values) == ledger.N
        assert ledger.values[0] == ledger.product_constant > 0
        d = P13.decay
        assert ledger.tail_constant * ledger.N ** (-d) <= ledger.threshold * (1 + 1e-12)
        assert np.all(np.isfinite(ledger.values))

    def test_nothing_above_threshold_beyond(self, ledger):
        # values past N_enum, from the product formula directly, stay below lambda*
        N = ledger.N
        tab = LocalTable.build(P13, 3 * N, depth_for=3 * N)
        for n in range(N + 1, 3 * N + 1):
            assert abs(eigenvalue_at(n, P13, tab, ledger.product_constant)) <= ledger.threshold

    def test_sign_law(self, ledger):
        om = Sieve(ledger.N).omega_table()[1:]
        assert np.all((ledger.values < 0) == (om % 2 == 1))
        assert ledger.value(2) < 0 < ledger.value(6)
        assert ledger.value(30) < 0

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_multiplicativity(self, ledger, data):
        a = data.draw(st.integers(1, int(math.isqrt(ledger.N))))
        b = data.draw(st.integers(1, ledger.N // a))
        if math.gcd(a, b) != 1:
            return
        C = ledger.product_constant
        assert ledger.value(a * b) * C == pytest.approx(ledger.value(a) * ledger.value(b), rel=1e-10)

    def test_prime_powers_reproduce_local(self, ledger):
        for p in (2, 3, 5):
            s = local_spectrum(p, P13)
            k = 0
            while p**k <= ledger.N:
                expect = ledger.product_constant / s.enumeration[0] * s.enumeration[k]
                assert ledger.value(p**k) == pytest.approx(expect, rel=1e-12)
                k += 1

    def test_trace_bracket(self, ledger):
        total = math.fsum(ledger.values)
        tail = ledger.tail_sum_bound()
        assert total - tail <= riemann_zeta(3) <= total + tail

    def test_sorted_order(self, ledger):
        idx = ledger.sorted_indices()
        mags = np.abs(ledger.values[idx - 1])
        assert np.all(np.diff(mags) <= 0)
        assert sorted(idx.tolist()) == list(range(1, ledger.N + 1))
        n, m = ledger.branch("plus")
        assert np.all(ledger.values[n - 1] > 0) and np.all(np.diff(m) <= 0)
        with pytest.raises(ParameterError):
            ledger.branch("both")

    def test_ties_to_smaller_n(self):
        L = EigenvalueLedger.from_values([0.5, -0.25, 0.25, 0.5])
        assert L.sorted_indices().tolist() == [1, 4, 2, 3]

    def test_value_range(self, ledger):
        with pytest.raises(RangeError):
            ledger.value(ledger.N + 1)

    def test_errors(self):
        with pytest.raises(ParameterError):
            enumerate_above(P13, 0.0)
        with pytest.raises(CapacityError):
            enumerate_above(P13, 1e-20)

    def test_legacy_ledger(self):
        L = enumerate_above(SpectralParams.from_sigma_tau(0.0, 1.0), 1e-2)
        assert np.all(L.values > 0)
        assert L.tail_constant * L.N ** (-1.0) <= L.threshold * (1 + 1e-12)


class TestCounting:
    def test_toy(self):
        L = EigenvalueLedger.from_values([1.2, -0.3, 0.5])
        c = counting(L, [1.0])
        assert c.mu_plus.tolist() == [1] and c.mu_minus.tolist() == [0]
        c = counting(L, [1.0, 2.5, 4.0])
        assert c.mu_plus.tolist() == [1, 2, 2]
        assert c.mu_minus.tolist() == [0, 0, 1]

    def test_range(self, ledger):
        with pytest.raises(RangeError):
            counting(ledger, [10.0, 2 / ledger.threshold])
        with pytest.raises(ParameterError):
            counting(ledger, [])

    def test_monotone_and_bounded(self, ledger):
        x = np.geomspace(1, 1 / ledger.threshold, 40)
        c = counting(ledger, x)
        assert np.all(np.diff(c.mu_plus) >= 0) and np.all(np.diff(c.mu_minus) >= 0)
        assert c.mu_plus[-1] <= np.sum(ledger.values > 0)

    def test_same_coefficient_and_slope(self):
        L = enumerate_above(P13, 1e-8)
        x = np.geomspace(1e3, 1 / L.threshold, 30)
        c = counting(L, x)
        ratio = c.mu_plus / c.mu_minus
        assert abs(ratio[-1] - 1) < abs(ratio[0] - 1)
        assert abs(ratio[-1] - 1) < 0.05
        assert c.fit_plus.slope == pytest.approx(1 / P13.decay, abs=0.03)
        assert c.fit_minus.slope == pytest.approx(1 / P13.decay, abs=0.03)


class TestSections:
    def test_examples(self):
        A = truncated_global(2, P13).entries
        assert np.linalg.det(A) == pytest.approx(2.0**-3 - 2.0**-2, rel=1e-14)
        assert truncated_global(1, P13).entries.tolist() == [[1.0]]
        assert np.trace(truncated_global(3, P13).entries) == pytest.approx(1 + 2**-3 + 3**-3, rel=1e-15)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            truncated_global(4097, P13)

    def test_cross_validation(self, ledger):
        r128 = cross_validate(P13, 128, 5, ledger)
        r512 = cross_validate(P13, 512, 5, ledger)
        assert np.all(r512.rel_dev <= r128.rel_dev)
        assert r512.sign_match.all()
        assert r512.ledger_values[0] > 0
        assert r512.rel_dev[0] <= 0.1
        d = r512.as_dict()
        assert d["N"] == 512 and len(d["rel_dev"]) == 5

    def test_section_sign_pattern(self, ledger):
        w = sym_eig(truncated_global(256, P13)).values
        top = w[np.argsort(-np.abs(w), kind="stable")][:10]
        idx = ledger.sorted_indices()[:10]
        assert np.array_equal(np.sign(top), np.sign(ledger.values[idx - 1]))

    def test_cross_validation_args(self, ledger):
        with pytest.raises(ParameterError):
            cross_validate(P13, 100, 5, ledger)
        with pytest.raises(ParameterError):
            cross_validate(P13, 128, 21, ledger)
