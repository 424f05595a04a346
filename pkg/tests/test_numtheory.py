import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arithspec.errors import ParameterError, RangeError
from arithspec.numtheory import (FactoredInteger, Sieve, SpectralParams, entry, entry_matrix, factorize, lcm,
                                 omega, sieve_primes)

P13 = SpectralParams(1.0, 3.0)
SIEVE = Sieve(10**5)


def is_prime(n):
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


def trial_factor(n):
    out, d = [], 2
    while d * d <= n:
        k = 0
        while n % d == 0:
            n //= d
            k += 1
        if k:
            out.append((d, k))
        d += 1
    if n > 1:
        out.append((n, 1))
    return tuple(out)


class TestParams:
    def test_indefinite_regime(self):
        p = SpectralParams(1.0, 3.0)
        assert p.indefinite and p.decay == 2.0 and p.delta == 1.0
        assert p.sigma == -2.0 and p.tau == -1.0

    @pytest.mark.parametrize("t,rho", [(0.0, 3.0), (-0.5, 3.0), (1.0, 2.0), (1.0, 1.5)])
    def test_rejects_bad_indefinite(self, t, rho):
        with pytest.raises(ParameterError):
            SpectralParams(t, rho, "indefinite")

    def test_legacy_from_sigma_tau(self):
        p = SpectralParams.from_sigma_tau(0.25, 1.0)
        assert not p.indefinite
        assert p.rho == 0.5 and p.tau == 1.0 and p.sigma == 0.25 and p.decay == 0.5

    @pytest.mark.parametrize("sigma,tau", [(0.5, 1.0), (0.0, 0.4), (0.6, 1.0)])
    def test_rejects_bad_legacy(self, sigma, tau):
        with pytest.raises(ParameterError):
            SpectralParams.from_sigma_tau(sigma, tau)

    def test_error_names_inequality(self):
        with pytest.raises(ParameterError, match="rho > t \\+ 1"):
            SpectralParams(1.0, 1.5)


class TestSieve:
    def test_small(self):
        assert sieve_primes(10).primes.tolist() == [2, 3, 5, 7]
        assert sieve_primes(2).primes.tolist() == [2]

    def test_count_1e4_against_trial_division(self):
        ps = sieve_primes(10**4).primes
        assert len(ps) == 1229
        assert ps.tolist() == [n for n in range(10**4 + 1) if is_prime(n)]

    @pytest.mark.parametrize("limit", [1, 0, 10**8 + 1])
    def test_limits(self, limit):
        with pytest.raises(ParameterError):
            sieve_primes(limit)

    def test_spf(self):
        for n in range(2, 2000):
            assert SIEVE.spf[n] == trial_factor(n)[0][0]


class TestFactorize:
    def test_examples(self):
        assert factorize(12, SIEVE.spf).factors == ((2, 2), (3, 1))
        assert factorize(1, SIEVE.spf).factors == ()
        assert factorize(9973, SIEVE.spf).factors == trial_factor(9973) == ((9973, 1),)

    def test_beyond_table(self):
        with pytest.raises(ParameterError):
            factorize(10**5 + 1, SIEVE.spf)
        with pytest.raises(ParameterError):
            factorize(0, SIEVE.spf)

    @given(st.integers(1, 10**5))
    def test_matches_trial_division_and_reconstructs(self, n):
        f = SIEVE.factorize(n)
        assert f.factors == trial_factor(n)
        assert math.prod(p**k for p, k in f) == n

    def test_factored_integer_validation(self):
        with pytest.raises(ValueError):
            FactoredInteger(12, ((3, 1), (2, 2)))
        with pytest.raises(ValueError):
            FactoredInteger(12, ((2, 1), (3, 1)))

    def test_reconstruct_whole_range(self):
        s = Sieve(5000)
        for n in range(1, 5001):
            assert math.prod(p**k for p, k in s.factorize(n)) == n


class TestOmegaMobius:
    def test_examples(self):
        assert omega(SIEVE.factorize(1)) == 0
        assert omega(SIEVE.factorize(12)) == 2
        assert omega(SIEVE.factorize(30030)) == len(trial_factor(30030)) == 6

    def test_tables_match_factorization(self):
        s = Sieve(3000)
        om = s.omega_table()
        mu = s.mobius_table()
        for n in range(1, 3001):
            f = trial_factor(n)
            assert om[n] == len(f)
            expect = 0 if any(k > 1 for _, k in f) else (-1) ** len(f)
            assert mu[n] == expect


class TestEntry:
    def test_examples(self):
        assert entry(1, 1, P13) == 1.0
        assert entry(1, 1, SpectralParams(0.5, 2.0)) == 1.0
        assert entry(2, 4, P13) == pytest.approx(0.0625, rel=1e-15)
        # [2,3] = 6 and (nm)^((rho+t)/2) = 36
        assert entry(2, 3, P13) == pytest.approx(1 / 6, rel=1e-15)

    def test_exact_rational_oracle(self):
        # [n,m] / (nm)^2 for t=1, rho=3 is rational
        for n in range(1, 40):
            for m in range(1, 40):
                exact = Fraction(math.lcm(n, m), (n * m) ** 2)
                assert entry(n, m, P13) == pytest.approx(float(exact), rel=1e-15)

    def test_legacy_form(self):
        p = SpectralParams.from_sigma_tau(0.25, 1.0)
        assert entry(2, 3, p) == pytest.approx((2 * 3) ** 0.25 / 6, rel=1e-15)

    def test_lcm_overflow(self):
        with pytest.raises(RangeError):
            lcm(2**62 - 1, 2**62 - 3)

    def test_matrix_matches_entry(self):
        M = entry_matrix(30, P13)
        for n in range(1, 31):
            for m in range(1, 31):
                assert M[n - 1, m - 1] == pytest.approx(entry(n, m, P13), rel=1e-15)
        assert np.array_equal(M, M.T)

    @settings(max_examples=200)
    @given(st.integers(1, 10**4), st.integers(1, 10**4), st.floats(0.2, 3.0), st.floats(1.05, 4.0))
    def test_symmetry(self, n, m, t, extra):
        p = SpectralParams(t, t + extra)
        assert entry(n, m, p) == entry(m, n, p)

    @settings(max_examples=200)
    @given(st.integers(1, 300), st.integers(1, 300), st.integers(2, 30), st.floats(0.2, 3.0), st.floats(1.05, 4.0))
    def test_homogeneity(self, n, m, k, t, extra):
        p = SpectralParams(t, t + extra)
        assert entry(k * n, k * m, p) == pytest.approx(k ** (-p.rho) * entry(n, m, p), rel=1e-12)

    @given(st.integers(1, 10**6), st.floats(0.2, 3.0), st.floats(1.05, 4.0))
    def test_diagonal_law(self, n, t, extra):
        p = SpectralParams(t, t + extra)
        assert entry(n, n, p) == pytest.approx(n ** (-p.rho), rel=1e-14)

    def test_matrix_diagonal(self):
        M = entry_matrix(50, P13)
        assert np.allclose(np.diag(M), np.arange(1, 51.0) ** -3, rtol=1e-14, atol=0)
