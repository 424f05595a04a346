import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arithspec import asymptotics as asy
from arithspec.errors import FitError, ParameterError, RangeError
from arithspec.ledger import EigenvalueLedger, LocalTable, enumerate_above
from arithspec.local import local_spectrum, local_trace_closed_form
from arithspec.numtheory import SpectralParams

P13 = SpectralParams(1.0, 3.0)
ZETA3 = 1.2020569031595942854  # mpmath, 30 digits


@pytest.fixture(scope="module")
def table():
    return LocalTable.build(P13, 10**5, depth_for=256)


@pytest.fixture(scope="module")
def ledger():
    return enumerate_above(P13, 1e-9)


class TestRiemannZeta:
    def test_examples(self):
        assert asy.riemann_zeta(2) == pytest.approx(math.pi**2 / 6, abs=1e-13)
        assert asy.riemann_zeta(4) == pytest.approx(math.pi**4 / 90, abs=1e-13)
        assert asy.riemann_zeta(3) == pytest.approx(ZETA3, abs=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(1.1, 40))
    def test_against_mpmath(self, s):
        assert abs(asy.riemann_zeta(s) - float(mp.zeta(s))) <= 1e-12

    def test_near_pole(self):
        assert asy.riemann_zeta(1.001) == pytest.approx(float(mp.zeta(1.001)), rel=1e-10)
        with pytest.raises(RangeError):
            asy.riemann_zeta(1.0)
        with pytest.raises(RangeError):
            asy.riemann_zeta(1 + 1e-7)


class TestEulerFactors:
    def test_at_one(self):
        for p in (2, 3, 11):
            s = local_spectrum(p, P13, k_max=20)
            f = asy.euler_factor_f(p, P13, 1.0, s)
            h = asy.euler_factor_h(p, P13, 1.0, s)
            assert f.value == pytest.approx(s.lambda_plus + s.lambda_minus[: s.depth - 1].sum(), rel=1e-14)
            assert h.value == pytest.approx(local_trace_closed_form(p, P13), rel=1e-13)
            assert h.value == pytest.approx(2 * s.lambda_plus - f.value, rel=1e-13)
            assert f.tail_bound <= 1e-10 * f.value

    def test_dominance(self):
        s = local_spectrum(2, P13)
        f = asy.euler_factor_f(2, P13, 60.0, s)
        assert f.value / s.lambda_plus**60 == pytest.approx(1.0, abs=1e-40)

    def test_bad_s(self):
        with pytest.raises(ParameterError):
            asy.euler_factor_f(2, P13, 0.0)

    def test_factors_tend_to_one(self):
        # (1 - 1/p) sum_k |lambda_k|^(1/d) -> 1
        devs = []
        for p in (11, 101, 1009, 10007):
            f = asy.euler_factor_f(p, P13, 0.5).value
            devs.append(abs((1 - 1 / p) * f - 1))
        assert all(b < a for a, b in zip(devs, devs[1:]))
        assert devs[-1] < 1e-4


class TestSpectralZeta:
    S = [0.55, 0.6, 0.75, 0.9, 1.0, 1.5]

    def test_euler_vs_ledger_direct(self, table, ledger):
        prof = asy.spectral_zeta(P13, [0.75], table=table)
        k = asy.kappa(P13, table=table).kappa_product
        direct = asy.ledger_f_direct(ledger, 0.75, k)
        assert abs(prof.f_values[0] - direct) / direct <= 1e-3

    def test_euler_vs_ledger_moebius(self, table, ledger):
        prof = asy.spectral_zeta(P13, self.S, table=table)
        for s, f, h in zip(self.S, prof.f_values, prof.h_values):
            assert asy.ledger_f(ledger, s) == pytest.approx(f, rel=1e-3)
            assert asy.ledger_h(ledger, s) == pytest.approx(h, rel=1e-3)

    def test_branch_decomposition(self, table, ledger):
        prof = asy.spectral_zeta(P13, [0.75], table=table)
        v = ledger.values
        keep = np.abs(v) > ledger.threshold
        fp = math.fsum(v[keep & (v > 0)] ** 0.75)
        fm = math.fsum((-v[keep & (v < 0)]) ** 0.75)
        assert fp - fm == pytest.approx(prof.h_values[0], rel=1e-3)
        assert asy.ledger_h_direct(ledger, 0.75) == pytest.approx(fp - fm, rel=1e-14)

    def test_shape(self, table):
        prof = asy.spectral_zeta(P13, self.S, table=table)
        assert np.all(prof.f_values >= np.abs(prof.h_values))
        # decreasing up to s = 1; beyond that lambda_1 = C > 1 takes over
        assert np.all(np.diff(prof.f_values[:5]) < 0)
        assert prof.f_values[5] > prof.f_values[4]
        z = np.array([asy.riemann_zeta(2 * s) for s in self.S])
        assert np.allclose(prof.f_tilde_values * z, prof.f_values, rtol=1e-14)
        assert np.allclose(prof.h_tilde_values / z, prof.h_values, rtol=1e-14)
        assert len(prof.as_rows()) == len(self.S)

    def test_h_at_one_is_trace(self, table):
        prof = asy.spectral_zeta(P13, [1.0], table=table)
        assert prof.h_values[0] == pytest.approx(ZETA3, rel=1e-5)

    def test_margin(self, table):
        asy.spectral_zeta(P13, [0.52], table=table)
        with pytest.raises(RangeError):
            asy.spectral_zeta(P13, [0.51], table=table)

    def test_f_tilde_to_s1(self, table):
        s1 = asy.abscissa_s1(P13)
        assert s1 == pytest.approx(0.25)
        s = np.linspace(s1 + 0.05, 1.0, 12)
        vals, rem = asy.f_tilde(P13, s, table=table)
        assert np.all(vals > 0) and np.all(np.isfinite(vals))
        assert vals.max() / vals.min() < 10
        with pytest.raises(RangeError):
            asy.f_tilde(P13, [s1 + 0.01], table=table)

    def test_h_no_pole_at_abscissa(self, table):
        small = asy.EulerData(table, 10**4)
        big = asy.EulerData(table, 10**5)
        a = asy.h_tilde_product(small, 0.5)
        b = asy.h_tilde_product(big, 0.5)
        assert np.isfinite(b.value) and b.value != 0
        assert abs(b.log_value - a.log_value) <= 2 * a.remainder + 1e-12


class TestKappa:
    def test_positive_and_consistent(self, table):
        k = asy.kappa(P13, table=table)
        assert k.kappa_product > 0
        ft, _ = asy.f_tilde(P13, [0.5], table=table)
        assert k.kappa_product == pytest.approx((ft[0] / 2) ** 2, rel=1e-10)
        assert k.formula == "(f~(1/d)/2)^d"

    def test_against_fits(self, table, ledger):
        k = asy.kappa(P13, table=table, ledger=ledger)
        assert abs(k.kappa_product - k.kappa_fit_plus) / k.kappa_fit_plus <= 0.1
        assert abs(k.kappa_product - k.kappa_fit_minus) / k.kappa_fit_minus <= 0.1
        d = k.as_dict()
        assert set(d) >= {"kappa_product", "kappa_fit_plus", "kappa_fit_minus"}

    def test_other_parameters(self):
        for t, rho in ((0.5, 2.0), (2.0, 4.0)):
            assert asy.kappa(SpectralParams(t, rho), P_max=1000).kappa_product > 0


class TestFits:
    def test_synthetic(self):
        n = np.arange(1, 2001)
        fit = asy.fit_power_law(2.0 * n.astype(float) ** -2, n_range=(10, 2000))
        assert fit.exponent == pytest.approx(-2.0, abs=1e-12)
        assert fit.prefactor == pytest.approx(2.0, rel=1e-12)
        assert fit.residual < 1e-12
        assert fit.kappa_end == pytest.approx(2.0, rel=1e-12)
        assert np.allclose(fit.scaled, 2.0, rtol=1e-12)

    def test_too_few_points(self):
        with pytest.raises(FitError):
            asy.fit_power_law(np.ones(100), n_range=(10, 58))

    def test_outside_certified_range(self, ledger):
        with pytest.raises(RangeError):
            asy.fit_power_law(ledger, "plus", (100, 10**6))
        L = EigenvalueLedger(params=P13, values=np.arange(1, 200, dtype=float)[::-1] / 200, threshold=0.5,
                             tail_constant=1.0, product_constant=1.0)
        with pytest.raises(RangeError):
            asy.fit_power_law(L, "plus", (10, 150))

    def test_ledger_exponent(self, ledger):
        for b in ("plus", "minus"):
            fit = asy.fit_power_law(ledger, b, (100, 10**4))
            assert fit.exponent == pytest.approx(-2.0, rel=0.05)
            assert len(fit.scaled) == 10**4 - 99
