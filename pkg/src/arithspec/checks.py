"""Acceptance checks shared by ``arithspec validate`` and the test suite.

Each check returns a CheckResult whose ``details`` hold only deterministic
numbers; wall-clock time is kept apart so result files can be compared
byte for byte.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import asymptotics as asy
from . import beurling as beu
from .ledger import LocalTable, cross_validate, enumerate_above
from .local import (local_hs_closed_form, local_spectra, local_trace_closed_form, rank2_model,
                    verify_factorization, verify_self_similarity)
from .numtheory import Sieve, SpectralParams, sieve_primes

SEED = 20240611


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    details: dict
    runtime: float = 0.0
    limit: float = float("inf")

    def as_dict(self) -> dict:
        return {"key": self.key, "title": self.title, "passed": self.passed, "details": self.details}


def _f(x) -> float:
    return float(x)


def _decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


@dataclass
class Workspace:
    """Lazily built tables and ledgers reused across checks."""

    params: SpectralParams = field(default_factory=lambda: SpectralParams(1.0, 3.0))
    threads: int | None = None
    _cache: dict = field(default_factory=dict)

    def get(self, key, build: Callable):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def ledger(self, lam):
        return self.get(("ledger", lam), lambda: enumerate_above(self.params, lam, threads=self.threads))

    def table(self, P, depth_for=None):
        return self.get(("table", P, depth_for),
                        lambda: LocalTable.build(self.params, P, depth_for=depth_for, threads=self.threads))


SWEEP_BASES = (2, 3, 5)
SWEEP_PARAMS = ((1.0, 3.0), (0.5, 2.0), (2.0, 4.0))


def check_factorization(ws: Workspace) -> CheckResult:
    worst = 0.0
    for p in SWEEP_BASES:
        for t, rho in SWEEP_PARAMS:
            worst = max(worst, verify_factorization(p, SpectralParams(t, rho), 32))
    return CheckResult("1", "T*T factorization identity", worst <= 1e-12,
                       {"max_deviation": worst, "tolerance": 1e-12})


def check_self_similarity(ws: Workspace) -> CheckResult:
    worst = 0.0
    for p in SWEEP_BASES:
        for t, rho in SWEEP_PARAMS:
            worst = max(worst, verify_self_similarity(p, SpectralParams(t, rho), 32))
    return CheckResult("2", "block self-similarity", worst <= 1e-15,
                       {"max_rel_deviation": worst, "tolerance": 1e-15})


def _spectra_upto(ws: Workspace, P: int, k_max: int = 8):
    def build():
        ps = sieve_primes(P).primes
        return ps, local_spectra(ps, ws.params, k_max=k_max, threads=ws.threads)
    return ws.get(("spectra", P, k_max), build)


def check_local_structure(ws: Workspace) -> CheckResult:
    _, specs = _spectra_upto(ws, 1000)
    rho = ws.params.rho
    bad_sign = []
    worst_chain = 0.0
    worst_trace = 0.0
    worst_hs = 0.0
    for s in specs:
        en = s.enumeration
        res = s.resolved
        if ws.params.indefinite:
            if int(np.sum(en[res] > 0)) != 1:
                bad_sign.append(int(s.p))
            mags = -en[1:]
            ok = res[1:]
        else:
            if np.any(en[res] <= 0):
                bad_sign.append(int(s.p))
            mags = en
            ok = res
        for k in range(len(mags) - 1):
            if ok[k] and ok[k + 1]:
                worst_chain = max(worst_chain, mags[k + 1] / (s.p**-rho * mags[k]))
        # closed forms differ from the section sums by at most the truncation
        # bound, plus one rounding of the closed form itself
        tr = local_trace_closed_form(s.p, ws.params)
        hs = local_hs_closed_form(s.p, ws.params)
        worst_trace = max(worst_trace, abs(math.fsum(en) - tr) / (s.K * (s.trunc_bound + np.spacing(tr))))
        worst_hs = max(worst_hs, abs(math.fsum(en * en) - hs) / (s.K * (s.trunc_bound + np.spacing(hs))))
    passed = not bad_sign and worst_chain <= 1 + 1e-8 and worst_trace <= 1 and worst_hs <= 1
    return CheckResult("3", "local spectral structure, p <= 1000", passed, {
        "primes": len(specs), "sign_failures": bad_sign[:10], "max_chain_ratio": _f(worst_chain),
        "trace_error_over_tol": _f(worst_trace), "hs_error_over_tol": _f(worst_hs)})


def check_perturbation(ws: Workspace) -> CheckResult:
    _, specs = _spectra_upto(ws, 1000)
    worst = 0.0
    for s in specs:
        lp, lm = rank2_model(s.p, ws.params)
        bound = 2 * s.p ** (-ws.params.rho) * math.sqrt(local_hs_closed_form(s.p, ws.params))
        worst = max(worst, abs(s.lambda_plus - lp) / bound, abs(s.lambda_minus[0] - abs(lm)) / bound)
    return CheckResult("4", "rank-2 displacement bounds, p <= 1000", worst <= 1,
                       {"max_displacement_over_bound": _f(worst)})


def check_large_p(ws: Workspace) -> CheckResult:
    ps = sieve_primes(10**4).primes
    ps = ps[ps >= 100]
    specs = ws.get(("large_p",), lambda: local_spectra(ps, ws.params, k_max=2, threads=ws.threads))
    d = ws.params.rho - ws.params.t
    pf = ps.astype(np.float64)
    plus = np.array([abs(s.lambda_plus - 1) for s in specs]) * pf**d
    minus = np.abs(np.array([s.lambda_minus[0] for s in specs]) * pf**d - 1)
    bins = [(100, 1000), (1000, 10**4 + 1)]
    plus_max = [_f(plus[(ps >= a) & (ps < b)].max()) for a, b in bins]
    minus_max = [_f(minus[(ps >= a) & (ps < b)].max()) for a, b in bins]
    ok_plus = bool(np.all(plus <= 10))
    ok_minus = bool(np.all(minus <= 10 / pf))
    passed = ok_plus and ok_minus and _decreasing(plus_max) and _decreasing(minus_max)
    return CheckResult("5", "large-p local asymptotics", passed, {
        "max_plus_profile": _f(plus.max()), "max_minus_profile_times_p": _f((minus * pf).max()),
        "plus_bin_max": plus_max, "minus_bin_max": minus_max})


def check_sign_multiplicativity(ws: Workspace) -> CheckResult:
    L = ws.ledger(1e-9)
    v = L.values
    sign_bad = int(np.sum((v < 0) != (L.omega % 2 == 1)))
    rng = np.random.default_rng(SEED)
    worst = 0.0
    pairs = 0
    while pairs < 10**4:
        a = int(rng.integers(2, int(math.isqrt(L.N)) + 1))
        b = int(rng.integers(2, L.N // a + 1))
        if math.gcd(a, b) != 1:
            continue
        lhs = v[a * b - 1] * L.product_constant
        rhs = v[a - 1] * v[b - 1]
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
        pairs += 1
    return CheckResult("6", "sign law and multiplicativity", sign_bad == 0 and worst <= 1e-10, {
        "N_enum": L.N, "sign_exceptions": sign_bad, "pairs": pairs, "max_rel_deviation": _f(worst)})


def check_trace(ws: Workspace) -> CheckResult:
    L = ws.ledger(1e-10)
    total = math.fsum(L.values)
    tail = L.tail_sum_bound()
    z = asy.riemann_zeta(ws.params.rho)
    passed = L.N >= 10**5 and total - tail <= z <= total + tail and abs(total - z) <= 1e-4
    return CheckResult("7", "trace identity", passed, {
        "N_enum": L.N, "sum": total, "tail_bound": tail, "zeta_rho": z, "difference": total - z})


def _decade_gap(L, n_lo=10, n_hi=10**4):
    _, a = L.branch("plus")
    _, b = L.branch("minus")
    d = L.decay
    out = []
    lo = n_lo
    while lo < n_hi:
        hi = min(lo * 10, n_hi + 1)
        k = np.arange(lo, hi)
        out.append(_f(np.mean(np.abs(a[k - 1] - b[k - 1]) * k.astype(np.float64) ** d)))
        lo *= 10
    return out


def check_main_theorem(ws: Workspace) -> CheckResult:
    L = ws.ledger(1e-9)
    d = L.decay
    fp = asy.fit_power_law(L, "plus", (100, 10**4))
    fm = asy.fit_power_law(L, "minus", (100, 10**4))
    gap = _decade_gap(L)
    agree = abs(fp.kappa_end - fm.kappa_end) / fp.kappa_end
    passed = (abs(fp.exponent + d) <= 0.05 * d and abs(fm.exponent + d) <= 0.05 * d
              and agree <= 0.05 and _decreasing(gap))
    return CheckResult("8", "power law on both branches", passed, {
        "exponent_plus": fp.exponent, "exponent_minus": fm.exponent,
        "kappa_end_plus": fp.kappa_end, "kappa_end_minus": fm.kappa_end, "prefactor_rel_gap": agree,
        "intercept_plus": fp.prefactor, "intercept_minus": fm.prefactor, "gap_decade_means": gap})


def check_kappa(ws: Workspace) -> CheckResult:
    L = ws.ledger(1e-9)
    k = asy.kappa(ws.params, ledger=L, table=ws.table(10**5))
    dp = abs(k.kappa_product - k.kappa_fit_plus) / k.kappa_fit_plus
    dm = abs(k.kappa_product - k.kappa_fit_minus) / k.kappa_fit_minus
    return CheckResult("9", "kappa from the Euler product", dp <= 0.1 and dm <= 0.1, {
        "kappa_product": k.kappa_product, "kappa_fit_plus": k.kappa_fit_plus,
        "kappa_fit_minus": k.kappa_fit_minus, "rel_dev_plus": dp, "rel_dev_minus": dm,
        "euler_remainder": k.remainder})


LEGACY_CASES = ((0.0, 1.0, 2e-5), (0.25, 1.0, 1e-2))


def _legacy_case(ws: Workspace, sigma, tau, lam):
    params = SpectralParams.from_sigma_tau(sigma, tau)
    L = ws.get(("legacy", sigma, tau), lambda: enumerate_above(params, lam, threads=ws.threads))
    _, a = L.branch("plus")
    d = params.decay
    target = 1.0 if sigma == 0 else math.sqrt(asy.riemann_zeta(2 + 4 * sigma)) / asy.riemann_zeta(1 + 2 * sigma)
    scaled = a[:10**4] * np.arange(1, 10**4 + 1, dtype=np.float64) ** d
    bins = [_f(np.mean(np.abs(scaled[lo - 1 : lo * 10 - 1] / target - 1))) for lo in (10, 100, 1000)]
    at = _f(scaled[-1])
    return params, L, target, at, bins


def check_legacy(ws: Workspace) -> CheckResult:
    details = {}
    passed = True
    for sigma, tau, lam in LEGACY_CASES:
        params, L, target, at, bins = _legacy_case(ws, sigma, tau, lam)
        if sigma == 0:
            ok = 0.9 <= at <= 1.1 and _decreasing(bins)
        else:
            ok = abs(at / target - 1) <= 0.15 and _decreasing(bins)
        k = asy.kappa(params, table=ws.get(("legacy_table", sigma, tau),
                                           lambda: LocalTable.build(params, 10**5, depth_for=2**10,
                                                                    threads=ws.threads)))
        details[f"sigma={sigma},tau={tau}"] = {
            "passed": ok, "N_enum": L.N, "scaled_at_1e4": at, "target": target,
            "decade_mean_rel_dev": bins, "kappa_euler_product": k.kappa_product}
        passed = passed and ok
    return CheckResult("10", "legacy definite regime constants", passed, details)


S_GRID = tuple(round(0.55 + 0.05 * i, 2) for i in range(10))


def check_zeta(ws: Workspace) -> CheckResult:
    L = ws.ledger(1e-10)
    d = ws.params.decay
    table = ws.table(10**5)
    data = asy.EulerData(table, 10**5)
    prof = asy.spectral_zeta(ws.params, S_GRID, table=table)
    lf = np.array([asy.ledger_f(L, s) for s in S_GRID])
    f_dev = _f(np.max(np.abs(prof.f_values - lf) / lf))
    near = 1 / d + asy.S_MARGIN
    grid = (near,) + S_GRID
    g = beu.spectral_beurling_primes(ws.params, 10**5, table=table)
    f1 = np.array([asy.f1_product(data, s).value for s in grid])
    h1 = np.array([asy.h1_product(data, s).value for s in grid])
    fz = asy.spectral_zeta(ws.params, grid, table=table)
    zp = np.array([beu.beurling_zeta(g, d * s) for s in grid])
    # the direct f1 product must equal f / zeta_P computed separately
    f1_paths = _f(np.max(np.abs(fz.f_values / zp - f1) / f1))
    growth = _f(fz.f_values[0] / fz.f_values[-1])
    f1_spread = _f(f1.max() / f1.min())
    h1_max = _f(np.max(np.abs(h1)))
    passed = (f_dev <= 1e-3 and f1.min() > 0 and f1_spread <= 2 and growth >= 10
              and np.all(np.isfinite(h1)) and h1_max <= 10)
    return CheckResult("11", "zeta factorizations", passed, {
        "f_euler_vs_ledger_max_rel": f_dev, "f_growth_to_abscissa": growth,
        "f1_min": _f(f1.min()), "f1_max": _f(f1.max()), "f1_two_paths_max_rel": f1_paths,
        "h1_max_abs": h1_max, "s_near": near})


def check_beurling(ws: Workspace) -> CheckResult:
    table = ws.table(10**6)
    g = beu.spectral_beurling_primes(ws.params, 10**6, table=table)
    dev = np.abs(g.deviation)
    big = g.p >= 100
    bins = [_f(dev[(g.p >= lo) & (g.p < lo * 10)].max()) for lo in (100, 1000, 10**4, 10**5)]
    ok_dev = dev[big].max() <= 0.05 and _decreasing(bins)
    # classical check: 5-smooth numbers and Moebius against a sieve
    X = 10**5
    sm = beu.generate_integers([2, 3, 5], X)
    sv = Sieve(X)
    n = np.arange(1, X + 1)
    rest = n.copy()
    for p in (2, 3, 5):
        while True:
            div = rest % p == 0
            if not div.any():
                break
            rest[div] //= p
    smooth = n[rest == 1]
    mu = sv.mobius_table()[smooth]
    ok_smooth = np.array_equal(sm.integers, smooth.astype(np.float64)) and np.array_equal(sm.mobius, mu)
    system = ws.get(("beurling_system",), lambda: beu.spectral_system(ws.params, 1e6, table=table))
    xs = np.array([1e3, 1e4, 1e5, 1e6])
    N, M = beu.counting(system, xs)
    ratio = N / xs
    steps = [_f(abs(b - a)) for a, b in zip(ratio, ratio[1:])]
    c1 = beu.residue(g)
    m_ratio = np.abs(M) / xs
    ok_plateau = _decreasing(steps) and abs(ratio[-1] / c1 - 1) <= 0.01
    ok_m = _decreasing(list(m_ratio)) and m_ratio[-1] <= 1e-3
    passed = bool(ok_dev and ok_smooth and ok_plateau and ok_m)
    return CheckResult("12", "Beurling prime system", passed, {
        "max_deviation_p_ge_100": _f(dev[big].max()), "deviation_bin_max": bins,
        "smooth_and_mobius_match": bool(ok_smooth), "N_over_x": [_f(x) for x in ratio],
        "residue_c1": c1, "abs_M_over_x": [_f(x) for x in m_ratio], "integers": len(system)})


def check_cross_validation(ws: Workspace) -> CheckResult:
    L = ws.ledger(1e-5)
    r128 = cross_validate(ws.params, 128, 5, L)
    r512 = cross_validate(ws.params, 512, 5, L)
    improve = bool(np.all(r512.rel_dev <= r128.rel_dev))
    top = _f(r512.rel_dev[0])
    passed = improve and bool(r128.sign_match.all() and r512.sign_match.all()) and top <= 0.1
    return CheckResult("X1", "finite sections against the ledger", passed, {
        "rel_dev_128": [_f(x) for x in r128.rel_dev], "rel_dev_512": [_f(x) for x in r512.rel_dev]})


CHECKS: dict[str, tuple[Callable[[Workspace], CheckResult], float]] = {
    "1": (check_factorization, 1.0),
    "2": (check_self_similarity, 1.0),
    "3": (check_local_structure, 30.0),
    "4": (check_perturbation, 30.0),
    "5": (check_large_p, 120.0),
    "6": (check_sign_multiplicativity, 120.0),
    "7": (check_trace, 300.0),
    "8": (check_main_theorem, 300.0),
    "9": (check_kappa, 300.0),
    "10": (check_legacy, 300.0),
    "11": (check_zeta, 300.0),
    "12": (check_beurling, 300.0),
    "X1": (check_cross_validation, 60.0),
}

SUITES = {
    "default": ["1", "2", "3", "4", "5", "6", "7", "8", "9", "11", "12", "X1"],
    "legacy": ["10"],
    "all": list(CHECKS),
}


def run_check(key: str, ws: Workspace) -> CheckResult:
    fn, limit = CHECKS[key]
    t0 = time.perf_counter()
    res = fn(ws)
    res.runtime = time.perf_counter() - t0
    res.limit = limit
    return res


def run_suite(suite: str = "default", only=None, params: SpectralParams | None = None,
              threads: int | None = None) -> list[CheckResult]:
    keys = list(only) if only else SUITES[suite]
    ws = Workspace(params=params or SpectralParams(1.0, 3.0), threads=threads)
    return [run_check(k, ws) for k in keys]
