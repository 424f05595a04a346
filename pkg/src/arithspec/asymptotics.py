"""Spectral zeta functions, the constant kappa, and power-law fits.

With d the decay exponent, f(s) = sum |lambda_n|^s and h(s) = sum sign * |lambda_n|^s
factor over primes. Near the abscissa s = 1/d it is better to work with

    f~(s) = f(s) / zeta(d s) = prod_p (1 - p^-ds) f_p(s),
    h~(s) = h(s) * zeta(d s) = prod_p h_p(s) / (1 - p^-ds),

whose Euler products converge well past 1/d.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AccuracyError, FitError, ParameterError, RangeError
from .ledger import EigenvalueLedger, LocalTable
from .local import LocalSpectrum, local_spectrum
from .numtheory import Sieve, SpectralParams

# Bernoulli numbers B_2 .. B_8
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30)
_ZETA_TERMS = 10**4
# margin above the abscissa 1/d demanded by spectral_zeta
S_MARGIN = 0.02


@lru_cache(maxsize=4096)
def riemann_zeta(s: float) -> float:
    """zeta(s) for real s > 1 by Euler-Maclaurin with 10^4 terms and 4 corrections."""
    s = float(s)
    if not s > 1 + 1e-6:
        raise RangeError(f"riemann_zeta needs s > 1 + 1e-6, got {s}")
    M = _ZETA_TERMS
    n = np.arange(M - 1, 0, -1, dtype=np.float64)  # small terms first
    head = math.fsum(np.exp(-s * np.log(n)))
    Ms = M**-s
    total = head + M ** (1 - s) / (s - 1) + Ms / 2
    # B_2k/(2k)! * s(s+1)...(s+2k-2) * M^(-s-2k+1)
    rising = s
    fact = 2.0
    for k, b in enumerate(_BERNOULLI, start=1):
        total += b / fact * rising * Ms / M ** (2 * k - 1)
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        fact *= (2 * k + 1) * (2 * k + 2)
    return total


@dataclass(frozen=True)
class EulerFactor:
    value: float
    tail_bound: float  # bound on the omitted sum over k past the converged depth
    depth: int


def _factor_terms(spec: LocalSpectrum) -> tuple[np.ndarray, np.ndarray, float]:
    n = spec.depth
    lam = spec.enumeration[:n]
    last = abs(lam[-1])
    ratio = spec.p ** (-spec.params.rho)
    return np.abs(lam), np.sign(lam), last * ratio


def _euler_factor(p, params, s, spectrum, tol, signed):
    if not s > 0:
        raise ParameterError(f"s must be > 0, got {s}")
    spec = spectrum or local_spectrum(p, params)
    mags, signs, nxt = _factor_terms(spec)
    # |lambda_(k+1)| <= p^-rho |lambda_k| beyond the converged depth
    q = spec.p ** (-spec.params.rho * s)
    tail = nxt**s / (1 - q)
    terms = mags**s * (signs if signed else 1.0)
    value = math.fsum(terms)
    if tail > tol * abs(value):
        raise AccuracyError(f"Euler factor tail {tail:.3e} exceeds tolerance at p={spec.p}", achieved=tail)
    return EulerFactor(value=value, tail_bound=tail, depth=spec.depth)


def euler_factor_f(p, params: SpectralParams, s: float, spectrum: LocalSpectrum | None = None,
                   tol: float = 1e-10) -> EulerFactor:
    """f_p(s) = sum_k |lambda_k(E_p)|^s."""
    return _euler_factor(p, params, s, spectrum, tol, signed=False)


def euler_factor_h(p, params: SpectralParams, s: float, spectrum: LocalSpectrum | None = None,
                   tol: float = 1e-10) -> EulerFactor:
    """h_p(s) = sum_k sign(lambda_k) |lambda_k(E_p)|^s = 2 lambda_0^s - f_p(s) when indefinite."""
    return _euler_factor(p, params, s, spectrum, tol, signed=True)


class EulerData:
    """Local spectra of all primes up to P packed for vectorised Euler products.

    Works with ratios g_k = |lambda_k / lambda_0| (k >= 1) so that the lambda_0
    factors collect into C^s.
    """

    def __init__(self, table: LocalTable, P_max: int):
        self.params = table.params
        keep = table.primes <= P_max
        self.primes = table.primes[keep]
        self.P_max = int(P_max)
        specs = [table.spectra[int(p)] for p in self.primes]
        depth = max(s.depth for s in specs)
        self.logg = np.full((len(specs), max(depth - 1, 1)), -np.inf)
        self.log_tail = np.empty(len(specs))
        for i, s in enumerate(specs):
            g = np.abs(s.enumeration[1 : s.depth] / s.enumeration[0])
            self.logg[i, : len(g)] = np.log(g)
            last = g[-1] if len(g) else 1.0
            self.log_tail[i] = math.log(last) - self.params.rho * math.log(s.p)
        self.log_lam0 = np.log(table.lambda0[keep])
        self.log_p = np.log(self.primes.astype(np.float64))
        self.log_C = math.fsum(self.log_lam0)

    def sum_g(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        """(sum_k>=1 g_k^s, bound on the omitted terms) per prime."""
        total = np.sum(np.exp(s * self.logg), axis=1)
        q = np.exp(-self.params.rho * s * self.log_p)
        return total, np.exp(s * self.log_tail) / (1 - q)

    def g1(self, s: float) -> np.ndarray:
        return np.exp(s * self.logg[:, 0])


@dataclass(frozen=True)
class ProductValue:
    log_value: float  # log of the truncated product, remainder not included
    remainder: float  # estimated |log| of the neglected primes
    sign: float = 1.0
    decay: float = float("nan")  # fitted decay exponent of the log factors

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log_value)


def _product(logs: np.ndarray, log_p: np.ndarray, P_max: int, sign: float = 1.0) -> ProductValue:
    """Sum per-prime logs in prime order and estimate the tail.

    The tail fits |log factor| ~ c p^-a on primes in (P_max/10, P_max] and bounds
    the rest by c * sum_{n > P_max} n^-a.
    """
    total = math.fsum(logs)
    top = log_p > math.log(P_max / 10)
    y = np.abs(logs[top])
    ok = y > 0
    if ok.sum() < 3:
        return ProductValue(total, 0.0, sign)
    slope = np.polyfit(log_p[top][ok], np.log(y[ok]), 1)[0]
    a = -float(slope)
    c = float(np.max(y[ok] * np.exp(a * log_p[top][ok])))
    rem = c * P_max ** (1 - a) / (a - 1) if a > 1 else float("inf")
    return ProductValue(total, rem, sign, a)


def f_tilde_product(data: EulerData, s: float) -> ProductValue:
    """prod_p (1 - p^-ds) f_p(s)."""
    d = data.params.decay
    sg, _ = data.sum_g(s)
    logs = np.log1p(-np.exp(-d * s * data.log_p)) + s * data.log_lam0 + np.log1p(sg)
    return _product(logs, data.log_p, data.P_max)


def h_tilde_product(data: EulerData, s: float) -> ProductValue:
    """prod_p h_p(s) / (1 - p^-ds), with the sign of the factors tracked."""
    d = data.params.decay
    sg, _ = data.sum_g(s)
    inner = -sg if data.params.indefinite else sg
    sign = float(np.prod(np.sign(1 + inner)))
    logs = s * data.log_lam0 + np.log(np.abs(1 + inner)) - np.log1p(-np.exp(-d * s * data.log_p))
    return _product(logs, data.log_p, data.P_max, sign)


def f1_product(data: EulerData, s: float) -> ProductValue:
    """f(s) / zeta_P(d s) = C^s prod_p (1 - g_1^s)(1 + sum_k g_k^s)."""
    sg, _ = data.sum_g(s)
    g1 = data.g1(s)
    logs = s * data.log_lam0 + np.log1p(-g1) + np.log1p(sg)
    return _product(logs, data.log_p, data.P_max)


def h1_product(data: EulerData, s: float) -> ProductValue:
    """h(s) * zeta_P(d s) = C^s prod_p (1 - sum_k g_k^s) / (1 - g_1^s)."""
    sg, _ = data.sum_g(s)
    g1 = data.g1(s)
    sign = float(np.prod(np.sign(1 - sg)))
    logs = s * data.log_lam0 + np.log(np.abs(1 - sg)) - np.log1p(-g1)
    return _product(logs, data.log_p, data.P_max, sign)


def abscissa_s1(params: SpectralParams) -> float:
    """Left edge of the half-plane where f~ and h~ stay analytic."""
    d = params.decay
    if params.indefinite:
        return max(1 / (2 * d), (1 - params.delta) / d, 1 / (3 * params.rho - params.t))
    return 1 / (2 * d)


@dataclass(frozen=True)
class ZetaProfile:
    s: np.ndarray
    f_values: np.ndarray
    h_values: np.ndarray
    f_tilde_values: np.ndarray
    h_tilde_values: np.ndarray
    f_remainder: np.ndarray  # log-remainder estimates of the truncated products
    h_remainder: np.ndarray
    P_max: int

    def as_rows(self) -> list[dict]:
        return [
            {"s": float(s), "f": float(f), "h": float(h), "f_tilde": float(ft), "h_tilde": float(ht),
             "f_remainder": float(fr), "h_remainder": float(hr)}
            for s, f, h, ft, ht, fr, hr in zip(self.s, self.f_values, self.h_values, self.f_tilde_values,
                                               self.h_tilde_values, self.f_remainder, self.h_remainder)
        ]


def _table_for(params, P_max, table, threads):
    if table is None or table.P < P_max:
        table = LocalTable.build(params, P_max, threads=threads)
    return table


def spectral_zeta(params: SpectralParams, s_grid, P_max: int = 10**5, table: LocalTable | None = None,
                  threads: int | None = None) -> ZetaProfile:
    s = np.atleast_1d(np.asarray(s_grid, dtype=np.float64))
    d = params.decay
    lim = 1 / d + S_MARGIN
    if np.any(~(s >= lim - 1e-12)):
        raise RangeError(f"every s must be >= 1/d + {S_MARGIN} = {lim:g}; got min {s.min():g}")
    data = EulerData(_table_for(params, P_max, table, threads), P_max)
    ft, ht, fr, hr, f, h = [], [], [], [], [], []
    for x in s:
        z = riemann_zeta(d * x)
        a = f_tilde_product(data, x)
        ft.append(a.value)
        fr.append(a.remainder)
        f.append(z * a.value)
        if params.indefinite:
            b = h_tilde_product(data, x)
            ht.append(b.value)
            hr.append(b.remainder)
            h.append(b.value / z)
        else:
            h.append(z * a.value)
            ht.append(z * z * a.value)
            hr.append(a.remainder)
    arr = lambda v: np.array(v, dtype=np.float64)  # noqa: E731
    return ZetaProfile(s=s, f_values=arr(f), h_values=arr(h), f_tilde_values=arr(ft),
                       h_tilde_values=arr(ht), f_remainder=arr(fr), h_remainder=arr(hr), P_max=int(P_max))


def f_tilde(params: SpectralParams, s_grid, P_max: int = 10**5, table: LocalTable | None = None,
            threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """f~ on a grid reaching down to s1 + 0.05 (no zeta factor involved)."""
    s = np.atleast_1d(np.asarray(s_grid, dtype=np.float64))
    s1 = abscissa_s1(params)
    if np.any(~(s >= s1 + 0.05 - 1e-12)):
        raise RangeError(f"f~ is evaluated only for s >= s1 + 0.05 = {s1 + 0.05:g}")
    data = EulerData(_table_for(params, P_max, table, threads), P_max)
    vals = [f_tilde_product(data, x) for x in s]
    return np.array([v.value for v in vals]), np.array([v.remainder for v in vals])


# -- ledger side -------------------------------------------------------------


def ledger_f_tilde(ledger: EigenvalueLedger, s: float) -> float:
    """f~(s) from the ledger alone: sum_{m <= N} mu(m) m^-ds F(N/m), F the prefix sums of |lambda|^s.

    The Dirichlet convolution with mu(m) m^-ds removes the zeta(ds) pole, so
    the truncated sum converges much faster than sum |lambda_n|^s itself.
    """
    return _convolved(ledger, s, signed=False)


def ledger_h_tilde(ledger: EigenvalueLedger, s: float) -> float:
    """h~(s) = sum_{m <= N} m^-ds H(N/m), H the prefix sums of sign * |lambda|^s."""
    return _convolved(ledger, s, signed=True)


def _convolved(ledger: EigenvalueLedger, s: float, signed: bool) -> float:
    N = ledger.N
    d = ledger.decay
    v = ledger.values
    terms = np.abs(v) ** s
    if signed:
        terms = terms * np.sign(v)
    prefix = np.concatenate([[0.0], np.cumsum(terms)])
    m = np.arange(1, N + 1)
    coef = m.astype(np.float64) ** (-d * s)
    if not signed:
        coef = coef * Sieve(max(N, 2)).mobius_table()[1 : N + 1]
    return math.fsum(coef * prefix[N // m])


def ledger_f_direct(ledger: EigenvalueLedger, s: float, kappa: float) -> float:
    """sum_{|lambda| > lambda*} |lambda|^s plus the tail implied by lambda_n ~ kappa n^-d.

    Each branch counts about (kappa/lambda)^(1/d) eigenvalues above lambda, so
    the omitted part is (b/d) kappa^(1/d) lambda*^(s-1/d) / (s-1/d) with b
    branches.
    """
    d = ledger.decay
    lam = ledger.threshold
    if not s > 1 / d:
        raise RangeError(f"the direct ledger sum needs s > 1/d = {1 / d:g}")
    v = np.abs(ledger.values)
    head = math.fsum(v[v > lam] ** s)
    branches = 2 if ledger.params is None or ledger.params.indefinite else 1
    return head + branches / d * kappa ** (1 / d) * lam ** (s - 1 / d) / (s - 1 / d)


def ledger_h_direct(ledger: EigenvalueLedger, s: float) -> float:
    """sum_{|lambda| > lambda*} sign(lambda) |lambda|^s; the two branch tails cancel to leading order."""
    v = ledger.values
    keep = np.abs(v) > ledger.threshold
    return math.fsum(np.sign(v[keep]) * np.abs(v[keep]) ** s)


def ledger_f(ledger: EigenvalueLedger, s: float) -> float:
    return riemann_zeta(ledger.decay * s) * ledger_f_tilde(ledger, s)


def ledger_h(ledger: EigenvalueLedger, s: float) -> float:
    return ledger_h_tilde(ledger, s) / riemann_zeta(ledger.decay * s)


# -- kappa and fits ----------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float  # exp(intercept) of the free log-log fit
    residual: float  # rms of the log residuals
    n: np.ndarray
    scaled: np.ndarray  # lambda_n * n^decay along the fitted range
    kappa_end: float  # fitted line times n^decay at the largest n

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "prefactor": self.prefactor, "residual": self.residual,
                "kappa_end": self.kappa_end, "n_lo": int(self.n[0]), "n_hi": int(self.n[-1])}


def fit_power_law(ledger, branch: str = "plus", n_range=(100, 10**4), decay: float | None = None) -> PowerLawFit:
    """Least-squares fit of log lambda_n against log n over ranks n_range.

    ``ledger`` is an EigenvalueLedger (the branch is sorted by magnitude) or a
    plain descending sequence of magnitudes. Besides the free-slope intercept
    the result carries ``kappa_end``, the fitted line scaled by n^decay at the
    top of the range, which is the prefactor estimate closest to the n -> oo
    regime that the asymptotics describe.
    """
    lo, hi = int(n_range[0]), int(n_range[1])
    if isinstance(ledger, EigenvalueLedger):
        _, mags = ledger.branch(branch)
        decay = ledger.decay if decay is None else decay
        if hi > len(mags):
            raise RangeError(f"rank {hi} exceeds the {branch} branch length {len(mags)}")
        if mags[hi - 1] <= ledger.threshold:
            raise RangeError(f"rank {hi} of the {branch} branch is below the certified threshold")
    else:
        mags = np.abs(np.asarray(ledger, dtype=np.float64))
        if hi > len(mags):
            raise RangeError(f"rank {hi} exceeds the sequence length {len(mags)}")
    if lo < 1 or hi - lo + 1 < 50:
        raise FitError(f"need at least 50 points for a fit, got range [{lo}, {hi}]")
    n = np.arange(lo, hi + 1)
    y = mags[lo - 1 : hi]
    ln = np.log(n)
    ly = np.log(y)
    A = np.stack([ln, np.ones_like(ln)], axis=1)
    (b, a), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = float(np.sqrt(np.mean((ly - (a + b * ln)) ** 2)))
    if decay is None:
        decay = -float(b)
    scaled = y * n.astype(np.float64) ** decay
    kappa_end = math.exp(a + (b + decay) * math.log(hi))
    return PowerLawFit(exponent=float(b), prefactor=math.exp(a), residual=res, n=n,
                       scaled=scaled, kappa_end=kappa_end)


@dataclass(frozen=True)
class KappaEstimate:
    kappa_product: float
    f_tilde_at_abscissa: float
    remainder: float  # log-remainder of the truncated Euler product
    kappa_fit_plus: float = float("nan")
    kappa_fit_minus: float = float("nan")
    P_max: int = 0
    formula: str = ""

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("kappa_product", "f_tilde_at_abscissa", "remainder",
                                               "kappa_fit_plus", "kappa_fit_minus", "P_max", "formula")}


def kappa(params: SpectralParams, P_max: int = 10**5, k_max: int = 8, ledger: EigenvalueLedger | None = None,
          n_range=(100, 10**4), table: LocalTable | None = None, threads: int | None = None) -> KappaEstimate:
    """Prefactor of lambda_n ~ kappa n^-d from the Euler product for f~(1/d).

    Indefinite mode: kappa = (f~(1/d) / 2)^d, since both branches share the
    residue of f at s = 1/d. Legacy mode has a single branch: kappa = f~(1/d)^d.
    With a ledger, the end-anchored prefactors of both branches are attached.
    """
    d = params.decay
    if table is None or table.P < P_max:
        table = LocalTable.build(params, P_max, depth_for=max(2, 2**k_max), threads=threads)
    data = EulerData(table, P_max)
    ft = f_tilde_product(data, 1 / d)
    if ft.log_value < -700:
        warnings.warn("f~(1/d) underflows; kappa is not reliable", RuntimeWarning)
    if params.indefinite:
        kp = (ft.value / 2) ** d
        formula = "(f~(1/d)/2)^d"
    else:
        kp = ft.value**d
        formula = "f~(1/d)^d"
    kfp = kfm = float("nan")
    if ledger is not None:
        kfp = fit_power_law(ledger, "plus", n_range).kappa_end
        if params.indefinite:
            kfm = fit_power_law(ledger, "minus", n_range).kappa_end
    return KappaEstimate(kappa_product=kp, f_tilde_at_abscissa=ft.value, remainder=ft.remainder,
                         kappa_fit_plus=kfp, kappa_fit_minus=kfm, P_max=int(P_max), formula=formula)
