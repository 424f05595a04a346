"""Global eigenvalues of E from local spectra.

The n-th eigenvalue is ``C * prod_{p^k || n} gamma_k(p)`` with
``gamma_k(p) = lambda_k(E_p) / lambda_0(E_p)`` and ``C = prod_p lambda_0(E_p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, CapacityError, NumericError, ParameterError, RangeError
from .linalg import SymMatrix, sym_eig
from .local import DEFAULT_EPS, LocalSpectrum, local_spectra
from .numtheory import SIEVE_MAX, Sieve, SpectralParams, entry_matrix, sieve_primes

# log lambda_0 may dip below zero by rounding only
_LOG_TOL = 1e-13


@dataclass(frozen=True)
class ProductConstant:
    C: float  # prod over p <= P_max
    remainder: float  # estimate of log(C_infinity / C)
    c_fit: float  # sup of (lambda_0 - 1) p^(rho-t) over the top decade of primes
    P_max: int
    n_primes: int

    @property
    def C_extrapolated(self) -> float:
        return self.C * math.exp(self.remainder)


class LocalTable:
    """Local spectra for every prime up to some bound, shared by global routines."""

    def __init__(self, params: SpectralParams, spectra: list[LocalSpectrum], P: int | None = None):
        self.params = params
        # the sieve bound, which covers primes up to P even if P itself is composite
        self.P = int(P) if P is not None else int(spectra[-1].p)
        self.primes = np.array([int(s.p) for s in spectra], dtype=np.int64)
        self.spectra = {int(s.p): s for s in spectra}
        self.lambda0 = np.array([s.enumeration[0] for s in spectra])

    @classmethod
    def build(cls, params: SpectralParams, P: int, depth_for: int | None = None,
              eps: float = DEFAULT_EPS, threads: int | None = None) -> "LocalTable":
        """Spectra for p <= P, deep enough to resolve every exponent in n <= depth_for."""
        primes = sieve_primes(max(int(P), 2)).primes
        top = depth_for or 1
        k = [max(1, int(math.log(top) / math.log(p) + 1e-9)) if top > 1 else 1 for p in primes]
        return cls(params, local_spectra(primes, params, eps=eps, k_max=k, threads=threads), P)

    def spectrum(self, p: int) -> LocalSpectrum:
        try:
            return self.spectra[int(p)]
        except KeyError:
            raise RangeError(f"no local spectrum for p={p}") from None

    def gamma(self, p: int, k: int) -> float:
        """lambda_k(E_p) / lambda_0(E_p), checked for convergence."""
        s = self.spectrum(p)
        if k >= s.K or not s.converged[k]:
            raise AccuracyError(
                f"local eigenvalue lambda_{k}(E_{p}) is not resolved (section size {s.K})",
                achieved=float(s.rel_err[k]) if k < s.K else None,
            )
        return float(s.enumeration[k] / s.enumeration[0])


def product_constant(params: SpectralParams, P_max: int = 10**5, eps: float = DEFAULT_EPS,
                     table: LocalTable | None = None, threads: int | None = None) -> ProductConstant:
    """``prod_{p <= P_max} lambda_0(E_p)`` with an estimate of the neglected tail.

    The tail uses ``|lambda_0 - 1| <= c p^-(rho-t)`` with c the largest value
    seen among primes in (P_max/10, P_max], summed over all integers > P_max.
    """
    P_max = int(P_max)
    if P_max < 100:
        raise ParameterError(f"P_max must be >= 100, got {P_max}")
    if table is None or table.P < P_max:
        table = LocalTable.build(params, P_max, eps=eps, threads=threads)
    keep = table.primes <= P_max
    primes = table.primes[keep]
    lam0 = table.lambda0[keep]
    logs = np.log(lam0)
    if np.any(logs < -_LOG_TOL):
        bad = int(primes[np.argmin(logs)])
        raise NumericError(f"local factor below 1 at p={bad}: partial products are not monotone")
    d = params.rho - params.t
    top = primes > P_max / 10
    c = float(np.max((lam0[top] - 1) * primes[top].astype(float) ** d))
    remainder = c * P_max ** (1 - d) / (d - 1)
    C = math.exp(math.fsum(logs))
    return ProductConstant(C=C, remainder=remainder, c_fit=c, P_max=P_max, n_primes=len(primes))


def eigenvalue_at(n: int, params: SpectralParams, ctx: "LocalTable | EigenvalueLedger",
                  C: float | None = None) -> float:
    """lambda_n(E) from the product formula, by trial division of n."""
    n = int(n)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if isinstance(ctx, EigenvalueLedger):
        return ctx.value(n)
    if C is None:
        C = product_constant(params, max(100, int(ctx.primes[-1])), table=ctx).C
    value = C
    m = n
    p = 2
    while p * p <= m:
        if m % p == 0:
            k = 0
            while m % p == 0:
                m //= p
                k += 1
            value *= ctx.gamma(p, k)
        p += 1
    if m > 1:
        value *= ctx.gamma(m, 1)
    return value


@dataclass(frozen=True)
class EigenvalueLedger:
    params: SpectralParams | None
    values: np.ndarray  # values[n-1] = lambda_n(E)
    threshold: float  # every eigenvalue with |lambda| > threshold is present
    tail_constant: float  # B with |lambda_n| <= B n^-decay
    product_constant: float
    product_remainder: float = 0.0
    omega: np.ndarray | None = None
    max_trunc_bound: float = 0.0
    max_rel_err: float = 0.0
    _order: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_values(cls, values, threshold: float = 0.0) -> "EigenvalueLedger":
        v = np.asarray(values, dtype=np.float64)
        return cls(params=None, values=v, threshold=threshold, tail_constant=float("nan"),
                   product_constant=float(v[0]) if len(v) else float("nan"))

    @property
    def N(self) -> int:
        return len(self.values)

    @property
    def decay(self) -> float:
        return self.params.decay if self.params is not None else float("nan")

    def value(self, n: int) -> float:
        if not 1 <= n <= self.N:
            raise RangeError(f"n={n} outside the ledger range [1, {self.N}]")
        return float(self.values[n - 1])

    def sorted_indices(self) -> np.ndarray:
        """n (1-based) ordered by |value| descending, ties to the smaller n."""
        if "all" not in self._order:
            self._order["all"] = np.lexsort((np.arange(self.N), -np.abs(self.values))) + 1
        return self._order["all"]

    def branch(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        """(n, |value|) for one sign branch, sorted by magnitude descending."""
        if which not in ("plus", "minus"):
            raise ParameterError(f"branch must be 'plus' or 'minus', got {which!r}")
        if which not in self._order:
            idx = self.sorted_indices()
            v = self.values[idx - 1]
            keep = v > 0 if which == "plus" else v < 0
            self._order[which] = (idx[keep], np.abs(v[keep]))
        return self._order[which]

    def tail_sum_bound(self) -> float:
        """Bound on sum_{n > N} |lambda_n| from |lambda_n| <= B n^-d."""
        d = self.decay
        if not d > 1:
            return float("inf")
        return self.tail_constant * self.N ** (1 - d) / (d - 1)


def _b_factor(s: LocalSpectrum, d: float) -> float:
    """max_k |gamma_k| p^(d k) over converged k.

    Past the last converged index the chain |lambda_(k+1)| <= p^-rho |lambda_k|
    makes |gamma_k| p^(d k) non-increasing (d <= rho), so the maximum over the
    computed indices covers the tail.
    """
    k = np.arange(s.depth)
    g = np.abs(s.enumeration[: s.depth] / s.enumeration[0])
    return float(np.max(g * np.exp(d * k * math.log(s.p))))


def enumerate_above(params: SpectralParams, lambda_star: float, P_max: int = 10**5,
                    eps: float = DEFAULT_EPS, threads: int | None = None) -> EigenvalueLedger:
    """All eigenvalues with |lambda| > lambda_star, indexed by n.

    B = C prod_p max(1, b_p) bounds |lambda_n| n^d, so every n beyond
    N_enum = ceil((B/lambda_star)^(1/d)) is below the threshold. Primes past
    the computed range are taken to have b_p <= 1, as the local asymptotics
    give b_p -> 1 - 1/p from below; the largest b_p seen is recorded.
    """
    lambda_star = float(lambda_star)
    if not lambda_star > 0:
        raise ParameterError(f"lambda_star must be > 0, got {lambda_star}")
    d = params.decay
    # B >= C >= 1, so this lower bound on N_enum can fail fast
    if (1 / lambda_star) ** (1 / d) > SIEVE_MAX:
        raise CapacityError(f"enumeration needs N > {SIEVE_MAX}; use a larger lambda_star")
    base = LocalTable.build(params, max(P_max, 100), depth_for=None, eps=eps, threads=threads)
    pc = product_constant(params, P_max, table=base)
    C = pc.C
    # first pass bounds B from shallow spectra; deeper spectra only lower b_p
    bs = np.array([_b_factor(base.spectra[int(p)], d) for p in base.primes])
    B = C * float(np.prod(np.maximum(1.0, bs)))
    N = math.ceil((B / lambda_star) ** (1 / d))
    if N > SIEVE_MAX:
        raise CapacityError(
            f"enumeration needs N={N} > {SIEVE_MAX}; use a larger lambda_star"
        )
    table = LocalTable.build(params, max(N, 2), depth_for=N, eps=eps, threads=threads)
    vals = np.full(N + 1, C)
    vals[0] = 0.0
    max_tb = 0.0
    max_rel = 0.0
    for p in table.primes:
        p = int(p)
        if p > N:
            break
        s = table.spectra[p]
        pk, k, prev = p, 1, 1.0
        while pk <= N:
            g = table.gamma(p, k)
            # multiples of p^k pick up gamma_k / gamma_(k-1) on top of earlier levels
            vals[pk::pk] *= g / prev
            max_tb = max(max_tb, s.trunc_bound)
            max_rel = max(max_rel, float(s.rel_err[k]))
            prev = g
            pk *= p
            k += 1
    sv = Sieve(max(N, 2))
    om = sv.omega_table()[1 : N + 1].copy()
    values = vals[1:]
    values.setflags(write=False)
    om.setflags(write=False)
    return EigenvalueLedger(params=params, values=values, threshold=lambda_star, tail_constant=B,
                            product_constant=C, product_remainder=pc.remainder, omega=om,
                            max_trunc_bound=max_tb, max_rel_err=max_rel)


@dataclass(frozen=True)
class PowerFit:
    slope: float
    prefactor: float
    residual: float  # rms of log residuals
    points: int


def _loglog_fit(x, y) -> PowerFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return PowerFit(float("nan"), float("nan"), float("nan"), int(keep.sum()))
    lx, ly = np.log(x[keep]), np.log(y[keep])
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (b, a), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = float(np.sqrt(np.mean((ly - (a + b * lx)) ** 2)))
    return PowerFit(float(b), math.exp(a), res, int(keep.sum()))


@dataclass(frozen=True)
class CountingCurve:
    x: np.ndarray
    mu_plus: np.ndarray
    mu_minus: np.ndarray
    fit_plus: PowerFit
    fit_minus: PowerFit


def counting(ledger: EigenvalueLedger, x_grid) -> CountingCurve:
    """mu_plus(x) = #{n : lambda_n > 1/x}, mu_minus(x) = #{n : -lambda_n > 1/x}."""
    x = np.asarray(x_grid, dtype=np.float64)
    if x.ndim != 1 or len(x) == 0 or np.any(~(x > 0)):
        raise ParameterError("x_grid must be a non-empty sequence of positive reals")
    # counts are exact only while 1/x stays above the completeness threshold
    if ledger.threshold > 0 and np.max(x) > 1 / ledger.threshold:
        raise RangeError(
            f"x up to {np.max(x):g} exceeds the certified range 1/threshold = {1 / ledger.threshold:g}"
        )
    pos = np.sort(ledger.values[ledger.values > 0])
    neg = np.sort(-ledger.values[ledger.values < 0])
    cut = 1 / x
    mu_p = len(pos) - np.searchsorted(pos, cut, side="right")
    mu_m = len(neg) - np.searchsorted(neg, cut, side="right")
    return CountingCurve(x=x, mu_plus=mu_p, mu_minus=mu_m,
                         fit_plus=_loglog_fit(x, mu_p), fit_minus=_loglog_fit(x, mu_m))


def truncated_global(N: int, params: SpectralParams) -> SymMatrix:
    N = int(N)
    if not 1 <= N <= 4096:
        raise CapacityError(f"dense sections are limited to 1 <= N <= 4096, got {N}")
    return SymMatrix(entry_matrix(N, params))


@dataclass(frozen=True)
class CrossValidation:
    N: int
    m: int
    ledger_n: np.ndarray
    ledger_values: np.ndarray
    section_values: np.ndarray
    rel_dev: np.ndarray
    sign_match: np.ndarray

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "m": self.m,
            "ledger_n": [int(x) for x in self.ledger_n],
            "ledger_values": [float(x) for x in self.ledger_values],
            "section_values": [float(x) for x in self.section_values],
            "rel_dev": [float(x) for x in self.rel_dev],
            "sign_match": [bool(x) for x in self.sign_match],
        }


def cross_validate(params: SpectralParams, N: int, m: int = 10,
                   ledger: EigenvalueLedger | None = None) -> CrossValidation:
    """Compare the m largest-|lambda| ledger values with the N-section's extreme eigenvalues."""
    if not 128 <= N <= 4096:
        raise ParameterError(f"cross-validation needs 128 <= N <= 4096, got {N}")
    if not 1 <= m <= 20:
        raise ParameterError(f"m must lie in [1, 20], got {m}")
    if ledger is None:
        ledger = enumerate_above(params, 1e-4)
    idx = ledger.sorted_indices()[:m]
    lv = ledger.values[idx - 1]
    w = sym_eig(truncated_global(N, params)).values
    sw = w[np.lexsort((np.arange(len(w)), -np.abs(w)))][:m]
    rel = np.abs(sw - lv) / np.abs(lv)
    return CrossValidation(N=N, m=m, ledger_n=idx, ledger_values=lv, section_values=sw,
                           rel_dev=rel, sign_match=np.sign(sw) == np.sign(lv))
