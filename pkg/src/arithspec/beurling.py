"""Beurling generalized primes attached to the local spectra.

Each prime p contributes the real number r_p = |lambda_1(E_p)/lambda_0(E_p)|^(-1/d),
d = rho - t, and r_p = p (1 + o(1)). Products of the r_p play the role of
integers.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .asymptotics import S_MARGIN, riemann_zeta
from .errors import CapacityError, ParameterError, RangeError
from .ledger import LocalTable
from .local import local_hs_closed_form, rank2_model
from .numtheory import SpectralParams

MAX_INTEGERS = 10**8
_COLLIDE = 1e-12


@dataclass(frozen=True)
class GammaRatios:
    params: SpectralParams
    p: np.ndarray  # underlying rational primes
    gamma1: np.ndarray  # lambda_1(E_p) / lambda_0(E_p), negative
    r: np.ndarray  # |gamma1|^(-1/d)

    @property
    def deviation(self) -> np.ndarray:
        """r_p / p - 1."""
        return self.r / self.p - 1


def spectral_beurling_primes(params: SpectralParams, P_max: int, table: LocalTable | None = None,
                             threads: int | None = None) -> GammaRatios:
    if not params.indefinite:
        raise ParameterError("the spectral prime system is defined for the indefinite regime")
    if table is None or table.P < P_max:
        table = LocalTable.build(params, P_max, threads=threads)
    keep = table.primes <= P_max
    ps = table.primes[keep]
    g1 = np.array([table.gamma(int(p), 1) for p in ps])
    d = params.rho - params.t
    r = np.exp(-np.log(np.abs(g1)) / d)
    return GammaRatios(params=params, p=ps.astype(np.float64), gamma1=g1, r=r)


def r_interval_from_model(p, params: SpectralParams) -> tuple[float, float]:
    """Range of r_p allowed by the rank-2 model roots and the displacement bound."""
    lp, lm = rank2_model(p, params)
    b = 2 * p ** (-params.rho) * math.sqrt(local_hs_closed_form(p, params))
    d = params.rho - params.t
    g_lo = (abs(lm) - b) / (lp + b)
    g_hi = (abs(lm) + b) / (lp - b)
    if g_lo <= 0:
        return 1.0, math.inf
    return g_hi ** (-1 / d), g_lo ** (-1 / d)


@dataclass(frozen=True)
class BeurlingSystem:
    primes: np.ndarray  # ascending, each > 1
    integers: np.ndarray  # ascending products <= X, starting at 1
    mobius: np.ndarray  # int8
    X: float
    source: str = "explicit"

    def __len__(self) -> int:
        return len(self.integers)


def generate_integers(primes, X: float, k_cap: int | None = None, source: str = "explicit") -> BeurlingSystem:
    """All products of the given primes up to X, in ascending order.

    A min-heap holds (value, index of the largest prime used, its exponent,
    mu). Popping a node pushes its multiples by primes of index >= that
    largest one, so every exponent vector is reached exactly once.
    """
    r = np.asarray(primes, dtype=np.float64)
    X = float(X)
    if not X >= 1:
        raise ParameterError(f"X must be >= 1, got {X}")
    if r.ndim != 1 or np.any(~(r > 1)):
        raise ParameterError("Beurling primes must all be > 1")
    if np.any(np.diff(r) < 0):
        raise ParameterError("Beurling primes must be ascending")
    if k_cap is None:
        k_cap = int(math.log(X) / math.log(r[0])) + 1 if len(r) and X > 1 else 0
    rl = r[r <= X].tolist()
    out_v: list[float] = []
    out_mu: list[int] = []
    heap = [(1.0, -1, 0, 1)]
    while heap:
        v, last, run, mu = heapq.heappop(heap)
        out_v.append(v)
        out_mu.append(mu)
        if len(out_v) > MAX_INTEGERS:
            raise CapacityError(f"more than {MAX_INTEGERS} generalized integers below X={X:g}")
        start = max(last, 0)
        for i in range(start, len(rl)):
            w = v * rl[i]
            if w > X:
                break
            if i == last:
                if run < k_cap:
                    heapq.heappush(heap, (w, i, run + 1, 0))
            else:
                heapq.heappush(heap, (w, i, 1, -mu))
    vals = np.array(out_v)
    mus = np.array(out_mu, dtype=np.int8)
    if len(vals) > 1:
        gap = np.diff(vals) / vals[1:]
        close = int(np.sum(gap <= _COLLIDE))
        if close:
            warnings.warn(f"{close} pairs of generalized integers agree to within {_COLLIDE:g} relative",
                          RuntimeWarning)
    vals.setflags(write=False)
    mus.setflags(write=False)
    return BeurlingSystem(primes=r, integers=vals, mobius=mus, X=X, source=source)


def spectral_system(params: SpectralParams, X: float, P_max: int | None = None,
                    table: LocalTable | None = None, threads: int | None = None) -> BeurlingSystem:
    """Generalized integers <= X from the spectral primes of every p <= P_max (default X)."""
    P = int(P_max or max(X, 100))
    g = spectral_beurling_primes(params, P, table=table, threads=threads)
    # all r_p beyond the table are > X when the largest computed one already is
    if g.r[-1] <= X and P < X:
        raise RangeError(f"spectral primes up to P={P} do not cover X={X:g}")
    order = np.argsort(g.r, kind="stable")
    return generate_integers(g.r[order], X, source="spectral")


def counting(system: BeurlingSystem, x_grid) -> tuple[np.ndarray, np.ndarray]:
    """N(x) = #{n_k <= x} and M(x) = sum_{n_k <= x} mu(n_k) on a grid."""
    x = np.asarray(x_grid, dtype=np.float64)
    if np.any(x > system.X) or np.any(~(x >= 0)):
        raise RangeError(f"grid must lie in [0, X={system.X:g}]")
    idx = np.searchsorted(system.integers, x, side="right")
    cum = np.concatenate([[0], np.cumsum(system.mobius, dtype=np.int64)])
    return idx.astype(np.int64), cum[idx]


def beurling_zeta(system, s: float) -> float:
    """zeta_P(s) = prod 1/(1 - r^-s).

    ``system`` may be a list of primes (finite product) or a GammaRatios, in
    which case primes past the table are replaced by rational primes:
    zeta_P(s) = zeta(s) prod_{p<=P} (1 - p^-s) / (1 - r_p^-s).
    """
    s = float(s)
    if isinstance(system, BeurlingSystem):
        system = system.primes
    if isinstance(system, GammaRatios):
        if not s >= 1 + S_MARGIN - 1e-12:
            raise RangeError(f"zeta_P diverges near s = 1; need s >= {1 + S_MARGIN:g}, got {s}")
        lp = np.log(system.p)
        lr = np.log(system.r)
        terms = np.log1p(-np.exp(-s * lp)) - np.log1p(-np.exp(-s * lr))
        return riemann_zeta(s) * math.exp(math.fsum(terms))
    r = np.asarray(system, dtype=np.float64)
    if not s > 0:
        raise RangeError(f"s must be > 0, got {s}")
    return math.exp(-math.fsum(np.log1p(-np.exp(-s * np.log(r)))))


def residue(g: GammaRatios) -> float:
    """c1 = prod (1 - 1/p)/(1 - 1/r_p), the limit of N(x)/x."""
    terms = np.log1p(-1 / g.p) - np.log1p(-1 / g.r)
    return math.exp(math.fsum(terms))
