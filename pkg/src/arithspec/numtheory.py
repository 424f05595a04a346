"""Integer-side primitives: sieve, factorization, matrix entries, parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import CapacityError, ParameterError, RangeError

SIEVE_MAX = 10**8
# widest native integer; lcm values beyond it are rejected
INT_MAX = 2**63 - 1

INDEFINITE = "indefinite"
LEGACY = "legacy-definite"


@dataclass(frozen=True)
class SpectralParams:
    """Exponent pair of the matrix ``[n,m]^t / (nm)^((rho+t)/2)``.

    ``t > 0`` selects the sign-indefinite regime (requires ``rho > t + 1``);
    ``t < 0`` is the positive definite legacy regime, usually written with
    ``sigma`` and ``tau = -t`` (see :meth:`from_sigma_tau`).
    """

    t: float
    rho: float
    mode: str = field(default="")

    def __post_init__(self):
        t, rho = float(self.t), float(self.rho)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "rho", rho)
        if not (math.isfinite(t) and math.isfinite(rho)):
            raise ParameterError("t and rho must be finite")
        mode = self.mode or (INDEFINITE if t > 0 else LEGACY)
        object.__setattr__(self, "mode", mode)
        if mode == INDEFINITE:
            if not t > 0:
                raise ParameterError(f"indefinite mode needs t > 0 (tau < 0), got t={t}")
            if not rho > t + 1:
                raise ParameterError(
                    f"indefinite mode needs rho > t + 1 (tau - sigma > 1/2), got rho={rho}, t={t}"
                )
        elif mode == LEGACY:
            tau, sigma = -t, -(rho + t) / 2
            if not tau > 0:
                raise ParameterError(f"legacy-definite mode needs tau > 0 (t < 0), got tau={tau}")
            if not rho > 0:
                raise ParameterError(f"legacy-definite mode needs rho = tau - 2 sigma > 0, got rho={rho}")
            if not tau - sigma > 0.5:
                raise ParameterError(
                    f"legacy-definite mode needs tau - sigma > 1/2, got {tau - sigma}"
                )
        else:
            raise ParameterError(f"unknown mode {mode!r}")

    @classmethod
    def from_sigma_tau(cls, sigma: float, tau: float) -> "SpectralParams":
        return cls(t=-float(tau), rho=float(tau) - 2 * float(sigma))

    @property
    def sigma(self) -> float:
        return -(self.rho + self.t) / 2 + 0.0

    @property
    def tau(self) -> float:
        return -self.t + 0.0

    @property
    def delta(self) -> float:
        return min(self.rho - self.t, self.t)

    @property
    def indefinite(self) -> bool:
        return self.mode == INDEFINITE

    @property
    def decay(self) -> float:
        """Power-law exponent of the global eigenvalues: rho - t, or rho in legacy mode."""
        return self.rho - self.t if self.indefinite else self.rho

    def as_dict(self) -> dict:
        return {"t": self.t, "rho": self.rho, "sigma": self.sigma, "tau": self.tau,
                "delta": self.delta, "mode": self.mode}


@dataclass(frozen=True)
class FactoredInteger:
    n: int
    factors: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prod = 1
        last = 1
        for p, k in self.factors:
            if p <= last or k < 1:
                raise ValueError(f"non-canonical factorization {self.factors}")
            last = p
            prod *= p**k
        if prod != self.n:
            raise ValueError(f"factors {self.factors} do not multiply to {self.n}")

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.factors)

    def as_dict(self) -> dict[int, int]:
        return dict(self.factors)


class Sieve:
    """Primes up to ``limit`` together with a smallest-prime-factor table."""

    def __init__(self, limit: int):
        limit = int(limit)
        if limit < 2 or limit > SIEVE_MAX:
            raise ParameterError(f"sieve limit must lie in [2, {SIEVE_MAX}], got {limit}")
        self.limit = limit
        spf = np.zeros(limit + 1, dtype=np.int32 if limit < 2**31 else np.int64)
        for p in range(2, math.isqrt(limit) + 1):
            if spf[p] == 0:
                block = spf[p * p :: p]
                block[block == 0] = p
        idx = np.arange(limit + 1, dtype=spf.dtype)
        unset = spf == 0
        spf[unset] = idx[unset]
        spf[:2] = 0
        self.spf = spf
        self.primes = np.flatnonzero((spf == idx) & (idx >= 2)).astype(np.int64)

    def __len__(self) -> int:
        return len(self.primes)

    def factorize(self, n: int) -> FactoredInteger:
        return factorize(n, self.spf)

    def omega_table(self) -> np.ndarray:
        """Number of distinct prime factors of every n <= limit."""
        om = np.zeros(self.limit + 1, dtype=np.int16)
        for p in self.primes:
            om[p::p] += 1
        return om

    def mobius_table(self) -> np.ndarray:
        mu = np.ones(self.limit + 1, dtype=np.int8)
        mu[0] = 0
        for p in self.primes:
            mu[p::p] *= -1
            if p * p <= self.limit:
                mu[p * p :: p * p] = 0
        return mu


def sieve_primes(limit: int) -> Sieve:
    return Sieve(limit)


def factorize(n: int, spf: np.ndarray) -> FactoredInteger:
    n = int(n)
    if n < 1:
        raise ParameterError(f"factorize needs n >= 1, got {n}")
    if n >= len(spf):
        raise ParameterError(f"{n} exceeds the smallest-prime-factor table (limit {len(spf) - 1})")
    out = []
    m = n
    while m > 1:
        p = int(spf[m])
        k = 0
        while m % p == 0:
            m //= p
            k += 1
        out.append((p, k))
    return FactoredInteger(n, tuple(out))


def omega(n: FactoredInteger) -> int:
    return len(n.factors)


def lcm(n: int, m: int) -> int:
    g = math.gcd(n, m)
    value = n // g * m
    if value > INT_MAX:
        raise RangeError(f"lcm({n}, {m}) exceeds the native integer range")
    return value


def entry(n: int, m: int, params: SpectralParams) -> float:
    """Matrix entry ``[n,m]^t (nm)^(-(rho+t)/2)`` with the lcm taken exactly."""
    n, m = int(n), int(m)
    if n < 1 or m < 1:
        raise ParameterError("matrix indices start at 1")
    ell = float(lcm(n, m))
    if params.indefinite:
        return ell**params.t * float(n * m) ** (-(params.rho + params.t) / 2)
    s = params.sigma
    return float(n) ** s * float(m) ** s * ell ** (-params.tau)


def entry_matrix(N: int, params: SpectralParams) -> np.ndarray:
    """All entries with 1 <= n, m <= N (vectorized ``entry``)."""
    idx = np.arange(1, N + 1, dtype=np.int64)
    if N * N > INT_MAX:
        raise CapacityError(f"section size {N} too large for exact lcm")
    ell = np.lcm.outer(idx, idx).astype(np.float64)
    f = idx.astype(np.float64)
    if params.indefinite:
        return ell**params.t * np.multiply.outer(f, f) ** (-(params.rho + params.t) / 2)
    s = params.sigma
    w = f**s
    return np.multiply.outer(w, w) * ell ** (-params.tau)
