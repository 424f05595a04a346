"""Per-prime matrices E_p and their spectra.

E_p is indexed by prime-power exponents j, k >= 0 with entries
``p^(-(rho+t)(j+k)/2 + t*max(j,k))``. Its eigenvalues decay geometrically
(roughly like ``p^(-rho k)``), so a dense eigensolver only resolves the first
few of them to relative accuracy. Instead we write the section as

    E_K = G Delta G^T,   G = diag(p^(-(rho-t) i/2)) L,   Delta_i = c_i - c_(i-1),

with L the all-ones lower triangle and c_i = p^(-t i). G^-1 is bidiagonal, so
inertia(E_K - lam) equals the inertia of the tridiagonal ``Delta - lam W``,
W = G^-1 G^-T, whose entries are explicit products of powers of p. Rows are
rescaled so every LDL^T pivot is O(1); bisection on the resulting count gives
each eigenvalue to a few ulps relative, however small it is.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, ParameterError
from .linalg import SymMatrix
from .numtheory import SpectralParams

K_CAP = 256
# keeps the pencil entries and the bisection brackets clear of under/overflow
_LOG_FLOOR = 290 * math.log(10)
_BISECT_STEPS = 64
DEFAULT_EPS = 1e-12
DEFAULT_REL_TOL = 1e-10


def _check_p(p) -> float:
    p = float(p)
    if not (math.isfinite(p) and p > 1.0):
        raise ParameterError(f"local base p must be a real number > 1, got {p}")
    return p


def _geom(x: float, n: int) -> float:
    """sum_{j<n} x^j, also for x >= 1."""
    if x == 1.0:
        return float(n)
    return -math.expm1(n * math.log(x)) / -math.expm1(math.log(x))


def build_local_matrix(p, params: SpectralParams, K: int) -> tuple[SymMatrix, float]:
    p = _check_p(p)
    if K < 2:
        raise ParameterError(f"section size K must be >= 2, got {K}")
    j = np.arange(K, dtype=np.float64)
    # entry (j, k) = p^(-rho min(j,k)) * p^(-(rho-t)|j-k|/2); integer powers of two
    # fixed bases keep the p^-rho scaling between diagonal blocks within a few ulp
    a = p ** (-params.rho)
    b = p ** (-(params.rho - params.t) / 2)
    e = np.power(a, np.minimum.outer(j, j)) * np.power(b, np.abs(np.subtract.outer(j, j)))
    return SymMatrix(e), truncation_bound(p, params, K)


def truncation_bound(p, params: SpectralParams, K: int) -> float:
    """Frobenius norm of E_p with its leading K x K block zeroed."""
    p = _check_p(p)
    lp = math.log(p)
    rho, t = params.rho, params.t
    q = math.exp(-(rho - t) * lp)
    r = math.exp(-(rho + t) * lp)
    diag_tail = math.exp(-2 * rho * K * lp) / -math.expm1(-2 * rho * lp)
    s2 = diag_tail * (1 + 2 * q / (1 - q)) + 2 * math.exp(K * math.log(q)) / (1 - q) * _geom(r, K)
    return math.sqrt(s2)


def local_trace_closed_form(p, params: SpectralParams) -> float:
    p = _check_p(p)
    return 1.0 / -math.expm1(-params.rho * math.log(p))


def local_hs_closed_form(p, params: SpectralParams) -> float:
    """Squared Hilbert-Schmidt norm of E_p: sum of all squared entries."""
    p = _check_p(p)
    lp = math.log(p)
    q = math.exp(-(params.rho - params.t) * lp)
    return (1 + 2 * q / (1 - q)) / -math.expm1(-2 * params.rho * lp)


@dataclass(frozen=True)
class PsiVector:
    p: float
    params: SpectralParams
    coords: np.ndarray

    @property
    def norm_sq(self) -> float:
        return float(np.sum(self.coords**2))

    @property
    def norm_sq_closed(self) -> float:
        return 1.0 / -math.expm1(-(self.params.rho - self.params.t) * math.log(self.p))

    @property
    def tail_bound(self) -> float:
        """Exact squared norm of the coordinates dropped at K."""
        q = math.exp(-(self.params.rho - self.params.t) * math.log(self.p))
        return q ** len(self.coords) / (1 - q)


def psi_vector(p, params: SpectralParams, K: int) -> PsiVector:
    p = _check_p(p)
    k = np.arange(K, dtype=np.float64)
    return PsiVector(p, params, np.power(p, -(params.rho - params.t) * k / 2))


def rank2_model(p, params: SpectralParams) -> tuple[float, float]:
    """Roots of lam^2 - lam - x = 0 with x = p^-(rho-t) * |psi|^2 = q/(1-q)."""
    if not params.indefinite:
        raise ParameterError("the rank-2 model is defined for the indefinite regime only")
    p = _check_p(p)
    q = math.exp(-(params.rho - params.t) * math.log(p))
    x = q / (1 - q)
    root = math.sqrt(1 + 4 * x)
    # second root via Vieta avoids cancellation for large p
    return (1 + root) / 2, -2 * x / (1 + root)


def verify_factorization(p, params: SpectralParams, K: int) -> float:
    """max |E_p - (-(p^t - 1) T*T + p^t psi psi*)| on the K x K section."""
    p = _check_p(p)
    if K < 2:
        raise ParameterError(f"K must be >= 2, got {K}")
    j = np.arange(K, dtype=np.float64)
    t, rho = params.t, params.rho
    T = np.power(p, -t * j[:, None] / 2 - (rho - t) * j[None, :] / 2)
    T = np.triu(T)
    psi = psi_vector(p, params, K).coords
    pt = p**t
    # einsum avoids BLAS so the deviation is reproducible bit for bit
    model = -(pt - 1) * np.einsum("ij,ik->jk", T, T) + pt * np.multiply.outer(psi, psi)
    E, _ = build_local_matrix(p, params, K)
    return float(np.max(np.abs(E.entries - model)))


def verify_self_similarity(p, params: SpectralParams, K: int) -> float:
    """Relative deviation between E_p minus row/column 0 and p^-rho * E_p."""
    p = _check_p(p)
    if K < 3:
        raise ParameterError(f"K must be >= 3, got {K}")
    E = build_local_matrix(p, params, K)[0].entries
    sub = E[1:, 1:]
    scaled = p ** (-params.rho) * E[:-1, :-1]
    return float(np.max(np.abs(sub - scaled)) / np.max(np.abs(sub)))


# -- batched eigenvalue solver ---------------------------------------------


def _section_data(p: float, params: SpectralParams, K: int):
    """Pencil data for the K-section: Delta (diagonal) and e_i = p^((rho-t) i).

    E_K = G Delta G^T with G = diag(p^(-(rho-t) i/2)) times the all-ones lower
    triangle, so inertia(E_K - lam) = inertia(Delta - lam W) where
    W = G^-1 G^-T is tridiagonal: W_ii = e_i + e_(i-1), W_(i,i-1) = -e_(i-1).
    """
    lp = math.log(p)
    i = np.arange(K, dtype=np.float64)
    delta = np.exp(-params.t * lp * (i - 1)) * math.expm1(-params.t * lp)
    delta[0] = 1.0
    e = np.exp((params.rho - params.t) * lp * i)
    return delta, e


def _count_above(lam, delta, e):
    """Number of eigenvalues of the section greater than lam (elementwise).

    Shapes: lam (B, T); delta, e (B, K). Each row of Delta - lam W is scaled
    by max(|Delta_i|, |lam| e_i) so the LDL^T pivots stay O(1).
    """
    K = delta.shape[1]
    alam = np.abs(lam)
    neg = np.zeros(lam.shape, dtype=np.int64)
    q = None
    prev_m = None
    for i in range(K):
        di = delta[:, i : i + 1]
        ei = e[:, i : i + 1]
        m = np.maximum(np.abs(di), alam * ei)
        if q is None:
            q = di / m - (lam / m) * ei
        else:
            ep = e[:, i - 1 : i]
            diag = di / m - (lam / m) * ei - (lam / m) * ep
            off = (lam / np.sqrt(m)) * (ep / np.sqrt(prev_m))
            q = diag - off * off / q
        q = np.where(q == 0.0, -1e-300, q)
        neg += q < 0
        prev_m = m
    return K - neg


def _solve_batch(ps, params: SpectralParams, K: int) -> np.ndarray:
    """All K eigenvalues of the K-sections for a batch of bases.

    Returns (B, K) in enumeration order: indefinite mode puts the positive
    eigenvalue first followed by negatives of decreasing magnitude; legacy mode
    is simply descending.
    """
    data = [_section_data(p, params, K) for p in ps]
    delta = np.stack([x[0] for x in data])
    e = np.stack([x[1] for x in data])
    n_pos = 1 if params.indefinite else K

    # |lam| >= min|Delta| / (4 max e) from ||G^-1|| <= 2 sqrt(max e); |lam| <= ||E||_F
    lo0 = 0.25 * np.min(np.abs(delta), axis=1) / np.max(e, axis=1)
    hi0 = 2.0 * np.array([math.sqrt(local_hs_closed_form(p, params)) for p in ps])

    idx = np.arange(K)
    # target i: positive ones count eigenvalues above +mu, negative ones below -mu
    is_pos = (idx < n_pos)[None, :]
    rank = np.where(idx < n_pos, idx, idx - n_pos)[None, :]
    sign = np.where(idx < n_pos, 1.0, -1.0)[None, :]
    lo = np.repeat(lo0[:, None], K, axis=1)
    hi = np.repeat(hi0[:, None], K, axis=1)
    for _ in range(_BISECT_STEPS):
        mid = np.sqrt(lo) * np.sqrt(hi)
        c = _count_above(sign * mid, delta, e)
        hit = np.where(is_pos, c >= rank + 1, K - c >= rank + 1)
        lo = np.where(hit, mid, lo)
        hi = np.where(hit, hi, mid)
    return sign * np.sqrt(lo) * np.sqrt(hi)


@dataclass(frozen=True)
class LocalSpectrum:
    p: float
    params: SpectralParams
    K: int
    enumeration: np.ndarray  # lambda_k(E_p), k = 0..K-1
    trunc_bound: float
    rel_err: np.ndarray  # change against the (K-4)-section, relative
    rel_tol: float = DEFAULT_REL_TOL
    resolved: np.ndarray = field(init=False)  # |lambda| > trunc_bound (Weyl)
    converged: np.ndarray = field(init=False)  # rel_err <= rel_tol

    def __post_init__(self):
        res = np.abs(self.enumeration) > self.trunc_bound
        object.__setattr__(self, "resolved", res)
        object.__setattr__(self, "converged", self.rel_err <= self.rel_tol)
        for arr in (self.enumeration, self.rel_err, self.resolved, self.converged):
            arr.setflags(write=False)

    @property
    def lambda_plus(self) -> float:
        return float(self.enumeration[0])

    @property
    def lambda_minus(self) -> np.ndarray:
        """Magnitudes of the negative eigenvalues, largest first (indefinite mode)."""
        if not self.params.indefinite:
            return np.empty(0)
        return -self.enumeration[1:]

    @property
    def depth(self) -> int:
        """Number of leading enumeration entries that are converged."""
        bad = np.flatnonzero(~self.converged)
        return int(bad[0]) if len(bad) else self.K

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "params": self.params.as_dict(),
            "K": self.K,
            "lambda_plus": self.lambda_plus,
            "lambda_minus": [float(x) for x in self.lambda_minus],
            "enumeration": [float(x) for x in self.enumeration],
            "trunc_bound": self.trunc_bound,
            "rel_err": [float(x) for x in self.rel_err],
            "resolved": [bool(x) for x in self.resolved],
            "converged": [bool(x) for x in self.converged],
        }


def choose_K(p, params: SpectralParams, eps: float, k_max: int, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Section size for base p.

    Starts from ``max(k_max + 8, ceil(ln(1/eps)/(d ln p)) + 4)`` and grows
    until the exact truncation bound is below ``eps`` and the leading
    ``k_max + 1`` eigenvalues should be stable to ``rel_tol``. Raises
    AccuracyError if ``eps`` cannot be met below the cap.
    """
    p = _check_p(p)
    lp = math.log(p)
    cap = min(K_CAP, 1 + int(_LOG_FLOOR / ((params.rho - params.t + abs(params.t)) * lp)))
    K = max(k_max + 8, math.ceil(math.log(1 / eps) / (params.decay * lp)) + 4)
    # eigenvector components leak across the truncation at about this rate per index
    leak = abs(params.t) * lp - 2 * math.log1p(math.exp(abs(params.t) * lp))
    if leak < 0:
        K = max(K, k_max + 5 + math.ceil(math.log(rel_tol) / leak))
    K = max(K, 6)
    while K <= cap and truncation_bound(p, params, K) > eps:
        K += 1
    if K > cap:
        achieved = truncation_bound(p, params, cap)
        if achieved > eps:
            raise AccuracyError(
                f"p={p}: truncation bound {achieved:.3e} > eps={eps:g} at the size cap K={cap}",
                achieved=achieved,
            )
        K = cap
    return K


def _validate(eps, k_max):
    if not (1e-14 <= eps <= 1e-6):
        raise ParameterError(f"eps must lie in [1e-14, 1e-6], got {eps}")
    if k_max < 1:
        raise ParameterError(f"k_max must be >= 1, got {k_max}")


def _spectra_same_K(ps, params, K, eps, rel_tol):
    full = _solve_batch(ps, params, K)
    short = _solve_batch(ps, params, K - 4)
    out = []
    for i, p in enumerate(ps):
        rel = np.full(K, np.inf)
        rel[: K - 4] = np.abs(full[i, : K - 4] - short[i]) / np.abs(full[i, : K - 4])
        out.append(LocalSpectrum(p=float(p), params=params, K=K, enumeration=full[i].copy(),
                                 trunc_bound=truncation_bound(p, params, K), rel_err=rel,
                                 rel_tol=rel_tol))
    return out


def local_spectrum(p, params: SpectralParams, eps: float = DEFAULT_EPS, k_max: int = 8,
                   rel_tol: float = DEFAULT_REL_TOL) -> LocalSpectrum:
    _validate(eps, k_max)
    K = choose_K(p, params, eps, k_max, rel_tol)
    return _spectra_same_K([_check_p(p)], params, K, eps, rel_tol)[0]


def default_threads() -> int:
    env = os.environ.get("ARITHSPEC_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ParameterError(f"ARITHSPEC_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise ParameterError(f"ARITHSPEC_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


_CHUNK = 512


def local_spectra(ps, params: SpectralParams, eps: float = DEFAULT_EPS, k_max=8,
                  rel_tol: float = DEFAULT_REL_TOL, threads: int | None = None) -> list[LocalSpectrum]:
    """Spectra for many bases at once.

    ``k_max`` may be a single int or one value per base. Bases sharing a
    section size are solved together in fixed chunks, so the result does not
    depend on the thread count.
    """
    ps = [_check_p(p) for p in ps]
    kms = [int(k_max)] * len(ps) if np.ndim(k_max) == 0 else [int(k) for k in k_max]
    if len(kms) != len(ps):
        raise ParameterError("k_max must be a scalar or match the number of bases")
    for k in set(kms) or {1}:
        _validate(eps, k)
    Ks = [choose_K(p, params, eps, k, rel_tol) for p, k in zip(ps, kms)]
    groups: dict[int, list[int]] = {}
    for i, K in enumerate(Ks):
        groups.setdefault(K, []).append(i)
    jobs = []
    for K in sorted(groups):
        members = groups[K]
        for s in range(0, len(members), _CHUNK):
            jobs.append((K, members[s : s + _CHUNK]))

    def work(job):
        K, members = job
        return members, _spectra_same_K([ps[i] for i in members], params, K, eps, rel_tol)

    threads = threads or default_threads()
    out: list[LocalSpectrum | None] = [None] * len(ps)
    if threads == 1 or len(jobs) == 1:
        results = map(work, jobs)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = list(pool.map(work, jobs))
        pool.shutdown()
    for members, specs in results:
        for i, s in zip(members, specs):
            out[i] = s
    return out  # type: ignore[return-value]
