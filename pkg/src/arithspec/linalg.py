"""Dense symmetric matrices and a deterministic Jacobi eigensolver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError, ParameterError

_EPS = np.finfo(np.float64).eps


class SymMatrix:
    """Square, exactly symmetric, finite real matrix."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = np.array(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InputError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InputError("matrix has non-finite entries")
        if not np.array_equal(a, a.T):
            raise InputError("matrix is not exactly symmetric")
        a.setflags(write=False)
        self.entries = a

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return f"SymMatrix(dim={self.dim})"


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns aligned with values
    residual: float  # max_k ||A v_k - lambda_k v_k||_2
    sweeps: int


def hs_norm(A) -> float:
    a = np.asarray(A, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a)))


def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of a round-robin tournament on ``m`` (even) players."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p = np.array(players[: m // 2])
        q = np.array(players[m // 2 :][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


# above this size the Jacobi sweeps get slow; "auto" hands over to LAPACK
JACOBI_MAX_DIM = 256


def sym_eig(A, tol: float = 1e-11, max_sweeps: int = 64, method: str = "auto") -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix by two-sided Jacobi rotations.

    Sweeps use a fixed round-robin ordering: each step annihilates ``dim/2``
    disjoint off-diagonal pairs at once, so a sweep visits every pair exactly
    once. A pair is skipped when ``|a_pq| <= eps * sqrt(|a_pp a_qq|)``, which
    keeps graded matrices accurate relative to their diagonal.

    Output is deterministic: values descending (ties by diagonal position),
    each eigenvector's largest-magnitude component made positive.

    ``method`` is "jacobi", "lapack" (``numpy.linalg.eigh``) or "auto", which
    uses Jacobi up to ``JACOBI_MAX_DIM``. Both paths share ordering, sign
    convention and the residual check.
    """
    if not (1e-14 <= tol <= 1e-6):
        raise ParameterError(f"tol must lie in [1e-14, 1e-6], got {tol}")
    a0 = np.asarray(A.entries if isinstance(A, SymMatrix) else SymMatrix(A).entries)
    n = a0.shape[0]
    if method not in ("auto", "jacobi", "lapack"):
        raise ParameterError(f"unknown eigensolver method {method!r}")
    if method == "lapack" or (method == "auto" and n > JACOBI_MAX_DIM):
        w, v = np.linalg.eigh(a0)
        return _finish(a0, w, v.copy(), 0, tol, hs_norm(a0))
    a = a0.copy()
    vt = np.eye(n)  # eigenvectors stored as rows
    norm = hs_norm(a0)
    if n == 1 or norm == 0.0:
        return _finish(a0, np.diag(a).copy(), vt.T, 0, tol, norm)

    m = n + (n % 2)
    rounds = [(p, q) for p, q in _round_robin(m)]
    if m != n:
        rounds = [(p[q < n], q[q < n]) for p, q in rounds]
    floor = norm * _EPS * 1e-3

    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        rotated = False
        for p, q in rounds:
            apq = a[p, q]
            app = a[p, p]
            aqq = a[q, q]
            active = (np.abs(apq) > _EPS * np.sqrt(np.abs(app * aqq))) & (np.abs(apq) > floor)
            if not active.any():
                continue
            rotated = True
            p, q = p[active], q[active]
            apq, app, aqq = apq[active], app[active], aqq[active]
            theta = (aqq - app) / (2.0 * apq)
            tt = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            tt[theta == 0] = 1.0
            c = 1.0 / np.sqrt(tt * tt + 1.0)
            s = tt * c
            # A <- P^T A P as two contiguous row rotations around a transpose
            _rotate_rows(a, p, q, c, s)
            a = np.ascontiguousarray(a.T)
            _rotate_rows(a, p, q, c, s)
            a[p, q] = 0.0
            a[q, p] = 0.0
            _rotate_rows(vt, p, q, c, s)
        a = 0.5 * (a + a.T)
        if not rotated:
            break
    else:
        dec = _finish(a0, np.diag(a).copy(), vt.T.copy(), sweeps, tol, norm, check=False)
        raise NumericError(
            f"Jacobi did not converge in {max_sweeps} sweeps", residual=dec.residual
        )
    return _finish(a0, np.diag(a).copy(), vt.T.copy(), sweeps, tol, norm)


def _rotate_rows(x, p, q, c, s):
    rp, rq = x[p], x[q]
    x[p] = c[:, None] * rp - s[:, None] * rq
    x[q] = s[:, None] * rp + c[:, None] * rq


def _finish(a0, values, v, sweeps, tol, norm, check=True) -> EigenDecomposition:
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    big = np.argmax(np.abs(v), axis=0)
    flip = v[big, np.arange(v.shape[1])] < 0
    v[:, flip] *= -1.0
    # einsum (no BLAS) keeps the reported residual bit-reproducible
    av = np.einsum("ij,jk->ik", a0, v)
    res = float(np.max(np.sqrt(np.sum((av - v * values) ** 2, axis=0)))) if len(values) else 0.0
    if check and res > tol * max(norm, np.finfo(float).tiny):
        raise NumericError(f"eigen residual {res:.3e} exceeds {tol:g} * ||A||_F", residual=res)
    values.setflags(write=False)
    v.setflags(write=False)
    return EigenDecomposition(values=values, vectors=v, residual=res, sweeps=sweeps)
