"""Linear-algebra kernels: operator abstraction, direct factorization of
sparse matrices, and (preconditioned) conjugate gradients.

Subdomain matrices and the augmented preconditioner block are factorized
once and reused across time steps; the interface Schur operator is only
ever applied matrix-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgumentError, NoConvergenceError, \
    SingularMatrixError

DEFAULT_REL_TOL = 1e-10


class LinearOperator:
    """Square operator defined by its action on a vector."""

    def __init__(self, dim, apply_fn):
        self.dim = int(dim)
        self._apply = apply_fn

    def __call__(self, x):
        return self._apply(x)

    def apply(self, x):
        return self._apply(x)

    @staticmethod
    def from_matrix(matrix):
        matrix = sp.csr_matrix(matrix)
        return LinearOperator(matrix.shape[0], lambda x: matrix @ x)

    @staticmethod
    def identity(dim):
        return LinearOperator(dim, lambda x: x.copy())


class Factorization:
    """Reusable LU decomposition of a square sparse matrix."""

    def __init__(self, lu, dim, kind):
        self._lu = lu
        self.dim = dim
        self.kind = kind

    def solve(self, rhs):
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def as_operator(self):
        return LinearOperator(self.dim, self.solve)


def factorize(matrix, kind="spd"):
    """Factorize an SPD or symmetric-indefinite sparse matrix.

    Both kinds are served by a sparse LU with partial pivoting, which
    satisfies the solve-residual contract for either; the distinction is
    kept for intent at call sites.
    """
    if kind not in ("spd", "symmetric-indefinite"):
        raise InvalidArgumentError(f"unknown factorization kind {kind!r}")
    matrix = sp.csc_matrix(matrix)
    if matrix.shape[0] != matrix.shape[1]:
        raise InvalidArgumentError("matrix must be square")
    try:
        lu = spla.splu(matrix)
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    fact = Factorization(lu, matrix.shape[0], kind)
    # splu can succeed on numerically singular input; probe one solve
    probe = np.ones(matrix.shape[0])
    x = fact.solve(probe)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("factorization produced non-finite solve")
    return fact


@dataclass
class KrylovResult:
    """Outcome of a Krylov solve."""

    x: np.ndarray
    iterations: int
    residual_norms: list

    @property
    def residual(self):
        return self.residual_norms[-1]


def cg(op, rhs, rel_tol=DEFAULT_REL_TOL, max_iter=None, callback=None):
    """Conjugate gradients on a symmetric positive definite operator.

    Stops when the residual 2-norm drops below ``rel_tol * ||rhs||``;
    raises NoConvergenceError (carrying the best iterate) if the
    iteration budget ``max_iter`` (default ``10 * dim``) is exhausted.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = len(rhs)
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n)
    r = rhs.copy()
    nb = np.linalg.norm(rhs)
    history = [nb]
    if nb == 0.0:
        return KrylovResult(x, 0, history)
    p = r.copy()
    rr = r @ r
    for k in range(1, max_iter + 1):
        ap = op(p)
        pap = p @ ap
        if pap <= 0.0:
            raise SingularMatrixError(
                "operator is not positive definite along a search direction")
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        nr = np.linalg.norm(r)
        history.append(nr)
        if callback is not None:
            callback(x)
        if nr <= rel_tol * nb:
            return KrylovResult(x, k, history)
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise NoConvergenceError(
        f"cg did not reach {rel_tol:g} relative residual in {max_iter} "
        "iterations", best=x, iterations=max_iter, residual_norms=history)


def pcg(op, precond, rhs, rel_tol=DEFAULT_REL_TOL, max_iter=None,
        callback=None):
    """Preconditioned conjugate gradients.

    ``precond`` applies the inverse of an SPD preconditioner. The
    stopping test uses the true residual 2-norm, matching ``cg``.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = len(rhs)
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n)
    r = rhs.copy()
    nb = np.linalg.norm(rhs)
    history = [nb]
    if nb == 0.0:
        return KrylovResult(x, 0, history)
    z = precond(r)
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        ap = op(p)
        pap = p @ ap
        if pap <= 0.0:
            raise SingularMatrixError(
                "operator is not positive definite along a search direction")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        nr = np.linalg.norm(r)
        history.append(nr)
        if callback is not None:
            callback(x)
        if nr <= rel_tol * nb:
            return KrylovResult(x, k, history)
        z = precond(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergenceError(
        f"pcg did not reach {rel_tol:g} relative residual in {max_iter} "
        "iterations", best=x, iterations=max_iter, residual_norms=history)
