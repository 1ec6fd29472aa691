"""Preconditioned conjugate gradients for the SPD step systems."""
from dataclasses import dataclass

import numpy as np


class SolverError(RuntimeError):
    """CG did not reach the requested tolerance."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-12
    max_iter: int | None = None  # default 10 * n
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("solver tolerance must be positive")
        if self.preconditioner not in ("none", "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


def _dot(a, b):
    # np.sum reduces pairwise in a fixed order; BLAS ddot may split across threads
    return float(np.sum(a * b))


def cg_solve(A, b, x0=None, cfg=SolverConfig()):
    """Solve A x = b for symmetric positive definite A.

    Stops when ||b - A x|| <= tol * ||b||. Returns ``(x, iterations, residual_norm)``.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has length {n}")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    max_iter = 10 * n if cfg.max_iter is None else cfg.max_iter
    bnorm = np.sqrt(_dot(b, b))
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    target = cfg.tol * bnorm
    if cfg.preconditioner == "jacobi":
        d = A.diagonal()
        if np.any(d <= 0):
            raise ValueError("Jacobi preconditioner needs a positive diagonal")
        dinv = 1.0 / d
    else:
        dinv = None

    r = b - A @ x
    rnorm = np.sqrt(_dot(r, r))
    if rnorm <= target:
        return x, 0, rnorm
    z = r * dinv if dinv is not None else r.copy()
    p = z.copy()
    rz = _dot(r, z)
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = _dot(p, Ap)
        if pAp <= 0:
            raise SolverError("matrix is not positive definite", rnorm, it)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.sqrt(_dot(r, r))
        if rnorm <= target:
            return x, it, rnorm
        z = r * dinv if dinv is not None else r
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not converge in {max_iter} iterations (residual {rnorm:.3e}, target {target:.3e})",
        rnorm, max_iter)
