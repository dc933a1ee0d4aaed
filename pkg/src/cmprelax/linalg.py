"""Dense symmetric linear algebra on small matrices.

Symmetric matrices are stored either as plain 2-D arrays or as ``svec``
vectors: the upper triangle read row by row, with off-diagonal entries
weighted by sqrt(2) so that ``svec(A) @ svec(B) == trace(A @ B)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InputError

SQRT2 = math.sqrt(2.0)


def svec_size(order: int) -> int:
    return order * (order + 1) // 2


def _triu(order: int):
    return np.triu_indices(order)


def svec(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    i, j = _triu(M.shape[0])
    v = M[i, j].copy()
    v[i != j] *= SQRT2
    return v


def order_from_svec_size(size: int) -> int:
    n = int(round((math.sqrt(8 * size + 1) - 1) / 2))
    if svec_size(n) != size:
        raise InputError(f"{size} is not a triangular number")
    return n


def smat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = order_from_svec_size(v.size)
    i, j = _triu(n)
    w = v.copy()
    w[i != j] /= SQRT2
    M = np.zeros((n, n))
    M[i, j] = w
    M[j, i] = w
    return M


@dataclass(frozen=True)
class SymMat:
    """Symmetric matrix held in scaled upper-triangle storage."""

    order: int
    entries: np.ndarray

    def __post_init__(self):
        if self.entries.shape != (svec_size(self.order),):
            raise InputError(
                f"svec of order {self.order} needs {svec_size(self.order)} entries, "
                f"got {self.entries.shape}"
            )

    @classmethod
    def from_dense(cls, M) -> "SymMat":
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InputError(f"expected a square matrix, got shape {M.shape}")
        return cls(M.shape[0], svec(0.5 * (M + M.T)))

    def to_dense(self) -> np.ndarray:
        return smat(self.entries)

    def __array__(self, dtype=None, copy=None):
        out = self.to_dense()
        return out if dtype is None else out.astype(dtype)


def frobenius(A, B) -> float:
    """Trace inner product; SymMat arguments use their svec storage."""
    if isinstance(A, SymMat) and isinstance(B, SymMat):
        return float(A.entries @ B.entries)
    return float(np.sum(np.asarray(A, dtype=float) * np.asarray(B, dtype=float)))


def _as_symmetric(M) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("matrix has non-finite entries")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class EigDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self, values=None) -> np.ndarray:
        lam = self.eigenvalues if values is None else values
        Q = self.eigenvectors
        return (Q * lam) @ Q.T


def sym_eig(M, *, tol: float = 1e-12, max_sweeps: int = 60) -> EigDecomposition:
    """Cyclic Jacobi eigendecomposition.

    Sweeps over all off-diagonal pairs until the off-diagonal Frobenius norm
    drops below ``tol * ||M||_F``. Eigenvector signs are fixed so that the
    first entry of largest magnitude in each column is positive.
    """
    A = _as_symmetric(M)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if n > 1 and scale > 0:
        target = tol * scale
        for _ in range(max_sweeps):
            off = np.linalg.norm(A - np.diag(np.diag(A)))
            if off <= target:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    if abs(apq) <= 1e-300 or abs(apq) < 1e-18 * scale:
                        continue
                    tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                    c = 1.0 / math.sqrt(1.0 + t * t)
                    s = t * c
                    ap = A[:, p].copy()
                    aq = A[:, q]
                    A[:, p] = c * ap - s * aq
                    A[:, q] = s * ap + c * aq
                    ap = A[p, :].copy()
                    aq = A[q, :]
                    A[p, :] = c * ap - s * aq
                    A[q, :] = s * ap + c * aq
                    A[p, q] = A[q, p] = 0.0
                    vp = V[:, p].copy()
                    vq = V[:, q]
                    V[:, p] = c * vp - s * vq
                    V[:, q] = s * vp + c * vq
    lam = np.diag(A).copy()
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    V = V[:, order]
    for col in range(n):
        k = int(np.argmax(np.abs(V[:, col])))
        if V[k, col] < 0:
            V[:, col] = -V[:, col]
    return EigDecomposition(lam, V)


def min_eigenvalue(M) -> float:
    return float(sym_eig(M).eigenvalues[-1])


def project_psd(M) -> np.ndarray:
    """Frobenius-nearest positive semidefinite matrix."""
    eig = sym_eig(M)
    out = eig.reconstruct(np.maximum(eig.eigenvalues, 0.0))
    return 0.5 * (out + out.T)


def pseudo_inverse(M, tol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose inverse; eigenvalues with ``|lam| <= tol * max|lam|`` count as zero."""
    eig = sym_eig(M)
    lam = eig.eigenvalues
    cutoff = tol * (np.max(np.abs(lam)) if lam.size else 0.0)
    inv = np.zeros_like(lam)
    keep = np.abs(lam) > cutoff
    inv[keep] = 1.0 / lam[keep]
    return eig.reconstruct(inv)


def _prefer_nonnegative(y: np.ndarray, zero: float = 1e-12) -> bool:
    nz = np.flatnonzero(np.abs(y) > zero)
    return nz.size == 0 or y[nz[0]] >= 0


def trust_region_sphere(C, b) -> tuple[np.ndarray, float]:
    """Global minimizer of ``y'Cy + b'y`` over the unit sphere ``||y|| = 1``.

    Works in the eigenbasis of C. The multiplier ``mu`` with
    ``(C + mu I) y = -b/2`` and ``C + mu I >= 0`` is found from the secular
    equation; when b has no weight on the bottom eigenspace and the
    remaining solution has norm below one (the hard case), the bottom
    eigenvector fills up the norm.
    """
    C = _as_symmetric(C)
    b = np.asarray(b, dtype=float).ravel()
    n = C.shape[0]
    if b.shape != (n,):
        raise InputError(f"linear term has length {b.size}, expected {n}")

    def objective(y):
        return float(y @ C @ y + b @ y)

    eig = sym_eig(C)
    lam = eig.eigenvalues[::-1]  # ascending
    Q = eig.eigenvectors[:, ::-1]
    beta = Q.T @ b
    scale = max(1.0, float(np.max(np.abs(lam))), float(np.linalg.norm(b)))
    lam_min = lam[0]
    bottom = lam - lam_min <= 1e-10 * scale
    beta = np.where(bottom & (np.abs(beta) <= 1e-13 * scale), 0.0, beta)

    def y_of(mu):
        return -(beta / (2.0 * (lam + mu)))

    if np.all(beta[bottom] == 0.0):
        # candidate with mu = -lam_min, built from the non-bottom directions
        coef = np.zeros(n)
        top = ~bottom
        coef[top] = -beta[top] / (2.0 * (lam[top] - lam_min))
        norm_p = float(np.linalg.norm(coef))
        if norm_p <= 1.0:
            tau = math.sqrt(max(1.0 - norm_p * norm_p, 0.0))
            k = int(np.flatnonzero(bottom)[0])
            best = None
            for sign in (1.0, -1.0):
                c2 = coef.copy()
                c2[k] += sign * tau
                y = Q @ c2
                val = objective(y)
                if best is None or val < best[1] - 1e-14 * scale or (
                    abs(val - best[1]) <= 1e-14 * scale and _prefer_nonnegative(y)
                    and not _prefer_nonnegative(best[0])
                ):
                    best = (y, val)
            return best
        # regular case over the non-bottom directions only
        lam_r, beta_r = lam[top], beta[top]

        def psi(mu):
            return 1.0 - 1.0 / np.linalg.norm(beta_r / (2.0 * (lam_r + mu)))

        lo = -lam_min
        hi = -lam_min + np.linalg.norm(b) / 2.0 + 1.0
        mu = brentq(psi, lo, hi, xtol=1e-15 * scale, rtol=4 * np.finfo(float).eps, maxiter=500)
        c2 = np.zeros(n)
        c2[top] = -beta_r / (2.0 * (lam_r + mu))
        y = Q @ c2
        y /= np.linalg.norm(y)
        return y, objective(y)

    def psi(mu):
        return 1.0 - 1.0 / np.linalg.norm(y_of(mu))

    hi = -lam_min + np.linalg.norm(b) / 2.0
    # psi(hi) <= 0 up to rounding (a positive value means hi is the root); walk the lower end toward the pole until psi > 0
    gap = max(np.linalg.norm(b) / 2.0, 1e-300)
    lo = -lam_min + gap
    while psi(lo) <= 0.0:
        hi = lo
        gap *= 0.5
        lo = -lam_min + gap
        if gap < 1e-300:
            break
    mu = hi if psi(hi) >= 0.0 else brentq(
        psi, lo, hi, xtol=1e-16 * scale, rtol=4 * np.finfo(float).eps, maxiter=500
    )
    y = Q @ y_of(mu)
    y /= np.linalg.norm(y)
    return y, objective(y)
