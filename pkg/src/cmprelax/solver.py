"""First-order solver for  min c'v + offset  s.t.  A v = b,  v in K.

ADMM on the splitting v = z with v in the affine set {A v = b} and z in K:

    x  = Pi(z - u - c/rho)          affine projection, factored once
    xr = alpha x + (1 - alpha) z    over-relaxation
    z  = Proj_K(xr + u)
    u  = u + xr - z

On unbounded programs the iterates drift off along a recession direction;
once that is detected the solver returns the direction as an approximate
ray (in K, A d ~ 0, c'd < 0) with status SuspectedUnbounded. Infeasible
programs make the multipliers drift instead, along a Farkas direction dy
(b'dy > 0, -A'dy in K*), reported as SuspectedInfeasible.

At a fixed point s = -rho u lies in the dual cone and c - A'y = s for the
least-squares multiplier y. Entrywise-nonneg masks on PSD blocks are moved
into extra nonneg variables t with rows v_k - t_k = 0, so every cone the
iteration projects onto is exactly PSD, nonneg, free or zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalBreakdown
from .linalg import SQRT2

OPTIMAL = "Optimal"
MAX_ITERATIONS = "MaxIterations"
SUSPECTED_INFEASIBLE = "SuspectedInfeasible"
SUSPECTED_UNBOUNDED = "SuspectedUnbounded"


@dataclass(frozen=True)
class SolveSettings:
    max_iterations: int = 50000
    eps_primal: float = 1e-7
    eps_dual: float = 1e-7
    eps_gap: float = 1e-7
    alpha: float = 1.6
    scaling: bool = True
    rho: float = 1.0
    check_every: int = 10
    divergence: float = 1e3
    eps_ray: float = 1e-4

    def __post_init__(self):
        if min(self.eps_primal, self.eps_dual, self.eps_gap) <= 0:
            raise InputError("tolerances must be positive")
        if not 0.0 < self.alpha < 2.0:
            raise InputError("over-relaxation must lie in (0, 2)")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be positive")


@dataclass
class SolveResult:
    status: str
    x: np.ndarray
    y: np.ndarray
    objective: float
    dual_objective: float
    residuals: tuple
    iterations: int
    solve_time: float
    mask_dual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ray: np.ndarray | None = None
    ray_quality: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# ---------------------------------------------------------------- standard form

class _Cones:
    """Projection onto a product of zero, free, nonneg and psd cones."""

    def __init__(self, tags):
        self.zero, self.nonneg = [], []
        self.psd = {}  # order -> list of offsets
        off = 0
        for tag in tags:
            if tag.kind == "zero":
                self.zero.extend(range(off, off + tag.size))
            elif tag.kind == "nonneg":
                self.nonneg.extend(range(off, off + tag.size))
            elif tag.kind == "psd":
                self.psd.setdefault(tag.dim, []).append(off)
            off += tag.size
        self.n = off
        self.zero = np.array(self.zero, dtype=int)
        self.nonneg = np.array(self.nonneg, dtype=int)
        self.groups = []
        for q, offs in self.psd.items():
            iu, ju = np.triu_indices(q)
            scale = np.where(iu == ju, 1.0, 1.0 / SQRT2)
            idx = np.array(offs)[:, None] + np.arange(iu.size)[None, :]
            self.groups.append((q, idx, iu, ju, scale))

    def project(self, w, dual=False):
        out = w.copy()
        if self.zero.size:
            # the zero cone's dual is the whole space
            if not dual:
                out[self.zero] = 0.0
        if self.nonneg.size:
            out[self.nonneg] = np.maximum(out[self.nonneg], 0.0)
        for q, idx, iu, ju, scale in self.groups:
            vals = w[idx] * scale
            M = np.zeros((idx.shape[0], q, q))
            M[:, iu, ju] = vals
            M[:, ju, iu] = vals
            lam, Q = np.linalg.eigh(M)
            np.maximum(lam, 0.0, out=lam)
            P = (Q * lam[:, None, :]) @ Q.transpose(0, 2, 1)
            out[idx] = P[:, iu, ju] / scale
        return out


def _standard_form(cp):
    """Append nonneg slack variables for masked PSD entries."""
    from .relax import ConeTag

    rows, tags = [], list(cp.cones)
    off = 0
    for tag in cp.cones:
        if tag.kind == "psd" and tag.mask is not None:
            iu, ju = np.triu_indices(tag.dim)
            for pos in np.flatnonzero(tag.mask[iu, ju]):
                rows.append(off + pos)
        off += tag.size
    n, m, k = cp.n, cp.A.shape[0], len(rows)
    A = np.zeros((m + k, n + k))
    A[:m, :n] = cp.A
    if k:
        A[m + np.arange(k), rows] = 1.0
        A[m + np.arange(k), n + np.arange(k)] = -1.0
        tags.append(ConeTag("nonneg", k))
    b = np.concatenate([cp.b, np.zeros(k)])
    c = np.concatenate([cp.c, np.zeros(k)])
    return A, b, c, tags, k


class _Affine:
    """Projection onto {x : A x = b} and least-squares multipliers via the SVD."""

    def __init__(self, A, b, tol=1e-10):
        n = A.shape[1]
        if A.shape[0] == 0:
            self.V = np.zeros((n, 0))
            self.U = np.zeros((0, 0))
            self.sig = np.zeros(0)
            self.x0 = np.zeros(n)
            self.inconsistency = 0.0
            return
        U, sig, Vt = np.linalg.svd(A, full_matrices=False)
        keep = sig > tol * sig[0] if sig.size and sig[0] > 0 else np.zeros(sig.size, dtype=bool)
        self.U, self.sig, self.V = U[:, keep], sig[keep], Vt[keep].T
        self.x0 = self.V @ ((self.U.T @ b) / self.sig)
        self.inconsistency = float(np.linalg.norm(A @ self.x0 - b) / (1.0 + np.linalg.norm(b)))

    def project(self, w):
        return w - self.V @ (self.V.T @ w) + self.x0

    def multiplier(self, g):
        """argmin_y ||A'y - g|| (minimum norm)."""
        return self.U @ ((self.V.T @ g) / self.sig)


def _residuals(A, b, c, cones, z, y, s):
    nb, nc = np.linalg.norm(b), np.linalg.norm(c)
    rp = np.linalg.norm(A @ z - b) / (1.0 + nb)
    rd_vec = c - A.T @ y - s
    dist = np.linalg.norm(s - cones.project(s, dual=True))
    rd = (np.linalg.norm(rd_vec) + dist) / (1.0 + nc)
    pobj, dobj = float(c @ z), float(b @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return rp, rd, gap, pobj, dobj


def residuals(cp, x, y=None, mask_dual=None):
    """(primal, dual, gap) residuals of a program point.

    ``x`` holds the program variables; ``y`` the row multipliers and
    ``mask_dual`` the multipliers of the masked entries. Without ``y`` the
    dual residual and gap are NaN.
    """
    A, b, c, tags, k = _standard_form(cp)
    x = np.asarray(x, dtype=float)
    if x.shape != (cp.n,):
        raise InputError(f"point has length {x.size}, expected {cp.n}")
    cones = _Cones(tags)
    z = np.concatenate([x, _mask_values(cp, x)])
    rp = np.linalg.norm(A @ z - b) / (1.0 + np.linalg.norm(b))
    if y is None:
        return float(rp), float("nan"), float("nan")
    eta = np.zeros(k) if mask_dual is None else np.asarray(mask_dual, dtype=float)
    yy = np.concatenate([np.asarray(y, dtype=float), eta])
    s = c - A.T @ yy
    s = cones.project(s, dual=True)
    _, rd, gap, _, _ = _residuals(A, b, c, cones, z, yy, s)
    return float(rp), float(rd), float(gap)


def duality_check(cp, result) -> tuple[float, float]:
    """(excess, allowance) for weak duality of a returned primal-dual pair.

    With z in K, s = Proj_K*(c - A'y) and r = c - A'y - s,

        b'y - c'z = -s'z - r'z - y'(A z - b) <= ||r|| ||z|| + ||y|| ||A z - b||,

    so weak duality holds up to the residuals iff excess <= allowance.
    """
    A, b, c, tags, k = _standard_form(cp)
    cones = _Cones(tags)
    # slacks of the masked entries, clipped into the nonneg cone; any
    # mismatch with x shows up in the row residual
    z = np.concatenate([result.x, np.maximum(_mask_values(cp, result.x), 0.0)])
    yy = np.concatenate([result.y, result.mask_dual if result.mask_dual.size else np.zeros(k)])
    g = c - A.T @ yy
    s = cones.project(g, dual=True)
    allowance = np.linalg.norm(g - s) * np.linalg.norm(z) + np.linalg.norm(yy) * np.linalg.norm(A @ z - b)
    pobj, dobj = float(c @ z), float(b @ yy)
    return dobj - pobj, float(allowance) + 1e-9 * (1.0 + abs(pobj) + abs(dobj))


def _mask_values(cp, x):
    vals, off = [], 0
    for tag in cp.cones:
        if tag.kind == "psd" and tag.mask is not None:
            iu, ju = np.triu_indices(tag.dim)
            vals.append(x[off + np.flatnonzero(tag.mask[iu, ju])])
        off += tag.size
    return np.concatenate(vals) if vals else np.zeros(0)


# ---------------------------------------------------------------- ADMM

# callables run as f(cp, result) after every solve; used by test harnesses
OBSERVERS: list = []


def solve(cp, settings: SolveSettings | None = None) -> SolveResult:
    settings = settings or SolveSettings()
    t0 = time.perf_counter()
    A, b, c, tags, k = _standard_form(cp)
    n = A.shape[1]
    cones = _Cones(tags)
    aff = _Affine(A, b)
    m_orig = cp.A.shape[0]

    sigma = max(1.0, float(np.linalg.norm(c))) if settings.scaling else 1.0
    cs = c / sigma
    rho = settings.rho
    alpha = settings.alpha

    def finish(status, z, u, it, ray=None, quality=float("nan")):
        s = -rho * u * sigma
        y = aff.multiplier(c - s) if A.shape[0] else np.zeros(0)
        rp, rd, gap, pobj, dobj = _residuals(A, b, c, cones, z, y, cones.project(s, dual=True))
        res = SolveResult(status, z[:cp.n].copy(), y[:m_orig].copy(), pobj + cp.offset, dobj + cp.offset,
                          (float(rp), float(rd), float(gap)), it, time.perf_counter() - t0, y[m_orig:].copy(),
                          None if ray is None else ray[:cp.n], quality)
        for fn in OBSERVERS:
            fn(cp, res)
        return res

    z = np.zeros(n)
    u = np.zeros(n)
    z_scale = 1.0 + float(np.linalg.norm(aff.x0))
    if aff.inconsistency > 1e-6:
        return finish(SUSPECTED_INFEASIBLE, z, u, 0)
    diverging = False
    x_prev = y_prev = None

    for it in range(1, settings.max_iterations + 1):
        x = aff.project(z - u - cs / rho)
        xr = alpha * x + (1.0 - alpha) * z
        z = cones.project(xr + u)
        u = u + xr - z
        if it % settings.check_every and it != settings.max_iterations:
            continue
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(u))):
            raise NumericalBreakdown("non-finite iterate", it)
        if diverging:
            # differences of affine-feasible iterates lie in null(A) and tend
            # to a recession direction; accept once its cone projection is an
            # accurate descent ray
            d = cones.project(x - x_prev)
            slope = float(c @ d)
            if slope < 0.0:
                quality = float(np.linalg.norm(A @ d)) / -slope
                if quality <= settings.eps_ray:
                    return finish(SUSPECTED_UNBOUNDED, z, u, it, d / np.linalg.norm(d), quality)
            x_prev = x
            continue
        s = -rho * sigma * u
        y = aff.multiplier(c - s)
        rp, rd, gap, _, _ = _residuals(A, b, c, cones, z, y, s)
        if rp <= settings.eps_primal and rd <= settings.eps_dual and gap <= settings.eps_gap:
            return finish(OPTIMAL, z, u, it)
        if np.linalg.norm(u) > 1e12:
            return finish(SUSPECTED_INFEASIBLE, z, u, it)
        if y_prev is not None and np.linalg.norm(u) > settings.divergence:
            # Farkas test on the multiplier drift: b'dy > 0 with -A'dy in K*.
            # For a feasible program b'dy <= ||v|| dist(-A'dy, K*), so the
            # ratio bound below rules out feasible points of norm < z_scale/eps_ray
            dy = y - y_prev
            by = float(b @ dy)
            if by > 0.0:
                w = -A.T @ dy
                dist = float(np.linalg.norm(w - cones.project(w, dual=True)))
                if dist * z_scale <= settings.eps_ray * by:
                    return finish(SUSPECTED_INFEASIBLE, z, u, it)
        y_prev = y
        if gap > 0.5 and np.linalg.norm(z) > settings.divergence * z_scale:
            diverging = True
            x_prev = x
            continue
        # residual balancing: raise rho when primal lags, lower it when dual lags
        if it % (5 * settings.check_every) == 0:
            ratio = rp / max(rd, 1e-300)
            if ratio > 10.0 and rho < 1e6:
                rho *= 2.0
                u /= 2.0
            elif ratio < 0.1 and rho > 1e-6:
                rho /= 2.0
                u *= 2.0
    return finish(MAX_ITERATIONS, z, u, settings.max_iterations)
