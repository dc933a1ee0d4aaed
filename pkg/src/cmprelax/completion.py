"""Constructive completions of arrowhead partial matrices.

Every routine returns a dense matrix in the arrowhead coordinate order
``(x; y_1; ...; y_S)``. Completely positive memberships are certified by
explicit factors supplied by the caller; nothing here tests CP membership.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .components import NONNEG, ConnectedComponents, GroundCones, gamma
from .errors import DimensionError, InputError, PreconditionError
from .linalg import pseudo_inverse, sym_eig
from .specgraph import PartialMatrix

AGREE_TOL = 1e-9
PSD_REL_TOL = 1e-7
BLOCK_PSD_TOL = 1e-8
CONE_TOL = 1e-12


def _lambda_range(M):
    lam = sym_eig(M).eigenvalues
    return (float(lam[-1]), float(lam[0])) if lam.size else (0.0, 0.0)


def psd_complete_arrowhead(cc: ConnectedComponents) -> np.ndarray:
    """Fill the cross-scenario blocks with ``Y_ij = Z_i X^+ Z_j'``.

    g0 is the only separator of the arrowhead graph, and PSD blocks force
    range(Z_i') into range(X), so this closed form gives a PSD completion.
    """
    for i, B in enumerate(cc.blocks()):
        lo, hi = _lambda_range(B)
        if lo < -BLOCK_PSD_TOL * max(1.0, abs(hi)):
            raise PreconditionError(f"block {i} is not PSD: lambda_min = {lo:.3e}")
    M = gamma(cc)
    k, m = cc.k, cc.m
    if k == 0 or m == 0:
        return M
    Xp = pseudo_inverse(cc.X)
    for i in range(cc.S):
        ri = slice(k + i * m, k + (i + 1) * m)
        for j in range(i + 1, cc.S):
            rj = slice(k + j * m, k + (j + 1) * m)
            Yij = cc.Z[i] @ Xp @ cc.Z[j].T
            M[ri, rj] = Yij
            M[rj, ri] = Yij.T
    return M


def _check_columns(F, nonneg: bool, what: str):
    if not nonneg or F.size == 0:
        return
    bad = np.argwhere(F < -CONE_TOL)
    if bad.size:
        row, col = bad[0]
        raise PreconditionError(
            f"{what} column {col} violates its cone at coordinate {row} (value {F[row, col]:.3e})"
        )


def cpp_complete_coordinated(Xbar, Ybars, cones: GroundCones) -> np.ndarray:
    """Gram matrix of the stacked factor ``(Xbar; Ybar_1; ...; Ybar_S)``.

    Each column of ``(Xbar; Ybar_i)`` must lie in K_0 x K_i, which makes the
    result completely positive over the product cone.
    """
    Xbar = np.atleast_2d(np.asarray(Xbar, dtype=float))
    Ybars = [np.atleast_2d(np.asarray(Y, dtype=float)) for Y in Ybars]
    if len(Ybars) != cones.S:
        raise DimensionError(f"got {len(Ybars)} scenario factors for {cones.S} cones")
    r = Xbar.shape[1]
    if Xbar.shape[0] != cones.k:
        raise DimensionError(f"Xbar has {Xbar.shape[0]} rows, expected {cones.k}")
    for i, Y in enumerate(Ybars):
        if Y.shape != (cones.m, r):
            raise DimensionError(f"Ybar[{i}] has shape {Y.shape}, expected {(cones.m, r)}")
    _check_columns(Xbar, cones.cone0 == NONNEG, "Xbar")
    for i, Y in enumerate(Ybars):
        _check_columns(Y, cones.cones[i] == NONNEG, f"Ybar[{i}]")
    F = np.vstack([Xbar] + Ybars)
    return F @ F.T


def _normalize_factors(factors, x0, m, nonneg, i):
    """Scale a factorization of ``[Y z; z' x0]`` to x0 = 1, signs fixed so
    that the last coordinate of every column is nonnegative."""
    if factors is None:
        raise PreconditionError(f"scenario {i} lacks a factorization")
    cols = [np.asarray(f, dtype=float).ravel() for f in factors]
    F = np.column_stack([c[:m] for c in cols]) if cols else np.zeros((m, 0))
    f0 = np.array([c[m] for c in cols]) if cols else np.zeros(0)
    if any(c.size != m + 1 for c in cols):
        raise DimensionError(f"scenario {i}: factor columns must have length {m + 1}")
    flip = f0 < 0
    F[:, flip] *= -1.0
    f0 = np.abs(f0)
    _check_columns(F, nonneg, f"scenario {i} factor")
    if not np.isclose(f0 @ f0, x0, rtol=1e-9, atol=1e-12):
        raise PreconditionError(f"scenario {i}: factors give corner {f0 @ f0:.6g}, expected x0 = {x0:.6g}")
    s = 1.0 / np.sqrt(x0)
    return F * s, f0 * s


def cbc_complete(x0: float, factors, cones=None) -> np.ndarray:
    """Complete ``[x0 z_i'; z_i Y_i]``, i = 1..S, into one matrix of order
    1 + S*m over R_+ x K_1 x ... x K_S.

    ``factors[i]`` is a list of columns ``(f_l; f0_l)`` whose Gram matrix is
    ``[Y_i z_i; z_i' x0]`` (scenario coordinates first, x0 last). The
    scenarios are merged one at a time: with x0 = 1, columns
    ``(g0_k F_l; f0_l g0_k; f0_l g_k)`` reproduce both blocks and put
    ``z_{new} z_old'`` in the unspecified position. The output coordinate
    order is ``(x0; y_1; ...; y_S)``.
    """
    x0 = float(x0)
    if factors is None or len(factors) == 0:
        raise PreconditionError("need at least one scenario factorization")
    S = len(factors)
    for i, fl in enumerate(factors):
        if fl is None:
            raise PreconditionError(f"scenario {i} lacks a factorization")
    sizes = {np.asarray(f).size for fl in factors for f in fl}
    if len(sizes) != 1:
        raise DimensionError(f"factor columns must share one length, got {sorted(sizes)}")
    m = sizes.pop() - 1
    if cones is None:
        cones = [NONNEG] * S
    if len(cones) != S:
        raise DimensionError(f"{len(cones)} cone tags for {S} scenarios")
    if x0 < 0:
        raise PreconditionError(f"x0 = {x0} is negative")
    if x0 == 0.0:
        # no mass on the shared corner: z_i must vanish and zero fill works
        blocks = []
        for i, fl in enumerate(factors):
            F = np.column_stack([np.asarray(f, dtype=float).ravel() for f in fl]) if fl else np.zeros((m + 1, 0))
            _check_columns(F[:m], cones[i] == NONNEG, f"scenario {i} factor")
            if np.any(np.abs(F[m]) > CONE_TOL):
                raise PreconditionError("x0 = 0 with nonzero z_i is not completable by this construction")
            blocks.append(F[:m] @ F[:m].T)
        M = np.zeros((1 + S * m, 1 + S * m))
        for i, Y in enumerate(blocks):
            sl = slice(1 + i * m, 1 + (i + 1) * m)
            M[sl, sl] = Y
        return M

    F, f0 = _normalize_factors(factors[0], x0, m, cones[0] == NONNEG, 0)
    for i in range(1, S):
        G, g0 = _normalize_factors(factors[i], x0, m, cones[i] == NONNEG, i)
        # columns indexed by (l, k), l over the merged factor and k over the new one
        top = np.einsum("k,al->alk", g0, F).reshape(F.shape[0], -1)
        new = np.einsum("l,bk->blk", f0, G).reshape(G.shape[0], -1)
        F = np.vstack([top, new])
        f0 = np.outer(f0, g0).ravel()
    V = np.vstack([f0[None, :], F]) * np.sqrt(x0)
    return V @ V.T


def ddc_complete(cc: ConnectedComponents, factor=None, cone0: str = NONNEG) -> np.ndarray:
    """Zero-fill completion of a single DDC cell.

    The cell has one active scenario s and one active coordinate k:
    ``Y_s = y e_k e_k'``, ``Z_s = z e_k'``. When ``factor`` (columns in
    K_0 x R_+ whose Gram matrix is ``[X z; z' y]``) is given, the same
    columns padded with zeros certify the output.
    """
    active = [i for i in range(cc.S) if np.any(cc.Z[i]) or np.any(cc.Y[i])]
    if len(active) > 1:
        raise PreconditionError(f"DDC cell has {len(active)} active scenarios: {active}")
    if active:
        s = active[0]
        diag_idx = np.flatnonzero(np.diag(cc.Y[s]))
        col_idx = np.flatnonzero(np.any(cc.Z[s] != 0.0, axis=1))
        idx = set(diag_idx.tolist()) | set(col_idx.tolist())
        off = cc.Y[s] - np.diag(np.diag(cc.Y[s]))
        if len(idx) > 1 or np.any(off):
            raise PreconditionError(f"scenario {s} does not have single-coordinate DDC structure")
        if factor is not None and idx:
            kk = idx.pop()
            Fm = np.atleast_2d(np.asarray(factor, dtype=float))
            if Fm.shape[0] != cc.k + 1:
                raise DimensionError(f"factor needs {cc.k + 1} rows, got {Fm.shape[0]}")
            _check_columns(Fm[:cc.k], cone0 == NONNEG, "factor")
            _check_columns(Fm[cc.k:], True, "factor")
            cell = np.block([[cc.X, cc.Z[s][kk][:, None]],
                             [cc.Z[s][kk][None, :], cc.Y[s][kk:kk + 1, kk:kk + 1]]])
            if not np.allclose(Fm @ Fm.T, cell, atol=AGREE_TOL):
                raise PreconditionError("factor does not reproduce the DDC cell")
    return gamma(cc)


@dataclass
class CompletionReport:
    mode: str
    agreement: float = 0.0
    lambda_min: float = 0.0
    lambda_max: float = 0.0
    min_entry: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_completion(P: PartialMatrix, M, mode: str = "psd") -> CompletionReport:
    """Check a completion M of P: specified entries, PSD, and (mode dnn)
    entrywise nonnegativity. An empty ``violations`` list means it passed."""
    if mode not in ("psd", "dnn"):
        raise InputError(f"unknown verification mode {mode!r}")
    M = np.asarray(M, dtype=float)
    if M.shape != P.values.shape:
        raise DimensionError(f"completion shape {M.shape} differs from {P.values.shape}")
    rep = CompletionReport(mode)
    scale = max(1.0, float(np.abs(P.values).max(initial=0.0)))
    rep.agreement = float(np.abs(M - P.values)[P.mask].max(initial=0.0))
    if rep.agreement > AGREE_TOL * scale:
        i, j = np.argwhere(P.mask & (np.abs(M - P.values) == rep.agreement))[0]
        rep.violations.append(f"specified entry ({i},{j}) differs by {rep.agreement:.3e}")
    asym = float(np.abs(M - M.T).max(initial=0.0))
    if asym > AGREE_TOL * scale:
        rep.violations.append(f"completion is not symmetric (max {asym:.3e})")
    rep.lambda_min, rep.lambda_max = _lambda_range(M)
    if rep.lambda_min < -PSD_REL_TOL * max(rep.lambda_max, 1e-300):
        rep.violations.append(f"not PSD: lambda_min = {rep.lambda_min:.3e}")
    rep.min_entry = float(M.min(initial=0.0))
    if mode == "dnn" and rep.min_entry < -AGREE_TOL * scale:
        rep.violations.append(f"negative entry {rep.min_entry:.3e}")
    return rep
