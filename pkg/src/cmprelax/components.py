"""Connected components: S symmetric blocks sharing one north-west block.

An element holds a shared ``X`` (order k) and per-scenario blocks ``Z_i``
(m x k) and ``Y_i`` (order m). Embedding into an arrowhead matrix of order
``k + S*m`` is :func:`gamma`; :func:`gamma_inv` reads the blocks back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InputError
from .linalg import frobenius

NONNEG = "nonneg"
FREE = "free"
CONE_KINDS = (NONNEG, FREE)


@dataclass(frozen=True)
class ConnectedComponents:
    X: np.ndarray
    Z: tuple
    Y: tuple

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        X = X.reshape(1, 1) if X.ndim == 0 else X
        Y = tuple(np.asarray(y, dtype=float) for y in self.Y)
        Y = tuple(y.reshape(1, 1) if y.ndim == 0 else y for y in Y)
        if not Y:
            raise DimensionError("need at least one scenario block")
        m = Y[0].shape[0]
        try:
            Z = tuple(np.asarray(z, dtype=float).reshape(m, X.shape[0]) for z in self.Z)
        except ValueError:
            raise DimensionError(f"Z blocks do not reshape to {(m, X.shape[0])}") from None
        if X.shape[0] != X.shape[1]:
            raise DimensionError(f"X must be square, got {X.shape}")
        if len(Z) != len(Y):
            raise DimensionError("need the same number of Z and Y blocks")
        for i, (z, y) in enumerate(zip(Z, Y)):
            if y.shape != (m, m):
                raise DimensionError(f"Y[{i}] has shape {y.shape}, expected {(m, m)}")
            if z.shape != (m, X.shape[0]):
                raise DimensionError(f"Z[{i}] has shape {z.shape}, expected {(m, X.shape[0])}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Y", Y)

    @property
    def k(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.Y[0].shape[0]

    @property
    def S(self) -> int:
        return len(self.Y)

    @property
    def order(self) -> int:
        return self.k + self.S * self.m

    def block(self, i: int) -> np.ndarray:
        """The i-th full block ``[X Z_i'; Z_i Y_i]``."""
        return np.block([[self.X, self.Z[i].T], [self.Z[i], self.Y[i]]])

    def blocks(self):
        return [self.block(i) for i in range(self.S)]

    @classmethod
    def zeros(cls, k: int, m: int, S: int) -> "ConnectedComponents":
        return cls(np.zeros((k, k)), tuple(np.zeros((m, k)) for _ in range(S)),
                   tuple(np.zeros((m, m)) for _ in range(S)))

    def scaled(self, t: float) -> "ConnectedComponents":
        return ConnectedComponents(t * self.X, tuple(t * z for z in self.Z), tuple(t * y for y in self.Y))

    def __add__(self, other: "ConnectedComponents") -> "ConnectedComponents":
        _check_same_shape(self, other)
        return ConnectedComponents(self.X + other.X,
                                   tuple(a + b for a, b in zip(self.Z, other.Z)),
                                   tuple(a + b for a, b in zip(self.Y, other.Y)))

    def to_json(self) -> dict:
        return {"X": self.X.tolist(), "Z": [z.tolist() for z in self.Z],
                "Y": [y.tolist() for y in self.Y]}

    @classmethod
    def from_json(cls, data: dict) -> "ConnectedComponents":
        try:
            return cls(np.array(data["X"], dtype=float), tuple(np.array(z, dtype=float) for z in data["Z"]),
                       tuple(np.array(y, dtype=float) for y in data["Y"]))
        except KeyError as exc:
            raise InputError(f"connected components JSON lacks field {exc}") from None


@dataclass(frozen=True)
class GroundCones:
    """Ground cones K_0 (dimension k) and K_1..K_S (dimension m each)."""

    k: int
    m: int
    cone0: str = NONNEG
    cones: tuple = field(default=())

    def __post_init__(self):
        cones = tuple(self.cones)
        if not cones:
            raise DimensionError("need at least one scenario cone")
        for tag in (self.cone0, *cones):
            if tag not in CONE_KINDS:
                raise InputError(f"unsupported ground cone {tag!r}")
        object.__setattr__(self, "cones", cones)

    @classmethod
    def uniform(cls, k: int, m: int, S: int, cone0: str = NONNEG, cone: str = NONNEG) -> "GroundCones":
        return cls(k, m, cone0, (cone,) * S)

    @property
    def S(self) -> int:
        return len(self.cones)

    def nonneg_mask(self, i: int) -> np.ndarray:
        """Which coordinates of (x; y_i) are sign constrained."""
        return np.array([self.cone0 == NONNEG] * self.k + [self.cones[i] == NONNEG] * self.m, dtype=bool)

    def matches(self, cc: ConnectedComponents) -> bool:
        return (cc.k, cc.m, cc.S) == (self.k, self.m, self.S)


def _check_same_shape(a: ConnectedComponents, b: ConnectedComponents):
    if (a.k, a.m, a.S) != (b.k, b.m, b.S):
        raise DimensionError(f"shape mismatch: {(a.k, a.m, a.S)} vs {(b.k, b.m, b.S)}")


def gamma(cc: ConnectedComponents) -> np.ndarray:
    """Arrowhead embedding; off-diagonal Y blocks are zero."""
    k, m = cc.k, cc.m
    M = np.zeros((cc.order, cc.order))
    M[:k, :k] = cc.X
    for i in range(cc.S):
        rows = slice(k + i * m, k + (i + 1) * m)
        M[rows, :k] = cc.Z[i]
        M[:k, rows] = cc.Z[i].T
        M[rows, rows] = cc.Y[i]
    return M


def gamma_inv(M, k: int, m: int, S: int) -> ConnectedComponents:
    """Read the arrowhead blocks of M; blocks between scenarios are ignored."""
    M = np.asarray(M, dtype=float)
    if M.shape != (k + S * m, k + S * m):
        raise DimensionError(f"matrix of shape {M.shape} does not fit k={k}, m={m}, S={S}")
    Z, Y = [], []
    for i in range(S):
        rows = slice(k + i * m, k + (i + 1) * m)
        Z.append(M[rows, :k].copy())
        Y.append(M[rows, rows].copy())
    return ConnectedComponents(M[:k, :k].copy(), tuple(Z), tuple(Y))


def gamma_partial(cc: ConnectedComponents):
    """Arrowhead partial matrix whose cross-scenario blocks are unspecified."""
    from .specgraph import PartialMatrix

    k, m = cc.k, cc.m
    mask = np.zeros((cc.order, cc.order), dtype=bool)
    mask[:k, :] = True
    mask[:, :k] = True
    for i in range(cc.S):
        rows = slice(k + i * m, k + (i + 1) * m)
        mask[rows, rows] = True
    return PartialMatrix(gamma(cc), mask)


def odot(a: ConnectedComponents, b: ConnectedComponents) -> float:
    """Inner product of the arrowhead embeddings (X counted once)."""
    _check_same_shape(a, b)
    return frobenius(gamma(a), gamma(b))


def cmp_generator(x, ys) -> ConnectedComponents:
    """Rank-one element ``[(x; y_i)(x; y_i)']_i``."""
    x = np.asarray(x, dtype=float).ravel()
    ys = [np.asarray(y, dtype=float).ravel() for y in ys]
    return ConnectedComponents(np.outer(x, x), tuple(np.outer(y, x) for y in ys),
                               tuple(np.outer(y, y) for y in ys))


def _draw(rng, n: int, kind: str) -> np.ndarray:
    v = rng.uniform(0.0, 1.0, size=n)
    if kind == FREE:
        v = np.where(rng.uniform(size=n) < 0.5, -v, v)
    return v


def sample_generator_vectors(cones: GroundCones, seed=None):
    """Draw x in K_0 and y_i in K_i: uniform [0,1] entries, sign flipped with
    probability 1/2 on free coordinates."""
    rng = np.random.default_rng(seed)
    x = _draw(rng, cones.k, cones.cone0)
    ys = [_draw(rng, cones.m, c) for c in cones.cones]
    return x, ys


def sample_cmp_generator(cones: GroundCones, seed=None) -> ConnectedComponents:
    return cmp_generator(*sample_generator_vectors(cones, seed))
