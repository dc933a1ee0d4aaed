"""Conic relaxations and inner approximations of structured QCQPs.

Every builder allocates PSD blocks, then describes the lifted quantities

    corner = Xhat[0,0],  x, X,  y_i, Z_i = "y_i x'",  Y_i = "y_i y_i'"

as linear maps of the stacked variable vector. One shared assembler turns
those maps into the constraint rows and objective, so the builders differ
only in how the lifted blocks are carved out of the cone variables:

    full Burer  one block over (1, x, y_1, ..., y_S)
    CPI         S blocks over (1, x, y_i), shared part linked by equalities
    CPS         S blocks [W_i Zhat_i'; Zhat_i Y_i] with Xhat = sum_i W_i
    CBC         Xhat diagonal, one block family per diagonal coordinate
    DDC         cells (k, s) holding Xhat^{ks}, one column of Zhat_s and
                one diagonal entry of Y_s

PSD variables are stored as svec (upper triangle, off-diagonals scaled by
sqrt(2)).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .components import FREE, NONNEG, CONE_KINDS
from .errors import DimensionError, InputError, PreconditionError
from .linalg import SQRT2, svec, svec_size
from .model import CandidateSolution, StructuredQCQP

EXACT = "EXACT"
OUTER = "OUTER"
DNN_EXACT_MAX = 4


@dataclass(frozen=True)
class ConeTag:
    """One cone of the variable vector: zero, free, nonneg (size ``dim``) or
    psd (order ``dim``, optional symmetric mask of entries kept nonneg)."""

    kind: str
    dim: int
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "free", "nonneg", "psd"):
            raise InputError(f"unknown cone kind {self.kind!r}")
        if self.dim <= 0:
            raise InputError("cone dimension must be positive")
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if self.kind != "psd" or mask.shape != (self.dim, self.dim) or not np.array_equal(mask, mask.T):
                raise InputError("nonneg mask must be a symmetric order x order array on a psd cone")
            object.__setattr__(self, "mask", mask if mask.any() else None)

    @property
    def size(self) -> int:
        return svec_size(self.dim) if self.kind == "psd" else self.dim

    @property
    def is_dnn(self) -> bool:
        return self.mask is not None

    def to_json(self) -> dict:
        d = {"kind": self.kind, "dim": self.dim}
        if self.mask is not None:
            d["mask"] = np.argwhere(np.triu(self.mask, 1)).tolist()
        return d


def cone_represent(kinds) -> tuple[ConeTag, str]:
    """Representation of CPP over a product of R_+ and R coordinates.

    The sign-constrained pairs get an entrywise nonneg mask. CPP(R_+^p x R^q)
    equals this PSD cone with a DNN leading block when p <= 4, and is
    strictly contained in it otherwise.
    """
    kinds = list(kinds)
    if not kinds:
        raise InputError("empty ground cone")
    for k in kinds:
        if k not in CONE_KINDS:
            raise InputError(f"unsupported ground cone {k!r}")
    nn = np.array([k == NONNEG for k in kinds])
    mask = np.outer(nn, nn)
    np.fill_diagonal(mask, False)
    flag = EXACT if nn.sum() <= DNN_EXACT_MAX else OUTER
    return ConeTag("psd", len(kinds), mask if mask.any() else None), flag


@dataclass
class ConicProgram:
    """min c'v + offset  s.t.  A v = b,  v in cones[0] x cones[1] x ...

    ``ranges`` names the variable slice of every cone block; ``maps`` sends
    v to the flattened lifted quantities (``x``, ``X``, ``y[i]``, ``Z[i]``,
    ``Y[i]``, ``W[i]``, ``corner``) with ``shapes`` giving their shapes.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cones: list
    offset: float = 0.0
    ranges: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict)
    shapes: dict = field(default_factory=dict)
    row_names: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    kind: str = "outer"
    method: str = ""

    def __post_init__(self):
        n = sum(k.size for k in self.cones)
        if self.c.shape != (n,) or self.A.shape != (self.b.size, n):
            raise DimensionError(f"program shapes c {self.c.shape}, A {self.A.shape}, b {self.b.shape} vs n={n}")
        spans = sorted(self.ranges.values())
        for (a0, a1), (b0, _) in zip(spans, spans[1:]):
            if b0 < a1:
                raise DimensionError("variable ranges overlap")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def all_exact(self) -> bool:
        return all(f == EXACT for f in self.flags)

    @property
    def valid_lower(self) -> bool:
        return self.kind == "outer"

    @property
    def valid_upper(self) -> bool:
        return self.kind == "inner" and self.all_exact

    def objective(self, v) -> float:
        return float(self.c @ v + self.offset)

    def value_of(self, name: str, v) -> np.ndarray:
        return (self.maps[name] @ v).reshape(self.shapes[name])

    def cone_slices(self):
        out, start = [], 0
        for k in self.cones:
            out.append((k, slice(start, start + k.size)))
            start += k.size
        return out

    def to_json(self) -> dict:
        return {"method": self.method, "kind": self.kind, "flags": self.flags, "offset": self.offset,
                "c": self.c.tolist(), "A": self.A.tolist(), "b": self.b.tolist(), "rows": self.row_names,
                "cones": [k.to_json() for k in self.cones],
                "ranges": {k: list(v) for k, v in self.ranges.items()}}

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


# ---------------------------------------------------------------- layout

class _Layout:
    """Allocates PSD blocks and produces entry maps into their svec storage."""

    def __init__(self):
        self.cones, self.flags, self.ranges = [], [], {}
        self.offsets = []
        self.n = 0

    def add_psd(self, name, kinds, plain=False):
        tag, flag = cone_represent(kinds)
        if plain:
            tag = ConeTag("psd", tag.dim)
        self.cones.append(tag)
        self.flags.append(flag)
        self.offsets.append(self.n)
        self.ranges[name] = (self.n, self.n + tag.size)
        self.n += tag.size
        return len(self.cones) - 1

    def entries(self, block, rows, cols) -> np.ndarray:
        """Map of shape (len(rows)*len(cols), n) reading block[rows][:, cols]."""
        q = self.cones[block].dim
        idx = np.zeros((q, q), dtype=int)
        iu, ju = np.triu_indices(q)
        idx[iu, ju] = np.arange(iu.size)
        idx[ju, iu] = idx[iu, ju]
        E = np.zeros((len(rows) * len(cols), self.n))
        off = self.offsets[block]
        for a, i in enumerate(rows):
            for b_, j in enumerate(cols):
                E[a * len(cols) + b_, off + idx[i, j]] = 1.0 if i == j else 1.0 / SQRT2
        return E


def _sym_rows(E, q):
    """Rows of an order-q dense matrix map restricted to the upper triangle."""
    iu, ju = np.triu_indices(q)
    return E[iu * q + ju]


def _assemble(inst: StructuredQCQP, lay: _Layout, maps: dict, extra=(), homogenized=True,
              method="", kind="outer") -> ConicProgram:
    n1, n2, S = inst.n1, inst.n2, inst.S
    rows, rhs, names = [], [], []

    def add(row, value, name):
        rows.append(row)
        rhs.append(value)
        names.append(name)

    if homogenized:
        add(maps["corner"][0], 1.0, "corner")
        for i in range(S):
            for j in range(inst.r[i].size):
                f, g, r = inst.F[i][j], inst.G[i][j], inst.r[i][j]
                add(f @ maps["x"] + g @ maps[f"y[{i}]"], r, f"moment[{i}][{j}]")
                add(np.kron(f, f) @ maps["X"] + 2.0 * np.kron(g, f) @ maps[f"Z[{i}]"]
                    + np.kron(g, g) @ maps[f"Y[{i}]"], r * r, f"squared[{i}][{j}]")
    else:
        if np.any(inst.a) or any(np.any(c) for c in inst.c):
            raise InputError("an unhomogenized program cannot carry linear objective terms")
        if any(r.size for r in inst.r) and not _squares_suffice(inst):
            raise InputError("linear rows can only be dropped when they are nonneg on the cones with r > 0")
        for i in range(S):
            for j in range(inst.r[i].size):
                f, g, r = inst.F[i][j], inst.G[i][j], inst.r[i][j]
                add(np.kron(f, f) @ maps["X"] + 2.0 * np.kron(g, f) @ maps[f"Z[{i}]"]
                    + np.kron(g, g) @ maps[f"Y[{i}]"], r * r, f"squared[{i}][{j}]")
    for q in inst.lifted:
        row = np.zeros(lay.n)
        if q.X is not None:
            row += np.ravel(q.X) @ maps["X"]
        if q.x is not None:
            row += q.x @ maps["x"]
        for i, Zc in q.Z.items():
            row += np.ravel(Zc) @ maps[f"Z[{i}]"]
        for i, yc in q.y.items():
            row += yc @ maps[f"y[{i}]"]
        for i, Yc in q.Y.items():
            row += np.ravel(Yc) @ maps[f"Y[{i}]"]
        add(row, q.rhs, q.name)
    for row, value, name in extra:
        add(row, value, name)

    c = np.ravel(inst.A) @ maps["X"]
    if homogenized:
        c = c + inst.a @ maps["x"]
    for i in range(S):
        obj = np.ravel(inst.B[i].T) @ maps[f"Z[{i}]"] + np.ravel(inst.C[i]) @ maps[f"Y[{i}]"]
        if homogenized:
            obj = obj + inst.c[i] @ maps[f"y[{i}]"]
        c = c + inst.p[i] * obj

    shapes = {"corner": (), "x": (n1,), "X": (n1, n1)}
    for i in range(S):
        shapes.update({f"y[{i}]": (n2,), f"Z[{i}]": (n2, n1), f"Y[{i}]": (n2, n2), f"W[{i}]": (1 + n1, 1 + n1)})
    shapes = {k: v for k, v in shapes.items() if k in maps}
    A = np.array(rows) if rows else np.zeros((0, lay.n))
    return ConicProgram(c, A, np.array(rhs, dtype=float), lay.cones, float(inst.constant), lay.ranges,
                        maps, shapes, names, lay.flags, kind, method)


def _squares_suffice(inst):
    """(f, g)'v >= 0 on the cones and r > 0, so the squared row alone gives
    (f, g)'v = r for rank-one points."""
    if inst.cone0 != NONNEG or any(t != NONNEG for t in inst.cones):
        return False
    return all(np.all(r > 0) and np.all(F >= 0) and np.all(G >= 0) for F, G, r in zip(inst.F, inst.G, inst.r))


def _kinds_x(inst):
    return [inst.cone0] * inst.n1


def _kinds_y(inst, i):
    return [inst.cones[i]] * inst.n2


def _hat_maps(maps, Ehat, n1):
    """Split a map of the order-(1+n1) homogenized block into corner, x, X."""
    q = 1 + n1
    idx = np.arange(q * q).reshape(q, q)
    maps["corner"] = Ehat[idx[0, :1]]
    maps["x"] = Ehat[idx[1:, 0]]
    maps["X"] = Ehat[idx[1:, 1:].ravel()]


def _zhat_maps(maps, Ezhat, i, n1, n2):
    """Split a map of Zhat_i = [y_i Z_i] (n2 x (1+n1)) into y_i and Z_i."""
    idx = np.arange(n2 * (1 + n1)).reshape(n2, 1 + n1)
    maps[f"y[{i}]"] = Ezhat[idx[:, 0]]
    maps[f"Z[{i}]"] = Ezhat[idx[:, 1:].ravel()]


# ---------------------------------------------------------------- builders

def build_full_burer(inst: StructuredQCQP, nonneg: bool = True) -> ConicProgram:
    """Single matrix variable over (1, x, y_1, ..., y_S); ``nonneg=False``
    drops the entrywise masks (plain SDP)."""
    n1, n2, S = inst.n1, inst.n2, inst.S
    kinds = [NONNEG] + _kinds_x(inst) + sum((_kinds_y(inst, i) for i in range(S)), [])
    lay = _Layout()
    blk = lay.add_psd("M", kinds, plain=not nonneg)
    hat = list(range(1 + n1))
    maps = {}
    _hat_maps(maps, lay.entries(blk, hat, hat), n1)
    for i in range(S):
        yi = list(range(1 + n1 + i * n2, 1 + n1 + (i + 1) * n2))
        _zhat_maps(maps, lay.entries(blk, yi, hat), i, n1, n2)
        maps[f"Y[{i}]"] = lay.entries(blk, yi, yi)
    return _assemble(inst, lay, maps, method="full_dnn" if nonneg else "full_sdp")


def _scenario_blocks(inst, lay, nonneg, prefix):
    n1 = inst.n1
    out = []
    for i in range(inst.S):
        kinds = [NONNEG] + _kinds_x(inst) + _kinds_y(inst, i)
        out.append(lay.add_psd(f"{prefix}[{i}]", kinds, plain=not nonneg))
    hat = list(range(1 + n1))
    ys = list(range(1 + n1, 1 + n1 + inst.n2))
    return out, hat, ys


def build_cpi(inst: StructuredQCQP, nonneg: bool = True, extra_rows=None) -> ConicProgram:
    """S blocks over (1, x, y_i) whose (1, x) parts are tied together."""
    n1, n2 = inst.n1, inst.n2
    lay = _Layout()
    blocks, hat, ys = _scenario_blocks(inst, lay, nonneg, "block")
    maps = {}
    H0 = lay.entries(blocks[0], hat, hat)
    _hat_maps(maps, H0, n1)
    extra = []
    for i, blk in enumerate(blocks):
        _zhat_maps(maps, lay.entries(blk, ys, hat), i, n1, n2)
        maps[f"Y[{i}]"] = lay.entries(blk, ys, ys)
        if i:
            D = _sym_rows(lay.entries(blk, hat, hat) - H0, 1 + n1)
            extra += [(row, 0.0, f"link[{i}]") for row in D]
    if extra_rows:
        extra += extra_rows(maps, lay.n)
    return _assemble(inst, lay, maps, extra, method="cpi" if nonneg else "cpi_sdp")


def build_cps(inst: StructuredQCQP, fix_zero: bool = False, extra_rows=None) -> ConicProgram:
    """Blocks [W_i Zhat_i'; Zhat_i Y_i] with Xhat = sum_i W_i.

    ``fix_zero`` adds rows forcing Zhat_i = 0 and Y_i = 0.
    """
    n1, n2 = inst.n1, inst.n2
    lay = _Layout()
    blocks, hat, ys = _scenario_blocks(inst, lay, True, "block")
    maps = {}
    Ws = [lay.entries(b, hat, hat) for b in blocks]
    _hat_maps(maps, sum(Ws), n1)
    extra = []
    for i, blk in enumerate(blocks):
        maps[f"W[{i}]"] = Ws[i]
        Ezh = lay.entries(blk, ys, hat)
        _zhat_maps(maps, Ezh, i, n1, n2)
        EY = lay.entries(blk, ys, ys)
        maps[f"Y[{i}]"] = EY
        if fix_zero:
            extra += [(row, 0.0, f"fix_Zhat[{i}]") for row in Ezh]
            extra += [(row, 0.0, f"fix_Y[{i}]") for row in _sym_rows(EY, n2)]
    if extra_rows:
        extra += extra_rows(maps, lay.n)
    return _assemble(inst, lay, maps, extra, method="cps_fixed" if fix_zero else "cps", kind="inner")


def _is_homogeneous(inst):
    return not (any(r.size for r in inst.r) or np.any(inst.a) or any(np.any(c) for c in inst.c))


def build_cbc(inst: StructuredQCQP, homogenized: bool | None = None) -> ConicProgram:
    """Diagonal shared block: Xhat = sum_k x^k e_k e_k', one component per k.

    Component k has blocks [x^k z_i^k'; z_i^k Y_i^k] over R_+ x K_i for
    every scenario, all with the same corner x^k. Homogeneous instances
    (no linear rows or terms, e.g. F3) drop the border and use X itself;
    otherwise the leading coordinate of Xhat is one more component.
    """
    if inst.cone0 not in CONE_KINDS:
        raise InputError(f"CBC needs an orthant or free K_0, got {inst.cone0!r}")
    n1, n2, S = inst.n1, inst.n2, inst.S
    if homogenized is None:
        homogenized = not _is_homogeneous(inst)
    kdim = 1 + n1 if homogenized else n1
    lay = _Layout()
    blocks = [[lay.add_psd(f"cell[{k},{i}]", [NONNEG] + _kinds_y(inst, i)) for i in range(S)] for k in range(kdim)]
    n = lay.n
    Ehat = np.zeros((kdim * kdim, n))
    Ezh = [np.zeros((n2 * kdim, n)) for _ in range(S)]
    EY = [np.zeros((n2 * n2, n)) for _ in range(S)]
    extra = []
    ys = list(range(1, 1 + n2))
    for k in range(kdim):
        corner0 = lay.entries(blocks[k][0], [0], [0])
        Ehat[k * kdim + k] = corner0[0]
        for i in range(S):
            blk = blocks[k][i]
            if i:
                extra.append((lay.entries(blk, [0], [0])[0] - corner0[0], 0.0, f"corner_link[{k},{i}]"))
            z = lay.entries(blk, ys, [0])
            for l in range(n2):
                Ezh[i][l * kdim + k] = z[l]
            EY[i] += lay.entries(blk, ys, ys)
    maps = {}
    if homogenized:
        _hat_maps(maps, Ehat, n1)
        for i in range(S):
            _zhat_maps(maps, Ezh[i], i, n1, n2)
    else:
        maps["X"] = Ehat
        for i in range(S):
            maps[f"Z[{i}]"] = Ezh[i]
    for i in range(S):
        maps[f"Y[{i}]"] = EY[i]
    return _assemble(inst, lay, maps, extra, homogenized=homogenized, method="cbc", kind="inner")


def build_ddc(inst: StructuredQCQP, cells=None, homogenized: bool = True) -> ConicProgram:
    """Cells (k, s) over (1, x, y_s[k]): Xhat = sum of the cell heads,
    Zhat_s row k and Y_s[k, k] come from cell (k, s) alone.

    With ``homogenized=False`` the cells run over (x, y_s[k]) and only the
    squared linear rows are kept, which needs rows that are nonneg on the
    cones (F1's simplex rows are).
    """
    n1, n2, S = inst.n1, inst.n2, inst.S
    for t in inst.cones:
        if t not in CONE_KINDS:
            raise InputError(f"DDC needs orthant or free scenario cones, got {t!r}")
    cells = [(k, s) for s in range(S) for k in range(n2)] if cells is None else sorted(set(cells))
    if not cells:
        raise InputError("DDC needs at least one cell")
    for k, s in cells:
        if not (0 <= k < n2 and 0 <= s < S):
            raise InputError(f"cell {(k, s)} outside 0..{n2 - 1} x 0..{S - 1}")
    h = 1 if homogenized else 0
    lay = _Layout()
    ids = {(k, s): lay.add_psd(f"cell[{k},{s}]", [NONNEG] * h + _kinds_x(inst) + [inst.cones[s]])
           for k, s in cells}
    n = lay.n
    hat = list(range(h + n1))
    last = [h + n1]
    Ehat = sum(lay.entries(b, hat, hat) for b in ids.values())
    Ezh = [np.zeros((n2 * (h + n1), n)) for _ in range(S)]
    EY = [np.zeros((n2 * n2, n)) for _ in range(S)]
    for (k, s), b in ids.items():
        Ezh[s][k * (h + n1):(k + 1) * (h + n1)] = lay.entries(b, last, hat)
        EY[s][k * n2 + k] = lay.entries(b, last, last)[0]
    maps = {}
    if homogenized:
        _hat_maps(maps, Ehat, n1)
        for s in range(S):
            _zhat_maps(maps, Ezh[s], s, n1, n2)
    else:
        maps["X"] = Ehat
        for s in range(S):
            maps[f"Z[{s}]"] = Ezh[s]
    for s in range(S):
        maps[f"Y[{s}]"] = EY[s]
    return _assemble(inst, lay, maps, homogenized=homogenized, method="ddc" if homogenized else "ddc_sq",
                     kind="inner")


def binarity_rows(inst):
    """diag(X) = x, valid when x is binary."""
    def rows(maps, n):
        n1 = inst.n1
        return [(maps["X"][j * n1 + j] - maps["x"][j], 0.0, f"binarity[{j}]") for j in range(n1)]
    return rows


def share_rows(inst):
    """trace(Y_i) + x_i = 1 for every group.

    Valid for F2: x_i = 1 forces y_i = 0, so ||y_i||^2 <= 1 - x_i, and both
    sides sum to 1 over the groups. Without it the zero x_i-columns of Z_i
    can cancel across generators and the CPS value drops below the optimum.
    """
    def rows(maps, n):
        tr = np.ravel(np.eye(inst.n2))
        return [(tr @ maps[f"Y[{i}]"] + maps["x"][i], 1.0, f"share[{i}]") for i in range(inst.S)]
    return rows


def build_f2_cmp(inst: StructuredQCQP, variant: str = "cpi", binarity: bool = True,
                 shares: bool = True) -> ConicProgram:
    """F2 relaxation: e'x = S-1 with its square, the sphere on sum trace(Y_i),
    zero x_i-columns of Z_i, trace(Y_i) + x_i = 1 and optionally diag(X) = x."""
    if inst.family != "F2":
        raise InputError("build_f2_cmp needs an F2 instance")
    parts = ([binarity_rows(inst)] if binarity else []) + ([share_rows(inst)] if shares else [])
    extra = (lambda maps, n: [r for f in parts for r in f(maps, n)]) if parts else None
    if variant == "cpi":
        cp = build_cpi(inst, extra_rows=extra)
    elif variant == "cps":
        cp = build_cps(inst, extra_rows=extra)
    else:
        raise InputError(f"unknown F2 variant {variant!r}")
    cp.method = f"f2_{variant}"
    return cp


BUILDERS = {
    "full_sdp": lambda inst: build_full_burer(inst, nonneg=False),
    "full_dnn": lambda inst: build_full_burer(inst, nonneg=True),
    "cpi": build_cpi,
    "cpi_sdp": lambda inst: build_cpi(inst, nonneg=False),
    "cps": build_cps,
    "cps_fixed": lambda inst: build_cps(inst, fix_zero=True),
    "cbc": build_cbc,
    "ddc": build_ddc,
    "ddc_sq": lambda inst: build_ddc(inst, homogenized=False),
}


def build(inst: StructuredQCQP, method: str) -> ConicProgram:
    """Builder dispatch; F2 instances route cpi/cps to their own program."""
    if inst.family == "F2" and method in ("cpi", "cps"):
        return build_f2_cmp(inst, method)
    try:
        return BUILDERS[method](inst)
    except KeyError:
        raise InputError(f"unknown method {method!r}; expected one of {sorted(BUILDERS)}") from None


# ---------------------------------------------------------------- lift / extract

def lift_blocks(cp: ConicProgram, blocks) -> np.ndarray:
    """Stack dense PSD block values into the variable vector."""
    if len(blocks) != len(cp.cones):
        raise DimensionError(f"{len(blocks)} blocks for {len(cp.cones)} cones")
    return np.concatenate([svec(B) for B in blocks])


def _cell_index(cp, prefix):
    names = [name for name in cp.ranges]
    return {name: i for i, name in enumerate(names) if name.startswith(prefix)}


def lift(cp: ConicProgram, inst: StructuredQCQP, cand: CandidateSolution) -> np.ndarray:
    """Rank-one lift of a candidate into the program's variables.

    Outer programs always admit it. Inner programs only admit candidates
    with matching structure (CPS and DDC: at most one scenario with y_i != 0,
    DDC also a single nonzero coordinate there; CBC: at most one nonzero
    x coordinate, nonneg); other candidates raise PreconditionError.
    """
    x, ys = cand.x, cand.y
    n1, n2, S = inst.n1, inst.n2, inst.S
    u = np.concatenate([[1.0], x])
    base = cp.method.split("_")[-1] if cp.method.startswith("f2_") else cp.method
    if base in ("full_sdp", "full_dnn"):
        w = np.concatenate([u, *ys])
        return lift_blocks(cp, [np.outer(w, w)])
    if base in ("cpi", "cpi_sdp"):
        return lift_blocks(cp, [np.outer(np.r_[u, y], np.r_[u, y]) for y in ys])
    active = [i for i in range(S) if np.any(ys[i])]
    if base in ("cps", "cps_fixed"):
        if len(active) > 1 or (base == "cps_fixed" and active):
            raise PreconditionError("CPS lift needs at most one scenario with y_i != 0")
        s = active[0] if active else 0
        out = []
        for i in range(S):
            w = np.r_[u, ys[i]] if i == s else np.r_[np.zeros(1 + n1), ys[i]]
            out.append(np.outer(w, w))
        return lift_blocks(cp, out)
    if base == "ddc":
        if len(active) > 1:
            raise PreconditionError("DDC lift needs at most one scenario with y_i != 0")
        s = active[0] if active else 0
        nz = np.flatnonzero(ys[s])
        if nz.size > 1:
            raise PreconditionError("DDC lift needs y_s with a single nonzero coordinate")
        k = int(nz[0]) if nz.size else 0
        cells = _cell_index(cp, "cell[")
        target = f"cell[{k},{s}]"
        if target not in cells:
            raise PreconditionError(f"{target} is not among the selected cells")
        out = [np.zeros((n1 + 2, n1 + 2)) for _ in cp.cones]
        w = np.r_[u, ys[s][k]]
        out[cells[target]] = np.outer(w, w)
        return lift_blocks(cp, out)
    if base == "ddc_sq":
        # without a corner, x and y cannot both be active
        cells = _cell_index(cp, "cell[")
        out = [np.zeros((n1 + 1, n1 + 1)) for _ in cp.cones]
        if not active:
            out[0][:n1, :n1] = np.outer(x, x)
            return lift_blocks(cp, out)
        if np.any(x):
            raise PreconditionError("unhomogenized DDC lift needs x = 0 when some y_i != 0")
        for s in active:
            nz = np.flatnonzero(ys[s])
            if nz.size > 1:
                raise PreconditionError("DDC lift needs every y_s with a single nonzero coordinate")
            target = f"cell[{int(nz[0])},{s}]"
            if target not in cells:
                raise PreconditionError(f"{target} is not among the selected cells")
            out[cells[target]][n1, n1] = ys[s][nz[0]] ** 2
        return lift_blocks(cp, out)
    if base == "cbc":
        homogenized = "x" in cp.maps
        v = u if homogenized else x
        nz = np.flatnonzero(v)
        if nz.size > 1 or (nz.size and v[nz[0]] < 0):
            raise PreconditionError("CBC lift needs a single nonzero, nonnegative shared coordinate")
        k = int(nz[0]) if nz.size else 0
        cells = _cell_index(cp, "cell[")
        out = [np.zeros((n2 + 1, n2 + 1)) for _ in cp.cones]
        for i in range(S):
            w = np.r_[v[k], ys[i]]
            out[cells[f"cell[{k},{i}]"]] = np.outer(w, w)
        return lift_blocks(cp, out)
    raise InputError(f"no lift rule for method {cp.method!r}")


def extract(cp: ConicProgram, v) -> dict:
    """All lifted quantities of a program point as dense arrays."""
    return {name: cp.value_of(name, v) for name in cp.maps}


def extract_candidate(cp: ConicProgram, inst: StructuredQCQP, v) -> CandidateSolution:
    """Border (x, y_i) of a solution.

    Programs without a border read it off the row vectors when a single
    row per scenario fixes the scale (rank-one M_i = w w' with
    (f, g)'w = r gives w = M_i (f; g) / r); otherwise they fall back to the
    scaled leading eigenvector of the arrowhead PSD completion.
    """
    vals = extract(cp, v)
    if "x" in vals:
        return CandidateSolution(vals["x"], tuple(vals[f"y[{i}]"] for i in range(inst.S)))
    if all(r.size == 1 and r[0] != 0.0 for r in inst.r):
        return _row_candidate(vals, inst)
    return _eigen_candidate(vals, inst)


def _row_candidate(vals, inst):
    xs, ys = [], []
    for i in range(inst.S):
        X, Z, Y = vals["X"], vals[f"Z[{i}]"], vals[f"Y[{i}]"]
        M = np.block([[X, Z.T], [Z, Y]])
        w = M @ np.concatenate([inst.F[i][0], inst.G[i][0]]) / inst.r[i][0]
        xs.append(w[:inst.n1])
        ys.append(w[inst.n1:])
    return CandidateSolution(np.mean(xs, axis=0), tuple(ys))


def _eigen_candidate(vals, inst):
    from .completion import psd_complete_arrowhead
    from .components import ConnectedComponents, gamma

    n1, n2 = inst.n1, inst.n2
    cc = ConnectedComponents(vals["X"], tuple(vals[f"Z[{i}]"] for i in range(inst.S)),
                             tuple(vals[f"Y[{i}]"] for i in range(inst.S)))
    try:
        full = psd_complete_arrowhead(cc)
    except PreconditionError:
        full = gamma(cc)
    lam, Q = np.linalg.eigh(full)
    w = Q[:, -1] * np.sqrt(max(lam[-1], 0.0))
    if w[n1:].sum() < 0:
        # prefer the sign that agrees with the nonneg scenario cones
        w = -w
    return CandidateSolution(w[:n1], tuple(w[n1 + i * n2:n1 + (i + 1) * n2] for i in range(inst.S)))
