"""Two-stage structured QCQP instances.

    min  x'Ax + a'x + sum_i p_i (x'B_i y_i + y_i'C_i y_i + c_i'y_i) + constant
    s.t. F_i x + G_i y_i = r_i,  x in K_0,  y_i in K_i,
         plus quadratic constraints that are linear in the lifted blocks
         (x, X, y_i, Z_i = y_i x', Y_i = y_i y_i').

Three experiment families sit on top of the two random data schemes:
F1 (simplex per scenario), F2 (one active group on a sphere, binary x) and
F3 (nonneg y and free x on one common sphere).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .components import FREE, NONNEG, CONE_KINDS
from .errors import DimensionError, InputError
from .linalg import trust_region_sphere

FAMILIES = ("F1", "F2", "F3")


@dataclass(frozen=True)
class LiftedConstraint:
    """``<Xc, X> + xc'x + sum_i (<Zc_i, Z_i> + yc_i'y_i + <Yc_i, Y_i>) = rhs``.

    Scenario coefficients are dicts keyed by scenario index; Z coefficients
    are n2 x n1 like Z_i itself. There is no slot for Y_ij with i != j.
    """

    name: str
    rhs: float
    X: np.ndarray | None = None
    x: np.ndarray | None = None
    Z: dict = field(default_factory=dict)
    y: dict = field(default_factory=dict)
    Y: dict = field(default_factory=dict)

    def value(self, x, ys) -> float:
        """Evaluate on the rank-one lift of (x, y)."""
        v = 0.0
        if self.X is not None:
            v += x @ self.X @ x
        if self.x is not None:
            v += self.x @ x
        for i, Zc in self.Z.items():
            v += ys[i] @ Zc @ x
        for i, yc in self.y.items():
            v += yc @ ys[i]
        for i, Yc in self.Y.items():
            v += ys[i] @ Yc @ ys[i]
        return float(v)

    def to_json(self) -> dict:
        out = {"name": self.name, "rhs": self.rhs}
        if self.X is not None:
            out["X"] = np.asarray(self.X).tolist()
        if self.x is not None:
            out["x"] = np.asarray(self.x).tolist()
        for key in ("Z", "y", "Y"):
            d = getattr(self, key)
            if d:
                out[key] = {str(i): np.asarray(v).tolist() for i, v in d.items()}
        return out

    @classmethod
    def from_json(cls, d: dict) -> "LiftedConstraint":
        def arr(v):
            return None if v is None else np.array(v, dtype=float)

        def scen(key):
            return {int(i): np.array(v, dtype=float) for i, v in d.get(key, {}).items()}

        return cls(d["name"], float(d["rhs"]), arr(d.get("X")), arr(d.get("x")),
                   scen("Z"), scen("y"), scen("Y"))


@dataclass(frozen=True)
class ObjectiveData:
    n1: int
    n2: int
    S: int
    A: np.ndarray
    B: tuple
    C: tuple
    a: np.ndarray
    c: tuple
    p: np.ndarray
    scheme: int | None = None
    seed: int | None = None
    eps: float | None = None


@dataclass(frozen=True)
class StructuredQCQP:
    n1: int
    n2: int
    S: int
    A: np.ndarray
    a: np.ndarray
    B: tuple
    C: tuple
    c: tuple
    F: tuple
    G: tuple
    r: tuple
    p: np.ndarray
    cone0: str = NONNEG
    cones: tuple = ()
    lifted: tuple = ()
    constant: float = 0.0
    family: str = "raw"
    scheme: int | None = None
    seed: int | None = None
    eps: float | None = None

    def __post_init__(self):
        n1, n2, S = self.n1, self.n2, self.S
        if min(n1, n2, S) < 1:
            raise DimensionError(f"need n1, n2, S >= 1, got {(n1, n2, S)}")
        A = np.asarray(self.A, dtype=float)
        if A.shape != (n1, n1):
            raise DimensionError(f"A has shape {A.shape}, expected {(n1, n1)}")
        object.__setattr__(self, "A", 0.5 * (A + A.T))
        object.__setattr__(self, "a", _vec(self.a, n1, "a"))
        for name in ("B", "C", "c", "F", "G", "r"):
            if len(getattr(self, name)) != S:
                raise DimensionError(f"{name} needs {S} scenario entries")
        B = tuple(_mat(b, (n1, n2), f"B[{i}]") for i, b in enumerate(self.B))
        C = tuple(_mat(c, (n2, n2), f"C[{i}]") for i, c in enumerate(self.C))
        C = tuple(0.5 * (c + c.T) for c in C)
        c = tuple(_vec(v, n2, f"c[{i}]") for i, v in enumerate(self.c))
        r = tuple(np.asarray(v, dtype=float).ravel() for v in self.r)
        F = tuple(_mat(f, (r[i].size, n1), f"F[{i}]") for i, f in enumerate(self.F))
        G = tuple(_mat(g, (r[i].size, n2), f"G[{i}]") for i, g in enumerate(self.G))
        p = np.asarray(self.p, dtype=float).ravel()
        if p.size != S or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InputError("scenario probabilities must be nonnegative and sum to 1")
        cones = tuple(self.cones) if self.cones else (NONNEG,) * S
        if len(cones) != S or any(t not in CONE_KINDS for t in (self.cone0, *cones)):
            raise InputError(f"bad cone tags {self.cone0!r}, {cones!r}")
        for q in self.lifted:
            if any(not 0 <= i < S for d in (q.Z, q.y, q.Y) for i in d):
                raise DimensionError(f"lifted constraint {q.name} names a missing scenario")
        for name, val in (("B", B), ("C", C), ("c", c), ("F", F), ("G", G), ("r", r)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "cones", cones)
        object.__setattr__(self, "lifted", tuple(self.lifted))
        for arr in (self.A, self.a, p, *B, *C, *c, *F, *G, *r):
            if not np.all(np.isfinite(arr)):
                raise InputError("instance data must be finite")

    @property
    def type_name(self) -> str:
        s = f"{self.n1}_{self.n2}_{self.S}"
        return s if self.scheme is None else f"{s}_{self.scheme}"

    def nonneg_mask(self, i: int) -> np.ndarray:
        return np.array([self.cone0 == NONNEG] * self.n1 + [self.cones[i] == NONNEG] * self.n2)


def _vec(v, n, what):
    v = np.asarray(v, dtype=float).ravel()
    if v.shape != (n,):
        raise DimensionError(f"{what} has length {v.size}, expected {n}")
    return v


def _mat(M, shape, what):
    M = np.asarray(M, dtype=float)
    if M.size == 0 and 0 in shape:
        return M.reshape(shape)
    if M.shape != shape:
        raise DimensionError(f"{what} has shape {M.shape}, expected {shape}")
    return M


@dataclass(frozen=True)
class CandidateSolution:
    x: np.ndarray
    y: tuple

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = tuple(np.asarray(v, dtype=float).ravel() for v in self.y)
        if not (np.all(np.isfinite(x)) and all(np.all(np.isfinite(v)) for v in y)):
            raise InputError("candidate has non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, *self.y])


# ---------------------------------------------------------------- generators

def _uniform_sym(rng, n, hi):
    U = rng.uniform(0.0, hi, size=(n, n))
    U = np.triu(U)
    return U + np.triu(U, 1).T


def _dist(P, Q):
    return np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=-1)


def gen_scheme1(n1: int, n2: int, S: int, eps: float, seed) -> ObjectiveData:
    """Distances between n1 fixed points and n2 uncertain points in the unit
    square; scenario s moves each uncertain point within a square of side
    2*eps around its nominal position."""
    if eps < 0:
        raise InputError(f"eps must be nonnegative, got {eps}")
    rng = np.random.default_rng(seed)
    u = rng.uniform(size=(n1, 2))
    w = rng.uniform(size=(n2, 2))
    A = _dist(u, u)
    B, C = [], []
    for _ in range(S):
        ws = w + rng.uniform(-eps, eps, size=(n2, 2))
        B.append(_dist(u, ws))
        C.append(_dist(ws, ws))
    return ObjectiveData(n1, n2, S, A, tuple(B), tuple(C), np.zeros(n1),
                         tuple(np.zeros(n2) for _ in range(S)), np.full(S, 1.0 / S),
                         scheme=1, seed=seed, eps=float(eps))


def gen_scheme2(n1: int, n2: int, S: int, seed) -> ObjectiveData:
    """A ~ U[0,1], B_i ~ U[0,10], C_i ~ U[0,0.1], symmetric by mirroring."""
    rng = np.random.default_rng(seed)
    A = _uniform_sym(rng, n1, 1.0)
    B = tuple(rng.uniform(0.0, 10.0, size=(n1, n2)) for _ in range(S))
    C = tuple(_uniform_sym(rng, n2, 0.1) for _ in range(S))
    return ObjectiveData(n1, n2, S, A, B, C, np.zeros(n1),
                         tuple(np.zeros(n2) for _ in range(S)), np.full(S, 1.0 / S),
                         scheme=2, seed=seed)


def generate(scheme: int, n1: int, n2: int, S: int, seed, eps: float = 0.1) -> ObjectiveData:
    if scheme == 1:
        return gen_scheme1(n1, n2, S, eps, seed)
    if scheme == 2:
        return gen_scheme2(n1, n2, S, seed)
    raise InputError(f"unknown scheme {scheme!r}")


def build_family(family: str, data: ObjectiveData) -> StructuredQCQP:
    family = family.upper()
    n1, n2, S = data.n1, data.n2, data.S
    base = dict(n1=n1, n2=n2, S=S, A=data.A, a=data.a, B=data.B, C=data.C, c=data.c, p=data.p,
                family=family, scheme=data.scheme, seed=data.seed, eps=data.eps)
    if family == "F1":
        return StructuredQCQP(
            F=tuple(np.ones((1, n1)) for _ in range(S)), G=tuple(np.ones((1, n2)) for _ in range(S)),
            r=tuple(np.ones(1) for _ in range(S)), cone0=NONNEG, cones=(NONNEG,) * S, **base)
    if family == "F2":
        if n1 != S:
            raise DimensionError(f"F2 needs n1 = S, got n1={n1}, S={S}")
        # e'x = S-1 lives in scenario 0; the other scenarios carry no linear rows
        F = (np.ones((1, n1)),) + tuple(np.zeros((0, n1)) for _ in range(S - 1))
        G = (np.zeros((1, n2)),) + tuple(np.zeros((0, n2)) for _ in range(S - 1))
        r = (np.array([S - 1.0]),) + tuple(np.zeros(0) for _ in range(S - 1))
        lifted = [LiftedConstraint("sphere", 1.0, Y={i: np.eye(n2) for i in range(S)})]
        for i in range(S):
            for l in range(n2):
                Zc = np.zeros((n2, n1))
                Zc[l, i] = 1.0
                lifted.append(LiftedConstraint(f"complementarity[{i}][{l}]", 0.0, Z={i: Zc}))
        return StructuredQCQP(F=F, G=G, r=r, cone0=NONNEG, cones=(FREE,) * S, lifted=tuple(lifted), **base)
    if family == "F3":
        lifted = (LiftedConstraint("sphere", 1.0, X=np.eye(n1), Y={i: np.eye(n2) for i in range(S)}),)
        return StructuredQCQP(
            F=tuple(np.zeros((0, n1)) for _ in range(S)), G=tuple(np.zeros((0, n2)) for _ in range(S)),
            r=tuple(np.zeros(0) for _ in range(S)), cone0=FREE, cones=(NONNEG,) * S,
            lifted=lifted, constant=1.0, **base)
    raise InputError(f"unknown family {family!r}; expected one of {FAMILIES}")


def objective_data(inst: StructuredQCQP) -> ObjectiveData:
    return ObjectiveData(inst.n1, inst.n2, inst.S, inst.A, inst.B, inst.C, inst.a, inst.c, inst.p,
                         inst.scheme, inst.seed, inst.eps)


def make_instance(family: str, scheme: int, n1: int, n2: int, S: int, seed, eps: float = 0.1):
    return build_family(family, generate(scheme, n1, n2, S, seed, eps))


# ---------------------------------------------------------------- evaluation

def _check_candidate(inst, cand):
    if cand.x.size != inst.n1 or len(cand.y) != inst.S or any(v.size != inst.n2 for v in cand.y):
        raise DimensionError("candidate does not match instance dimensions")


def eval_objective(inst: StructuredQCQP, cand: CandidateSolution) -> float:
    _check_candidate(inst, cand)
    x = cand.x
    val = x @ inst.A @ x + inst.a @ x + inst.constant
    for i, y in enumerate(cand.y):
        val += inst.p[i] * (x @ inst.B[i] @ y + y @ inst.C[i] @ y + inst.c[i] @ y)
    return float(val)


def violations(inst: StructuredQCQP, cand: CandidateSolution) -> dict:
    """Residual of every constraint group of the original problem."""
    _check_candidate(inst, cand)
    x, ys = cand.x, cand.y
    out = {}
    neg = [-x.min(initial=0.0)] if inst.cone0 == NONNEG else []
    neg += [-y.min(initial=0.0) for y, t in zip(ys, inst.cones) if t == NONNEG]
    out["cone"] = max([0.0, *neg])
    fam = inst.family
    if fam == "F1":
        out["simplex"] = max(abs(x.sum() + y.sum() - 1.0) for y in ys)
    elif fam == "F2":
        out["binarity"] = float(np.max(np.minimum(np.abs(x), np.abs(x - 1.0))))
        out["cardinality"] = abs(x.sum() - (inst.S - 1))
        out["sphere"] = abs(sum(y @ y for y in ys) - 1.0)
        out["complementarity"] = max(float(np.max(np.abs(ys[i] * x[i]))) for i in range(inst.S))
    elif fam == "F3":
        out["sphere"] = abs(x @ x + sum(y @ y for y in ys) - 1.0)
    else:
        out["linear"] = max([0.0] + [float(np.max(np.abs(inst.F[i] @ x + inst.G[i] @ ys[i] - inst.r[i]), initial=0.0))
                                     for i in range(inst.S)])
        for q in inst.lifted:
            out[q.name] = abs(q.value(x, ys) - q.rhs)
    return out


def check_feasible(inst: StructuredQCQP, cand: CandidateSolution, tol: float = 1e-8) -> dict:
    """Constraint groups violated by more than ``tol``; empty means feasible."""
    return {k: v for k, v in violations(inst, cand).items() if v > tol}


# ---------------------------------------------------------------- repair

def _repair_f1(inst, x, ys):
    """Best of a proportional rescale and two vertex roundings.

    Relaxation points are often mixtures of several optimal vertices, which
    a rescale keeps mixed; the roundings put all mass on the heaviest x
    coordinate, or on the heaviest coordinate of every y_i.
    """
    x = np.maximum(x, 0.0)
    ys = [np.maximum(y, 0.0) for y in ys]
    options = [_rescale_f1(inst, x, ys)]
    if x.any():
        xv = np.zeros(inst.n1)
        xv[int(np.argmax(x))] = 1.0
        options.append((xv, [np.zeros(inst.n2) for _ in ys]))
    if all(y.any() for y in ys):
        yv = [np.zeros(inst.n2) for _ in ys]
        for v, y in zip(yv, ys):
            v[int(np.argmax(y))] = 1.0
        options.append((np.zeros(inst.n1), yv))
    vals = [eval_objective(inst, CandidateSolution(a, tuple(b))) for a, b in options]
    return options[int(np.argmin(vals))]


def _rescale_f1(inst, x, ys):
    t = x.sum()
    if t == 0.0 and all(y.sum() == 0.0 for y in ys):
        x = np.zeros(inst.n1)
        x[0] = 1.0
        return x, [np.zeros(inst.n2) for _ in ys]
    if t >= 1.0:
        return x / t, [np.zeros(inst.n2) for _ in ys]
    out = []
    for y in ys:
        s = y.sum()
        if s > 0.0:
            out.append(y * ((1.0 - t) / s))
        else:
            e = np.zeros(inst.n2)
            e[0] = 1.0 - t
            out.append(e)
    return x, out


def f2_group_value(inst: StructuredQCQP, j: int):
    """Best value with group j active: x = e - e_j, y_j on the unit sphere."""
    x = np.ones(inst.n1)
    x[j] = 0.0
    p = inst.p[j]
    y, v = trust_region_sphere(p * inst.C[j], p * (inst.B[j].T @ x + inst.c[j]))
    return x, y, float(x @ inst.A @ x + inst.a @ x + inst.constant + v)


def _repair_f2(inst, x, ys):
    order = np.argsort(-x, kind="stable")
    j = int(order[-1])
    xb, yj, _ = f2_group_value(inst, j)
    out = [np.zeros(inst.n2) for _ in ys]
    out[j] = yj
    return xb, out


def _repair_f3(inst, x, ys):
    ys = [np.maximum(y, 0.0) for y in ys]
    v = np.concatenate([x, *ys])
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        x = np.zeros(inst.n1)
        x[0] = 1.0
        return x, [np.zeros(inst.n2) for _ in ys]
    return x / nrm, [y / nrm for y in ys]


def repair(inst: StructuredQCQP, cand: CandidateSolution) -> CandidateSolution:
    """Map a candidate onto the family's feasible set.

    A feasible input is returned unchanged unless the family rule finds a
    strictly better point, so repair never worsens a feasible candidate.
    The rule is reapplied while it keeps improving, which makes repair
    idempotent.
    """
    _check_candidate(inst, cand)
    fixers = {"F1": _repair_f1, "F2": _repair_f2, "F3": _repair_f3}
    if inst.family not in fixers:
        raise InputError(f"no repair rule for family {inst.family!r}")
    fix = fixers[inst.family]
    cur = None if check_feasible(inst, cand, 1e-12) else cand
    nxt = cand
    for _ in range(100):
        x, ys = fix(inst, nxt.x.copy(), [y.copy() for y in nxt.y])
        nxt = CandidateSolution(x, tuple(ys))
        if cur is not None and eval_objective(inst, cur) <= eval_objective(inst, nxt):
            return cur
        cur = nxt
    return cur


# ---------------------------------------------------------------- JSON

def _lst(arrs):
    return [np.asarray(v).tolist() for v in arrs]


def instance_to_json(inst: StructuredQCQP) -> dict:
    d = {"n1": inst.n1, "n2": inst.n2, "S": inst.S, "family": inst.family, "scheme": inst.scheme,
         "seed": inst.seed, "eps": inst.eps, "A": inst.A.tolist(), "a": inst.a.tolist(),
         "B": _lst(inst.B), "C": _lst(inst.C), "c": _lst(inst.c), "p": inst.p.tolist()}
    if inst.family not in FAMILIES:
        d.update({"F": _lst(inst.F), "G": _lst(inst.G), "r": _lst(inst.r), "cone0": inst.cone0,
                  "cones": list(inst.cones), "lifted": [q.to_json() for q in inst.lifted],
                  "constant": inst.constant})
    return d


def instance_from_json(d: dict) -> StructuredQCQP:
    try:
        n1, n2, S = int(d["n1"]), int(d["n2"]), int(d["S"])
        arrs = dict(A=np.array(d["A"], dtype=float), a=np.array(d.get("a", np.zeros(n1)), dtype=float),
                    B=tuple(np.array(b, dtype=float) for b in d["B"]),
                    C=tuple(np.array(c, dtype=float) for c in d["C"]),
                    c=tuple(np.array(c, dtype=float) for c in d.get("c", [np.zeros(n2)] * S)),
                    p=np.array(d.get("p", np.full(S, 1.0 / S)), dtype=float))
        family = d.get("family", "raw") or "raw"
        meta = dict(scheme=d.get("scheme"), seed=d.get("seed"), eps=d.get("eps"))
        if family.upper() in FAMILIES:
            data = ObjectiveData(n1, n2, S, arrs["A"], arrs["B"], arrs["C"], arrs["a"], arrs["c"],
                                 arrs["p"], **meta)
            return build_family(family, data)
        return StructuredQCQP(
            n1=n1, n2=n2, S=S, F=tuple(np.array(f, dtype=float) for f in d["F"]),
            G=tuple(np.array(g, dtype=float) for g in d["G"]),
            r=tuple(np.array(v, dtype=float) for v in d["r"]), cone0=d.get("cone0", NONNEG),
            cones=tuple(d.get("cones", ())), lifted=tuple(LiftedConstraint.from_json(q) for q in d.get("lifted", [])),
            constant=float(d.get("constant", 0.0)), family="raw", **arrs, **meta)
    except KeyError as exc:
        raise InputError(f"instance JSON lacks field {exc}") from None


def save_instance(inst: StructuredQCQP, path):
    with open(path, "w") as fh:
        json.dump(instance_to_json(inst), fh, indent=1)
        fh.write("\n")


def load_instance(path) -> StructuredQCQP:
    try:
        with open(path) as fh:
            return instance_from_json(json.load(fh))
    except FileNotFoundError:
        raise InputError(f"instance file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def with_cones(inst: StructuredQCQP, cone0=None, cones=None) -> StructuredQCQP:
    """Copy of ``inst`` with replaced ground cones."""
    return replace(inst, cone0=cone0 or inst.cone0, cones=tuple(cones) if cones else inst.cones)
