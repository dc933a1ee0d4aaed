"""Lower bounds, upper bounds, oracles and gap reports.

Gaps are percentages relative to the CPI lower bound:

    gap = 100 * (upper - lower) / |lower|      (denominator 1 if |lower| < 1e-6)

and an instance counts as solved once the gap is below 0.01%.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionError, InputError
from .linalg import trust_region_sphere
from .model import (CandidateSolution, StructuredQCQP, check_feasible, eval_objective, f2_group_value,
                    make_instance, repair)
from .relax import build, extract_candidate
from .solver import SUSPECTED_INFEASIBLE, SUSPECTED_UNBOUNDED, SolveSettings, solve

LOWER_METHODS = ("full_sdp", "full_dnn", "cpi")
INNER_METHOD = {"F1": "ddc", "F2": "cps", "F3": "cbc"}
# ddc_sq is left out on purpose: without the corner the squared rows do not
# pin each generator to its scenario row, so its value can undercut the optimum
INNER_METHODS = ("ddc", "cbc", "cps")
SOLVED_GAP = 0.01
ORACLE_F1_MAX = 12


@dataclass
class Bound:
    """One program solve: value, status and timings (seconds)."""

    method: str
    value: float
    status: str
    model_time: float
    solve_time: float
    iterations: int
    exact: bool
    cp: object = field(default=None, repr=False)
    result: object = field(default=None, repr=False)


def _run(inst, method, settings):
    t0 = time.perf_counter()
    cp = build(inst, method)
    t1 = time.perf_counter()
    res = solve(cp, settings)
    val = -np.inf if res.status == SUSPECTED_UNBOUNDED else np.inf if res.status == SUSPECTED_INFEASIBLE \
        else res.objective
    return Bound(method, float(val), res.status, t1 - t0, res.solve_time, res.iterations, cp.all_exact, cp, res)


def lower_bound(inst: StructuredQCQP, method: str = "cpi", settings: SolveSettings | None = None) -> Bound:
    """Solve an outer program. A certified recession ray gives value -inf."""
    if method not in LOWER_METHODS:
        raise InputError(f"{method!r} is not a lower-bound method; expected one of {LOWER_METHODS}")
    return _run(inst, method, settings)


def inner_value(inst: StructuredQCQP, method: str | None = None, settings: SolveSettings | None = None) -> Bound:
    method = method or INNER_METHOD.get(inst.family)
    if method not in INNER_METHODS:
        raise InputError(f"{method!r} is not an inner method; expected one of {INNER_METHODS}")
    return _run(inst, method, settings)


def upper_bound(inst: StructuredQCQP, source: Bound):
    """Read the border of a solve, repair it and evaluate.

    Returns ``(value, candidate)``; the candidate is feasible for the
    original problem, so the value is a valid upper bound. Unbounded and
    infeasible solves carry no usable point and give ``(nan, None)``.
    """
    if source.status in (SUSPECTED_UNBOUNDED, SUSPECTED_INFEASIBLE):
        return float("nan"), None
    cand = repair(inst, extract_candidate(source.cp, inst, source.result.x))
    return eval_objective(inst, cand), cand


# ---------------------------------------------------------------- oracles

def _f1_quadratic(inst):
    """Objective as v'Qv + h'v over v = (x; y_1; ...; y_S) and the rows E v = 1."""
    n1, n2, S = inst.n1, inst.n2, inst.S
    N = n1 + S * n2
    Q = np.zeros((N, N))
    Q[:n1, :n1] = inst.A
    h = np.zeros(N)
    h[:n1] = inst.a
    E = np.zeros((S, N))
    E[:, :n1] = 1.0
    for i in range(S):
        sl = slice(n1 + i * n2, n1 + (i + 1) * n2)
        Q[:n1, sl] = 0.5 * inst.p[i] * inst.B[i]
        Q[sl, :n1] = Q[:n1, sl].T
        Q[sl, sl] = inst.p[i] * inst.C[i]
        h[sl] = inst.p[i] * inst.c[i]
        E[i, sl] = 1.0
    return Q, h, E


def _split(inst, v):
    n1, n2 = inst.n1, inst.n2
    return CandidateSolution(v[:n1], tuple(v[n1 + i * n2:n1 + (i + 1) * n2] for i in range(inst.S)))


def _check_f1(inst):
    if inst.family != "F1":
        raise InputError(f"oracle_f1 needs an F1 instance, got {inst.family}")


def oracle_f1(inst: StructuredQCQP, return_point: bool = False):
    """Global optimum of a tiny F1 instance by support enumeration.

    The minimum over the polytope is a stationary point of the objective
    restricted to the relative interior of some face. Every support pattern
    is tried: the equality-constrained KKT system on that face is solved in
    the least-squares sense and feasible points are kept. Singular faces
    are fine, since a flat direction leads to a smaller face which is also
    enumerated.
    """
    _check_f1(inst)
    n1, n2, S = inst.n1, inst.n2, inst.S
    N = n1 + S * n2
    if N > ORACLE_F1_MAX:
        raise DimensionError(f"oracle_f1 enumerates 2^{N} faces; refusing above n1 + S*n2 = {ORACLE_F1_MAX}")
    Q, h, E = _f1_quadratic(inst)
    groups = [np.arange(n1)] + [n1 + i * n2 + np.arange(n2) for i in range(S)]
    best, best_v = np.inf, None
    for bits in itertools.product((False, True), repeat=N):
        T = np.flatnonzero(bits)
        if T.size == 0:
            continue
        if not np.any(np.isin(groups[0], T)):
            # with x = 0 every scenario needs its own support
            if not all(np.any(np.isin(g, T)) for g in groups[1:]):
                continue
        ET = E[:, T]
        K = np.block([[2.0 * Q[np.ix_(T, T)], -ET.T], [ET, np.zeros((S, S))]])
        rhs = np.concatenate([-h[T], np.ones(S)])
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        if np.linalg.norm(K @ sol - rhs) > 1e-9 * (1.0 + np.linalg.norm(rhs)):
            continue
        vT = sol[:T.size]
        if vT.min() < -1e-12:
            continue
        v = np.zeros(N)
        v[T] = np.maximum(vT, 0.0)
        if np.abs(E @ v - 1.0).max() > 1e-9:
            continue
        val = float(v @ Q @ v + h @ v)
        if val < best:
            best, best_v = val, v
    best += inst.constant
    if return_point:
        return best, _split(inst, best_v)
    return best


def oracle_f1_multistart(inst: StructuredQCQP, starts: int = 100, seed: int = 0) -> float:
    """Best local minimum (SLSQP) from random simplex starts; heuristic."""
    _check_f1(inst)
    Q, h, E = _f1_quadratic(inst)
    N = Q.shape[0]
    rng = np.random.default_rng(seed)
    fun = lambda v: v @ Q @ v + h @ v
    jac = lambda v: 2.0 * Q @ v + h
    cons = {"type": "eq", "fun": lambda v: E @ v - 1.0, "jac": lambda v: E}
    best = np.inf
    for _ in range(starts):
        v0 = rng.exponential(size=N)
        v0 /= (E @ v0).max()
        res = minimize(fun, v0, jac=jac, method="SLSQP", bounds=[(0.0, None)] * N, constraints=[cons],
                       options={"maxiter": 500, "ftol": 1e-12})
        v = np.maximum(res.x, 0.0)
        if np.abs(E @ v - 1.0).max() < 1e-7:
            best = min(best, fun(v))
    return float(best + inst.constant)


def oracle_f2(inst: StructuredQCQP, return_point: bool = False):
    """Exact F2 optimum: complementarity leaves one active group j."""
    if inst.family != "F2":
        raise InputError(f"oracle_f2 needs an F2 instance, got {inst.family}")
    best = None
    for j in range(inst.S):
        x, y, v = f2_group_value(inst, j)
        if best is None or v < best[0]:
            best = (v, j, x, y)
    v, j, x, y = best
    if return_point:
        ys = [np.zeros(inst.n2) for _ in range(inst.S)]
        ys[j] = y
        return v, CandidateSolution(x, tuple(ys))
    return v


def _f3_x_step(inst, ys):
    """Exact x-minimization with y fixed and ||x||^2 = 1 - ||y||^2."""
    t = sum(float(y @ y) for y in ys)
    r = np.sqrt(max(1.0 - t, 0.0))
    g = inst.a + sum(inst.p[i] * inst.B[i] @ ys[i] for i in range(inst.S))
    u, _ = trust_region_sphere(r * r * inst.A, r * g)
    return r * u


def oracle_f3(inst: StructuredQCQP, restarts: int = 20, seed: int = 0, iters: int = 200, return_point=False):
    """Multistart alternating minimization on the F3 sphere; heuristic.

    Start 0 has y = 0, the others draw y uniformly. Each round solves for x
    exactly, then takes a projected gradient step in y and renormalizes the
    stacked vector. Starts are a prefix-stable sequence, so more restarts
    never give a worse value.
    """
    if inst.family != "F3":
        raise InputError(f"oracle_f3 needs an F3 instance, got {inst.family}")
    if restarts < 1:
        raise InputError("restarts must be positive")
    rng = np.random.default_rng(seed)
    S, n2 = inst.S, inst.n2
    L = 2.0 * max(max(np.abs(np.linalg.eigvalsh(inst.p[i] * inst.C[i])).max() for i in range(S)), 1e-12)
    best = (np.inf, None)

    def keep(x, ys):
        nonlocal best
        cand = CandidateSolution(x, tuple(ys))
        if check_feasible(inst, cand, 1e-9):
            return
        val = eval_objective(inst, cand)
        if val < best[0]:
            best = (val, cand)

    for k in range(restarts):
        ys = [np.zeros(n2) for _ in range(S)]
        if k:
            ys = [rng.random(n2) for _ in range(S)]
            scale = np.sqrt(sum(y @ y for y in ys) / rng.random())
            ys = [y / scale for y in ys]
        x = _f3_x_step(inst, ys)
        keep(x, ys)
        prev = np.inf
        for _ in range(iters):
            ys = [np.maximum(ys[i] - (inst.p[i] * (inst.B[i].T @ x + 2.0 * inst.C[i] @ ys[i] + inst.c[i])) / L, 0.0)
                  for i in range(S)]
            nrm = np.sqrt(x @ x + sum(y @ y for y in ys))
            ys = [y / nrm for y in ys]
            x = _f3_x_step(inst, ys)
            keep(x, ys)
            cur = best[0]
            if prev - cur < 1e-13:
                break
            prev = cur
    if return_point:
        return best
    return best[0]


def oracle(inst: StructuredQCQP):
    """(value, level) with level 'exact', 'heuristic' or None."""
    if inst.family == "F1":
        if inst.n1 + inst.S * inst.n2 <= ORACLE_F1_MAX:
            return oracle_f1(inst), "exact"
        return oracle_f1_multistart(inst), "heuristic"
    if inst.family == "F2":
        return oracle_f2(inst), "exact"
    if inst.family == "F3":
        return oracle_f3(inst), "heuristic"
    return float("nan"), None


# ---------------------------------------------------------------- reports

def gap(upper: float, lower: float) -> float:
    if not (np.isfinite(upper) and np.isfinite(lower)):
        return float("nan")
    den = abs(lower) if abs(lower) >= 1e-6 else 1.0
    return 100.0 * (upper - lower) / den


@dataclass(frozen=True)
class ReportConfig:
    lower: tuple = ("cpi",)
    inner: str | None = None
    oracle: bool = True
    settings: SolveSettings = field(default_factory=SolveSettings)


@dataclass
class BoundsReport:
    name: str
    family: str
    seed: int | None
    lower: dict = field(default_factory=dict)
    status: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)
    inner_method: str = ""
    inner: float = float("nan")
    ub: float = float("nan")
    iub: float = float("nan")
    oracle: float = float("nan")
    oracle_level: str | None = None
    solve_time: float = 0.0
    model_time: float = 0.0
    total_time: float = 0.0

    @property
    def cpi(self) -> float:
        return self.lower.get("cpi", float("nan"))

    def gaps(self) -> dict:
        L = self.cpi
        return {"UB": gap(self.ub, L), "I": gap(self.inner, L), "IUB": gap(self.iub, L),
                "oracle": gap(self.oracle, L)}

    def solved(self) -> dict:
        return {k: bool(np.isfinite(v) and v < SOLVED_GAP) for k, v in self.gaps().items()}

    def rows(self) -> list:
        """One CSV row per (instance, method)."""
        out = []
        base = {"instance": self.name, "family": self.family, "seed": self.seed}
        for m, v in self.lower.items():
            out.append({**base, "method": m, "role": "lower", "value": v, "status": self.status[m],
                        "exact": self.exact[m], "gap": ""})
        g = self.gaps()
        if self.inner_method:
            out.append({**base, "method": self.inner_method, "role": "inner", "value": self.inner,
                        "status": self.status[self.inner_method], "exact": self.exact[self.inner_method],
                        "gap": g["I"]})
            out.append({**base, "method": f"{self.inner_method}_repair", "role": "IUB", "value": self.iub,
                        "status": "", "exact": "", "gap": g["IUB"]})
        if "cpi" in self.lower:
            out.append({**base, "method": "cpi_repair", "role": "UB", "value": self.ub, "status": "",
                        "exact": "", "gap": g["UB"]})
        if self.oracle_level:
            out.append({**base, "method": "oracle", "role": self.oracle_level, "value": self.oracle,
                        "status": "", "exact": "", "gap": g["oracle"]})
        return out


def gap_report(inst: StructuredQCQP, config: ReportConfig | None = None) -> BoundsReport:
    config = config or ReportConfig()
    t0 = time.perf_counter()
    rep = BoundsReport(inst.type_name, inst.family, inst.seed)

    def account(b):
        rep.status[b.method] = b.status
        rep.exact[b.method] = b.exact
        rep.solve_time += b.solve_time
        rep.model_time += b.model_time

    for m in config.lower:
        b = lower_bound(inst, m, config.settings)
        account(b)
        rep.lower[m] = b.value
        if m == "cpi":
            rep.ub, _ = upper_bound(inst, b)
    inner = config.inner or INNER_METHOD.get(inst.family)
    if inner:
        b = inner_value(inst, inner, config.settings)
        account(b)
        rep.inner_method = inner
        rep.inner = b.value
        rep.iub, _ = upper_bound(inst, b)
    if config.oracle:
        rep.oracle, rep.oracle_level = oracle(inst)
    rep.total_time = time.perf_counter() - t0
    return rep


def _job(args):
    family, scheme, n1, n2, S, seed, eps, config = args
    return gap_report(make_instance(family, scheme, n1, n2, S, seed, eps), config)


def run_batch(jobs, config: ReportConfig | None = None, workers: int = 1) -> list:
    """Reports for ``(family, scheme, n1, n2, S, seed, eps)`` tuples, in input order."""
    config = config or ReportConfig()
    args = [(*j, config) for j in jobs]
    if workers <= 1:
        return [_job(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, args))


def aggregate(reports) -> list:
    """Per instance type: mean gaps, solved counts and mean timings."""
    groups = {}
    for r in reports:
        groups.setdefault((r.family, r.name), []).append(r)
    out = []
    for (family, name), rs in groups.items():
        row = {"family": family, "instance": name, "count": len(rs)}
        for k in ("UB", "I", "IUB", "oracle"):
            vals = np.array([r.gaps()[k] for r in rs])
            ok = np.isfinite(vals)
            row[f"{k}_gap"] = float(vals[ok].mean()) if ok.any() else float("nan")
            row[f"{k}_solved"] = int(sum(r.solved()[k] for r in rs))
        for k in ("solve_time", "model_time", "total_time"):
            row[k] = float(np.mean([getattr(r, k) for r in rs]))
        out.append(row)
    return out
