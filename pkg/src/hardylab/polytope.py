"""Linear programming over the local and no-signaling polytopes.

The solver is a dense two-phase primal simplex with Bland's rule, which
precludes cycling on the heavily degenerate systems produced here.  The
local problem is posed in the vertex-weight basis (one variable per
deterministic strategy); the no-signaling problem directly in behavior
entries with a deliberately redundant family of marginal equalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np

from .behavior import BehaviorTensor, Scenario, check_no_signaling, hardy_functionals
from .errors import NumericError, SizeError, ValidationError

FEAS_TOL = 1e-9


@dataclass
class LinearProgram:
    """maximize objective . x subject to rows (coeffs, relation, bound).

    ``bounds[i] = (lo, hi)`` with ``lo=None`` meaning free and ``hi=None``
    unbounded above; the default for every variable is (0, None).
    """

    objective: np.ndarray
    constraints: list = field(default_factory=list)
    bounds: list | None = None

    def add(self, coeffs, relation: str, bound: float):
        if relation not in ("<=", "=", ">="):
            raise ValidationError(f"unknown relation {relation!r}")
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != np.asarray(self.objective).shape:
            raise ValidationError("constraint length does not match objective")
        self.constraints.append((coeffs, relation, float(bound)))


@dataclass(frozen=True)
class LPSolution:
    status: str
    value: float
    assignment: np.ndarray


@dataclass(frozen=True)
class BoundQuery:
    """Noisy Hardy bound query: party count and the uniform error bound."""

    n: int
    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError(f"epsilon = {self.epsilon!r} outside [0, 1]")


class _Unbounded(Exception):
    pass


def _pivot(tab: np.ndarray, basis: list, row: int, col: int):
    tab[row] /= tab[row, col]
    piv = tab[row]
    for r in range(tab.shape[0]):
        if r != row and abs(tab[r, col]) > 1e-13:
            tab[r] -= tab[r, col] * piv
    basis[row] = col


def _bland_loop(tab: np.ndarray, basis: list, max_iter: int, tol: float = 1e-11):
    """Minimise the last tableau row in place; Bland's rule throughout."""
    for _ in range(max_iter):
        red = tab[-1, :-1]
        enter = -1
        for j in range(red.size):
            if red[j] < -tol:
                enter = j
                break
        if enter < 0:
            return
        col = tab[:-1, enter]
        rows = np.where(col > tol)[0]
        if rows.size == 0:
            raise _Unbounded()
        ratios = tab[rows, -1] / col[rows]
        best = ratios.min()
        cand = rows[ratios <= best + 1e-12]
        leave = min(cand, key=lambda r: basis[r])
        _pivot(tab, basis, leave, enter)
    raise NumericError("simplex cycling guard exceeded")


def lp_solve(lp: LinearProgram, max_iter: int | None = None) -> LPSolution:
    """Two-phase primal simplex for small dense linear programs."""
    c = np.asarray(lp.objective, dtype=float)
    nvar = c.size
    bounds = lp.bounds if lp.bounds is not None else [(0.0, None)] * nvar
    if len(bounds) != nvar:
        raise ValidationError("bounds length does not match objective")

    # Shift finite lower bounds to zero, split free variables into x+ - x-.
    shift = np.zeros(nvar)
    split = []
    for i, (lo, hi) in enumerate(bounds):
        if lo is None:
            split.append(i)
        else:
            shift[i] = lo
    ncols = nvar + len(split)

    def expand(vec):
        out = np.zeros(ncols)
        out[:nvar] = vec
        for k, i in enumerate(split):
            out[nvar + k] = -vec[i]
        return out

    rows = []
    for coeffs, rel, bnd in lp.constraints:
        rows.append((expand(coeffs), rel, bnd - float(coeffs @ shift)))
    for i, (lo, hi) in enumerate(bounds):
        if hi is not None:
            e = np.zeros(nvar)
            e[i] = 1.0
            rows.append((expand(e), "<=", hi - shift[i]))

    # Normalise signs so every right-hand side is nonnegative.
    norm_rows = []
    for a, rel, b in rows:
        if b < 0:
            a, b = -a, -b
            rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
        norm_rows.append((a, rel, b))

    m = len(norm_rows)
    nslack = sum(1 for _, rel, _ in norm_rows if rel in ("<=", ">="))
    total = ncols + nslack + m  # artificials for every row keeps phase 1 simple
    tab = np.zeros((m + 1, total + 1))
    basis = [0] * m
    s_at = ncols
    a_at = ncols + nslack
    si = 0
    for r, (a, rel, b) in enumerate(norm_rows):
        tab[r, :ncols] = a
        tab[r, -1] = b
        if rel == "<=":
            tab[r, s_at + si] = 1.0
            si += 1
        elif rel == ">=":
            tab[r, s_at + si] = -1.0
            si += 1
        tab[r, a_at + r] = 1.0
        basis[r] = a_at + r
    if max_iter is None:
        max_iter = 2000 + 200 * (m + total)

    # Phase 1: minimise the sum of artificials.
    tab[-1, a_at:a_at + m] = 1.0
    for r in range(m):
        tab[-1] -= tab[r]
    try:
        _bland_loop(tab, basis, max_iter)
    except _Unbounded:
        raise NumericError("phase-1 objective unbounded; malformed program")
    if tab[-1, -1] < -1e-7:
        return LPSolution(status="infeasible", value=float("nan"),
                          assignment=np.full(nvar, np.nan))

    # Clear leftover artificials from the basis (degenerate rows).
    drop_rows = []
    for r in range(m):
        if basis[r] >= a_at:
            sub = tab[r, :a_at]
            cols = np.where(np.abs(sub) > 1e-9)[0]
            if cols.size:
                _pivot(tab, basis, r, int(cols[0]))
            else:
                drop_rows.append(r)
    if drop_rows:
        keep = [r for r in range(m) if r not in drop_rows]
        tab = tab[keep + [m]]
        basis = [basis[r] for r in keep]
        m = len(keep)

    # Phase 2 on the original objective (maximise c => minimise -c).
    tab = np.delete(tab, np.s_[a_at:a_at + len(norm_rows)], axis=1)
    tab[-1] = 0.0
    cx = expand(c)
    tab[-1, :ncols] = -cx
    for r in range(m):
        bv = basis[r]
        if tab[-1, bv] != 0.0:
            tab[-1] -= tab[-1, bv] * tab[r]
    try:
        _bland_loop(tab, basis, max_iter)
    except _Unbounded:
        return LPSolution(status="unbounded", value=float("inf"),
                          assignment=np.full(nvar, np.nan))

    xstd = np.zeros(ncols + nslack)
    for r in range(m):
        if basis[r] < xstd.size:
            xstd[basis[r]] = tab[r, -1]
    x = xstd[:nvar].copy()
    for k, i in enumerate(split):
        x[i] -= xstd[nvar + k]
    x += shift
    value = float(c @ x)

    for coeffs, rel, bnd in lp.constraints:
        lhs = float(coeffs @ x)
        bad = ((rel == "<=" and lhs > bnd + FEAS_TOL)
               or (rel == ">=" and lhs < bnd - FEAS_TOL)
               or (rel == "=" and abs(lhs - bnd) > FEAS_TOL))
        if bad:
            raise NumericError(
                f"optimal point violates a constraint by {abs(lhs - bnd):.2e}")
    return LPSolution(status="optimal", value=value, assignment=x)


def deterministic_vertices(n: int) -> list[BehaviorTensor]:
    """All 4^n deterministic behaviors of the n-party (2, 2) scenario."""
    if n > 4:
        raise SizeError(f"vertex enumeration capped at n=4, got n={n}")
    if n < 2:
        raise ValidationError(f"need at least two parties, got n={n}")
    scenario = Scenario(n)
    vertices = []
    locals_ = list(product((0, 1), repeat=2))  # (output at U, output at D)
    for strat in product(locals_, repeat=n):
        tables = []
        for party in range(n):
            t = np.zeros((2, 2))
            t[0, strat[party][0]] = 1.0
            t[1, strat[party][1]] = 1.0
            tables.append(t)
        probs = tables[0]
        for t in tables[1:]:
            probs = np.multiply.outer(probs, t)
        # axes currently (s1, o1, s2, o2, ...): regroup settings first
        order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
        probs = probs.transpose(order)
        vertices.append(BehaviorTensor(scenario=scenario, probs=probs))
    return vertices


def _hardy_rows(n: int):
    p_coeff, zs = hardy_functionals(n)
    return p_coeff.reshape(-1), [z.reshape(-1) for z in zs]


def local_max(q: BoundQuery) -> LPSolution:
    """Exact maximum of the noisy Hardy probability over local behaviors.

    Posed over vertex weights: maximise sum_v w_v p_v subject to the n+1
    error constraints and sum_v w_v = 1, w >= 0.
    """
    if q.n not in (2, 3):
        raise ValidationError("the noisy local bound is posed for n in {2, 3}")
    vertices = deterministic_vertices(q.n)
    p_flat, z_flat = _hardy_rows(q.n)
    pv = np.array([float(p_flat @ v.probs.reshape(-1)) for v in vertices])
    zv = np.array([[float(z @ v.probs.reshape(-1)) for v in vertices] for z in z_flat])
    lp = LinearProgram(objective=pv)
    for row in zv:
        lp.add(row, "<=", q.epsilon)
    lp.add(np.ones(len(vertices)), "=", 1.0)
    return lp_solve(lp)


def nosignaling_max(q: BoundQuery) -> LPSolution:
    """Maximum of the noisy Hardy probability over no-signaling behaviors.

    Variables are the full behavior table; constraints are positivity,
    per-setting normalisation, marginal equalities for every party subset
    against every pair of complement settings (redundant members kept for
    auditability), and the n+1 error constraints.
    """
    if q.n not in (2, 3):
        raise ValidationError("the no-signaling bound is posed for n in {2, 3}")
    n = q.n
    shape = (2,) * (2 * n)
    nvars = 4 ** n
    p_flat, z_flat = _hardy_rows(n)
    lp = LinearProgram(objective=p_flat)

    for settings in product((0, 1), repeat=n):
        coeff = np.zeros(shape)
        coeff[settings] = 1.0
        lp.add(coeff.reshape(-1), "=", 1.0)

    for mask in range(1, 2 ** n - 1):
        keep = [i for i in range(n) if (mask >> i) & 1]
        drop = [i for i in range(n) if not (mask >> i) & 1]
        for s_keep in product((0, 1), repeat=len(keep)):
            for o_keep in product((0, 1), repeat=len(keep)):
                rows = []
                for s_drop in product((0, 1), repeat=len(drop)):
                    coeff = np.zeros(shape)
                    sel = [0] * n + [slice(None)] * n
                    for i, s in zip(keep, s_keep):
                        sel[i] = s
                    for i, s in zip(drop, s_drop):
                        sel[i] = s
                    for i, o in zip(keep, o_keep):
                        sel[n + i] = o
                    coeff[tuple(sel)] = 1.0
                    rows.append(coeff.reshape(-1))
                for a, b in combinations(range(len(rows)), 2):
                    lp.add(rows[a] - rows[b], "=", 0.0)

    for z in z_flat:
        lp.add(z, "<=", q.epsilon)

    sol = lp_solve(lp)
    if sol.status == "optimal":
        behavior = BehaviorTensor(Scenario(n), np.clip(sol.assignment, 0.0, None).reshape(shape))
        report = check_no_signaling(behavior)
        if report.max_violation > 1e-8:
            raise NumericError(
                f"no-signaling LP solution signals by {report.max_violation:.2e}")
    return sol
