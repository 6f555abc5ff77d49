"""Standard-form conic programs and a Clarabel-backed solver.

A program collects named variables, linear equality/inequality rows,
second-order cone blocks and a convex quadratic objective built from sums
of squares.  ``solve`` assembles the standard form

    min  0.5 x'Px + q'x
    s.t. Ax + s = b,  s in K

with K a product of zero, nonnegative and second-order cones, and hands it
to Clarabel.  Rotated cones are stored as such and lowered to plain SOCs
during assembly.  Quadratic objective terms can optionally be lowered to
rotated-cone epigraphs instead of populating P; both paths must agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

import clarabel

INF = float("inf")


class ConicError(Exception):
    pass


class LinExpr:
    """Affine expression: sum(coef * var) + const."""

    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0.0):
        self.terms = dict(terms) if terms else {}
        self.const = float(const)

    def copy(self):
        return LinExpr(self.terms, self.const)

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, LinExpr):
            for i, c in other.terms.items():
                out.terms[i] = out.terms.get(i, 0.0) + c
            out.const += other.const
        else:
            out.const += float(other)
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + (other * -1.0 if isinstance(other, LinExpr) else -float(other))

    def __rsub__(self, other):
        return (self * -1.0) + other

    def __mul__(self, k):
        k = float(k)
        return LinExpr({i: c * k for i, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def value(self, x):
        return self.const + sum(c * x[i] for i, c in self.terms.items())


@dataclass
class SolverOptions:
    feasibility_tol: float = 1e-8
    gap_tol: float = 1e-8
    iteration_limit: int = 200
    verbose: bool = False
    reformulate_quadratic: bool = False

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.gap_tol <= 0:
            raise ConicError("solver tolerances must be positive")


@dataclass
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | iteration-limit | numerical-failure
    x: np.ndarray | None
    objective: float | None
    duals: dict | None  # row id -> dual value (linear rows)
    iterations: int = 0
    solve_time: float = 0.0

    @property
    def optimal(self):
        return self.status == "optimal"


_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "iteration-limit",
    "MaxTime": "iteration-limit",
}


class ConicProgram:
    def __init__(self):
        self._names = {}  # name -> index
        self._name_list = []
        self._lb = []
        self._ub = []
        self._eq_rows = []  # (row_id, LinExpr, rhs)
        self._ineq_rows = []  # (row_id, LinExpr, rhs), meaning expr <= rhs
        self._socs = []  # (cone_id, t_expr, [x_exprs])
        self._rotated = []  # (cone_id, u_expr, v_expr, [x_exprs])
        self._lin_cost = LinExpr()
        self._sq_cost = []  # (coef, LinExpr): coef * expr^2, coef >= 0
        self._next_row = 0
        self._next_cone = 0

    # -- construction -----------------------------------------------------

    @property
    def num_vars(self):
        return len(self._name_list)

    def add_variable(self, name, lower=-INF, upper=INF):
        if name in self._names:
            raise ConicError(f"duplicate variable name {name!r}")
        if lower > upper:
            raise ConicError(f"inverted bounds for {name!r}: [{lower}, {upper}]")
        idx = len(self._name_list)
        self._names[name] = idx
        self._name_list.append(name)
        self._lb.append(float(lower))
        self._ub.append(float(upper))
        return LinExpr({idx: 1.0})

    def var(self, name):
        return LinExpr({self._names[name]: 1.0})

    def has_var(self, name):
        return name in self._names

    def var_index(self, name):
        return self._names[name]

    def add_eq(self, expr, rhs=0.0, label=None):
        rid = label if label is not None else ("eq", self._next_row)
        self._next_row += 1
        self._eq_rows.append((rid, expr, float(rhs)))
        return rid

    def add_ineq(self, expr, rhs=0.0, label=None):
        """expr <= rhs."""
        rid = label if label is not None else ("le", self._next_row)
        self._next_row += 1
        self._ineq_rows.append((rid, expr, float(rhs)))
        return rid

    def add_soc(self, t_expr, x_exprs):
        """||x|| <= t."""
        if not x_exprs:
            raise ConicError("SOC block needs at least one x expression")
        cid = self._next_cone
        self._next_cone += 1
        self._socs.append((cid, t_expr, list(x_exprs)))
        return cid

    def add_rotated(self, u_expr, v_expr, x_exprs):
        """||x||^2 <= u*v, u >= 0, v >= 0."""
        if not x_exprs:
            raise ConicError("rotated cone block needs at least one x expression")
        cid = self._next_cone
        self._next_cone += 1
        self._rotated.append((cid, u_expr, v_expr, list(x_exprs)))
        return cid

    def add_linear_cost(self, expr):
        self._lin_cost = self._lin_cost + expr

    def add_quadratic_cost(self, coef, expr):
        """Adds coef * expr^2 to the objective; coef must be >= 0."""
        coef = float(coef)
        if coef < 0:
            raise ConicError("quadratic cost coefficient must be nonnegative")
        if coef > 0:
            self._sq_cost.append((coef, expr.copy()))

    def clone(self):
        out = ConicProgram()
        out._names = dict(self._names)
        out._name_list = list(self._name_list)
        out._lb = list(self._lb)
        out._ub = list(self._ub)
        out._eq_rows = list(self._eq_rows)
        out._ineq_rows = list(self._ineq_rows)
        out._socs = list(self._socs)
        out._rotated = list(self._rotated)
        out._lin_cost = self._lin_cost.copy()
        out._sq_cost = list(self._sq_cost)
        out._next_row = self._next_row
        out._next_cone = self._next_cone
        return out

    # -- assembly ---------------------------------------------------------

    def standard_form(self, reformulate_quadratic=False):
        """Returns (P, q, A, b, cones, const, row_ids).

        row_ids maps positions of the zero/nonnegative rows back to row
        labels (bound rows get synthetic labels).  Cones are ordered: zero,
        nonnegative, then SOC blocks.
        """
        n = self.num_vars
        sq_cost = self._sq_cost
        lin_cost = self._lin_cost
        extra_vars = 0
        epi_cones = []
        epi_cost = []
        if reformulate_quadratic and sq_cost:
            # one epigraph variable per square: expr^2 <= w * 1
            for k, (coef, expr) in enumerate(sq_cost):
                widx = n + k
                epi_cones.append((expr, widx))
                epi_cost.append((widx, coef))
            extra_vars = len(sq_cost)
            sq_cost = []
        ntot = n + extra_vars

        # objective
        q = np.zeros(ntot)
        const = lin_cost.const
        for i, c in lin_cost.terms.items():
            q[i] += c
        for widx, coef in epi_cost:
            q[widx] += coef
        prows, pcols, pvals = [], [], []
        for coef, expr in sq_cost:
            items = sorted(expr.terms.items())
            const += coef * expr.const**2
            for i, ci in items:
                q[i] += 2.0 * coef * expr.const * ci
                for j, cj in items:
                    if j >= i:
                        prows.append(i)
                        pcols.append(j)
                        pvals.append(2.0 * coef * ci * cj)
        P = sparse.csc_matrix(
            sparse.coo_matrix((pvals, (prows, pcols)), shape=(ntot, ntot))
        )

        rows, cols, vals = [], [], []
        b = []
        row_ids = []
        nrow = 0

        def emit(expr_terms, expr_const, rhs, rid):
            # expr <= / == rhs  ->  a'x + s = rhs - const
            nonlocal nrow
            for i, c in expr_terms.items():
                if c != 0.0:
                    rows.append(nrow)
                    cols.append(i)
                    vals.append(c)
            b.append(rhs - expr_const)
            row_ids.append(rid)
            nrow += 1

        for rid, expr, rhs in self._eq_rows:
            emit(expr.terms, expr.const, rhs, rid)
        for i in range(n):
            if self._lb[i] == self._ub[i] and math.isfinite(self._lb[i]):
                emit({i: 1.0}, 0.0, self._lb[i], ("fix", self._name_list[i]))
        n_eq = nrow

        for rid, expr, rhs in self._ineq_rows:
            emit(expr.terms, expr.const, rhs, rid)
        for i in range(n):
            lo, hi = self._lb[i], self._ub[i]
            if lo == hi:
                continue
            if math.isfinite(lo):
                emit({i: -1.0}, 0.0, -lo, ("lb", self._name_list[i]))
            if math.isfinite(hi):
                emit({i: 1.0}, 0.0, hi, ("ub", self._name_list[i]))
        n_ineq = nrow - n_eq

        cones = []
        if n_eq:
            cones.append(("zero", n_eq))
        if n_ineq:
            cones.append(("nonneg", n_ineq))

        def emit_cone_row(expr):
            # s_row = expr  ->  -a'x + s = const
            nonlocal nrow
            for i, c in expr.terms.items():
                if c != 0.0:
                    rows.append(nrow)
                    cols.append(i)
                    vals.append(-c)
            b.append(expr.const)
            row_ids.append(None)
            nrow += 1

        for cid, t_expr, x_exprs in self._socs:
            emit_cone_row(t_expr)
            for e in x_exprs:
                emit_cone_row(e)
            cones.append(("soc", 1 + len(x_exprs)))
        for cid, u, v, xs in self._rotated:
            # ||x||^2 <= uv  <=>  ||(u - v, 2x)|| <= u + v
            emit_cone_row(u + v)
            emit_cone_row(u - v)
            for e in xs:
                emit_cone_row(e * 2.0)
            cones.append(("soc", 2 + len(xs)))
        for expr, widx in epi_cones:
            w = LinExpr({widx: 1.0})
            one = LinExpr({}, 1.0)
            emit_cone_row(w + one)
            emit_cone_row(w - one)
            emit_cone_row(expr * 2.0)
            cones.append(("soc", 3))

        A = sparse.csc_matrix(
            sparse.coo_matrix((vals, (rows, cols)), shape=(nrow, ntot))
        )
        return P, q, A, np.array(b), cones, const, row_ids

    # -- solving ----------------------------------------------------------

    def solve(self, options=None):
        options = options or SolverOptions()
        P, q, A, b, cones, const, row_ids = self.standard_form(
            reformulate_quadratic=options.reformulate_quadratic
        )
        cone_objs = []
        for kind, dim in cones:
            if kind == "zero":
                cone_objs.append(clarabel.ZeroConeT(dim))
            elif kind == "nonneg":
                cone_objs.append(clarabel.NonnegativeConeT(dim))
            else:
                cone_objs.append(clarabel.SecondOrderConeT(dim))
        settings = clarabel.DefaultSettings()
        settings.verbose = options.verbose
        settings.max_iter = options.iteration_limit
        settings.tol_feas = options.feasibility_tol
        settings.tol_gap_abs = options.gap_tol
        settings.tol_gap_rel = options.gap_tol
        # the achievable duality gap is floored by the static KKT
        # regularization, and the stall fallback ("reduced" tolerances) must
        # stay meaningfully tighter than what callers verify downstream, so
        # both scale with the requested gap
        settings.static_regularization_constant = 0.01 * options.gap_tol
        settings.reduced_tol_gap_abs = 10.0 * options.gap_tol
        settings.reduced_tol_gap_rel = 10.0 * options.gap_tol
        try:
            solver = clarabel.DefaultSolver(P, q, A, b, cone_objs, settings)
            sol = solver.solve()
        except BaseException:
            return ConicSolution("numerical-failure", None, None, None)
        status = _STATUS_MAP.get(str(sol.status), "numerical-failure")
        if status in ("infeasible", "unbounded", "numerical-failure"):
            return ConicSolution(status, None, None, None,
                                 sol.iterations, sol.solve_time)
        x = np.asarray(sol.x)[: self.num_vars]
        duals = {}
        z = np.asarray(sol.z)
        for pos, rid in enumerate(row_ids):
            if rid is not None:
                duals[rid] = z[pos]
        obj = float(sol.obj_val) + const
        if self._sq_cost and options.reformulate_quadratic:
            # epigraph variables report w >= expr^2; recompute the exact value
            obj = self.objective_value(x)
        return ConicSolution(status, x, obj, duals, sol.iterations, sol.solve_time)

    def objective_value(self, x):
        val = self._lin_cost.value(x)
        for coef, expr in self._sq_cost:
            val += coef * expr.value(x) ** 2
        return val

    def value(self, sol_or_x, target):
        x = sol_or_x.x if isinstance(sol_or_x, ConicSolution) else sol_or_x
        if isinstance(target, str):
            return float(x[self._names[target]])
        return float(target.value(x))

    def cone_gap(self, sol, cone_id):
        """t - ||x|| for a plain SOC; u*v - ||x||^2 for a rotated cone."""
        x = sol.x
        for cid, t_expr, xs in self._socs:
            if cid == cone_id:
                return t_expr.value(x) - math.hypot(*[e.value(x) for e in xs])
        for cid, u, v, xs in self._rotated:
            if cid == cone_id:
                return u.value(x) * v.value(x) - sum(e.value(x) ** 2 for e in xs)
        raise ConicError(f"unknown cone id {cone_id}")

    # -- debugging dump ---------------------------------------------------

    def dump(self, path):
        """Writes a self-describing JSON snapshot of the program."""

        def exp(e):
            return {
                "terms": {self._name_list[i]: c for i, c in sorted(e.terms.items())},
                "const": e.const,
            }

        doc = {
            "variables": [
                {"name": nm, "lower": self._lb[i], "upper": self._ub[i]}
                for i, nm in enumerate(self._name_list)
            ],
            "equalities": [
                {"label": str(rid), "expr": exp(e), "rhs": rhs}
                for rid, e, rhs in self._eq_rows
            ],
            "inequalities": [
                {"label": str(rid), "expr": exp(e), "rhs": rhs}
                for rid, e, rhs in self._ineq_rows
            ],
            "soc": [
                {"t": exp(t), "x": [exp(e) for e in xs]} for _, t, xs in self._socs
            ],
            "rotated": [
                {"u": exp(u), "v": exp(v), "x": [exp(e) for e in xs]}
                for _, u, v, xs in self._rotated
            ],
            "objective": {
                "linear": exp(self._lin_cost),
                "squares": [{"coef": c, "expr": exp(e)} for c, e in self._sq_cost],
            },
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, default=float)
