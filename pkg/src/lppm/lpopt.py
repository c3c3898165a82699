"""Dense two-phase simplex solver and the LP-based optimal mechanism for the
discrete scenario (identical input/output/estimate alphabets).

The LP maximizes the adversary's average error at a quality-loss budget via
an epigraph variable per output: maximize sum_z y[z] subject to
y[z] <= sum_x pi(x) f[z|x] d_P(x, xhat) for every candidate estimate xhat,
row-stochasticity of f, and the average-loss budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geo import TagHamming
from .model import DiscreteMechanism, PoiSet, Prior

_TOL = 1e-9


@dataclass
class LinearProgram:
    """maximize c @ x  s.t.  A x (senses) b,  x >= 0."""

    c: np.ndarray
    A: np.ndarray
    senses: list[str]  # '<=', '=', '>='
    b: np.ndarray
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, float)
        self.A = np.asarray(self.A, float)
        self.b = np.asarray(self.b, float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,) or len(self.senses) != m:
            raise ValueError("inconsistent LP dimensions")
        if not (np.isfinite(self.A).all() and np.isfinite(self.b).all()
                and np.isfinite(self.c).all()):
            raise ValueError("non-finite LP data")
        if any(s not in ("<=", "=", ">=") for s in self.senses):
            raise ValueError("senses must be one of <=, =, >=")


def dump_lp(lp: LinearProgram) -> str:
    """Plain-text fixed format: objective row, then one constraint per line."""
    lines = ["max " + " ".join(repr(float(v)) for v in lp.c)]
    for row, sense, rhs in zip(lp.A, lp.senses, lp.b):
        lines.append(" ".join(repr(float(v)) for v in row)
                     + f" {sense} {float(rhs)!r}")
    return "\n".join(lines) + "\n"


@dataclass
class SimplexResult:
    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    value: float
    x: np.ndarray


class _Tableau:
    """Simplex tableau with Dantzig pivoting and a Bland anti-cycling
    fallback after a run of degenerate pivots."""

    BLAND_AFTER = 40

    def __init__(self, rows: np.ndarray, basis: list[int]):
        self.t = rows  # (m, n_total + 1), rhs in the last column
        self.basis = basis

    def run(self, obj: np.ndarray) -> str:
        """Maximize obj @ x from the current basic feasible point."""
        m, _ = self.t.shape
        z = np.append(obj, 0.0)
        for i, bi in enumerate(self.basis):
            if z[bi] != 0.0:
                z = z - z[bi] * self.t[i]
        stalled = 0
        use_bland = False
        while True:
            red = z[:-1]
            if (red <= _TOL).all():
                self.z = z
                return "optimal"
            if use_bland:
                col = int(np.flatnonzero(red > _TOL)[0])
            else:
                col = int(red.argmax())
            ratios = np.full(m, np.inf)
            pos = self.t[:, col] > _TOL
            ratios[pos] = self.t[pos, -1] / self.t[pos, col]
            if not pos.any():
                self.z = z
                return "unbounded"
            best = ratios.min()
            if use_bland:
                # among tied rows, leave the variable with the smallest index
                tied = np.flatnonzero(ratios <= best + _TOL)
                row = int(min(tied, key=lambda i: self.basis[i]))
            else:
                row = int(ratios.argmin())
            if best <= _TOL:
                stalled += 1
                if stalled >= self.BLAND_AFTER:
                    use_bland = True
            else:
                stalled = 0
            self._pivot(row, col)
            z = z - z[col] * self.t[row]

    def _pivot(self, row: int, col: int):
        self.t[row] /= self.t[row, col]
        factors = self.t[:, col].copy()
        factors[row] = 0.0
        self.t -= factors[:, None] * self.t[row][None, :]
        self.basis[row] = col


def simplex_solve(lp: LinearProgram) -> SimplexResult:
    """Two-phase primal simplex; returns a vertex-optimal basic solution."""
    m, n = lp.A.shape
    A = lp.A.copy()
    b = lp.b.copy()
    senses = list(lp.senses)
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]

    n_slack = sum(s == "<=" for s in senses) + sum(s == ">=" for s in senses)
    art_rows = [i for i, s in enumerate(senses) if s != "<="]
    n_art = len(art_rows)
    total = n + n_slack + n_art
    T = np.zeros((m, total + 1))
    T[:, :n] = A
    T[:, -1] = b
    basis = [-1] * m
    k = n
    for i, s in enumerate(senses):
        if s == "<=":
            T[i, k] = 1.0
            basis[i] = k
            k += 1
        elif s == ">=":
            T[i, k] = -1.0
            k += 1
    art0 = k
    for i in art_rows:
        T[i, k] = 1.0
        basis[i] = k
        k += 1

    tab = _Tableau(T, basis)
    if n_art:
        phase1 = np.zeros(total)
        phase1[art0:] = -1.0
        tab.run(phase1)
        if -tab.z[-1] < -1e-7:
            return SimplexResult("infeasible", float("nan"), np.full(n, np.nan))
        # pivot leftover artificials out of the basis where possible
        for i, bi in enumerate(tab.basis):
            if bi >= art0:
                cols = np.flatnonzero(np.abs(tab.t[i, :art0]) > _TOL)
                if len(cols):
                    tab._pivot(i, int(cols[0]))
        tab.t[:, art0:total] = 0.0  # disable artificial columns

    phase2 = np.zeros(total)
    phase2[:n] = lp.c
    status = tab.run(phase2)
    x = np.zeros(total)
    for i, bi in enumerate(tab.basis):
        x[bi] = tab.t[i, -1]
    if status != "optimal":
        return SimplexResult(status, float("nan"), x[:n])
    return SimplexResult("optimal", float(lp.c @ x[:n]), x[:n])


# ---------------------------------------------------------------------------
# optimal-mechanism LP for the discrete scenario

@dataclass(frozen=True)
class ShokriInstance:
    poi: PoiSet  # inputs = outputs = estimate candidates
    prior: Prior
    dp: object
    dq: object
    q_budget: float

    def __post_init__(self):
        if self.q_budget < 0:
            raise ValueError("negative loss budget")

    def _dist(self, dfn) -> np.ndarray:
        if isinstance(dfn, TagHamming):
            return dfn.pairwise_tags(self.poi.tags, self.poi.tags)
        return dfn.pairwise(self.poi.coords, self.poi.coords)


def build_shokri_lp(inst: ShokriInstance) -> LinearProgram:
    """Epigraph LP over variables f[x, z] (row-major) and y[z]."""
    n = inst.poi.n
    dp = inst._dist(inst.dp)
    dq = inst._dist(inst.dq)
    pi = inst.prior.pmf
    nf = n * n
    nv = nf + n
    rows = []
    senses = []
    rhs = []
    # y[z] <= sum_x pi(x) f[z|x] dP(x, xhat) for every (z, xhat)
    for z in range(n):
        for xhat in range(n):
            row = np.zeros(nv)
            row[nf + z] = 1.0
            row[z:nf:n] -= pi * dp[:, xhat]  # f[x, z] has flat index x*n + z
            rows.append(row)
            senses.append("<=")
            rhs.append(0.0)
    # row-stochasticity
    for x in range(n):
        row = np.zeros(nv)
        row[x * n:(x + 1) * n] = 1.0
        rows.append(row)
        senses.append("=")
        rhs.append(1.0)
    # average-loss budget
    row = np.zeros(nv)
    row[:nf] = (pi[:, None] * dq).ravel()
    rows.append(row)
    senses.append("<=")
    rhs.append(inst.q_budget)

    c = np.zeros(nv)
    c[nf:] = 1.0
    names = [f"f[{x},{z}]" for x in range(n) for z in range(n)] + [
        f"y[{z}]" for z in range(n)
    ]
    return LinearProgram(c, np.array(rows), senses, np.array(rhs), names)


def extract_mechanism(result: SimplexResult, inst: ShokriInstance) -> DiscreteMechanism:
    """Recover the mechanism matrix from a solved instance."""
    if result.status != "optimal":
        raise ValueError(f"cannot extract from status {result.status!r}")
    n = inst.poi.n
    f = np.array(result.x[: n * n]).reshape(n, n)
    f[f < 0] = 0.0
    sums = f.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-8:
        raise ValueError(f"row-sum drift {np.abs(sums - 1.0).max()} too large")
    return DiscreteMechanism(inst.poi, inst.poi.coords, f / sums[:, None],
                             output_tags=inst.poi.tags)


def solve_shokri(inst: ShokriInstance) -> tuple[DiscreteMechanism, float]:
    """Build, solve and extract in one step."""
    res = simplex_solve(build_shokri_lp(inst))
    if res.status != "optimal":
        raise RuntimeError(f"LP solve failed: {res.status}")
    return extract_mechanism(res, inst), res.value
