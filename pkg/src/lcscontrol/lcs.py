"""Discrete-time linear complementarity systems and exact LCP solving.

The per-step contact force lam solves

    0 <= lam  perp  q + M lam >= 0,

with M = F and q = D x + E u + c when embedded in the dynamics

    x_next = A x + B u + C lam + d.

The production solver is complementary pivoting with deterministic
lowest-index tie breaking; an exhaustive active-set enumeration serves as
the brute-force oracle in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoSolution

# Complementarity tolerances: tight for ground-truth simulation, looser for
# learned models whose F matrices are less well conditioned.
SIM_TOL = 1e-9
LEARNED_MODEL_TOL = 1e-6

# 2^n_lambda enumeration keeps the oracle tractable only for small n_lambda.
MAX_ORACLE_LAMBDA = 12

_PIVOT_EPS = 1e-11
_TIE_EPS = 1e-12


@dataclass(frozen=True)
class LcsDims:
    """State, action, and contact-force dimensions."""

    n_x: int
    n_u: int
    n_lambda: int

    def __post_init__(self):
        if self.n_x <= 0 or self.n_u <= 0 or self.n_lambda <= 0:
            raise DimensionMismatch(f"dimensions must be positive, got {self}")
        if self.n_lambda > MAX_ORACLE_LAMBDA:
            raise DimensionMismatch(
                f"n_lambda={self.n_lambda} exceeds the enumeration bound "
                f"{MAX_ORACLE_LAMBDA}"
            )


@dataclass
class LcsParams:
    """The eight learnable matrices/vectors defining an LCS."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    d: np.ndarray
    D: np.ndarray
    E: np.ndarray
    F: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.d = np.asarray(self.d, dtype=float).ravel()
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))
        self.c = np.asarray(self.c, dtype=float).ravel()
        n_x, n_u, n_l = self.A.shape[0], self.B.shape[1], self.F.shape[0]
        shapes = {
            "A": (self.A, (n_x, n_x)),
            "B": (self.B, (n_x, n_u)),
            "C": (self.C, (n_x, n_l)),
            "d": (self.d, (n_x,)),
            "D": (self.D, (n_l, n_x)),
            "E": (self.E, (n_l, n_u)),
            "F": (self.F, (n_l, n_l)),
            "c": (self.c, (n_l,)),
        }
        for name, (arr, want) in shapes.items():
            if arr.shape != want:
                raise DimensionMismatch(
                    f"{name} has shape {arr.shape}, expected {want}"
                )
            if not np.all(np.isfinite(arr)):
                raise DimensionMismatch(f"{name} contains non-finite entries")

    @property
    def dims(self) -> LcsDims:
        return LcsDims(self.A.shape[0], self.B.shape[1], self.F.shape[0])

    def flatten(self) -> np.ndarray:
        """Row-major concatenation of A, B, C, d, D, E, F, c."""
        return np.concatenate(
            [m.ravel() for m in (self.A, self.B, self.C, self.d,
                                 self.D, self.E, self.F, self.c)]
        )

    def copy(self) -> "LcsParams":
        return LcsParams(*(m.copy() for m in
                           (self.A, self.B, self.C, self.d,
                            self.D, self.E, self.F, self.c)))


def theta_size(dims: LcsDims) -> int:
    n_x, n_u, n_l = dims.n_x, dims.n_u, dims.n_lambda
    return n_x * (n_x + n_u + n_l + 1) + n_l * (n_x + n_u + n_l + 1)


def theta_slices(dims: LcsDims) -> dict:
    """Index ranges of each parameter block inside the flattened vector."""
    n_x, n_u, n_l = dims.n_x, dims.n_u, dims.n_lambda
    sizes = [("A", n_x * n_x), ("B", n_x * n_u), ("C", n_x * n_l), ("d", n_x),
             ("D", n_l * n_x), ("E", n_l * n_u), ("F", n_l * n_l), ("c", n_l)]
    out, start = {}, 0
    for name, size in sizes:
        out[name] = slice(start, start + size)
        start += size
    return out


def params_from_theta(theta: np.ndarray, dims: LcsDims) -> LcsParams:
    """Inverse of ``LcsParams.flatten``; the round trip is exact."""
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != theta_size(dims):
        raise DimensionMismatch(
            f"theta has length {theta.size}, expected {theta_size(dims)}"
        )
    n_x, n_u, n_l = dims.n_x, dims.n_u, dims.n_lambda
    sl = theta_slices(dims)
    return LcsParams(
        A=theta[sl["A"]].reshape(n_x, n_x),
        B=theta[sl["B"]].reshape(n_x, n_u),
        C=theta[sl["C"]].reshape(n_x, n_l),
        d=theta[sl["d"]].copy(),
        D=theta[sl["D"]].reshape(n_l, n_x),
        E=theta[sl["E"]].reshape(n_l, n_u),
        F=theta[sl["F"]].reshape(n_l, n_l),
        c=theta[sl["c"]].copy(),
    )


@dataclass
class LcpInstance:
    """Find lam >= 0 with q + M lam >= 0 and lam'(q + M lam) = 0."""

    M: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        self.q = np.asarray(self.q, dtype=float).ravel()
        n = self.q.size
        if self.M.shape != (n, n):
            raise DimensionMismatch(
                f"M has shape {self.M.shape}, expected ({n}, {n})"
            )
        if not (np.all(np.isfinite(self.M)) and np.all(np.isfinite(self.q))):
            raise DimensionMismatch("LCP instance contains non-finite entries")


@dataclass
class LcpSolution:
    """Contact force, slack q + M lam, and the strictly positive index set."""

    lam: np.ndarray
    slack: np.ndarray
    active_set: tuple

    def complementarity_residual(self) -> float:
        return float(np.max(np.abs(self.lam * self.slack), initial=0.0))


def _make_solution(M, q, lam, tol):
    lam = np.where(lam > 0.0, lam, 0.0)
    slack = q + M @ lam
    active = tuple(int(i) for i in np.nonzero(lam > tol)[0])
    return LcpSolution(lam=lam, slack=slack, active_set=active)


def _check_solution(sol: LcpSolution, tol: float) -> bool:
    return (
        bool(np.all(sol.lam >= 0.0))
        and bool(np.all(sol.slack >= -tol))
        and sol.complementarity_residual() <= tol
    )


def lcp_solve(inst: LcpInstance, tol: float = SIM_TOL) -> LcpSolution:
    """Solve the LCP by complementary pivoting.

    Deterministic for fixed input: pivot ties are broken by the lowest
    basic-variable index, and the artificial column leaves the basis as
    soon as it is eligible.  Raises NoSolution on ray termination.
    """
    if tol <= 0.0:
        raise DimensionMismatch("tol must be positive")
    M, q = inst.M, inst.q
    n = q.size

    if np.min(q, initial=np.inf) >= 0.0:
        return _make_solution(M, q, np.zeros(n), tol)

    # Tableau for I w - M lam - e z0 = q with column order [w, lam, z0, rhs].
    tab = np.hstack([np.eye(n), -M, -np.ones((n, 1)), q.reshape(n, 1)])
    basis = list(range(n))
    z0 = 2 * n

    def pivot(row, col):
        tab[row] /= tab[row, col]
        others = [i for i in range(n) if i != row]
        tab[others] -= np.outer(tab[others, col], tab[row])

    row = int(np.argmin(q))  # argmin returns the lowest index on ties
    pivot(row, z0)
    basis[row] = z0
    driving = n + row  # complement of the leaving w_row

    max_pivots = max(1000, 50 * 2 ** min(n, 16))
    for _ in range(max_pivots):
        col = tab[:, driving]
        eligible = col > _PIVOT_EPS
        if not np.any(eligible):
            raise NoSolution(
                "complementary pivoting terminated on a ray "
                f"(driving variable {driving}, n={n})"
            )
        ratios = np.full(n, np.inf)
        ratios[eligible] = tab[eligible, -1] / col[eligible]
        best = float(np.min(ratios))
        tie = ratios <= best + _TIE_EPS * (1.0 + abs(best))
        tie_rows = np.nonzero(tie)[0]
        z0_rows = [r for r in tie_rows if basis[r] == z0]
        if z0_rows:
            row = z0_rows[0]
        else:
            row = min(tie_rows, key=lambda r: basis[r])
        leaving = basis[row]
        pivot(row, driving)
        basis[row] = driving
        if leaving == z0:
            break
        driving = leaving + n if leaving < n else leaving - n
    else:
        raise NoSolution(f"pivot limit {max_pivots} exceeded (n={n})")

    lam = np.zeros(n)
    for i, b in enumerate(basis):
        if n <= b < z0:
            lam[b - n] = tab[i, -1]
    if np.min(lam, initial=0.0) < -tol:
        raise NoSolution("pivoting produced an infeasible basic solution")
    sol = _make_solution(M, q, lam, tol)
    if not _check_solution(sol, tol):
        raise NoSolution(
            "pivoting finished but the solution violates the tolerance "
            f"(complementarity residual {sol.complementarity_residual():.3e})"
        )
    return sol


def lcp_enumerate_oracle(inst: LcpInstance, tol: float = SIM_TOL) -> list:
    """Brute-force oracle: try every candidate active set.

    For each subset alpha of indices, solve M[alpha, alpha] lam = -q[alpha]
    (least squares when singular), set the rest of lam to zero, and keep
    the feasible candidates.  Returns them sorted lexicographically by the
    candidate set; duplicates from degenerate instances are kept.
    """
    M, q = inst.M, inst.q
    n = q.size
    if n > MAX_ORACLE_LAMBDA:
        raise DimensionMismatch(
            f"enumeration over 2^{n} active sets refused (limit "
            f"{MAX_ORACLE_LAMBDA})"
        )
    found = []
    for mask in range(2 ** n):
        alpha = [i for i in range(n) if mask >> i & 1]
        lam = np.zeros(n)
        if alpha:
            sub = M[np.ix_(alpha, alpha)]
            rhs = -q[alpha]
            try:
                lam_a = np.linalg.solve(sub, rhs)
            except np.linalg.LinAlgError:
                lam_a, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
                if np.max(np.abs(sub @ lam_a - rhs), initial=0.0) > tol:
                    continue  # inconsistent singular system
            if np.min(lam_a, initial=0.0) < -tol:
                continue
            lam[alpha] = lam_a
        sol = _make_solution(M, q, lam, tol)
        if _check_solution(sol, tol):
            found.append((tuple(alpha), sol))
    found.sort(key=lambda pair: pair[0])
    return [sol for _, sol in found]


def lcs_step(params: LcsParams, x, u, tol: float = SIM_TOL):
    """Advance one step: solve the embedded LCP, then the affine update."""
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    dims = params.dims
    if x.size != dims.n_x or u.size != dims.n_u:
        raise DimensionMismatch(
            f"state/action sizes ({x.size}, {u.size}) do not match dims {dims}"
        )
    q = params.D @ x + params.E @ u + params.c
    sol = lcp_solve(LcpInstance(M=params.F, q=q), tol)
    x_next = params.A @ x + params.B @ u + params.C @ sol.lam + params.d
    return x_next, sol.lam


def simulate_open_loop(params: LcsParams, x0, controls, tol: float = SIM_TOL):
    """Iterate lcs_step over a control sequence; returns len(controls)+1 states."""
    controls = [np.asarray(u, dtype=float).ravel() for u in controls]
    if not controls:
        raise DimensionMismatch("controls must be nonempty")
    states = [np.asarray(x0, dtype=float).ravel()]
    for t, u in enumerate(controls):
        try:
            x_next, _ = lcs_step(params, states[-1], u, tol)
        except NoSolution as err:
            raise NoSolution(f"step {t} failed: {err}", step=t) from err
        states.append(x_next)
    return states
