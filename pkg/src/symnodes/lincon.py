"""Utilities for two-sided linear constraint systems ``lo <= B @ x <= hi``.

Feasibility questions are answered with linear programs (HiGHS via scipy);
smooth minimization over such systems uses the active-set quasi-Newton
method implemented here: equality rows are eliminated by a null-space
parametrization, inequality rows enter and leave a working set, and the
Hessian is approximated by BFGS updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .errors import ConstraintConflictError

EQ_TOL = 1e-13


def _as_system(B, lo, hi):
    B = np.atleast_2d(np.asarray(B, dtype=float))
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    if B.shape[0] != lo.size or lo.size != hi.size:
        raise ValueError("inconsistent constraint system shapes")
    return B, lo, hi


def violation(B, lo, hi, x):
    """Largest componentwise violation of the system at ``x`` (0 if feasible)."""
    if B.shape[0] == 0:
        return 0.0
    y = B @ x
    v = np.maximum(np.maximum(lo - y, y - hi), 0.0)
    return float(np.max(v))


def _lp_parts(B, lo, hi):
    """Split a two-sided system into linprog-ready equality/inequality parts."""
    eq = np.isfinite(lo) & np.isfinite(hi) & (hi - lo <= EQ_TOL)
    A_eq, b_eq = B[eq], lo[eq]
    rows_ub, rhs_ub = [], []
    ineq = ~eq
    fin_hi = ineq & np.isfinite(hi)
    fin_lo = ineq & np.isfinite(lo)
    if np.any(fin_hi):
        rows_ub.append(B[fin_hi])
        rhs_ub.append(hi[fin_hi])
    if np.any(fin_lo):
        rows_ub.append(-B[fin_lo])
        rhs_ub.append(-lo[fin_lo])
    A_ub = np.vstack(rows_ub) if rows_ub else np.zeros((0, B.shape[1]))
    b_ub = np.concatenate(rhs_ub) if rhs_ub else np.zeros(0)
    return A_eq, b_eq, A_ub, b_ub


def feasible_point(B, lo, hi, tol=1e-9):
    """A point satisfying the system, or ``None`` when it is infeasible.

    Phase-1 LP: minimize the uniform slack ``s`` added to every inequality.
    """
    B, lo, hi = _as_system(B, lo, hi)
    n = B.shape[1]
    if n == 0:
        return np.zeros(0) if violation(B, lo, hi, np.zeros(0)) <= tol else None
    if B.shape[0] == 0:
        return np.zeros(n)
    A_eq, b_eq, A_ub, b_ub = _lp_parts(B, lo, hi)
    m_ub = A_ub.shape[0]
    # Variables [x, s]; inequalities relaxed by s, equalities kept exact.
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub_s = (
        np.hstack([A_ub, -np.ones((m_ub, 1))]) if m_ub else np.zeros((0, n + 1))
    )
    A_eq_s = (
        np.hstack([A_eq, np.zeros((A_eq.shape[0], 1))])
        if A_eq.shape[0]
        else None
    )
    res = linprog(
        c,
        A_ub=A_ub_s if m_ub else None,
        b_ub=b_ub if m_ub else None,
        A_eq=A_eq_s,
        b_eq=b_eq if A_eq.shape[0] else None,
        bounds=[(None, None)] * n + [(0.0, None)],
        method="highs",
    )
    if not res.success or res.x[-1] > tol:
        return None
    x = res.x[:n]
    return x if violation(B, lo, hi, x) <= tol else None


def interior_point(B, lo, hi, tol=1e-9):
    """A point maximizing the smallest inequality margin (Chebyshev-like).

    Falls back to :func:`feasible_point` for systems with no interior.
    Returns ``None`` for infeasible systems.
    """
    B, lo, hi = _as_system(B, lo, hi)
    n = B.shape[1]
    if n == 0 or B.shape[0] == 0:
        return feasible_point(B, lo, hi, tol)
    A_eq, b_eq, A_ub, b_ub = _lp_parts(B, lo, hi)
    m_ub = A_ub.shape[0]
    if m_ub == 0:
        return feasible_point(B, lo, hi, tol)
    scale = np.maximum(np.linalg.norm(A_ub, axis=1), 1e-30)
    c = np.zeros(n + 1)
    c[-1] = -1.0  # maximize margin t
    A_ub_t = np.hstack([A_ub, scale[:, None]])
    A_eq_t = (
        np.hstack([A_eq, np.zeros((A_eq.shape[0], 1))])
        if A_eq.shape[0]
        else None
    )
    res = linprog(
        c,
        A_ub=A_ub_t,
        b_ub=b_ub,
        A_eq=A_eq_t,
        b_eq=b_eq if A_eq.shape[0] else None,
        bounds=[(None, None)] * n + [(0.0, 10.0)],
        method="highs",
    )
    if not res.success:
        return feasible_point(B, lo, hi, tol)
    x = res.x[:n]
    return x if violation(B, lo, hi, x) <= tol else feasible_point(B, lo, hi, tol)


def coordinate_intervals(B, lo, hi):
    """Per-coordinate min/max over the feasible set (LP probes).

    Unbounded directions yield +-inf entries.  Raises
    :class:`ConstraintConflictError` on infeasible systems.
    """
    B, lo, hi = _as_system(B, lo, hi)
    n = B.shape[1]
    A_eq, b_eq, A_ub, b_ub = _lp_parts(B, lo, hi)
    mins = np.empty(n)
    maxs = np.empty(n)

    def probe(c):
        return linprog(
            c,
            A_ub=A_ub if A_ub.shape[0] else None,
            b_ub=b_ub if A_ub.shape[0] else None,
            A_eq=A_eq if A_eq.shape[0] else None,
            b_eq=b_eq if A_eq.shape[0] else None,
            bounds=[(None, None)] * n,
            method="highs",
        )

    for k in range(n):
        c = np.zeros(n)
        c[k] = 1.0
        res = probe(c)
        if res.status == 3:  # unbounded below
            mins[k] = -np.inf
        elif not res.success:
            raise ConstraintConflictError("infeasible constraint system")
        else:
            mins[k] = res.fun
        res = probe(-c)
        if res.status == 3:  # unbounded above
            maxs[k] = np.inf
        elif not res.success:
            raise ConstraintConflictError("infeasible constraint system")
        else:
            maxs[k] = -res.fun
    return mins, maxs


def null_space_parametrization(E, e, tol=1e-11):
    """Particular solution and orthonormal kernel basis for ``E @ x = e``.

    Returns ``(x_p, Z)`` with ``x = x_p + Z @ y`` spanning the solution set.
    Raises :class:`ConstraintConflictError` when the system is inconsistent.
    """
    n = E.shape[1]
    if E.shape[0] == 0:
        return np.zeros(n), np.eye(n)
    x_p, *_ = np.linalg.lstsq(E, e, rcond=None)
    if np.linalg.norm(E @ x_p - e) > tol * (1.0 + np.linalg.norm(e)):
        raise ConstraintConflictError("inconsistent equality constraints")
    Z = scipy.linalg.null_space(E)
    if Z.size == 0:
        Z = np.zeros((n, 0))
    return x_p, Z


@dataclass
class SolveResult:
    x: np.ndarray
    fun: float
    status: str  # "kkt-converged" | "iteration-limited" | "error"
    iterations: int
    kkt_residual: float
    message: str = ""


def minimize_linearly_constrained(
    fun, x0, B, lo, hi, tol=1e-10, max_iter=50, project_start=True
):
    """Minimize a smooth function subject to ``lo <= B @ x <= hi``.

    ``fun(x) -> (f, grad)``; evaluations may return ``inf`` to reject a
    point.  Equality rows are eliminated up front; inequalities are handled
    by an active-set strategy on the reduced variables.  The method is
    deterministic.
    """
    B, lo, hi = _as_system(B, lo, hi)
    x0 = np.asarray(x0, dtype=float).ravel()
    eq = np.isfinite(lo) & np.isfinite(hi) & (hi - lo <= EQ_TOL)
    x_p, Z = null_space_parametrization(B[eq], lo[eq])
    G = B[~eq] @ Z
    gl = lo[~eq] - B[~eq] @ x_p
    gu = hi[~eq] - B[~eq] @ x_p

    # Rows with no dependence on the free variables are constants: verify.
    row_scale = np.linalg.norm(G, axis=1) if G.size else np.zeros(G.shape[0])
    fixed = row_scale <= 1e-14
    if np.any((gl[fixed] > 1e-9) | (gu[fixed] < -1e-9)):
        raise ConstraintConflictError(
            "equality constraints contradict an inequality row"
        )
    G, gl, gu = G[~fixed], gl[~fixed], gu[~fixed]

    y0 = Z.T @ (x0 - x_p)
    if project_start and violation(G, gl, gu, y0) > 1e-12:
        y0 = project_reduced(G, gl, gu, y0)

    def red_fun(y):
        f, g = fun(x_p + Z @ y)
        return f, Z.T @ g

    res = _active_set(red_fun, y0, G, gl, gu, tol, max_iter)
    res.x = x_p + Z @ res.x
    return res


def project_reduced(G, gl, gu, target, tol=1e-10):
    """Least-distance projection of ``target`` onto ``gl <= G y <= gu``."""
    y_feas = feasible_point(G, gl, gu)
    if y_feas is None:
        raise ConstraintConflictError("infeasible constraint system")
    if violation(G, gl, gu, target) <= 1e-14:
        return np.asarray(target, dtype=float)

    def qp(y):
        d = y - target
        return 0.5 * float(d @ d), d

    res = _active_set(qp, y_feas, G, gl, gu, tol, max_iter=200)
    return res.x


def project_onto(B, lo, hi, target):
    """Least-distance projection of ``target`` onto the full system."""
    B, lo, hi = _as_system(B, lo, hi)
    target = np.asarray(target, dtype=float).ravel()
    eq = np.isfinite(lo) & np.isfinite(hi) & (hi - lo <= EQ_TOL)
    x_p, Z = null_space_parametrization(B[eq], lo[eq])
    G = B[~eq] @ Z
    gl = lo[~eq] - B[~eq] @ x_p
    gu = hi[~eq] - B[~eq] @ x_p
    y = project_reduced(G, gl, gu, Z.T @ (target - x_p))
    return x_p + Z @ y


def _reduced_hessian_dir(H, Zw, g):
    """Quasi-Newton direction restricted to the working-set null space."""
    if Zw.shape[1] == 0:
        return np.zeros(H.shape[0]), np.zeros(0)
    Hz = Zw.T @ H @ Zw
    Hz = 0.5 * (Hz + Hz.T)
    w, V = np.linalg.eigh(Hz)
    floor = max(1e-12, 1e-10 * float(np.max(np.abs(w), initial=1.0)))
    w = np.maximum(w, floor)
    gz = Zw.T @ g
    p = -V @ ((V.T @ gz) / w)
    return Zw @ p, gz


def _active_set(fun, y0, G, gl, gu, tol, max_iter):
    """Core active-set loop on pure inequality rows (no equalities)."""
    n = y0.size
    y = np.asarray(y0, dtype=float).copy()
    f, g = fun(y)
    if not np.isfinite(f):
        return SolveResult(y, f, "error", 0, np.inf, "objective undefined at start")
    if n == 0:
        return SolveResult(y, f, "kkt-converged", 0, 0.0)
    H = np.eye(n)
    m = G.shape[0]
    act_tol = 1e-11

    def active_rows(y):
        work = []
        if m:
            vals = G @ y
            for r in range(m):
                if np.isfinite(gu[r]) and vals[r] >= gu[r] - act_tol:
                    work.append((r, +1))
                elif np.isfinite(gl[r]) and vals[r] <= gl[r] + act_tol:
                    work.append((r, -1))
        return work

    work = active_rows(y)
    best = SolveResult(y.copy(), f, "iteration-limited", 0, np.inf)
    n_evals = 0

    for major in range(1, max_iter + 1):
        A_w = (
            np.vstack([G[r] for r, _ in work]) if work else np.zeros((0, n))
        )
        Zw = scipy.linalg.null_space(A_w) if work else np.eye(n)
        if Zw.size == 0:
            Zw = np.zeros((n, 0))
        d, gz = _reduced_hessian_dir(H, Zw, g)
        gz_norm = float(np.max(np.abs(gz))) if gz.size else 0.0

        if gz_norm <= tol or float(np.linalg.norm(d)) <= 1e-15:
            # Stationary on the working set: check multiplier signs.
            if not work:
                return SolveResult(y, f, "kkt-converged", major, gz_norm)
            lam, *_ = np.linalg.lstsq(A_w.T, g, rcond=None)
            worst, worst_idx = 0.0, None
            for idx, ((r, side), lam_r) in enumerate(zip(work, lam)):
                bad = lam_r if side > 0 else -lam_r  # must be <= 0
                if bad > worst:
                    worst, worst_idx = bad, idx
            mult_tol = max(tol, 1e-12 * (1.0 + float(np.linalg.norm(g))))
            if worst_idx is None or worst <= mult_tol:
                resid = max(gz_norm, violation(G, gl, gu, y))
                return SolveResult(y, f, "kkt-converged", major, resid)
            del work[worst_idx]
            continue

        # Ratio test against constraints outside the working set.
        alpha_max, blocker = np.inf, None
        if m:
            in_work = {r for r, _ in work}
            Gd = G @ d
            Gy = G @ y
            for r in range(m):
                if r in in_work:
                    continue
                s = Gd[r]
                if s > 1e-14 and np.isfinite(gu[r]):
                    a = (gu[r] - Gy[r]) / s
                    if a < alpha_max:
                        alpha_max, blocker = a, (r, +1)
                elif s < -1e-14 and np.isfinite(gl[r]):
                    a = (gl[r] - Gy[r]) / s
                    if a < alpha_max:
                        alpha_max, blocker = a, (r, -1)
        alpha_max = max(alpha_max, 0.0)

        if alpha_max <= 1e-14 and blocker is not None:
            work.append(blocker)
            continue

        # Backtracking Armijo search from the full (possibly clipped) step.
        # The acceptance test tolerates floating-point noise in f so that
        # progress continues on gradient information near the minimum.
        alpha = min(1.0, alpha_max)
        hit_boundary = alpha == alpha_max
        slope = float(g @ d)
        noise = 8.0 * np.finfo(float).eps * (1.0 + abs(f))
        accepted = False
        for _ in range(40):
            y_new = y + alpha * d
            f_new, g_new = fun(y_new)
            n_evals += 1
            if np.isfinite(f_new) and f_new <= f + 1e-4 * alpha * slope + noise:
                accepted = True
                break
            alpha *= 0.5
            hit_boundary = False
        if not accepted:
            # Could not decrease along d: reset curvature once, else stop.
            if not np.allclose(H, np.eye(n)):
                H = np.eye(n)
                continue
            resid = max(gz_norm, violation(G, gl, gu, y))
            out = SolveResult(y, f, "iteration-limited", major, resid)
            return best if best.fun < f else out

        s = y_new - y
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            Hs = H @ s
            H = H - np.outer(Hs, Hs) / float(s @ Hs) + np.outer(yv, yv) / sy
        y, f, g = y_new, f_new, g_new
        if f < best.fun:
            best = SolveResult(y.copy(), f, "iteration-limited", major, gz_norm)
        if hit_boundary and blocker is not None:
            work.append(blocker)

    resid = violation(G, gl, gu, y)
    final_work = active_rows(y)
    A_w = (
        np.vstack([G[r] for r, _ in final_work])
        if final_work
        else np.zeros((0, n))
    )
    Zw = scipy.linalg.null_space(A_w) if final_work else np.eye(n)
    if Zw.size == 0:
        Zw = np.zeros((n, 0))
    gz = Zw.T @ g
    gz_norm = float(np.max(np.abs(gz))) if gz.size else 0.0
    out = SolveResult(y, f, "iteration-limited", max_iter, max(gz_norm, resid))
    return best if best.fun < f else out
