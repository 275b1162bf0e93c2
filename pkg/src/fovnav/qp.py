"""Dense convex QP solver: operator splitting with an active-set polish.

Solves min 1/2 z'Hz + g'z subject to equalities, inequalities and box
bounds.  Everything is stacked into the two-sided form l <= Az <= u,
Ruiz-equilibrated, and iterated with over-relaxed ADMM; on convergence the
active set is polished by one regularized KKT solve with iterative
refinement, which brings the KKT residuals to solver precision.  The
solver never raises on bad problems: primal/dual infeasibility is detected
from the divergence certificates and reported through the solution status.
"""

from dataclasses import dataclass

import numpy as np

_INF = np.inf


@dataclass
class QpProblem:
    """Canonical convex QP data.

    H must be symmetric (within 1e-10) positive semidefinite; inequality
    rows mean A_in z <= b_in; lb/ub are optional elementwise bounds with
    +-inf for absent entries.
    """

    H: np.ndarray
    g: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_in: np.ndarray = None
    b_in: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        n = self.g.size
        if self.H.shape != (n, n):
            raise ValueError(f"H must be {n}x{n}, got {self.H.shape}")
        if np.abs(self.H - self.H.T).max(initial=0.0) > 1e-10:
            raise ValueError("H must be symmetric within 1e-10")
        for a_name, b_name in (("A_eq", "b_eq"), ("A_in", "b_in")):
            A = getattr(self, a_name)
            b = getattr(self, b_name)
            if (A is None) != (b is None):
                raise ValueError(f"{a_name} and {b_name} must come together")
            if A is not None:
                A = np.asarray(A, dtype=float).reshape(-1, n)
                b = np.asarray(b, dtype=float).reshape(-1)
                if A.shape[0] != b.size:
                    raise ValueError(f"{a_name}/{b_name} row mismatch")
                setattr(self, a_name, A)
                setattr(self, b_name, b)
        for name in ("lb", "ub"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.asarray(v, dtype=float).reshape(n))

    @property
    def n(self) -> int:
        return self.g.size


@dataclass
class QpSolution:
    z: np.ndarray
    objective: float
    status: str  # optimal | max_iter | infeasible
    kkt_residuals: tuple  # (stationarity, primal, complementarity)
    iterations: int = 0
    duals: np.ndarray = None
    regularized: bool = False
    detail: str = ""


def _stack(qp: QpProblem):
    """Two-sided form l <= Az <= u (equalities first)."""
    n = qp.n
    blocks, lo, hi = [], [], []
    if qp.A_eq is not None and qp.A_eq.shape[0]:
        blocks.append(qp.A_eq)
        lo.append(qp.b_eq)
        hi.append(qp.b_eq)
    if qp.A_in is not None and qp.A_in.shape[0]:
        blocks.append(qp.A_in)
        lo.append(np.full(qp.A_in.shape[0], -_INF))
        hi.append(qp.b_in)
    if qp.lb is not None or qp.ub is not None:
        lb = qp.lb if qp.lb is not None else np.full(n, -_INF)
        ub = qp.ub if qp.ub is not None else np.full(n, _INF)
        rows = np.flatnonzero(np.isfinite(lb) | np.isfinite(ub))
        if rows.size:
            E = np.zeros((rows.size, n))
            E[np.arange(rows.size), rows] = 1.0
            blocks.append(E)
            lo.append(lb[rows])
            hi.append(ub[rows])
    if not blocks:
        return np.zeros((0, n)), np.zeros(0), np.zeros(0), 0
    A = np.vstack(blocks)
    n_eq = qp.A_eq.shape[0] if qp.A_eq is not None else 0
    return A, np.concatenate(lo), np.concatenate(hi), n_eq


def _ruiz_equilibrate(H, g, A, iters=10):
    """Modified Ruiz scaling of the KKT data plus cost normalization.

    Returns (Hs, gs, As, D, E, c): Hs = c D H D, gs = c D g, As = E A D.
    """
    n = H.shape[0]
    m = A.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    c = 1.0
    Hs, gs, As = H.copy(), g.copy(), A.copy()
    for _ in range(iters):
        col = np.maximum(
            np.abs(Hs).max(axis=0, initial=0.0),
            np.abs(As).max(axis=0, initial=0.0) if m else 0.0,
        )
        d = 1.0 / np.sqrt(np.where(col > 1e-12, col, 1.0))
        row = np.abs(As).max(axis=1, initial=0.0) if m else np.zeros(0)
        e = 1.0 / np.sqrt(np.where(row > 1e-12, row, 1.0))
        Hs = (Hs * d).T * d
        gs = gs * d
        if m:
            As = (As * d) * e[:, None]
        D *= d
        E *= e
        col_norm = np.abs(Hs).max(axis=0, initial=0.0)
        denom = max(np.mean(col_norm) if n else 0.0, np.abs(gs).max(initial=0.0))
        gamma = 1.0 / max(denom, 1e-12) if denom > 1e-12 else 1.0
        gamma = float(np.clip(gamma, 1e-6, 1e6))
        Hs *= gamma
        gs *= gamma
        c *= gamma
    return Hs, gs, As, D, E, c


def _kkt_residuals(qp: QpProblem, A, l, u, z, y):
    Az = A @ z if A.size else np.zeros(0)
    stat = np.abs(qp.H @ z + qp.g + (A.T @ y if A.size else 0.0)).max(initial=0.0)
    if A.size:
        prim = max(np.maximum(Az - u, 0.0).max(), np.maximum(l - Az, 0.0).max())
        y_pos = np.maximum(y, 0.0)
        y_neg = np.maximum(-y, 0.0)
        slack_u = np.where(np.isfinite(u), np.maximum(u - Az, 0.0), 1e30)
        slack_l = np.where(np.isfinite(l), np.maximum(Az - l, 0.0), 1e30)
        comp = max((y_pos * slack_u).max(initial=0.0), (y_neg * slack_l).max(initial=0.0))
    else:
        prim, comp = 0.0, 0.0
    return float(stat), float(prim), float(comp)


def _solve_active(H, g, A, idx, b_act):
    """Regularized KKT solve on the active rows, with refinement."""
    n = H.shape[0]
    k = idx.size
    if k == 0:
        try:
            return np.linalg.lstsq(H, -g, rcond=None)[0], np.zeros(0)
        except np.linalg.LinAlgError:
            return None
    A_act = A[idx]
    delta = 1e-9
    K = np.block([[H + delta * np.eye(n), A_act.T], [A_act, -delta * np.eye(k)]])
    rhs = np.concatenate([-g, b_act])
    try:
        sol = np.linalg.solve(K, rhs)
        K0 = np.block([[H, A_act.T], [A_act, np.zeros((k, k))]])
        for _ in range(3):
            sol = sol + np.linalg.solve(K, rhs - K0 @ sol)
    except np.linalg.LinAlgError:
        return None
    return sol[:n], sol[n:]


def _polish(H, g, A, l, u, n_eq, z, tol):
    """Active-set cleanup: solve on the detected set, drop wrong-signed
    multipliers, add violated rows, iterate a few rounds."""
    m = A.shape[0]
    act_tol = max(10 * tol, 1e-7)
    Az = A @ z
    lower = (Az - l < act_tol) & np.isfinite(l)
    upper = (u - Az < act_tol) & np.isfinite(u)
    lower[:n_eq] = False
    upper[:n_eq] = True  # equality rows always pinned at b
    for _ in range(8):
        idx = np.flatnonzero(lower | upper)
        b_act = np.where(upper[idx], u[idx], l[idx])
        out = _solve_active(H, g, A, idx, b_act)
        if out is None:
            return None
        z_new, nu = out
        y_new = np.zeros(m)
        y_new[idx] = nu
        changed = False
        # inequality rows with wrong-signed multipliers leave the set
        for j, row in enumerate(idx):
            if row < n_eq:
                continue
            if upper[row] and nu[j] < -1e-11:
                upper[row] = False
                changed = True
            elif lower[row] and nu[j] > 1e-11:
                lower[row] = False
                changed = True
        # violated inactive rows join it
        Az_new = A @ z_new
        viol_u = (Az_new - u > act_tol) & ~upper
        viol_l = (l - Az_new > act_tol) & ~lower
        viol_u[:n_eq] = False
        viol_l[:n_eq] = False
        if viol_u.any():
            upper[np.argmax((Az_new - u) * viol_u)] = True
            changed = True
        elif viol_l.any():
            lower[np.argmax((l - Az_new) * viol_l)] = True
            changed = True
        if not changed:
            return z_new, y_new
    return z_new, y_new


def solve(qp: QpProblem, warm_start=None, tol: float = 1e-6, max_iter: int = 4000) -> QpSolution:
    """Solve the QP; deterministic for identical inputs.

    Returns status "optimal" only when stationarity, primal feasibility and
    complementarity are all within tol.  Infeasible problems are reported,
    never raised.
    """
    H = qp.H
    g = qp.g
    n = qp.n
    regularized = False
    eigs = np.linalg.eigvalsh(0.5 * (H + H.T)) if n else np.zeros(0)
    if eigs.size and eigs.min() < -1e-10 * max(1.0, abs(eigs.max())):
        raise ValueError("H is not positive semidefinite")
    if eigs.size and eigs.min() < 1e-12:
        H = H + 1e-9 * np.eye(n)
        regularized = True

    A, l, u, n_eq = _stack(qp)
    m = A.shape[0]

    if m and np.any(l > u + 1e-12):
        res = _kkt_residuals(qp, A, l, u, np.zeros(n), np.zeros(m))
        return QpSolution(
            np.zeros(n), 0.0, "infeasible", res, 0, np.zeros(m), regularized,
            "inconsistent bounds (l > u)",
        )

    if m == 0:
        z = np.linalg.solve(H, -g) if n else np.zeros(0)
        obj = float(0.5 * z @ qp.H @ z + g @ z)
        res = _kkt_residuals(qp, A, l, u, z, np.zeros(0))
        status = "optimal" if max(res) <= tol else "max_iter"
        return QpSolution(z, obj, status, res, 0, np.zeros(0), regularized)

    Hs, gs, As, D, E, c = _ruiz_equilibrate(H, g, A)
    ls, us = E * l, E * u

    sigma = 1e-6
    alpha = 1.6
    rho = np.full(m, 0.1)
    rho[:n_eq] = 100.0  # equality rows held much stiffer

    if warm_start is None:
        x = np.zeros(n)
    else:
        x = np.asarray(warm_start, dtype=float).reshape(n) / D
    z = np.clip(As @ x, ls, us)
    y = np.zeros(m)

    def factor(rho_vec):
        K = Hs + sigma * np.eye(n) + (As.T * rho_vec) @ As
        return np.linalg.cholesky(K)

    L = factor(rho)
    status = "max_iter"
    detail = ""
    iters = max_iter
    check_every = 25
    for k in range(1, max_iter + 1):
        rhs = sigma * x - gs + As.T @ (rho * z - y)
        x_tilde = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
        Ax_tilde = As @ x_tilde
        x_new = alpha * x_tilde + (1 - alpha) * x
        z_candidate = alpha * Ax_tilde + (1 - alpha) * z
        z_new = np.clip(z_candidate + y / rho, ls, us)
        y_new = y + rho * (z_candidate - z_new)
        dx, dy = x_new - x, y_new - y
        x, z, y = x_new, z_new, y_new

        if k % check_every == 0 or k == max_iter:
            # unscaled residuals decide termination
            Ax = As @ x
            r_prim = np.abs((Ax - np.clip(Ax, ls, us)) / E).max()
            r_dual = np.abs((Hs @ x + gs + As.T @ y) / D).max() / c
            eps_prim = tol + tol * max(
                np.abs(Ax / E).max(initial=0), np.abs(z / E).max(initial=0)
            )
            eps_dual = tol + tol / c * max(
                np.abs((Hs @ x) / D).max(initial=0),
                np.abs((As.T @ y) / D).max(initial=0),
                np.abs(gs / D).max(initial=0),
            )
            if r_prim <= eps_prim and r_dual <= eps_dual:
                status = "optimal"
                iters = k
                break
            # primal infeasibility certificate from the dual increment
            ndy = np.abs(E * dy).max()
            if ndy > 1e-14:
                dyn = dy / ndy
                sup = np.where(np.isfinite(us), us, 0.0) @ np.maximum(dyn, 0) + np.where(
                    np.isfinite(ls), ls, 0.0
                ) @ np.minimum(dyn, 0)
                on_unbounded = (np.maximum(dyn, 0) * ~np.isfinite(us)).max(initial=0) + (
                    np.maximum(-dyn, 0) * ~np.isfinite(ls)
                ).max(initial=0)
                if (
                    np.abs((As.T @ dyn) / D).max() <= 1e-8
                    and on_unbounded <= 1e-8
                    and sup <= -1e-8
                ):
                    status = "infeasible"
                    detail = "primal infeasibility certificate"
                    iters = k
                    break
            # dual infeasibility (unbounded below) certificate
            ndx = np.abs(D * dx).max()
            if ndx > 1e-14:
                dxn = dx / ndx
                Adx = As @ dxn
                up_ok = np.where(np.isfinite(us), Adx, np.minimum(Adx, 0.0))
                lo_ok = np.where(np.isfinite(ls), Adx, np.maximum(Adx, 0.0))
                if (
                    np.abs(Hs @ dxn).max() <= 1e-8
                    and gs @ dxn <= -1e-8
                    and up_ok.max(initial=0) <= 1e-8
                    and lo_ok.min(initial=0) >= -1e-8
                ):
                    status = "infeasible"
                    detail = "dual infeasibility certificate"
                    iters = k
                    break
            # adaptive step size, refactor on large change
            if r_dual > 1e-16:
                ratio = np.sqrt(
                    (r_prim / max(eps_prim, 1e-16)) / max(r_dual / max(eps_dual, 1e-16), 1e-16)
                )
                if ratio > 5.0 or ratio < 0.2:
                    rho = np.clip(rho * ratio, 1e-6, 1e6)
                    rho[:n_eq] = np.clip(rho[:n_eq] * 1.0, 1e2, 1e8)
                    L = factor(rho)

    # back to the original coordinates
    x = D * x
    y = E * y / c
    if status != "infeasible":
        polished = _polish(H, g, A, l, u, n_eq, x, tol)
        if polished is not None:
            z_pol, y_pol = polished
            res_pol = _kkt_residuals(qp, A, l, u, z_pol, y_pol)
            res_cur = _kkt_residuals(qp, A, l, u, x, y)
            if max(res_pol) < max(res_cur):
                x, y = z_pol, y_pol

    res = _kkt_residuals(qp, A, l, u, x, y)
    if status != "infeasible":
        status = "optimal" if max(res) <= tol else "max_iter"
    obj = float(0.5 * x @ qp.H @ x + qp.g @ x)
    return QpSolution(x, obj, status, res, iters, y, regularized, detail)
