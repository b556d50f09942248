"""Dense LP solver: Mehrotra predictor-corrector interior point with a
two-phase simplex fallback for small programs.

Programs are given in the canonical form

    min c'v   s.t.  G v <= h,  A_eq v = b_eq

with free variables v. Infeasibility is only ever reported together with an
internally verified Farkas ray, and unboundedness with a verified recession
direction; anything weaker degrades to NUMERICAL_FAILURE.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

logger = logging.getLogger("cfx.solver")

SIMPLEX_SIZE_LIMIT = 200   # fall back to dense simplex when p + q <= this
FEAS_TOL = 1e-6            # absolute feasibility tolerance after row scaling


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        G = np.asarray(self.G, dtype=float).reshape(-1, c.size)
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if G.shape[0] != h.size:
            raise ValueError("G and h row counts differ")
        A = self.A_eq
        b = self.b_eq
        if A is None:
            A = np.zeros((0, c.size))
            b = np.zeros(0)
        else:
            A = np.asarray(A, dtype=float).reshape(-1, c.size)
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if A.shape[0] != b.size:
                raise ValueError("A_eq and b_eq row counts differ")
        for arr in (c, G, h, A, b):
            if not np.all(np.isfinite(arr)):
                raise ValueError("linear program entries must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "A_eq", A)
        object.__setattr__(self, "b_eq", b)

    @property
    def n_vars(self):
        return self.c.size


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    v: np.ndarray = None
    objective: float = None
    certificate: np.ndarray = None  # Farkas ray (q+e,) or recession dir (p,)


def _inf_norm(a):
    return float(np.max(np.abs(a))) if a.size else 0.0


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _verify_farkas(G, h, A, b, z, y):
    """Check (z, y) is a Farkas ray proving {Gv <= h, Av = b} empty.

    Requires z >= 0, G'z + A'y ~ 0 and h'z + b'y < 0 with a margin that
    dominates the residual. Returns the normalized ray or None.
    """
    z = np.array(z, dtype=float)
    y = np.array(y, dtype=float)
    z[(z < 0) & (z > -1e-11)] = 0.0
    if np.any(z < 0):
        return None
    scale = max(_inf_norm(z), _inf_norm(y))
    if scale <= 0:
        return None
    z /= scale
    y /= scale
    res = _inf_norm(G.T @ z + (A.T @ y if y.size else 0.0))
    viol = -(h @ z + (b @ y if y.size else 0.0))
    if viol >= 1e-6 and res <= min(1e-6, 1e-3 * viol):
        return np.concatenate([z, y])
    return None


def _verify_ray(c, G, A, d):
    """Check d is a recession direction with negative cost (unboundedness)."""
    d = np.asarray(d, dtype=float)
    scale = _inf_norm(d)
    if scale <= 0:
        return None
    d = d / scale
    if A.size and _inf_norm(A @ d) > 1e-7:
        return None
    if G.size and float(np.max(G @ d)) > 1e-7:
        return None
    if c @ d <= -1e-6:
        return d
    return None


def _mehrotra(c, G, h, A, b, tol, max_iter=100):
    """Infeasible-start predictor-corrector IPM.

    Returns (kind, payload): ("optimal", v), ("infeasible", ray),
    ("unbounded", dir) or ("failure", None).
    """
    p, q, e = c.size, G.shape[0], A.shape[0]
    cn, hn, bn = 1.0 + _inf_norm(c), 1.0 + _inf_norm(h), 1.0 + _inf_norm(b)

    stack = np.vstack([G, A]) if e else G
    rhs0 = np.concatenate([h, b]) if e else h
    x = np.linalg.lstsq(stack, rhs0, rcond=None)[0]
    s_raw = h - G @ x
    s = s_raw + max(0.0, -float(s_raw.min())) + 1.0
    z = np.ones(q)
    y = np.zeros(e)

    reg = 1e-12
    best = (np.inf, None)
    stall = 0
    for _ in range(max_iter):
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s))
                and np.all(np.isfinite(z)) and np.all(np.isfinite(y))):
            break
        r_d = c + G.T @ z + (A.T @ y if e else 0.0)
        r_p = A @ x - b if e else np.zeros(0)
        r_g = G @ x + s - h
        gap = float(s @ z)

        metric = max(_inf_norm(r_d) / cn, _inf_norm(r_g) / hn,
                     (_inf_norm(r_p) / bn if e else 0.0),
                     gap / (1.0 + abs(float(c @ x))))
        if metric <= tol:
            return "optimal", x
        if metric < 0.9 * best[0]:
            best = (metric, x.copy())
            stall = 0
        else:
            stall += 1

        ray = _verify_farkas(G, h, A, b, z, y)
        if ray is not None:
            return "infeasible", ray
        ray = _verify_ray(c, G, A, x)
        if ray is not None:
            return "unbounded", ray

        # residual floors near machine precision: accept the best iterate
        # once progress stops, provided it is within a small factor of tol
        if stall >= 6 or gap <= 1e-25:
            if best[0] <= 100 * tol:
                return "optimal", best[1]
            return "failure", None

        d = s / z
        w = 1.0 / d
        K11 = (G.T * w) @ G
        scale = max(1.0, float(np.max(np.abs(K11))))
        if e:
            K = np.zeros((p + e, p + e))
            K[:p, :p] = K11
            K[:p, p:] = A.T
            K[p:, :p] = A
            K[np.arange(p), np.arange(p)] += reg * scale
            K[np.arange(p, p + e), np.arange(p, p + e)] -= reg * scale
        else:
            K = K11 + reg * scale * np.eye(p)

        def kkt_solve(rc):
            t = r_g + rc / z
            rhs = -r_d - G.T @ (w * t)
            full = np.concatenate([rhs, -r_p]) if e else rhs
            try:
                sol = np.linalg.solve(K, full)
            except np.linalg.LinAlgError:
                return None
            dx = sol[:p]
            dy = sol[p:] if e else np.zeros(0)
            dz = w * (G @ dx + t)
            ds = (rc - s * dz) / z
            return dx, dy, dz, ds

        step = kkt_solve(-s * z)
        if step is None:
            reg *= 1e4
            if reg > 1e-2:
                return "failure", None
            continue
        dxa, dya, dza, dsa = step
        ap_aff = min(1.0, _max_step(s, dsa))
        ad_aff = min(1.0, _max_step(z, dza))
        gap_aff = float((s + ap_aff * dsa) @ (z + ad_aff * dza))
        sigma = min(1.0, max((gap_aff / max(gap, 1e-300)) ** 3, 0.0))
        mu = gap / q

        step = kkt_solve(-s * z - dsa * dza + sigma * mu)
        if step is None:
            reg *= 1e4
            if reg > 1e-2:
                return "failure", None
            continue
        dx, dy, dz, ds = step
        ap = min(1.0, 0.99995 * _max_step(s, ds))
        ad = min(1.0, 0.99995 * _max_step(z, dz))
        if ap < 1e-13 and ad < 1e-13:
            return "failure", None
        x = x + ap * dx
        s = s + ap * ds
        y = y + ad * dy
        z = z + ad * dz

    if best[0] <= 100 * tol:
        return "optimal", best[1]
    return "failure", None


def _pivot(T, cost_rows, basis, row, col):
    T[row] /= T[row, col]
    colvals = T[:, col].copy()
    colvals[row] = 0.0
    T -= np.outer(colvals, T[row])
    for cr in cost_rows:
        if cr[col] != 0.0:
            cr -= cr[col] * T[row]
    basis[row] = col


def _simplex_iterate(T, cost, extra_cost, basis, n_allowed, tol=1e-9,
                     max_pivots=50000):
    """Bland's-rule phase driver. Returns "optimal" or ("unbounded", col)."""
    m = T.shape[0]
    for _ in range(max_pivots):
        enter = -1
        for j in range(n_allowed):
            if cost[j] < -tol:
                enter = j
                break
        if enter < 0:
            return "optimal"
        col = T[:m, enter]
        pos = col > tol
        if not np.any(pos):
            return ("unbounded", enter)
        ratios = np.full(m, np.inf)
        ratios[pos] = T[pos, -1] / col[pos]
        best = np.min(ratios)
        cand = np.flatnonzero(ratios <= best + tol * (1 + abs(best)))
        leave = cand[np.argmin(basis[cand])]
        rows = [cost] + ([extra_cost] if extra_cost is not None else [])
        _pivot(T, rows, basis, leave, enter)
    return "maxpivots"


def _dense_simplex(c, G, h, A, b, tol):
    """Two-phase tableau simplex on the split-variable standard form."""
    p, q, e = c.size, G.shape[0], A.shape[0]
    m = q + e
    n = 2 * p + q
    M = np.zeros((m, n))
    M[:q, :p] = G
    M[:q, p:2 * p] = -G
    if q:
        M[:q, 2 * p:] = np.eye(q)
    if e:
        M[q:, :p] = A
        M[q:, p:2 * p] = -A
    r = np.concatenate([h, b]) if e else h.astype(float).copy()
    sign = np.where(r < 0, -1.0, 1.0)
    M *= sign[:, None]
    r = r * sign

    T = np.zeros((m, n + m + 1))
    T[:, :n] = M
    T[:, n:n + m] = np.eye(m)
    T[:, -1] = r
    basis = np.arange(n, n + m)

    cost2 = np.zeros(n + m + 1)
    cost2[:p] = c
    cost2[p:2 * p] = -c

    cost1 = np.zeros(n + m + 1)
    cost1[n:n + m] = 1.0
    cost1[:n] -= M.sum(axis=0)
    cost1[n:n + m] -= 1.0   # basic artificials reduce to zero
    cost1[-1] -= r.sum()

    out = _simplex_iterate(T, cost1, cost2, basis, n + m, tol)
    if out != "optimal":
        return "failure", None
    phase1 = -cost1[-1]
    if phase1 > 1e-7 * (1.0 + _inf_norm(r)):
        # duals of the phase-1 problem give the Farkas ray
        y_all = 1.0 - cost1[n:n + m]
        mult = -(sign * y_all)
        ray = _verify_farkas(G, h, A, b, mult[:q], mult[q:])
        if ray is not None:
            return "infeasible", ray
        return "failure", None

    # drive leftover artificials out of the basis
    drop = []
    for i in range(m):
        if basis[i] >= n:
            j = next((jj for jj in range(n) if abs(T[i, jj]) > 1e-9), -1)
            if j >= 0:
                _pivot(T, [cost1, cost2], basis, i, j)
            else:
                drop.append(i)
    if drop:
        keep = [i for i in range(T.shape[0]) if i not in drop]
        T = T[keep]
        basis = basis[keep]

    for i, bj in enumerate(basis):
        if cost2[bj] != 0.0:
            cost2 -= cost2[bj] * T[i]

    out = _simplex_iterate(T, cost2, None, basis, n, tol)
    if out == "maxpivots":
        return "failure", None
    if isinstance(out, tuple):
        enter = out[1]
        du = np.zeros(n + T.shape[0])
        du[enter] = 1.0
        for i, bj in enumerate(basis):
            if bj < du.size:
                du[bj] = -T[i, enter]
        dx = du[:p] - du[p:2 * p]
        ray = _verify_ray(c, G, A, dx)
        if ray is not None:
            return "unbounded", ray
        return "failure", None

    u = np.zeros(n + m)
    for i, bj in enumerate(basis):
        u[bj] = T[i, -1]
    x = u[:p] - u[p:2 * p]
    return "optimal", x


def _row_scaled(mat, rhs):
    if mat.size == 0:
        return mat, rhs
    norms = np.max(np.abs(mat), axis=1)
    norms = np.where(norms > 0, norms, 1.0)
    return mat / norms[:, None], rhs / norms


def solve_lp(lp, tol=1e-8):
    """Solve a LinearProgram; statuses other than OPTIMAL carry certificates.

    The reported objective is c'v in the caller's units. Feasibility of an
    OPTIMAL point is enforced to FEAS_TOL on the row-equilibrated system.
    """
    c = lp.c
    p = c.size
    G, h = _row_scaled(lp.G, lp.h)
    A, b = _row_scaled(lp.A_eq, lp.b_eq)
    q, e = G.shape[0], A.shape[0]

    # screen trivially decided rows
    if q:
        zero = np.max(np.abs(G), axis=1) == 0
        bad = zero & (h < -1e-12)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            cert = np.zeros(q + e)
            cert[i] = 1.0
            return LpSolution(LpStatus.INFEASIBLE, certificate=cert)
    if e:
        zero = np.max(np.abs(A), axis=1) == 0
        bad = zero & (np.abs(b) > 1e-12)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            cert = np.zeros(q + e)
            cert[q + i] = -1.0 if b[i] > 0 else 1.0
            return LpSolution(LpStatus.INFEASIBLE, certificate=cert)

    # unconstrained variables are unbounded unless their cost is zero
    touched = np.zeros(p, dtype=bool)
    if q:
        touched |= np.max(np.abs(G), axis=0) > 0
    if e:
        touched |= np.max(np.abs(A), axis=0) > 0
    loose = ~touched & (c != 0)
    if np.any(loose):
        j = int(np.flatnonzero(loose)[0])
        d = np.zeros(p)
        d[j] = -np.sign(c[j])
        return LpSolution(LpStatus.UNBOUNDED, certificate=d)

    cn = _inf_norm(c)
    cs = c / cn if cn > 0 else c

    def finish(kind, payload):
        if kind == "optimal":
            v = payload
            viol = float(np.max(G @ v - h)) if q else 0.0
            eviol = _inf_norm(A @ v - b) if e else 0.0
            if viol > FEAS_TOL or eviol > FEAS_TOL:
                return None
            return LpSolution(LpStatus.OPTIMAL, v=v, objective=float(c @ v))
        if kind == "infeasible":
            return LpSolution(LpStatus.INFEASIBLE, certificate=payload)
        if kind == "unbounded":
            return LpSolution(LpStatus.UNBOUNDED, certificate=payload)
        return None

    if q == 0:
        # equality-only (or empty) program: solve by least squares analysis
        if e == 0:
            if cn == 0:
                return LpSolution(LpStatus.OPTIMAL, v=np.zeros(p), objective=0.0)
            d = -cs
            return LpSolution(LpStatus.UNBOUNDED, certificate=d)
        x = np.linalg.lstsq(A, b, rcond=None)[0]
        if _inf_norm(A @ x - b) > FEAS_TOL:
            resid = b - A @ x
            ray = _verify_farkas(G, h, A, b, np.zeros(0), resid)
            if ray is not None:
                return LpSolution(LpStatus.INFEASIBLE, certificate=ray)
            return LpSolution(LpStatus.NUMERICAL_FAILURE)
        w = np.linalg.lstsq(A.T, cs, rcond=None)[0]
        d = -(cs - A.T @ w)
        if _inf_norm(d) > 1e-9:
            ray = _verify_ray(c, G, A, d)
            if ray is not None:
                return LpSolution(LpStatus.UNBOUNDED, certificate=ray)
        # cost constant on the feasible affine subspace: x is optimal
        return LpSolution(LpStatus.OPTIMAL, v=x, objective=float(c @ x))

    kind, payload = _mehrotra(cs, G, h, A, b, tol=tol)
    sol = finish(kind, payload)
    if sol is not None:
        return sol

    if p + q <= SIMPLEX_SIZE_LIMIT:
        logger.debug("interior point inconclusive; dense simplex fallback")
        kind, payload = _dense_simplex(cs, G, h, A, b, tol)
        sol = finish(kind, payload)
        if sol is not None:
            return sol
    return LpSolution(LpStatus.NUMERICAL_FAILURE)


def l1_epigraph(dim, weights=None):
    """Standard L1 epigraph split over v = [delta; t].

    Objective sums (optionally weighted) t; constraints -t <= delta <= t.
    Minimizing over any affine feasible set in delta recovers min ||delta||_1.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    w = np.ones(dim) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (dim,) or np.any(w < 0):
        raise ValueError("weights must be a nonnegative vector of length dim")
    c = np.concatenate([np.zeros(dim), w])
    eye = np.eye(dim)
    G = np.block([[eye, -eye], [-eye, -eye]])
    h = np.zeros(2 * dim)
    return c, G, h


def dump_lp(lp, path):
    """Write the program as plain text: objective row, inequality rows
    (coefficients then rhs), blank line, equality rows."""
    with open(path, "w") as f:
        f.write(" ".join(repr(float(v)) for v in lp.c) + "\n")
        for row, rhs in zip(lp.G, lp.h):
            f.write(" ".join(repr(float(v)) for v in row) + " " + repr(float(rhs)) + "\n")
        f.write("\n")
        for row, rhs in zip(lp.A_eq, lp.b_eq):
            f.write(" ".join(repr(float(v)) for v in row) + " " + repr(float(rhs)) + "\n")
