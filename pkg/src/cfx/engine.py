"""Counterfactual engine: assemble and solve the L1-minimal action programs.

An action mapping turns an action vector into a candidate point through an
affine map. Substituting that map into a model's affine target constraints
keeps everything linear, so each candidate branch is one LP:

    min ||delta||_1   s.t.  A (M delta + offset) <= b   (+ mapping extras)

Identity and correlation mappings act in feature space; the codebook
mapping acts on latent atom weights and carries the simplex constraints
that pin the realized point inside the atoms' convex hull.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .codebook import encode
from .covariance import CorrelationMatrix
from .models import DEFAULT_MARGIN, predict, target_constraints
from .solver import LinearProgram, LpStatus, l1_epigraph, solve_lp

logger = logging.getLogger("cfx.engine")

FOUND = "found"
NONE_FEASIBLE = "none_feasible"

HULL_EXACT = "exact"    # z0 + delta >= 0
HULL_LEMMA = "lemma"    # delta >= 0 (strictly as stated; infeasible if sum z0 > 1)


@dataclass(frozen=True)
class ActionMapping:
    kind: str                 # identity | correlation | codebook
    matrix: np.ndarray        # (d, action_dim)
    offset: np.ndarray        # (d,)
    codebook: object = None
    z0: np.ndarray = None
    hull_mode: str = None

    def apply(self, delta):
        return self.matrix @ np.asarray(delta, dtype=float) + self.offset

    @property
    def action_dim(self):
        return self.matrix.shape[1]

    @classmethod
    def identity(cls, x_orig):
        x = np.asarray(x_orig, dtype=float)
        return cls(kind="identity", matrix=np.eye(x.size), offset=x.copy())

    @classmethod
    def correlation(cls, x_orig, corr):
        x = np.asarray(x_orig, dtype=float)
        m = corr.sigma_tilde if isinstance(corr, CorrelationMatrix) else np.asarray(corr, dtype=float)
        if m.shape != (x.size, x.size):
            raise ValueError("correlation matrix does not match the sample dimension")
        return cls(kind="correlation", matrix=m.copy(), offset=x.copy())

    @classmethod
    def from_codebook(cls, cb, x_orig, hull_mode=HULL_EXACT):
        if hull_mode not in (HULL_EXACT, HULL_LEMMA):
            raise ValueError(f"unknown hull mode {hull_mode!r}")
        x = np.asarray(x_orig, dtype=float)
        z0 = encode(cb, x, simplex=False)
        return cls(kind="codebook", matrix=cb.atoms.copy(),
                   offset=cb.atoms @ z0 + cb.base, codebook=cb, z0=z0,
                   hull_mode=hull_mode)


@dataclass(frozen=True)
class CounterfactualRequest:
    x_orig: np.ndarray
    y_cf: int
    mapping: ActionMapping
    weights: np.ndarray = None   # L1 weights over the action vector


@dataclass(frozen=True)
class CounterfactualResult:
    status: str                  # FOUND | NONE_FEASIBLE
    delta: np.ndarray = None
    x_cf: np.ndarray = None
    objective: float = None
    branch: int = None

    @property
    def found(self):
        return self.status == FOUND


def _branch_lp(cset, mapping, weights):
    """Build the LP for one target constraint set under the mapping."""
    dim = mapping.action_dim
    c, G_epi, h_epi = l1_epigraph(dim, weights)
    AM = cset.A @ mapping.matrix
    rhs = cset.b - cset.A @ mapping.offset
    G = np.vstack([G_epi, np.hstack([AM, np.zeros((AM.shape[0], dim))])])
    h = np.concatenate([h_epi, rhs])
    A_eq = None
    b_eq = None
    if mapping.kind == "codebook":
        z0 = mapping.z0
        bound = np.zeros((dim, 2 * dim))
        bound[:, :dim] = -np.eye(dim)
        if mapping.hull_mode == HULL_LEMMA:
            G = np.vstack([G, bound])
            h = np.concatenate([h, np.zeros(dim)])
        else:
            G = np.vstack([G, bound])
            h = np.concatenate([h, z0.copy()])
        A_eq = np.concatenate([np.ones(dim), np.zeros(dim)])[None, :]
        b_eq = np.array([1.0 - float(z0.sum())])
    return LinearProgram(c=c, G=G, h=h, A_eq=A_eq, b_eq=b_eq)


def _solve_branch(cset, mapping, weights, tol=1e-8, dump=None, tag=""):
    """Returns (delta, weighted_l1) for a feasible branch, else None."""
    lp = _branch_lp(cset, mapping, weights)
    if dump is not None:
        dump(lp, tag)
    sol = solve_lp(lp, tol=tol)
    if sol.status != LpStatus.OPTIMAL:
        if sol.status == LpStatus.NUMERICAL_FAILURE:
            logger.warning("branch %s: numerical failure, treated as infeasible", tag)
        return None
    dim = mapping.action_dim
    delta = sol.v[:dim]
    if mapping.kind == "codebook":
        # tidy the realized code so the hull witness is exact
        w = mapping.z0 + delta
        w[(w < 0) & (w > -1e-9)] = 0.0
        total = float(w.sum())
        if abs(total - 1.0) <= 1e-6 and total > 0:
            w = w / total
        delta = w - mapping.z0
    wts = np.ones(dim) if weights is None else np.asarray(weights, dtype=float)
    return delta, float(wts @ np.abs(delta))


def compute_counterfactual(model, request, margin=DEFAULT_MARGIN, tol=1e-8,
                           dump=None):
    """Solve one LP per target constraint set and keep the cheapest branch.

    The winning point is re-validated against the model itself; branches
    whose solution fails that check are dropped.
    """
    x = np.asarray(request.x_orig, dtype=float)
    y_now = predict(model, x)
    if y_now == request.y_cf:
        raise ValueError(f"sample already predicts class {request.y_cf}")
    mapping = request.mapping
    best = None
    for k, cset in enumerate(target_constraints(model, request.y_cf, margin=margin)):
        out = _solve_branch(cset, mapping, request.weights, tol=tol,
                            dump=dump, tag=f"y{request.y_cf}_branch{k}")
        if out is None:
            continue
        delta, obj = out
        x_cf = mapping.apply(delta)
        if predict(model, x_cf) != request.y_cf:
            logger.warning("branch %d solution failed model re-check", k)
            continue
        if best is None or obj < best[1] - 1e-15:
            best = (delta, obj, x_cf, k)
    if best is None:
        return CounterfactualResult(status=NONE_FEASIBLE)
    delta, obj, x_cf, k = best
    return CounterfactualResult(status=FOUND, delta=delta, x_cf=x_cf,
                                objective=obj, branch=k)


def baseline_counterfactual(model, x_orig, y_cf, weights=None,
                            margin=DEFAULT_MARGIN, tol=1e-8, dump=None):
    """Closest counterfactual in feature space (identity action mapping)."""
    request = CounterfactualRequest(x_orig=np.asarray(x_orig, dtype=float),
                                    y_cf=int(y_cf),
                                    mapping=ActionMapping.identity(x_orig),
                                    weights=weights)
    return compute_counterfactual(model, request, margin=margin, tol=tol, dump=dump)


def hull_membership(cb, x, tol=1e-6):
    """Feasibility LP for membership of x in the atoms' shifted convex hull.

    Minimizes the sup-norm reconstruction gap over simplex weights; returns
    (inside, witness) where witness is the weight vector when inside.
    """
    x = np.asarray(x, dtype=float)
    m, d = cb.m, cb.d
    c = np.concatenate([np.zeros(m), [1.0]])
    G = np.zeros((2 * d + m + 1, m + 1))
    h = np.zeros(2 * d + m + 1)
    G[:d, :m] = cb.atoms
    G[:d, m] = -1.0
    h[:d] = x - cb.base
    G[d:2 * d, :m] = -cb.atoms
    G[d:2 * d, m] = -1.0
    h[d:2 * d] = cb.base - x
    G[2 * d:2 * d + m, :m] = -np.eye(m)
    G[-1, m] = -1.0
    A_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
    sol = solve_lp(LinearProgram(c=c, G=G, h=h, A_eq=A_eq, b_eq=np.array([1.0])),
                   tol=1e-9)
    if sol.status != LpStatus.OPTIMAL:
        return False, None
    gap = float(sol.objective)
    if gap <= tol:
        w = np.maximum(sol.v[:m], 0.0)
        return True, w / w.sum()
    return False, None
