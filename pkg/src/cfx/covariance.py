"""Covariance estimation: MLE covariance, sparse precision via an
off-diagonal L1 penalty (block coordinate descent), and correlation
standardization.

The sparse estimate minimizes  tr(S T) - log det T + alpha * ||T||_1,offdiag
over symmetric positive definite T; its inverse is the sparse covariance
whose standardization encodes the linear feature dependencies used by the
correlation action mapping.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger("cfx.covariance")

GLASSO_TOL = 1e-5       # mean absolute change of the precision per sweep
GLASSO_MAX_SWEEPS = 200
RIDGE = 1e-8


@dataclass(frozen=True)
class CovarianceEstimate:
    sigma_emp: np.ndarray   # MLE covariance of the data
    theta: np.ndarray       # sparse precision
    sigma_hat: np.ndarray   # inverse of theta
    alpha: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class CorrelationMatrix:
    sigma_tilde: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.sigma_tilde, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("correlation matrix must be square")
        if np.max(np.abs(m - m.T)) > 1e-8:
            raise ValueError("correlation matrix must be symmetric")
        if np.max(np.abs(np.diag(m) - 1.0)) > 1e-10:
            raise ValueError("correlation matrix must have unit diagonal")
        if np.max(np.abs(m)) > 1.0 + 1e-10:
            raise ValueError("correlation entries must lie in [-1, 1]")
        object.__setattr__(self, "sigma_tilde", m)

    @property
    def d(self):
        return self.sigma_tilde.shape[0]


def empirical_covariance(X):
    """MLE (1/n) covariance; expectations replaced by sample averages."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least two rows")
    Xc = X - X.mean(axis=0)
    S = (Xc.T @ Xc) / X.shape[0]
    return (S + S.T) / 2.0


def _lasso_cd(Q, lin, alpha, beta, tol=1e-10, max_pass=1000):
    """min_b 0.5 b'Qb - lin'b + alpha*||b||_1 via cyclic coordinate descent."""
    k = lin.size
    Qb = Q @ beta
    for _ in range(max_pass):
        delta = 0.0
        for j in range(k):
            old = beta[j]
            g = lin[j] - Qb[j] + Q[j, j] * old
            new = np.sign(g) * max(abs(g) - alpha, 0.0) / Q[j, j]
            if new != old:
                Qb += (new - old) * Q[:, j]
                beta[j] = new
                delta = max(delta, abs(new - old))
        if delta <= tol:
            break
    return beta


def glasso_objective(S, theta, alpha):
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        return np.inf
    off = np.abs(theta).sum() - np.abs(np.diag(theta)).sum()
    return float(np.trace(S @ theta) - logdet + alpha * off)


def graphical_lasso(sigma_emp, alpha, tol=GLASSO_TOL, max_iter=GLASSO_MAX_SWEEPS):
    """Block coordinate descent for the off-diagonal-penalized precision.

    Cycles over columns; each column is an L1-regularized regression against
    the current working covariance. The diagonal is not penalized, so the
    working covariance keeps the empirical diagonal throughout.
    """
    S = np.asarray(sigma_emp, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("covariance must be square")
    if np.max(np.abs(S - S.T)) > 1e-8:
        raise ValueError("covariance must be symmetric")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    d = S.shape[0]
    S = (S + S.T) / 2.0
    if np.min(np.linalg.eigvalsh(S)) < 1e-10:
        S = S + RIDGE * np.eye(d)

    if d == 1:
        theta = np.array([[1.0 / S[0, 0]]])
        return CovarianceEstimate(sigma_emp=S, theta=theta, sigma_hat=S.copy(),
                                  alpha=float(alpha), iterations=0, converged=True)

    W = S.copy()
    B = np.zeros((d, d))
    idx = np.arange(d)
    theta_prev = None
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        for j in range(d):
            others = idx != j
            W11 = W[np.ix_(others, others)]
            beta = _lasso_cd(W11, S[others, j], alpha, B[others, j].copy())
            w12 = W11 @ beta
            W[others, j] = w12
            W[j, others] = w12
            B[others, j] = beta
        theta = np.zeros((d, d))
        for j in range(d):
            others = idx != j
            denom = W[j, j] - W[others, j] @ B[others, j]
            theta[j, j] = 1.0 / denom
            theta[others, j] = -theta[j, j] * B[others, j]
        theta = (theta + theta.T) / 2.0
        if theta_prev is not None:
            change = float(np.mean(np.abs(theta - theta_prev)))
            if change <= tol:
                converged = True
                break
        theta_prev = theta
    if not converged:
        warnings.warn(f"graphical lasso: no convergence in {max_iter} sweeps")

    sigma_hat = (W + W.T) / 2.0
    theta = np.linalg.inv(sigma_hat)
    theta = (theta + theta.T) / 2.0
    off = ~np.eye(d, dtype=bool)
    theta[off & (np.abs(theta) < 1e-10)] = 0.0
    return CovarianceEstimate(sigma_emp=np.asarray(sigma_emp, dtype=float),
                              theta=theta, sigma_hat=sigma_hat,
                              alpha=float(alpha), iterations=sweeps,
                              converged=converged)


def correlation_from_covariance(sigma):
    """Rescale a covariance to unit diagonal (its correlation matrix)."""
    S = np.asarray(sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("covariance must be square")
    if np.max(np.abs(S - S.T)) > 1e-8:
        raise ValueError("covariance must be symmetric")
    dg = np.diag(S)
    if np.any(dg <= 0):
        raise ValueError("covariance has a non-positive diagonal entry")
    inv_sd = 1.0 / np.sqrt(dg)
    C = S * inv_sd[:, None] * inv_sd[None, :]
    C = np.clip((C + C.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(C, 1.0)
    return CorrelationMatrix(sigma_tilde=C)


def save_matrix_csv(matrix, path):
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w") as f:
        for row in m:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matrix_csv(path):
    rows = []
    with open(path) as f:
        for ln in f:
            if ln.strip() == "":
                continue
            rows.append([float(v) for v in ln.strip().split(",")])
    m = np.array(rows, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{path}: expected a square matrix, got {m.shape}")
    return m
