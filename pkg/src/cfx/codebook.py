"""Primitive codebooks: alternating dictionary learning with nonnegative
sparse codes, plus the encoder/decoder pair used by the hull-constrained
counterfactual mapping.

A codebook is an atom matrix (columns are primitives) and a base vector;
decoding is the affine map atoms @ z + base, encoding solves a nonnegative
least-squares problem (optionally restricted to the probability simplex).
"""

import json
import logging

import numpy as np

logger = logging.getLogger("cfx.codebook")

DEFAULT_SPARSITY = 0.1
CODEBOOK_JSON_VERSION = 1


class Codebook:
    """Atom matrix (d, m) with columns as primitives and a base point."""

    def __init__(self, atoms, base, meta=None):
        atoms = np.asarray(atoms, dtype=float)
        base = np.asarray(base, dtype=float)
        if atoms.ndim != 2 or base.shape != (atoms.shape[0],):
            raise ValueError("atoms must be (d, m) with a length-d base")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(base))):
            raise ValueError("codebook entries must be finite")
        m = atoms.shape[1]
        for i in range(m):
            for j in range(i + 1, m):
                if np.max(np.abs(atoms[:, i] - atoms[:, j])) <= 1e-8:
                    raise ValueError(f"atoms {i} and {j} are duplicates")
        self.atoms = atoms
        self.base = base
        self.meta = dict(meta or {})

    @property
    def d(self):
        return self.atoms.shape[0]

    @property
    def m(self):
        return self.atoms.shape[1]


def _nn_lasso_cd(gram, lin, lam, z, tol=1e-12, max_pass=200):
    """min_{z>=0} ||x - P z||^2 + lam*||z||_1 given gram = P'P, lin = P'x.

    Coordinate updates from the supplied start; the fixed point reached from
    z = 0 is the canonical deterministic encoding.
    """
    m = lin.size
    gz = gram @ z
    for _ in range(max_pass):
        delta = 0.0
        for j in range(m):
            old = z[j]
            g = lin[j] - gz[j] + gram[j, j] * old - lam / 2.0
            new = max(g, 0.0) / gram[j, j] if gram[j, j] > 0 else 0.0
            if new != old:
                gz += (new - old) * gram[:, j]
                z[j] = new
                delta = max(delta, abs(new - old))
        if delta <= tol:
            break
    return z


def _project_simplex(v):
    """Euclidean projection onto {z >= 0, sum z = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.max(np.flatnonzero(u - css / np.arange(1, v.size + 1) > 0)) + 1
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


def learn_codebook(X, m, sparsity=DEFAULT_SPARSITY, epochs=20, seed=0, history=None):
    """Alternating minimization of sum_i ||x_i - (P z_i + b)||^2 + lam*||z_i||_1.

    The base is the training mean. Code steps are warm-started nonnegative
    coordinate descent; the dictionary step updates one column at a time
    (exact least squares clipped to the unit ball), so the objective never
    increases across epochs.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if m > n:
        raise ValueError(f"cannot learn {m} atoms from {n} samples")
    if sparsity < 0:
        raise ValueError("sparsity weight must be nonnegative")
    rng = np.random.default_rng(seed)
    base = X.mean(axis=0)
    Xc = X - base

    # seed atoms with distinct centered training rows
    order = rng.permutation(n)
    cols = []
    for i in order:
        cand = Xc[i]
        if all(np.max(np.abs(cand - c)) > 1e-8 for c in cols):
            cols.append(cand)
        if len(cols) == m:
            break
    while len(cols) < m:
        cols.append(rng.standard_normal(d) * (np.abs(Xc).mean() + 1.0))
    atoms = np.array(cols).T

    Z = np.zeros((n, m))
    for _ in range(epochs):
        gram = atoms.T @ atoms
        lins = Xc @ atoms
        for i in range(n):
            Z[i] = _nn_lasso_cd(gram, lins[i], sparsity, Z[i])
        for j in range(m):
            zj = Z[:, j]
            a = float(zj @ zj)
            if a <= 1e-12:
                # unused atom: replace with the worst reconstructed sample
                resid = Xc - Z @ atoms.T
                atoms[:, j] = Xc[int(np.argmax((resid ** 2).sum(axis=1)))]
                continue
            v = (Xc.T @ zj - atoms @ (Z.T @ zj)) / a + atoms[:, j]
            norm = np.linalg.norm(v)
            if norm > 1.0:
                v = v / norm
            atoms[:, j] = v
        if history is not None:
            resid = Xc - Z @ atoms.T
            obj = float((resid ** 2).sum() + sparsity * np.abs(Z).sum())
            history.append(obj / n)

    resid = Xc - Z @ atoms.T
    errs = np.linalg.norm(resid, axis=1)
    meta = {"m": int(m), "lambda": float(sparsity), "seed": int(seed),
            "epochs": int(epochs),
            "recon_threshold": float(1.5 * np.percentile(errs, 99))}
    return Codebook(atoms=atoms, base=base, meta=meta)


def encode(cb, x, simplex=False):
    """Nonnegative code minimizing the reconstruction error of x.

    simplex=True additionally constrains the code to sum to one (projected
    gradient); the result is always componentwise nonnegative.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (cb.d,):
        raise ValueError(f"expected a length-{cb.d} vector")
    gram = cb.atoms.T @ cb.atoms
    lin = cb.atoms.T @ (x - cb.base)
    if not simplex:
        return _nn_lasso_cd(gram, lin, 0.0, np.zeros(cb.m))
    lip = 2.0 * float(np.max(np.linalg.eigvalsh(gram))) + 1e-12
    z = np.full(cb.m, 1.0 / cb.m)
    for _ in range(2000):
        step = z - (2.0 / lip) * (gram @ z - lin)
        new = _project_simplex(step)
        if np.max(np.abs(new - z)) <= 1e-12:
            z = new
            break
        z = new
    return z


def decode(cb, z):
    """Reconstruction atoms @ z + base (exact affine map)."""
    z = np.asarray(z, dtype=float)
    if z.shape != (cb.m,):
        raise ValueError(f"expected a length-{cb.m} code")
    return cb.atoms @ z + cb.base


def codebook_to_json(cb):
    return {"version": CODEBOOK_JSON_VERSION, "P": cb.atoms.tolist(),
            "b": cb.base.tolist(), "meta": dict(cb.meta)}


def codebook_from_json(doc):
    if doc.get("version", CODEBOOK_JSON_VERSION) != CODEBOOK_JSON_VERSION:
        raise ValueError(f"unsupported codebook version {doc.get('version')!r}")
    return Codebook(atoms=np.array(doc["P"], dtype=float),
                    base=np.array(doc["b"], dtype=float),
                    meta=doc.get("meta", {}))


def save_codebook(cb, path):
    with open(path, "w") as f:
        json.dump(codebook_to_json(cb), f, indent=2, sort_keys=True)
        f.write("\n")


def load_codebook(path):
    with open(path) as f:
        return codebook_from_json(json.load(f))
