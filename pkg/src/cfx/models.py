"""Softmax regression and GLVQ classifiers, plus the export of their
target-prediction regions as affine constraint sets.

Both models have exactly affine decision cells, so for any target label the
region {x : predict(x) = target} is a finite union of polyhedra; each
polyhedron comes back as one AffineConstraintSet (softmax yields one set,
GLVQ one per target prototype).
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger("cfx.models")

DEFAULT_MARGIN = 1e-4   # slack on the standardized logit/distance scale

MODEL_JSON_VERSION = 1


class DivergenceError(RuntimeError):
    """Training loss became non-finite; retry with a smaller learning rate."""


@dataclass(frozen=True)
class SoftmaxRegression:
    weights: np.ndarray   # (K, d)
    biases: np.ndarray    # (K,)

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        bias = np.asarray(self.biases, dtype=float)
        if W.ndim != 2 or W.shape[0] < 2 or bias.shape != (W.shape[0],):
            raise ValueError("weights must be (K, d) with K >= 2 and matching biases")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(bias))):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", bias)

    @property
    def n_classes(self):
        return self.weights.shape[0]

    @property
    def n_features(self):
        return self.weights.shape[1]


@dataclass(frozen=True)
class GlvqModel:
    prototypes: np.ndarray        # (K*r, d)
    prototype_labels: np.ndarray  # (K*r,)

    def __post_init__(self):
        P = np.asarray(self.prototypes, dtype=float)
        labs = np.asarray(self.prototype_labels, dtype=int)
        if P.ndim != 2 or labs.shape != (P.shape[0],):
            raise ValueError("prototypes must be (n_proto, d) with one label each")
        if not np.all(np.isfinite(P)):
            raise ValueError("prototypes must be finite")
        counts = np.bincount(labs)
        if len(np.unique(counts)) != 1:
            raise ValueError("every class must own the same number of prototypes")
        object.__setattr__(self, "prototypes", P)
        object.__setattr__(self, "prototype_labels", labs)

    @property
    def n_classes(self):
        return int(self.prototype_labels.max()) + 1

    @property
    def n_features(self):
        return self.prototypes.shape[1]


@dataclass(frozen=True)
class AffineConstraintSet:
    """Polyhedron {x : A x <= b}; rows that are identically false are
    rejected at construction."""
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] < 1 or A.shape[0] != b.size:
            raise ValueError("need at least one row and matching rhs")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("constraint entries must be finite")
        dead = (np.max(np.abs(A), axis=1) == 0) & (b < 0)
        if np.any(dead):
            raise ValueError("trivially infeasible row (zero coefficients, negative rhs)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def contains(self, x, tol=0.0):
        return bool(np.all(self.A @ np.asarray(x, dtype=float) <= self.b + tol))


def _one_hot(y, k):
    out = np.zeros((y.size, k))
    out[np.arange(y.size), y] = 1.0
    return out


def _softmax(scores):
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_loss_grad(W, bias, X, y, weight_decay=0.0):
    """Mean cross-entropy (plus optional L2 weight penalty) and its gradient."""
    n = X.shape[0]
    probs = _softmax(X @ W.T + bias)
    eps = 1e-300
    loss = -float(np.mean(np.log(probs[np.arange(n), y] + eps)))
    diff = probs - _one_hot(y, W.shape[0])
    gW = (diff.T @ X) / n
    if weight_decay:
        loss += 0.5 * weight_decay * float((W ** 2).sum())
        gW = gW + weight_decay * W
    return loss, gW, diff.mean(axis=0)


def train_softmax(X, y, epochs=500, lr=0.1, seed=0, weight_decay=0.0,
                  history=None):
    """Full-batch gradient descent on mean cross-entropy.

    Deterministic for a fixed seed; epochs=0 returns the seeded
    initialization untouched. weight_decay adds an L2 penalty on the
    weights (not the biases).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    k = int(y.max()) + 1
    if k < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(seed)
    W = 0.01 * rng.standard_normal((k, X.shape[1]))
    bias = np.zeros(k)
    for _ in range(epochs):
        loss, gW, gb = softmax_loss_grad(W, bias, X, y, weight_decay)
        if not np.isfinite(loss):
            raise DivergenceError("cross-entropy diverged; lower the learning rate")
        if history is not None:
            history.append(loss)
        W = W - lr * gW
        bias = bias - lr * gb
    if not np.all(np.isfinite(W)):
        raise DivergenceError("weights diverged; lower the learning rate")
    return SoftmaxRegression(weights=W, biases=bias)


def _lloyd_kmeans(X, k, rng, iters=50):
    n = X.shape[0]
    centers = X[rng.choice(n, size=k, replace=False)].copy()
    for _ in range(iters):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        new = centers.copy()
        for j in range(k):
            members = X[assign == j]
            if len(members):
                new[j] = members.mean(axis=0)
            else:
                new[j] = X[int(np.argmax(d2.min(axis=1)))]
        if np.allclose(new, centers, atol=1e-12):
            break
        centers = new
    return centers


def glvq_initial_prototypes(X, y, r, seed):
    """Class-conditional k-means centers, class-major order."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    k = int(y.max()) + 1
    rng = np.random.default_rng(seed)
    protos, labels = [], []
    for cls in range(k):
        members = X[y == cls]
        if members.shape[0] < r:
            raise ValueError(f"class {cls} has {members.shape[0]} samples, needs >= {r}")
        protos.append(_lloyd_kmeans(members, r, rng))
        labels.extend([cls] * r)
    return np.vstack(protos), np.array(labels, dtype=int)


def glvq_cost(model, X, y, slope=2.0):
    """Mean sigmoid-squashed relative-distance cost of a GLVQ system."""
    d2 = ((X[:, None, :] - model.prototypes[None, :, :]) ** 2).sum(axis=2)
    same = model.prototype_labels[None, :] == y[:, None]
    d_plus = np.where(same, d2, np.inf).min(axis=1)
    d_minus = np.where(~same, d2, np.inf).min(axis=1)
    mu = (d_plus - d_minus) / (d_plus + d_minus + 1e-300)
    return float(np.mean(1.0 / (1.0 + np.exp(-slope * mu))))


def train_glvq(X, y, r=3, epochs=100, lr=0.05, seed=0, slope=2.0, history=None):
    """GLVQ with sigmoid squashing, SGD with per-epoch shuffling.

    Prototypes start at seeded class-conditional k-means centers; epochs=0
    returns that initialization.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    protos, labels = glvq_initial_prototypes(X, y, r, seed)
    rng = np.random.default_rng(seed + 1)
    n = X.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in order:
            x = X[i]
            d2 = ((protos - x) ** 2).sum(axis=1)
            same = labels == y[i]
            ip = int(np.flatnonzero(same)[np.argmin(d2[same])])
            im = int(np.flatnonzero(~same)[np.argmin(d2[~same])])
            dp, dm = d2[ip], d2[im]
            denom = dp + dm
            if denom <= 0:
                continue
            mu = (dp - dm) / denom
            sig = 1.0 / (1.0 + np.exp(-slope * mu))
            f_prime = slope * sig * (1.0 - sig)
            protos[ip] += lr * f_prime * (4.0 * dm / denom ** 2) * (x - protos[ip])
            protos[im] -= lr * f_prime * (4.0 * dp / denom ** 2) * (x - protos[im])
        model = GlvqModel(prototypes=protos.copy(), prototype_labels=labels)
        if history is not None:
            history.append(glvq_cost(model, X, y, slope))
    return GlvqModel(prototypes=protos, prototype_labels=labels)


def predict(model, x):
    """Class index for a single vector, or an index array for a matrix.

    Ties resolve to the lowest prototype/class index.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("inputs must be finite")
    if isinstance(model, SoftmaxRegression):
        out = np.argmax(X @ model.weights.T + model.biases, axis=1)
    elif isinstance(model, GlvqModel):
        d2 = ((X[:, None, :] - model.prototypes[None, :, :]) ** 2).sum(axis=2)
        out = model.prototype_labels[np.argmin(d2, axis=1)]
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return int(out[0]) if single else out


def target_constraints(model, y_cf, margin=DEFAULT_MARGIN):
    """Affine sets whose union covers the region predicting y_cf.

    Every x satisfying any returned set predicts y_cf (by at least the
    margin). Softmax: single set of pairwise logit differences. GLVQ: one
    set per target prototype; the squared-distance comparison is affine
    because the quadratic terms cancel.
    """
    if not 0 <= y_cf < model.n_classes:
        raise ValueError(f"label {y_cf} out of range for {model.n_classes} classes")
    if isinstance(model, SoftmaxRegression):
        W, bias = model.weights, model.biases
        others = [j for j in range(model.n_classes) if j != y_cf]
        A = W[others] - W[y_cf]
        b = bias[y_cf] - bias[others] - margin
        return [AffineConstraintSet(A=A, b=b)]
    if isinstance(model, GlvqModel):
        P, labs = model.prototypes, model.prototype_labels
        norms = (P ** 2).sum(axis=1)
        targets = np.flatnonzero(labs == y_cf)
        rivals = np.flatnonzero(labs != y_cf)
        sets = []
        for t in targets:
            A = 2.0 * (P[rivals] - P[t])
            b = norms[rivals] - norms[t] - margin
            try:
                sets.append(AffineConstraintSet(A=A, b=b))
            except ValueError:
                # duplicated prototypes across classes make this cell empty
                logger.warning("skipping empty prototype cell %d", t)
        return sets
    raise TypeError(f"unsupported model type {type(model).__name__}")


def model_to_json(model, meta=None):
    doc = {"version": MODEL_JSON_VERSION, "meta": dict(meta or {})}
    if isinstance(model, SoftmaxRegression):
        doc["type"] = "softmax"
        doc["weights"] = model.weights.tolist()
        doc["biases"] = model.biases.tolist()
    elif isinstance(model, GlvqModel):
        doc["type"] = "glvq"
        doc["prototypes"] = model.prototypes.tolist()
        doc["prototype_labels"] = model.prototype_labels.tolist()
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return doc


def model_from_json(doc):
    if doc.get("version") != MODEL_JSON_VERSION:
        raise ValueError(f"unsupported model document version {doc.get('version')!r}")
    if doc["type"] == "softmax":
        return SoftmaxRegression(weights=np.array(doc["weights"], dtype=float),
                                 biases=np.array(doc["biases"], dtype=float))
    if doc["type"] == "glvq":
        return GlvqModel(prototypes=np.array(doc["prototypes"], dtype=float),
                         prototype_labels=np.array(doc["prototype_labels"], dtype=int))
    raise ValueError(f"unknown model type {doc['type']!r}")


def save_model(model, path, meta=None):
    with open(path, "w") as f:
        json.dump(model_to_json(model, meta), f, indent=2, sort_keys=True)
        f.write("\n")


def load_model(path):
    with open(path) as f:
        return model_from_json(json.load(f))
