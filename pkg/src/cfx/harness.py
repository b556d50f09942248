"""Experiment harness: cross-validated dependency runs (closest vs
correlation-mapped counterfactuals), the digits plausibility run (closest vs
hull-constrained counterfactuals), report serialization and image output.

All randomness is pre-derived per sample from the experiment seed, so
reports are byte-identical across re-runs of the same configuration.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import covariance as cov
from .codebook import learn_codebook, load_codebook
from .dataset import fit_standardizer, load_builtin, make_folds
from .engine import (FOUND, HULL_EXACT, ActionMapping,
                     CounterfactualRequest, baseline_counterfactual,
                     compute_counterfactual, hull_membership)
from .models import predict, train_glvq, train_softmax
from .solver import dump_lp

logger = logging.getLogger("cfx.harness")

OVERLAP_EPS = 1e-4
DEPENDENCY_DATASETS = ("iris", "wine", "breastcancer")


@dataclass
class ExperimentConfig:
    dataset: str
    model: str = "softmax"
    experiment: str = "dependency"
    folds: int = 3
    seed: int = 0
    alpha: float = 0.8
    atoms: int = 10
    codebook_lambda: float = 0.1
    codebook_epochs: int = 20
    hull_mode: str = HULL_EXACT
    n_samples: int = 20            # plausibility request budget
    margin: float = 1e-4
    overlap_eps: float = OVERLAP_EPS
    softmax_epochs: int = 500
    softmax_lr: float = 0.1
    glvq_prototypes: int = 3
    glvq_epochs: int = 100
    glvq_lr: float = 0.05
    out_dir: str = None
    corr_matrix_path: str = None
    codebook_path: str = None
    dump_lp_dir: str = None

    def echo(self):
        return {k: v for k, v in asdict(self).items()}


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    folds: list
    records: list
    aggregates: dict

    def to_json_doc(self):
        return {"kind": self.kind, "config": self.config, "folds": self.folds,
                "records": self.records, "aggregates": self.aggregates}

    def to_json_bytes(self):
        return (json.dumps(self.to_json_doc(), sort_keys=True, indent=2) + "\n").encode()


def feature_overlap(d1, d2, eps=OVERLAP_EPS):
    """Count features that are zero in both vectors or nonzero in both."""
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if d1.shape != d2.shape or d1.ndim != 1:
        raise ValueError("change vectors must share one length")
    return int(np.sum((np.abs(d1) <= eps) == (np.abs(d2) <= eps)))


def _fold_seed(seed, fold):
    return int(seed) * 1000003 + fold


def _target_for(seed, fold, sample, y_now, n_classes):
    rng = np.random.default_rng([int(seed), int(fold), int(sample)])
    choices = [c for c in range(n_classes) if c != y_now]
    return int(choices[rng.integers(len(choices))])


def _train_model(cfg, X, y, fold):
    seed = _fold_seed(cfg.seed, fold)
    if cfg.model == "softmax":
        return train_softmax(X, y, epochs=cfg.softmax_epochs,
                             lr=cfg.softmax_lr, seed=seed)
    if cfg.model == "glvq":
        return train_glvq(X, y, r=cfg.glvq_prototypes, epochs=cfg.glvq_epochs,
                          lr=cfg.glvq_lr, seed=seed)
    raise ValueError(f"unknown model id {cfg.model!r}")


def _make_dumper(cfg):
    if cfg.dump_lp_dir is None:
        return None
    os.makedirs(cfg.dump_lp_dir, exist_ok=True)
    counter = {"n": 0}

    def dump(lp, tag):
        path = os.path.join(cfg.dump_lp_dir, f"{counter['n']:06d}_{tag}.txt")
        dump_lp(lp, path)
        counter["n"] += 1

    return dump


def _result_entry(res, std=None):
    entry = {"status": res.status}
    if res.found:
        entry["delta"] = [float(v) for v in res.delta]
        entry["x_cf"] = [float(v) for v in res.x_cf]
        entry["objective"] = float(res.objective)
        entry["branch"] = int(res.branch)
        if std is not None:
            entry["x_cf_raw"] = [float(v) for v in std.invert(res.x_cf)]
    return entry


def run_dependency_experiment(cfg, data=None, corr_lookup=None):
    """Per fold: standardize on train, fit the model, estimate the sparse
    correlation matrix, then solve closest and correlation-mapped programs
    for every correctly classified test sample under a shared random target.
    """
    if data is None:
        if cfg.dataset not in DEPENDENCY_DATASETS:
            raise ValueError(
                f"dependency experiment expects one of {DEPENDENCY_DATASETS}")
        data = load_builtin(cfg.dataset)
    dump = _make_dumper(cfg)
    global_corr = None
    if cfg.corr_matrix_path is not None:
        global_corr = cov.load_matrix_csv(cfg.corr_matrix_path)

    plan = make_folds(data.n, cfg.folds, cfg.seed, labels=data.labels)
    fold_infos, records = [], []
    for fold in range(cfg.folds):
        tr, te = plan.train_indices(fold), plan.test_indices(fold)
        if len(np.unique(data.labels[tr])) < data.n_classes:
            logger.warning("fold %d lacks a class in training; skipped", fold)
            fold_infos.append({"fold": fold, "skipped": True})
            continue
        std = fit_standardizer(data, tr)
        Xtr = std.apply(data.features[tr])
        Xte = std.apply(data.features[te])
        model = _train_model(cfg, Xtr, data.labels[tr], fold)
        preds = predict(model, Xte)
        correct = preds == data.labels[te]

        if global_corr is not None:
            corr = cov.CorrelationMatrix(sigma_tilde=global_corr)
        else:
            est = cov.graphical_lasso(cov.empirical_covariance(Xtr), cfg.alpha)
            corr = cov.correlation_from_covariance(est.sigma_hat)

        fold_infos.append({
            "fold": fold, "skipped": False, "n_train": int(len(tr)),
            "n_test": int(len(te)), "n_correct": int(correct.sum()),
            "accuracy": float(correct.mean()),
            "standardizer_mean": [float(v) for v in std.mean],
            "standardizer_std": [float(v) for v in std.std],
            "correlation": [[float(v) for v in row] for row in corr.sigma_tilde],
        })

        for pos in np.flatnonzero(correct):
            sample = int(te[pos])
            x = Xte[pos]
            y_now = int(preds[pos])
            y_cf = _target_for(cfg.seed, fold, sample, y_now, data.n_classes)
            corr_here = corr
            if corr_lookup is not None:
                override = corr_lookup(sample)
                if override is not None:
                    corr_here = cov.CorrelationMatrix(sigma_tilde=np.asarray(override, dtype=float))
            base = baseline_counterfactual(model, x, y_cf, margin=cfg.margin,
                                           dump=dump)
            req = CounterfactualRequest(
                x_orig=x, y_cf=y_cf,
                mapping=ActionMapping.correlation(x, corr_here))
            act = compute_counterfactual(model, req, margin=cfg.margin, dump=dump)

            rec = {"sample": sample, "fold": fold, "y_orig": y_now, "y_cf": y_cf,
                   "baseline": _result_entry(base, std),
                   "actionable": _result_entry(act, std)}
            rec["valid_baseline"] = bool(predict(model, base.x_cf) == y_cf) if base.found else None
            rec["valid_actionable"] = bool(predict(model, act.x_cf) == y_cf) if act.found else None
            if base.found and act.found:
                rec["distance"] = float(np.linalg.norm(base.x_cf - act.x_cf))
                rec["delta_distance"] = float(np.linalg.norm(base.delta - act.delta))
                rec["overlap"] = feature_overlap(base.delta, act.delta, cfg.overlap_eps)
            else:
                rec["distance"] = None
                rec["delta_distance"] = None
                rec["overlap"] = None
            records.append(rec)

    records.sort(key=lambda r: r["sample"])
    report = ExperimentReport(kind="dependency", config=cfg.echo(),
                              folds=fold_infos, records=records,
                              aggregates=_aggregate(records, data.d))
    if cfg.out_dir:
        write_report(report, cfg.out_dir)
    return report


def run_plausibility_experiment(cfg, data=None):
    """Digits: learn/load the codebook on the training portion, then solve
    closest and hull-constrained programs for sampled correctly classified
    test digits; image triples are written when an output dir is set.
    """
    if data is None:
        if cfg.dataset != "digits":
            raise ValueError("plausibility experiment expects the digits dataset")
        data = load_builtin(cfg.dataset)
    if cfg.model != "softmax":
        raise ValueError("plausibility experiment runs on the softmax model")
    dump = _make_dumper(cfg)

    plan = make_folds(data.n, cfg.folds, cfg.seed, labels=data.labels)
    fold = 0
    tr, te = plan.train_indices(fold), plan.test_indices(fold)
    std = fit_standardizer(data, tr)
    Xtr = std.apply(data.features[tr])
    Xte = std.apply(data.features[te])
    model = _train_model(cfg, Xtr, data.labels[tr], fold)
    preds = predict(model, Xte)
    correct = preds == data.labels[te]

    if cfg.codebook_path is not None:
        cb = load_codebook(cfg.codebook_path)
    else:
        cb = learn_codebook(Xtr, cfg.atoms, sparsity=cfg.codebook_lambda,
                            epochs=cfg.codebook_epochs, seed=cfg.seed)

    rng = np.random.default_rng([int(cfg.seed), 777])
    pool = np.flatnonzero(correct)
    take = min(cfg.n_samples, pool.size)
    chosen = np.sort(rng.choice(pool, size=take, replace=False))

    fold_info = {"fold": fold, "skipped": False, "n_train": int(len(tr)),
                 "n_test": int(len(te)), "n_correct": int(correct.sum()),
                 "accuracy": float(correct.mean()),
                 "standardizer_mean": [float(v) for v in std.mean],
                 "standardizer_std": [float(v) for v in std.std],
                 "codebook_meta": dict(cb.meta),
                 "codebook_external": cfg.codebook_path is not None}

    records = []
    for pos in chosen:
        sample = int(te[pos])
        x = Xte[pos]
        y_now = int(preds[pos])
        y_cf = _target_for(cfg.seed, fold, sample, y_now, data.n_classes)
        closest = baseline_counterfactual(model, x, y_cf, margin=cfg.margin,
                                          dump=dump)
        req = CounterfactualRequest(
            x_orig=x, y_cf=y_cf,
            mapping=ActionMapping.from_codebook(cb, x, hull_mode=cfg.hull_mode))
        plaus = compute_counterfactual(model, req, margin=cfg.margin, dump=dump)

        rec = {"sample": sample, "fold": fold, "y_orig": y_now, "y_cf": y_cf,
               "x_orig": [float(v) for v in x],
               "closest": _result_entry(closest, std),
               "plausible": _result_entry(plaus, std)}
        rec["valid_closest"] = bool(predict(model, closest.x_cf) == y_cf) if closest.found else None
        rec["valid_plausible"] = bool(predict(model, plaus.x_cf) == y_cf) if plaus.found else None
        if plaus.found:
            inside, _ = hull_membership(cb, plaus.x_cf)
            rec["hull_member"] = bool(inside)
            rec["effect_l1_plausible"] = float(np.abs(plaus.x_cf - x).sum())
        else:
            rec["hull_member"] = None
            rec["effect_l1_plausible"] = None
        rec["effect_l1_closest"] = float(np.abs(closest.x_cf - x).sum()) if closest.found else None
        if closest.found and plaus.found:
            rec["distance"] = float(np.linalg.norm(closest.x_cf - plaus.x_cf))
            rec["overlap"] = feature_overlap(closest.x_cf - x, plaus.x_cf - x,
                                             cfg.overlap_eps)
        else:
            rec["distance"] = None
            rec["overlap"] = None
        records.append(rec)

    report = ExperimentReport(kind="plausibility", config=cfg.echo(),
                              folds=[fold_info], records=records,
                              aggregates=_aggregate(records, data.d,
                                                    pair=("closest", "plausible")))
    if cfg.out_dir:
        write_report(report, cfg.out_dir)
        emit_images(report, os.path.join(cfg.out_dir, "images"))
    return report


def _aggregate(records, d, pair=("baseline", "actionable")):
    n_requests = len(records)
    distances = [r["distance"] for r in records if r["distance"] is not None]
    overlaps = [r["overlap"] for r in records if r["overlap"] is not None]
    found_flags = []
    for r in records:
        for side in pair:
            if r[side]["status"] == FOUND:
                found_flags.append(r.get("valid_" + side))
    valid = [bool(v) for v in found_flags if v is not None]
    agg = {
        "n_requests": n_requests,
        "n_pairs": len(distances),
        "feasibility_rate": (len(distances) / n_requests) if n_requests else None,
        "median_distance": float(np.median(distances)) if distances else None,
        "overlap_quartiles": ([float(q) for q in
                               np.percentile(overlaps, [25, 50, 75])]
                              if overlaps else None),
        "mean_overlap": float(np.mean(overlaps)) if overlaps else None,
        "n_features": int(d),
        "validity_rate": (float(np.mean(valid)) if valid else None),
    }
    return agg


def write_report(report, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "wb") as f:
        f.write(report.to_json_bytes())
    with open(os.path.join(out_dir, "records.csv"), "w") as f:
        f.write("sample,fold,y_orig,y_cf,distance,delta_distance,overlap\n")
        for r in report.records:
            f.write(",".join(str(r.get(k, "")) if r.get(k) is not None else ""
                             for k in ("sample", "fold", "y_orig", "y_cf",
                                       "distance", "delta_distance", "overlap"))
                    + "\n")
    return os.path.join(out_dir, "report.json")


def _to_pixels(raw):
    grid = np.clip(np.asarray(raw, dtype=float), 0.0, 16.0)
    return np.rint(grid).astype(int)


def write_pgm(values, path, side=8, maxval=16):
    pix = _to_pixels(values)
    if pix.size != side * side:
        raise ValueError(f"expected {side * side} pixels, got {pix.size}")
    with open(path, "w") as f:
        f.write(f"P2\n{side} {side}\n{maxval}\n")
        for row in pix.reshape(side, side):
            f.write(" ".join(str(int(v)) for v in row) + "\n")


def read_pgm(path):
    with open(path) as f:
        tokens = f.read().split()
    if tokens[0] != "P2":
        raise ValueError("not an ASCII PGM file")
    w, h = int(tokens[1]), int(tokens[2])
    vals = np.array([int(t) for t in tokens[4:4 + w * h]], dtype=int)
    return vals.reshape(h, w)


def emit_images(report, out_dir):
    """One 8x8 grayscale PGM per original/closest/plausible image, plus a
    contact-sheet CSV of the quantized pixel grids."""
    if report.kind != "plausibility":
        raise ValueError("image emission is defined for plausibility reports")
    os.makedirs(out_dir, exist_ok=True)
    info = report.folds[0]
    mean = np.array(info["standardizer_mean"])
    sd = np.array(info["standardizer_std"])
    written = []
    rows = []
    for rec in report.records:
        sample = rec["sample"]
        triples = [("orig", np.array(rec["x_orig"]) * sd + mean, rec["y_orig"])]
        for kind, key in (("closest", "closest"), ("plausible", "plausible")):
            entry = rec[key]
            if entry["status"] == FOUND:
                triples.append((kind, np.array(entry["x_cf_raw"]), rec["y_cf"]))
        for kind, raw, label in triples:
            name = f"{sample}_{kind}_{label}.pgm"
            write_pgm(raw, os.path.join(out_dir, name))
            written.append(name)
            rows.append([sample, kind, label] + [int(v) for v in _to_pixels(raw)])
    with open(os.path.join(out_dir, "contact_sheet.csv"), "w") as f:
        f.write("sample,kind,label," + ",".join(f"p{i}" for i in range(64)) + "\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")
    return written
