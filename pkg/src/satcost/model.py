"""Ridge regression on log-cost with AIC backward elimination.

Training pipeline: drop zero-variance columns, z-score, backward-eliminate
the feature with the smallest |standardized weight| while AIC does not
increase, prune near-collinear survivors, then refit.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .features import FeatureVector, LabeledExample, feature_matrix

log = logging.getLogger(__name__)

MODEL_SCHEMA = 1
DEFAULT_LAMBDA = 1.0
DEFAULT_COLLINEAR_THRESHOLD = 0.98
MIN_TRAINING_EXAMPLES = 10


class SingularSystemError(np.linalg.LinAlgError):
    pass


class ModelError(ValueError):
    pass


def ridge_fit(X, y, lam: float = DEFAULT_LAMBDA) -> tuple[float, np.ndarray]:
    """Minimize ||y - b - Xw||^2 + lam*||w||^2 with the intercept b unpenalized.

    Normal equations on the intercept-augmented design, solved through a
    Cholesky factorization. Returns ``(b, w)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n < 2:
        raise ModelError("ridge_fit needs at least two rows")
    if lam < 0:
        raise ModelError("lambda must be >= 0")
    Z = np.hstack([np.ones((n, 1)), X])
    A = Z.T @ Z
    A[np.arange(1, k + 1), np.arange(1, k + 1)] += lam
    rhs = Z.T @ y
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise SingularSystemError("normal equations are singular; use lambda > 0") from None
    d = np.diag(L)
    if d.min() <= 1e-10 * d.max():
        raise SingularSystemError("normal equations are numerically singular; use lambda > 0")
    sol = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    return float(sol[0]), sol[1:]


def aic(n: int, rss: float, k: int) -> float:
    """Gaussian AIC with k non-intercept parameters."""
    return n * math.log(max(rss, 1e-300) / n) + 2 * (k + 1)


def _rss(X, y, b, w) -> float:
    r = y - b - X @ w
    return float(r @ r)


def drop_collinear(X, names: Sequence[str], threshold: float = DEFAULT_COLLINEAR_THRESHOLD):
    """Greedy pairwise pruning in column order; the later column of a pair
    with |Pearson r| >= threshold is dropped. Zero-variance columns go first.

    Returns ``(kept column indices, [(name, reason), ...])``.
    """
    X = np.asarray(X, dtype=float)
    dropped = []
    sd = X.std(axis=0)
    live = []
    for j, name in enumerate(names):
        if sd[j] <= 1e-12 * max(1.0, abs(X[:, j]).max(initial=0.0)):
            dropped.append((name, "zero-variance"))
        else:
            live.append(j)
    if not live:
        return [], dropped
    Z = (X[:, live] - X[:, live].mean(0)) / X[:, live].std(0)
    R = (Z.T @ Z) / X.shape[0]
    keep = []
    for a in range(len(live)):
        if any(abs(R[a, b]) >= threshold for b in keep):
            dropped.append((names[live[a]], "collinear"))
        else:
            keep.append(a)
    return [live[a] for a in keep], dropped


def aic_backward_eliminate(X, y, names: Sequence[str], lam: float = DEFAULT_LAMBDA):
    """Backward elimination on a standardized design.

    Returns ``(kept column indices, intercept, weights, eliminated names)``.
    Ties in |weight| are broken by feature name.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    cols = list(range(X.shape[1]))
    eliminated = []

    def fit(cs):
        if not cs:
            b = float(y.mean())
            return b, np.zeros(0), aic(n, _rss(X[:, []], y, b, np.zeros(0)), 0)
        b, w = ridge_fit(X[:, cs], y, lam)
        return b, w, aic(n, _rss(X[:, cs], y, b, w), len(cs))

    b, w, cur = fit(cols)
    while cols:
        pos = min(range(len(cols)), key=lambda i: (abs(w[i]), names[cols[i]]))
        trial = cols[:pos] + cols[pos + 1:]
        tb, tw, tAIC = fit(trial)
        if tAIC > cur:
            break
        eliminated.append(names[cols[pos]])
        cols, b, w, cur = trial, tb, tw, tAIC
    if not cols:
        log.warning("all features eliminated; intercept-only model")
    return cols, b, w, eliminated


@dataclass
class TrainedModel:
    feature_names: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray
    intercept: float
    coef: np.ndarray
    lam: float
    n_train: int
    dropped: list[tuple[str, str]] = field(default_factory=list)
    fingerprint: str = ""
    label: str = ""  # e.g. "sat" / "unsat" / "all"

    @property
    def weights(self) -> np.ndarray:
        """Intercept followed by standardized-feature weights."""
        return np.concatenate([[self.intercept], self.coef])

    def raw_coefficients(self) -> tuple[float, np.ndarray]:
        """Weights for unstandardized features: (intercept, coef)."""
        c = self.coef / self.scale
        return float(self.intercept - c @ self.mean), c

    def _vector(self, features) -> np.ndarray:
        if isinstance(features, FeatureVector):
            features = features.as_dict()
        if isinstance(features, Mapping):
            missing = [f for f in self.feature_names if f not in features]
            if missing:
                raise ModelError(f"query vector lacks model features: {', '.join(missing[:5])}")
            return np.array([features[f] for f in self.feature_names], dtype=float)
        x = np.asarray(features, dtype=float)
        if x.shape != (len(self.feature_names),):
            raise ModelError("query vector has the wrong dimension")
        return x

    def predict(self, features) -> float:
        x = self._vector(features)
        return float(self.intercept + ((x - self.mean) / self.scale) @ self.coef)

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "label": self.label,
            "fingerprint": self.fingerprint,
            "lambda": self.lam,
            "n_train": self.n_train,
            "features": list(self.feature_names),
            "mean": [float(v) for v in self.mean],
            "scale": [float(v) for v in self.scale],
            "intercept": self.intercept,
            "coef": [float(v) for v in self.coef],
            "dropped": [list(d) for d in self.dropped],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("schema") != MODEL_SCHEMA:
            raise ModelError(f"unsupported model schema {d.get('schema')!r}")
        return cls(tuple(d["features"]), np.array(d["mean"], dtype=float),
                   np.array(d["scale"], dtype=float), float(d["intercept"]),
                   np.array(d["coef"], dtype=float), float(d["lambda"]), int(d["n_train"]),
                   [tuple(x) for x in d["dropped"]], d.get("fingerprint", ""),
                   d.get("label", ""))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def train_matrix(X, y, names: Sequence[str], lam: float = DEFAULT_LAMBDA,
                 collinear_threshold: float = DEFAULT_COLLINEAR_THRESHOLD) -> TrainedModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    names = tuple(names)
    if len(y) < MIN_TRAINING_EXAMPLES:
        raise ModelError(f"need at least {MIN_TRAINING_EXAMPLES} examples, got {len(y)}")
    if X.shape != (len(y), len(names)):
        raise ModelError("design matrix does not match feature names")

    dropped = []
    mean = X.mean(0)
    scale = X.std(0)
    live = []
    for j, name in enumerate(names):
        if scale[j] <= 1e-12 * max(1.0, abs(mean[j])):
            dropped.append((name, "zero-variance"))
        else:
            live.append(j)
    Z = (X[:, live] - mean[live]) / scale[live]
    live_names = [names[j] for j in live]

    kept, _, _, eliminated = aic_backward_eliminate(Z, y, live_names, lam)
    dropped.extend((n, "AIC") for n in eliminated)
    sub = [live_names[i] for i in kept]
    keep2, coll = drop_collinear(Z[:, kept], sub, collinear_threshold)
    dropped.extend(coll)
    final = [kept[i] for i in keep2]

    if final:
        b, w = ridge_fit(Z[:, final], y, lam)
    else:
        b, w = float(y.mean()), np.zeros(0)
    sel = [live[i] for i in final]
    return TrainedModel(tuple(names[j] for j in sel), mean[sel], scale[sel], b, w, lam,
                        len(y), dropped)


def train(examples: Sequence[LabeledExample], lam: float = DEFAULT_LAMBDA,
          collinear_threshold: float = DEFAULT_COLLINEAR_THRESHOLD,
          fingerprint: str = "", label: str = "") -> TrainedModel:
    if len(examples) < MIN_TRAINING_EXAMPLES:
        raise ModelError(f"need at least {MIN_TRAINING_EXAMPLES} examples, got {len(examples)}")
    X, y, names = feature_matrix(examples)
    model = train_matrix(X, y, names, lam, collinear_threshold)
    model.fingerprint = fingerprint
    model.label = label
    return model


def predict(model: TrainedModel, features) -> float:
    return model.predict(features)


def combine_two_models(pred_sat: float, pred_unsat: float) -> float:
    """Geometric mean of the two cost predictions, i.e. the mean in log space."""
    if not (math.isfinite(pred_sat) and math.isfinite(pred_unsat)):
        raise ModelError("predictions must be finite")
    return (pred_sat + pred_unsat) / 2.0
