"""Small-sample classifiers: CV logistic regression, random forest, sigmoid SVM.

Every estimator exposes ``score(X)`` returning values in [0, 1]; a
:class:`TrainedModel` bundles one with the :class:`Scaler` fitted on its
training data and the feature names it expects. Models persist to a
self-describing JSON file (see ``save_model``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluation import f1_score, stratified_folds
from .preprocessing import Scaler, apply_scaler, fit_scaler

__all__ = [
    "MODEL_KINDS",
    "ConvergenceError",
    "logistic_loss_grad",
    "LogisticModel",
    "fit_logistic",
    "train_logreg_cv",
    "RandomForest",
    "train_random_forest",
    "SigmoidSVM",
    "sigmoid_kernel",
    "smo_solve",
    "dual_objective",
    "train_svm_sigmoid",
    "TrainedModel",
    "train_model",
    "save_model",
    "load_model",
]

MODEL_KINDS = ("logreg_cv", "random_forest", "svm_sigmoid")
MODEL_FORMAT = "fundusqa-model"
MODEL_FORMAT_VERSION = 1

LOGREG_GRID = tuple(10.0**p for p in range(-3, 4))


class ConvergenceError(RuntimeError):
    pass


def _check_binary(y) -> np.ndarray:
    y = np.asarray(y).astype(int)
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError("labels must be 0 or 1")
    if np.unique(y).size < 2:
        raise ValueError("training data contains a single class")
    return y


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# ---------------------------------------------------------------- logistic


def logistic_loss_grad(params: np.ndarray, X: np.ndarray, y: np.ndarray, C: float) -> tuple:
    """Penalised mean log-loss and its gradient.

    ``params`` is ``[w..., b]``. The objective is
    ``mean(log(1 + exp(z)) - y z) + |w|^2 / (2 C n)`` with ``z = X w + b``;
    the intercept is not penalised.
    """
    n = X.shape[0]
    w, b = params[:-1], params[-1]
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + (w @ w) / (2.0 * C * n)
    r = (_sigmoid(z) - y) / n
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + w / (C * n)
    grad[-1] = r.sum()
    return float(loss), grad


@dataclass
class LogisticModel:
    coef: np.ndarray
    intercept: float
    C: float
    iterations: int = 0
    cv_f1: dict = field(default_factory=dict)

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept

    def score(self, X) -> np.ndarray:
        return _sigmoid(self.decision(X))


def fit_logistic(X, y, C: float = 1.0, tol: float = 1e-6, max_iter: int = 10000) -> LogisticModel:
    """L2 logistic regression by gradient descent with a fixed 1/L step."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    lipschitz = np.linalg.norm(Xa, 2) ** 2 / (4.0 * n) + 1.0 / (C * n)
    step = 1.0 / lipschitz
    params = np.zeros(d + 1)
    it = 0
    for it in range(1, max_iter + 1):
        _, grad = logistic_loss_grad(params, X, y, C)
        if np.linalg.norm(grad) < tol:
            break
        params -= step * grad
    return LogisticModel(params[:-1].copy(), float(params[-1]), C, it)


def train_logreg_cv(X, y, folds: int = 5, grid=LOGREG_GRID, seed: int = 0) -> LogisticModel:
    """Pick C from ``grid`` by mean F1 over stratified folds, then refit on all rows.

    Ties go to the smallest C (strongest regularisation).
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y)
    if X.shape[0] < folds:
        raise ValueError(f"{X.shape[0]} rows cannot fill {folds} folds")
    rng = np.random.default_rng(seed)
    fold_idx = stratified_folds(y, folds, rng)
    scores = {}
    for C in grid:
        f1s = []
        for val in fold_idx:
            train = np.setdiff1d(np.arange(len(y)), val)
            m = fit_logistic(X[train], y[train], C)
            f1s.append(f1_score(y[val], m.score(X[val]) >= 0.5))
        scores[C] = float(np.mean(f1s))
    best = max(grid, key=lambda c: (scores[c], -c))
    model = fit_logistic(X, y, best)
    model.cv_f1 = scores
    return model


# ------------------------------------------------------------ random forest


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # fraction of class 1 at leaves

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            f = self.feature[node[idx]]
            go_left = X[idx, f] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
            active = self.feature[node] >= 0
        return self.value[node]


def _best_split(X, y, features):
    """Best Gini split over ``features``: (feature, threshold, gain) or None."""
    n = y.size
    total_pos = y.sum()
    parent = 1.0 - (total_pos / n) ** 2 - (1 - total_pos / n) ** 2
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="mergesort")
        xs, ys = X[order, f], y[order]
        cut = np.flatnonzero(xs[1:] > xs[:-1])  # split after position cut
        if cut.size == 0:
            continue
        n_left = cut + 1
        pos_left = np.cumsum(ys)[cut]
        n_right = n - n_left
        pos_right = total_pos - pos_left
        pl, pr = pos_left / n_left, pos_right / n_right
        gini_l = 1.0 - pl**2 - (1 - pl) ** 2
        gini_r = 1.0 - pr**2 - (1 - pr) ** 2
        impurity = (n_left * gini_l + n_right * gini_r) / n
        k = int(np.argmin(impurity))
        gain = parent - impurity[k]
        if best is None or gain > best[2] + 1e-15:
            best = (int(f), 0.5 * (xs[cut[k]] + xs[cut[k] + 1]), gain)
    return best


def _grow_tree(X, y, rng, max_features: int) -> _Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            lst.append(v)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(y.size))]
    d = X.shape[1]
    while stack:
        node, idx = stack.pop()
        ys = y[idx]
        value[node] = float(ys.mean())
        if ys.min() == ys.max():
            continue
        perm = rng.permutation(d)
        split = _best_split(X[idx], ys, perm[:max_features])
        if split is None:
            # no candidate could separate the rows; fall back to the rest
            split = _best_split(X[idx], ys, perm[max_features:])
        if split is None:
            continue
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        l, r = new_node(), new_node()
        left[node], right[node] = l, r
        stack.append((r, idx[~go_left]))
        stack.append((l, idx[go_left]))
    return _Tree(
        np.array(feature, dtype=int),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=int),
        np.array(right, dtype=int),
        np.array(value, dtype=np.float64),
    )


@dataclass
class RandomForest:
    trees: list
    n_features: int

    def score(self, X) -> np.ndarray:
        """Fraction of trees voting for class 1."""
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict(X) > 0.5
        return votes / len(self.trees)


def train_random_forest(X, y, trees: int = 100, seed: int = 0) -> RandomForest:
    """Bagged CART trees (Gini, sqrt(d) candidate features, grown to purity)."""
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y)
    n, d = X.shape
    max_features = max(1, int(math.sqrt(d)))
    rng = np.random.default_rng(seed)
    forest = []
    for _ in range(trees):
        boot = rng.integers(0, n, n)
        forest.append(_grow_tree(X[boot], y[boot], rng, max_features))
    return RandomForest(forest, d)


# --------------------------------------------------------------------- SVM


def sigmoid_kernel(A, B, gamma: float, coef0: float = 0.0) -> np.ndarray:
    return np.tanh(gamma * (np.asarray(A) @ np.asarray(B).T) + coef0)


def dual_objective(alpha, y_pm, K) -> float:
    """``sum(alpha) - 0.5 * alpha' Q alpha`` with ``Q = y y' * K`` (to be maximised)."""
    ya = alpha * y_pm
    return float(alpha.sum() - 0.5 * ya @ K @ ya)


def smo_solve(K, y_pm, C: float = 1.0, tol: float = 1e-3, max_iter=None) -> tuple:
    """SMO with second-order working-set selection.

    Solves ``min 0.5 a'Qa - sum(a)`` s.t. ``0 <= a <= C``, ``y'a = 0``.
    Non-positive curvature (indefinite kernels) falls back to a tiny
    positive curvature. Returns ``(alpha, rho, iterations)``; the decision
    function is ``sum_i a_i y_i K(x_i, x) - rho``.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y_pm, dtype=np.float64)
    n = y.size
    if max_iter is None:
        max_iter = 10 * n * 1000
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    tau = 1e-12

    for it in range(max_iter):
        yg = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        g_max = yg[i]
        g_min = yg[low].min()
        if g_max - g_min < tol:
            break
        # second-order choice of j among violating low-set members
        cand = np.flatnonzero(low & (yg < g_max))
        b = g_max - yg[cand]
        a = QD[i] + QD[cand] - 2.0 * y[i] * y[cand] * Q[i, cand]
        a = np.where(a > 0, a, tau)
        j = int(cand[np.argmin(-(b * b) / a)])

        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q[i, j]
            quad = quad if quad > 0 else tau
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q[i, j]
            quad = quad if quad > 0 else tau
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        G += Q[:, i] * (alpha[i] - ai_old) + Q[:, j] * (alpha[j] - aj_old)
    else:
        raise ConvergenceError(f"SMO did not converge in {max_iter} iterations")

    yg = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub, lb = np.inf, -np.inf
        for t in range(n):
            at_upper = alpha[t] >= C
            at_lower = alpha[t] <= 0
            if (at_upper and y[t] < 0) or (at_lower and y[t] > 0):
                ub = min(ub, yg[t])
            else:
                lb = max(lb, yg[t])
        rho = float((ub + lb) / 2)
    return alpha, rho, it


@dataclass
class SigmoidSVM:
    support: np.ndarray  # support vectors (scaled features)
    dual_coef: np.ndarray  # alpha_i * y_i
    rho: float
    gamma: float
    coef0: float = 0.0
    C: float = 1.0

    def decision(self, X) -> np.ndarray:
        if self.support.shape[0] == 0:
            return np.full(np.asarray(X).shape[0], -self.rho)
        return sigmoid_kernel(X, self.support, self.gamma, self.coef0) @ self.dual_coef - self.rho

    def score(self, X) -> np.ndarray:
        return _sigmoid(self.decision(X))


def train_svm_sigmoid(X, y, C: float = 1.0, coef0: float = 0.0, tol: float = 1e-3) -> SigmoidSVM:
    """Sigmoid-kernel SVM with ``gamma = 1 / (n_features * var(X))``."""
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y)
    var = X.var()
    gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    y_pm = np.where(y == 1, 1.0, -1.0)
    K = sigmoid_kernel(X, X, gamma, coef0)
    alpha, rho, _ = smo_solve(K, y_pm, C, tol)
    sv = alpha > 0
    return SigmoidSVM(X[sv].copy(), (alpha * y_pm)[sv], rho, gamma, coef0, C)


# ------------------------------------------------------------ trained model


@dataclass
class TrainedModel:
    kind: str
    feature_names: tuple
    scaler: Scaler
    estimator: object
    schema_version: int = 1
    seed: int = 0

    def score(self, X) -> np.ndarray:
        return self.estimator.score(apply_scaler(self.scaler, X))


def train_model(kind: str, X, y, feature_names, config=None, schema_version: int = 1) -> TrainedModel:
    """Fit the scaler on ``X`` and train one classifier kind on the scaled data."""
    from .config import Config

    config = config or Config()
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    y = _check_binary(y)
    scaler = fit_scaler(X)
    Xs = apply_scaler(scaler, X)
    if kind == "logreg_cv":
        est = train_logreg_cv(Xs, y, config.logreg_folds, seed=config.seed)
    elif kind == "random_forest":
        est = train_random_forest(Xs, y, config.forest_trees, seed=config.seed)
    else:
        est = train_svm_sigmoid(Xs, y, config.svm_c)
    return TrainedModel(kind, tuple(feature_names), scaler, est, schema_version, config.seed)


def _arr(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def _estimator_params(model: TrainedModel) -> dict:
    est = model.estimator
    if model.kind == "logreg_cv":
        return {
            "coef": _arr(est.coef),
            "intercept": float(est.intercept),
            "C": float(est.C),
            "cv_f1": {repr(float(k)): float(v) for k, v in est.cv_f1.items()},
        }
    if model.kind == "random_forest":
        return {
            "n_features": est.n_features,
            "trees": [
                {
                    "feature": [int(v) for v in t.feature],
                    "threshold": _arr(t.threshold),
                    "left": [int(v) for v in t.left],
                    "right": [int(v) for v in t.right],
                    "value": _arr(t.value),
                }
                for t in est.trees
            ],
        }
    return {
        "support": [_arr(row) for row in est.support],
        "dual_coef": _arr(est.dual_coef),
        "rho": float(est.rho),
        "gamma": float(est.gamma),
        "coef0": float(est.coef0),
        "C": float(est.C),
    }


def save_model(model: TrainedModel, path) -> None:
    """Write a model as JSON: a header (format, version, kind, feature schema
    and names) followed by the scaler and the estimator parameters."""
    doc = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "feature_schema_version": model.schema_version,
        "feature_names": list(model.feature_names),
        "seed": model.seed,
        "scaler": {"mean": _arr(model.scaler.mean), "std": _arr(model.scaler.std)},
        "params": _estimator_params(model),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> TrainedModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path} is not a {MODEL_FORMAT} file")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('format_version')}")
    kind = doc["kind"]
    p = doc["params"]
    if kind == "logreg_cv":
        est = LogisticModel(
            np.array(p["coef"]), p["intercept"], p["C"], cv_f1={float(k): v for k, v in p["cv_f1"].items()}
        )
    elif kind == "random_forest":
        est = RandomForest(
            [
                _Tree(
                    np.array(t["feature"], dtype=int),
                    np.array(t["threshold"]),
                    np.array(t["left"], dtype=int),
                    np.array(t["right"], dtype=int),
                    np.array(t["value"]),
                )
                for t in p["trees"]
            ],
            p["n_features"],
        )
    elif kind == "svm_sigmoid":
        d = len(doc["feature_names"])
        est = SigmoidSVM(
            np.array(p["support"], dtype=np.float64).reshape(-1, d),
            np.array(p["dual_coef"]),
            p["rho"],
            p["gamma"],
            p["coef0"],
            p["C"],
        )
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    scaler = Scaler(np.array(doc["scaler"]["mean"]), np.array(doc["scaler"]["std"]))
    return TrainedModel(kind, tuple(doc["feature_names"]), scaler, est, doc["feature_schema_version"], doc.get("seed", 0))
