"""Polynomial-kernel support vector classifier trained by SMO, and cow folds."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionMismatch, NonFiniteFeature, SingleClass, TooFewCows


def polynomial_kernel(u, v, degree: int = 3, gamma: float | None = None, coef0: float = 1.0) -> float:
    """``(gamma * <u, v> + coef0) ** degree``; ``gamma`` defaults to 1/dim."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise DimensionMismatch(f"{u.shape} vs {v.shape}")
    g = 1.0 / len(u) if gamma is None else gamma
    return float((g * np.dot(u, v) + coef0) ** degree)


def kernel_matrix(A, B, degree: int = 3, gamma: float | None = None, coef0: float = 1.0) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"{A.shape[1]} vs {B.shape[1]} features")
    g = 1.0 / A.shape[1] if gamma is None else gamma
    return (g * A @ B.T + coef0) ** degree


def dual_objective(alpha, y, K) -> float:
    """``sum(alpha) - 0.5 * sum_ij alpha_i alpha_j y_i y_j K_ij``."""
    ay = np.asarray(alpha) * np.asarray(y)
    return float(np.sum(alpha) - 0.5 * ay @ K @ ay)


@dataclass
class DualSolution:
    alpha: np.ndarray
    bias: float
    n_iter: int
    converged: bool
    max_violation: float


def smo_solve(K, y, C: float = 1.0, tol: float = 1e-3, max_iter: int = 100_000) -> DualSolution:
    """Maximise the soft-margin dual by sequential two-coordinate updates.

    Each step picks the maximal violating pair (i from the "up" set with the
    largest ``-y_i grad_i``, j from the "low" set with the smallest) and
    solves the two-variable subproblem analytically. Stops once the KKT gap
    ``max_up - min_low`` drops below ``tol``.
    """
    K = np.asarray(K, dtype=float)
    K = 0.5 * (K + K.T)  # BLAS Gram products are not exactly symmetric
    y = np.asarray(y, dtype=float)
    n = len(y)
    Q = K * np.outer(y, y)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    tau = 1e-12
    converged = False
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        score = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            converged = True
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = score[i] - score[j]
        if gap < tol:
            converged = True
            break
        # move alpha_i by +y_i*t and alpha_j by -y_j*t along the feasible line
        curv = K[i, i] + K[j, j] - 2 * K[i, j]
        t = gap / max(curv, tau)
        t_max_i = C - alpha[i] if y[i] > 0 else alpha[i]
        t_max_j = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(t, t_max_i, t_max_j)
        old_i, old_j = alpha[i], alpha[j]
        alpha[i] = min(max(old_i + y[i] * t, 0.0), C)
        alpha[j] = min(max(old_j - y[j] * t, 0.0), C)
        grad += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
    bias = _bias(alpha, y, grad, C)
    return DualSolution(alpha, bias, it, converged, float(gap))


def _bias(alpha, y, grad, C) -> float:
    score = -y * grad
    free = (alpha > 1e-12 * C) & (alpha < C * (1 - 1e-12))
    if free.any():
        return float(score[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    hi = score[up].max() if up.any() else score.max()
    lo = score[low].min() if low.any() else score.min()
    return float((hi + lo) / 2)


def _check_features(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature(f"{name} contains NaN or infinite values")
    return X


class PolynomialSVC(ClassifierMixin, BaseEstimator):
    """Binary soft-margin SVM with a polynomial kernel.

    Features are z-scored with training statistics before the kernel unless
    ``standardize=False``. ``positive_label`` is the class mapped to +1;
    a decision value of exactly zero predicts it.

    Parameters
    ----------
    C : float
        Box constraint on the dual coefficients.
    degree, gamma, coef0 :
        Kernel ``(gamma <u, v> + coef0) ** degree``; ``gamma=None`` is 1/dim.
    tol : float
        KKT violation at which SMO stops.
    max_iter : int
        SMO iteration cap; hitting it sets ``converged_ = False`` and warns.
    positive_label :
        Label treated as the positive class (default 1, i.e. healthy).
    """

    def __init__(self, C=1.0, degree=3, gamma=None, coef0=1.0, tol=1e-3, max_iter=100_000,
                 standardize=True, positive_label=1, sv_tol=1e-8):
        self.C = C
        self.degree = degree
        self.gamma = gamma
        self.coef0 = coef0
        self.tol = tol
        self.max_iter = max_iter
        self.standardize = standardize
        self.positive_label = positive_label
        self.sv_tol = sv_tol

    def _scale(self, X):
        return (X - self.mean_) / self.scale_

    def fit(self, X, y):
        X = _check_features(X)
        y = np.asarray(y)
        if len(y) != X.shape[0]:
            raise DimensionMismatch(f"{X.shape[0]} rows but {len(y)} labels")
        classes = np.unique(y)
        if len(classes) < 2:
            raise SingleClass(f"need two classes, got {classes.tolist()}")
        if len(classes) > 2:
            raise ValueError(f"binary classifier got {len(classes)} classes; use OneVsRestSVC")
        if self.positive_label in classes:
            pos = self.positive_label
        else:
            pos = classes[1]
        neg = classes[0] if classes[1] == pos else classes[1]
        self.classes_ = classes
        self.pos_label_, self.neg_label_ = pos, neg
        ys = np.where(y == pos, 1.0, -1.0)

        self.n_features_in_ = X.shape[1]
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            std = X.std(axis=0)
            self.scale_ = np.where(std > 1e-12, std, 1.0)
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Z = self._scale(X)
        self.gamma_ = 1.0 / Z.shape[1] if self.gamma is None else float(self.gamma)
        K = kernel_matrix(Z, Z, self.degree, self.gamma_, self.coef0)
        sol = smo_solve(K, ys, self.C, self.tol, self.max_iter)
        if not sol.converged:
            warnings.warn(f"SMO hit max_iter={self.max_iter} (KKT gap {sol.max_violation:.3g})", ConvergenceWarning)
        keep = sol.alpha > self.sv_tol * self.C
        self.alpha_ = sol.alpha
        self.support_ = np.flatnonzero(keep)
        self.support_vectors_ = Z[keep]
        self.dual_coef_ = (sol.alpha * ys)[keep]
        self.intercept_ = sol.bias
        self.n_iter_ = sol.n_iter
        self.converged_ = sol.converged
        self.dual_objective_ = dual_objective(sol.alpha, ys, K)
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "dual_coef_")
        X = _check_features(np.atleast_2d(X))
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        K = kernel_matrix(self._scale(X), self.support_vectors_, self.degree, self.gamma_, self.coef0)
        return K @ self.dual_coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        d = self.decision_function(X)
        return np.where(d >= 0, self.pos_label_, self.neg_label_)

    # flat, versioned serialisation -------------------------------------

    FORMAT_VERSION = 1

    def to_arrays(self) -> dict[str, np.ndarray]:
        check_is_fitted(self, "dual_coef_")
        return {
            "format_version": np.array(self.FORMAT_VERSION),
            "support_vectors": self.support_vectors_,
            "dual_coef": self.dual_coef_,
            "intercept": np.array(self.intercept_),
            "kernel": np.array([self.degree, self.gamma_, self.coef0]),
            "mean": self.mean_,
            "scale": self.scale_,
            "labels": np.array([self.pos_label_, self.neg_label_]),
            "C": np.array(self.C),
        }

    def save(self, path) -> None:
        """Write the model as an ``.npz`` archive (bit-exact round trip)."""
        with open(path, "wb") as fh:
            np.savez(fh, **self.to_arrays())

    @classmethod
    def load(cls, path) -> "PolynomialSVC":
        with np.load(path, allow_pickle=False) as z:
            if int(z["format_version"]) != cls.FORMAT_VERSION:
                raise ValueError(f"unsupported model format {int(z['format_version'])}")
            degree, gamma, coef0 = z["kernel"].tolist()
            pos, neg = z["labels"].tolist()
            m = cls(C=float(z["C"]), degree=int(degree), gamma=gamma, coef0=coef0, positive_label=pos)
            m.support_vectors_ = z["support_vectors"]
            m.dual_coef_ = z["dual_coef"]
            m.intercept_ = float(z["intercept"])
            m.mean_ = z["mean"]
            m.scale_ = z["scale"]
        m.gamma_ = gamma
        m.pos_label_, m.neg_label_ = pos, neg
        m.classes_ = np.array(sorted([pos, neg]))
        m.n_features_in_ = m.mean_.shape[0]
        return m


class OneVsRestSVC(ClassifierMixin, BaseEstimator):
    """Multi-class wrapper: one :class:`PolynomialSVC` per class.

    Predicts the class with the largest decision value, ties going to the
    lowest label. With exactly two classes a single binary model is fitted
    whose positive class is the lower label.
    """

    def __init__(self, C=1.0, degree=3, gamma=None, coef0=1.0, tol=1e-3, max_iter=100_000, standardize=True):
        self.C = C
        self.degree = degree
        self.gamma = gamma
        self.coef0 = coef0
        self.tol = tol
        self.max_iter = max_iter
        self.standardize = standardize

    def _binary(self, positive_label):
        return PolynomialSVC(C=self.C, degree=self.degree, gamma=self.gamma, coef0=self.coef0, tol=self.tol,
                             max_iter=self.max_iter, standardize=self.standardize, positive_label=positive_label)

    def fit(self, X, y):
        X = _check_features(X)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise SingleClass(f"need at least two classes, got {self.classes_.tolist()}")
        if len(self.classes_) == 2:
            self.estimators_ = [self._binary(self.classes_[0]).fit(X, y)]
        else:
            self.estimators_ = [self._binary(1).fit(X, np.where(y == c, 1, -1)) for c in self.classes_]
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "estimators_")
        if len(self.classes_) == 2:
            d = self.estimators_[0].decision_function(X)
            return np.column_stack([d, -d])
        return np.column_stack([e.decision_function(X) for e in self.estimators_])

    def predict(self, X) -> np.ndarray:
        if len(self.classes_) == 2:
            return self.estimators_[0].predict(X)
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    test_size: float
    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def make_folds(cow_ids, labels, k: int = 10, seed: int = 0, test_size: float = 0.3) -> FoldPlan:
    """k stratified cow-level train/test splits, each about 70/30.

    Cows of each class are shuffled once; fold f tests a cyclic window of
    ``round(test_size * n_class)`` cows starting at ``f * n_class / k``, so
    all cows get tested when ``k * test_size >= 1``.
    """
    cow_ids = [str(c) for c in cow_ids]
    labels = list(labels)
    if len(cow_ids) != len(labels):
        raise DimensionMismatch("cow_ids and labels differ in length")
    if len(set(cow_ids)) != len(cow_ids):
        raise ValueError("duplicate cow ids")
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(cow_ids) < k:
        raise TooFewCows(f"{len(cow_ids)} cows for {k} folds")
    by_class: dict = {}
    for c, lab in zip(cow_ids, labels):
        by_class.setdefault(lab, []).append(c)
    if len(by_class) < 2 or min(len(v) for v in by_class.values()) < 2:
        raise TooFewCows("need at least two cows in each of two classes")
    rng = np.random.default_rng(seed)
    order = {lab: [members[i] for i in rng.permutation(len(members))]
             for lab, members in sorted(by_class.items(), key=lambda kv: str(kv[0]))}
    folds = []
    for f in range(k):
        test = []
        for members in order.values():
            n = len(members)
            n_test = min(max(1, int(round(test_size * n))), n - 1)
            start = int(np.floor(f * n / k))
            test.extend(members[(start + j) % n] for j in range(n_test))
        test_set = set(test)
        train = tuple(c for c in cow_ids if c not in test_set)
        folds.append((train, tuple(c for c in cow_ids if c in test_set)))
    return FoldPlan(k, seed, test_size, tuple(folds))


class CowFoldSplitter:
    """scikit-learn style splitter over rows that are cows.

    ``split(X, y)`` yields integer index arrays from :func:`make_folds`, with
    ``groups`` (cow ids) defaulting to the row index.
    """

    def __init__(self, n_splits=10, test_size=0.3, random_state=0):
        self.n_splits = n_splits
        self.test_size = test_size
        self.random_state = random_state

    def get_n_splits(self, X=None, y=None, groups=None):
        return self.n_splits

    def split(self, X, y, groups=None):
        n = len(y)
        ids = [str(g) for g in groups] if groups is not None else [str(i) for i in range(n)]
        pos = {c: i for i, c in enumerate(ids)}
        plan = make_folds(ids, y, self.n_splits, self.random_state, self.test_size)
        for train, test in plan:
            yield np.array([pos[c] for c in train]), np.array([pos[c] for c in test])
