"""Two-stage validation of generated batches.

Stage one is a one-class SVM fitted on the real data: batch rows outside its
boundary are dropped.  Stage two trains a real-vs-synthetic logistic
regression on the survivors and the real subgroup rows; the batch is kept
only if the held-out ROC AUC stays at or below ``alpha``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .encode import Encoder
from .generators import SampleBatch

log = logging.getLogger(__name__)

DEFAULT_NU = 0.05
DEFAULT_ALPHA = 0.85


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (KKT residual {residual:.3g})")
        self.residual = residual


# --------------------------------------------------------------------------
# one-class SVM


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class OcsvmModel:
    """Fitted one-class SVM.

    ``dual`` holds one coefficient per training row (duplicates share their
    group's weight evenly); ``support``/``coef`` are the distinct vectors with
    non-zero weight used for prediction.
    """

    support: np.ndarray
    coef: np.ndarray
    rho: float
    gamma: float
    nu: float
    dual: np.ndarray
    objective: float
    kkt_residual: float
    n_iter: int

    @property
    def upper_bound(self) -> float:
        return 1.0 / (self.nu * len(self.dual))

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] == 0:
            return np.zeros(0)
        return rbf_kernel(X, self.support, self.gamma) @ self.coef - self.rho


def solve_ocsvm_dual(
    X: np.ndarray,
    nu: float = DEFAULT_NU,
    gamma: float | None = None,
    tol: float = 1e-5,
    max_iter: int | None = None,
) -> OcsvmModel:
    """Solve  min ½ aᵀKa  s.t.  0 ≤ a_i ≤ 1/(ν m),  Σ a_i = 1.

    Pairwise (SMO) updates with second-order working-set selection.  Identical
    rows are merged into one variable whose upper bound is the sum of theirs,
    which leaves the optimum unchanged and shrinks the problem for
    categorical data.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    if m == 0:
        raise ValueError("one-class SVM needs at least one training row")
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    if gamma is None:
        gamma = 1.0 / X.shape[1]
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    U, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    n = U.shape[0]
    C = 1.0 / (nu * m)
    ub = counts * C
    sq = (U * U).sum(1)
    cache: dict[int, np.ndarray] = {}

    def column(j: int) -> np.ndarray:
        col = cache.get(j)
        if col is None:
            col = np.exp(-gamma * np.maximum(sq + sq[j] - 2.0 * U @ U[j], 0.0))
            if len(cache) > 4096:
                cache.clear()
            cache[j] = col
        return col

    a = np.zeros(n)
    remaining = 1.0
    for k in range(n):
        a[k] = min(ub[k], remaining)
        remaining -= a[k]
        if remaining <= 0:
            break
    G = np.zeros(n)
    for k in np.flatnonzero(a):
        G += a[k] * column(k)

    if max_iter is None:
        max_iter = max(100_000, 200 * n)
    it = 0
    gap = np.inf
    while it < max_iter:
        down = a > 0
        upok = a < ub
        if not upok.any():  # every variable at its bound: the only feasible point
            gap = 0.0
            break
        i =int(np.flatnonzero(down)[np.argmax(G[down])])
        gap = G[i] - G[upok].min()
        if gap <= tol:
            break
        Qi = column(i)
        diff = G[i] - G
        eta = np.maximum(Qi[i] + 1.0 - 2.0 * Qi, 1e-12)  # K(x, x) = 1
        score = np.where(upok & (diff > 0), diff * diff / eta, -np.inf)
        j = int(np.argmax(score))
        delta = min(diff[j] / eta[j], a[i], ub[j] - a[j])
        a[i] -= delta
        a[j] += delta
        if a[i] <= 1e-15:
            a[i] = 0.0
        if ub[j] - a[j] <= 1e-15 * ub[j]:
            a[j] = ub[j]
        G += delta * (column(j) - Qi)
        it += 1
    else:
        raise ConvergenceError(f"one-class SVM did not converge in {max_iter} iterations", gap)

    free = (a > 0) & (a < ub)
    if free.any():
        # free SVs agree on rho up to tol; the smallest keeps them all on the inlier side
        rho = float(G[free].min())
    else:
        lo = G[a >= ub].max() if (a >= ub).any() else -np.inf
        hi = G[a <= 0].min() if (a <= 0).any() else np.inf
        rho = float((lo + hi) / 2 if np.isfinite(lo) and np.isfinite(hi) else (lo if np.isfinite(lo) else hi))

    sv = a > 0
    return OcsvmModel(
        support=U[sv],
        coef=a[sv],
        rho=rho,
        gamma=float(gamma),
        nu=float(nu),
        dual=a[inverse] / counts[inverse],
        objective=float(0.5 * a @ G),
        kkt_residual=float(max(gap, 0.0)),
        n_iter=it,
    )


def train_ocsvm(
    real: Dataset, enc: Encoder, nu: float = DEFAULT_NU, gamma: float | str | None = "auto"
) -> OcsvmModel:
    if len(real) == 0:
        raise ValueError("one-class SVM needs a non-empty real dataset")
    g = None if gamma in (None, "auto") else float(gamma)
    model = solve_ocsvm_dual(enc.encode_dataset(real), nu=nu, gamma=g)
    log.debug("ocsvm: %d support vectors, rho=%.6f, %d iterations",
              len(model.coef), model.rho, model.n_iter)
    return model


def ocsvm_filter(model: OcsvmModel, batch: SampleBatch, enc: Encoder) -> tuple[tuple[str, ...], ...]:
    """Records of ``batch`` with non-negative decision value, in batch order."""
    if len(batch) == 0:
        return ()
    X = enc.encode_codes(batch.codes) if batch.codes is not None else enc.encode_rows(batch.records)
    keep = model.decision_function(X) >= 0
    return tuple(r for r, k in zip(batch.records, keep) if k)


# --------------------------------------------------------------------------
# logistic discriminator


@dataclass
class DiscriminatorModel:
    weights: np.ndarray
    bias: float
    n_iter: int = 0
    grad_norm: float = float("nan")

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def score(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision(X))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def class_weights(y: np.ndarray) -> np.ndarray:
    """Per-row weights inversely proportional to class size, each class totalling n/2."""
    y = np.asarray(y)
    n = len(y)
    pos = max(int(y.sum()), 1)
    neg = max(n - int(y.sum()), 1)
    return np.where(y == 1, n / (2.0 * pos), n / (2.0 * neg))


def logistic_objective(params: np.ndarray, X: np.ndarray, y: np.ndarray,
                       weights: np.ndarray, lam: float) -> float:
    """Weighted log-likelihood minus ½λ‖w‖²; the bias (last entry) is unpenalised."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    ll = weights * (y * z - np.logaddexp(0.0, z))
    return float(ll.sum() - 0.5 * lam * w @ w)


def logistic_gradient(params: np.ndarray, X: np.ndarray, y: np.ndarray,
                      weights: np.ndarray, lam: float) -> np.ndarray:
    w, b = params[:-1], params[-1]
    r = weights * (y - _sigmoid(X @ w + b))
    return np.append(X.T @ r - lam * w, r.sum())


def fit_logistic(X: np.ndarray, y: np.ndarray, lam: float = 1.0, max_iter: int = 500,
                 tol: float = 1e-6, weights: np.ndarray | None = None) -> DiscriminatorModel:
    """Full-batch gradient ascent with step 1/L (L bounds the Hessian norm)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise ValueError("discriminator needs both real and synthetic rows")
    c = class_weights(y) if weights is None else np.asarray(weights, dtype=float)
    Xt = np.hstack([X, np.ones((len(X), 1))])
    lipschitz = 0.25 * np.linalg.eigvalsh((Xt * c[:, None]).T @ Xt)[-1] + lam
    step = 1.0 / lipschitz
    params = np.zeros(Xt.shape[1])
    g = logistic_gradient(params, X, y, c, lam)
    it = 0
    while it < max_iter and np.linalg.norm(g) > tol:
        params = params + step * g
        g = logistic_gradient(params, X, y, c, lam)
        it += 1
    return DiscriminatorModel(params[:-1].copy(), float(params[-1]), it, float(np.linalg.norm(g)))


def train_discriminator(real_rows: Sequence[Sequence[str]], synth_rows: Sequence[Sequence[str]],
                        enc: Encoder, lam: float = 1.0) -> DiscriminatorModel:
    """Real rows are labelled 1, synthetic rows 0."""
    if not len(real_rows) or not len(synth_rows):
        raise ValueError("discriminator needs both real and synthetic rows")
    X = np.vstack([enc.encode_rows(real_rows), enc.encode_rows(synth_rows)])
    y = np.concatenate([np.ones(len(real_rows)), np.zeros(len(synth_rows))])
    return fit_logistic(X, y, lam=lam)


def compute_auc(scores_pos: Sequence[float], scores_neg: Sequence[float]) -> float:
    """Mann-Whitney AUC: P(pos > neg) + ½ P(pos = neg)."""
    pos = np.asarray(scores_pos, dtype=float)
    neg = np.sort(np.asarray(scores_neg, dtype=float))
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs at least one score on each side")
    below = np.searchsorted(neg, pos, side="left")
    upto = np.searchsorted(neg, pos, side="right")
    twice_u = int((2 * below + (upto - below)).sum())
    return twice_u / (2 * pos.size * neg.size)


# --------------------------------------------------------------------------
# batch verdict


def stratified_split(y: np.ndarray, rng: np.random.Generator,
                     test_fraction: float = 0.3) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffle and split.

    Each class contributes round(test_fraction * n) rows to the test side,
    clipped so both sides get at least one row; a class with a single row
    is placed on both sides.
    """
    train, test = [], []
    for label in (1, 0):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(len(idx))]
        if len(idx) == 1:
            train.append(idx)
            test.append(idx)
            continue
        k = min(max(int(round(test_fraction * len(idx))), 1), len(idx) - 1)
        test.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class BatchVerdict:
    s_valid: tuple[tuple[str, ...], ...]
    auc: float | None
    accepted: bool
    alpha: float
    n_sampled: int = 0
    reason: str = field(default="")


def evaluate_batch(real_sub: Dataset, batch: SampleBatch, ocsvm: OcsvmModel, alpha: float,
                   enc: Encoder, seed: int, lam: float = 1.0) -> BatchVerdict:
    """Run both filter stages on one batch.

    With no real rows in the subgroup there is nothing to discriminate
    against, so the AUC stage is skipped and ``auc`` is ``None``.
    """
    s_valid = ocsvm_filter(ocsvm, batch, enc)
    if not s_valid:
        return BatchVerdict((), None, False, alpha, len(batch), "distribution")
    if len(real_sub) == 0:
        return BatchVerdict(s_valid, None, True, alpha, len(batch), "no-real-rows")
    X = np.vstack([enc.encode_dataset(real_sub), enc.encode_rows(s_valid)])
    y = np.concatenate([np.ones(len(real_sub)), np.zeros(len(s_valid))])
    rng = np.random.default_rng(seed)
    train, test = stratified_split(y, rng)
    model = fit_logistic(X[train], y[train], lam=lam)
    scores = model.score(X[test])
    auc = compute_auc(scores[y[test] == 1], scores[y[test] == 0])
    accepted = auc <= alpha
    return BatchVerdict(s_valid, auc, accepted, alpha, len(batch), "accepted" if accepted else "auc")
