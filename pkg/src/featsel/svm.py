"""Soft-margin RBF support vector machine trained by simplified SMO."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

FORMAT_NAME = "featsel-svm"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class KernelSpec:
    """RBF kernel. ``gamma=None`` means auto, i.e. 1 / n_features."""

    gamma: float | None = None
    degree: int = 3  # carried for config fidelity; RBF ignores it
    kind: str = "rbf"

    def __post_init__(self):
        if self.kind != "rbf":
            raise ValueError("only the rbf kernel is supported")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def resolve(self, n_features: int) -> float:
        return 1.0 / n_features if self.gamma is None else float(self.gamma)


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    tolerance: float = 1e-3
    max_passes: int = 10
    max_iterations: int | None = None  # None -> 100 * n_train
    seed: int = 22
    alpha_step_min: float = 1e-5

    def __post_init__(self):
        if not (self.C > 0 and self.tolerance > 0 and self.max_passes > 0):
            raise ValueError("C, tolerance and max_passes must be positive")


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i for each support vector
    bias: float
    gamma: float
    C: float
    converged: bool = True
    iterations: int = 0
    alphas: np.ndarray | None = None  # full training-set alphas, kept for audits

    def decision_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.support_vectors.shape[1]:
            raise ValueError(
                f"input has {X.shape[1]} features, model expects {self.support_vectors.shape[1]}"
            )
        if len(self.dual_coef) == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_matrix(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias


def kernel(x, z, spec: KernelSpec = KernelSpec()) -> float:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise ValueError("kernel arguments differ in dimension")
    d = x - z
    return float(np.exp(-spec.resolve(len(x)) * np.dot(d, d)))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def signed_labels(y) -> np.ndarray:
    return np.where(np.asarray(y) == 1, 1.0, -1.0)


def dual_objective(alphas, X, y, gamma: float) -> float:
    """``sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij`` with y in {0, 1} or {-1, +1}."""
    ys = signed_labels(y) if set(np.unique(y)) <= {0, 1} else np.asarray(y, dtype=float)
    ay = np.asarray(alphas) * ys
    K = rbf_matrix(np.asarray(X, float), np.asarray(X, float), gamma)
    return float(np.sum(alphas) - 0.5 * ay @ K @ ay)


def train_smo(train: Dataset, spec: KernelSpec = KernelSpec(), cfg: SvmConfig = SvmConfig()) -> SvmModel:
    """Platt-style simplified SMO with a seeded random second index and an error cache."""
    X, y = train.X, signed_labels(train.y)
    n = len(y)
    if np.all(y == y[0]):
        raise ValueError("SVM training needs both classes present")
    gamma = spec.resolve(train.n_features)
    K = rbf_matrix(X, X, gamma)
    C, tol = cfg.C, cfg.tolerance
    max_iter = cfg.max_iterations if cfg.max_iterations is not None else 100 * n
    rng = np.random.default_rng(cfg.seed)

    alpha = np.zeros(n)
    b = 0.0
    E = -y.copy()  # f(x_i) - y_i with all alphas zero and b = 0
    passes = iterations = 0
    # Plain Python floats in the scan loop; numpy scalars are much slower.
    yl = y.tolist()
    while passes < cfg.max_passes and iterations < max_iter:
        iterations += 1
        changed = 0
        al = alpha.tolist()
        El = E.tolist()
        for i in range(n):
            Ei, yi, ai = El[i], yl[i], al[i]
            r = Ei * yi
            if not ((r < -tol and ai < C) or (r > tol and ai > 0)):
                continue
            j = int(rng.integers(n - 1))
            j += j >= i
            Ej, yj, aj = El[j], yl[j], al[j]
            if yi != yj:
                L, H = max(0.0, aj - ai), min(C, C + aj - ai)
            else:
                L, H = max(0.0, ai + aj - C), min(C, ai + aj)
            if L >= H:
                continue
            Kii, Kjj, Kij = K[i, i], K[j, j], K[i, j]
            eta = 2.0 * Kij - Kii - Kjj
            if eta >= 0:
                continue
            aj_new = min(H, max(L, aj - yj * (Ei - Ej) / eta))
            if abs(aj_new - aj) < cfg.alpha_step_min:
                continue
            ai_new = ai + yi * yj * (aj - aj_new)
            dai, daj = ai_new - ai, aj_new - aj
            b1 = b - Ei - yi * dai * Kii - yj * daj * Kij
            b2 = b - Ej - yi * dai * Kij - yj * daj * Kjj
            if 0 < ai_new < C:
                b_new = b1
            elif 0 < aj_new < C:
                b_new = b2
            else:
                b_new = 0.5 * (b1 + b2)
            E += yi * dai * K[i] + yj * daj * K[j] + (b_new - b)
            alpha[i], alpha[j] = ai_new, aj_new
            al[i], al[j] = ai_new, aj_new
            b = b_new
            El = E.tolist()
            changed += 1
        passes = passes + 1 if changed == 0 else 0

    # Snap round-off at the box edges.
    alpha[alpha < 1e-12] = 0.0
    alpha[alpha > C - 1e-12] = C
    sv = alpha > 0
    model = SvmModel(
        support_vectors=X[sv].copy(),
        dual_coef=(alpha * y)[sv],
        bias=float(b),
        gamma=gamma,
        C=C,
        iterations=iterations,
        alphas=alpha,
    )
    violation = kkt_report(model, train, tol)
    return SvmModel(**{**model.__dict__, "converged": bool(violation <= tol)})


def decision_value(model: SvmModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("decision_value takes one feature vector")
    return float(model.decision_values(x)[0])


def predict(model: SvmModel, X) -> np.ndarray:
    """Class labels in {0, 1}; a decision value of exactly 0 maps to class 1."""
    return (model.decision_values(X) >= 0).astype(np.int64)


def evaluate(model: SvmModel, ds: Dataset) -> float:
    return float(np.mean(predict(model, ds.X) == ds.y))


def kkt_slack(alphas, f, y, C: float, tol: float = 1e-3) -> np.ndarray:
    """Per-point KKT violation for margins ``y * f``; ``tol`` sets which alphas count as bounded."""
    m = signed_labels(y) * f
    alphas = np.asarray(alphas)
    lower = alphas <= 0
    upper = alphas >= C
    free = ~(lower | upper)
    v = np.zeros_like(m)
    v[lower] = np.maximum(0.0, 1.0 - m[lower])
    v[upper] = np.maximum(0.0, m[upper] - 1.0)
    v[free] = np.abs(m[free] - 1.0)
    return v


def kkt_report(model: SvmModel, train: Dataset, tol: float = 1e-3) -> float:
    """Largest KKT slack over the training set (0 when every condition holds exactly).

    Needs ``model.alphas`` aligned with ``train``.
    """
    if model.alphas is None or len(model.alphas) != len(train):
        raise ValueError("model does not carry training alphas for this dataset")
    f = model.decision_values(train.X)
    return float(kkt_slack(model.alphas, f, train.y, model.C, tol).max())


def with_alphas(model: SvmModel, train: Dataset, alphas) -> SvmModel:
    """Rebuild a model from explicit training alphas, keeping its bias and kernel."""
    alphas = np.asarray(alphas, dtype=np.float64)
    sv = alphas > 0
    return SvmModel(
        support_vectors=train.X[sv].copy(),
        dual_coef=(alphas * signed_labels(train.y))[sv],
        bias=model.bias,
        gamma=model.gamma,
        C=model.C,
        converged=model.converged,
        iterations=model.iterations,
        alphas=alphas,
    )


def to_json(model: SvmModel) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kernel": "rbf",
        "gamma": model.gamma,
        "C": model.C,
        "bias": model.bias,
        "n_features": int(model.support_vectors.shape[1]),
        "support_vectors": model.support_vectors.ravel().tolist(),
        "dual_coef": model.dual_coef.tolist(),
        "converged": model.converged,
    }
    return json.dumps(doc)


def from_json(text: str) -> SvmModel:
    doc = json.loads(text)
    if doc.get("format") != FORMAT_NAME or doc.get("version") != FORMAT_VERSION:
        raise ValueError("not a featsel-svm v1 document")
    d = doc["n_features"]
    return SvmModel(
        support_vectors=np.array(doc["support_vectors"], dtype=np.float64).reshape(-1, d),
        dual_coef=np.array(doc["dual_coef"], dtype=np.float64),
        bias=float(doc["bias"]),
        gamma=float(doc["gamma"]),
        C=float(doc["C"]),
        converged=bool(doc["converged"]),
    )
