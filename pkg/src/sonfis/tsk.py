"""First-order Takagi-Sugeno-Kang fuzzy models with hybrid training.

Premises are Gaussian membership functions on min-max normalised inputs;
consequents are affine functions producing output units directly. Training
alternates a global least-squares solve of the consequents with one
gradient-descent step on the premise parameters.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .tabular import rmse

__all__ = [
    "SIGMA_FLOOR",
    "GaussianMf",
    "TskRule",
    "TskModel",
    "gaussian_mf",
    "infer",
    "predict",
    "firing_strengths",
    "subtractive_cluster",
    "init_tsk",
    "grid_partition_model",
    "lse_consequents",
    "premise_gradients",
    "train_hybrid",
    "gradient_check",
    "save_model",
    "load_model",
    "TskRegressor",
]

#: Smallest admissible premise width; keeps memberships well defined.
SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class GaussianMf:
    center: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def gaussian_mf(x, mf: GaussianMf):
    """Membership exp(-(x - center)^2 / (2 sigma^2)), in (0, 1]."""
    x = np.asarray(x, dtype=float)
    value = np.exp(-((x - mf.center) ** 2) / (2.0 * mf.sigma ** 2))
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class TskRule:
    """One fuzzy rule: a Gaussian premise per input plus an affine consequent."""

    premise: tuple[GaussianMf, ...]
    coeffs: tuple[float, ...]
    bias: float

    def __post_init__(self):
        if len(self.coeffs) != len(self.premise):
            raise ValueError("consequent coefficient count must match the input dimension")


class TskModel:
    """Rule list plus the per-input normalisation it was built with."""

    def __init__(self, rules, input_min, input_max):
        rules = list(rules)
        if not rules:
            raise ValueError("a TSK model needs at least one rule")
        self.input_min = np.asarray(input_min, dtype=float)
        self.input_max = np.asarray(input_max, dtype=float)
        d = self.input_min.shape[0]
        for rule in rules:
            if len(rule.premise) != d:
                raise ValueError("all rules must share the model input dimension")
        self.rules = rules

    @property
    def input_dim(self) -> int:
        return self.input_min.shape[0]

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    def _arrays(self):
        """Stacked (centers, sigmas, coeffs, biases) for vectorised evaluation."""
        C = np.array([[mf.center for mf in r.premise] for r in self.rules])
        S = np.array([[mf.sigma for mf in r.premise] for r in self.rules])
        P = np.array([r.coeffs for r in self.rules], dtype=float)
        B = np.array([r.bias for r in self.rules], dtype=float)
        return C, S, P, B

    def normalize(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.input_dim:
            raise ValueError(
                f"input dimension {X.shape[1]} does not match model dimension {self.input_dim}"
            )
        span = self.input_max - self.input_min
        span = np.where(span > 0, span, 1.0)
        return (X - self.input_min) / span


def _normalized_firings(model: TskModel, Z: np.ndarray) -> np.ndarray:
    """Firing strengths normalised to sum to one per sample, computed in log
    space so that distant samples never underflow to an all-zero row."""
    C, S, _, _ = model._arrays()
    logw = -(((Z[:, None, :] - C[None, :, :]) ** 2) / (2.0 * S[None, :, :] ** 2)).sum(axis=2)
    shifted = np.exp(logw - logw.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def firing_strengths(model: TskModel, x) -> np.ndarray:
    """Raw rule firing strengths (product of premise memberships) for one input."""
    Z = model.normalize(np.asarray(x, dtype=float).reshape(1, -1))
    C, S, _, _ = model._arrays()
    logw = -(((Z[:, None, :] - C[None, :, :]) ** 2) / (2.0 * S[None, :, :] ** 2)).sum(axis=2)
    return np.exp(logw[0])


def predict(model: TskModel, X) -> np.ndarray:
    """Model output for every row of ``X`` (raw input units)."""
    Z = model.normalize(X)
    _, _, P, B = model._arrays()
    wbar = _normalized_firings(model, Z)
    G = Z @ P.T + B
    return (wbar * G).sum(axis=1)


def infer(model: TskModel, x) -> float:
    """Model output for a single input vector."""
    return float(predict(model, np.asarray(x, dtype=float).reshape(1, -1))[0])


def subtractive_cluster(data, radius=0.5, accept_ratio=0.5, reject_ratio=0.15) -> np.ndarray:
    """Cluster centers by the subtractive (density potential) method.

    Every point receives the potential sum_j exp(-4 ||x_i - x_j||^2 / r^2);
    the highest-potential point becomes a center and its influence is
    subtracted with a squash radius of 1.5 r. Selection continues while the
    remaining peak exceeds ``accept_ratio`` of the first peak, stops below
    ``reject_ratio``, and in between accepts a candidate only if it is far
    enough from the existing centers. ``data`` must be normalised to [0, 1]
    per column. Always returns at least one center.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if data.size == 0:
        raise ValueError("cannot cluster empty data")
    if not 0 < radius <= 1:
        raise ValueError(f"radius must lie in (0, 1], got {radius}")
    if data.min() < -1e-9 or data.max() > 1 + 1e-9:
        raise ValueError("data must be normalised to [0, 1] per column")

    n = data.shape[0]
    d2 = ((data[:, None, :] - data[None, :, :]) ** 2).sum(axis=2)
    potential = np.exp(-4.0 * d2 / radius ** 2).sum(axis=1)
    squash = np.exp(-4.0 * d2 / (1.5 * radius) ** 2)

    first = int(potential.argmax())
    ref = float(potential[first])
    centers = [first]
    potential = potential - ref * squash[first]

    while True:
        cand = int(potential.argmax())
        peak = float(potential[cand])
        if peak <= 0:
            break
        if peak > accept_ratio * ref:
            accepted = True
        elif peak < reject_ratio * ref:
            break
        else:
            dmin = np.sqrt(min(d2[cand, c] for c in centers))
            accepted = dmin / radius + peak / ref >= 1.0
        if accepted:
            centers.append(cand)
            potential = potential - peak * squash[cand]
        else:
            potential[cand] = 0.0
        if len(centers) == n:
            break
    return data[centers]


def init_tsk(centers, X, y, radius=0.5, sigma_scale=1.0) -> TskModel:
    """Model skeleton from cluster centers, consequents solved by least squares.

    ``centers`` are rows in normalised coordinates; columns beyond the input
    dimension (a clustered target column) are ignored. Premise widths follow
    sigma_scale * radius * column_range / sqrt(8), floored at SIGMA_FLOOR.
    """
    centers = np.asarray(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers.reshape(1, -1)
    if centers.shape[0] < 1:
        raise ValueError("at least one cluster center is required")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    d = X.shape[1]
    input_min = X.min(axis=0)
    input_max = X.max(axis=0)
    span = np.where(input_max - input_min > 0, input_max - input_min, 1.0)
    Z = (X - input_min) / span
    col_range = Z.max(axis=0) - Z.min(axis=0)
    sigma = np.maximum(sigma_scale * radius * col_range / np.sqrt(8.0), SIGMA_FLOOR)

    rules = []
    for center in centers[:, :d]:
        premise = tuple(GaussianMf(float(c), float(s)) for c, s in zip(center, sigma))
        rules.append(TskRule(premise, tuple(0.0 for _ in range(d)), 0.0))
    model = TskModel(rules, input_min, input_max)
    return lse_consequents(model, X, y)


def grid_partition_model(X, y, n_mfs=3, sigma=0.25, max_rules=4096) -> TskModel:
    """Model with ``n_mfs`` evenly spaced Gaussian premises per input (centers
    on [0, 1], e.g. {0, 0.5, 1} for three) and the full rule cross-product."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    d = X.shape[1]
    if n_mfs < 1:
        raise ValueError("n_mfs must be at least 1")
    if n_mfs ** d > max_rules:
        raise ValueError(f"grid partition would create {n_mfs ** d} rules (cap {max_rules})")
    centers = np.linspace(0.0, 1.0, n_mfs) if n_mfs > 1 else np.array([0.5])
    input_min = X.min(axis=0)
    input_max = X.max(axis=0)
    rules = []
    for combo in itertools.product(range(n_mfs), repeat=d):
        premise = tuple(GaussianMf(float(centers[k]), float(sigma)) for k in combo)
        rules.append(TskRule(premise, tuple(0.0 for _ in range(d)), 0.0))
    model = TskModel(rules, input_min, input_max)
    return lse_consequents(model, X, y)


def lse_consequents(model: TskModel, X, y) -> TskModel:
    """Globally optimal consequents for fixed premises.

    Solves the linear system on the normalised-firing design matrix with a
    minimum-norm least-squares solution, so rank-deficient systems are
    handled without failure.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    Z = model.normalize(X)
    n, d = Z.shape
    wbar = _normalized_firings(model, Z)
    design = np.concatenate([wbar[:, :, None] * Z[:, None, :], wbar[:, :, None]], axis=2)
    design = design.reshape(n, model.n_rules * (d + 1))
    theta = np.linalg.lstsq(design, y, rcond=None)[0].reshape(model.n_rules, d + 1)
    rules = [
        TskRule(rule.premise, tuple(float(c) for c in row[:d]), float(row[d]))
        for rule, row in zip(model.rules, theta)
    ]
    return TskModel(rules, model.input_min, model.input_max)


def _loss(model: TskModel, X, y) -> float:
    """Mean squared training error, the objective of the premise update."""
    y = np.asarray(y, dtype=float).reshape(-1)
    return float(np.mean((predict(model, X) - y) ** 2))


def premise_gradients(model: TskModel, X, y):
    """Analytic gradient of the mean squared error w.r.t. premise parameters.

    Returns ``(grad_centers, grad_sigmas)``, each of shape (rules, inputs).
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    Z = model.normalize(X)
    n = Z.shape[0]
    C, S, P, B = model._arrays()
    wbar = _normalized_firings(model, Z)
    G = Z @ P.T + B
    f = (wbar * G).sum(axis=1)
    # dE/dlogw_r per sample: residual times rule deviation from the blend.
    factor = (2.0 / n) * (f - y)[:, None] * wbar * (G - f[:, None])
    diff = Z[:, None, :] - C[None, :, :]
    grad_c = np.einsum("im,imd->md", factor, diff / S[None, :, :] ** 2)
    grad_s = np.einsum("im,imd->md", factor, diff ** 2 / S[None, :, :] ** 3)
    return grad_c, grad_s


def _with_premises(model: TskModel, C, S) -> TskModel:
    rules = [
        TskRule(
            tuple(GaussianMf(float(c), float(s)) for c, s in zip(crow, srow)),
            rule.coeffs,
            rule.bias,
        )
        for rule, crow, srow in zip(model.rules, C, S)
    ]
    return TskModel(rules, model.input_min, model.input_max)


def train_hybrid(model: TskModel, X, y, epochs: int, learning_rate: float = 0.01):
    """Hybrid training: per epoch a least-squares consequent solve followed by
    one gradient step on the premise centers and widths.

    The per-epoch RMSE (measured right after the consequent solve) forms the
    returned trace; the model snapshot with the lowest RMSE seen is returned,
    so a late destabilising premise step can never worsen the result.
    """
    if epochs < 1:
        raise ValueError("epochs must be at least 1")
    y = np.asarray(y, dtype=float).reshape(-1)
    best = None
    best_rmse = np.inf
    trace = []
    for _ in range(epochs):
        model = lse_consequents(model, X, y)
        epoch_rmse = rmse(predict(model, X), y)
        trace.append(epoch_rmse)
        if epoch_rmse < best_rmse:
            best, best_rmse = model, epoch_rmse
        grad_c, grad_s = premise_gradients(model, X, y)
        if not (np.all(np.isfinite(grad_c)) and np.all(np.isfinite(grad_s))):
            raise RuntimeError(
                "premise gradient became non-finite; lower the learning rate "
                "or rescale the training targets"
            )
        C, S, _, _ = model._arrays()
        model = _with_premises(
            model,
            C - learning_rate * grad_c,
            np.maximum(S - learning_rate * grad_s, SIGMA_FLOOR),
        )
    return best, trace


def gradient_check(model: TskModel, X, y, step: float = 1e-5) -> float:
    """Largest relative gap between analytic and central finite-difference
    premise gradients of the mean squared error.

    The per-parameter gap is divided by max(|analytic|, |numeric|, 1e-4) so
    that a flat optimum (both gradients near zero) does not blow up the ratio.
    """
    grad_c, grad_s = premise_gradients(model, X, y)
    C, S, _, _ = model._arrays()

    def fd(base_c, base_s, which, r, d):
        # keep sigma positive: near the floor the step shrinks symmetrically
        h = step if which == "c" else min(step, base_s[r, d] / 2.0)
        up_c, up_s = base_c.copy(), base_s.copy()
        dn_c, dn_s = base_c.copy(), base_s.copy()
        if which == "c":
            up_c[r, d] += h
            dn_c[r, d] -= h
        else:
            up_s[r, d] += h
            dn_s[r, d] -= h
        up = _loss(_with_premises(model, up_c, up_s), X, y)
        dn = _loss(_with_premises(model, dn_c, dn_s), X, y)
        return (up - dn) / (2.0 * h)

    worst = 0.0
    for r in range(model.n_rules):
        for d in range(model.input_dim):
            for which, analytic in (("c", grad_c[r, d]), ("s", grad_s[r, d])):
                numeric = fd(C, S, which, r, d)
                denom = max(abs(analytic), abs(numeric), 1e-4)
                worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def save_model(model: TskModel, path) -> None:
    """Serialise a model as JSON; floats round-trip bit exactly."""
    payload = {
        "kind": "tsk",
        "input_min": [float(v) for v in model.input_min],
        "input_max": [float(v) for v in model.input_max],
        "rules": [
            {
                "centers": [mf.center for mf in rule.premise],
                "sigmas": [mf.sigma for mf in rule.premise],
                "coeffs": list(rule.coeffs),
                "bias": rule.bias,
            }
            for rule in model.rules
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_model(path) -> TskModel:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("kind") != "tsk":
        raise ValueError(f"{path}: not a TSK model file")
    rules = [
        TskRule(
            tuple(GaussianMf(c, s) for c, s in zip(entry["centers"], entry["sigmas"])),
            tuple(entry["coeffs"]),
            entry["bias"],
        )
        for entry in payload["rules"]
    ]
    return TskModel(rules, payload["input_min"], payload["input_max"])


class TskRegressor(BaseEstimator, RegressorMixin):
    """Estimator facade over the functional TSK API.

    ``init="subtractive"`` clusters the joint normalised input/target space
    to place one rule per cluster; ``init="grid"`` uses ``n_mfs`` premises
    per input with the full cross-product of rules.
    """

    def __init__(
        self,
        init="subtractive",
        radius=0.5,
        n_mfs=3,
        sigma_scale=1.0,
        epochs=25,
        learning_rate=0.01,
        accept_ratio=0.5,
        reject_ratio=0.15,
    ):
        self.init = init
        self.radius = radius
        self.n_mfs = n_mfs
        self.sigma_scale = sigma_scale
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.accept_ratio = accept_ratio
        self.reject_ratio = reject_ratio

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if self.init == "subtractive":
            joint = np.column_stack([X, y])
            jmin = joint.min(axis=0)
            jspan = joint.max(axis=0) - jmin
            jspan = np.where(jspan > 0, jspan, 1.0)
            centers = subtractive_cluster(
                (joint - jmin) / jspan,
                radius=self.radius,
                accept_ratio=self.accept_ratio,
                reject_ratio=self.reject_ratio,
            )
            model = init_tsk(centers, X, y, radius=self.radius, sigma_scale=self.sigma_scale)
        elif self.init == "grid":
            model = grid_partition_model(X, y, n_mfs=self.n_mfs)
        else:
            raise ValueError(f"unknown init {self.init!r}")
        self.model_, self.trace_ = train_hybrid(
            model, X, y, epochs=self.epochs, learning_rate=self.learning_rate
        )
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return predict(self.model_, X)
