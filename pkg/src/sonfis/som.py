"""Batch self-organizing maps.

Two uses: 2-D grids condense a training table into crisp granules (occupied
prototype rows), and 1-D maps discretize a single attribute into ordered
categories 1..k.
"""

from __future__ import annotations

import csv

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

__all__ = ["SelfOrganizingMap", "SomDiscretizer", "export_prototypes"]

#: Neighbourhood radius reached on the last training epoch.
SIGMA_FINAL = 0.5


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training data must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("training data must be finite")
    return X


def _grid_positions(shape) -> np.ndarray:
    """Integer lattice coordinates of all neurons, row-major."""
    if len(shape) == 1:
        return np.arange(shape[0], dtype=float).reshape(-1, 1)
    rows, cols = shape
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1).astype(float)


class SelfOrganizingMap(BaseEstimator):
    """Batch-trained Kohonen map on min-max normalised inputs.

    Each epoch assigns every sample to its best matching unit (nearest
    prototype, Euclidean, ties to the lowest index) and then moves every
    prototype to the Gaussian-neighbourhood-weighted mean of all samples.
    The neighbourhood radius decays linearly from ``sigma0`` down to 0.5
    over the epochs. Prototypes are initialised from random data rows, so a
    fixed ``seed`` makes training fully reproducible.

    Parameters
    ----------
    shape : tuple
        ``(rows, cols)`` for a 2-D grid or ``(k,)`` for a 1-D line.
    epochs : int
        Number of batch passes, at least 1.
    sigma0 : float or None
        Initial neighbourhood radius; ``None`` picks half the largest grid
        dimension (never below 0.5).
    seed : int
        Seed for the prototype initialisation.
    """

    def __init__(self, shape=(3, 3), epochs=100, sigma0=None, seed=0):
        self.shape = shape
        self.epochs = epochs
        self.sigma0 = sigma0
        self.seed = seed

    def _check_params(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) not in (1, 2) or any(s < 1 for s in shape):
            raise ValueError(f"invalid map shape {self.shape!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.sigma0 is not None and self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        return shape

    def fit(self, X, y=None):
        shape = self._check_params()
        X = _as_matrix(X)
        n, d = X.shape
        n_neurons = int(np.prod(shape))

        self.input_min_ = X.min(axis=0)
        span = X.max(axis=0) - self.input_min_
        self.input_range_ = np.where(span > 0, span, 1.0)
        Z = (X - self.input_min_) / self.input_range_

        rng = np.random.default_rng(self.seed)
        init_rows = rng.choice(n, size=n_neurons, replace=n < n_neurons)
        W = Z[init_rows].copy()

        positions = _grid_positions(shape)
        grid_d2 = ((positions[:, None, :] - positions[None, :, :]) ** 2).sum(axis=2)

        sigma0 = self.sigma0 if self.sigma0 is not None else max(max(shape) / 2.0, SIGMA_FINAL)
        for t in range(self.epochs):
            if self.epochs > 1:
                sigma = sigma0 + (SIGMA_FINAL - sigma0) * t / (self.epochs - 1)
            else:
                sigma = sigma0
            d2 = ((Z[:, None, :] - W[None, :, :]) ** 2).sum(axis=2)
            bmu = d2.argmin(axis=1)
            H = np.exp(-grid_d2 / (2.0 * sigma * sigma))
            weights = H[:, bmu]                      # (neurons, samples)
            numer = weights @ Z
            denom = weights.sum(axis=1)
            live = denom > 0                         # underflow guard for far neurons
            W[live] = numer[live] / denom[live, None]

        self.shape_ = shape
        self.positions_ = positions
        self.prototypes_ = W
        self.epochs_trained_ = int(self.epochs)
        return self

    def _normalize(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if X.shape[1] != self.prototypes_.shape[1]:
            raise ValueError(
                f"sample dimension {X.shape[1]} does not match map dimension "
                f"{self.prototypes_.shape[1]}"
            )
        return (X - self.input_min_) / self.input_range_

    def denormalize(self, prototypes) -> np.ndarray:
        """Map prototype rows from normalised [0,1] space back to input units."""
        check_is_fitted(self, "prototypes_")
        return np.asarray(prototypes) * self.input_range_ + self.input_min_

    def predict(self, X) -> np.ndarray:
        """Best-matching-unit index for every row of ``X``."""
        check_is_fitted(self, "prototypes_")
        Z = self._normalize(X)
        d2 = ((Z[:, None, :] - self.prototypes_[None, :, :]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)

    def bmu(self, sample) -> int:
        """Best-matching-unit index of a single sample."""
        return int(self.predict(np.asarray(sample, dtype=float).reshape(1, -1))[0])

    def granules(self, X) -> np.ndarray:
        """Crisp granule matrix: de-normalised prototypes of every neuron that
        is the best matching unit of at least one row of ``X``, in neuron
        index order."""
        occupied = np.unique(self.predict(X))
        return self.denormalize(self.prototypes_[occupied])


class SomDiscretizer(BaseEstimator, TransformerMixin):
    """Ordinal discretizer built on a 1-D self-organizing map.

    After fitting on a single attribute, the k neurons are ranked by
    prototype value; a value's category is the rank of its best matching
    unit, so category 1 is "very low" and category k "very high". The
    mapping is monotone in the input value.
    """

    def __init__(self, n_categories=5, epochs=100, sigma0=None, seed=0):
        self.n_categories = n_categories
        self.epochs = epochs
        self.sigma0 = sigma0
        self.seed = seed

    def fit(self, values, y=None):
        if self.n_categories < 1:
            raise ValueError("n_categories must be at least 1")
        v = np.asarray(values, dtype=float).reshape(-1, 1)
        self.som_ = SelfOrganizingMap(
            shape=(int(self.n_categories),),
            epochs=self.epochs,
            sigma0=self.sigma0,
            seed=self.seed,
        ).fit(v)
        prototypes = self.som_.denormalize(self.som_.prototypes_)[:, 0]
        order = np.argsort(prototypes, kind="stable")
        category_of_neuron = np.empty(len(order), dtype=int)
        category_of_neuron[order] = np.arange(1, len(order) + 1)
        self.category_of_neuron_ = category_of_neuron
        self.levels_ = prototypes[order]
        return self

    @property
    def cut_points_(self) -> np.ndarray:
        """Boundaries between adjacent categories (midpoints of sorted levels)."""
        check_is_fitted(self, "levels_")
        return (self.levels_[:-1] + self.levels_[1:]) / 2.0

    def transform(self, values) -> np.ndarray:
        """Categories 1..k for the given values."""
        check_is_fitted(self, "levels_")
        v = np.asarray(values, dtype=float).reshape(-1, 1)
        return self.category_of_neuron_[self.som_.predict(v)]

    def to_dict(self) -> dict:
        """JSON-serialisable state sufficient to reproduce ``transform``."""
        check_is_fitted(self, "levels_")
        return {
            "n_categories": int(self.n_categories),
            "prototypes": [float(p) for p in self.som_.prototypes_[:, 0]],
            "input_min": float(self.som_.input_min_[0]),
            "input_range": float(self.som_.input_range_[0]),
        }

    @classmethod
    def from_dict(cls, state: dict) -> "SomDiscretizer":
        disc = cls(n_categories=state["n_categories"])
        som = SelfOrganizingMap(shape=(state["n_categories"],))
        som.shape_ = (state["n_categories"],)
        som.positions_ = _grid_positions(som.shape_)
        som.prototypes_ = np.asarray(state["prototypes"], dtype=float).reshape(-1, 1)
        som.input_min_ = np.array([state["input_min"]], dtype=float)
        som.input_range_ = np.array([state["input_range"]], dtype=float)
        som.epochs_trained_ = 0
        disc.som_ = som
        prototypes = som.denormalize(som.prototypes_)[:, 0]
        order = np.argsort(prototypes, kind="stable")
        category_of_neuron = np.empty(len(order), dtype=int)
        category_of_neuron[order] = np.arange(1, len(order) + 1)
        disc.category_of_neuron_ = category_of_neuron
        disc.levels_ = prototypes[order]
        return disc


def export_prototypes(som: SelfOrganizingMap, path, names=None) -> None:
    """Write de-normalised prototypes as CSV, one row per neuron."""
    check_is_fitted(som, "prototypes_")
    prototypes = som.denormalize(som.prototypes_)
    if names is None:
        names = [f"w{j}" for j in range(prototypes.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["neuron", *names])
        for i, row in enumerate(prototypes):
            writer.writerow([i, *[repr(float(v)) for v in row]])
