"""Isometric embedding of negative-semidefinite metrics into Euclidean space."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_symmetric

from .forms import energy, energy_kernel_element
from .metric import zero_sum_max_eigenvalue
from .network import Network

CLIP_RTOL = 1e-9


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingResult:
    vertices: tuple[str, ...]
    metric: np.ndarray
    gram: np.ndarray
    min_form_eigenvalue: float  # negated top eigenvalue of d^2 on zero-sum vectors
    coordinates: np.ndarray  # one row per vertex
    defect: float

    @property
    def rank(self) -> int:
        return self.coordinates.shape[1]

    def squared_distances(self) -> np.ndarray:
        W = self.coordinates
        sq = np.sum(W * W, axis=1)
        return np.maximum(sq[:, None] + sq[None, :] - 2.0 * W @ W.T, 0.0)

    def to_csv(self, handle=None, precision: int = 12) -> str | None:
        out = handle if handle is not None else io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["vertex"] + [f"coord_{k + 1}" for k in range(self.rank)])
        for v, row in zip(self.vertices, self.coordinates):
            writer.writerow([v] + [f"{x:.{precision}g}" for x in row])
        return out.getvalue() if handle is None else None


def _gram_from_squared(d2: np.ndarray, base: int) -> np.ndarray:
    return 0.5 * (d2[:, [base]] + d2[[base], :] - d2)


def _spectral_coordinates(G: np.ndarray, rtol: float = CLIP_RTOL):
    w, U = np.linalg.eigh(0.5 * (G + G.T))
    scale = max(float(np.max(np.abs(w))), np.finfo(float).tiny)
    if w[0] < -rtol * scale:
        raise EmbeddingError(f"Gram matrix has a negative eigenvalue {w[0]:.3e}")
    keep = w > rtol * scale
    return U[:, keep] * np.sqrt(w[keep]), w[keep], U[:, keep]


def vn_embed(d, vertices: Sequence[str] | None = None, base: int = 0,
             rtol: float = CLIP_RTOL) -> EmbeddingResult:
    """Embed the metric ``d`` so that Euclidean distances reproduce it.

    ``d`` must have a negative-semidefinite square on zero-sum vectors. To
    embed effective resistance itself pass ``sqrt(R)`` (or use
    :func:`embed_resistance`).
    """
    d = check_symmetric(check_array(d, dtype=float), raise_exception=True)
    n = d.shape[0]
    d2 = d * d
    top, _ = zero_sum_max_eigenvalue(d2)
    if top > rtol * np.linalg.norm(d2, 2):
        raise EmbeddingError(f"squared metric is not negative semidefinite (eigenvalue {top:.3e})")
    G = _gram_from_squared(d2, base)
    W, _, _ = _spectral_coordinates(G, rtol)
    vertices = tuple(str(v) for v in (vertices if vertices is not None else range(n)))
    sq = np.sum(W * W, axis=1)
    rec = sq[:, None] + sq[None, :] - 2.0 * W @ W.T
    defect = float(np.max(np.abs(rec - d2))) if n else 0.0
    return EmbeddingResult(vertices, d, G, -top, W, defect)


def embed_resistance(R, vertices: Sequence[str] | None = None, base: int = 0) -> EmbeddingResult:
    R = np.asarray(R, dtype=float)
    return vn_embed(np.sqrt(np.maximum(R, 0.0)), vertices, base)


def energy_distance_defect(result: EmbeddingResult, net: Network) -> float:
    """Largest gap between embedded squared distances and ``E(v_x - v_y)`` on ``net``."""
    V = {v: energy_kernel_element(net, v).values for v in result.vertices}
    sq = result.squared_distances()
    worst = 0.0
    for i, x in enumerate(result.vertices):
        for j in range(i + 1, len(result.vertices)):
            y = result.vertices[j]
            worst = max(worst, abs(sq[i, j] - energy(net, V[x] - V[y])))
    return worst


class VonNeumannEmbedding(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`vn_embed`.

    ``fit`` takes a square matrix of pairwise distances (or squared distances
    with ``squared=True``). ``transform`` maps new points given their squared
    distances to the training points, in the manner of a Nystroem extension.
    """

    def __init__(self, squared: bool = False, base: int = 0, tol: float = CLIP_RTOL):
        self.squared = squared
        self.base = base
        self.tol = tol

    def fit(self, X, y=None):
        X = check_symmetric(check_array(X, dtype=float), raise_exception=True)
        d = np.sqrt(np.maximum(X, 0.0)) if self.squared else X
        res = vn_embed(d, base=self.base, rtol=self.tol)
        self.embedding_ = res.coordinates
        self.defect_ = res.defect
        self.n_components_ = res.rank
        _, self.eigenvalues_, self.eigenvectors_ = _spectral_coordinates(res.gram, self.tol)
        self.train_sq_ = d * d
        self.n_features_in_ = X.shape[1]
        return self

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).embedding_

    def transform(self, X):
        check_is_fitted(self, "embedding_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        d2 = X if self.squared else X * X
        b = self.base
        g = 0.5 * (d2[:, [b]] + self.train_sq_[[b], :] - d2)
        return g @ self.eigenvectors_ / np.sqrt(self.eigenvalues_)
