"""Small synthetic binary-classification problems for tests and demos."""

from __future__ import annotations

import numpy as np

from .data import SparseDataset


def make_classification(n: int = 200, d: int = 20, informative: int = 5,
                        separation: float = 2.5, noise: float = 0.2,
                        flip: float = 0.05, seed: int = 0) -> SparseDataset:
    """Two Gaussian classes at ``+/- mu`` with a fraction of flipped labels.

    ``mu`` has norm ``separation`` spread over the first ``informative``
    coordinates; every coordinate gets isotropic noise of scale ``noise``.
    """
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    mu = np.zeros(d)
    mu[:informative] = separation / np.sqrt(informative)
    X = y[:, None] * mu + noise * rng.normal(size=(n, d))
    flipped = rng.random(n) < flip
    y[flipped] *= -1.0
    return SparseDataset.from_matrix(X, y)


def make_gaussian(n: int, d: int, seed: int = 0, scale: float = 1.0) -> SparseDataset:
    """Isotropic features with labels from a random hyperplane."""
    rng = np.random.default_rng(seed)
    X = scale * rng.normal(size=(n, d))
    y = np.sign(X @ rng.normal(size=d))
    y[y == 0] = 1.0
    return SparseDataset.from_matrix(X, y)
