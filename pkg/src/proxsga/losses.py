"""Lorenz loss and the empirical risk ``f(w) = mean_j L(y_j w.x_j)``."""

from __future__ import annotations

import numpy as np

from .data import SparseDataset, max_row_sq_norm, mean_row_sq_norm


def lorenz_value(v):
    """``log(1 + (v-1)^2)`` for ``v <= 1`` and 0 above."""
    v = np.asarray(v, dtype=np.float64)
    u = np.minimum(v - 1.0, 0.0)
    out = np.log1p(u * u)
    return out if out.ndim else float(out)


def lorenz_deriv(v):
    """Derivative of :func:`lorenz_value`; lies in [-1, 0]."""
    v = np.asarray(v, dtype=np.float64)
    u = np.minimum(v - 1.0, 0.0)
    out = 2.0 * u / (1.0 + u * u)
    return out if out.ndim else float(out)


def dc_parts(v):
    """Convex pair ``(L1, L2)`` with ``L = L1 - L2``.

    The Lorenz second derivative is bounded below by -1/4, so adding
    ``v^2 / 8`` makes it convex.
    """
    q = np.asarray(v, dtype=np.float64) ** 2 / 8.0
    l1 = q + lorenz_value(v)
    if np.ndim(l1) == 0:
        return float(l1), float(q)
    return l1, q


class ErmObjective:
    """``f(w) = (1/n) sum_j L(y_j * w.x_j)`` over a :class:`SparseDataset`.

    Per-sample gradients are ``L'(margin_j) * y_j * x_j``. Every gradient
    routine reduces over rows in ascending sample order so results are
    reproducible bit for bit.
    """

    def __init__(self, dataset: SparseDataset):
        self.dataset = dataset
        self.X = dataset.X
        self.y = dataset.labels
        self.n = dataset.n
        self.d = dataset.d
        # smoothness of f (mean) and of each f_j (max)
        self.L_mean = 2.0 * mean_row_sq_norm(dataset)
        self.L_max = 2.0 * max_row_sq_norm(dataset)

    def _check(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.d,):
            raise ValueError(f"expected w of shape ({self.d},), got {w.shape}")
        return w

    def margins(self, w) -> np.ndarray:
        w = self._check(w)
        return self.y * (self.X @ w)

    def value(self, w) -> float:
        return float(np.mean(lorenz_value(self.margins(w))))

    def sample_coefs(self, w, rows=None) -> np.ndarray:
        """Scalars ``c_j = L'(margin_j) y_j`` so that ``grad f_j = c_j x_j``."""
        w = self._check(w)
        if rows is None:
            return lorenz_deriv(self.y * (self.X @ w)) * self.y
        rows = np.asarray(rows, dtype=np.int64)
        owner, cols, vals = self._gather(rows)
        xw = np.bincount(owner, weights=vals * w[cols], minlength=rows.size)
        yr = self.y[rows]
        return lorenz_deriv(yr * xw) * yr

    def _gather(self, rows):
        """Flattened nonzeros of ``X[rows]``: (position in rows, column, value)."""
        indptr = self.X.indptr
        starts = indptr[rows]
        lengths = indptr[rows + 1] - starts
        offsets = np.cumsum(lengths) - lengths
        flat = np.arange(int(lengths.sum())) + np.repeat(starts - offsets, lengths)
        owner = np.repeat(np.arange(rows.size), lengths)
        return owner, self.X.indices[flat], self.X.data[flat]

    def weighted_rows_sum(self, rows, weights, denom: float) -> np.ndarray:
        """``(1/denom) * sum_r weights[r] * x_{rows[r]}`` with ``rows`` sorted.

        ``rows=None`` means every row. The full-row case goes through the
        unsliced matrix so it is bitwise identical whichever caller uses it.
        """
        if rows is None or (len(rows) == self.n and rows[0] == 0
                            and rows[-1] == self.n - 1):
            return (self.X.T @ weights) / denom
        owner, cols, vals = self._gather(np.asarray(rows, dtype=np.int64))
        return np.bincount(cols, weights=vals * weights[owner], minlength=self.d) / denom

    def full_gradient(self, w) -> np.ndarray:
        c = self.sample_coefs(w)
        return self.weighted_rows_sum(None, c, float(self.n))

    def minibatch_gradient(self, w, sample_indices, coefs=None) -> np.ndarray:
        """Average of per-sample gradients over an index multiset.

        ``coefs`` may hold precomputed ``c_j`` for all samples (used for the
        snapshot term of the variance-reduced method).
        """
        idx = np.asarray(sample_indices, dtype=np.int64)
        if idx.size == 0:
            raise ValueError("empty sample index list")
        if idx.min() < 0 or idx.max() >= self.n:
            raise IndexError("sample index out of range")
        rows, counts = np.unique(idx, return_counts=True)
        full = rows.size == self.n
        if coefs is None:
            c = self.sample_coefs(w) if full else self.sample_coefs(w, rows)
        else:
            c = coefs if full else coefs[rows]
        weights = c * counts
        return self.weighted_rows_sum(None if full else rows, weights, float(idx.size))

    def sample_gradient(self, w, j: int) -> np.ndarray:
        return self.minibatch_gradient(w, [j])

    def sample_gradients_dense(self, w) -> np.ndarray:
        """All per-sample gradients as an ``n x d`` dense array (small n only)."""
        c = self.sample_coefs(w)
        return self.X.multiply(c[:, None]).toarray()

    def gradient_variance(self, w) -> float:
        """Exact ``E||grad f_j(w) - grad f(w)||^2`` under uniform sampling."""
        P = self.sample_gradients_dense(w)
        return float(np.mean(np.sum((P - P.mean(axis=0)) ** 2, axis=1)))
