"""Closed-form and factorization models: EASE^R and PureSVD."""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .base import Recommender


class NumericalError(ArithmeticError):
    pass


def ease_weights(r, lam: float) -> np.ndarray:
    """Item-item weights ``B = I - P diag(1/diag(P))`` with ``P = (R^T R + lam I)^-1``."""
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    r = sp.csr_matrix(r, dtype=np.float64)
    gram = (r.T @ r).toarray()
    gram[np.diag_indices_from(gram)] += lam
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"R^T R + lambda I is numerically singular (lambda={lam})") from exc
    p = scipy.linalg.cho_solve(factor, np.eye(gram.shape[0]))
    b = -p / np.diag(p)[None, :]
    np.fill_diagonal(b, 0.0)
    if not np.all(np.isfinite(b)):
        raise NumericalError("non-finite EASE^R weights")
    return b


class EASER(Recommender):
    tag = "easer"
    label = "EASE^R"

    def __init__(self, lam: float = 100.0, **params):
        if not lam > 0:
            raise ValueError("lambda must be > 0")
        super().__init__(lam=float(lam), **params)

    def _fit(self, train):
        self.weights = ease_weights(train.matrix, self.params["lam"])

    def _score(self, users):
        return np.asarray(self.train.matrix[users] @ self.weights)

    def state(self):
        return {"weights": self.weights}

    def load_state(self, state):
        self.weights = np.asarray(state["weights"], dtype=np.float64)


def randomized_svd(a, rank: int, seed: int, oversample: int = 8, power_iters: int = 4):
    """Rank-``rank`` truncated SVD by seeded randomized subspace iteration.

    Returns ``(U, s, Vt)`` with orthonormal columns in ``U`` and rows in
    ``Vt`` and ``s`` nonincreasing.
    """
    a = sp.csr_matrix(a, dtype=np.float64) if sp.issparse(a) else np.asarray(a, dtype=np.float64)
    m, n = a.shape
    if not 1 <= rank <= min(m, n):
        raise ValueError(f"rank must be in [1, {min(m, n)}], got {rank}")
    width = min(rank + oversample, m, n)
    rng = np.random.Generator(np.random.PCG64(seed))
    omega = rng.standard_normal((n, width))
    try:
        q, _ = np.linalg.qr(a @ omega)
        for _ in range(power_iters):
            z, _ = np.linalg.qr(a.T @ q)
            q, _ = np.linalg.qr(a @ z)
        small = np.asarray(a.T @ q).T
        u_small, s, vt = np.linalg.svd(small, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("randomized SVD did not converge") from exc
    u = q @ u_small
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(s)) and np.all(np.isfinite(vt))):
        raise NumericalError("randomized SVD produced non-finite factors")
    return u[:, :rank], s[:rank], vt[:rank]


class PureSVD(Recommender):
    tag = "puresvd"
    label = "PureSVD"

    def __init__(self, factors: int = 50, seed: int = 0, oversample: int = 8, power_iters: int = 4, **params):
        if int(factors) < 1:
            raise ValueError("factors must be >= 1")
        super().__init__(factors=int(factors), seed=int(seed), oversample=int(oversample),
                         power_iters=int(power_iters), **params)

    def _fit(self, train):
        f = min(self.params["factors"], train.num_users, train.num_items)
        u, s, vt = randomized_svd(train.matrix, f, self.params["seed"],
                                  self.params["oversample"], self.params["power_iters"])
        self.user_factors = u
        self.singular_values = s
        self.item_factors = vt.T

    def _score(self, users):
        return (self.user_factors[users] * self.singular_values) @ self.item_factors.T

    def state(self):
        return {"user_factors": self.user_factors, "singular_values": self.singular_values,
                "item_factors": self.item_factors}

    def load_state(self, state):
        self.user_factors = np.asarray(state["user_factors"], dtype=np.float64)
        self.singular_values = np.asarray(state["singular_values"], dtype=np.float64)
        self.item_factors = np.asarray(state["item_factors"], dtype=np.float64)
