"""Small dense kernels: stable softmax, log-sum-exp, convex combination,
and Euclidean projection onto the probability simplex.

Everything is 64-bit, pure, and allocation-light; these functions back
every weighting scheme in the toolkit.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, InvalidInput

# Tolerance for membership in the probability simplex.
SIMPLEX_ATOL = 1e-12


def as_vector(x, name: str = "input") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInput(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return v


def as_matrix(x, name: str = "input") -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return m


def is_simplex(w, atol: float = SIMPLEX_ATOL) -> bool:
    w = np.asarray(w, dtype=np.float64)
    return (
        w.ndim == 1
        and w.size > 0
        and bool(np.all(w >= 0))
        and abs(float(w.sum()) - 1.0) <= atol
    )


def check_simplex(w, name: str = "weights") -> np.ndarray:
    w = as_vector(w, name)
    if not is_simplex(w):
        raise InvalidInput(f"{name} is not a probability vector")
    return w


def softmax(scores, temperature: float = 1.0) -> np.ndarray:
    """Normalized exponential weights exp(s_j/t) / sum_p exp(s_p/t).

    Stabilized by max-subtraction; ties in the maximum break toward the
    lowest index (irrelevant to the value, relevant to determinism).
    """
    s = as_vector(scores, "scores")
    if s.size == 0:
        raise InvalidInput("scores must be nonempty")
    if not (np.isfinite(temperature) and temperature > 0):
        raise InvalidInput(f"temperature must be positive, got {temperature}")
    z = (s - s.max()) / float(temperature)
    e = np.exp(z)
    return e / e.sum()


def log_sum_exp(scores) -> float:
    """log sum_j exp(s_j) via max-subtraction; exact for a single element."""
    s = as_vector(scores, "scores")
    if s.size == 0:
        raise InvalidInput("scores must be nonempty")
    m = float(s.max())
    if s.size == 1:
        return m
    return m + float(np.log(np.exp(s - m).sum()))


def convex_combine(weights, tokens) -> np.ndarray:
    """sum_j weights[j] * tokens[j]; stays inside the tokens' convex hull."""
    w = as_vector(weights, "weights")
    try:
        t = np.asarray(tokens, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatch(f"tokens are ragged: {exc}") from None
    if t.ndim != 2:
        raise (
            InvalidInput("token list must be nonempty")
            if t.size == 0
            else DimensionMismatch(f"tokens must be a list of vectors, got shape {t.shape}")
        )
    if t.shape[0] == 0:
        raise InvalidInput("token list must be nonempty")
    if w.size != t.shape[0]:
        raise DimensionMismatch(f"{w.size} weights for {t.shape[0]} tokens")
    return w @ t


def simplex_project(v) -> np.ndarray:
    """Euclidean projection onto the simplex via sort-and-threshold.

    Points already on the simplex (within SIMPLEX_ATOL) are returned
    unchanged, which makes the projection bit-exactly idempotent.
    """
    v = as_vector(v, "v")
    if v.size == 0:
        raise InvalidInput("input must be nonempty")
    if np.all(v >= 0) and abs(float(v.sum()) - 1.0) <= SIMPLEX_ATOL:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u + (1.0 - css) / j > 0)[0][-1])
    lam = (1.0 - css[rho]) / (rho + 1)
    return np.maximum(v + lam, 0.0)
