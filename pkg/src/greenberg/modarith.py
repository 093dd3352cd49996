"""Vectorised arithmetic modulo a prime r < 2^50 on int64 arrays.

``mulmod`` uses a float64 estimate of the quotient and corrects with exact
wrapping int64 arithmetic; for r < 2^50 the estimate is off by at most 2,
so the corrected residue never leaves the int64 range.
"""
from __future__ import annotations

import numpy as np

MAX_MODULUS = 1 << 50


def mulmod(a: np.ndarray, b: np.ndarray, r: int) -> np.ndarray:
    q = np.floor(a.astype(np.float64) * b.astype(np.float64) / float(r)).astype(np.int64)
    res = a * b - q * np.int64(r)
    return np.mod(res, r)


def prod_rows(x: np.ndarray, r: int) -> np.ndarray:
    """Product of each row of a 2-d array modulo r (pairwise tree)."""
    x = np.asarray(x, dtype=np.int64)
    while x.shape[1] > 1:
        if x.shape[1] % 2:
            x = np.concatenate([x, np.ones((x.shape[0], 1), dtype=np.int64)], axis=1)
        x = mulmod(x[:, 0::2], x[:, 1::2], r)
    return x[:, 0]


def power_table(w: int, n: int, r: int) -> np.ndarray:
    """[w^0, w^1, ..., w^(n-1)] mod r by repeated doubling."""
    out = np.ones(max(n, 1), dtype=np.int64)
    if n > 1:
        out[1] = w % r
        k = 2
        while k < n:
            step = pow(w, k, r)
            m = min(k, n - k)
            out[k:k + m] = mulmod(out[:m], np.full(m, step, dtype=np.int64), r)
            k *= 2
    return out[:n]

