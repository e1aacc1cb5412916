"""Householder QR factorisation used to build random orthogonal keys."""

from __future__ import annotations

import numpy as np


def householder_qr(A):
    """Full QR factorisation ``A = Q @ R`` of a square or tall matrix.

    Reflector ``i`` maps ``R[i:, i]`` onto ``-sign(x0) * ||x|| * e1``, the
    cancellation-free choice, so ``R`` can have negative diagonal entries.
    Zero columns are skipped (identity reflector).
    """
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise ValueError(f"need a square or tall matrix, got shape {A.shape}")
    m, n = A.shape
    R = A
    reflectors = []
    for i in range(min(n, m - 1)):
        x = R[i:, i]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            reflectors.append(None)
            continue
        v = x.copy()
        v[0] += normx if x[0] >= 0 else -normx
        v /= np.linalg.norm(v)
        R[i:, i:] -= 2.0 * np.outer(v, v @ R[i:, i:])
        R[i + 1:, i] = 0.0
        reflectors.append(v)

    Q = np.eye(m)
    for i in range(len(reflectors) - 1, -1, -1):
        v = reflectors[i]
        if v is not None:
            Q[i:, :] -= 2.0 * np.outer(v, v @ Q[i:, :])
    return Q, R


def sign_fix(Q, R):
    """Negate column ``i`` of ``Q`` wherever ``R[i, i] < 0``.

    This picks the unique QR factor with a non-negative diagonal, which is
    what makes QR of a Gaussian matrix Haar distributed.
    """
    Q = np.array(Q, dtype=np.float64)
    Q[:, np.diag(R) < 0] *= -1.0
    return Q
