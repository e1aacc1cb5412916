"""Encryption of first-layer kernels so encrypted queries need no decryption.

A kernel is flattened and pushed through the same orthogonal operator that
:func:`speechkey.cipher.encrypt` applies to each query block. For a key
operator ``U`` the encrypted patch response is ``(x U) . (e U) = x U U^T e^T``,
which equals the plain response ``x . e`` because ``U`` is orthogonal.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .cipher import encrypt
from .core import KernelBank, Kernel, Signal, check_bank, first_layer_forward
from .errors import KeyMismatch, PatchSizeMismatch, ShapeError
from .keys import SecretKey


def encrypt_kernel(bank: KernelBank, key: SecretKey) -> KernelBank:
    """Apply ``key`` to every kernel of ``bank``; biases pass through unchanged."""
    if bank.P != key.M:
        raise PatchSizeMismatch(f"kernel size P = {bank.P} must equal key block size M = {key.M}")
    expected = (1, key.M) if key.dims == 1 else (key.M, key.M)
    if (bank.a, bank.b) != expected:
        raise KeyMismatch(
            f"{key.method} key over {key.N} elements ({key.dims}-D) does not fit "
            f"{bank.a} x {bank.b} kernels")
    rows = key.apply(bank.matrix())
    return KernelBank(tuple(Kernel(r.reshape(bank.a, bank.b), k.bias)
                            for r, k in zip(rows, bank.kernels)))


def verify_cancellation(signal: Signal, bank: KernelBank, key: SecretKey) -> float:
    """Max over feature-map entries of ``|plain - encrypted| / (1 + |plain|)``.

    ``plain`` runs the plain signal through the plain layer; ``encrypted``
    runs the encrypted signal through the encrypted layer.
    """
    if signal.dims != key.dims:
        raise ShapeError(f"{signal.dims}-D signal with a {key.dims}-D key")
    check_bank(bank, signal.dims, key.M)
    plain = first_layer_forward(signal, bank, key.M)
    enc = first_layer_forward(encrypt(signal, key), encrypt_kernel(bank, key), key.M)
    if plain.size == 0:
        return 0.0
    return float(np.max(np.abs(plain - enc) / (1.0 + np.abs(plain))))


def mismatch_probe(signal: Signal, bank: KernelBank, key_model: SecretKey,
                   key_query: Optional[SecretKey]) -> float:
    """Relative L2 gap between feature maps under matched and mismatched keys.

    The model layer is encrypted with ``key_model``. The matched map feeds it
    the query encrypted with ``key_model``; the mismatched map feeds it the
    query encrypted with ``key_query``, or the plain query when
    ``key_query`` is None. Identical keys give exactly 0.
    """
    if key_query is not None and (key_query.method, key_query.M, key_query.dims) != \
            (key_model.method, key_model.M, key_model.dims):
        raise KeyMismatch("model and query keys must share method, block size and dims")
    layer = encrypt_kernel(bank, key_model)
    matched = first_layer_forward(encrypt(signal, key_model), layer, key_model.M)
    query = signal if key_query is None else encrypt(signal, key_query)
    mismatched = first_layer_forward(query, layer, key_model.M)
    ref = np.linalg.norm(matched)
    gap = np.linalg.norm(mismatched - matched)
    if ref == 0.0:
        return 0.0 if gap == 0.0 else float("inf")
    return float(gap / ref)
