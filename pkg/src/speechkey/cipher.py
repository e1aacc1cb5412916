"""Block-wise encryption and decryption of signals.

Every block is flattened row-major, transformed by the key and reshaped in
place. One key serves every block. Signals whose axes are not a multiple of
the block size are zero-padded; the encrypted signal keeps the padded
shape and remembers the original lengths so :func:`decrypt` can trim.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .core import Signal, from_blocks, make_grid, pad_to_grid, to_blocks
from .errors import InvalidSignal, StreamError
from .keys import SecretKey, check_key


def _transform(signal: Signal, key: SecretKey, op) -> tuple:
    check_key(key, signal.dims)
    grid = make_grid(signal.F, signal.T, signal.dims, key.M)
    blocks = to_blocks(pad_to_grid(signal.data, grid), grid)
    return grid, from_blocks(op(blocks), grid)


def encrypt(signal: Signal, key: SecretKey) -> Signal:
    if not isinstance(signal, Signal):
        raise InvalidSignal(f"expected a Signal, got {type(signal).__name__}")
    grid, data = _transform(signal, key, key.apply)
    return signal.replace_data(
        data,
        original_T=signal.original_T if signal.original_T is not None else grid.original_T,
        original_F=signal.original_F if signal.original_F is not None else grid.original_F)


def decrypt(signal: Signal, key: SecretKey) -> Signal:
    """Undo :func:`encrypt` and trim the zero padding back off."""
    if not isinstance(signal, Signal):
        raise InvalidSignal(f"expected a Signal, got {type(signal).__name__}")
    _, data = _transform(signal, key, key.inverse().apply)
    T = signal.original_T if signal.original_T is not None else signal.T
    F = signal.original_F if signal.original_F is not None else signal.F
    return signal.replace_data(data[:F, :T], original_T=None, original_F=None)


def _chunk_columns(chunk, dims, F):
    arr = np.asarray(chunk, dtype=np.float64)
    if dims == 1:
        return arr.reshape(1, -1)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape[0] != F:
        raise InvalidSignal(f"expected frames with {F} rows, got {arr.shape[0]}")
    return arr


def encrypt_stream(reader: Iterable, key: SecretKey, writer: Callable, F: int = 1) -> int:
    """Encrypt a signal that arrives in time order, one block column at a time.

    ``reader`` yields chunks: runs of samples for waveforms, or ``F x k``
    frame matrices for spectrograms (``key.dims == 2``). ``writer`` is called
    with each encrypted block column as an ``F_padded x M`` array (waveforms
    get a flat array of ``M`` samples). The final partial column is
    zero-padded, matching :func:`encrypt`. Only ``M`` time steps are buffered.

    Returns the number of blocks written.
    """
    dims = key.dims
    if dims == 1:
        F = 1
    grid = make_grid(F, key.M, dims, key.M)
    M = key.M
    buf = np.zeros((F, 0))
    position = 0
    n_blocks = 0

    def emit(cols):
        nonlocal n_blocks
        padded = pad_to_grid(cols, grid)
        out = from_blocks(key.apply(to_blocks(padded, grid)), grid)
        try:
            writer(out.reshape(-1) if dims == 1 else out)
        except Exception as exc:
            raise StreamError(f"writer failed: {exc}", position) from exc
        n_blocks += grid.f

    it = iter(reader)
    while True:
        try:
            chunk = next(it)
        except StopIteration:
            break
        except Exception as exc:
            raise StreamError(f"reader failed: {exc}", position) from exc
        cols = _chunk_columns(chunk, dims, F)
        if not np.all(np.isfinite(cols)):
            raise InvalidSignal(f"non-finite sample near position {position}")
        buf = np.concatenate([buf, cols], axis=1)
        while buf.shape[1] >= M:
            emit(buf[:, :M])
            buf = buf[:, M:]
            position += M
    if buf.shape[1]:
        emit(buf)
        position += buf.shape[1]
    return n_blocks
