"""Signals, block tilings and the stride-equals-kernel convolution primitive.

A signal is always held as an ``F x T`` float64 matrix: waveforms are the
``F == 1`` case. Blocks are ``n x m`` tiles (``1 x M`` for waveforms,
``M x M`` for spectrograms) flattened in row-major order, so a block's
element ``(i, j)`` lands at flat index ``i * m + j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidBlockSize, InvalidSignal, PatchSizeMismatch, ShapeError


def _frozen(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Signal:
    """A waveform (``dims == 1``) or spectrogram (``dims == 2``).

    ``original_T`` / ``original_F`` record the pre-padding lengths of a
    block-padded signal so decryption can trim back to the input shape.
    """

    data: np.ndarray
    dims: int = 1
    sample_rate: Optional[int] = None
    original_T: Optional[int] = None
    original_F: Optional[int] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if self.dims not in (1, 2):
            raise InvalidSignal(f"dims must be 1 or 2, got {self.dims}")
        if self.dims == 1 and data.ndim == 1:
            data = data.reshape(1, -1)
        if data.ndim != 2:
            raise InvalidSignal(f"signal data must be a matrix, got {data.ndim} axes")
        if self.dims == 1 and data.shape[0] != 1:
            raise InvalidSignal(f"waveforms must have F == 1, got F = {data.shape[0]}")
        if not np.all(np.isfinite(data)):
            raise InvalidSignal("signal contains NaN or infinite values")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def waveform(cls, samples, sample_rate=None, original_T=None) -> "Signal":
        return cls(np.asarray(samples, dtype=np.float64).reshape(1, -1), 1,
                   sample_rate, original_T)

    @classmethod
    def spectrogram(cls, matrix, original_T=None, original_F=None) -> "Signal":
        return cls(matrix, 2, None, original_T, original_F)

    @property
    def F(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]

    @property
    def samples(self) -> np.ndarray:
        """Flat view of a waveform's samples."""
        return self.data.reshape(-1)

    def replace_data(self, data, **meta) -> "Signal":
        kwargs = dict(dims=self.dims, sample_rate=self.sample_rate,
                      original_T=self.original_T, original_F=self.original_F)
        kwargs.update(meta)
        return Signal(data, **kwargs)


@dataclass(frozen=True)
class BlockGrid:
    """Tiling of a signal into ``f x t`` blocks of size ``M``.

    ``F``/``T`` are the padded axis lengths; ``original_F``/``original_T``
    the lengths before zero padding.
    """

    M: int
    dims: int
    f: int
    t: int
    original_F: int
    original_T: int
    remainder_policy: str = "zero-pad"

    @property
    def n(self) -> int:
        return 1 if self.dims == 1 else self.M

    @property
    def m(self) -> int:
        return self.M

    @property
    def N(self) -> int:
        return self.n * self.m

    @property
    def F(self) -> int:
        return self.f * self.n

    @property
    def T(self) -> int:
        return self.t * self.M


@dataclass(frozen=True, eq=False)
class Block:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"a block is an n x m matrix, got shape {values.shape}")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def N(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class Kernel:
    """One first-layer kernel of shape ``a x b`` (``1 x P`` or ``P x P``)."""

    weights: np.ndarray
    bias: Optional[float] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim == 1:
            w = w.reshape(1, -1)
        if w.ndim != 2 or w.size == 0:
            raise ShapeError(f"kernel weights must be a non-empty matrix, got shape {w.shape}")
        if w.shape[0] != 1 and w.shape[0] != w.shape[1]:
            raise ShapeError(f"kernel must be 1 x P or P x P, got {w.shape[0]} x {w.shape[1]}")
        if not np.all(np.isfinite(w)):
            raise ShapeError("kernel weights must be finite")
        object.__setattr__(self, "weights", _frozen(w))
        if self.bias is not None:
            object.__setattr__(self, "bias", float(self.bias))

    @property
    def a(self) -> int:
        return self.weights.shape[0]

    @property
    def b(self) -> int:
        return self.weights.shape[1]

    @property
    def P(self) -> int:
        return self.b


@dataclass(frozen=True, eq=False)
class KernelBank:
    """``C_out`` kernels of identical shape, i.e. a first convolutional layer."""

    kernels: tuple = field(default_factory=tuple)

    def __post_init__(self):
        kernels = tuple(self.kernels)
        if not kernels:
            raise ShapeError("a kernel bank needs at least one kernel")
        shapes = {k.weights.shape for k in kernels}
        if len(shapes) != 1:
            raise ShapeError(f"kernels in a bank must share one shape, got {sorted(shapes)}")
        object.__setattr__(self, "kernels", kernels)

    @classmethod
    def from_array(cls, weights, biases=None) -> "KernelBank":
        """Build a bank from a ``(C_out, a, b)`` (or ``(C_out, b)``) array."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim == 2:
            weights = weights[:, None, :]
        if biases is None:
            biases = [None] * len(weights)
        return cls(tuple(Kernel(w, b) for w, b in zip(weights, biases)))

    def __len__(self) -> int:
        return len(self.kernels)

    @property
    def a(self) -> int:
        return self.kernels[0].a

    @property
    def b(self) -> int:
        return self.kernels[0].b

    @property
    def P(self) -> int:
        return self.kernels[0].P

    def matrix(self) -> np.ndarray:
        """Flattened kernels as a ``(C_out, a*b)`` array."""
        return np.stack([k.weights.reshape(-1) for k in self.kernels])

    def biases(self) -> np.ndarray:
        return np.array([0.0 if k.bias is None else k.bias for k in self.kernels])


def make_grid(F: int, T: int, dims: int, M: int) -> BlockGrid:
    if not isinstance(M, (int, np.integer)) or isinstance(M, bool) or M < 1:
        raise InvalidBlockSize(f"block size must be a positive integer, got {M!r}")
    M = int(M)
    t = -(-T // M)
    f = 1 if dims == 1 else -(-F // M)
    return BlockGrid(M=M, dims=dims, f=f, t=t, original_F=F, original_T=T)


def pad_to_grid(data: np.ndarray, grid: BlockGrid) -> np.ndarray:
    F, T = data.shape
    if (F, T) == (grid.F, grid.T):
        return data
    out = np.zeros((grid.F, grid.T))
    out[:F, :T] = data
    return out


def to_blocks(data: np.ndarray, grid: BlockGrid) -> np.ndarray:
    """Padded ``F x T`` matrix -> ``(f, t, N)`` array of flattened blocks."""
    n, M = grid.n, grid.M
    tiles = data.reshape(grid.f, n, grid.t, M).transpose(0, 2, 1, 3)
    return tiles.reshape(grid.f, grid.t, n * M)


def from_blocks(blocks: np.ndarray, grid: BlockGrid) -> np.ndarray:
    """Inverse of :func:`to_blocks`."""
    n, M = grid.n, grid.M
    tiles = blocks.reshape(grid.f, grid.t, n, M).transpose(0, 2, 1, 3)
    return tiles.reshape(grid.F, grid.T)


def partition(signal: Signal, M: int):
    """Split ``signal`` into blocks of size ``M`` in row-major block order.

    Each axis is zero-padded up to a multiple of ``M`` first. Returns the
    grid and a list of ``f * t`` :class:`Block` objects.
    """
    grid = make_grid(signal.F, signal.T, signal.dims, M)
    flat = to_blocks(pad_to_grid(signal.data, grid), grid)
    blocks = [reshape(v, grid.n, grid.m) for v in flat.reshape(-1, grid.N)]
    return grid, blocks


def reassemble(blocks: Sequence[Block], grid: BlockGrid) -> np.ndarray:
    """Concatenate blocks back into the padded ``F x T`` matrix."""
    if len(blocks) != grid.f * grid.t:
        raise ShapeError(f"expected {grid.f * grid.t} blocks, got {len(blocks)}")
    flat = np.stack([flatten(b) for b in blocks]) if blocks else np.zeros((0, grid.N))
    return from_blocks(flat.reshape(grid.f, grid.t, grid.N), grid)


def flatten(block: Block) -> np.ndarray:
    return block.values.reshape(-1).copy()


def reshape(v, n: int, m: int) -> Block:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != n * m:
        raise ShapeError(f"cannot reshape a vector of shape {v.shape} into {n} x {m}")
    return Block(v.reshape(n, m))


def _accumulate(blocks: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Sum ``blocks[..., k] * kernels[c, k]`` over ``k`` in ascending order.

    Summation order is fixed to the flattened index order so the result is
    reproducible term for term (no BLAS reassociation).
    """
    acc = np.zeros(blocks.shape[:-1] + (kernels.shape[0],))
    for k in range(blocks.shape[-1]):
        acc += blocks[..., k, None] * kernels[:, k]
    return acc


def patch_conv(block: Block, kernel: Kernel) -> float:
    """Inner product of one block with one kernel, plus the kernel's bias."""
    if block.values.shape != kernel.weights.shape:
        raise ShapeError(
            f"block {block.n} x {block.m} does not match kernel {kernel.a} x {kernel.b}")
    z = float(_accumulate(flatten(block)[None, :], kernel.weights.reshape(1, -1))[0, 0])
    if kernel.bias is not None:
        z += kernel.bias
    return z


def check_bank(bank: KernelBank, dims: int, M: int) -> None:
    if bank.P != M:
        raise PatchSizeMismatch(f"kernel size P = {bank.P} must equal block size M = {M}")
    expected = (1, M) if dims == 1 else (M, M)
    if (bank.a, bank.b) != expected:
        raise ShapeError(
            f"kernels are {bank.a} x {bank.b}, a {dims}-D signal with M = {M} "
            f"needs {expected[0]} x {expected[1]}")


def first_layer_forward(signal: Signal, bank: KernelBank, M: int) -> np.ndarray:
    """Non-overlapping stride-``M`` convolution; returns an ``(f, t, C_out)`` map."""
    grid = make_grid(signal.F, signal.T, signal.dims, M)
    check_bank(bank, signal.dims, M)
    blocks = to_blocks(pad_to_grid(signal.data, grid), grid)
    out = _accumulate(blocks, bank.matrix())
    has_bias = [k.bias is not None for k in bank.kernels]
    if any(has_bias):
        out += bank.biases()
    return out
