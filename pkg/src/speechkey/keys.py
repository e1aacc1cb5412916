"""Secret keys: generation, inversion, key-space size and the JSON key file.

Three key kinds act on a flattened block of ``N`` elements
(``N = M`` for waveforms, ``N = M*M`` for spectrograms):

* :class:`ShuffleKey` - a permutation, applied as a gather ``out[k] = x[perm[k]]``;
* :class:`FlipKey` - a bit vector, bit 1 negates the element;
* :class:`RomKey` - an orthogonal ``N x N`` matrix, applied as ``x @ K``.

Every key is an orthogonal operator, so its inverse is cheap and inner
products between two vectors transformed by the same key are unchanged.
All indices are 0-based. The 1-based key ``[3, 1, 2]`` is ``[2, 0, 1]`` here.
"""

from __future__ import annotations

import json
import math
import secrets
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import _accumulate
from .errors import InvalidBlockSize, KeyFormatError, KeyMismatch
from .linalg import householder_qr, sign_fix
from .rng import MASK64, SplitMix64

METHODS = ("shuffle", "flip", "rom")
KEYFILE_VERSION = 1
ORTHO_TOL = 1e-10


def block_elements(M: int, dims: int) -> int:
    return M if dims == 1 else M * M


def _check_shape(M, dims):
    if not isinstance(M, (int, np.integer)) or isinstance(M, bool) or M < 1:
        raise InvalidBlockSize(f"block size must be a positive integer, got {M!r}")
    if dims not in (1, 2):
        raise KeyFormatError(f"dims must be 1 or 2, got {dims!r}", "dims")


def _check_seed(seed):
    if seed is not None and (not isinstance(seed, (int, np.integer))
                             or isinstance(seed, bool) or not 0 <= seed <= MASK64):
        raise KeyFormatError(f"seed must be an unsigned 64-bit integer or null, got {seed!r}", "seed")


def _readonly(arr):
    arr.setflags(write=False)
    return arr


class _KeyBase:
    method = ""

    @property
    def N(self) -> int:
        return block_elements(self.M, self.dims)

    def payload_array(self) -> np.ndarray:
        raise NotImplementedError

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (self.M, self.dims, self.seed) == (other.M, other.dims, other.seed) and \
            np.array_equal(self.payload_array(), other.payload_array())

    def same_transform(self, other) -> bool:
        """True when both keys define the identical transform (seeds ignored)."""
        return type(other) is type(self) and (self.M, self.dims) == (other.M, other.dims) \
            and np.array_equal(self.payload_array(), other.payload_array())

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ShuffleKey(_KeyBase):
    M: int
    dims: int
    perm: np.ndarray
    seed: Optional[int] = None

    method = "shuffle"

    def __post_init__(self):
        _check_shape(self.M, self.dims)
        _check_seed(self.seed)
        perm = np.asarray(self.perm)
        if perm.ndim != 1 or perm.size != self.N:
            raise KeyFormatError(f"expected {self.N} permutation indices, got {perm.size}", "payload")
        if perm.size and not np.issubdtype(perm.dtype, np.integer):
            raise KeyFormatError("permutation indices must be integers", "payload")
        perm = perm.astype(np.int64)
        if not np.array_equal(np.sort(perm), np.arange(self.N)):
            raise KeyFormatError(f"payload is not a permutation of 0..{self.N - 1}", "payload")
        object.__setattr__(self, "perm", _readonly(perm))

    def payload_array(self):
        return self.perm

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return rows[..., self.perm]

    def inverse(self) -> "ShuffleKey":
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.N)
        return ShuffleKey(self.M, self.dims, inv)


@dataclass(frozen=True, eq=False)
class FlipKey(_KeyBase):
    M: int
    dims: int
    bits: np.ndarray
    seed: Optional[int] = None

    method = "flip"

    def __post_init__(self):
        _check_shape(self.M, self.dims)
        _check_seed(self.seed)
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or bits.size != self.N:
            raise KeyFormatError(f"expected {self.N} key bits, got {bits.size}", "payload")
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise KeyFormatError("flip key bits must be 0 or 1", "payload")
        object.__setattr__(self, "bits", _readonly(bits.astype(np.int8)))

    def payload_array(self):
        return self.bits

    @property
    def signs(self) -> np.ndarray:
        """The +/-1 vector: ``1 - 2 * bits``."""
        return 1.0 - 2.0 * self.bits

    def apply(self, rows: np.ndarray) -> np.ndarray:
        return rows * self.signs

    def inverse(self) -> "FlipKey":
        return self


@dataclass(frozen=True, eq=False)
class RomKey(_KeyBase):
    M: int
    dims: int
    matrix: np.ndarray
    seed: Optional[int] = None

    method = "rom"

    def __post_init__(self):
        _check_shape(self.M, self.dims)
        _check_seed(self.seed)
        K = np.array(self.matrix, dtype=np.float64)
        if K.shape != (self.N, self.N):
            raise KeyFormatError(f"expected a {self.N} x {self.N} matrix, got shape {K.shape}", "payload")
        if not np.all(np.isfinite(K)):
            raise KeyFormatError("matrix entries must be finite", "payload")
        err = orthogonality_error(K)
        if err > ORTHO_TOL:
            raise KeyFormatError(f"matrix is not orthogonal (max |KK^T - I| = {err:.3g})", "payload")
        object.__setattr__(self, "matrix", _readonly(K))

    def payload_array(self):
        return self.matrix

    def apply(self, rows: np.ndarray) -> np.ndarray:
        # Fixed summation order: identical bits whatever the batch size,
        # so streamed and whole-signal encryption agree exactly.
        return _accumulate(rows, self.matrix.T)

    def inverse(self) -> "RomKey":
        return RomKey(self.M, self.dims, self.matrix.T.copy())


SecretKey = Union[ShuffleKey, FlipKey, RomKey]


def orthogonality_error(K) -> float:
    K = np.asarray(K, dtype=np.float64)
    if K.size == 0:
        return 0.0
    return float(np.max(np.abs(K @ K.T - np.eye(K.shape[0]))))


def _resolve_seed(seed):
    if seed is None:
        return secrets.randbits(64)
    _check_seed(seed)
    return int(seed)


def keygen_shuffle(M: int, dims: int = 1, seed: Optional[int] = None) -> ShuffleKey:
    """Fisher-Yates shuffle of ``0..N-1``, swapping from the top index down."""
    _check_shape(M, dims)
    seed = _resolve_seed(seed)
    rng = SplitMix64(seed)
    perm = list(range(block_elements(M, dims)))
    for i in range(len(perm) - 1, 0, -1):
        j = rng.randbelow(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return ShuffleKey(M, dims, np.array(perm, dtype=np.int64), seed)


def keygen_flip(M: int, dims: int = 1, seed: Optional[int] = None) -> FlipKey:
    """``N`` fair bits: ``floor(2 * u)`` for uniforms ``u`` in [0, 1)."""
    _check_shape(M, dims)
    seed = _resolve_seed(seed)
    u = SplitMix64(seed).random_array(block_elements(M, dims))
    return FlipKey(M, dims, np.floor(u * 2.0).astype(np.int8), seed)


def gaussian_matrix(N: int, seed: int) -> np.ndarray:
    """The ``N x N`` standard-normal matrix a ROM key with ``seed`` is built from."""
    return SplitMix64(seed).standard_normal(N * N).reshape(N, N)


def keygen_rom(M: int, dims: int = 1, seed: Optional[int] = None) -> RomKey:
    """Haar-random orthogonal matrix from the sign-corrected QR of a Gaussian matrix."""
    _check_shape(M, dims)
    seed = _resolve_seed(seed)
    A = gaussian_matrix(block_elements(M, dims), seed)
    Q, R = householder_qr(A)
    return RomKey(M, dims, sign_fix(Q, R), seed)


_KEYGENS = {"shuffle": keygen_shuffle, "flip": keygen_flip, "rom": keygen_rom}


def keygen(method: str, M: int, dims: int = 1, seed: Optional[int] = None) -> SecretKey:
    try:
        gen = _KEYGENS[method]
    except KeyError:
        raise KeyFormatError(f"unknown method {method!r}; expected one of {METHODS}", "method") from None
    return gen(M, dims, seed)


def invert_key(key: SecretKey) -> SecretKey:
    return key.inverse()


def check_key(key: SecretKey, dims: int) -> None:
    """Raise :class:`KeyMismatch` unless ``key`` can be applied to a ``dims``-D signal."""
    if key.dims != dims:
        raise KeyMismatch(f"{key.method} key is for {key.dims}-D data, signal is {dims}-D")


@dataclass(frozen=True)
class KeySpace:
    method: str
    N: int
    count: Optional[int]
    log2: Optional[float]
    note: str = ""

    def describe(self) -> str:
        if self.count is None:
            return f"keyspace: continuous ({self.note})"
        if self.count.bit_length() < 4000:
            shown = str(self.count)
        else:
            exp = self.log2 * math.log10(2.0)
            shown = f"~{10 ** (exp % 1):.3f}e{int(exp)}"
        return f"keyspace: {shown} ({self.log2:.3f} bits)"


def keyspace_bits(method: str, M: int, dims: int = 1) -> KeySpace:
    """Number of distinct keys: ``N!`` for shuffle, ``2**N`` for flip.

    ROM keys are real-valued, so there is no finite count; the result carries
    ``count=None`` and a note naming the matrix size.
    """
    _check_shape(M, dims)
    N = block_elements(M, dims)
    if method == "shuffle":
        count = math.factorial(N)
    elif method == "flip":
        count = 2 ** N
    elif method == "rom":
        return KeySpace(method, N, None, None,
                        f"real-valued {N}x{N} orthogonal matrices")
    else:
        raise KeyFormatError(f"unknown method {method!r}", "method")
    return KeySpace(method, N, count, math.log2(count))


# --- key files -------------------------------------------------------------

_FIELDS = ("version", "method", "block_size", "dims", "n", "seed", "payload")


def key_to_dict(key: SecretKey) -> dict:
    if key.method == "rom":
        payload = [float(v) for v in key.matrix.reshape(-1)]
    else:
        payload = [int(v) for v in key.payload_array()]
    return {"version": KEYFILE_VERSION, "method": key.method, "block_size": int(key.M),
            "dims": int(key.dims), "n": key.N,
            "seed": None if key.seed is None else int(key.seed), "payload": payload}


def _want_int(obj, name):
    value = obj[name]
    if not isinstance(value, int) or isinstance(value, bool):
        raise KeyFormatError(f"expected an integer, got {value!r}", name)
    return value


def key_from_dict(obj) -> SecretKey:
    if not isinstance(obj, dict):
        raise KeyFormatError("key file must hold a JSON object")
    unknown = sorted(set(obj) - set(_FIELDS))
    if unknown:
        raise KeyFormatError(f"unknown field(s) {unknown}")
    missing = [f for f in _FIELDS if f not in obj]
    if missing:
        raise KeyFormatError(f"missing field(s) {missing}")
    if obj["version"] != KEYFILE_VERSION or isinstance(obj["version"], bool):
        raise KeyFormatError(f"unsupported version {obj['version']!r}", "version")
    method = obj["method"]
    if method not in METHODS:
        raise KeyFormatError(f"unknown method {method!r}", "method")
    M = _want_int(obj, "block_size")
    dims = _want_int(obj, "dims")
    n = _want_int(obj, "n")
    if M < 1:
        raise KeyFormatError("block size must be positive", "block_size")
    if dims not in (1, 2):
        raise KeyFormatError(f"dims must be 1 or 2, got {dims}", "dims")
    if n != block_elements(M, dims):
        raise KeyFormatError(f"n = {n} inconsistent with block_size = {M}, dims = {dims}", "n")
    seed = obj["seed"]
    _check_seed(seed)
    payload = obj["payload"]
    if not isinstance(payload, list):
        raise KeyFormatError("payload must be a list", "payload")
    expected = n * n if method == "rom" else n
    if len(payload) != expected:
        raise KeyFormatError(f"expected {expected} values, got {len(payload)}", "payload")
    if method == "rom":
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in payload):
            raise KeyFormatError("rom payload must be numbers", "payload")
        return RomKey(M, dims, np.array(payload, dtype=np.float64).reshape(n, n), seed)
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in payload):
        raise KeyFormatError(f"{method} payload must be integers", "payload")
    arr = np.array(payload, dtype=np.int64)
    return ShuffleKey(M, dims, arr, seed) if method == "shuffle" else FlipKey(M, dims, arr, seed)


def dumps_key(key: SecretKey) -> str:
    return json.dumps(key_to_dict(key), allow_nan=False) + "\n"


def loads_key(text: str) -> SecretKey:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KeyFormatError(f"not valid JSON: {exc}") from exc
    return key_from_dict(obj)


def save_key(key: SecretKey, path) -> None:
    Path(path).write_text(dumps_key(key), encoding="utf-8")


def load_key(path) -> SecretKey:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise KeyFormatError(f"key file is not UTF-8 text: {exc}") from exc
    return loads_key(text)
