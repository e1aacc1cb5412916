"""File formats and the STFT front end.

WAV
    RIFF/WAVE, mono. Reads 16-bit PCM (scaled by 1/32768) and 32/64-bit IEEE
    float, including WAVE_FORMAT_EXTENSIBLE wrappers. Writes IEEE float only,
    never clipping. A signal carrying a pre-padding length gets an extra
    ``olen`` chunk (unsigned 64-bit little-endian sample count) before the
    ``data`` chunk; other readers skip it as an unknown chunk.

SPM1 matrix
    ``b"SPM1"``, rows (u32 LE), cols (u32 LE), then ``rows * cols`` float64 LE
    values in row-major order. Header is 12 bytes.

Kernel bank directory
    ``bank.json`` manifest plus one SPM1 file per kernel.
"""

from __future__ import annotations

import json
import mmap
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .core import Kernel, KernelBank, Signal
from .errors import InvalidSignal, MatrixFormatError, TooShort, UnsupportedSignal, WavFormatError

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
ORIGINAL_LENGTH_CHUNK = b"olen"

_SAMPLE_TYPES = {
    (WAVE_FORMAT_PCM, 16): "<i2",
    (WAVE_FORMAT_IEEE_FLOAT, 32): "<f4",
    (WAVE_FORMAT_IEEE_FLOAT, 64): "<f8",
}
_WRITE_FORMATS = {"float32": ("<f4", 32), "float64": ("<f8", 64)}


# --- WAV --------------------------------------------------------------------

@dataclass(frozen=True)
class _WavLayout:
    dtype: str
    sample_rate: int
    data_offset: int
    n_samples: int
    original_T: Optional[int]


def _parse_wav(buf: bytes) -> _WavLayout:
    if len(buf) < 12 or buf[:4] != b"RIFF" or buf[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    original_T = None
    while pos + 8 <= len(buf):
        cid = buf[pos:pos + 4]
        (size,) = struct.unpack_from("<I", buf, pos + 4)
        body = pos + 8
        if cid == b"data":
            if fmt is None:
                raise WavFormatError("data chunk precedes fmt chunk")
            if body + size > len(buf):
                raise WavFormatError(
                    f"truncated data chunk: declares {size} bytes, {len(buf) - body} present")
            dtype, sample_rate = fmt
            width = np.dtype(dtype).itemsize
            if size % width:
                raise WavFormatError(f"data size {size} is not a multiple of the {width}-byte sample")
            return _WavLayout(dtype, sample_rate, body, size // width, original_T)
        if body + size > len(buf):
            raise WavFormatError(f"truncated {cid!r} chunk")
        if cid == b"fmt ":
            fmt = _parse_fmt(buf[body:body + size])
        elif cid == ORIGINAL_LENGTH_CHUNK and size == 8:
            (original_T,) = struct.unpack_from("<Q", buf, body)
        pos = body + size + (size & 1)
    raise WavFormatError("no data chunk" if fmt is not None else "no fmt chunk")


def _parse_fmt(chunk: bytes):
    if len(chunk) < 16:
        raise WavFormatError(f"fmt chunk too short ({len(chunk)} bytes)")
    tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", chunk)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(chunk) < 40:
            raise WavFormatError("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk")
        (tag,) = struct.unpack_from("<H", chunk, 24)
    if channels != 1:
        raise WavFormatError(f"only mono audio is supported, file has {channels} channels")
    try:
        return _SAMPLE_TYPES[(tag, bits)], rate
    except KeyError:
        raise WavFormatError(
            f"unsupported codec (format tag {tag:#06x}, {bits} bits); "
            "need 16-bit PCM or 32/64-bit float") from None


def _to_float(raw: np.ndarray) -> np.ndarray:
    if raw.dtype == np.dtype("<i2"):
        return raw.astype(np.float64) / 32768.0
    return raw.astype(np.float64)


def read_wav(path) -> Signal:
    buf = Path(path).read_bytes()
    layout = _parse_wav(buf)
    raw = np.frombuffer(buf, dtype=layout.dtype, count=layout.n_samples, offset=layout.data_offset)
    samples = _to_float(raw)
    if not np.all(np.isfinite(samples)):
        raise WavFormatError("file contains NaN or infinite samples")
    return Signal.waveform(samples, layout.sample_rate, layout.original_T)


def iter_wav_chunks(path, chunk_size: int = 4096) -> Iterator[np.ndarray]:
    """Yield a WAV file's samples as float64 arrays of at most ``chunk_size``."""
    with open(path, "rb") as fh:
        if os.fstat(fh.fileno()).st_size == 0:
            raise WavFormatError("not a RIFF/WAVE file")
        with mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ) as buf:
            layout = _parse_wav(buf)
            width = np.dtype(layout.dtype).itemsize
            for start in range(0, layout.n_samples, chunk_size):
                n = min(chunk_size, layout.n_samples - start)
                raw = np.frombuffer(buf, dtype=layout.dtype, count=n,
                                    offset=layout.data_offset + start * width)
                chunk = _to_float(raw)
                del raw
                yield chunk


def _header(sample_rate: int, n_bytes: int, bits: int, original_T: Optional[int]) -> bytes:
    extra = b""
    if original_T is not None:
        extra = ORIGINAL_LENGTH_CHUNK + struct.pack("<IQ", 8, original_T)
    block_align = bits // 8
    fmt = struct.pack("<4sIHHIIHH", b"fmt ", 16, WAVE_FORMAT_IEEE_FLOAT, 1, sample_rate,
                      sample_rate * block_align, block_align, bits)
    riff_size = 4 + len(fmt) + len(extra) + 8 + n_bytes + (n_bytes & 1)
    return (struct.pack("<4sI4s", b"RIFF", riff_size, b"WAVE") + fmt + extra
            + struct.pack("<4sI", b"data", n_bytes))


def _sample_rate(signal: Signal) -> int:
    if signal.dims != 1:
        raise UnsupportedSignal("only waveforms (dims = 1) can be written as WAV")
    if signal.sample_rate is None:
        raise InvalidSignal("waveform has no sample rate")
    return int(signal.sample_rate)


def write_wav(signal: Signal, path, format: str = "float32") -> None:
    """Write a waveform as IEEE-float WAV (``format`` is float32 or float64)."""
    rate = _sample_rate(signal)
    try:
        dtype, bits = _WRITE_FORMATS[format]
    except KeyError:
        raise UnsupportedSignal(f"unsupported WAV output format {format!r}") from None
    with np.errstate(over="ignore"):
        data = signal.samples.astype(dtype)
    if not np.all(np.isfinite(data)):
        raise InvalidSignal(f"samples overflow {format}")
    original = signal.original_T
    if original is not None and original == signal.T:
        original = None
    payload = data.tobytes()
    with open(path, "wb") as fh:
        fh.write(_header(rate, len(payload), bits, original))
        fh.write(payload)
        if len(payload) & 1:
            fh.write(b"\0")


class WavStreamWriter:
    """Append float samples to a WAV file; sizes are patched on close."""

    def __init__(self, path, sample_rate: int, format: str = "float32"):
        self.dtype, self.bits = _WRITE_FORMATS[format]
        self.sample_rate = sample_rate
        self._fh = open(path, "wb")
        self._fh.write(_header(sample_rate, 0, self.bits, None))
        self.n_bytes = 0

    def __call__(self, samples) -> None:
        data = np.asarray(samples, dtype=np.float64).astype(self.dtype).tobytes()
        self._fh.write(data)
        self.n_bytes += len(data)

    def close(self) -> None:
        if self._fh.closed:
            return
        if self.n_bytes & 1:
            self._fh.write(b"\0")
        self._fh.seek(0)
        self._fh.write(_header(self.sample_rate, self.n_bytes, self.bits, None))
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# --- SPM1 matrices ------------------------------------------------------------

MATRIX_MAGIC = b"SPM1"
_MATRIX_HEADER = struct.Struct("<4sII")


def _as_matrix(obj) -> np.ndarray:
    if isinstance(obj, Signal):
        return obj.data
    if isinstance(obj, Kernel):
        return obj.weights
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise MatrixFormatError(f"can only store 2-D matrices, got {arr.ndim} axes")
    return arr


def matrix_bytes(obj) -> bytes:
    arr = _as_matrix(obj)
    rows, cols = arr.shape
    if rows > 0xFFFFFFFF or cols > 0xFFFFFFFF:
        raise MatrixFormatError("matrix too large for SPM1")
    return _MATRIX_HEADER.pack(MATRIX_MAGIC, rows, cols) + arr.astype("<f8").tobytes()


def parse_matrix(buf: bytes) -> np.ndarray:
    if len(buf) < _MATRIX_HEADER.size:
        raise MatrixFormatError(f"file too short for an SPM1 header ({len(buf)} bytes)")
    magic, rows, cols = _MATRIX_HEADER.unpack_from(buf)
    if magic != MATRIX_MAGIC:
        raise MatrixFormatError(f"bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
    expected = _MATRIX_HEADER.size + 8 * rows * cols
    if len(buf) != expected:
        raise MatrixFormatError(
            f"{rows} x {cols} matrix needs {expected} bytes, file has {len(buf)}")
    values = np.frombuffer(buf, dtype="<f8", offset=_MATRIX_HEADER.size)
    return values.astype(np.float64).reshape(rows, cols)


def write_matrix(obj, path) -> None:
    """Store a Signal's data, a Kernel's weights or an array as SPM1."""
    Path(path).write_bytes(matrix_bytes(obj))


def read_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_bytes())


# --- STFT -------------------------------------------------------------------

@dataclass(frozen=True)
class StftConfig:
    window_length: int = 512
    hop: int = 128
    window: str = "hann"

    def __post_init__(self):
        if self.window_length < 1 or not 0 < self.hop <= self.window_length:
            raise ValueError(
                f"need 0 < hop <= window_length, got hop={self.hop}, window={self.window_length}")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_count(T: int, window_length: int, hop: int) -> int:
    return 1 + (T - window_length) // hop


def stft_magnitude(signal: Signal, cfg: StftConfig = StftConfig()) -> Signal:
    """Magnitude spectrogram with ``window_length // 2 + 1`` rows, one column per frame."""
    if signal.dims != 1:
        raise UnsupportedSignal("STFT needs a waveform")
    W = cfg.window_length
    if signal.T < W:
        raise TooShort(f"signal has {signal.T} samples, window needs {W}")
    frames = np.lib.stride_tricks.sliding_window_view(signal.samples, W)[::cfg.hop]
    spec = np.abs(np.fft.rfft(frames * hann(W), axis=1))
    return Signal.spectrogram(spec.T)


# --- kernel bank directories -----------------------------------------------------

BANK_MANIFEST = "bank.json"


def write_kernel_bank(bank: KernelBank, directory, key_info: Optional[dict] = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, kernel in enumerate(bank.kernels):
        name = f"kernel_{i:03d}.spm"
        write_matrix(kernel, out / name)
        entries.append({"file": name, "bias": kernel.bias})
    manifest = {"version": 1, "patch_size": bank.P, "rows": bank.a, "cols": bank.b,
                "encrypted_with": key_info, "kernels": entries}
    path = out / BANK_MANIFEST
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def read_kernel_bank(directory) -> KernelBank:
    """Load a bank from ``bank.json``, or from every ``*.spm`` file in name order."""
    base = Path(directory)
    manifest = base / BANK_MANIFEST
    if not manifest.exists():
        files = sorted(base.glob("*.spm"))
        if not files:
            raise MatrixFormatError(f"{base} holds no {BANK_MANIFEST} and no .spm kernels")
        return KernelBank(tuple(Kernel(read_matrix(f)) for f in files))
    try:
        meta = json.loads(manifest.read_text(encoding="utf-8"))
        entries = meta["kernels"]
        kernels = tuple(Kernel(read_matrix(base / e["file"]), e.get("bias")) for e in entries)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MatrixFormatError(f"bad kernel bank manifest {manifest}: {exc}") from exc
    bank = KernelBank(kernels)
    if (bank.a, bank.b) != (meta.get("rows", bank.a), meta.get("cols", bank.b)):
        raise MatrixFormatError("kernel files disagree with the manifest shape")
    return bank
