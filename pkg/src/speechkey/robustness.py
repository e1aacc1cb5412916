"""Wrong-key experiments: how far off a query gets when the key is wrong."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .cipher import decrypt, encrypt
from .core import KernelBank, Signal, make_grid, pad_to_grid
from .errors import ShapeError
from .keys import SecretKey, block_elements, keygen
from .model import mismatch_probe
from .rng import MASK64, SplitMix64

PROBE_CHANNELS = 4


class Distance(NamedTuple):
    raw: float
    normalized: float


def euclidean_distance(a: Signal, b: Signal) -> Distance:
    """``||a - b||_2`` and the same divided by ``||a||_2``."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"cannot compare shapes {a.data.shape} and {b.data.shape}")
    raw = float(np.linalg.norm(a.data - b.data))
    ref = float(np.linalg.norm(a.data))
    if ref == 0.0:
        return Distance(raw, 0.0 if raw == 0.0 else float("inf"))
    return Distance(raw, raw / ref)


def random_kernel_bank(M: int, dims: int, seed: int, channels: int = PROBE_CHANNELS) -> KernelBank:
    """Gaussian first-layer kernels, reproducible from ``seed``."""
    a = 1 if dims == 1 else M
    w = SplitMix64(seed).standard_normal(channels * block_elements(M, dims))
    return KernelBank.from_array(w.reshape(channels, a, M))


@dataclass(frozen=True)
class Summary:
    mean: float
    median: float
    min: float
    max: float
    variance: float

    @classmethod
    def of(cls, values) -> "Summary":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            nan = float("nan")
            return cls(nan, nan, nan, nan, nan)
        return cls(float(v.mean()), float(np.median(v)), float(v.min()), float(v.max()),
                   float(v.var()))


@dataclass(frozen=True)
class TrialRow:
    trial: int
    seed: Optional[int]
    distance: float
    normalized_distance: float
    encrypted_distance: float
    divergence: float


TRIAL_METRICS = ("distance", "normalized_distance", "encrypted_distance", "divergence")


@dataclass
class RobustnessReport:
    method: str
    M: int
    dims: int
    rows: List[TrialRow] = field(default_factory=list)

    @property
    def n_trials(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def summary(self) -> dict:
        return {name: Summary.of(self.column(name)) for name in TRIAL_METRICS}

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("trial", "seed") + TRIAL_METRICS)
        for r in self.rows:
            w.writerow((r.trial, "" if r.seed is None else r.seed,
                        *(repr(getattr(r, m)) for m in TRIAL_METRICS)))
        out.write(f"# method={self.method} M={self.M} dims={self.dims} n_trials={self.n_trials}\n")
        out.write("# metric,mean,median,min,max,variance\n")
        for name, s in self.summary.items():
            out.write(f"# {name},{s.mean!r},{s.median!r},{s.min!r},{s.max!r},{s.variance!r}\n")
        return out.getvalue()


def wrong_key_sweep(signal: Signal, correct_key: SecretKey, n_wrong: int, seed: int,
                    seeds: Optional[Sequence[int]] = None,
                    bank: Optional[KernelBank] = None) -> RobustnessReport:
    """Try ``n_wrong`` keys from seeds ``seed+1, seed+2, ...`` against ``correct_key``.

    Per trial, with ``y = encrypt(signal, correct_key)`` and wrong key ``w``:

    * ``distance`` - ``decrypt(y, w)`` against ``decrypt(y, correct_key)``;
    * ``encrypted_distance`` - ``encrypt(signal, w)`` against ``y``;
    * ``divergence`` - :func:`mismatch_probe` of a query encrypted with ``w``
      through a layer encrypted with ``correct_key``.

    The reference is the correct-key decryption rather than ``signal`` itself,
    so a control trial with the correct key is exactly zero on every metric.
    Auto-generated seeds skip the correct key's own seed. Pass ``seeds`` to
    choose them explicitly (e.g. to inject a control row).
    """
    if seeds is None:
        if n_wrong < 1:
            raise ValueError("n_wrong must be at least 1")
        seeds = []
        s = seed
        while len(seeds) < n_wrong:
            s = (s + 1) & MASK64
            if s != correct_key.seed:
                seeds.append(s)
    if bank is None:
        bank = random_kernel_bank(correct_key.M, correct_key.dims, seed)

    encrypted = encrypt(signal, correct_key)
    reference = decrypt(encrypted, correct_key)
    report = RobustnessReport(correct_key.method, correct_key.M, correct_key.dims)
    for trial, s in enumerate(seeds):
        wrong = keygen(correct_key.method, correct_key.M, correct_key.dims, s)
        d = euclidean_distance(reference, decrypt(encrypted, wrong))
        e = euclidean_distance(encrypted, encrypt(signal, wrong))
        div = mismatch_probe(signal, bank, correct_key, wrong)
        report.rows.append(TrialRow(trial, s, d.raw, d.normalized, e.raw, div))
    return report


def spectral_flatness(signal: Signal, eps: float = 1e-20) -> float:
    """Geometric over arithmetic mean of the power spectrum.

    Waveforms use the power spectrum of the whole signal; spectrograms use
    squared values down each column, averaged over columns.
    """
    if signal.dims == 1:
        power = np.abs(np.fft.rfft(signal.samples)) ** 2
        power = power[None, :]
    else:
        power = (signal.data ** 2).T
    gmean = np.exp(np.mean(np.log(power + eps), axis=1))
    amean = np.mean(power, axis=1) + eps
    return float(np.mean(gmean / amean))


@dataclass(frozen=True)
class SweepRow:
    M: int
    N: int
    distance: float
    normalized_distance: float
    flatness_plain: float
    flatness_encrypted: float

    @property
    def flatness_change(self) -> float:
        return self.flatness_encrypted - self.flatness_plain


def block_size_sweep(signal: Signal, method: str, Ms: Sequence[int], seed: int) -> List[SweepRow]:
    """Distortion of ``signal`` under a fresh ``method`` key for each block size.

    Distances compare the encrypted signal with the zero-padded original.
    Informational only: no monotonic trend is implied.
    """
    rows = []
    for M in Ms:
        key = keygen(method, M, signal.dims, seed)
        enc = encrypt(signal, key)
        grid = make_grid(signal.F, signal.T, signal.dims, M)
        padded = signal.replace_data(pad_to_grid(signal.data, grid))
        d = euclidean_distance(padded, enc)
        rows.append(SweepRow(M, key.N, d.raw, d.normalized,
                             spectral_flatness(padded), spectral_flatness(enc)))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow], method: str) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("method", "M", "N", "distance", "normalized_distance",
                "flatness_plain", "flatness_encrypted", "flatness_change"))
    for r in rows:
        w.writerow((method, r.M, r.N, repr(r.distance), repr(r.normalized_distance),
                    repr(r.flatness_plain), repr(r.flatness_encrypted), repr(r.flatness_change)))
    return out.getvalue()
