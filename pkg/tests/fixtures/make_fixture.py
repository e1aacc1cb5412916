"""Regenerate speech_like.wav: 1 s, 16 kHz, float32, deterministic.

A voiced source (harmonics of a gliding 120-180 Hz pitch, shaped by three
formant-like resonances) under a 4 Hz syllabic envelope, a 150 ms pause and
a little breath noise.
"""

from pathlib import Path

import numpy as np

from speechkey import Signal, write_wav

RATE = 16000


def speech_like(rate=RATE, seconds=1.0, seed=2024):
    rng = np.random.default_rng(seed)
    t = np.arange(int(rate * seconds)) / rate
    f0 = 150 + 30 * np.sin(2 * np.pi * 1.3 * t)
    phase = 2 * np.pi * np.cumsum(f0) / rate
    voiced = np.zeros_like(t)
    for h in range(1, 30):
        freq = h * 150
        gain = sum(np.exp(-((freq - fc) / bw) ** 2) for fc, bw in ((500, 150), (1500, 250), (2500, 300)))
        voiced += (gain + 0.02) / h * np.sin(h * phase)
    envelope = 0.5 * (1 - np.cos(2 * np.pi * 4 * t)) ** 1.5
    envelope[(t > 0.55) & (t < 0.70)] = 0.0
    x = envelope * voiced + 0.005 * rng.standard_normal(t.size)
    return 0.5 * x / np.max(np.abs(x))


if __name__ == "__main__":
    out = Path(__file__).with_name("speech_like.wav")
    samples = speech_like().astype(np.float32).astype(np.float64)
    write_wav(Signal.waveform(samples, RATE), out)
    print(out)
