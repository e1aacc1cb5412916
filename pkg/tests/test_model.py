import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speechkey import (FlipKey, KernelBank, RomKey, ShuffleKey, Signal, encrypt, encrypt_kernel,
                       first_layer_forward, keygen, mismatch_probe, verify_cancellation)
from speechkey.errors import KeyMismatch, PatchSizeMismatch
from speechkey.robustness import random_kernel_bank

METHODS = ["shuffle", "flip", "rom"]


def bank_1d(*kernels, biases=None):
    return KernelBank.from_array(np.asarray(kernels, dtype=float)[:, None, :], biases)


def test_zero_flip_key_leaves_kernel():
    bank = bank_1d([0.5, -1.0, 2.0])
    out = encrypt_kernel(bank, FlipKey(3, 1, np.zeros(3, dtype=np.int8)))
    np.testing.assert_array_equal(out.matrix(), bank.matrix())


def test_shuffle_kernel_gathers_like_query():
    out = encrypt_kernel(bank_1d([1.0, 2.0, 3.0]), ShuffleKey(3, 1, np.array([2, 0, 1])))
    assert out.matrix().tolist() == [[3.0, 1.0, 2.0]]


def test_biases_pass_through():
    bank = bank_1d([1.0, 2.0], [3.0, 4.0], biases=[0.5, -0.25])
    out = encrypt_kernel(bank, keygen("rom", 2, 1, 3))
    assert out.biases().tolist() == [0.5, -0.25]


def test_rom_preserves_dot_products():
    rng = np.random.default_rng(0)
    key = keygen("rom", 10, 1, 8)
    for _ in range(50):
        x, e = rng.standard_normal((2, 10))
        xe = key.apply(x[None, :])[0]
        ee = encrypt_kernel(bank_1d(e), key).matrix()[0]
        scale = np.abs(x) @ np.abs(e)
        assert abs(xe @ ee - x @ e) <= 1e-12 * scale


def test_encrypted_layer_output_matches_plain_layer():
    rng = np.random.default_rng(1)
    sig = Signal.spectrogram(rng.standard_normal((9, 14)))
    bank = KernelBank.from_array(rng.standard_normal((3, 3, 3)), rng.standard_normal(3))
    key = keygen("rom", 3, 2, 2)
    plain = first_layer_forward(sig, bank, 3)
    enc = first_layer_forward(encrypt(sig, key), encrypt_kernel(bank, key), 3)
    np.testing.assert_allclose(enc, plain, rtol=0, atol=1e-12 * (1 + np.abs(plain).max()))


@pytest.mark.parametrize("dims", [1, 2])
def test_cancellation_flip_exact(dims):
    rng = np.random.default_rng(dims)
    X = rng.standard_normal((1 if dims == 1 else 12, 40))
    err = verify_cancellation(Signal(X, dims), random_kernel_bank(4, dims, 1), keygen("flip", 4, dims, 1))
    assert err == 0.0


@pytest.mark.parametrize("dims", [1, 2])
def test_cancellation_shuffle(dims):
    rng = np.random.default_rng(10 + dims)
    X = rng.standard_normal((1 if dims == 1 else 12, 40))
    err = verify_cancellation(Signal(X, dims), random_kernel_bank(4, dims, 2),
                              keygen("shuffle", 4, dims, 2))
    assert err <= 1e-12


def test_cancellation_rom_large_block():
    X = np.random.default_rng(3).standard_normal((20, 50))
    err = verify_cancellation(Signal.spectrogram(X), random_kernel_bank(10, 2, 3), keygen("rom", 10, 2, 3))
    assert err <= 1e-9


def test_cancellation_empty_signal():
    assert verify_cancellation(Signal.waveform([]), random_kernel_bank(3, 1, 0), keygen("rom", 3, 1, 0)) == 0.0


def test_kernel_size_must_match_block_size():
    with pytest.raises(PatchSizeMismatch):
        encrypt_kernel(bank_1d([1.0, 2.0]), keygen("flip", 3, 1, 0))


def test_kernel_rank_must_match_key():
    with pytest.raises(KeyMismatch):
        encrypt_kernel(bank_1d([1.0, 2.0, 3.0]), keygen("flip", 3, 2, 0))


def test_probe_identical_keys_zero():
    sig = Signal.waveform(np.random.default_rng(4).standard_normal(100))
    key = keygen("rom", 5, 1, 1)
    assert mismatch_probe(sig, random_kernel_bank(5, 1, 0), key, key) == 0.0


@pytest.mark.parametrize("method", METHODS)
def test_probe_plain_query_diverges(method):
    sig = Signal.waveform(np.random.default_rng(5).standard_normal(200))
    key = keygen(method, 10, 1, 4)
    assert mismatch_probe(sig, random_kernel_bank(10, 1, 0), key, None) > 0.0


@pytest.mark.parametrize("method", METHODS)
def test_probe_wrong_keys_diverge_on_average(method):
    sig = Signal.spectrogram(np.random.default_rng(6).standard_normal((16, 32)))
    bank = random_kernel_bank(4, 2, 9)
    key = keygen(method, 4, 2, 100)
    vals = [mismatch_probe(sig, bank, key, keygen(method, 4, 2, s)) for s in range(1, 6)]
    assert np.mean(vals) > 0.1


def test_probe_rom_wrong_keys_mostly_diverge():
    sig = Signal.waveform(np.random.default_rng(7).standard_normal(2000))
    bank = random_kernel_bank(10, 1, 5)
    key = keygen("rom", 10, 1, 0)
    vals = np.array([mismatch_probe(sig, bank, key, keygen("rom", 10, 1, s)) for s in range(1, 201)])
    assert np.mean(vals > 0.1) >= 0.95


def test_probe_rejects_mixed_methods():
    sig = Signal.waveform(np.ones(6))
    with pytest.raises(KeyMismatch):
        mismatch_probe(sig, random_kernel_bank(3, 1, 0), keygen("rom", 3, 1, 0), keygen("flip", 3, 1, 0))


PRINTED_ROM = np.array([[0.9898, -0.0661, -0.1264],
                        [0.1309, 0.7732, 0.6205],
                        [0.0568, -0.6307, 0.7740]])


def test_printed_rom_example_preserves_dot_products():
    U, _, Vt = np.linalg.svd(PRINTED_ROM)
    key = RomKey(3, 1, U @ Vt)  # nearest orthogonal matrix to the four-decimal print
    rng = np.random.default_rng(11)
    for _ in range(100):
        x, e = rng.standard_normal((2, 3))
        enc_x = encrypt(Signal.waveform(x), key).samples
        enc_e = encrypt_kernel(bank_1d(e), key).matrix()[0]
        assert abs(enc_x @ enc_e - x @ e) <= 1e-12 * (np.abs(x) @ np.abs(e))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(METHODS), st.integers(1, 256), st.integers(0, 2**32))
def test_inner_products_preserved(method, N, seed):
    key = keygen(method, N, 1, seed)
    x, e = np.random.default_rng(seed).standard_normal((2, N))
    enc_x = key.apply(x[None, :])[0]
    enc_e = encrypt_kernel(bank_1d(e), key).matrix()[0]
    scale = np.abs(x) @ np.abs(e)
    assert abs(enc_x @ enc_e - x @ e) <= 1e-12 * scale
