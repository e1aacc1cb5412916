"""Command-line interface.

Exit codes: 0 success, 1 usage or invalid arguments, 2 unreadable or
malformed files, 3 verification failure. Failures print one line
``error: <category>: <detail>`` to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .cipher import decrypt, encrypt
from .core import Kernel, KernelBank, Signal
from .errors import (InvalidBlockSize, InvalidSignal, KeyFormatError, KeyMismatch,
                     MatrixFormatError, PatchSizeMismatch, ShapeError, SpeechKeyError,
                     StreamError, TooShort, UnsupportedSignal, WavFormatError)
from .keys import METHODS, keygen, keyspace_bits, load_key, save_key
from .model import encrypt_kernel, verify_cancellation
from .robustness import block_size_sweep, sweep_to_csv, wrong_key_sweep
from .signalio import (StftConfig, parse_matrix, read_kernel_bank, read_wav, stft_magnitude,
                       write_kernel_bank, write_matrix, write_wav)

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_VERIFY = 0, 1, 2, 3
CANCELLATION_TOL = 1e-9

_FORMAT_ERRORS = (KeyFormatError, WavFormatError, MatrixFormatError, StreamError)
_USAGE_ERRORS = (InvalidBlockSize, InvalidSignal, KeyMismatch, PatchSizeMismatch, ShapeError,
                 TooShort, UnsupportedSignal)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _block_sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not sizes:
        raise argparse.ArgumentTypeError("no block sizes given")
    return sizes


def _shape(text):
    try:
        F, T = (int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected F,T, got {text!r}")
    return F, T


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="speechkey", description="Block-wise secret-key encryption of speech signals "
                "and of the first convolutional layer that consumes them.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("keygen", help="generate a secret key file")
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--block-size", required=True, type=int, metavar="M")
    s.add_argument("--dims", required=True, type=int, choices=(1, 2))
    s.add_argument("--seed", required=True, type=int, help="unsigned 64-bit seed")
    s.add_argument("--out", type=Path, help="key file to write (omit to only print the key space)")

    for name, verb in (("encrypt", "encrypt"), ("decrypt", "decrypt")):
        s = sub.add_parser(name, help=f"{verb} a WAV file or SPM1 matrix")
        s.add_argument("--key", required=True, type=Path)
        s.add_argument("--in", dest="input", required=True, type=Path)
        s.add_argument("--out", required=True, type=Path)
        s.add_argument("--wav-format", default="float32", choices=("float32", "float64"),
                       help="sample format of WAV output")
        if name == "decrypt":
            s.add_argument("--shape", type=_shape, metavar="F,T",
                           help="trim a decrypted matrix to F rows and T columns")

    s = sub.add_parser("spectrogram", help="magnitude STFT of a WAV file")
    s.add_argument("--in", dest="input", required=True, type=Path)
    s.add_argument("--window", required=True, type=int)
    s.add_argument("--hop", required=True, type=int)
    s.add_argument("--out", required=True, type=Path)

    s = sub.add_parser("encrypt-kernel", help="encrypt first-layer kernels")
    s.add_argument("--key", required=True, type=Path)
    s.add_argument("--in", dest="inputs", required=True, type=Path, action="append",
                   help="SPM1 kernel file or kernel bank directory (repeatable)")
    s.add_argument("--out-dir", required=True, type=Path)

    s = sub.add_parser("verify", help="check that encryption cancels in the first layer")
    s.add_argument("--key", required=True, type=Path)
    s.add_argument("--in", dest="input", required=True, type=Path)
    s.add_argument("--kernels", required=True, type=Path, help="plain kernel bank directory")

    s = sub.add_parser("robustness", help="wrong-key sweep")
    s.add_argument("--in", dest="input", required=True, type=Path)
    s.add_argument("--key", required=True, type=Path)
    s.add_argument("--trials", required=True, type=int)
    s.add_argument("--seed", required=True, type=int)
    s.add_argument("--out", required=True, type=Path)

    s = sub.add_parser("sweep", help="distortion for several block sizes")
    s.add_argument("--in", dest="input", required=True, type=Path)
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--block-sizes", required=True, type=_block_sizes, metavar="M1,M2,...")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, type=Path)
    return p


def _is_wav(path: Path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == b"RIFF"


def load_signal(path: Path, dims=None) -> Signal:
    """Read a WAV (waveform) or SPM1 file (``dims`` or, by default, a spectrogram)."""
    if _is_wav(path):
        return read_wav(path)
    data = parse_matrix(path.read_bytes())
    if dims is None:
        dims = 1 if data.shape[0] == 1 else 2
    if dims == 1 and data.shape[0] != 1:
        raise ShapeError(f"a 1-D key needs a single-row matrix, {path} has {data.shape[0]} rows")
    return Signal(data, dims)


def save_signal(signal: Signal, path: Path, wav: bool, wav_format: str) -> None:
    if wav:
        write_wav(signal, path, wav_format)
    else:
        write_matrix(signal, path)


def _cmd_keygen(args):
    key = keygen(args.method, args.block_size, args.dims, args.seed)
    if args.out is not None:
        save_key(key, args.out)
    print(keyspace_bits(args.method, args.block_size, args.dims).describe())
    return EXIT_OK


def _cmd_crypt(args):
    key = load_key(args.key)
    wav = _is_wav(args.input)
    signal = load_signal(args.input, key.dims)
    if args.command == "encrypt":
        out = encrypt(signal, key)
    else:
        out = decrypt(signal, key)
        if args.shape is not None:
            F, T = args.shape
            out = out.replace_data(out.data[:F, :T])
    save_signal(out, args.out, wav, args.wav_format)
    return EXIT_OK


def _cmd_spectrogram(args):
    signal = read_wav(args.input)
    write_matrix(stft_magnitude(signal, StftConfig(args.window, args.hop)), args.out)
    return EXIT_OK


def _read_bank(paths):
    kernels = []
    for path in paths:
        if path.is_dir():
            kernels.extend(read_kernel_bank(path).kernels)
        else:
            kernels.append(Kernel(parse_matrix(path.read_bytes())))
    return KernelBank(tuple(kernels))


def _cmd_encrypt_kernel(args):
    key = load_key(args.key)
    bank = encrypt_kernel(_read_bank(args.inputs), key)
    info = {"method": key.method, "block_size": key.M, "dims": key.dims, "seed": key.seed}
    write_kernel_bank(bank, args.out_dir, info)
    return EXIT_OK


def _cmd_verify(args):
    key = load_key(args.key)
    err = verify_cancellation(load_signal(args.input, key.dims), read_kernel_bank(args.kernels), key)
    print(f"max cancellation error: {err:.3e}")
    if err > CANCELLATION_TOL:
        print(f"error: verification: cancellation error {err:.3e} exceeds {CANCELLATION_TOL:g}",
              file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_robustness(args):
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    key = load_key(args.key)
    report = wrong_key_sweep(load_signal(args.input, key.dims), key, args.trials, args.seed)
    args.out.write_text(report.to_csv(), encoding="utf-8")
    s = report.summary["normalized_distance"]
    d = report.summary["divergence"]
    print(f"trials: {report.n_trials}  median normalized distance: {s.median:.4f}  "
          f"median divergence: {d.median:.4f}")
    return EXIT_OK


def _cmd_sweep(args):
    signal = load_signal(args.input)
    rows = block_size_sweep(signal, args.method, args.block_sizes, args.seed)
    args.out.write_text(sweep_to_csv(rows, args.method), encoding="utf-8")
    return EXIT_OK


_COMMANDS = {
    "keygen": _cmd_keygen, "encrypt": _cmd_crypt, "decrypt": _cmd_crypt,
    "spectrogram": _cmd_spectrogram, "encrypt-kernel": _cmd_encrypt_kernel,
    "verify": _cmd_verify, "robustness": _cmd_robustness, "sweep": _cmd_sweep,
}


def _fail(category, detail, code):
    detail = " ".join(str(detail).split())
    print(f"error: {category}: {detail}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except _FORMAT_ERRORS as exc:
        return _fail(exc.category, exc, EXIT_FORMAT)
    except _USAGE_ERRORS as exc:
        return _fail(exc.category, exc, EXIT_USAGE)
    except SpeechKeyError as exc:
        return _fail(exc.category, exc, EXIT_USAGE)
    except OSError as exc:
        return _fail("io", exc, EXIT_FORMAT)
    except ValueError as exc:
        return _fail("usage", exc, EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
