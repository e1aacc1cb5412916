"""Secret-key block encryption of speech signals for CNN inference.

Queries (waveforms or spectrograms) are encrypted block by block with a
shuffle, sign-flip or random orthogonal matrix key; the first convolutional
layer's kernels are encrypted with the same key so the encrypted query
produces the plain model's activations without being decrypted.
"""

__version__ = "0.1.0"

from .cipher import decrypt, encrypt, encrypt_stream
from .core import (Block, BlockGrid, Kernel, KernelBank, Signal, first_layer_forward, flatten,
                   partition, patch_conv, reassemble, reshape)
from .errors import *  # noqa: F401,F403
from .keys import (FlipKey, KeySpace, RomKey, ShuffleKey, invert_key, keygen, keygen_flip,
                   keygen_rom, keygen_shuffle, keyspace_bits, load_key, save_key)
from .model import encrypt_kernel, mismatch_probe, verify_cancellation
from .robustness import block_size_sweep, euclidean_distance, wrong_key_sweep
from .signalio import (StftConfig, read_matrix, read_wav, stft_magnitude, write_matrix,
                       write_wav)
