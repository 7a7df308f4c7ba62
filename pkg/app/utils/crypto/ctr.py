import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

AES_BLOCK = 16


def _counter_block(nonce: bytes, block_index: int) -> bytes:
    value = (int.from_bytes(nonce, "big") + block_index) % (1 << 128)
    return value.to_bytes(16, "big")


def keystream(key: bytes, nonce: bytes, offset: int, length: int) -> bytes:
    """AES-CTR keystream bytes [offset, offset+length) for a 128-bit counter base."""
    if length <= 0:
        return b""
    first_block = offset // AES_BLOCK
    skip = offset - first_block * AES_BLOCK
    encryptor = Cipher(algorithms.AES(key), modes.CTR(_counter_block(nonce, first_block))).encryptor()
    stream = encryptor.update(bytes(skip + length)) + encryptor.finalize()
    return stream[skip:skip + length]


def xor_ranges(data: bytes, key: bytes, nonce: bytes, ranges) -> bytes:
    """XOR the keystream over exactly the listed (offset, length) ranges.

    The keystream is indexed by file offset, so applying the same call twice
    restores the input.
    """
    ranges = [(int(o), int(n)) for o, n in ranges if n > 0]
    if not ranges:
        return bytes(data)
    start = min(o for o, _ in ranges)
    end = max(o + n for o, n in ranges)
    ks = np.frombuffer(keystream(key, nonce, start, end - start), dtype=np.uint8)
    out = np.frombuffer(data, dtype=np.uint8).copy()
    for offset, length in ranges:
        out[offset:offset + length] ^= ks[offset - start:offset - start + length]
    return out.tobytes()
