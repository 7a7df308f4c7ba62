import struct
import zlib

import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def coded_payload(rng: np.random.Generator, length: int) -> bytes:
    """Entropy-coded media payload: near-uniform bytes with a per-file skew, so chi-squared stays well above zero."""
    weights = 1.0 + 0.5 * rng.random(256)
    return rng.choice(256, size=max(length, 0), p=weights / weights.sum()).astype(np.uint8).tobytes()


def png_chunk(kind: bytes, body: bytes) -> bytes:
    return struct.pack(">I", len(body)) + kind + body + struct.pack(">I", zlib.crc32(kind + body) & 0xFFFFFFFF)


def make_png(rng: np.random.Generator, size: int, width: int = 64, height: int = 48) -> bytes:
    overhead = len(PNG_SIGNATURE) + 12 + 13 + 12 + 12
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    idat = coded_payload(rng, max(size - overhead, 1))
    return PNG_SIGNATURE + png_chunk(b"IHDR", ihdr) + png_chunk(b"IDAT", idat) + png_chunk(b"IEND", b"")


def make_jpeg(rng: np.random.Generator, size: int) -> bytes:
    app0 = b"\xff\xe0" + struct.pack(">H", 16) + b"JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00"
    head = b"\xff\xd8" + app0 + b"\xff\xda" + struct.pack(">H", 8) + b"\x01\x01\x00\x00\x3f\x00"
    return head + coded_payload(rng, max(size - len(head) - 2, 1)) + b"\xff\xd9"


def make_mp3(rng: np.random.Generator, size: int) -> bytes:
    head = b"ID3\x03\x00\x00\x00\x00\x00\x00" + b"\xff\xfb\x90\x64"
    return head + coded_payload(rng, max(size - len(head), 1))


def make_mp4(rng: np.random.Generator, size: int) -> bytes:
    ftyp = struct.pack(">I", 24) + b"ftypisom" + struct.pack(">I", 0x200) + b"isomiso2"
    body = max(size - len(ftyp) - 8, 1)
    return ftyp + struct.pack(">I", body + 8) + b"mdat" + coded_payload(rng, body)


MEDIA_MAKERS = {"png": make_png, "jpg": make_jpeg, "mp3": make_mp3, "mp4": make_mp4}
