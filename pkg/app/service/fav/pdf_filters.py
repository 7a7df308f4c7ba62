import base64
import binascii
import re
import zlib
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.domain.schema.fav_schema import PdfObject

SUPPORTED_FILTERS = {"FlateDecode", "ASCII85Decode", "ASCIIHexDecode", "RunLengthDecode"}
FILTER_ABBREVIATIONS = {"Fl": "FlateDecode", "A85": "ASCII85Decode", "AHx": "ASCIIHexDecode", "RL": "RunLengthDecode"}
WHITESPACE = re.compile(rb"[\x00\t\n\x0c\r ]+")


class FilterError(Exception):
    pass


def flate_decode(data: bytes, budget: int) -> bytes:
    inflater = zlib.decompressobj()
    try:
        out = inflater.decompress(data, budget + 1)
    except zlib.error as e:
        raise FilterError(f"flate: {e}") from e
    if len(out) > budget:
        raise FilterError("flate: decoded byte budget exceeded")
    if not inflater.eof:
        raise FilterError("flate: stream truncated")
    if inflater.unused_data.strip(b"\x00\t\n\x0c\r "):
        raise FilterError("flate: trailing data after end of stream")
    return out


def ascii85_decode(data: bytes) -> bytes:
    data = WHITESPACE.sub(b"", data)
    if data.startswith(b"<~"):
        data = data[2:]
    end = data.find(b"~>")
    if end < 0:
        raise FilterError("ascii85: missing end-of-data marker")
    try:
        return base64.a85decode(data[:end], adobe=False)
    except ValueError as e:
        raise FilterError(f"ascii85: {e}") from e


def asciihex_decode(data: bytes) -> bytes:
    data = WHITESPACE.sub(b"", data)
    end = data.find(b">")
    if end < 0:
        raise FilterError("asciihex: missing end-of-data marker")
    digits = data[:end]
    if len(digits) % 2:
        digits += b"0"
    try:
        return binascii.unhexlify(digits)
    except (binascii.Error, ValueError) as e:
        raise FilterError(f"asciihex: {e}") from e


def runlength_decode(data: bytes) -> bytes:
    out = bytearray()
    i = 0
    while i < len(data):
        n = data[i]
        if n == 128:
            return bytes(out)
        if n < 128:
            chunk = data[i + 1:i + 2 + n]
            if len(chunk) != n + 1:
                raise FilterError("runlength: literal run truncated")
            out += chunk
            i += n + 2
        else:
            if i + 1 >= len(data):
                raise FilterError("runlength: repeat run truncated")
            out += data[i + 1:i + 2] * (257 - n)
            i += 2
    raise FilterError("runlength: missing end-of-data marker")


def png_unpredict(data: bytes, colors: int = 1, bits: int = 8, columns: int = 1) -> bytes:
    """Undo PNG row filters (one filter-type byte per row)."""
    bpp = max(1, colors * bits // 8)
    row_len = (colors * bits * columns + 7) // 8
    stride = row_len + 1
    if row_len <= 0 or len(data) % stride:
        raise FilterError("png predictor: data is not a whole number of rows")
    rows = np.frombuffer(data, dtype=np.uint8).reshape(-1, stride)
    out = np.zeros((rows.shape[0], row_len), dtype=np.uint8)
    prior = np.zeros(row_len, dtype=np.uint8)
    for r, row in enumerate(rows):
        kind, line = int(row[0]), row[1:]
        if kind == 0:
            cur = line.copy()
        elif kind == 1:
            cur = line.astype(np.int64)
            for i in range(bpp, row_len):
                cur[i] = (cur[i] + cur[i - bpp]) & 0xFF
            cur = cur.astype(np.uint8)
        elif kind == 2:
            cur = line + prior
        elif kind in (3, 4):
            cur = np.zeros(row_len, dtype=np.int64)
            up = prior.astype(np.int64)
            for i in range(row_len):
                left = int(cur[i - bpp]) if i >= bpp else 0
                if kind == 3:
                    pred = (left + int(up[i])) // 2
                else:
                    upleft = int(up[i - bpp]) if i >= bpp else 0
                    p = left + int(up[i]) - upleft
                    pa, pb, pc = abs(p - left), abs(p - int(up[i])), abs(p - upleft)
                    pred = left if pa <= pb and pa <= pc else (int(up[i]) if pb <= pc else upleft)
                cur[i] = (int(line[i]) + pred) & 0xFF
            cur = cur.astype(np.uint8)
        else:
            raise FilterError(f"png predictor: invalid row filter type {kind}")
        out[r] = cur
        prior = cur
    return out.tobytes()


def normalize_filters(value: Any) -> List[str]:
    if value is None:
        return []
    names = value if isinstance(value, list) else [value]
    return [FILTER_ABBREVIATIONS.get(str(n), str(n)) for n in names]


def is_supported(filters: List[str]) -> bool:
    return all(f in SUPPORTED_FILTERS for f in filters)


def decode_stream(raw: bytes, filters: List[str], parms: List[Optional[Dict[str, Any]]],
                  budget: int = 256 * 1024 * 1024) -> bytes:
    """
    Run a supported filter chain in order.

    Raises:
        FilterError: On any decode failure or an unsupported filter.
    """
    data = raw
    for index, name in enumerate(filters):
        parm = parms[index] if index < len(parms) and isinstance(parms[index], dict) else {}
        if name == "FlateDecode":
            data = flate_decode(data, budget)
            predictor = int(parm.get("Predictor", 1))
            if predictor >= 10:
                data = png_unpredict(data, int(parm.get("Colors", 1)), int(parm.get("BitsPerComponent", 8)),
                                     int(parm.get("Columns", 1)))
            elif predictor != 1:
                raise FilterError(f"unsupported predictor {predictor}")
        elif name == "ASCII85Decode":
            data = ascii85_decode(data)
        elif name == "ASCIIHexDecode":
            data = asciihex_decode(data)
        elif name == "RunLengthDecode":
            data = runlength_decode(data)
        else:
            raise FilterError(f"unsupported filter {name}")
        if len(data) > budget:
            raise FilterError("decoded byte budget exceeded")
    return data


def canonical_payload(data: bytes, obj: PdfObject, budget: int, payload: Optional[str] = None) -> Tuple[bytes, str]:
    """
    Bytes of a stream used for manifest hashing and whether they are "raw" or "decoded".

    Fully supported filter chains decode unless ``payload`` asks for raw bytes.

    Raises:
        FilterError: If a supported chain fails to decode.
    """
    start, end = obj.stream_range
    raw = data[start:end]
    if payload == "raw" or not obj.filters or not is_supported(obj.filters):
        return raw, "raw"
    return decode_stream(raw, obj.filters, obj.decode_parms, budget), "decoded"
