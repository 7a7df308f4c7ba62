import io
import zipfile
from typing import Iterable, List, Tuple

import numpy as np

from app.utils.corpus.media import make_png
from app.utils.corpus.text import make_text, pad_needed

# fixed so packaged archives are byte-for-byte reproducible
DATE_TIME = (2024, 1, 2, 3, 4, 6)
COMMENT = b"favscan synthetic corpus; "

Member = Tuple[str, bytes, int]


def write_zip(members: Iterable[Member], comment: bytes = b"") -> bytes:
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w") as zf:
        for name, payload, method in members:
            info = zipfile.ZipInfo(name, date_time=DATE_TIME)
            info.compress_type = method
            info.external_attr = 0o644 << 16
            zf.writestr(info, payload)
        zf.comment = comment
    return buffer.getvalue()


def padding_comment(length: int) -> bytes:
    return (COMMENT * (length // len(COMMENT) + 1))[:length]


def package(members: List[Member]) -> bytes:
    """Write ``members`` and lengthen the archive comment until the tail rule holds."""
    bare = write_zip(members)
    pad = pad_needed(len(bare))
    return write_zip(members, padding_comment(pad)) if pad else bare


def repack(data: bytes) -> bytes:
    """Re-write an archive produced elsewhere with fixed timestamps and tail padding."""
    with zipfile.ZipFile(io.BytesIO(data)) as zin:
        members = [(info.filename, zin.read(info), zipfile.ZIP_DEFLATED) for info in zin.infolist()]
    return package(members)


def make_zip(rng: np.random.Generator, nested: bool = True, media: bool = True) -> bytes:
    """
    Project-style archive: deflated text members, an optional stored PNG and an
    optional nested archive holding more text.
    """
    members: List[Member] = [
        ("docs/readme.txt", make_text(rng, int(rng.integers(3, 7)) * 512), zipfile.ZIP_DEFLATED),
        ("docs/notes.md", make_text(rng, int(rng.integers(2, 5)) * 512), zipfile.ZIP_DEFLATED),
        ("data/table.csv", _csv(rng), zipfile.ZIP_DEFLATED),
    ]
    if media:
        members.append(("images/photo.png", make_png(rng, int(rng.integers(2, 5)) * 512), zipfile.ZIP_STORED))
    if nested:
        inner = write_zip([("inner/summary.txt", make_text(rng, 1024), zipfile.ZIP_DEFLATED)])
        members.append(("archive/inner.zip", inner, zipfile.ZIP_STORED))
    return package(members)


def _csv(rng: np.random.Generator, rows: int = 40) -> bytes:
    lines = ["id,region,volume,latency_ms"]
    regions = ("north", "south", "east", "west")
    for i in range(rows):
        lines.append(f"{i},{regions[int(rng.integers(0, 4))]},{int(rng.integers(1, 10_000))},"
                     f"{float(rng.random() * 40):.3f}")
    return ("\n".join(lines) + "\n").encode("utf-8")
