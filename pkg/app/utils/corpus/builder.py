import logging
import zlib
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from app.utils.corpus.archive import make_zip
from app.utils.corpus.media import MEDIA_MAKERS
from app.utils.corpus.ooxml import make_docx, make_pptx, make_xlsx
from app.utils.corpus.pdf import make_pdf
from app.utils.corpus.text import BLOCK_SIZE, make_text, tail_ok

logger = logging.getLogger(__name__)

DOCUMENT_FORMATS = ("txt", "zip", "docx", "xlsx", "pptx", "pdf")
MIXED_FORMATS = DOCUMENT_FORMATS + ("jpg", "png", "mp3", "mp4")
# smallest packaged file, in blocks
MIN_BLOCKS = 4


def _text(rng: np.random.Generator) -> bytes:
    return make_text(rng, int(rng.integers(MIN_BLOCKS, 17)) * BLOCK_SIZE)


def _media(ext: str) -> Callable[[np.random.Generator], bytes]:
    def make(rng: np.random.Generator) -> bytes:
        return MEDIA_MAKERS[ext](rng, int(rng.integers(MIN_BLOCKS, 97)) * BLOCK_SIZE)
    return make


PACKAGERS: Dict[str, Callable[[np.random.Generator], bytes]] = {
    "txt": _text,
    "zip": lambda rng: make_zip(rng, nested=bool(rng.integers(0, 2)), media=True),
    "docx": lambda rng: make_docx(rng, picture=bool(rng.integers(0, 2))),
    "xlsx": make_xlsx,
    "pptx": lambda rng: make_pptx(rng, picture=bool(rng.integers(0, 2))),
    "pdf": lambda rng: make_pdf(rng, pages=int(rng.integers(1, 3)), image=bool(rng.integers(0, 2))),
    **{ext: _media(ext) for ext in MEDIA_MAKERS},
}


def package_file(fmt: str, rng: np.random.Generator) -> bytes:
    """
    One synthetic file in ``fmt`` honoring the clean-format contract.

    Raises:
        ValueError: If ``fmt`` has no packager or the result breaks the size rules.
    """
    maker = PACKAGERS.get(fmt)
    if maker is None:
        raise ValueError(f"no packager for format '{fmt}'")
    data = maker(rng)
    if len(data) < MIN_BLOCKS * BLOCK_SIZE or not tail_ok(len(data)):
        raise ValueError(f"{fmt} packager produced a {len(data)}-byte file outside the size rules")
    return data


def build_corpus(out_dir, counts: Dict[str, int], seed: int = 0) -> List[Path]:
    """Write ``counts[fmt]`` files per format under ``out_dir/<fmt>/``."""
    root = Path(out_dir)
    written: List[Path] = []
    for fmt in sorted(counts):
        rng = np.random.default_rng([seed, zlib.crc32(fmt.encode("ascii"))])
        folder = root / fmt
        folder.mkdir(parents=True, exist_ok=True)
        for index in range(counts[fmt]):
            path = folder / f"{fmt}_{index:03d}.{fmt}"
            path.write_bytes(package_file(fmt, rng))
            written.append(path)
    logger.info("Built corpus at %s: %s", root, {fmt: counts[fmt] for fmt in sorted(counts)})
    return written


def mixed_corpus(out_dir, n_files: int, seed: int = 0, formats: Optional[List[str]] = None) -> List[Path]:
    """``n_files`` files cycling through ``formats`` (documents and media by default)."""
    formats = list(formats or MIXED_FORMATS)
    counts: Dict[str, int] = {}
    for index in range(n_files):
        fmt = formats[index % len(formats)]
        counts[fmt] = counts.get(fmt, 0) + 1
    return build_corpus(out_dir, counts, seed)
