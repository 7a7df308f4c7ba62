import numpy as np

BLOCK_SIZE = 512
# the last partial block of a packaged file carries at least this many bytes
MIN_TAIL = 64

WORDS = (
    "the", "detection", "snapshot", "block", "device", "window", "archive", "report", "quarterly", "budget",
    "meeting", "schedule", "review", "contract", "invoice", "customer", "storage", "backup", "volume", "policy",
    "server", "cluster", "network", "latency", "throughput", "analysis", "summary", "draft", "final", "notes",
    "and", "of", "to", "in", "for", "with", "on", "by", "from", "at", "is", "was", "are", "be", "this", "that",
    "café", "naïve", "résumé", "straße", "größe", "niño", "façade", "crème", "über", "déjà",
    "数据", "备份", "快照", "文件", "存储", "报告", "データ", "ファイル", "데이터", "파일",
    "данные", "отчёт", "файл", "δεδομένα", "αρχείο", "ملف", "בדיקה", "खाता", "🙂", "📁",
)
PUNCTUATION = (".", ",", ";", ":", "!", "?")


def tail_ok(size: int, block_size: int = BLOCK_SIZE, min_tail: int = MIN_TAIL) -> bool:
    tail = size % block_size
    return tail == 0 or tail >= min_tail


def pad_needed(size: int, block_size: int = BLOCK_SIZE, min_tail: int = MIN_TAIL) -> int:
    """Fewest bytes to append so the file satisfies the tail rule."""
    pad = 0
    while not tail_ok(size + pad, block_size, min_tail):
        pad += 1
    return pad


def sentence(rng: np.random.Generator, min_words: int = 4, max_words: int = 16) -> str:
    count = int(rng.integers(min_words, max_words + 1))
    words = [WORDS[i] for i in rng.integers(0, len(WORDS), size=count)]
    words[0] = words[0].capitalize()
    return " ".join(words) + PUNCTUATION[int(rng.integers(0, len(PUNCTUATION)))]


def paragraph(rng: np.random.Generator, sentences: int = 5) -> str:
    return " ".join(sentence(rng) for _ in range(sentences))


def ascii_sentence(rng: np.random.Generator, min_words: int = 4, max_words: int = 12) -> str:
    """Sentence restricted to ASCII words, for places that hold plain PDF strings."""
    ascii_words = [w for w in WORDS if w.isascii()]
    count = int(rng.integers(min_words, max_words + 1))
    return " ".join(ascii_words[i] for i in rng.integers(0, len(ascii_words), size=count))


def make_text(rng: np.random.Generator, size: int) -> bytes:
    """
    Mixed-script UTF-8 prose of exactly ``size`` bytes.

    Lines of sentences are appended while they fit and the remainder is padded
    with ASCII so no code point is split.
    """
    out = bytearray()
    while True:
        line = (paragraph(rng, int(rng.integers(1, 4))) + "\n").encode("utf-8")
        if len(out) + len(line) > size:
            break
        out += line
    filler = b"-" * (size - len(out))
    if filler:
        filler = filler[:-1] + b"\n"
    return bytes(out + filler)
