import hashlib
import json
import logging
import zlib
from pathlib import Path
from typing import Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from fastapi import Depends
from pydantic import TypeAdapter, ValidationError

from app.core.config.env import Settings, get_settings
from app.domain.schema.attack_schema import (
    AttackPattern,
    ByteRange,
    CampaignMode,
    CampaignRequest,
    CampaignResult,
    CipherSpec,
    Fast,
    GroundTruth,
    SkipStep,
)
from app.domain.schema.layout_schema import FileLayout, LayoutManifest
from app.domain.schema.snapshot_schema import BlockImage
from app.service.mapping_service import ExtentAllocator, MappingService, read_file
from app.service.snapstore_service import SnapstoreService
from app.utils.crypto.ctr import xor_ranges
from app.utils.exceptions.exceptions import ArgumentError, LayoutError, ManifestError, NotFoundError
from app.utils.helper import coalesce_spans, ranges_to_spans, spans_to_ranges

logger = logging.getLogger(__name__)

BLACK_BASTA = "blackbasta"
BLACK_BASTA_WHOLE_FILE = 5000
BLACK_BASTA_LARGE_FILE = 1 << 30

Schedule = Union[List[AttackPattern], Literal["blackbasta"]]
_pattern_adapter = TypeAdapter(AttackPattern)


def parse_pattern(text: str) -> Schedule:
    """
    Parse a CLI pattern: ``fast:N``, ``skip:N,S``, ``animagus:F`` or ``blackbasta``.

    Several patterns may be joined with ``+``; their ranges are unioned.

    Raises:
        ArgumentError: On malformed text or out-of-range parameters.
    """
    text = text.strip().lower()
    if text == BLACK_BASTA:
        return BLACK_BASTA
    patterns: List[AttackPattern] = []
    for part in text.split("+"):
        kind, _, args = part.partition(":")
        values = [a.strip() for a in args.split(",") if a.strip()]
        try:
            if kind == "fast" and len(values) == 1:
                raw = {"kind": "fast", "n": int(values[0])}
            elif kind == "skip" and len(values) == 2:
                raw = {"kind": "skip", "n": int(values[0]), "s": int(values[1])}
            elif kind == "animagus" and len(values) == 1:
                raw = {"kind": "animagus", "f": float(values[0])}
            else:
                raise ArgumentError(detail=f"Unknown attack pattern '{part}'")
            patterns.append(_pattern_adapter.validate_python(raw))
        except (ValueError, ValidationError) as e:
            raise ArgumentError(detail=f"Invalid attack pattern '{part}'", data=str(e))
    return patterns


def schedule_label(schedule: Schedule) -> str:
    if schedule == BLACK_BASTA:
        return BLACK_BASTA
    return "+".join(p.label for p in schedule)


def black_basta_preset(file_size: int) -> List[AttackPattern]:
    """Size-tiered partial encryption: whole file, 64/128 stripes, or a 5000-B prefix plus sparse stripes."""
    if file_size < BLACK_BASTA_WHOLE_FILE:
        return [Fast(n=max(file_size, 1))]
    if file_size < BLACK_BASTA_LARGE_FILE:
        return [SkipStep(n=64, s=128)]
    return [Fast(n=BLACK_BASTA_WHOLE_FILE), SkipStep(n=64, s=6336, start=BLACK_BASTA_WHOLE_FILE)]


def file_rng(seed: int, path: str, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(path.encode("utf-8")), stream])


def file_nonce(seed: int, path: str) -> bytes:
    """Per-file 128-bit counter base, distinct for every (seed, path) pair."""
    return hashlib.sha256(f"{seed}\0{path}".encode("utf-8")).digest()[:16]


def encrypted_ranges(pattern: AttackPattern, size: int, rng: np.random.Generator,
                     block_size: int = 512) -> List[ByteRange]:
    if size <= 0:
        return []
    if isinstance(pattern, Fast):
        return [(0, min(pattern.n, size))]
    if isinstance(pattern, SkipStep):
        step = pattern.n + pattern.s
        return [(o, min(pattern.n, size - o)) for o in range(pattern.start, size, step)]
    n_blocks = -(-size // block_size)
    k = int(pattern.f * n_blocks // 100)
    chosen = np.sort(rng.choice(n_blocks, size=k, replace=False)) if k else []
    return [(int(b) * block_size, min(block_size, size - int(b) * block_size)) for b in chosen]


def plan_ranges(schedule: Schedule, size: int, seed: int, path: str = "", block_size: int = 512) -> List[ByteRange]:
    patterns = black_basta_preset(size) if schedule == BLACK_BASTA else schedule
    rng = file_rng(seed, path)
    spans = []
    for pattern in patterns:
        spans.extend(ranges_to_spans(encrypted_ranges(pattern, size, rng, block_size)))
    return spans_to_ranges(coalesce_spans(spans))


def apply_attack(file_bytes: bytes, schedule: Schedule, cipher: CipherSpec, seed: int, path: str = "",
                 block_size: int = 512) -> Tuple[bytes, List[ByteRange]]:
    """
    Encrypt the pattern's ranges of ``file_bytes`` with AES-256-CTR.

    Returns:
        Tuple[bytes, List[ByteRange]]: The mutated bytes and the coalesced encrypted ranges.
    """
    if isinstance(schedule, list) and not schedule:
        raise ArgumentError(detail="Attack schedule is empty")
    ranges = plan_ranges(schedule, len(file_bytes), seed, path, block_size)
    return xor_ranges(file_bytes, cipher.key, file_nonce(seed, path), ranges), ranges


def decrypt_ranges(file_bytes: bytes, ranges: Sequence[ByteRange], cipher: CipherSpec, seed: int,
                   path: str = "") -> bytes:
    return xor_ranges(file_bytes, cipher.key, file_nonce(seed, path), ranges)


def changed_blocks(entry: FileLayout, before: bytes, after: bytes, block_size: int = 512) -> set[int]:
    """Device blocks of ``entry`` whose bytes differ between ``before`` and ``after``."""
    diff = np.frombuffer(before, dtype=np.uint8) != np.frombuffer(after, dtype=np.uint8)
    blocks: set[int] = set()
    for dev_start, dev_end, file_offset in entry.data_spans():
        hits = np.flatnonzero(diff[file_offset:file_offset + (dev_end - dev_start)])
        blocks.update(((hits + dev_start) // block_size).tolist())
    return blocks


class PeersimService:
    """Simulates partial-encryption ransomware against files laid out on the device."""

    def __init__(self, snapstore: SnapstoreService, mapping: Optional[MappingService] = None,
                 settings: Optional[Settings] = None):
        self.settings = settings or snapstore.settings or get_settings()
        self.snapstore = snapstore
        self.mapping = mapping or MappingService(self.settings)

    def init_device(self, block_count: int) -> dict:
        return self.snapstore.init_store(BlockImage.zeros(block_count, self.settings.BLOCK_SIZE))

    def write_corpus(self, corpus_dir, layout: Optional[LayoutManifest] = None,
                     reserved_extents: int = 0) -> Tuple[LayoutManifest, int]:
        """Copy a corpus onto the device as one epoch and return the extended layout."""
        image = self.snapstore.reconstruct(self.snapstore.latest_epoch())
        previous = image.clone()
        layout = self.mapping.layout_from_corpus(corpus_dir, image, layout, reserved_extents)
        snapshot, _ = self.snapstore.record_image(image, previous)
        return layout, snapshot.epoch

    def run_campaign(self, layout: LayoutManifest, schedule: Schedule, cipher: CipherSpec, seed: int = 0,
                     mode: CampaignMode = CampaignMode.CLONE,
                     targets: Optional[Iterable[str]] = None) -> CampaignResult:
        """
        Encrypt target files per the schedule and record the writes as one epoch.

        In clone mode each target gets an encrypted copy under the clone suffix and
        the original stays; in-place mode overwrites the originals.

        Raises:
            LayoutError: If a target is missing from the layout, lies outside the image,
                or already has a clone.
        """
        bs = self.settings.BLOCK_SIZE
        suffix = self.settings.CLONE_SUFFIX
        image = self.snapstore.reconstruct(self.snapstore.latest_epoch())
        previous = image.clone()
        allocator = ExtentAllocator(image, layout.extent_size, layout)
        files = list(layout.files)
        known = layout.by_path()
        if targets is None:
            targets = [f.path for f in layout.files if not f.path.endswith(suffix)]

        truth = GroundTruth(block_size=bs)
        device_blocks: set[int] = set()
        for path in sorted(targets):
            entry = known.get(path)
            if entry is None:
                raise LayoutError(detail=f"Campaign target {path} is not in the layout")
            if any(e.device_end > image.size for e in entry.extents):
                raise LayoutError(detail=f"Extents of {path} lie outside the device image")
            data = read_file(image, entry)
            target_path = f"{path}{suffix}" if mode == CampaignMode.CLONE else path
            mutated, ranges = apply_attack(data, schedule, cipher, seed, target_path, bs) if data else (data, [])

            if mode == CampaignMode.CLONE:
                if target_path in known:
                    raise LayoutError(detail=f"Clone {target_path} already exists in the layout")
                written = self.mapping.write_file(image, allocator, target_path, mutated)
                files.append(written)
            else:
                written = entry
                for dev_start, dev_end, file_offset in entry.data_spans():
                    chunk = mutated[file_offset:file_offset + (dev_end - dev_start)]
                    image.data[dev_start:dev_end] = np.frombuffer(chunk, dtype=np.uint8)

            if ranges:
                truth.files[target_path] = ranges
                truth.positive_files.append(target_path)
                device_blocks |= changed_blocks(written, data, mutated, bs)

        new_layout = LayoutManifest(block_size=layout.block_size, extent_size=layout.extent_size, files=files)
        positives = set(truth.positive_files)
        truth.negative_files = sorted(f.path for f in new_layout.files if f.path not in positives)
        truth.device_blocks = sorted(device_blocks)

        snapshot, bitmap = self.snapstore.record_image(image, previous)
        if not np.all(bitmap.bits[truth.device_blocks]):
            raise LayoutError(detail="Encrypted blocks missing from the epoch's dirty bitmap")
        logger.info("Campaign %s (%s): %d files attacked, %d encrypted bytes in %d blocks, epoch %d",
                    schedule_label(schedule), mode.value, len(truth.positive_files), truth.encrypted_bytes,
                    truth.block_count, snapshot.epoch)
        return CampaignResult(epoch=snapshot.epoch, pattern=schedule_label(schedule), mode=mode, seed=seed,
                              ground_truth=truth, layout=new_layout)

    def save_result(self, result: CampaignResult, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(result.model_dump(mode="json"), indent=2))
        return path

    def simulate(self, request: CampaignRequest) -> CampaignResult:
        """
        Run a campaign described by a request and persist its outputs.

        The extended layout replaces ``layout_path`` unless ``layout_out`` is given.
        Without a key, one is derived from the seed.
        """
        layout = self.mapping.load_layout(request.layout_path)
        try:
            cipher = CipherSpec(key_hex=request.key_hex) if request.key_hex else seeded_cipher(request.seed)
        except ValidationError as e:
            raise ArgumentError(detail="Cipher key must be 64 hex characters", data=str(e))
        result = self.run_campaign(layout, parse_pattern(request.pattern), cipher, request.seed, request.mode,
                                   request.targets)
        self.mapping.save_layout(result.layout, request.layout_out or request.layout_path)
        if request.result_path:
            self.save_result(result, request.result_path)
        return result


def seeded_cipher(seed: int) -> CipherSpec:
    return CipherSpec(key_hex=np.random.default_rng([seed, 0xAE5]).bytes(32).hex())


def load_result(path) -> CampaignResult:
    """
    Read a campaign result written by ``save_result``.

    Raises:
        NotFoundError: If the file does not exist.
        ManifestError: If it is not a campaign result.
    """
    path = Path(path)
    if not path.is_file():
        raise NotFoundError(detail=f"Campaign result {path} not found")
    try:
        return CampaignResult.model_validate_json(path.read_text())
    except ValueError as e:
        raise ManifestError(detail=f"Campaign result {path} is not valid", data=str(e))


def get_peersim_service(settings: Settings = Depends(get_settings)) -> PeersimService:
    return PeersimService(SnapstoreService(settings=settings), MappingService(settings), settings)
