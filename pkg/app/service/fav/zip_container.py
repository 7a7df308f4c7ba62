import posixpath
import struct
import zlib
from typing import Iterable, List, Optional, Tuple

from app.domain.schema.fav_schema import ContainerMap, Finding, ReasonCode, Span, ZipMember
from app.utils.helper import coalesce_spans

LFH_SIG = 0x04034B50
CD_SIG = 0x02014B50
EOCD_SIG = 0x06054B50
DD_SIG = 0x08074B50

LFH = struct.Struct("<IHHHHHIIIHH")
CDH = struct.Struct("<IHHHHHHIIIHHHHHII")
EOCD = struct.Struct("<IHHHHIIH")
DD = struct.Struct("<III")

FLAG_ENCRYPTED = 0x1
FLAG_DESCRIPTOR = 0x8
KNOWN_METHODS = {0, 8, 9, 12, 14, 93, 95, 98, 99}

TEXT_EXTENSIONS = {"txt", "md", "csv", "json", "xml", "rels", "html", "htm", "log", "ini", "cfg", "yaml", "yml", "tsv"}
CONTAINER_EXTENSIONS = {"zip", "docx", "xlsx", "pptx", "jar", "odt"}
MEDIA_MAGIC = (b"\xff\xd8\xff", b"\x89PNG\r\n\x1a\n", b"ID3", b"GIF8")


class InflateError(Exception):
    pass


def _violation(detail: str, span: Optional[Span] = None) -> Finding:
    return Finding(reason=ReasonCode.ZIP_STRUCT_VIOLATION, detail=detail, span=span)


def _valid_dos_datetime(time: int, date: int) -> bool:
    second, minute, hour = (time & 0x1F) * 2, (time >> 5) & 0x3F, time >> 11
    day, month = date & 0x1F, (date >> 5) & 0x0F
    return second < 60 and minute < 60 and hour < 24 and 1 <= day <= 31 and 1 <= month <= 12


def _valid_extra(extra: bytes) -> bool:
    # extra field is a sequence of (u16 id, u16 size, payload) records tiling it exactly
    pos = 0
    while pos < len(extra):
        if pos + 4 > len(extra):
            return False
        _, size = struct.unpack_from("<HH", extra, pos)
        pos += 4 + size
    return pos == len(extra)


def find_eocd(data: bytes) -> Optional[int]:
    """Offset of the end-of-central-directory record whose comment reaches EOF exactly."""
    floor = max(0, len(data) - EOCD.size - 0xFFFF)
    pos = data.rfind(b"PK\x05\x06", floor)
    while pos >= floor and pos != -1:
        if pos + EOCD.size <= len(data):
            comment_length = struct.unpack_from("<H", data, pos + 20)[0]
            if pos + EOCD.size + comment_length == len(data):
                return pos
        pos = data.rfind(b"PK\x05\x06", floor, pos)
    return None


def parse_container(data: bytes) -> Optional[ContainerMap]:
    """
    Partition a ZIP container into metadata, member payloads and unclaimed gaps,
    cross-checking local headers against the central directory.

    Returns None when no end-of-central-directory record can be located.
    """
    eocd_at = find_eocd(data)
    if eocd_at is None:
        return None
    (_, disk, cd_disk, entries_disk, entries, cd_size, cd_offset, comment_length) = EOCD.unpack_from(data, eocd_at)
    cmap = ContainerMap(size=len(data), eocd=(eocd_at, len(data)))
    if comment_length:
        cmap.comment = (eocd_at + EOCD.size, len(data))
    violations = cmap.violations

    if disk != 0 or cd_disk != 0 or entries_disk != entries:
        violations.append(_violation("multi-disk fields set", cmap.eocd))
    if cd_offset + cd_size != eocd_at:
        violations.append(_violation("central directory does not end at the EOCD record", cmap.eocd))
    cmap.central_directory = (min(cd_offset, eocd_at), eocd_at)

    pos = cd_offset
    for index in range(entries):
        if pos + CDH.size > eocd_at:
            violations.append(_violation(f"central directory truncated at entry {index}", (pos, eocd_at)))
            break
        (sig, _made, needed, flags, method, mtime, mdate, crc, csize, usize,
         nlen, xlen, clen, _disk, _iattr, _eattr, lfh_offset) = CDH.unpack_from(data, pos)
        if sig != CD_SIG:
            violations.append(_violation(f"bad central directory signature at entry {index}", (pos, pos + 4)))
            break
        name_raw = data[pos + CDH.size:pos + CDH.size + nlen]
        extra = data[pos + CDH.size + nlen:pos + CDH.size + nlen + xlen]
        comment = data[pos + CDH.size + nlen + xlen:pos + CDH.size + nlen + xlen + clen]
        entry_span = (pos, pos + CDH.size + nlen + xlen + clen)
        pos = entry_span[1]
        if pos > eocd_at:
            violations.append(_violation(f"central directory entry {index} overruns the EOCD", entry_span))
            break
        if method not in KNOWN_METHODS or needed > 63:
            violations.append(_violation(f"entry {index}: unknown method or version", entry_span))
        if not _valid_dos_datetime(mtime, mdate):
            violations.append(_violation(f"entry {index}: invalid DOS timestamp", entry_span))
        if not _valid_extra(extra):
            violations.append(_violation(f"entry {index}: malformed extra field", entry_span))
        try:
            name = name_raw.decode("utf-8" if flags & 0x800 else "cp437")
            comment.decode("utf-8")
        except UnicodeDecodeError:
            violations.append(_violation(f"entry {index}: undecodable name or comment", entry_span))
            name = name_raw.decode("latin-1")

        member = _parse_local(data, index, lfh_offset, cd_offset, name_raw, flags, method, mtime, mdate,
                              crc, csize, usize, violations)
        if member is not None:
            member.name = name
            member.cd_offset = entry_span[0]
            cmap.members.append(member)

    if pos != eocd_at and not violations:
        violations.append(_violation("central directory size disagrees with its entries", cmap.central_directory))

    claimed = sorted(m.payload_range for m in cmap.members)
    for (s0, e0), (s1, _) in zip(claimed, claimed[1:]):
        if s1 < e0:
            violations.append(_violation("member payloads overlap", (s1, e0)))
    cmap.gaps = complement(coalesce_spans(cmap.metadata + claimed), len(data))
    return cmap


def _parse_local(data: bytes, index: int, offset: int, cd_offset: int, name_raw: bytes, flags: int, method: int,
                 mtime: int, mdate: int, crc: int, csize: int, usize: int,
                 violations: List[Finding]) -> Optional[ZipMember]:
    if offset + LFH.size > cd_offset:
        violations.append(_violation(f"entry {index}: local header offset out of range"))
        return None
    (sig, _needed, lflags, lmethod, ltime, ldate, lcrc, lcsize, lusize, nlen, xlen) = LFH.unpack_from(data, offset)
    header_end = offset + LFH.size + nlen + xlen
    lfh_span = (offset, header_end)
    if sig != LFH_SIG:
        violations.append(_violation(f"entry {index}: bad local header signature", (offset, offset + 4)))
    if data[offset + LFH.size:offset + LFH.size + nlen] != name_raw:
        violations.append(_violation(f"entry {index}: local name differs from central directory", lfh_span))
    if lflags != flags or lmethod != method or (ltime, ldate) != (mtime, mdate):
        violations.append(_violation(f"entry {index}: local flags, method or time differ", lfh_span))
    if not _valid_extra(data[offset + LFH.size + nlen:header_end]):
        violations.append(_violation(f"entry {index}: malformed local extra field", lfh_span))
    if not flags & FLAG_DESCRIPTOR and (lcrc, lcsize, lusize) != (crc, csize, usize):
        violations.append(_violation(f"entry {index}: local sizes or CRC differ", lfh_span))

    payload = (header_end, header_end + csize)
    if payload[1] > cd_offset:
        violations.append(_violation(f"entry {index}: payload runs into the central directory", payload))
        payload = (header_end, max(header_end, cd_offset))

    descriptor = None
    if flags & FLAG_DESCRIPTOR:
        at = payload[1]
        has_sig = data[at:at + 4] == struct.pack("<I", DD_SIG)
        body = at + 4 if has_sig else at
        if body + DD.size > cd_offset:
            violations.append(_violation(f"entry {index}: data descriptor truncated", (at, cd_offset)))
        else:
            if DD.unpack_from(data, body) != (crc, csize, usize):
                violations.append(_violation(f"entry {index}: data descriptor disagrees", (at, body + DD.size)))
            descriptor = (at, body + DD.size)

    return ZipMember(name="", cd_offset=0, lfh_range=lfh_span, payload_range=payload, descriptor_range=descriptor,
                     method=method, flags=flags, crc32=crc, compressed_size=csize, uncompressed_size=usize)


def complement(spans: List[Span], size: int) -> List[Span]:
    gaps: List[Span] = []
    cursor = 0
    for start, end in spans:
        if start > cursor:
            gaps.append((cursor, min(start, size)))
        cursor = max(cursor, end)
    if cursor < size:
        gaps.append((cursor, size))
    return gaps


def decode_member(data: bytes, member: ZipMember, budget: int) -> Tuple[bytes, Optional[ReasonCode]]:
    """
    Decode a STORE or DEFLATE member and cross-check its size and CRC.

    Returns the decoded bytes and the reason code of the first failure, if any.
    """
    raw = data[member.payload_range[0]:member.payload_range[1]]
    if member.method == 0:
        decoded = raw
    elif member.method == 8:
        try:
            decoded = inflate_raw(raw, budget)
        except InflateError:
            return b"", ReasonCode.ZIP_INFLATE_FAIL
    else:
        return b"", ReasonCode.ZIP_MEMBER_UNVERIFIED
    if len(decoded) > budget:
        return b"", ReasonCode.ZIP_BUDGET_EXHAUSTED
    if len(decoded) != member.uncompressed_size:
        return decoded, ReasonCode.ZIP_STRUCT_VIOLATION
    if zlib.crc32(decoded) & 0xFFFFFFFF != member.crc32:
        return decoded, ReasonCode.ZIP_CRC_MISMATCH
    return decoded, None


def inflate_raw(raw: bytes, budget: int) -> bytes:
    """Inflate a raw DEFLATE stream that must end exactly at the payload boundary."""
    inflater = zlib.decompressobj(-zlib.MAX_WBITS)
    try:
        out = inflater.decompress(raw, budget + 1)
    except zlib.error as e:
        raise InflateError(str(e)) from e
    if len(out) > budget:
        return out
    if not inflater.eof or inflater.unused_data or inflater.unconsumed_tail:
        raise InflateError("deflate stream does not end at the payload boundary")
    return out


def nested_path(container: str, member: str) -> str:
    return f"{container}!{member}"


def extension(name: str) -> str:
    return posixpath.splitext(name)[1].lower().lstrip(".")


def is_container(name: str, decoded: bytes) -> bool:
    return decoded.startswith((b"PK\x03\x04", b"PK\x05\x06")) or extension(name) in CONTAINER_EXTENSIONS


def classify_leaf(name: str, decoded: bytes, media_extensions: Iterable[str]) -> str:
    """
    Class of a decoded member: container, media, text or binary.

    Text-extension members are text regardless of content; other members are
    text only when they decode as UTF-8.
    """
    if is_container(name, decoded):
        return "container"
    if extension(name) in set(media_extensions) or decoded.startswith(MEDIA_MAGIC):
        return "media"
    if extension(name) in TEXT_EXTENSIONS:
        return "text"
    try:
        decoded.decode("utf-8")
        return "text"
    except UnicodeDecodeError:
        return "binary"
