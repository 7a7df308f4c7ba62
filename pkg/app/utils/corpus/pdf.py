import zlib
from typing import Dict, List, Optional

import numpy as np

from app.utils.corpus.media import coded_payload
from app.utils.corpus.text import ascii_sentence, tail_ok

HEADER = b"%PDF-1.7\n%\xe2\xe3\xcf\xd3\n"
XMP = (
    '<?xml version="1.0" encoding="UTF-8"?>'
    '<x:xmpmeta xmlns:x="adobe:ns:meta/">'
    '<rdf:RDF xmlns:rdf="http://www.w3.org/1999/02/22-rdf-syntax-ns#">'
    '<rdf:Description rdf:about="" xmlns:dc="http://purl.org/dc/elements/1.1/">'
    "<dc:title>{title}</dc:title><dc:creator>favscan</dc:creator>"
    "</rdf:Description></rdf:RDF></x:xmpmeta>"
)


class PdfWriter:
    """Minimal PDF serializer: contiguous objects, one xref table, no free space."""

    def __init__(self):
        self.objects: Dict[int, bytes] = {}
        self.next_number = 1

    def reserve(self) -> int:
        number = self.next_number
        self.next_number += 1
        return number

    def put(self, number: int, body: str) -> None:
        self.objects[number] = body.encode("latin-1")

    def put_stream(self, number: int, entries: str, payload: bytes) -> None:
        head = f"<</Length {len(payload)} {entries}>>\nstream\n".encode("latin-1")
        self.objects[number] = head + payload + b"\nendstream"

    def serialize(self, root: int, info: Optional[int] = None) -> bytes:
        out = bytearray(HEADER)
        offsets: List[int] = []
        for number in range(1, self.next_number):
            offsets.append(len(out))
            out += f"{number} 0 obj\n".encode("ascii") + self.objects[number] + b"\nendobj\n"
        xref_at = len(out)
        out += f"xref\n0 {self.next_number}\n".encode("ascii") + b"0000000000 65535 f \n"
        out += b"".join(f"{offset:010d} 00000 n \n".encode("ascii") for offset in offsets)
        trailer = f"/Size {self.next_number} /Root {root} 0 R"
        if info is not None:
            trailer += f" /Info {info} 0 R"
        out += f"trailer\n<<{trailer}>>\nstartxref\n{xref_at}\n%%EOF\n".encode("ascii")
        return bytes(out)


def content_stream(rng: np.random.Generator, lines: int, image: Optional[str]) -> bytes:
    ops = ["q 0.93 0.93 0.93 rg 54 740 504 24 re f Q"]
    if image:
        ops.append(f"q 96 0 0 72 460 640 cm /{image} Do Q")
    ops.append("BT /F1 10 Tf 12 TL 72 720 Td")
    for _ in range(lines):
        ops.append(f"({ascii_sentence(rng)}) Tj T*")
    ops.append("ET")
    return ("\n".join(ops) + "\n").encode("ascii")


def image_rows(rng: np.random.Generator, width: int, height: int) -> bytes:
    """RGB pixels encoded with PNG row filter 0 (one type byte per row)."""
    pixels = np.frombuffer(coded_payload(rng, width * height * 3), dtype=np.uint8).reshape(height, width * 3)
    return np.hstack([np.zeros((height, 1), dtype=np.uint8), pixels]).tobytes()


def make_pdf(rng: np.random.Generator, pages: int = 1, lines: int = 48, image: bool = True,
             font: bool = True, metadata: bool = True) -> bytes:
    """
    Single-revision PDF with Flate content streams, an optional predictor-coded
    image, an embedded font program and an XMP packet. The /Producer string is
    lengthened until the file satisfies the tail rule.
    """
    w = PdfWriter()
    catalog, pages_obj = w.reserve(), w.reserve()
    font_obj = w.reserve()
    descriptor = w.reserve() if font else None
    font_file = w.reserve() if font else None
    image_obj = w.reserve() if image else None
    xmp = w.reserve() if metadata else None
    page_objs = []
    for _ in range(pages):
        page_objs.append((w.reserve(), w.reserve()))
    info = w.reserve()

    catalog_entries = f"/Type /Catalog /Pages {pages_obj} 0 R"
    if xmp:
        catalog_entries += f" /Metadata {xmp} 0 R"
        w.put_stream(xmp, "/Type /Metadata /Subtype /XML",
                     XMP.format(title=ascii_sentence(rng, 2, 5)).encode("utf-8"))
    w.put(catalog, f"<<{catalog_entries}>>")
    kids = " ".join(f"{page} 0 R" for page, _ in page_objs)
    w.put(pages_obj, f"<</Type /Pages /Kids [{kids}] /Count {pages}>>")

    font_entries = "/Type /Font /Subtype /TrueType /BaseFont /FavSans /FirstChar 32 /LastChar 126"
    if font:
        program = coded_payload(rng, int(rng.integers(2, 5)) * 512)
        w.put_stream(font_file, f"/Length1 {len(program)} /Filter /FlateDecode", zlib.compress(program))
        w.put(descriptor, f"<</Type /FontDescriptor /FontName /FavSans /Flags 32 /FontBBox [-100 -200 1000 900] "
                          f"/ItalicAngle 0 /Ascent 900 /Descent -200 /CapHeight 700 /StemV 80 "
                          f"/FontFile2 {font_file} 0 R>>")
        font_entries += f" /FontDescriptor {descriptor} 0 R"
    w.put(font_obj, f"<<{font_entries}>>")

    resources = f"/Font <</F1 {font_obj} 0 R>>"
    if image:
        width, height = 24, 16
        w.put_stream(image_obj, f"/Type /XObject /Subtype /Image /Width {width} /Height {height} "
                                f"/ColorSpace /DeviceRGB /BitsPerComponent 8 /Filter /FlateDecode "
                                f"/DecodeParms <</Predictor 15 /Colors 3 /BitsPerComponent 8 /Columns {width}>>",
                     zlib.compress(image_rows(rng, width, height)))
        resources += f" /XObject <</Im1 {image_obj} 0 R>>"

    for index, (page, contents) in enumerate(page_objs):
        w.put(page, f"<</Type /Page /Parent {pages_obj} 0 R /MediaBox [0 0 612 792] "
                    f"/Resources <<{resources}>> /Contents {contents} 0 R>>")
        w.put_stream(contents, "/Filter /FlateDecode",
                     zlib.compress(content_stream(rng, lines, "Im1" if image and index == 0 else None)))

    title = ascii_sentence(rng, 2, 5)
    for pad in range(1024):
        producer = "favscan corpus" + " " * pad
        w.put(info, f"<</Title ({title}) /Producer ({producer})>>")
        data = w.serialize(catalog, info)
        if tail_ok(len(data)):
            return data
    raise ValueError("could not pad PDF to the tail rule")
