import io
import zipfile
from typing import List

import numpy as np
from docx import Document
from docx.shared import Inches
from lxml import etree

from app.utils.corpus.archive import Member, package, repack
from app.utils.corpus.media import make_png
from app.utils.corpus.text import paragraph, sentence

CT_NS = "http://schemas.openxmlformats.org/package/2006/content-types"
REL_NS = "http://schemas.openxmlformats.org/package/2006/relationships"
OFFICE_REL = "http://schemas.openxmlformats.org/officeDocument/2006/relationships"
SHEET_NS = "http://schemas.openxmlformats.org/spreadsheetml/2006/main"
PRES_NS = "http://schemas.openxmlformats.org/presentationml/2006/main"
DRAWING_NS = "http://schemas.openxmlformats.org/drawingml/2006/main"


def _xml(root: etree._Element) -> bytes:
    return etree.tostring(root, xml_declaration=True, encoding="UTF-8", standalone=True)


def content_types(overrides: dict, media: bool = False) -> bytes:
    root = etree.Element(f"{{{CT_NS}}}Types", nsmap={None: CT_NS})
    defaults = {"rels": "application/vnd.openxmlformats-package.relationships+xml", "xml": "application/xml"}
    if media:
        defaults["png"] = "image/png"
    for ext, ctype in defaults.items():
        etree.SubElement(root, f"{{{CT_NS}}}Default", Extension=ext, ContentType=ctype)
    for part, ctype in overrides.items():
        etree.SubElement(root, f"{{{CT_NS}}}Override", PartName=part, ContentType=ctype)
    return _xml(root)


def relationships(targets: List[tuple]) -> bytes:
    root = etree.Element(f"{{{REL_NS}}}Relationships", nsmap={None: REL_NS})
    for index, (rel_type, target) in enumerate(targets, start=1):
        etree.SubElement(root, f"{{{REL_NS}}}Relationship", Id=f"rId{index}",
                         Type=f"{OFFICE_REL}/{rel_type}", Target=target)
    return _xml(root)


def make_docx(rng: np.random.Generator, paragraphs: int = 12, picture: bool = True) -> bytes:
    document = Document()
    document.add_heading(sentence(rng, 3, 6), level=1)
    for _ in range(paragraphs):
        document.add_paragraph(paragraph(rng, int(rng.integers(2, 6))))
    table = document.add_table(rows=4, cols=3)
    for row in table.rows:
        for cell in row.cells:
            cell.text = sentence(rng, 1, 3)
    if picture:
        document.add_picture(io.BytesIO(make_png(rng, 1536)), width=Inches(1.5))
    buffer = io.BytesIO()
    document.save(buffer)
    return repack(buffer.getvalue())


def make_xlsx(rng: np.random.Generator, rows: int = 120) -> bytes:
    sheet = etree.Element(f"{{{SHEET_NS}}}worksheet", nsmap={None: SHEET_NS})
    data = etree.SubElement(sheet, f"{{{SHEET_NS}}}sheetData")
    for r in range(1, rows + 1):
        row = etree.SubElement(data, f"{{{SHEET_NS}}}row", r=str(r))
        number = etree.SubElement(row, f"{{{SHEET_NS}}}c", r=f"A{r}")
        etree.SubElement(number, f"{{{SHEET_NS}}}v").text = str(int(rng.integers(0, 100_000)))
        label = etree.SubElement(row, f"{{{SHEET_NS}}}c", r=f"B{r}", t="inlineStr")
        inline = etree.SubElement(label, f"{{{SHEET_NS}}}is")
        etree.SubElement(inline, f"{{{SHEET_NS}}}t").text = sentence(rng, 2, 6)

    workbook = etree.Element(f"{{{SHEET_NS}}}workbook", nsmap={None: SHEET_NS, "r": OFFICE_REL})
    sheets = etree.SubElement(workbook, f"{{{SHEET_NS}}}sheets")
    etree.SubElement(sheets, f"{{{SHEET_NS}}}sheet", name="Sheet1", sheetId="1",
                     attrib={f"{{{OFFICE_REL}}}id": "rId1"})

    members: List[Member] = [
        ("[Content_Types].xml", content_types({
            "/xl/workbook.xml": "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml",
            "/xl/worksheets/sheet1.xml": "application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml",
        }), zipfile.ZIP_DEFLATED),
        ("_rels/.rels", relationships([("officeDocument", "xl/workbook.xml")]), zipfile.ZIP_DEFLATED),
        ("xl/workbook.xml", _xml(workbook), zipfile.ZIP_DEFLATED),
        ("xl/_rels/workbook.xml.rels", relationships([("worksheet", "worksheets/sheet1.xml")]),
         zipfile.ZIP_DEFLATED),
        ("xl/worksheets/sheet1.xml", _xml(sheet), zipfile.ZIP_DEFLATED),
    ]
    return package(members)


def make_pptx(rng: np.random.Generator, slides: int = 3, picture: bool = True) -> bytes:
    overrides = {"/ppt/presentation.xml":
                 "application/vnd.openxmlformats-officedocument.presentationml.presentation.main+xml"}
    presentation = etree.Element(f"{{{PRES_NS}}}presentation", nsmap={"p": PRES_NS, "r": OFFICE_REL})
    slide_list = etree.SubElement(presentation, f"{{{PRES_NS}}}sldIdLst")
    members: List[Member] = []
    rels = []
    for index in range(1, slides + 1):
        etree.SubElement(slide_list, f"{{{PRES_NS}}}sldId", id=str(255 + index),
                         attrib={f"{{{OFFICE_REL}}}id": f"rId{index}"})
        rels.append(("slide", f"slides/slide{index}.xml"))
        overrides[f"/ppt/slides/slide{index}.xml"] = \
            "application/vnd.openxmlformats-officedocument.presentationml.slide+xml"
        members.append((f"ppt/slides/slide{index}.xml", _slide(rng), zipfile.ZIP_DEFLATED))
    if picture:
        members.append(("ppt/media/image1.png", make_png(rng, 1024), zipfile.ZIP_STORED))

    return package([
        ("[Content_Types].xml", content_types(overrides, media=picture), zipfile.ZIP_DEFLATED),
        ("_rels/.rels", relationships([("officeDocument", "ppt/presentation.xml")]), zipfile.ZIP_DEFLATED),
        ("ppt/presentation.xml", _xml(presentation), zipfile.ZIP_DEFLATED),
        ("ppt/_rels/presentation.xml.rels", relationships(rels), zipfile.ZIP_DEFLATED),
    ] + members)


def _slide(rng: np.random.Generator, bullets: int = 8) -> bytes:
    slide = etree.Element(f"{{{PRES_NS}}}sld", nsmap={"p": PRES_NS, "a": DRAWING_NS})
    tree = etree.SubElement(etree.SubElement(slide, f"{{{PRES_NS}}}cSld"), f"{{{PRES_NS}}}spTree")
    body = etree.SubElement(etree.SubElement(tree, f"{{{PRES_NS}}}sp"), f"{{{PRES_NS}}}txBody")
    for _ in range(bullets):
        run = etree.SubElement(etree.SubElement(body, f"{{{DRAWING_NS}}}p"), f"{{{DRAWING_NS}}}r")
        etree.SubElement(run, f"{{{DRAWING_NS}}}t").text = paragraph(rng, 2)
    return _xml(slide)
