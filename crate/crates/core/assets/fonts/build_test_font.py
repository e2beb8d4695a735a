#!/usr/bin/env python3
"""Build ScTestSans.ttf, the small font bundled for tests and toy runs.

Latin glyphs are subset from DejaVu Sans (Bitstream Vera license, see
LICENSE-DejaVu.txt). A handful of CJK codepoints get synthetic block-stroke
outlines so layouts with Han characters render something distinct per
character. The family is renamed as the Vera license requires for
modified versions.

Usage: build_test_font.py [SOURCE_TTF] [OUT_TTF]
"""

import hashlib
import sys

from fontTools import subset
from fontTools.pens.ttGlyphPen import TTGlyphPen
from fontTools.ttLib import TTFont

SRC = sys.argv[1] if len(sys.argv) > 1 else "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf"
OUT = sys.argv[2] if len(sys.argv) > 2 else "ScTestSans.ttf"

LATIN = list(range(0x20, 0x7F)) + list(range(0xA0, 0x180)) + list(range(0x300, 0x370))
CJK = "你好超级字符是一种方法中文人大小上下天地日月山水好坏"
CJK_PUNCT = "，。"

opts = subset.Options()
opts.hinting = False
opts.layout_features = []
opts.name_IDs = ["*"]
opts.notdef_outline = True
font = TTFont(SRC)
sub = subset.Subsetter(opts)
sub.populate(unicodes=LATIN)
sub.subset(font)

upem = font["head"].unitsPerEm
ascent = font["hhea"].ascent
glyf = font["glyf"]
hmtx = font["hmtx"]
cmap_tables = [t for t in font["cmap"].tables if t.isUnicode()]


def rect(pen, x0, y0, x1, y1):
    # clockwise for TrueType outer contours
    pen.moveTo((x0, y0))
    pen.lineTo((x0, y1))
    pen.lineTo((x1, y1))
    pen.lineTo((x1, y0))
    pen.closePath()


def han_glyph(ch):
    """Deterministic 4x4 stroke pattern keyed by the codepoint."""
    digest = hashlib.sha256(ch.encode("utf-8")).digest()
    bits = int.from_bytes(digest[:4], "big")
    pen = TTGlyphPen(None)
    margin = upem // 10
    top = ascent - margin
    bottom = top - (upem - 2 * margin)
    left, right = margin, upem - margin
    stroke = upem // 14
    # frame line on top keeps every glyph non-empty
    rect(pen, left, top - stroke, right, top)
    span = (right - left) // 4
    vspan = (top - bottom) // 4
    for i in range(4):
        if bits >> i & 1:
            y = bottom + i * vspan
            rect(pen, left, y, right, y + stroke)
        if bits >> (i + 4) & 1:
            x = left + i * span
            rect(pen, x, bottom, x + stroke, top - stroke)
    for k in range(8, 24):
        if bits >> k & 1:
            cx = left + ((k - 8) % 4) * span
            cy = bottom + ((k - 8) // 4) * vspan
            rect(pen, cx + stroke, cy + stroke, cx + span - stroke, cy + 2 * stroke)
    return pen.glyph()


def punct_glyph(ch):
    pen = TTGlyphPen(None)
    s = upem // 8
    if ch == "，":
        rect(pen, upem // 8, 0, upem // 8 + s, s)
        rect(pen, upem // 8 + s // 2, -s, upem // 8 + s, 0)
    else:
        rect(pen, upem // 8, 0, upem // 8 + s, s)
    return pen.glyph()


order = font.getGlyphOrder()
for ch in CJK + CJK_PUNCT:
    name = "uni%04X" % ord(ch)
    if name in order:
        continue
    g = punct_glyph(ch) if ch in CJK_PUNCT else han_glyph(ch)
    order.append(name)
    glyf[name] = g
    hmtx[name] = (upem, 0)
    for t in cmap_tables:
        t.cmap[ord(ch)] = name
font.setGlyphOrder(order)
font["maxp"].numGlyphs = len(order)

for rec in font["name"].names:
    if rec.nameID in (1, 3, 4, 6, 16):
        rec.string = "ScTestSans" if rec.nameID != 3 else "ScTestSans-Regular-1"

font.save(OUT)
print(OUT, len(order), "glyphs")
