"""Stave assignment, staff positions and clef-based pitch names.

Staff position counts half staff-spaces upward from the bottom line: lines
are even (0, 2, ..., 8), spaces odd, and the ledger region continues past
both ends.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import InvalidInputError, UnassignableError
from .geometry import BBox, PixelMask

LETTERS = "CDEFGAB"

# (letter index in C..B, octave) of the bottom staff line
CLEF_ANCHORS = {
    "treble": (2, 4),  # E4
    "bass": (4, 2),  # G2
    "alto": (3, 3),  # F3
}

_CLEF_PATTERNS = [
    (re.compile(r"^(g-?clef|clef-?g)", re.I), "treble"),
    (re.compile(r"^(f-?clef|clef-?f)", re.I), "bass"),
    (re.compile(r"^(c-?clef|clef-?c)", re.I), "alto"),
]


@dataclass
class DetectedSymbol:
    category: str
    score: float
    bbox: BBox
    mask: PixelMask | None = None

    def __post_init__(self):
        if not isinstance(self.category, str) or not self.category:
            raise InvalidInputError("symbol category must be a non-empty string")
        if not 0.0 <= self.score <= 1.0:
            raise InvalidInputError(f"score {self.score} outside [0, 1]")
        if not isinstance(self.bbox, BBox):
            self.bbox = BBox.checked(*self.bbox)

    @property
    def center_y(self) -> float:
        return (self.bbox.y_min + self.bbox.y_max) / 2


def is_notehead(category: str) -> bool:
    return "notehead" in category.lower()


def clef_of(category: str):
    """Clef name for a clef category (``gClef``, ``f-clef``, ``clefC`` ...), else None."""
    for pat, clef in _CLEF_PATTERNS:
        if pat.match(category):
            return clef
    return None


def stave_distance(y: float, staff) -> float:
    if staff.top_y <= y <= staff.bottom_y:
        return 0.0
    return min(abs(y - staff.top_y), abs(y - staff.bottom_y))


def assign_stave(sym: DetectedSymbol, staves) -> int:
    """Index of the stave nearest to the symbol's vertical box centre.

    Ties go to the upper stave.  A notehead that sits closer to the next
    stave than to its own is given the nearer one; there is no attempt to
    correct for that.
    """
    if not staves:
        raise UnassignableError("no staves to assign to")
    y = sym.center_y
    best, best_d = 0, None
    for i, s in enumerate(staves):
        d = stave_distance(y, s)
        if best_d is None or d < best_d:
            best, best_d = i, d
    return best


def staff_position(sym: DetectedSymbol, staff) -> int:
    # round() ties to even, i.e. toward the nearer line
    return int(round(2 * (staff.bottom_y - sym.center_y) / staff.spacing))


def position_to_pitch(position: int, clef: str) -> str:
    """Scientific pitch name, e.g. ``position_to_pitch(4, "treble") == "B4"``."""
    try:
        letter, octave = CLEF_ANCHORS[clef]
    except KeyError:
        raise InvalidInputError(f"unknown clef {clef!r}; expected one of {sorted(CLEF_ANCHORS)}") from None
    step = octave * 7 + letter + int(position)
    return f"{LETTERS[step % 7]}{step // 7}"


@dataclass
class PitchedSymbol:
    symbol: DetectedSymbol
    stave: int
    staff_position: int
    pitch: str | None = None


@dataclass
class StaveStream:
    index: int
    clef: str
    symbols: list = field(default_factory=list)


@dataclass
class SemanticStream:
    staves: list = field(default_factory=list)
    unassigned: list = field(default_factory=list)

    def symbol_count(self) -> int:
        return sum(len(s.symbols) for s in self.staves) + len(self.unassigned)


def _reading_order(sym):
    return sym.bbox.x_min, sym.bbox.y_min


def build_semantic_stream(symbols, staves, clef_policy: str = "treble") -> SemanticStream:
    """Group symbols by stave in reading order and name notehead pitches.

    ``clef_policy`` is a clef name (``treble``, ``bass``, ``alto``) applied to
    every stave, or ``detect``: the leftmost clef symbol on each stave sets
    its clef, treble when there is none.
    """
    if clef_policy != "detect" and clef_policy not in CLEF_ANCHORS:
        raise InvalidInputError(f"unknown clef policy {clef_policy!r}")
    symbols = list(symbols)
    if not staves:
        return SemanticStream([], sorted(symbols, key=_reading_order))
    buckets = [[] for _ in staves]
    for sym in symbols:
        buckets[assign_stave(sym, staves)].append(sym)
    out = SemanticStream()
    for i, (staff, members) in enumerate(zip(staves, buckets)):
        members.sort(key=_reading_order)
        clef = clef_policy
        if clef_policy == "detect":
            clefs = (clef_of(s.category) for s in members)
            clef = next((c for c in clefs if c), "treble")
        stream = StaveStream(i, clef)
        for sym in members:
            pos = staff_position(sym, staff)
            name = position_to_pitch(pos, clef) if is_notehead(sym.category) else None
            stream.symbols.append(PitchedSymbol(sym, i, pos, name))
        out.staves.append(stream)
    return out


def _symbol_doc(sym: DetectedSymbol) -> dict:
    return {"category": sym.category, "score": sym.score, "bbox": list(sym.bbox.xywh())}


def semantic_document(stream: SemanticStream) -> dict:
    """The ``semantic.json`` document, keys in documented order."""
    staves = []
    for st in stream.staves:
        items = []
        for ps in st.symbols:
            d = _symbol_doc(ps.symbol)
            d["staff_position"] = ps.staff_position
            if ps.pitch is not None:
                d["pitch"] = ps.pitch
            items.append(d)
        staves.append({"index": st.index, "clef": st.clef, "symbols": items})
    return {"staves": staves, "unassigned": [_symbol_doc(s) for s in stream.unassigned]}
