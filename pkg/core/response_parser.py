# core/response_parser.py
"""
Parses model responses: the fenced `KEY: value` blocks required by the output
contracts, lenient 1..10 ratings, and cohort-label matches.
"""
import re
from typing import Dict, List, Optional, Sequence, Tuple

_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_KEY_VALUE = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_. ]*?)\s*:\s*(.*?)\s*$")
_RANGE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(?:-|–|to)\s*(\d+(?:\.\d+)?)\s*(?:m|meters)?\s*$", re.IGNORECASE)
_SINGLE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(?:m|meters)?\s*$", re.IGNORECASE)
_SCALE_RANGE = re.compile(r"\b1\s*(?:-|–|to)\s*10\b", re.IGNORECASE)
_OUT_OF = re.compile(r"(\b(?:10|[1-9])\s*)?\bout\s+of\s+10\b", re.IGNORECASE)
_CONTRACT_LINE = re.compile(r"^[\s*#>-]*(?:rating|score)\b[^0-9\n]*?(10|[1-9])(?![\d.])", re.IGNORECASE | re.MULTILINE)
_OUT_OF_TEN = re.compile(r"(?<![\d.])(10|[1-9])\s*(?:/|out\s+of)\s*10\b", re.IGNORECASE)
_RATING = re.compile(r"\b(?:rating|score)\b[^0-9\n]{0,20}?(?<![\d.])(10|[1-9])(?![\d.])", re.IGNORECASE)
_STANDALONE = re.compile(r"(?<![\d.])(10|[1-9])(?!\d)(?!\.\d)")


def extract_block(text: str) -> Optional[str]:
    """Returns the content of the last fenced block, or None."""
    blocks = _FENCE.findall(text or "")
    return blocks[-1] if blocks else None


def parse_entries(block: str) -> List[Dict[str, str]]:
    """
    Splits a block into entries of upper-cased KEY -> value. A blank line or a
    repeated key starts a new entry.
    """
    entries: List[Dict[str, str]] = []
    current: Dict[str, str] = {}
    for raw in block.splitlines():
        if not raw.strip():
            if current:
                entries.append(current)
                current = {}
            continue
        match = _KEY_VALUE.match(raw)
        if not match:
            continue
        key = match.group(1).strip().upper().replace(" ", "_")
        if key in current:
            entries.append(current)
            current = {}
        current[key] = match.group(2)
    if current:
        entries.append(current)
    return entries


def parse_fields(text: str) -> Dict[str, str]:
    """KEY -> value from the last fenced block (all entries merged, later wins)."""
    block = extract_block(text)
    if block is None:
        return {}
    merged: Dict[str, str] = {}
    for entry in parse_entries(block):
        merged.update(entry)
    return merged


def parse_distance_range(value: str) -> Tuple[int, int]:
    """'1500-3000' -> (1500, 3000); a single number gives a degenerate range."""
    match = _RANGE.match(value or "")
    if match:
        return int(round(float(match.group(1)))), int(round(float(match.group(2))))
    match = _SINGLE.match(value or "")
    if match:
        d = int(round(float(match.group(1))))
        return d, d
    raise ValueError(f"unreadable distance range '{value}'")


def _strip_scales(text: str) -> str:
    """Blanks out scale wording such as '(1-10)' or 'out of 10' so it is never read as the rating."""
    text = _SCALE_RANGE.sub(" ", text)
    return _OUT_OF.sub(lambda m: m.group(0) if m.group(1) else " ", text)


def extract_score(text: str) -> Optional[int]:
    """
    Lenient 1..10 rating extraction; None when nothing usable is found. A line
    starting with RATING/SCORE wins, then 'n/10', then an inline rating, then
    the last standalone number. Later matches win within each form.
    """
    text = _strip_scales(text or "")
    for pattern in (_CONTRACT_LINE, _OUT_OF_TEN, _RATING, _STANDALONE):
        candidates = pattern.findall(text)
        if candidates:
            return int(candidates[-1])
    return None


def match_label(text: str, labels: Sequence[str]) -> Optional[int]:
    """
    Index of the cohort label named in a response. A `GROUP:` line wins; otherwise
    the longest label found in the text, earliest occurrence first.
    """
    lowered = [label.lower() for label in labels]
    fields = parse_fields(text)
    group = fields.get("GROUP")
    if group is None:
        line = re.search(r"^\s*GROUP\s*:\s*(.+?)\s*$", text or "", re.IGNORECASE | re.MULTILINE)
        group = line.group(1) if line else None
    if group is not None:
        wanted = group.strip().strip("'\"").lower()
        if wanted in lowered:
            return lowered.index(wanted)

    haystack = (text or "").lower()
    best: Optional[Tuple[int, int, int]] = None
    for index, label in enumerate(lowered):
        position = haystack.find(label)
        if position < 0 or not label:
            continue
        rank = (-len(label), position, index)
        if best is None or rank < best:
            best = rank
    return best[2] if best else None
