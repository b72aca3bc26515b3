"""SRT and WebVTT caption parsing and writing."""

import html
import re
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from ._io import read_text
from .exceptions import ParseError, ValidationError


class CaptionFormat(str, Enum):
    SRT = "srt"
    WEBVTT = "vtt"

    @classmethod
    def from_path(cls, path):
        suffix = Path(path).suffix.lower().lstrip(".")
        try:
            return cls(suffix)
        except ValueError:
            raise ValidationError(f"unknown caption extension: {path}") from None


@dataclass(frozen=True)
class CaptionCue:
    start_ms: int
    end_ms: int
    text: str

    def __post_init__(self):
        if self.start_ms < 0:
            raise ValidationError(f"cue start {self.start_ms} < 0")
        if self.end_ms < self.start_ms:
            raise ValidationError(f"cue end {self.end_ms} before start {self.start_ms}")
        if not self.text.strip():
            raise ValidationError("cue text is empty")


_ARROW = "-->"
_TAG = re.compile(r"</?[A-Za-z][^>]*>|<\d[\d:.]*>")
_SRT_TIME = re.compile(r"^(\d+):([0-5]\d):([0-5]\d)[,.](\d{3})$")
_VTT_TIME = re.compile(r"^(?:(\d+):)?([0-5]\d):([0-5]\d)\.(\d{3})$")


def _to_ms(hours, minutes, seconds, millis):
    return ((int(hours or 0) * 60 + int(minutes)) * 60 + int(seconds)) * 1000 + int(millis)


def _parse_timing(line, pattern, lineno):
    left, sep, right = line.partition(_ARROW)
    if not sep:
        raise ParseError(f"expected timing line, got {line!r}", line=lineno)
    # WebVTT cue settings follow the end timestamp
    right = right.strip().split()
    stamps = [left.strip(), right[0] if right else ""]
    values = []
    for stamp in stamps:
        m = pattern.match(stamp)
        if m is None:
            raise ParseError(f"malformed timestamp {stamp!r}", line=lineno)
        values.append(_to_ms(*m.groups()))
    if values[1] < values[0]:
        raise ParseError("cue ends before it starts", line=lineno)
    return values


def _clean(lines, unescape):
    text = "\n".join(_TAG.sub("", ln).strip() for ln in lines)
    if unescape:
        text = html.unescape(text)
    return "\n".join(ln for ln in text.split("\n") if ln.strip())


def _blocks(raw):
    """Yield (first_line_number, lines) for blank-line separated blocks."""
    block, start = [], None
    for lineno, line in enumerate(raw.splitlines(), 1):
        if line.strip():
            if start is None:
                start = lineno
            block.append(line.rstrip())
        elif block:
            yield start, block
            block, start = [], None
    if block:
        yield start, block


def _ordered(cues):
    keyed = sorted(cues, key=lambda c: (c.start_ms, c.end_ms))
    if keyed != cues:
        warnings.warn("caption cues out of order; reordered by start time", stacklevel=3)
    return keyed


def _parse_srt(raw):
    cues = []
    for start, block in _blocks(raw):
        idx = 0
        if _ARROW not in block[0]:
            if not block[0].strip().isdigit():
                raise ParseError(f"expected cue number, got {block[0]!r}", line=start)
            idx = 1
        if idx >= len(block):
            raise ParseError("cue number without timing line", line=start)
        begin, end = _parse_timing(block[idx], _SRT_TIME, start + idx)
        text = _clean(block[idx + 1:], unescape=False)
        if text:
            cues.append(CaptionCue(begin, end, text))
    return cues


def _parse_vtt(raw):
    blocks = list(_blocks(raw))
    if not blocks:
        return []
    first_line, header = blocks[0]
    if not re.match(r"^WEBVTT(?:[ \t].*)?$", header[0]):
        raise ParseError("missing WEBVTT header", line=first_line)
    cues = []
    for start, block in blocks[1:]:
        if block[0].startswith(("NOTE", "STYLE", "REGION")):
            continue
        idx = 0 if _ARROW in block[0] else 1
        if idx >= len(block) or _ARROW not in block[idx]:
            raise ParseError("cue without timing line", line=start)
        begin, end = _parse_timing(block[idx], _VTT_TIME, start + idx)
        text = _clean(block[idx + 1:], unescape=True)
        if text:
            cues.append(CaptionCue(begin, end, text))
    return cues


def parse_caption_file(raw, format):
    """Parse caption text into cues ordered by start time.

    Markup tags are stripped from cue text. Cues whose text is empty after
    stripping are dropped. Out-of-order cues are reordered with a warning.

    Parameters
    ----------
    raw : str
        Whole document.
    format : CaptionFormat or {"srt", "vtt"}

    Returns
    -------
    list of CaptionCue
    """
    fmt = CaptionFormat(format)
    if not raw.strip():
        return []
    cues = _parse_srt(raw) if fmt is CaptionFormat.SRT else _parse_vtt(raw)
    return _ordered(cues)


def read_caption_file(path):
    path = Path(path)
    try:
        return parse_caption_file(read_text(path), CaptionFormat.from_path(path))
    except ParseError as exc:
        if exc.path is None:
            raise ParseError(str(exc), path=path) from None
        raise


def _fmt_ms(ms, sep):
    seconds, millis = divmod(ms, 1000)
    minutes, seconds = divmod(seconds, 60)
    hours, minutes = divmod(minutes, 60)
    return f"{hours:02d}:{minutes:02d}:{seconds:02d}{sep}{millis:03d}"


def serialize_captions(cues, format):
    fmt = CaptionFormat(format)
    out = []
    if fmt is CaptionFormat.WEBVTT:
        out.append("WEBVTT\n")
    for n, cue in enumerate(cues, 1):
        if fmt is CaptionFormat.SRT:
            out.append(f"{n}\n{_fmt_ms(cue.start_ms, ',')} --> {_fmt_ms(cue.end_ms, ',')}\n{cue.text}\n")
        else:
            text = cue.text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            out.append(f"{_fmt_ms(cue.start_ms, '.')} --> {_fmt_ms(cue.end_ms, '.')}\n{text}\n")
    return "\n".join(out)


def cue_document(cues):
    """Concatenate cue texts in time order into one document for sentence splitting."""
    return " ".join(" ".join(c.text.split()) for c in cues)
