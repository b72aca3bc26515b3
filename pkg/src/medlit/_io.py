import codecs
import hashlib
from pathlib import Path

from .exceptions import EncodingError

_FOREIGN_BOMS = (
    (codecs.BOM_UTF32_LE, "UTF-32-LE"),
    (codecs.BOM_UTF32_BE, "UTF-32-BE"),
    (codecs.BOM_UTF16_LE, "UTF-16-LE"),
    (codecs.BOM_UTF16_BE, "UTF-16-BE"),
)


def decode_utf8(data, path=None):
    """Decode ``data`` as UTF-8, tolerating a single leading UTF-8 BOM.

    A foreign BOM, or a UTF-8 BOM followed by bytes that are not UTF-8,
    raises :class:`EncodingError`.
    """
    for bom, name in _FOREIGN_BOMS:
        if data.startswith(bom):
            raise EncodingError(f"byte-order mark for {name}; expected UTF-8", path=path)
    had_bom = data.startswith(codecs.BOM_UTF8)
    if had_bom:
        data = data[len(codecs.BOM_UTF8):]
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = data[: exc.start].count(b"\n") + 1
        what = "byte-order mark with mixed encoding" if had_bom else "invalid UTF-8"
        raise EncodingError(f"{what} at byte {exc.start}", line=line, path=path) from None
    return text


def read_text(path):
    path = Path(path)
    return decode_utf8(path.read_bytes(), path=path)


def write_text(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
