"""Header and line helpers shared by the text file formats."""

from __future__ import annotations

from collections.abc import Sequence

from .errors import FormatError


def parse_header(line: str, magic: str, keys: Sequence[str], path) -> dict[str, int]:
    parts = line.split()
    if " ".join(parts[:2]) != magic:
        raise FormatError(f"expected header starting with {magic!r}", 1, path)
    fields = {}
    for token in parts[2:]:
        key, sep, value = token.partition("=")
        if not sep or key not in keys:
            raise FormatError(f"unexpected header field {token!r}", 1, path)
        try:
            fields[key] = int(value)
        except ValueError:
            raise FormatError(f"header field {key} is not an integer: {value!r}", 1, path) from None
    missing = [k for k in keys if k not in fields]
    if missing:
        raise FormatError(f"header missing {', '.join(missing)}", 1, path)
    return fields


def body_lines(text: str):
    """Yield ``(line_number, tokens)`` for non-blank lines after the header."""
    for no, line in enumerate(text.splitlines()[1:], start=2):
        if line.strip() and not line.lstrip().startswith("#"):
            yield no, line.split()
