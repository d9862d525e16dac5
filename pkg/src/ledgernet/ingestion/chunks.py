"""Transaction chunk files.

A chunk file holds every transaction of one contiguous block span, one JSON
object per line, in (height, intra-block index) order.  The short field names
keep month-scale downloads compact on disk:

    {"h": height, "t": timestamp, "s": sender-or-null, "r": recipient, "v": amount}

Chunk files are the durable hand-off between the downloader and the graph
builder, and the only place directed per-transaction detail survives.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable, Iterator

from ..errors import ParseError
from ..graph import Chain, Transaction, canonicalize_address

_CHUNK_NAME = re.compile(r"^chunk_(\d+)_(\d+)\.ndjson$")
_FIELDS = ("h", "t", "s", "r", "v")


def chunk_filename(first: int, last: int) -> str:
    return f"chunk_{first}_{last}.ndjson"


def parse_chunk_filename(name: str) -> tuple[int, int] | None:
    match = _CHUNK_NAME.match(name)
    if match is None:
        return None
    return int(match.group(1)), int(match.group(2))


def encode_transaction(tx: Transaction) -> str:
    record = {
        "h": tx.block_height,
        "t": tx.timestamp,
        "s": None if tx.sender is None else tx.sender.key,
        "r": tx.recipient.key,
        "v": tx.amount,
    }
    return json.dumps(record, separators=(",", ":")) + "\n"


def decode_transaction(line: str, chain: Chain | str, *,
                       path=None, line_no: int | None = None) -> Transaction:
    def bad(message: str) -> ParseError:
        return ParseError(message, path=path, line=line_no)

    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=line_no, offset=exc.colno) from exc
    if not isinstance(record, dict) or sorted(record) != sorted(_FIELDS):
        raise bad(f"transaction record must have exactly the fields {_FIELDS}")
    height, timestamp, sender, recipient, amount = (record[f] for f in _FIELDS)
    for label, value in (("h", height), ("t", timestamp), ("v", amount)):
        if type(value) is not int:
            raise bad(f"field {label!r} must be an integer, got {value!r}")
    if sender is not None and not isinstance(sender, str):
        raise bad(f"field 's' must be a string or null, got {sender!r}")
    if not isinstance(recipient, str):
        raise bad(f"field 'r' must be a string, got {recipient!r}")
    try:
        return Transaction(
            sender=None if sender is None else canonicalize_address(sender, chain),
            recipient=canonicalize_address(recipient, chain),
            amount=amount,
            block_height=height,
            timestamp=timestamp,
        )
    except ValueError as exc:
        raise bad(str(exc)) from exc


def write_chunk(path, transactions: Iterable[Transaction]) -> int:
    """Write one chunk file; returns the number of lines written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tx in transactions:
            fh.write(encode_transaction(tx))
            count += 1
    return count


def list_chunk_files(chunk_dir) -> list[Path]:
    """Chunk files under ``chunk_dir``, sorted by block span."""
    found = []
    for entry in Path(chunk_dir).iterdir():
        span = parse_chunk_filename(entry.name)
        if span is not None:
            found.append((span, entry))
    return [entry for _, entry in sorted(found)]


def iter_chunk_transactions(chunk_dir, chain: Chain | str) -> Iterator[Transaction]:
    """Stream every downloaded transaction in block order, one chunk at a time."""
    for path in list_chunk_files(chunk_dir):
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if line.strip():
                    yield decode_transaction(line, chain, path=path, line_no=line_no)
