"""Append-only hash-chained ledger of transactions and emitted events.

Each sealed block commits to its predecessor's SHA-256 digest, so any
mutation of persisted bytes is detectable by `verify_chain`. Persistence
is an append-only file of length-prefixed block records plus a sidecar
text file holding the head hash in lowercase hex.
"""

from __future__ import annotations

import enum
import hashlib
import os
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

from . import canonical
from .canonical import CanonicalError, Reader
from .clock import Clock, WallClock

ZERO_HASH = b"\x00" * 32
ADDRESS_LEN = 20
DIGEST_LEN = 32


class LedgerError(Exception):
    pass


class MalformedPayload(LedgerError):
    """Transaction payload does not decode to exactly one well-formed contract call."""


class NonceGap(LedgerError):
    """Sender nonce is not next-in-sequence (replay or out-of-order submission)."""


class NothingToSeal(LedgerError):
    """seal_block called with an empty queue and no explicit empty-block flag."""


class EventName(enum.Enum):
    ConsentGiven = 1
    ConsentChanged = 2
    ConsentWithdrawn = 3
    StudyIDCreated = 4


# Canonical event signatures: which fields each event indexes. The contract
# emits events with exactly these topics and the gas meter prices them from
# the same table.
INDEXED_FIELDS = {
    EventName.ConsentGiven: ("patient", "healthcare_provider", "record_index"),
    EventName.ConsentChanged: ("patient", "healthcare_provider"),
    EventName.ConsentWithdrawn: ("patient",),
    EventName.StudyIDCreated: ("patient", "study_id"),
}


def topic_address(addr: bytes) -> bytes:
    """Left-pad a 20-byte address to a 32-byte topic value."""
    if len(addr) != ADDRESS_LEN:
        raise ValueError("address must be 20 bytes")
    return b"\x00" * 12 + addr


def topic_u64(value: int) -> bytes:
    return b"\x00" * 24 + canonical.u64(value)


def topic_text(value: str) -> bytes:
    """Dynamic-typed topics carry the hash of the value, not the value itself."""
    return hashlib.sha256(value.encode("utf-8")).digest()


@dataclass(frozen=True)
class Transaction:
    sender_addr: bytes
    recipient_addr: bytes
    payload: bytes
    nonce: int
    submitted_at: int

    def encode(self) -> bytes:
        return b"".join(
            [
                self.sender_addr,
                self.recipient_addr,
                canonical.blob(self.payload),
                canonical.u64(self.nonce),
                canonical.u64(self.submitted_at),
            ]
        )

    @classmethod
    def decode(cls, reader: Reader) -> "Transaction":
        return cls(
            sender_addr=reader.fixed(ADDRESS_LEN),
            recipient_addr=reader.fixed(ADDRESS_LEN),
            payload=reader.blob(),
            nonce=reader.u64(),
            submitted_at=reader.u64(),
        )


@dataclass(frozen=True)
class Event:
    name: EventName
    indexed_fields: tuple  # ((field_name, 32-byte value), ...)
    data_fields: tuple  # ((field_name, bytes), ...)
    timestamp: int
    block_index: int = 0  # stamped at seal time
    tx_index: int = 0

    def __post_init__(self):
        expected = INDEXED_FIELDS[self.name]
        got = tuple(name for name, _ in self.indexed_fields)
        if got != expected:
            raise ValueError(f"{self.name.name} indexed fields {got} != {expected}")
        for _, value in self.indexed_fields:
            if len(value) != DIGEST_LEN:
                raise ValueError("indexed values must be 32 bytes")

    def indexed(self, field: str) -> bytes:
        for name, value in self.indexed_fields:
            if name == field:
                return value
        raise KeyError(field)

    def data(self, field: str) -> bytes:
        for name, value in self.data_fields:
            if name == field:
                return value
        raise KeyError(field)

    def encode(self) -> bytes:
        parts = [canonical.u8(self.name.value), canonical.u32(len(self.indexed_fields))]
        for name, value in self.indexed_fields:
            parts.append(canonical.text(name))
            parts.append(value)
        parts.append(canonical.u32(len(self.data_fields)))
        for name, value in self.data_fields:
            parts.append(canonical.text(name))
            parts.append(canonical.blob(value))
        parts.append(canonical.u64(self.block_index))
        parts.append(canonical.u64(self.tx_index))
        parts.append(canonical.u64(self.timestamp))
        return b"".join(parts)

    @classmethod
    def decode(cls, reader: Reader) -> "Event":
        name = EventName(reader.u8())
        indexed = tuple(
            (reader.text(), reader.fixed(DIGEST_LEN)) for _ in range(reader.u32())
        )
        data = tuple((reader.text(), reader.blob()) for _ in range(reader.u32()))
        return cls(
            name=name,
            indexed_fields=indexed,
            data_fields=data,
            block_index=reader.u64(),
            tx_index=reader.u64(),
            timestamp=reader.u64(),
        )


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    timestamp: int
    transactions: tuple
    events: tuple
    state_root: bytes
    block_hash: bytes

    def body_bytes(self) -> bytes:
        """Everything the block hash covers, in schema order."""
        parts = [
            canonical.u64(self.index),
            self.prev_hash,
            canonical.u64(self.timestamp),
            canonical.u32(len(self.transactions)),
        ]
        parts.extend(tx.encode() for tx in self.transactions)
        parts.append(canonical.u32(len(self.events)))
        parts.extend(ev.encode() for ev in self.events)
        parts.append(self.state_root)
        return b"".join(parts)

    def encode(self) -> bytes:
        return self.body_bytes() + self.block_hash

    @classmethod
    def decode(cls, data: bytes) -> "Block":
        reader = Reader(data)
        index = reader.u64()
        prev_hash = reader.fixed(DIGEST_LEN)
        timestamp = reader.u64()
        transactions = tuple(Transaction.decode(reader) for _ in range(reader.u32()))
        events = tuple(Event.decode(reader) for _ in range(reader.u32()))
        state_root = reader.fixed(DIGEST_LEN)
        block_hash = reader.fixed(DIGEST_LEN)
        reader.expect_end()
        return cls(index, prev_hash, timestamp, transactions, events, state_root, block_hash)


def _hash_body(body: bytes) -> bytes:
    return hashlib.sha256(body).digest()


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    first_bad_index: Optional[int]
    block_count: int
    head_hash: Optional[str]
    detail: str = ""


@dataclass(frozen=True)
class EventFilter:
    name: Optional[EventName] = None
    indexed_field_equals: Optional[tuple] = None  # (field_name, 32-byte value)
    block_range: Optional[tuple] = None  # (lo, hi) inclusive

    def matches(self, event: Event) -> bool:
        if self.name is not None and event.name != self.name:
            return False
        if self.indexed_field_equals is not None:
            field, value = self.indexed_field_equals
            try:
                if event.indexed(field) != value:
                    return False
            except KeyError:
                return False
        if self.block_range is not None:
            lo, hi = self.block_range
            if not lo <= event.block_index <= hi:
                return False
        return True


class Chain:
    """Single-writer hash chain.

    `append_transaction` and `seal_block` are serialized through one lock;
    readers take immutable snapshots of the sealed prefix and may run
    concurrently with the writer. With `path=None` the chain lives purely
    in memory (benchmarks and property sweeps); with a path every sealed
    block is persisted before `seal_block` returns.
    """

    def __init__(
        self,
        path: Optional[Path] = None,
        *,
        state_root_fn: Callable[[], bytes] = lambda: ZERO_HASH,
        payload_decoder: Optional[Callable[[bytes], object]] = None,
        clock: Optional[Clock] = None,
    ):
        self._path = Path(path) if path is not None else None
        self._state_root_fn = state_root_fn
        self._payload_decoder = payload_decoder
        self._clock = clock or WallClock()
        self._lock = threading.RLock()
        self._blocks: list = []
        self._queue: list = []  # (tx, tuple-of-events) pairs
        self._nonces: dict = {}  # sender bytes -> next expected nonce
        if self._path is not None and self._path.exists():
            self._load()

    @property
    def head_path(self) -> Optional[Path]:
        if self._path is None:
            return None
        return self._path.with_name(self._path.name + ".head")

    def _load(self) -> None:
        for record in read_chain_records(self._path):
            block = Block.decode(record)
            self._blocks.append(block)
            for tx in block.transactions:
                self._nonces[tx.sender_addr] = self._nonces.get(tx.sender_addr, 0) + 1

    # -- writer side ---------------------------------------------------

    def append_transaction(self, tx: Transaction, events: Sequence[Event] = ()) -> tuple:
        """Queue a transaction into the open block; returns its final (block_index, tx_index)."""
        if self._payload_decoder is not None:
            try:
                self._payload_decoder(tx.payload)
            except Exception as exc:
                raise MalformedPayload(str(exc)) from exc
        with self._lock:
            expected = self._nonces.get(tx.sender_addr, 0)
            if tx.nonce != expected:
                raise NonceGap(f"expected nonce {expected}, got {tx.nonce}")
            self._nonces[tx.sender_addr] = expected + 1
            self._queue.append((tx, tuple(events)))
            return (len(self._blocks), len(self._queue) - 1)

    def seal_block(self, *, allow_empty: bool = False, timestamp: Optional[int] = None) -> Block:
        """Seal the open block, persist it, and return it."""
        with self._lock:
            if not self._queue and not allow_empty:
                raise NothingToSeal("no queued transactions")
            index = len(self._blocks)
            prev_hash = self._blocks[-1].block_hash if self._blocks else ZERO_HASH
            ts = timestamp if timestamp is not None else self._clock.now()
            if self._blocks and ts < self._blocks[-1].timestamp:
                ts = self._blocks[-1].timestamp  # timestamps never decrease
            transactions = tuple(tx for tx, _ in self._queue)
            events = tuple(
                replace(ev, block_index=index, tx_index=tx_index)
                for tx_index, (_, evs) in enumerate(self._queue)
                for ev in evs
            )
            body = Block(
                index=index,
                prev_hash=prev_hash,
                timestamp=ts,
                transactions=transactions,
                events=events,
                state_root=self._state_root_fn(),
                block_hash=b"",
            )
            block = replace(body, block_hash=_hash_body(body.body_bytes()))
            self._persist(block)
            self._blocks.append(block)
            self._queue.clear()
            return block

    def _persist(self, block: Block) -> None:
        if self._path is None:
            return
        record = block.encode()
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with open(self._path, "ab") as fh:
            fh.write(canonical.u32(len(record)))
            fh.write(record)
            fh.flush()
            os.fsync(fh.fileno())
        self.head_path.write_text(block.block_hash.hex() + "\n")

    # -- reader side ---------------------------------------------------

    @property
    def blocks(self) -> tuple:
        with self._lock:
            return tuple(self._blocks)

    @property
    def head_hash(self) -> Optional[bytes]:
        with self._lock:
            return self._blocks[-1].block_hash if self._blocks else None

    def next_nonce(self, sender: bytes) -> int:
        with self._lock:
            return self._nonces.get(sender, 0)

    def get_events(
        self,
        name: Optional[EventName] = None,
        indexed_field_equals: Optional[tuple] = None,
        block_range: Optional[tuple] = None,
    ) -> list:
        """All matching events in chain order. Deterministic for a fixed chain."""
        flt = EventFilter(name, indexed_field_equals, block_range)
        return [ev for block in self.blocks for ev in block.events if flt.matches(ev)]

    def iter_transactions(self) -> Iterator[tuple]:
        """(block, tx_index, transaction) triples in chain order."""
        for block in self.blocks:
            for tx_index, tx in enumerate(block.transactions):
                yield block, tx_index, tx

    def verify_chain(self) -> VerificationReport:
        """Check both hash-linkage invariants; corruption is a report, not an error.

        When backed by a file the persisted bytes are re-read and verified,
        so on-disk tampering is caught even if the in-memory copy is clean.
        """
        if self._path is not None:
            return verify_chain_file(self._path)
        return _verify_blocks(self.blocks, block_count_known=True)


def read_chain_records(path: Path) -> Iterator[bytes]:
    """Raw length-prefixed records from a chain file; truncation raises CanonicalError."""
    data = Path(path).read_bytes()
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise CanonicalError("truncated record length")
        length = int.from_bytes(data[offset : offset + 4], "big")
        offset += 4
        if offset + length > len(data):
            raise CanonicalError("truncated record body")
        yield data[offset : offset + length]
        offset += length


def verify_chain_file(path: Path) -> VerificationReport:
    path = Path(path)
    if not path.exists():
        return VerificationReport(True, None, 0, None, "no chain file")
    blocks = []
    bad_index = None
    detail = ""
    try:
        for record in read_chain_records(path):
            blocks.append(Block.decode(record))
    except (CanonicalError, ValueError) as exc:
        # The unparseable record is the block that would sit at this index.
        bad_index = len(blocks)
        detail = f"unparseable block record: {exc}"
    report = _verify_blocks(tuple(blocks), block_count_known=bad_index is None)
    if bad_index is not None and (report.ok or report.first_bad_index > bad_index):
        return VerificationReport(False, bad_index, len(blocks), report.head_hash, detail)
    return report


def _verify_blocks(blocks: tuple, *, block_count_known: bool) -> VerificationReport:
    prev_hash = ZERO_HASH
    prev_ts = 0
    for j, block in enumerate(blocks):
        if block.index != j:
            return _bad(blocks, j, f"index {block.index} at position {j}")
        if block.prev_hash != prev_hash:
            return _bad(blocks, j, "prev_hash does not match predecessor")
        if _hash_body(block.body_bytes()) != block.block_hash:
            return _bad(blocks, j, "block_hash does not match body")
        if block.timestamp < prev_ts:
            return _bad(blocks, j, "timestamp decreased")
        prev_hash = block.block_hash
        prev_ts = block.timestamp
    head = blocks[-1].block_hash.hex() if blocks else None
    return VerificationReport(True, None, len(blocks), head)


def _bad(blocks: tuple, index: int, detail: str) -> VerificationReport:
    head = blocks[-1].block_hash.hex() if blocks else None
    return VerificationReport(False, index, len(blocks), head, detail)
