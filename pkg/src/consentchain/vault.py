"""Off-chain encrypted PII store with per-subject keys.

Every subject gets one random data key; the three PII fields are sealed
under it with authenticated encryption, and only the wrapped form of the
key ever touches disk. Erasure destroys the wrapped key — in memory and
by zeroing its fixed-width slot in the key file — after which the
envelopes that remain on the append-only ledger are permanently
undecryptable.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .clock import Clock, WallClock

PII_FIELDS = ("mother_name", "national_id", "phone")
KEY_SLOT_BYTES = 64  # wrapped key is 60 bytes (12 nonce + 32 key + 16 tag), zero-padded
OPEN_ROLES = frozenset({"owner", "authorized_provider"})


class VaultError(Exception):
    pass


class SubjectErased(VaultError):
    """Data key destroyed; the ciphertext is cryptographically unrecoverable."""


class UnknownSubject(VaultError):
    pass


class EmptyField(VaultError):
    pass


class AuthFailure(VaultError):
    pass


class Unauthorized(VaultError):
    pass


def derive_master_key(secret: bytes) -> bytes:
    if not secret:
        raise VaultError("empty master secret")
    return hashlib.sha256(secret).digest()


@dataclass(frozen=True)
class CiphertextEnvelope:
    field_tag: str  # mother_name | national_id | phone
    nonce: bytes  # 12 bytes
    ciphertext: bytes
    auth_tag: bytes  # 16 bytes

    def __post_init__(self):
        if self.field_tag not in PII_FIELDS:
            raise ValueError(f"unknown field tag {self.field_tag!r}")
        if len(self.nonce) != 12 or len(self.auth_tag) != 16:
            raise ValueError("malformed envelope")


@dataclass
class VaultEntry:
    subject_key: bytes
    slot: int
    data_key_wrapped: Optional[bytes]
    erased: bool
    created_at: int
    erased_at: Optional[int] = None


@dataclass(frozen=True)
class ErasureProof:
    erased_at: int
    entry_digest: str  # hex


class Vault:
    """Directory-backed store: keys.bin (fixed slots), index.log, audit.log.

    The index is an append-only line log; replaying it restores the full
    entry table on restart, so the in-memory map is a cache, never the
    source of truth.
    """

    def __init__(self, directory: Path, master_key: bytes, *, clock: Optional[Clock] = None):
        if len(master_key) != 32:
            raise VaultError("master key must be 32 bytes")
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._master = master_key
        self._salt = hmac.new(master_key, b"subject-key-salt", hashlib.sha256).digest()
        self._clock = clock or WallClock()
        self._entries: Dict[bytes, VaultEntry] = {}
        self._table_lock = threading.Lock()
        self._subject_locks: Dict[bytes, threading.Lock] = {}
        self._load()

    @property
    def _keys_path(self) -> Path:
        return self._dir / "keys.bin"

    @property
    def _index_path(self) -> Path:
        return self._dir / "index.log"

    @property
    def _audit_path(self) -> Path:
        return self._dir / "audit.log"

    def _load(self) -> None:
        if not self._index_path.exists():
            return
        key_data = self._keys_path.read_bytes() if self._keys_path.exists() else b""
        for line in self._index_path.read_text().splitlines():
            rec = json.loads(line)
            subject_key = bytes.fromhex(rec["subject_key"])
            if rec["op"] == "create":
                slot = rec["slot"]
                raw = key_data[slot * KEY_SLOT_BYTES : (slot + 1) * KEY_SLOT_BYTES]
                wrapped = raw.rstrip(b"\x00") or None
                self._entries[subject_key] = VaultEntry(
                    subject_key=subject_key,
                    slot=slot,
                    data_key_wrapped=wrapped,
                    erased=wrapped is None,
                    created_at=rec["at"],
                )
            elif rec["op"] == "erase":
                entry = self._entries[subject_key]
                entry.data_key_wrapped = None
                entry.erased = True
                entry.erased_at = rec["at"]

    def _lock_for(self, subject_key: bytes) -> threading.Lock:
        with self._table_lock:
            return self._subject_locks.setdefault(subject_key, threading.Lock())

    def _append_index(self, record: dict) -> None:
        with open(self._index_path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _audit(self, line: str) -> None:
        with open(self._audit_path, "a") as fh:
            fh.write(f"{self._clock.now()}\t{line}\n")

    # -- subject keys --------------------------------------------------

    def subject_key_for(self, national_id: str) -> bytes:
        """Salted keyed hash; the salt never leaves this process or hits the chain."""
        if not national_id:
            raise EmptyField("national_id")
        return hmac.new(self._salt, national_id.encode("utf-8"), hashlib.sha256).digest()

    # -- sealing and opening -------------------------------------------

    def _ensure_entry(self, subject_key: bytes) -> VaultEntry:
        entry = self._entries.get(subject_key)
        if entry is not None:
            return entry
        data_key = os.urandom(32)
        nonce = os.urandom(12)
        wrapped = nonce + AESGCM(self._master).encrypt(nonce, data_key, subject_key)
        slot = len(self._entries)
        with open(self._keys_path, "ab") as fh:
            fh.write(wrapped.ljust(KEY_SLOT_BYTES, b"\x00"))
            fh.flush()
            os.fsync(fh.fileno())
        entry = VaultEntry(
            subject_key=subject_key,
            slot=slot,
            data_key_wrapped=wrapped,
            erased=False,
            created_at=self._clock.now(),
        )
        self._entries[subject_key] = entry
        self._append_index(
            {"op": "create", "subject_key": subject_key.hex(), "slot": slot, "at": entry.created_at}
        )
        return entry

    def _data_key(self, entry: VaultEntry) -> bytes:
        wrapped = entry.data_key_wrapped
        nonce, ct = wrapped[:12], wrapped[12:]
        return AESGCM(self._master).decrypt(nonce, ct, entry.subject_key)

    def seal_pii(self, subject_key: bytes, plaintext_fields: dict) -> Dict[str, CiphertextEnvelope]:
        missing = [f for f in PII_FIELDS if not plaintext_fields.get(f)]
        if missing:
            raise EmptyField(", ".join(missing))
        with self._lock_for(subject_key):
            entry = self._entries.get(subject_key)
            if entry is not None and entry.erased:
                raise SubjectErased("cannot seal for an erased subject")
            entry = self._ensure_entry(subject_key)
            data_key = self._data_key(entry)
            envelopes = {}
            for tag in PII_FIELDS:
                nonce = os.urandom(12)
                sealed = AESGCM(data_key).encrypt(
                    nonce, plaintext_fields[tag].encode("utf-8"), tag.encode() + subject_key
                )
                envelopes[tag] = CiphertextEnvelope(
                    field_tag=tag, nonce=nonce, ciphertext=sealed[:-16], auth_tag=sealed[-16:]
                )
            return envelopes

    def open_pii(self, caller_role: str, subject_key: bytes, envelopes: dict) -> Dict[str, str]:
        if caller_role not in OPEN_ROLES:
            raise Unauthorized(f"role {caller_role!r} may not decrypt")
        entry = self._entries.get(subject_key)
        if entry is None:
            raise UnknownSubject("no vault entry")
        if entry.erased:
            raise SubjectErased("data key destroyed")
        data_key = self._data_key(entry)
        fields = {}
        for tag, env in envelopes.items():
            try:
                plaintext = AESGCM(data_key).decrypt(
                    env.nonce, env.ciphertext + env.auth_tag, env.field_tag.encode() + subject_key
                )
            except InvalidTag as exc:
                raise AuthFailure(f"envelope {tag} failed authentication") from exc
            fields[tag] = plaintext.decode("utf-8")
        self._audit(f"open\trole={caller_role}\tslot={entry.slot}")
        return fields

    # -- erasure -------------------------------------------------------

    def erase_subject(self, subject_key: bytes) -> ErasureProof:
        with self._lock_for(subject_key):
            entry = self._entries.get(subject_key)
            if entry is None:
                raise UnknownSubject("no vault entry")
            if entry.erased:
                return self._proof(entry)  # idempotent
            erased_at = self._clock.now()
            # zero the slot in place so no wrapped-key bytes survive on disk
            with open(self._keys_path, "r+b") as fh:
                fh.seek(entry.slot * KEY_SLOT_BYTES)
                fh.write(b"\x00" * KEY_SLOT_BYTES)
                fh.flush()
                os.fsync(fh.fileno())
            entry.data_key_wrapped = None
            entry.erased = True
            entry.erased_at = erased_at
            self._append_index(
                {"op": "erase", "subject_key": subject_key.hex(), "slot": entry.slot, "at": erased_at}
            )
            self._audit(f"erase\tslot={entry.slot}")
            return self._proof(entry)

    @staticmethod
    def _proof(entry: VaultEntry) -> ErasureProof:
        material = entry.subject_key + b"erased" + entry.erased_at.to_bytes(8, "big")
        return ErasureProof(erased_at=entry.erased_at, entry_digest=hashlib.sha256(material).hexdigest())

    def is_erased(self, subject_key: bytes) -> bool:
        entry = self._entries.get(subject_key)
        return entry is not None and entry.erased

    def has_entry(self, subject_key: bytes) -> bool:
        return subject_key in self._entries
