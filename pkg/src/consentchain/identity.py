"""Subject verification and pseudonymous identifiers.

Phone ownership is proven with a one-time code delivered through a
pluggable sender; identifiers (mother / baby / study) are deterministic
keyed-hash truncations so they carry no trace of the plaintext identity.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import re
import secrets
import sqlite3
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

from .clock import Clock, WallClock

PHONE_RE = re.compile(r"^\+[1-9]\d{6,14}$")  # E.164

OTP_TTL_SECONDS = 300
OTP_MAX_ATTEMPTS = 5
OTP_RATE_LIMIT = 3  # requests per phone per window
OTP_RATE_WINDOW = 300


class IdentityError(Exception):
    pass


class InvalidPhone(IdentityError):
    pass


class RateLimited(IdentityError):
    pass


class UnknownChallenge(IdentityError):
    pass


class Expired(IdentityError):
    pass


class Exhausted(IdentityError):
    pass


class WrongCode(IdentityError):
    pass


class EmptyId(IdentityError):
    pass


@dataclass(frozen=True)
class OtpChallenge:
    challenge_id: str
    phone: str
    code: str
    issued_at: int
    ttl: int
    attempts_left: int


class OtpSender(Protocol):
    def send(self, phone: str, code: str) -> None: ...


class TestInboxSender:
    """Writes messages to a local file, one tab-separated line per message.

    This file IS the simulated SMS channel: it intentionally contains the
    phone number, exactly as a real text message would.
    """

    __test__ = False  # not a test case despite the name

    def __init__(self, path: Path):
        self.path = Path(path)

    def send(self, phone: str, code: str) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a") as fh:
            fh.write(f"{int(time.time())}\t{phone}\t{code}\n")


class LogOnlySender:
    """Prints a masked delivery notice; never reveals the full number."""

    def __init__(self, emit=print):
        self._emit = emit

    def send(self, phone: str, code: str) -> None:
        masked = "*" * (len(phone) - 2) + phone[-2:]
        self._emit(f"otp dispatched to {masked}")


class OtpService:
    """Challenge lifecycle backed by a small sqlite table.

    Rate limiting and attempt decrements are serialized under one lock so
    concurrent verifies cannot double-spend attempts.
    """

    def __init__(
        self,
        db: sqlite3.Connection,
        sender: OtpSender,
        *,
        clock: Optional[Clock] = None,
        ttl: int = OTP_TTL_SECONDS,
        max_attempts: int = OTP_MAX_ATTEMPTS,
    ):
        self._db = db
        self._sender = sender
        self._clock = clock or WallClock()
        self._ttl = ttl
        self._max_attempts = max_attempts
        self._lock = threading.Lock()
        with self._db:
            self._db.execute(
                "CREATE TABLE IF NOT EXISTS otp_challenges ("
                " challenge_id TEXT PRIMARY KEY, phone TEXT NOT NULL,"
                " code TEXT NOT NULL, issued_at INTEGER NOT NULL,"
                " ttl INTEGER NOT NULL, attempts_left INTEGER NOT NULL)"
            )
            self._db.execute(
                "CREATE TABLE IF NOT EXISTS otp_requests ("
                " phone TEXT NOT NULL, requested_at INTEGER NOT NULL)"
            )

    def request_otp(self, phone: str) -> str:
        if not PHONE_RE.match(phone):
            raise InvalidPhone(phone if "\n" not in phone else "malformed")
        now = self._clock.now()
        with self._lock, self._db:
            (recent,) = self._db.execute(
                "SELECT COUNT(*) FROM otp_requests WHERE phone = ? AND requested_at > ?",
                (phone, now - OTP_RATE_WINDOW),
            ).fetchone()
            if recent >= OTP_RATE_LIMIT:
                raise RateLimited(f"limit {OTP_RATE_LIMIT} per {OTP_RATE_WINDOW}s")
            self._db.execute(
                "INSERT INTO otp_requests VALUES (?, ?)", (phone, now)
            )
            challenge_id = secrets.token_hex(16)
            code = f"{secrets.randbelow(10**6):06d}"
            self._db.execute(
                "INSERT INTO otp_challenges VALUES (?, ?, ?, ?, ?, ?)",
                (challenge_id, phone, code, now, self._ttl, self._max_attempts),
            )
        self._sender.send(phone, code)
        return challenge_id

    def verify_otp(self, challenge_id: str, code: str) -> str:
        """Returns the verified phone number; the caller mints the session."""
        now = self._clock.now()
        # Mutations here must survive the raises below, so commit explicitly --
        # a `with db:` transaction context would roll the writes back on error.
        with self._lock:
            row = self._db.execute(
                "SELECT phone, code, issued_at, ttl, attempts_left"
                " FROM otp_challenges WHERE challenge_id = ?",
                (challenge_id,),
            ).fetchone()
            if row is None:
                raise UnknownChallenge("no such challenge")
            phone, expected, issued_at, ttl, attempts_left = row
            if now > issued_at + ttl:
                self._discard(challenge_id)
                raise Expired("code expired")
            if attempts_left <= 0:
                raise Exhausted("attempts exhausted")
            if not hmac.compare_digest(code, expected):
                attempts_left -= 1
                self._db.execute(
                    "UPDATE otp_challenges SET attempts_left = ? WHERE challenge_id = ?",
                    (attempts_left, challenge_id),
                )
                self._db.commit()
                if attempts_left == 0:
                    raise Exhausted("attempts exhausted")
                raise WrongCode(f"{attempts_left} attempts left")
            self._discard(challenge_id)
            return phone

    def _discard(self, challenge_id: str) -> None:
        self._db.execute(
            "DELETE FROM otp_challenges WHERE challenge_id = ?", (challenge_id,)
        )
        self._db.commit()


# -- pseudonymous identifiers ------------------------------------------


@dataclass(frozen=True)
class StudyId:
    value: str  # "NBT-" + 8 uppercase base32 chars
    mother_id: str
    baby_id: str


def _b32(digest: bytes, n: int) -> str:
    return base64.b32encode(digest).decode("ascii")[:n]


class IdGenerator:
    """Deterministic keyed-hash identifiers. Same key, same inputs, same ids."""

    def __init__(self, key: bytes):
        if len(key) < 16:
            raise ValueError("id key too short")
        self._key = key

    def gen_mother_id(self, subject_key: bytes) -> str:
        digest = hmac.new(self._key, b"mother-id\x00" + subject_key, hashlib.sha256).digest()
        return "M-" + _b32(digest, 8)

    def gen_study_id(self, mother_id: str, baby_id: str) -> StudyId:
        if not mother_id or not baby_id:
            raise EmptyId("mother_id and baby_id must be non-empty")
        material = mother_id.encode() + b"\x00" + baby_id.encode()
        digest = hmac.new(self._key, b"study-id\x00" + material, hashlib.sha256).digest()
        return StudyId("NBT-" + _b32(digest, 8), mother_id, baby_id)

    @staticmethod
    def format_baby_id(baby_number: int) -> str:
        if baby_number < 1:
            raise EmptyId("baby_number starts at 1")
        return f"B-{baby_number:04d}"
