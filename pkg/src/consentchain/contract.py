"""Consent contract: a deterministic condition/action state machine.

Every operation checks all its preconditions first, then applies the state
transition and emits events — a failed call leaves state byte-identical.
Mutating calls return metered gas and the events to be committed by the
ledger; the contract itself never touches persistence.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from . import canonical
from .canonical import Reader
from .gas import GasReceipt, GasSchedule, OpDescriptor
from .identity import IdGenerator, StudyId
from .ledger import Event, EventName, topic_address, topic_text, topic_u64
from .vault import CiphertextEnvelope

PURPOSES = ("research", "education")
GRANTED = "granted"
REVOKED = "revoked"

OWNER_ONLY_MESSAGE = "Only the contract owner can call this function"


class ContractError(Exception):
    pass


class Unauthorized(ContractError):
    pass


class EmptyPurposes(ContractError):
    pass


class InvalidPurpose(ContractError):
    pass


class MissingEnvelopes(ContractError):
    pass


class NoSuchRecord(ContractError):
    pass


class AlreadyWithdrawn(ContractError):
    pass


class ConsentInvalid(ContractError):
    pass


class DuplicateStudyId(ContractError):
    """Keyed-hash collision: same id value minted for a different pair."""


@dataclass(frozen=True)
class Address:
    value: bytes

    def __post_init__(self):
        if len(self.value) != 20:
            raise ValueError("address must be 20 bytes")

    def __str__(self) -> str:
        return "0x" + self.value.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Address":
        return cls(bytes.fromhex(text.removeprefix("0x")))

    @classmethod
    def from_subject_key(cls, subject_key: bytes) -> "Address":
        # subjects never hold wallets; their address is derived, low 20 bytes
        return cls(subject_key[-20:])


@dataclass
class ConsentRecord:
    patient: Address
    healthcare_provider: Address
    status: Dict[str, str]  # purpose -> granted | revoked
    mother_name_ct: Optional[CiphertextEnvelope]
    national_id_ct: Optional[CiphertextEnvelope]
    phone_ct: Optional[CiphertextEnvelope]
    timestamp: int
    subject_key: bytes
    profile: str  # full | minimal
    study_id: Optional[str] = None

    def any_granted(self) -> bool:
        return any(v == GRANTED for v in self.status.values())


@dataclass
class ContractState:
    owner: Address
    authorized_providers: Set[Address] = field(default_factory=set)
    patient_consents: Dict[bytes, List[ConsentRecord]] = field(default_factory=dict)
    patients: Set[bytes] = field(default_factory=set)
    study_ids: Dict[str, tuple] = field(default_factory=dict)  # value -> (mother_id, baby_id, subject_key)
    study_records: Dict[str, tuple] = field(default_factory=dict)  # value -> (subject_key, record_index)
    known_providers: Set[Address] = field(default_factory=set)  # ever-authorized, for slot warmth


def _purposes_text(purposes) -> bytes:
    return ",".join(p for p in PURPOSES if p in purposes).encode()


def parse_purposes(data: bytes) -> tuple:
    return tuple(p for p in data.decode().split(",") if p)


class HealthcareConsent:
    """The consent contract. One instance per deployment; single-threaded
    mutation (serialized by the ledger's writer), snapshot reads."""

    def __init__(self, owner: Address, schedule: GasSchedule, id_generator: IdGenerator):
        self.state = ContractState(owner=owner)
        self.schedule = schedule
        self.ids = id_generator

    # -- helpers -------------------------------------------------------

    def _require_authorized(self, caller: Address) -> None:
        if caller != self.state.owner and caller not in self.state.authorized_providers:
            raise Unauthorized(OWNER_ONLY_MESSAGE)

    @staticmethod
    def _check_purposes(purposes) -> tuple:
        purposes = tuple(dict.fromkeys(purposes))  # dedupe, keep order
        if not purposes:
            raise EmptyPurposes("at least one purpose required")
        unknown = [p for p in purposes if p not in PURPOSES]
        if unknown:
            raise InvalidPurpose(", ".join(unknown))
        return purposes

    def _records(self, subject_key: bytes) -> List[ConsentRecord]:
        return self.state.patient_consents.get(subject_key, [])

    # -- operations ----------------------------------------------------

    def submit_consent(
        self,
        caller: Address,
        subject_key: bytes,
        purposes,
        envelopes: Optional[Dict[str, CiphertextEnvelope]],
        profile: str,
        now: int,
    ) -> Tuple[int, GasReceipt, List[Event]]:
        # conditions
        self._require_authorized(caller)
        purposes = self._check_purposes(purposes)
        if profile not in ("full", "minimal"):
            raise ContractError(f"unknown profile {profile!r}")
        if profile == "full":
            got = set(envelopes or {})
            if got != {"mother_name", "national_id", "phone"}:
                raise MissingEnvelopes("full profile requires all three envelopes")
        elif envelopes:
            raise ContractError("minimal profile must not carry envelopes")

        # actions
        is_first = not self._records(subject_key)
        records = self.state.patient_consents.setdefault(subject_key, [])
        record_index = len(records)
        record = ConsentRecord(
            patient=Address.from_subject_key(subject_key),
            healthcare_provider=caller,
            status={p: (GRANTED if p in purposes else REVOKED) for p in PURPOSES},
            mother_name_ct=(envelopes or {}).get("mother_name"),
            national_id_ct=(envelopes or {}).get("national_id"),
            phone_ct=(envelopes or {}).get("phone"),
            timestamp=now,
            subject_key=subject_key,
            profile=profile,
        )
        records.append(record)
        self.state.patients.add(subject_key)

        receipt = self.schedule.meter(
            OpDescriptor("add", is_first_for_subject=is_first, profile=profile)
        )
        events = [
            Event(
                name=EventName.ConsentGiven,
                indexed_fields=(
                    ("patient", topic_address(record.patient.value)),
                    ("healthcare_provider", topic_address(caller.value)),
                    ("record_index", topic_u64(record_index)),
                ),
                data_fields=(
                    ("purposes", _purposes_text(purposes)),
                    ("profile", profile.encode()),
                ),
                timestamp=now,
            ),
            self._consent_changed(record, True, now),
        ]
        return record_index, receipt, events

    def query_consent(self, caller: Address, subject_key: bytes) -> Tuple[List[ConsentRecord], GasReceipt]:
        self._require_authorized(caller)
        views = [copy.deepcopy(r) for r in self._records(subject_key)]
        return views, self.schedule.meter(OpDescriptor("query"))

    def withdraw_consent(
        self,
        caller: Address,
        subject_key: bytes,
        record_index: int,
        purposes,
        now: int,
    ) -> Tuple[GasReceipt, List[Event]]:
        self._require_authorized(caller)
        purposes = self._check_purposes(purposes)
        records = self._records(subject_key)
        if not 0 <= record_index < len(records):
            raise NoSuchRecord(f"record {record_index} does not exist")
        record = records[record_index]
        if not any(record.status[p] == GRANTED for p in purposes):
            raise AlreadyWithdrawn("no listed purpose is currently granted")

        for p in purposes:
            record.status[p] = REVOKED

        # the record list is scanned from index 0 to locate the target,
        # which is what makes later records cost more to revoke
        receipt = self.schedule.meter(OpDescriptor("revoke", scan_position=record_index))
        events = [
            Event(
                name=EventName.ConsentWithdrawn,
                indexed_fields=(("patient", topic_address(record.patient.value)),),
                data_fields=(
                    ("record_index", canonical.u64(record_index)),
                    ("purposes", _purposes_text(purposes)),
                    ("timestamp", canonical.u64(now)),
                ),
                timestamp=now,
            ),
            self._consent_changed(record, False, now),
        ]
        return receipt, events

    def create_study_id(
        self,
        caller: Address,
        subject_key: bytes,
        mother_id: str,
        baby_id: str,
        now: int,
    ) -> Tuple[StudyId, GasReceipt, List[Event], bool]:
        """Returns (study_id, receipt, events, created). Repeat mints of the
        same pair are idempotent: same id back, no state change, no gas."""
        self._require_authorized(caller)
        records = self._records(subject_key)
        if not any(r.any_granted() for r in records):
            raise ConsentInvalid("no active consent for subject")

        sid = self.ids.gen_study_id(mother_id, baby_id)
        existing = self.state.study_ids.get(sid.value)
        if existing is not None:
            if existing != (mother_id, baby_id, subject_key):
                raise DuplicateStudyId(f"{sid.value} already minted for a different pair")
            receipt = GasReceipt("study_id", 0, self.schedule.profile_name, ())
            return sid, receipt, [], False

        # attach to the newest record that still has a granted purpose
        record_index = max(i for i, r in enumerate(records) if r.any_granted())
        records[record_index].study_id = sid.value
        self.state.study_ids[sid.value] = (mother_id, baby_id, subject_key)
        self.state.study_records[sid.value] = (subject_key, record_index)

        receipt = self.schedule.meter(OpDescriptor("study_id"))
        events = [
            Event(
                name=EventName.StudyIDCreated,
                indexed_fields=(
                    ("patient", topic_address(Address.from_subject_key(subject_key).value)),
                    ("study_id", topic_text(sid.value)),
                ),
                data_fields=(
                    ("study_id", sid.value.encode()),
                    ("mother_id", mother_id.encode()),
                    ("baby_id", baby_id.encode()),
                    ("record_index", canonical.u64(record_index)),
                    ("timestamp", canonical.u64(now)),
                ),
                timestamp=now,
            )
        ]
        return sid, receipt, events, True

    def set_authorized_provider(
        self, caller: Address, provider: Address, enabled: bool, now: int
    ) -> Tuple[GasReceipt, List[Event]]:
        if caller != self.state.owner:
            raise Unauthorized(OWNER_ONLY_MESSAGE)
        first_time = provider not in self.state.known_providers
        self.state.known_providers.add(provider)
        if enabled:
            self.state.authorized_providers.add(provider)
        else:
            self.state.authorized_providers.discard(provider)
        receipt = self.schedule.meter(
            OpDescriptor("set_provider", is_first_for_subject=first_time)
        )
        return receipt, []

    @staticmethod
    def _consent_changed(record: ConsentRecord, is_consent_given: bool, now: int) -> Event:
        # exactly four parameters: patient, healthcareProvider, isConsentGiven, timestamp
        return Event(
            name=EventName.ConsentChanged,
            indexed_fields=(
                ("patient", topic_address(record.patient.value)),
                ("healthcare_provider", topic_address(record.healthcare_provider.value)),
            ),
            data_fields=(
                ("is_consent_given", b"\x01" if is_consent_given else b"\x00"),
                ("timestamp", canonical.u64(now)),
            ),
            timestamp=now,
        )

    # -- read-only views used by the service ---------------------------

    def consent_summary(self, subject_key: bytes) -> dict:
        """Per-purpose any-granted summary for the delivery-room question."""
        records = self._records(subject_key)
        purposes = {
            p: (GRANTED if any(r.status[p] == GRANTED for r in records) else REVOKED)
            for p in PURPOSES
        }
        return {"active": any(v == GRANTED for v in purposes.values()), "purposes": purposes}

    def all_revoked(self, subject_key: bytes) -> bool:
        records = self._records(subject_key)
        return bool(records) and not any(r.any_granted() for r in records)

    def study_id_allows_media(self, study_id_value: str) -> Optional[bool]:
        """None if unknown; else whether the linked record grants research."""
        linked = self.state.study_records.get(study_id_value)
        if linked is None:
            return None
        subject_key, record_index = linked
        record = self.state.patient_consents[subject_key][record_index]
        return record.status["research"] == GRANTED

    def status_map(self) -> dict:
        """(subject_key hex, record_index) -> status copy; the bisimulation target."""
        return {
            (k.hex(), i): dict(r.status)
            for k, records in self.state.patient_consents.items()
            for i, r in enumerate(records)
        }

    # -- state digest ---------------------------------------------------

    def state_root(self) -> bytes:
        h = hashlib.sha256()
        st = self.state
        h.update(st.owner.value)
        for addr in sorted(st.authorized_providers, key=lambda a: a.value):
            h.update(addr.value)
        for subject_key in sorted(st.patient_consents):
            h.update(subject_key)
            for record in st.patient_consents[subject_key]:
                h.update(record.patient.value)
                h.update(record.healthcare_provider.value)
                for p in PURPOSES:
                    h.update(p.encode() + b"=" + record.status[p].encode())
                for env in (record.mother_name_ct, record.national_id_ct, record.phone_ct):
                    if env is None:
                        h.update(b"\x00")
                    else:
                        h.update(b"\x01" + env.nonce + canonical.blob(env.ciphertext) + env.auth_tag)
                h.update(canonical.u64(record.timestamp))
                h.update(record.profile.encode())
                h.update((record.study_id or "").encode() + b"\x00")
        for value in sorted(st.study_ids):
            mother_id, baby_id, subject_key = st.study_ids[value]
            h.update(value.encode() + b"\x00" + mother_id.encode() + b"\x00" + baby_id.encode())
            h.update(subject_key)
            linked_key, record_index = st.study_records[value]
            h.update(linked_key + canonical.u64(record_index))
        return h.digest()


# -- call payload encoding ---------------------------------------------
#
# Transactions carry exactly one contract call encoded as:
#   op tag byte ‖ canonical fields in declared order
# Documented in the README so a replay can decode any persisted chain.

OP_SUBMIT = 1
OP_WITHDRAW = 2
OP_STUDY_ID = 3
OP_SET_PROVIDER = 4

_PROFILE_CODES = {"full": 1, "minimal": 2}
_PROFILE_NAMES = {v: k for k, v in _PROFILE_CODES.items()}


@dataclass(frozen=True)
class ContractCall:
    op: int
    args: dict


def _encode_envelope(env: CiphertextEnvelope) -> bytes:
    return (
        canonical.text(env.field_tag)
        + env.nonce
        + canonical.blob(env.ciphertext)
        + env.auth_tag
    )


def _decode_envelope(reader: Reader) -> CiphertextEnvelope:
    return CiphertextEnvelope(
        field_tag=reader.text(),
        nonce=reader.fixed(12),
        ciphertext=reader.blob(),
        auth_tag=reader.fixed(16),
    )


def _encode_purposes(purposes) -> bytes:
    parts = [canonical.u8(len(purposes))]
    parts.extend(canonical.text(p) for p in purposes)
    return b"".join(parts)


def encode_submit(subject_key: bytes, purposes, envelopes, profile: str) -> bytes:
    parts = [canonical.u8(OP_SUBMIT), subject_key, _encode_purposes(purposes)]
    parts.append(canonical.u8(_PROFILE_CODES[profile]))
    envs = [envelopes[t] for t in ("mother_name", "national_id", "phone")] if envelopes else []
    parts.append(canonical.u8(len(envs)))
    parts.extend(_encode_envelope(e) for e in envs)
    return b"".join(parts)


def encode_withdraw(subject_key: bytes, record_index: int, purposes) -> bytes:
    return (
        canonical.u8(OP_WITHDRAW)
        + subject_key
        + canonical.u64(record_index)
        + _encode_purposes(purposes)
    )


def encode_study_id(subject_key: bytes, mother_id: str, baby_id: str) -> bytes:
    return (
        canonical.u8(OP_STUDY_ID)
        + subject_key
        + canonical.text(mother_id)
        + canonical.text(baby_id)
    )


def encode_set_provider(provider: Address, enabled: bool) -> bytes:
    return canonical.u8(OP_SET_PROVIDER) + provider.value + canonical.u8(1 if enabled else 0)


def decode_call(payload: bytes) -> ContractCall:
    reader = Reader(payload)
    op = reader.u8()
    if op == OP_SUBMIT:
        subject_key = reader.fixed(32)
        purposes = tuple(reader.text() for _ in range(reader.u8()))
        profile = _PROFILE_NAMES[reader.u8()]
        envelopes = {e.field_tag: e for e in (_decode_envelope(reader) for _ in range(reader.u8()))}
        args = {
            "subject_key": subject_key,
            "purposes": purposes,
            "profile": profile,
            "envelopes": envelopes or None,
        }
    elif op == OP_WITHDRAW:
        args = {
            "subject_key": reader.fixed(32),
            "record_index": reader.u64(),
            "purposes": tuple(reader.text() for _ in range(reader.u8())),
        }
    elif op == OP_STUDY_ID:
        args = {
            "subject_key": reader.fixed(32),
            "mother_id": reader.text(),
            "baby_id": reader.text(),
        }
    elif op == OP_SET_PROVIDER:
        args = {"provider": Address(reader.fixed(20)), "enabled": reader.u8() == 1}
    else:
        raise canonical.CanonicalError(f"unknown op tag {op}")
    reader.expect_end()
    return ContractCall(op=op, args=args)
