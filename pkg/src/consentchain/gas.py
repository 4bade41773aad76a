"""Parametric gas accounting.

Every contract operation is priced from a small table of micro-costs
(`GasSchedule`) applied to an operation descriptor. Gas here is pure
accounting — there is no fee market and nothing ever runs out of gas.

The shipped profile ``newborntime-v1`` is the stored solution of a linear
system over published per-operation totals; `calibrate` re-derives it and
refuses mutually inconsistent targets.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class GasError(Exception):
    pass


class UnknownKind(GasError):
    pass


class Inconsistent(GasError):
    """No parameter assignment reproduces all calibration targets within tolerance."""


# Storage words reserved per encrypted PII field (32-byte words covering the
# envelope: 12-byte nonce + ciphertext + 16-byte tag). A full-profile record
# carries all three envelopes; a minimal record carries none.
ENVELOPE_WORDS = {"mother_name": 6, "national_id": 4, "phone": 4}
FULL_PROFILE_WORDS = sum(ENVELOPE_WORDS.values())

# Events emitted per operation kind: list of indexed-topic counts.
# add      -> ConsentGiven(3 indexed) + ConsentChanged(2 indexed)
# revoke   -> ConsentWithdrawn(1 indexed) + ConsentChanged(2 indexed)
# study_id -> StudyIDCreated(2 indexed)
_EVENT_TOPICS = {
    "add": (3, 2),
    "revoke": (1, 2),
    "study_id": (2,),
    "query": (),
    "set_provider": (),
}

# Storage-slot writes per kind as (cold, warm) counts. An add always writes
# three fresh record slots (cold) plus one per-subject bookkeeping slot that
# is cold on the subject's first record and warm afterwards — that one slot
# is the entire first-vs-subsequent premium.
_RECORD_SLOTS = 3

PARAM_NAMES = (
    "tx_base",
    "slot_write_cold",
    "slot_write_warm",
    "per_envelope_word",
    "event_base",
    "event_per_indexed",
    "scan_per_record",
)

DEFAULT_PINS = {"tx_base": 21000, "slot_write_cold": 20000, "slot_write_warm": 5000}


@dataclass(frozen=True)
class OpDescriptor:
    kind: str  # add | query | revoke | study_id | set_provider
    is_first_for_subject: bool = False
    profile: str = "full"  # full | minimal
    scan_position: int = 0
    n_envelopes: Optional[int] = None  # validated against profile when given
    n_events: Optional[int] = None  # validated against kind when given

    def counts(self) -> tuple:
        """Coefficient row over PARAM_NAMES: how many of each micro-cost this op incurs."""
        if self.kind not in _EVENT_TOPICS:
            raise UnknownKind(self.kind)
        topics = _EVENT_TOPICS[self.kind]
        if self.n_events is not None and self.n_events != len(topics):
            raise ValueError(f"{self.kind} emits {len(topics)} events, descriptor says {self.n_events}")
        if self.kind == "query":
            return (0, 0, 0, 0, 0, 0, 0)  # read-only: free
        if self.kind == "add":
            words = FULL_PROFILE_WORDS if self.profile == "full" else 0
            envelopes = 3 if self.profile == "full" else 0
            if self.n_envelopes is not None and self.n_envelopes != envelopes:
                raise ValueError(f"profile {self.profile} carries {envelopes} envelopes")
            cold = _RECORD_SLOTS + (1 if self.is_first_for_subject else 0)
            warm = 0 if self.is_first_for_subject else 1
            return (1, cold, warm, words, len(topics), sum(topics), 0)
        if self.kind == "revoke":
            return (1, 0, 1, 0, len(topics), sum(topics), self.scan_position)
        if self.kind == "study_id":
            # one fresh registry slot + one warm record-attachment slot
            return (1, 1, 1, 0, len(topics), sum(topics), 0)
        # set_provider: one bookkeeping slot, cold on first enable
        return (1, 1 if self.is_first_for_subject else 0, 0 if self.is_first_for_subject else 1, 0, 0, 0, 0)


@dataclass(frozen=True)
class GasReceipt:
    op_name: str
    gas_used: int
    schedule: str  # profile_name
    breakdown: tuple  # ((component, units), ...)


@dataclass(frozen=True)
class GasSchedule:
    tx_base: int
    slot_write_cold: int
    slot_write_warm: int
    per_envelope_word: int
    event_base: int
    event_per_indexed: int
    scan_per_record: int
    profile_name: str = "unnamed"

    def __post_init__(self):
        for name in PARAM_NAMES:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.scan_per_record <= 0:
            raise ValueError("scan_per_record must be > 0")

    def params(self) -> tuple:
        return tuple(getattr(self, name) for name in PARAM_NAMES)

    def meter(self, descriptor: OpDescriptor) -> GasReceipt:
        counts = descriptor.counts()
        breakdown = tuple(
            (name, count * price)
            for name, count, price in zip(PARAM_NAMES, counts, self.params())
            if count
        )
        return GasReceipt(
            op_name=descriptor.kind,
            gas_used=sum(units for _, units in breakdown),
            schedule=self.profile_name,
            breakdown=breakdown,
        )

    def to_text(self) -> str:
        lines = [f"profile_name = {self.profile_name}"]
        lines += [f"{name} = {getattr(self, name)}" for name in PARAM_NAMES]
        return "\n".join(lines) + "\n"


def meter(schedule: GasSchedule, descriptor: OpDescriptor) -> GasReceipt:
    return schedule.meter(descriptor)


def _tolerance(target: int) -> float:
    return max(1.0, 0.001 * abs(target))


def calibrate(
    targets: Sequence[tuple],
    *,
    pins: Optional[dict] = None,
    profile_name: str = "calibrated",
) -> GasSchedule:
    """Solve schedule parameters from (descriptor, observed_gas) pairs.

    Parameters named in `pins` are held fixed; the rest are fitted by least
    squares and rounded to integers. The solution must reproduce every target
    within ±0.1% (floor of one gas unit) or the targets are `Inconsistent`.
    """
    pins = DEFAULT_PINS if pins is None else pins
    for name in pins:
        if name not in PARAM_NAMES:
            raise ValueError(f"unknown parameter {name!r}")
    free = [name for name in PARAM_NAMES if name not in pins]
    rows = []
    residuals = []
    for descriptor, gas in targets:
        counts = dict(zip(PARAM_NAMES, descriptor.counts()))
        pinned_part = sum(counts[name] * pins[name] for name in pins)
        rows.append([counts[name] for name in free])
        residuals.append(gas - pinned_part)

    values = dict(pins)
    if free:
        matrix = np.array(rows, dtype=float)
        rhs = np.array(residuals, dtype=float)
        solution, *_ = np.linalg.lstsq(matrix, rhs, rcond=None)
        for name, value in zip(free, solution):
            values[name] = int(round(value))
    if values.get("scan_per_record", 1) < 1:
        # unconstrained by the targets; any positive value satisfies them
        values["scan_per_record"] = 1
    schedule = GasSchedule(profile_name=profile_name, **values)

    for descriptor, gas in targets:
        got = schedule.meter(descriptor).gas_used
        if abs(got - gas) > _tolerance(gas):
            raise Inconsistent(
                f"{descriptor.kind}: metered {got}, target {gas} (outside ±0.1%)"
            )
    return schedule


# -- profile files -----------------------------------------------------


def parse_profile(text: str) -> GasSchedule:
    values: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "profile_name":
            values[key] = value
        elif key in PARAM_NAMES:
            values[key] = int(value)
        else:
            raise GasError(f"unknown profile key {key!r}")
    missing = [name for name in PARAM_NAMES if name not in values]
    if missing:
        raise GasError(f"profile missing {', '.join(missing)}")
    return GasSchedule(**values)


def load_profile(name: str) -> GasSchedule:
    """Load a schedule by profile name (bundled) or by path to a .gas file."""
    path = Path(name)
    if path.suffix == ".gas" and path.exists():
        return parse_profile(path.read_text())
    resource = importlib.resources.files(__package__) / "profiles" / f"{name}.gas"
    try:
        text = resource.read_text()
    except FileNotFoundError:
        raise GasError(f"no gas profile named {name!r}") from None
    schedule = parse_profile(text)
    if schedule.profile_name != name:
        raise GasError(f"profile file {name}.gas declares name {schedule.profile_name!r}")
    return schedule
