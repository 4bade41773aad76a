"""Event-log aggregation behind the statistics dashboard.

Everything here is recomputed from ledger events alone — no contract
state, no vault access — so the output is anonymized by construction:
records are correlated through opaque event topics and the exported
bytes carry no subject key, national id, name, or phone.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import date, datetime, timezone
from typing import Dict, List, Tuple, Union

from .contract import PURPOSES, parse_purposes
from .ledger import Chain, EventName


class EtlError(Exception):
    pass


class CorruptChain(EtlError):
    """Refusing to aggregate a chain that fails verification."""


class UnknownFormat(EtlError):
    pass


DateLike = Union[str, date]


@dataclass(frozen=True)
class ConsentStats:
    range_from: str  # ISO dates, inclusive
    range_to: str
    trend: tuple  # ((date, purpose, count), ...) sorted
    weekday_distribution: dict  # iso weekday 1..7 -> count, all keys present
    totals: dict  # purpose -> currently-active count at range end
    records: tuple  # ({registration_date, participants_count, purposes, has_study_id}, ...)

    def to_json_dict(self) -> dict:
        return {
            "range": {"from": self.range_from, "to": self.range_to},
            "trend": [
                {"date": d, "purpose": p, "count": c} for d, p, c in self.trend
            ],
            "weekday_distribution": {str(k): v for k, v in sorted(self.weekday_distribution.items())},
            "totals": dict(self.totals),
            "records": [dict(r) for r in self.records],
        }


def _as_date(value: DateLike) -> date:
    if isinstance(value, date):
        return value
    return date.fromisoformat(value)


def _day_bounds(d_from: date, d_to: date) -> Tuple[int, int]:
    lo = int(datetime(d_from.year, d_from.month, d_from.day, tzinfo=timezone.utc).timestamp())
    hi = int(datetime(d_to.year, d_to.month, d_to.day, 23, 59, 59, tzinfo=timezone.utc).timestamp())
    return lo, hi


def _utc_date(ts: int) -> date:
    return datetime.fromtimestamp(ts, tz=timezone.utc).date()


def _topic_index(topic: bytes) -> int:
    return int.from_bytes(topic[-8:], "big")


def build_stats(chain: Chain, time_range: Tuple[DateLike, DateLike]) -> ConsentStats:
    report = chain.verify_chain()
    if not report.ok:
        raise CorruptChain(f"first bad block {report.first_bad_index}: {report.detail}")

    d_from, d_to = _as_date(time_range[0]), _as_date(time_range[1])
    lo, hi = _day_bounds(d_from, d_to)

    def in_range(name):
        return [ev for ev in chain.get_events(name) if lo <= ev.timestamp <= hi]

    given = in_range(EventName.ConsentGiven)
    withdrawn = in_range(EventName.ConsentWithdrawn)
    minted = in_range(EventName.StudyIDCreated)

    trend_counts: Dict[Tuple[str, str], int] = {}
    weekday = {k: 0 for k in range(1, 8)}
    # (patient topic, record index) -> per-purpose granted/revoked as of range end
    status: Dict[Tuple[bytes, int], Dict[str, bool]] = {}

    for ev in given:
        day = _utc_date(ev.timestamp)
        purposes = parse_purposes(ev.data("purposes"))
        for p in purposes:
            key = (day.isoformat(), p)
            trend_counts[key] = trend_counts.get(key, 0) + 1
        weekday[day.isoweekday()] += 1
        record_key = (ev.indexed("patient"), _topic_index(ev.indexed("record_index")))
        status[record_key] = {p: (p in purposes) for p in PURPOSES}

    for ev in withdrawn:
        record_key = (ev.indexed("patient"), _topic_index(ev.data("record_index")))
        if record_key not in status:
            continue  # grant predates the range; nothing in-window to decrement
        for p in parse_purposes(ev.data("purposes")):
            status[record_key][p] = False

    totals = {
        p: sum(1 for s in status.values() if s.get(p)) for p in PURPOSES
    }

    sid_counts: Dict[Tuple[bytes, int], int] = {}
    for ev in minted:
        record_key = (ev.indexed("patient"), _topic_index(ev.data("record_index")))
        sid_counts[record_key] = sid_counts.get(record_key, 0) + 1

    records = []
    for ev in given:
        record_key = (ev.indexed("patient"), _topic_index(ev.indexed("record_index")))
        babies = sid_counts.get(record_key, 0)
        records.append(
            {
                "registration_date": _utc_date(ev.timestamp).isoformat(),
                "participants_count": 1 + babies,
                "purposes": list(parse_purposes(ev.data("purposes"))),
                "has_study_id": babies > 0,
            }
        )

    return ConsentStats(
        range_from=d_from.isoformat(),
        range_to=d_to.isoformat(),
        trend=tuple(sorted((d, p, c) for (d, p), c in trend_counts.items())),
        weekday_distribution=weekday,
        totals=totals,
        records=tuple(records),
    )


def export_stats(stats: ConsentStats, format: str) -> bytes:
    if format == "json":
        return (json.dumps(stats.to_json_dict(), indent=2) + "\n").encode()
    if format == "csv":
        return _export_csv(stats)
    raise UnknownFormat(format)


def _export_csv(stats: ConsentStats) -> bytes:
    """Four sections, each with its own header row, blank-line separated."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")

    writer.writerow(["date", "purpose", "count"])
    for d, p, c in stats.trend:
        writer.writerow([d, p, c])
    writer.writerow([])

    writer.writerow(["weekday", "count"])
    for k in range(1, 8):
        writer.writerow([k, stats.weekday_distribution[k]])
    writer.writerow([])

    writer.writerow(["purpose", "active_total"])
    for p in PURPOSES:
        writer.writerow([p, stats.totals[p]])
    writer.writerow([])

    writer.writerow(["registration_date", "participants_count", "purposes", "has_study_id"])
    for rec in stats.records:
        writer.writerow(
            [
                rec["registration_date"],
                rec["participants_count"],
                "|".join(rec["purposes"]),
                "true" if rec["has_study_id"] else "false",
            ]
        )
    return buf.getvalue().encode()
