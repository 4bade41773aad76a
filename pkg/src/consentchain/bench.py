"""Benchmark harness: gas per operation, batch scalability, and the
minimal-vs-full record comparison.

Gas columns are deterministic and reproduce the shipped profile exactly;
wall-clock columns are environment measurements — recorded in the CSV,
never asserted. Each run builds a fresh in-memory stack so batches cannot
contaminate each other.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from .clock import CounterClock
from .contract import Address
from .gas import GasSchedule, load_profile
from .identity import IdGenerator
from .node import Node
from .vault import CiphertextEnvelope

BATCH_SIZES = (10, 50, 100, 500)

_OWNER = Address(b"\x0b" * 20)
_BENCH_ID_KEY = b"bench-id-key-0123456789abcdef---"


@dataclass(frozen=True)
class GasRow:
    op: str
    gas: int
    wall_ms: float


@dataclass(frozen=True)
class ScaleRow:
    n: int
    total_gas: int
    wall_ms: float
    cumulative_wall_ms: float
    gas_per_record: float
    records_per_sec: float


@dataclass(frozen=True)
class MinimizationResult:
    full_gas: int
    minimal_gas: int
    saving: int


def _fresh_node(schedule: GasSchedule) -> Node:
    return Node(
        None,
        schedule,
        IdGenerator(_BENCH_ID_KEY),
        _OWNER,
        clock=CounterClock(),
        bootstrap_genesis=False,
    )


def _fake_envelopes() -> dict:
    # synthetic ciphertext of realistic field sizes; the contract only stores it
    sizes = {"mother_name": 24, "national_id": 11, "phone": 12}
    return {
        tag: CiphertextEnvelope(
            field_tag=tag, nonce=os.urandom(12), ciphertext=os.urandom(n), auth_tag=os.urandom(16)
        )
        for tag, n in sizes.items()
    }


def _subject(i: int) -> bytes:
    return i.to_bytes(4, "big") * 8


def run_gas_bench(iterations: int = 4, schedule: Optional[GasSchedule] = None) -> List[GasRow]:
    """1 first add, `iterations` subsequent adds, 1 query, then a revoke at
    every scan position — one row per executed operation."""
    schedule = schedule or load_profile("newborntime-v1")
    node = _fresh_node(schedule)
    subject = _subject(1)
    rows = []

    def timed(op: str, fn) -> object:
        start = time.perf_counter()
        result = fn()
        rows.append(GasRow(op, _gas_of(result), (time.perf_counter() - start) * 1000))
        return result

    timed("add_first_full", lambda: node.submit_consent(
        _OWNER, subject, ("research", "education"), _fake_envelopes(), "full"))
    for i in range(iterations):
        timed("add_subsequent_full", lambda: node.submit_consent(
            _OWNER, subject, ("research", "education"), _fake_envelopes(), "full"))
    timed("query", lambda: node.query_consent(_OWNER, subject))
    for i in range(iterations + 1):
        timed(f"revoke_scan_{i}", lambda i=i: node.withdraw_consent(
            _OWNER, subject, i, ("research", "education")))
    return rows


def _gas_of(result) -> int:
    for part in result:
        if hasattr(part, "gas_used"):
            return part.gas_used
    raise TypeError("no gas receipt in result")


def run_scalability(
    batch_sizes=BATCH_SIZES, schedule: Optional[GasSchedule] = None
) -> List[ScaleRow]:
    """Fresh stack per batch; one uncounted warm-up add so every metered add
    is a subsequent add — which is what makes total gas exactly linear."""
    schedule = schedule or load_profile("newborntime-v1")
    rows = []
    cumulative = 0.0
    for n in batch_sizes:
        node = _fresh_node(schedule)
        subject = _subject(n)
        node.submit_consent(_OWNER, subject, ("research",), _fake_envelopes(), "full")  # warm-up
        total = 0
        start = time.perf_counter()
        for _ in range(n):
            _, receipt, _ = node.submit_consent(
                _OWNER, subject, ("research", "education"), _fake_envelopes(), "full"
            )
            total += receipt.gas_used
        wall_ms = (time.perf_counter() - start) * 1000
        cumulative += wall_ms
        rows.append(
            ScaleRow(
                n=n,
                total_gas=total,
                wall_ms=wall_ms,
                cumulative_wall_ms=cumulative,
                gas_per_record=total / n,
                records_per_sec=n / (wall_ms / 1000) if wall_ms > 0 else float("inf"),
            )
        )
    return rows


def run_minimization(schedule: Optional[GasSchedule] = None) -> MinimizationResult:
    schedule = schedule or load_profile("newborntime-v1")
    node = _fresh_node(schedule)
    subject = _subject(7)
    node.submit_consent(_OWNER, subject, ("research",), _fake_envelopes(), "full")  # warm-up
    _, full_receipt, _ = node.submit_consent(
        _OWNER, subject, ("research", "education"), _fake_envelopes(), "full"
    )
    _, minimal_receipt, _ = node.submit_consent(
        _OWNER, subject, ("research", "education"), None, "minimal"
    )
    return MinimizationResult(
        full_gas=full_receipt.gas_used,
        minimal_gas=minimal_receipt.gas_used,
        saving=full_receipt.gas_used - minimal_receipt.gas_used,
    )


# -- CSV output (columns documented in the README) ---------------------


def write_gas_csv(rows: List[GasRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["op", "gas", "wall_ms"])
        for r in rows:
            writer.writerow([r.op, r.gas, f"{r.wall_ms:.3f}"])


def write_scale_csv(rows: List[ScaleRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["n", "total_gas", "wall_ms", "cumulative_wall_ms", "gas_per_record", "records_per_sec"]
        )
        for r in rows:
            writer.writerow(
                [r.n, r.total_gas, f"{r.wall_ms:.3f}", f"{r.cumulative_wall_ms:.3f}",
                 f"{r.gas_per_record:.1f}", f"{r.records_per_sec:.1f}"]
            )


def write_minimize_csv(result: MinimizationResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["profile", "gas"])
        writer.writerow(["full", result.full_gas])
        writer.writerow(["minimal", result.minimal_gas])
        writer.writerow(["saving", result.saving])
