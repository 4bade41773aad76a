"""Single-node executor: one contract instance bound to one chain.

A mutating call runs the contract first (all preconditions checked, state
updated, events produced), then commits exactly one transaction and seals
one block carrying the same timestamp the contract saw. A failed call
appends nothing. `replay_chain` rebuilds state from the persisted file
and cross-checks every block's state root and event list, which is what
makes the chain an audit log rather than a cache.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import contract as sc
from .clock import Clock, WallClock
from .contract import Address, ContractCall, HealthcareConsent, decode_call
from .gas import GasReceipt, GasSchedule
from .identity import IdGenerator, StudyId
from .ledger import Block, Chain, Event, Transaction

# well-known deployment address of the single contract
CONTRACT_ADDRESS = Address(hashlib.sha256(b"healthcare-consent-contract").digest()[:20])


class ReplayMismatch(Exception):
    """Persisted chain disagrees with deterministic re-execution."""


class Node:
    def __init__(
        self,
        chain_path: Optional[Path],
        schedule: GasSchedule,
        id_generator: IdGenerator,
        owner: Address,
        *,
        clock: Optional[Clock] = None,
        bootstrap_genesis: bool = True,
    ):
        self.clock = clock or WallClock()
        self.owner = owner
        self.contract = HealthcareConsent(owner, schedule, id_generator)
        self.chain = Chain(
            chain_path,
            state_root_fn=self.contract.state_root,
            payload_decoder=decode_call,
            clock=self.clock,
        )
        self._write_lock = threading.Lock()
        if self.chain.blocks:
            self._replay_into_contract()
        elif bootstrap_genesis:
            # empty genesis so persisted record 0 is always block 0
            self.chain.seal_block(allow_empty=True)

    def _replay_into_contract(self) -> None:
        for block in self.chain.blocks:
            for tx in block.transactions:
                _apply_call(self.contract, Address(tx.sender_addr), decode_call(tx.payload), block.timestamp)

    # -- mutating operations (one block per call) ----------------------

    def _commit(self, caller: Address, payload: bytes, events: List[Event], ts: int) -> Block:
        tx = Transaction(
            sender_addr=caller.value,
            recipient_addr=CONTRACT_ADDRESS.value,
            payload=payload,
            nonce=self.chain.next_nonce(caller.value),
            submitted_at=ts,
        )
        self.chain.append_transaction(tx, events)
        return self.chain.seal_block(timestamp=ts)

    def submit_consent(
        self, caller: Address, subject_key: bytes, purposes, envelopes, profile: str
    ) -> Tuple[int, GasReceipt, Block]:
        with self._write_lock:
            ts = self.clock.now()
            record_index, receipt, events = self.contract.submit_consent(
                caller, subject_key, purposes, envelopes, profile, ts
            )
            payload = sc.encode_submit(subject_key, purposes, envelopes, profile)
            block = self._commit(caller, payload, events, ts)
            return record_index, receipt, block

    def withdraw_consent(
        self, caller: Address, subject_key: bytes, record_index: int, purposes
    ) -> Tuple[GasReceipt, Block]:
        with self._write_lock:
            ts = self.clock.now()
            receipt, events = self.contract.withdraw_consent(
                caller, subject_key, record_index, purposes, ts
            )
            payload = sc.encode_withdraw(subject_key, record_index, purposes)
            block = self._commit(caller, payload, events, ts)
            return receipt, block

    def create_study_id(
        self, caller: Address, subject_key: bytes, mother_id: str, baby_id: str
    ) -> Tuple[StudyId, GasReceipt, Block, bool]:
        with self._write_lock:
            ts = self.clock.now()
            sid, receipt, events, created = self.contract.create_study_id(
                caller, subject_key, mother_id, baby_id, ts
            )
            # idempotent repeats still leave an audit transaction
            payload = sc.encode_study_id(subject_key, mother_id, baby_id)
            block = self._commit(caller, payload, events, ts)
            return sid, receipt, block, created

    def set_authorized_provider(self, caller: Address, provider: Address, enabled: bool):
        with self._write_lock:
            ts = self.clock.now()
            receipt, events = self.contract.set_authorized_provider(caller, provider, enabled, ts)
            payload = sc.encode_set_provider(provider, enabled)
            block = self._commit(caller, payload, events, ts)
            return receipt, block

    # -- reads ---------------------------------------------------------

    def query_consent(self, caller: Address, subject_key: bytes):
        return self.contract.query_consent(caller, subject_key)


def _apply_call(machine: HealthcareConsent, caller: Address, call: ContractCall, now: int) -> List[Event]:
    if call.op == sc.OP_SUBMIT:
        _, _, events = machine.submit_consent(
            caller,
            call.args["subject_key"],
            call.args["purposes"],
            call.args["envelopes"],
            call.args["profile"],
            now,
        )
    elif call.op == sc.OP_WITHDRAW:
        _, events = machine.withdraw_consent(
            caller, call.args["subject_key"], call.args["record_index"], call.args["purposes"], now
        )
    elif call.op == sc.OP_STUDY_ID:
        _, _, events, _ = machine.create_study_id(
            caller, call.args["subject_key"], call.args["mother_id"], call.args["baby_id"], now
        )
    else:
        _, events = machine.set_authorized_provider(
            caller, call.args["provider"], call.args["enabled"], now
        )
    return events


def replay_chain(
    path: Path, schedule: GasSchedule, id_generator: IdGenerator, owner: Address
) -> HealthcareConsent:
    """Re-execute every persisted transaction against a fresh contract and
    verify each block's state_root and event list. Raises ReplayMismatch."""
    chain = Chain(path)
    machine = HealthcareConsent(owner, schedule, id_generator)
    for block in chain.blocks:
        produced: List[Event] = []
        for tx_index, tx in enumerate(block.transactions):
            events = _apply_call(machine, Address(tx.sender_addr), decode_call(tx.payload), block.timestamp)
            produced.extend(
                replace(ev, block_index=block.index, tx_index=tx_index) for ev in events
            )
        if tuple(produced) != block.events:
            raise ReplayMismatch(f"block {block.index}: event log diverges")
        if machine.state_root() != block.state_root:
            raise ReplayMismatch(f"block {block.index}: state root diverges")
    return machine
