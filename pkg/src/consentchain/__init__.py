"""Tamper-evident consent management for research data collection.

A hash-chained ledger, a deterministic consent contract with gas
accounting, an encrypted off-chain PII vault with crypto-erasure, phone
verification and pseudonymous study IDs, an HTTP service tying them
together, and event-sourced reporting.
"""

__version__ = "0.1.0"
