# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from .environment import expected_cost, observe, regret_increment, sample_action, violation_check
from .ledger import read_ledger, write_ledger
from .schema import Environment, LedgerRecord, RegretLedger

__all__ = [
    "Environment",
    "LedgerRecord",
    "RegretLedger",
    "expected_cost",
    "observe",
    "read_ledger",
    "regret_increment",
    "sample_action",
    "violation_check",
    "write_ledger",
]
