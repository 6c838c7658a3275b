# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from pathlib import Path

import pandas as pd

from cclb.sim.schema import RegretLedger

FLOAT_FORMAT = "%.17g"


def write_ledger(ledger: RegretLedger, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ledger.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_ledger(path: str | Path) -> RegretLedger:
    return RegretLedger.from_frame(pd.read_csv(path, float_precision="round_trip"))
