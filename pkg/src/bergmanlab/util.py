"""Shared infrastructure: seeded streams, deterministic parallel maps, canonical
serialization and the error taxonomy used by the CLI exit codes."""
from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, Sequence

import numpy as np


class SchemaError(ValueError):
    """Malformed configuration or input document (CLI exit code 2)."""


class InvariantFailure(AssertionError):
    """An asserted invariant failed; carries a witness (CLI exit code 1)."""

    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}


class BudgetError(RuntimeError):
    """Declared node/time budget exhausted (CLI exit code 3)."""


class GramIllConditioned(RuntimeError):
    """Gram matrix condition number exceeds the configured threshold."""

    def __init__(self, message: str, witness: dict | None = None):
        super().__init__(message)
        self.witness = witness or {}


def derive_seed(root_seed: int, *labels: Any) -> int:
    """Stable 64-bit seed derived from a root seed and a label path.

    Independent of process, platform and thread schedule; identical labels
    always yield identical streams.
    """
    text = json.dumps([int(root_seed), *[str(l) for l in labels]])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(root_seed: int, *labels: Any) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(root_seed, *labels)))


def det_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map fn over items, collecting results in index order.

    Each item must be an independent pure task (own seed, no shared mutable
    state), so the result list is identical for any thread count.
    """
    if threads is None:
        threads = 1
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _canon(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _canon(obj[k]) for k in sorted(obj, key=str)}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):  # before int: bool subclasses int
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(repr(v))  # shortest round-trip repr
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_canon(v) for v in obj.tolist()]
    if isinstance(obj, complex):
        return {"re": _canon(obj.real), "im": _canon(obj.imag)}
    return obj


def canonical_json(obj: Any) -> str:
    """Canonical JSON text: sorted keys, round-trip floats, no whitespace drift."""
    return json.dumps(_canon(obj), sort_keys=True, separators=(",", ":"))


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a CSV with repr-formatted floats so reruns are byte-identical."""
    def fmt(v):
        if isinstance(v, (np.floating, float)):
            return repr(float(v))
        if isinstance(v, (np.integer, int)):
            return str(int(v))
        return str(v)

    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


class BudgetClock:
    """Wall-clock budget guard; check() raises BudgetError once exhausted."""

    def __init__(self, seconds: float | None):
        self.seconds = seconds
        self.start = time.monotonic()

    def elapsed(self) -> float:
        return time.monotonic() - self.start

    def check(self, label: str = "") -> None:
        if self.seconds is not None and self.elapsed() > self.seconds:
            raise BudgetError(
                f"budget of {self.seconds:.1f}s exhausted"
                + (f" during {label}" if label else "")
            )
