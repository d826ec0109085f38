"""Transaction ledger and revenue settlement.

Storage layout: a ledger is a directory holding an append-only transaction
log (``transactions.log``) and a balance snapshot (``state.json``). Log lines
are ``id|price|event-ref|srs-csv|settled-flag``, UTF-8 with LF terminators,
one transaction per line. Settling appends an updated line per transaction
(same id, shares filled in, flag 1); replay takes the last line per id, so
the log stays append-only and auditable. Floats are serialized with repr and
parse back bit-exactly, which is what makes reopening a store reproduce
balances exactly.

Settlement distributes the income of every unsettled transaction: a fraction
``beta_data`` flows to owners in proportion to per-transaction royalty
shares, the rest to the developer. ``settle_full`` attributes every
transaction; ``settle_subsampled`` estimates the mean share vector from a
uniform without-replacement sample and applies it to the whole pool, which is
unbiased when prices do not co-vary with shares (constant pricing being the
common case). Transactions whose attribution fails are quarantined into the
report's ``failed_ids`` and left unsettled for a retry, never silently
dropped.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .density import GenerationEvent
from .errors import DuplicateIdError, StorageFailureError
from .royalty import ShareVector
from .seeding import rng_for

LOG_NAME = "transactions.log"
STATE_NAME = "state.json"

_SHARE_SUM_TOL = 1e-9
_CORRELATION_THRESHOLD = 0.5
_CORRELATION_MIN_SAMPLE = 10

Attributor = Callable[["Transaction"], ShareVector]


@dataclass(frozen=True)
class Transaction:
    """One priced generation event, with shares once they are evaluated."""

    id: str
    price: float
    event: GenerationEvent
    srs: ShareVector | None = None

    def __post_init__(self) -> None:
        if not self.id or any(c in self.id for c in "|\n"):
            raise ValueError(f"transaction id {self.id!r} must be nonempty without '|'")
        if not (math.isfinite(self.price) and self.price >= 0):
            raise ValueError(f"price must be finite and nonnegative, got {self.price}")
        if self.srs is not None:
            _validate_shares(self.srs)


def _validate_shares(shares: ShareVector) -> None:
    values = np.asarray(shares.shares, dtype=float)
    if values.size == 0:
        raise ValueError("share rows must be nonempty")
    if np.any(values < 0):
        raise ValueError("shares must be nonnegative")
    if abs(math.fsum(values.tolist()) - 1.0) > _SHARE_SUM_TOL:
        raise ValueError("shares must sum to 1")


@dataclass(frozen=True)
class SettlementReport:
    """Outcome of one settlement run."""

    owner_payouts: np.ndarray
    developer_payout: float
    total_income: float
    sampled_fraction: float
    estimator: str
    seed: int | None = None
    failed_ids: tuple[str, ...] = ()
    correlated_warning: bool = False

    @property
    def conservation_error(self) -> float:
        paid = math.fsum(self.owner_payouts.tolist() + [self.developer_payout])
        return abs(paid - self.total_income) / max(1.0, abs(self.total_income))


def _encode_event(event: GenerationEvent) -> str:
    coords = ",".join(repr(float(v)) for v in np.asarray(event.x, dtype=float))
    if event.label is None:
        return coords
    if any(c in event.label for c in "|;\n"):
        raise ValueError(f"event label {event.label!r} cannot contain '|', ';' or newlines")
    return f"{coords};{event.label}"


def _decode_event(ref: str) -> GenerationEvent:
    coords, sep, label = ref.partition(";")
    x = np.array([float(v) for v in coords.split(",")]) if coords else np.empty(0)
    return GenerationEvent(x=x, label=label if sep else None)


def _encode_line(tx: Transaction, settled: bool) -> str:
    srs = "" if tx.srs is None else ",".join(repr(float(v)) for v in tx.srs.shares)
    return f"{tx.id}|{repr(float(tx.price))}|{_encode_event(tx.event)}|{srs}|{int(settled)}\n"


def _decode_line(line: str) -> tuple[Transaction, bool]:
    parts = line.rstrip("\n").split("|")
    if len(parts) != 5:
        raise StorageFailureError(f"malformed ledger line: {line!r}")
    tx_id, price, event_ref, srs_csv, flag = parts
    srs = None
    if srs_csv:
        srs = ShareVector(
            shares=np.array([float(v) for v in srs_csv.split(",")]), degenerate=False
        )
    tx = Transaction(id=tx_id, price=float(price), event=_decode_event(event_ref), srs=srs)
    return tx, flag == "1"


class LedgerStore:
    """Directory-backed transaction store with durable appends.

    ``record`` may be called concurrently; appends are serialized internally.
    Settlements take the same lock, so they see a consistent pool and
    recordings that race a settlement simply land in the next period.
    """

    def __init__(self, path: str | Path, *, create: bool = True):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._order: list[str] = []
        self._txs: dict[str, Transaction] = {}
        self._settled: set[str] = set()
        self._balances: dict[int, float] = {}
        self._developer_balance = 0.0
        self._settlement_count = 0
        try:
            if create:
                self.path.mkdir(parents=True, exist_ok=True)
            if not self.path.is_dir():
                raise StorageFailureError(f"{self.path} is not a ledger directory")
            if self._log_path.exists():
                self._replay()
            if self._state_path.exists():
                self._load_state()
        except OSError as exc:
            raise StorageFailureError(f"cannot open ledger at {self.path}: {exc}") from exc

    @property
    def _log_path(self) -> Path:
        return self.path / LOG_NAME

    @property
    def _state_path(self) -> Path:
        return self.path / STATE_NAME

    def _replay(self) -> None:
        with open(self._log_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                tx, settled = _decode_line(line)
                if tx.id not in self._txs:
                    self._order.append(tx.id)
                self._txs[tx.id] = tx
                if settled:
                    self._settled.add(tx.id)

    def _load_state(self) -> None:
        with open(self._state_path, encoding="utf-8") as fh:
            state = json.load(fh)
        self._balances = {int(k): float(v) for k, v in state["balances"].items()}
        self._developer_balance = float(state["developer_balance"])
        self._settlement_count = int(state["settlement_count"])

    def _write_state(self) -> None:
        state = {
            "balances": {str(k): v for k, v in sorted(self._balances.items())},
            "developer_balance": self._developer_balance,
            "settlement_count": self._settlement_count,
        }
        tmp = self._state_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(state, fh, sort_keys=True)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self._state_path)

    def _append_lines(self, lines: list[str]) -> None:
        try:
            with open(self._log_path, "a", encoding="utf-8", newline="") as fh:
                fh.writelines(lines)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailureError(f"append to {self._log_path} failed: {exc}") from exc

    def record(self, tx: Transaction) -> None:
        """Durably append one transaction. Duplicate ids raise."""
        with self._lock:
            if tx.id in self._txs:
                raise DuplicateIdError(f"transaction id {tx.id!r} already recorded")
            self._append_lines([_encode_line(tx, settled=False)])
            self._txs[tx.id] = tx
            self._order.append(tx.id)

    def transactions(self) -> list[Transaction]:
        return [self._txs[i] for i in self._order]

    def unsettled(self) -> list[Transaction]:
        return [self._txs[i] for i in self._order if i not in self._settled]

    def is_settled(self, tx_id: str) -> bool:
        return tx_id in self._settled

    @property
    def balances(self) -> dict[int, float]:
        return dict(self._balances)

    @property
    def developer_balance(self) -> float:
        return self._developer_balance

    @property
    def settlement_count(self) -> int:
        return self._settlement_count

    def _apply_settlement(
        self,
        settled: list[Transaction],
        owner_payouts: np.ndarray,
        developer_payout: float,
    ) -> None:
        lines = [_encode_line(tx, settled=True) for tx in settled]
        self._append_lines(lines)
        for tx in settled:
            self._txs[tx.id] = tx
            self._settled.add(tx.id)
        for i, amount in enumerate(owner_payouts):
            self._balances[i] = self._balances.get(i, 0.0) + float(amount)
        self._developer_balance += developer_payout
        self._settlement_count += 1
        try:
            self._write_state()
        except OSError as exc:
            raise StorageFailureError(f"state snapshot failed: {exc}") from exc


def _resolve_shares(
    txs: list[Transaction], attributor: Attributor | None
) -> tuple[list[Transaction], list[str]]:
    """Attach shares to each transaction, quarantining failures."""
    resolved: list[Transaction] = []
    failed: list[str] = []
    for tx in txs:
        if tx.srs is not None:
            resolved.append(tx)
            continue
        if attributor is None:
            failed.append(tx.id)
            continue
        try:
            shares = attributor(tx)
            _validate_shares(shares)
        except Exception:
            failed.append(tx.id)
            continue
        resolved.append(Transaction(id=tx.id, price=tx.price, event=tx.event, srs=shares))
    return resolved, failed


def _owner_count(txs: list[Transaction]) -> int:
    counts = {len(tx.srs.shares) for tx in txs}
    if len(counts) > 1:
        raise ValueError(f"share rows disagree on owner count: {sorted(counts)}")
    return counts.pop() if counts else 0


def _correlation_flag(prices: np.ndarray, shares: np.ndarray) -> bool:
    if prices.size < _CORRELATION_MIN_SAMPLE or np.all(prices == prices[0]):
        return False
    for i in range(shares.shape[1]):
        col = shares[:, i]
        if np.std(col) == 0:
            continue
        r = float(np.corrcoef(prices, col)[0, 1])
        if abs(r) > _CORRELATION_THRESHOLD:
            return True
    return False


def settle_full(
    store: LedgerStore,
    beta_data: float,
    attributor: Attributor | None = None,
    *,
    seed: int | None = None,
    apply: bool = True,
) -> SettlementReport:
    """Settle every unsettled transaction with exact per-transaction attribution.

    With ``apply=False`` the report is computed but nothing is written: no
    transaction is marked settled and no balance moves. Useful for previewing
    a settlement or comparing estimators against the same pool.
    """
    if not 0.0 <= beta_data <= 1.0:
        raise ValueError(f"beta_data must lie in [0, 1], got {beta_data}")
    with store._lock:
        pool = [tx for tx in store.unsettled()]
        resolved, failed = _resolve_shares(pool, attributor)
        n = _owner_count(resolved)
        prices = [tx.price for tx in resolved]
        total_income = math.fsum(prices)
        owner_payouts = np.array(
            [
                beta_data * math.fsum(tx.price * float(tx.srs.shares[i]) for tx in resolved)
                for i in range(n)
            ]
        )
        developer_payout = (1.0 - beta_data) * total_income
        if apply:
            store._apply_settlement(resolved, owner_payouts, developer_payout)
    return SettlementReport(
        owner_payouts=owner_payouts,
        developer_payout=developer_payout,
        total_income=total_income,
        sampled_fraction=1.0,
        estimator="full",
        seed=seed,
        failed_ids=tuple(failed),
    )


def settle_subsampled(
    store: LedgerStore,
    beta_data: float,
    sample_size: int,
    seed: int,
    attributor: Attributor | None = None,
    *,
    apply: bool = True,
) -> SettlementReport:
    """Settle the whole pool using a sampled estimate of the mean share vector.

    A uniform without-replacement sample of ``sample_size`` transactions is
    attributed; every unsettled transaction is then paid according to the
    sample mean. When the sample covers the entire pool and prices are
    constant the estimator coincides with :func:`settle_full`, and the
    implementation takes the exact summation path so the results are equal
    bit for bit. ``apply=False`` computes the report without writing
    anything, which allows estimator studies over many seeds on one pool.
    """
    if not 0.0 <= beta_data <= 1.0:
        raise ValueError(f"beta_data must lie in [0, 1], got {beta_data}")
    with store._lock:
        pool = store.unsettled()
        if not 1 <= sample_size <= len(pool):
            raise ValueError(
                f"sample_size must lie in [1, {len(pool)}], got {sample_size}"
            )
        indices = np.sort(rng_for(seed).choice(len(pool), size=sample_size, replace=False))
        sampled = [pool[int(i)] for i in indices]
        resolved, failed = _resolve_shares(sampled, attributor)
        if not resolved:
            raise ValueError("every sampled transaction failed attribution")
        n = _owner_count(resolved)
        sample_prices = np.array([tx.price for tx in resolved])
        sample_shares = np.array([tx.srs.shares for tx in resolved])
        failed_set = set(failed)
        resolved_by_id = {tx.id: tx for tx in resolved}
        settled = [resolved_by_id.get(tx.id, tx) for tx in pool if tx.id not in failed_set]
        all_prices = [tx.price for tx in settled]
        total_income = math.fsum(all_prices)
        exact_collapse = (
            not failed
            and len(resolved) == len(pool)
            and all(tx.price == pool[0].price for tx in pool)
        )
        if exact_collapse:
            owner_payouts = np.array(
                [
                    beta_data * math.fsum(tx.price * float(tx.srs.shares[i]) for tx in resolved)
                    for i in range(n)
                ]
            )
        else:
            k = len(resolved)
            mean_shares = [
                math.fsum(float(tx.srs.shares[i]) for tx in resolved) / k for i in range(n)
            ]
            owner_payouts = np.array([beta_data * total_income * m for m in mean_shares])
        developer_payout = (1.0 - beta_data) * total_income
        if apply:
            store._apply_settlement(settled, owner_payouts, developer_payout)
    return SettlementReport(
        owner_payouts=owner_payouts,
        developer_payout=developer_payout,
        total_income=total_income,
        sampled_fraction=sample_size / len(pool) if pool else 0.0,
        estimator="subsampled",
        seed=seed,
        failed_ids=tuple(failed),
        correlated_warning=_correlation_flag(sample_prices, sample_shares),
    )


def write_settlement_csv(report: SettlementReport, path: str | Path) -> None:
    """Write the settlement report CSV.

    Format: a ``# total_income=... estimator=... seed=...`` comment line,
    the ``owner_id,payout`` header, one row per owner, and a trailing
    ``developer,<payout>`` row.
    """
    seed = "-" if report.seed is None else str(report.seed)
    lines = [
        f"# total_income={repr(report.total_income)} estimator={report.estimator} seed={seed}\n",
        "owner_id,payout\n",
    ]
    for i, amount in enumerate(report.owner_payouts):
        lines.append(f"{i},{repr(float(amount))}\n")
    lines.append(f"developer,{repr(float(report.developer_payout))}\n")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.writelines(lines)
        fh.flush()
        os.fsync(fh.fileno())
