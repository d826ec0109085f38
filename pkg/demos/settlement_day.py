"""A revenue ledger accrues transactions, then settles owner balances.

Each recorded transaction carries a price and the royalty shares computed at
generation time. Settlement folds unsettled transactions into owner balances;
a subsampled settlement estimates the same payouts from a fraction of the
pool.
"""

from __future__ import annotations

import tempfile

from royaltyshare import LedgerStore, settle_full, settle_subsampled
from royaltyshare.synthetic import populate_synthetic_ledger


def main() -> None:
    root = tempfile.mkdtemp(prefix="royalty-demo-")
    store = LedgerStore(root, create=True)
    populate_synthetic_ledger(store, num_transactions=2000, num_owners=4, seed=3)
    print(f"ledger at {root}: {len(store.transactions())} transactions recorded")

    beta = 0.7
    preview = settle_subsampled(store, beta, sample_size=200, seed=1, apply=False)
    print()
    print("10% subsample preview (nothing written):")
    for i, payout in enumerate(preview.owner_payouts):
        print(f"  owner {i}: {payout:>9.2f}")
    print(f"  developer: {preview.developer_payout:>8.2f}")

    report = settle_full(store, beta, seed=1)
    print()
    print("full settlement (durable):")
    for i, payout in enumerate(report.owner_payouts):
        estimate = preview.owner_payouts[i]
        off = abs(estimate - payout) / payout
        print(f"  owner {i}: {payout:>9.2f}  (preview was off by {off:.2%})")
    print(f"  developer: {report.developer_payout:>8.2f}")
    print(f"  conservation error: {report.conservation_error:.2e}")
    print(f"  unsettled remaining: {len(store.unsettled())}")

    balances = store.balances
    print()
    print("owner balances now carry the settled amounts:")
    for owner, balance in sorted(balances.items()):
        print(f"  owner {owner}: {balance:>9.2f}")


if __name__ == "__main__":
    main()
