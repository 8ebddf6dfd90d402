"""Synthetic corpus generator for demos and overfit tests.

The toy world has 20 items in 4 groups of 5.  One item per group (the
"target") never appears inside any browsing history; every session in a
group browses that group's other four items and then ends on the target,
so after ground-truth masking the target is genuinely new to the session.
Items carry a group-wide kind token plus a unique brand token, which makes
the attribute embedding alone sufficient to identify the target: a model
that learns the attribute-to-embedding map can memorize the mapping from
any group's history to its target.

Timestamps put 50 sessions on days 0-1 and 10 sessions on days 9-10, so
the 7-day holdout split sends exactly the late sessions to the test set.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

N_GROUPS = 4
ITEMS_PER_GROUP = 5
DAY = 86_400


def toy_catalog_rows() -> list[dict]:
    rows = []
    for g in range(N_GROUPS):
        for j in range(ITEMS_PER_GROUP):
            item = f"g{g}i{j}"
            rows.append(
                {
                    "item": item,
                    "taxonomy": ["catalog", f"family{g // 2}", f"group{g}"],
                    "labels": None,
                    "attributes": [f"kind{g}", f"brand_{item}"],
                }
            )
    return rows


def toy_session_rows(seed: int = 0, n_train: int = 50, n_test: int = 10) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []

    def make(sid: str, g: int, t0: int) -> dict:
        contexts = [f"g{g}i{j}" for j in range(1, ITEMS_PER_GROUP)]
        # two distinct context items up front so the masked history always
        # has at least two graph nodes, then free picks
        first, second = rng.choice(len(contexts), size=2, replace=False)
        picks = [contexts[int(first)], contexts[int(second)]]
        for _ in range(int(rng.integers(0, 3))):
            picks.append(contexts[int(rng.integers(0, len(contexts)))])
        items = picks + [f"g{g}i0"]  # the group target is always the final event
        return {
            "session_id": sid,
            "events": [{"item": it, "ts": t0 + 10 * k} for k, it in enumerate(items)],
        }

    for s in range(n_train):
        rows.append(make(f"train{s:03d}", s % N_GROUPS, s * 120))
    for s in range(n_test):
        rows.append(make(f"test{s:03d}", s % N_GROUPS, 9 * DAY + s * 120))
    return rows


def write_toy_dataset(
    out_dir: str | Path, seed: int = 0, n_train: int = 50, n_test: int = 10
) -> tuple[Path, Path]:
    """Write sessions.jsonl and catalog.jsonl; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sessions_path = out / "sessions.jsonl"
    catalog_path = out / "catalog.jsonl"
    with sessions_path.open("w", encoding="utf-8") as fh:
        for row in toy_session_rows(seed=seed, n_train=n_train, n_test=n_test):
            fh.write(json.dumps(row) + "\n")
    with catalog_path.open("w", encoding="utf-8") as fh:
        for row in toy_catalog_rows():
            fh.write(json.dumps(row) + "\n")
    return sessions_path, catalog_path
