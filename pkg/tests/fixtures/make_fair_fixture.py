"""Regenerate fair_groups.csv, the group-rate fixture used by the tests and CLI.

Four groups of different sizes and base rates, two informative continuous
features, and one-hot group indicators so a logistic model can shift its
per-group intercepts. Deterministic; rerunning overwrites the CSV with
identical bytes.
"""

from pathlib import Path

import numpy as np

from duallearn.core import Dataset
from duallearn.data import save_csv

SIZES = {"A": 600, "B": 280, "C": 180, "D": 140}
OFFSETS = {"A": 0.5, "B": -0.4, "C": 0.1, "D": -0.8}
SEED = 42


def build() -> tuple[Dataset, tuple[str, ...]]:
    rng = np.random.default_rng(SEED)
    feats, labels, groups = [], [], []
    for g, n in SIZES.items():
        x = rng.standard_normal((n, 2))
        logit = 1.2 * x[:, 0] - 0.8 * x[:, 1] + OFFSETS[g]
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(int)
        onehot = np.zeros((n, 4))
        onehot[:, "ABCD".index(g)] = 1.0
        feats.append(np.hstack([x, onehot]))
        labels.append(y)
        groups += [g] * n
    ds = Dataset(features=np.vstack(feats), labels=np.concatenate(labels),
                 name="fair_groups")
    return ds, tuple(groups)


if __name__ == "__main__":
    ds, groups = build()
    out = Path(__file__).parent / "fair_groups.csv"
    save_csv(ds, out, group_labels=groups,
             feature_columns=("x1", "x2", "ga", "gb", "gc", "gd"))
    print(f"wrote {out} ({len(ds)} rows)")
