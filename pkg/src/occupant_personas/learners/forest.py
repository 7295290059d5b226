"""Bootstrap-aggregated gini trees with per-split feature sampling.

Per-tree seeds derive from the master seed, so trees may be grown on a
thread pool without changing the result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .tree import Tree, grow_tree


def default_mtry(n_features: int) -> int:
    return max(1, int(math.floor(math.sqrt(n_features))))


def tree_seeds(master_seed: int, n_trees: int) -> np.ndarray:
    """Two deterministic uint32 streams per tree: bootstrap and split sampling."""
    return np.random.SeedSequence(master_seed).generate_state(2 * n_trees, dtype=np.uint32)


def grow_forest(X, y_idx, n_classes, n_trees=100, mtry=None, bootstrap=True,
                seed=0, max_depth=None, min_samples_split=2,
                max_workers=None) -> tuple[list[Tree], np.ndarray]:
    n, d = X.shape
    mtry = default_mtry(d) if mtry is None else min(int(mtry), d)
    seeds = tree_seeds(seed, n_trees)

    def build(i: int) -> Tree:
        boot_seed = int(seeds[2 * i])
        node_seed = int(seeds[2 * i + 1])
        if bootstrap:
            sample = np.random.default_rng(boot_seed).integers(0, n, size=n, dtype=np.int64)
        else:
            sample = np.arange(n, dtype=np.int64)
        return grow_tree(
            X, y_idx, n_classes, max_depth=max_depth,
            min_samples_split=min_samples_split, mtry=mtry,
            seed=node_seed, sample_idx=sample,
        )

    if max_workers is None:
        max_workers = min(8, os.cpu_count() or 1)
    if max_workers <= 1 or n_trees == 1:
        trees = [build(i) for i in range(n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            trees = list(pool.map(build, range(n_trees)))
    return trees, seeds


def forest_vote_idx(trees: list[Tree], X: np.ndarray, n_classes: int) -> np.ndarray:
    """Majority vote over trees; ties resolve to the smallest class index."""
    n = X.shape[0]
    votes = np.zeros((n, n_classes), dtype=np.int64)
    rows = np.arange(n)
    for tree in trees:
        votes[rows, tree.predict_idx(X)] += 1
    return np.argmax(votes, axis=1)
