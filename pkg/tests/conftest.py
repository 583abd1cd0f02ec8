"""Shared fixtures and the citation-dataset resolution used by the
dataset-dependent tests."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from hypergene.hypergraph import Hypergraph

REPO_ROOT = Path(__file__).resolve().parent.parent


def cora_paths():
    """(content, cites) paths if the Cora files are present, else None.

    Looks in $HYPERGENE_CORA_DIR, then data/cora/.  The files are the
    published cora.content / cora.cites tables.
    """
    candidates = []
    env = os.environ.get("HYPERGENE_CORA_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(REPO_ROOT / "data" / "cora")
    for root in candidates:
        content, cites = root / "cora.content", root / "cora.cites"
        if content.is_file() and cites.is_file():
            return content, cites
    return None


CORA_MISSING = ("Cora files not found: place cora.content and cora.cites "
                "under data/cora/ or set HYPERGENE_CORA_DIR")

needs_cora = pytest.mark.skipif(cora_paths() is None, reason=CORA_MISSING)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_hg():
    """Five nodes, four hyperedges, two classes; sizes 2..3."""
    feats = np.arange(10, dtype=np.float64).reshape(5, 2)
    return Hypergraph(5, [(0, 1), (1, 2, 3), (3, 4), (0, 2, 4)], feats,
                      labels=[0, 0, 1, 1])


def random_hypergraph(rng, num_nodes=None, num_edges=None, dim=3,
                      with_labels=False, num_classes=2, min_size=2):
    """Random connected-ish hypergraph for property tests."""
    n = num_nodes or int(rng.integers(4, 12))
    m = num_edges or int(rng.integers(2, 9))
    edges = []
    for _ in range(m):
        size = int(rng.integers(min_size, min(n, 5) + 1))
        edges.append(tuple(sorted(rng.choice(n, size=size, replace=False))))
    feats = rng.normal(size=(n, dim))
    labels = rng.integers(0, num_classes, size=m) if with_labels else None
    return Hypergraph(n, edges, feats, labels=labels)
