"""Dataset ingestion: hypergraph JSON files and raw citation graphs.

The hypergraph file is a JSON object {"num_nodes", "features",
"hyperedges", "labels" (optional)}.  Citation graphs arrive as two TSVs:
an edge list (pairs of node ids) and a node table (id, label, feature
values).  Some published node tables put the label last instead; that
layout is detected and accepted when it is unambiguous (non-numeric last
field, numeric second field).
"""

from __future__ import annotations

import json

import numpy as np

from .hypergraph import Hypergraph, ego_network_hypergraphs


class DatasetError(Exception):
    """Malformed or inconsistent input data."""


def load_hypergraph_json(path) -> Hypergraph:
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except FileNotFoundError as exc:
        raise DatasetError(f"dataset file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"invalid JSON in {path}: {exc}") from exc

    for key in ("num_nodes", "features", "hyperedges"):
        if key not in blob:
            raise DatasetError(f"hypergraph JSON misses required key {key!r}")
    try:
        return Hypergraph(blob["num_nodes"], blob["hyperedges"],
                          np.asarray(blob["features"], dtype=np.float64),
                          labels=blob.get("labels"))
    except (ValueError, TypeError) as exc:
        raise DatasetError(f"invalid hypergraph in {path}: {exc}") from exc


def save_hypergraph_json(path, hg: Hypergraph):
    blob = {
        "num_nodes": hg.num_nodes,
        "features": hg.features.tolist(),
        "hyperedges": [list(e) for e in hg.hyperedges],
    }
    if hg.labels is not None:
        blob["labels"] = hg.labels.tolist()
    with open(path, "w") as fh:
        json.dump(blob, fh)


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_citation_tsv(edges_path, nodes_path):
    """Parse a citation graph: returns (edges, labels, features, node_names).

    Node lines are id<TAB>label<TAB>features...; a trailing-label layout
    (id, features..., label) is accepted when the last field is not a
    number but the second is.  Label strings map to ids by sorted order.
    """
    rows = []
    try:
        with open(nodes_path) as fh:
            for ln, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) == 1 and not parts[0].strip():
                    continue
                if len(parts) < 3:
                    raise DatasetError(
                        f"{nodes_path}:{ln}: need id, label and features")
                rows.append((ln, parts))
    except FileNotFoundError as exc:
        raise DatasetError(f"node file not found: {nodes_path}") from exc

    if not rows:
        raise DatasetError(f"{nodes_path}: no nodes")

    # column layout: label second unless the file unambiguously puts it last
    first = rows[0][1]
    trailing = (not _is_number(first[-1])) and _is_number(first[1])

    ids, label_names, feats = [], [], []
    for ln, parts in rows:
        if trailing:
            node_id, label, values = parts[0], parts[-1], parts[1:-1]
        else:
            node_id, label, values = parts[0], parts[1], parts[2:]
        if not label.strip():
            raise DatasetError(f"{nodes_path}:{ln}: node {node_id} has no label")
        try:
            feats.append([float(v) for v in values])
        except ValueError as exc:
            raise DatasetError(
                f"{nodes_path}:{ln}: non-numeric feature value") from exc
        ids.append(node_id)
        label_names.append(label)

    if len(set(ids)) != len(ids):
        raise DatasetError(f"{nodes_path}: duplicate node ids")
    widths = {len(f) for f in feats}
    if len(widths) != 1:
        raise DatasetError(f"{nodes_path}: inconsistent feature widths {widths}")

    index = {node_id: i for i, node_id in enumerate(ids)}
    classes = sorted(set(label_names))
    class_index = {c: i for i, c in enumerate(classes)}
    labels = np.array([class_index[c] for c in label_names], dtype=np.int64)
    features = np.asarray(feats, dtype=np.float64)

    edges = []
    try:
        with open(edges_path) as fh:
            for ln, line in enumerate(fh, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 2:
                    raise DatasetError(f"{edges_path}:{ln}: need two node ids")
                try:
                    edges.append((index[parts[0]], index[parts[1]]))
                except KeyError as exc:
                    raise DatasetError(
                        f"{edges_path}:{ln}: unknown node id {exc.args[0]}")
    except FileNotFoundError as exc:
        raise DatasetError(f"edge file not found: {edges_path}") from exc

    return (np.asarray(edges, dtype=np.int64).reshape(-1, 2), labels,
            features, ids)


def citation_to_hypergraph(edges_path, nodes_path, mode: str) -> Hypergraph:
    """Ego-network conversion of a raw citation graph."""
    edges, labels, features, names = load_citation_tsv(edges_path, nodes_path)
    try:
        return ego_network_hypergraphs(edges, labels, features, mode,
                                       node_names=names)
    except ValueError as exc:
        raise DatasetError(str(exc)) from exc
