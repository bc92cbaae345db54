"""Delimited-file and JSON interchange.

Candidate CSV: header ``id,f1,...,fm``; ids are integers, normally 0-based
and contiguous. Subset re-exports (e.g. pruning survivors) keep their
original ids, and the reader accepts that, exposing them as labels while
positions stay 0-based internally.

Design CSV: header ``id,count`` for exact designs, ``id,weight`` for
approximate ones.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .designs import CandidateSet, Design


def write_candidates(path, cands: CandidateSet, subset: Optional[np.ndarray] = None) -> None:
    """Write candidates (optionally a subset by position) with their ids."""
    path = Path(path)
    positions = np.arange(cands.N) if subset is None else np.asarray(subset, dtype=np.int64)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"f{j + 1}" for j in range(cands.m)])
        for pos in positions:
            row = cands.gather([int(pos)])[0]
            writer.writerow([int(cands.ids[pos])] + [repr(float(x)) for x in row])


def read_candidates(path) -> CandidateSet:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "id" or len(header) < 3:
            raise ValueError(f"{path}: expected header id,f1,...,fm")
        rows = [(int(r[0]), [float(x) for x in r[1:]]) for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: no candidate rows")
    ids = np.asarray([r[0] for r in rows], dtype=np.int64)
    array = np.asarray([r[1] for r in rows], dtype=np.float64)
    contiguous = np.array_equal(ids, np.arange(len(rows)))
    return CandidateSet.from_array(array, ids=None if contiguous else ids)


def write_design(path, design: Design, cands: Optional[CandidateSet] = None) -> None:
    """Write a design; ids are mapped through the candidate labels if given."""
    path = Path(path)
    ids = design.indices if cands is None else cands.ids[design.indices]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if design.kind == "exact":
            writer.writerow(["id", "count"])
            for label, count in zip(ids, design.counts):
                writer.writerow([int(label), int(count)])
        else:
            writer.writerow(["id", "weight"])
            for label, weight in zip(ids, design.weights):
                writer.writerow([int(label), repr(float(weight))])


def read_design(path, cands: Optional[CandidateSet] = None) -> Design:
    """Read a design CSV; ids resolve against candidate labels when given."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header == ["id", "count"]:
            exact = True
        elif header == ["id", "weight"]:
            exact = False
        else:
            raise ValueError(f"{path}: expected header id,count or id,weight")
        rows = [(int(r[0]), float(r[1])) for r in reader if r]
    labels = np.asarray([r[0] for r in rows], dtype=np.int64)
    values = np.asarray([r[1] for r in rows], dtype=np.float64)
    if cands is not None:
        lookup = {int(label): pos for pos, label in enumerate(cands.ids)}
        try:
            indices = np.asarray([lookup[int(i)] for i in labels], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"{path}: design id {exc} not among candidate ids") from None
    else:
        indices = labels
    if exact:
        counts = values.astype(np.int64)
        return Design.exact(indices, counts, int(counts.sum()))
    return Design.approximate(indices, values)


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def write_approx_solution(out_dir, approx, cands: CandidateSet) -> None:
    """Design CSV plus the certificate sidecar for an approximate solution."""
    out_dir = Path(out_dir)
    write_design(out_dir / "approx_design.csv", approx.design, cands)
    write_json(
        out_dir / "approx_meta.json",
        {
            "eff_lower_bound": approx.eff_lower_bound,
            "iterations": approx.iterations,
            "max_variance": approx.max_variance,
            "support_size": approx.design.support_size,
        },
    )
