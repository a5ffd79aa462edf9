"""File formats of the command-line workflow.

CSV columns carry units in their names; an initial `#` comment line states
them again together with run metadata.  All writers are deterministic:
identical data produces identical bytes.
"""

import csv
import json

import numpy as np

from .analysis import TimeTagSet
from .tomography import BASES, CountTable


def format_number(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def write_csv(path, columns, rows, comment=None):
    """Write rows of (name -> value) columns with an optional # comment."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_number(v) for v in row) + "\n")


def read_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    header = [c.strip() for c in rows[0]]
    return header, rows[1:]


def write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")


# time tags: attempt_index, t_us, detector, pol

def write_timetags(path, tags):
    det = tags.detector if tags.detector is not None \
        else np.zeros(tags.times.shape, dtype=int)
    pol = tags.polarization if tags.polarization is not None \
        else np.full(tags.times.shape, "", dtype=object)
    rows = [(int(a), t, d, p) for a, t, d, p in
            zip(tags.attempt_index, tags.times, det, pol)]
    write_csv(path, ("attempt_index", "t_us", "detector", "pol"), rows,
              comment=f"attempts={tags.attempts} "
                      f"span_us={tags.span[0]:.12g},{tags.span[1]:.12g}")


def read_timetags(path, attempts=None):
    """Read a time-tag CSV; attempts comes from the header comment unless
    overridden (falling back to max(attempt_index) + 1)."""
    span = None
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("#"):
        for tok in first[1:].split():
            if tok.startswith("attempts=") and attempts is None:
                attempts = int(tok.split("=")[1])
            if tok.startswith("span_us="):
                lo, hi = tok.split("=")[1].split(",")
                span = (float(lo), float(hi))
    header, rows = read_csv(path)
    if header[:2] != ["attempt_index", "t_us"]:
        raise ValueError(f"{path}: expected time-tag columns "
                         "attempt_index, t_us, detector, pol")
    idx = np.array([int(r[0]) for r in rows], dtype=int)
    times = np.array([float(r[1]) for r in rows])
    det = np.array([r[2] for r in rows]) if rows and len(rows[0]) > 2 else None
    pol = np.array([r[3] for r in rows]) if rows and len(rows[0]) > 3 else None
    if attempts is None:
        attempts = int(idx.max()) + 1 if idx.size else 1
    if span is None:
        span = (0.0, None)
    return TimeTagSet(attempts=attempts, times=times, attempt_index=idx,
                      detector=det, polarization=pol, span=span)


# tomography counts: photon_basis, ion_basis, outcome, counts

def write_counts(path, table):
    rows = []
    for bi, (ph, ion) in enumerate(table.basis_labels):
        for outcome in range(4):
            rows.append((ph, ion, outcome, table.counts[bi, outcome]))
    write_csv(path, ("photon_basis", "ion_basis", "outcome", "counts"), rows,
              comment="outcome bit 0: photon in +1 eigenstate; "
                      "bit 1: ion in +1 eigenstate")


def read_counts(path):
    header, rows = read_csv(path)
    if header != ["photon_basis", "ion_basis", "outcome", "counts"]:
        raise ValueError(f"{path}: expected columns photon_basis, ion_basis, "
                         "outcome, counts")
    counts = np.zeros((9, 4))
    seen = np.zeros((9, 4), dtype=bool)
    for r in rows:
        ph, ion = r[0].strip(), r[1].strip()
        if ph not in BASES or ion not in BASES:
            raise ValueError(f"{path}: unknown basis pair ({ph}, {ion})")
        outcome = int(r[2])
        if not 0 <= outcome <= 3:
            raise ValueError(f"{path}: outcome {outcome} outside 0..3")
        bi = CountTable.basis_index(ph, ion)
        counts[bi, outcome] += float(r[3])
        seen[bi, outcome] = True
    if not seen.all():
        raise ValueError(f"{path}: expected 36 rows, "
                         f"missing {int((~seen).sum())} outcomes")
    return CountTable(counts=counts)
