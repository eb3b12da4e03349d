"""Plain-text formats for sample sets and estimates.

Both files are line oriented, ``#`` starts a comment line, indices are
1-based and floats are written with ``repr`` (shortest round-trip form).

Sample set::

    # tailmem sampleset v1
    n 2
    d 10
    sigma 0.05
    seed 7
    nnz 3
    entries
    1 4 1        <- row_index feature_index sign
    2 4 -1
    2 9 1
    labels
    1 0.93       <- row_index label
    2 -0.41

Estimate::

    # tailmem estimate v1
    d 10
    support 2
    rank 2
    sv_tolerance 2.4e-11
    residual_norm 0.0
    coefficients
    4 0.93       <- feature_index value
    9 1.34
"""
from __future__ import annotations

import numpy as np

from .datagen import SampleSet
from .errors import TailmemError
from .solver import Estimate, SupportMap

SAMPLESET_MAGIC = "# tailmem sampleset v1"
ESTIMATE_MAGIC = "# tailmem estimate v1"


class FormatError(TailmemError, ValueError):
    pass


def write_sampleset(samples: SampleSet, path):
    row_ids = samples.row_ids()
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{SAMPLESET_MAGIC}\n")
        fh.write(f"n {samples.n}\nd {samples.d}\nsigma {samples.sigma!r}\nseed {samples.seed}\n")
        fh.write(f"nnz {samples.indices.size}\nentries\n")
        for j, i, sg in zip(row_ids, samples.indices, samples.signs):
            fh.write(f"{j + 1} {i + 1} {int(sg)}\n")
        fh.write("labels\n")
        for j, v in enumerate(samples.y):
            fh.write(f"{j + 1} {float(v)!r}\n")


def _body(path, magic):
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != magic:
        raise FormatError(f"{path}: expected first line {magic!r}")
    return [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("#")]


def _header(lines, keys, path):
    out = {}
    for key, line in zip(keys, lines):
        name, _, value = line.partition(" ")
        if name != key:
            raise FormatError(f"{path}: expected header field {key!r}, got {name!r}")
        out[key] = value.strip()
    if len(out) != len(keys):
        raise FormatError(f"{path}: truncated header")
    return out


def read_sampleset(path) -> SampleSet:
    lines = _body(path, SAMPLESET_MAGIC)
    head = _header(lines, ("n", "d", "sigma", "seed", "nnz"), path)
    n, d, nnz = int(head["n"]), int(head["d"]), int(head["nnz"])
    if lines[5] != "entries" or lines[6 + nnz] != "labels":
        raise FormatError(f"{path}: section markers missing or nnz wrong")
    trip = np.array([ln.split() for ln in lines[6:6 + nnz]], dtype=np.int64).reshape(nnz, 3)
    rows, feats, signs = trip[:, 0] - 1, trip[:, 1] - 1, trip[:, 2]
    order = np.lexsort((feats, rows))
    if not np.array_equal(order, np.arange(nnz)):
        raise FormatError(f"{path}: entries must be sorted by row then feature")
    labels = lines[7 + nnz:]
    if len(labels) != n:
        raise FormatError(f"{path}: expected {n} labels, found {len(labels)}")
    y = np.empty(n)
    for line in labels:
        j, v = line.split()
        y[int(j) - 1] = float(v)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return SampleSet(
        d=d, indptr=indptr, indices=feats, signs=signs.astype(np.int8), y=y,
        sigma=float(head["sigma"]), seed=int(head["seed"]),
    )


def write_estimate(est: Estimate, path):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{ESTIMATE_MAGIC}\n")
        fh.write(f"d {est.d}\nsupport {est.f_size}\nrank {est.rank}\n")
        fh.write(f"sv_tolerance {est.sv_tolerance!r}\nresidual_norm {est.residual_norm!r}\n")
        fh.write("coefficients\n")
        for i, v in zip(est.support.observed, est.beta_on_support):
            fh.write(f"{i + 1} {float(v)!r}\n")


def read_estimate(path) -> Estimate:
    lines = _body(path, ESTIMATE_MAGIC)
    head = _header(lines, ("d", "support", "rank", "sv_tolerance", "residual_norm"), path)
    m = int(head["support"])
    if lines[5] != "coefficients" or len(lines) != 6 + m:
        raise FormatError(f"{path}: expected {m} coefficient lines")
    parts = [ln.split() for ln in lines[6:]]
    idx = np.array([int(a) - 1 for a, _ in parts], dtype=np.int64)
    vals = np.array([float(b) for _, b in parts])
    if idx.size > 1 and np.any(np.diff(idx) <= 0):
        raise FormatError(f"{path}: feature indices must be strictly increasing")
    return Estimate(
        d=int(head["d"]), support=SupportMap(idx), beta_on_support=vals,
        rank=int(head["rank"]), sv_tolerance=float(head["sv_tolerance"]),
        residual_norm=float(head["residual_norm"]),
    )
