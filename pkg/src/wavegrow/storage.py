"""Run-directory persistence: CSV series, state checkpoints, manifests, locks."""

from __future__ import annotations

import csv
import json
import os
import struct
import zlib

import numpy as np

from .errors import StorageError
from .series import NormSeries
from .spectral import Field, GridSpec, State

__all__ = [
    "SeriesWriter",
    "write_series",
    "read_series",
    "truncate_series",
    "checkpoint",
    "restore",
    "write_json_atomic",
    "RunLock",
    "CHECKPOINT_VERSION",
]

CHECKPOINT_VERSION = 1
_CK_MAGIC = b"WGCK"
# magic, version, dim, n, L, t, step, payload length, crc32 of payload
_CK_HEADER = struct.Struct("<4sIIIddQQI")


def _fmt(v):
    return format(float(v), ".17g")


class SeriesWriter:
    """Append-only CSV writer; every row is flushed and fsynced on write."""

    def __init__(self, path, names, append=False):
        self.path = os.fspath(path)
        self.names = list(names)
        exists = append and os.path.exists(self.path)
        try:
            self._fh = open(self.path, "a" if exists else "w", newline="")
        except OSError as exc:
            raise StorageError(f"cannot open {self.path}: {exc}") from exc
        self._w = csv.writer(self._fh, lineterminator="\n")
        if exists:
            with open(self.path, newline="") as fh:
                header = next(csv.reader(fh), None)
            if header != ["t"] + self.names:
                raise StorageError(f"{self.path}: header {header} does not match columns {self.names}")
        else:
            self._w.writerow(["t"] + self.names)
            self.flush()

    def write(self, t, row):
        try:
            self._w.writerow([_fmt(t)] + [_fmt(row[k]) for k in self.names])
            self.flush()
        except OSError as exc:
            raise StorageError(f"write to {self.path} failed: {exc}") from exc

    def flush(self):
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_series(series, path, names=None):
    names = series.names if names is None else names
    with SeriesWriter(path, names) as w:
        for t, row in series.rows():
            w.write(t, row)


def read_series(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    if not rows or not rows[0] or rows[0][0] != "t":
        raise StorageError(f"{path}: missing header row")
    names = rows[0][1:]
    out = NormSeries()
    out.columns = {k: [] for k in names}
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(names) + 1:
            raise StorageError(f"{path}:{i}: expected {len(names) + 1} fields, found {len(r)}")
        try:
            vals = [float(x) for x in r]
        except ValueError as exc:
            raise StorageError(f"{path}:{i}: {exc}") from exc
        out.times.append(vals[0])
        for k, v in zip(names, vals[1:]):
            out.columns[k].append(v)
    return out


def truncate_series(path, t_max):
    """Drop rows with ``t > t_max`` (and any partial trailing line)."""
    try:
        with open(path, newline="") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    header, body = lines[0], lines[1:]
    width = header.count(",")
    keep = []
    for line in body:
        if not line or line.count(",") != width:
            break
        try:
            t = float(line.split(",", 1)[0])
        except ValueError:
            break
        if t > t_max:
            break
        keep.append(line)
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write("\n".join([header] + keep) + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return len(keep)


def checkpoint(state, path, step=0):
    """Write ``state`` atomically: header, then samples and coefficients of u, u_t."""
    g = state.grid
    payload = b"".join(
        np.ascontiguousarray(a, dtype=dt).tobytes()
        for a, dt in (
            (state.u.values, "<f8"),
            (state.ut.values, "<f8"),
            (state.u.coeffs, "<c16"),
            (state.ut.coeffs, "<c16"),
        )
    )
    header = _CK_HEADER.pack(_CK_MAGIC, CHECKPOINT_VERSION, g.dim, g.n, float(g.L), float(state.t),
                             int(step), len(payload), zlib.crc32(payload))
    tmp = f"{os.fspath(path)}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(header)
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"cannot write checkpoint {path}: {exc}") from exc


def restore(path, with_step=False):
    """Inverse of :func:`checkpoint`; raises :class:`StorageError` on any corruption."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < _CK_HEADER.size:
        raise StorageError(f"{path}: truncated checkpoint header")
    magic, version, dim, n, L, t, step, length, crc = _CK_HEADER.unpack_from(blob)
    if magic != _CK_MAGIC:
        raise StorageError(f"{path}: not a checkpoint file")
    if version != CHECKPOINT_VERSION:
        raise StorageError(f"{path}: incompatible checkpoint version {version} (this build reads {CHECKPOINT_VERSION})")
    payload = blob[_CK_HEADER.size:]
    if len(payload) != length:
        raise StorageError(f"{path}: checkpoint truncated ({len(payload)} of {length} payload bytes)")
    if zlib.crc32(payload) != crc:
        raise StorageError(f"{path}: checkpoint checksum mismatch")
    try:
        grid = GridSpec(dim, n, L)
    except Exception as exc:
        raise StorageError(f"{path}: invalid grid header: {exc}") from exc
    m = grid.size
    if length != 48 * m:
        raise StorageError(f"{path}: payload length {length} inconsistent with grid {grid}")
    f8 = np.frombuffer(payload, dtype="<f8", count=2 * m)
    c16 = np.frombuffer(payload, dtype="<c16", offset=16 * m, count=2 * m)

    def field(vals, coeffs):
        f = Field(grid, coeffs.reshape(grid.shape).astype(complex))
        v = vals.reshape(grid.shape).astype(float)
        v.setflags(write=False)
        f.__dict__["values"] = v
        return f

    state = State(field(f8[:m], c16[:m]), field(f8[m:], c16[m:]), t)
    return (state, step) if with_step else state


def write_json_atomic(obj, path):
    tmp = f"{os.fspath(path)}.tmp"
    try:
        with open(tmp, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


class RunLock:
    """Exclusive ownership of a run directory via an ``O_EXCL`` lock file."""

    NAME = ".wavegrow.lock"

    def __init__(self, directory):
        self.path = os.path.join(os.fspath(directory), self.NAME)
        self._held = False

    def acquire(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as exc:
            raise StorageError(f"run directory is locked by another writer ({self.path})") from exc
        except OSError as exc:
            raise StorageError(f"cannot create lock {self.path}: {exc}") from exc
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        self._held = True
        return self

    def release(self):
        if self._held:
            try:
                os.remove(self.path)
            except FileNotFoundError:
                pass
            self._held = False

    __enter__ = acquire

    def __exit__(self, *exc):
        self.release()
