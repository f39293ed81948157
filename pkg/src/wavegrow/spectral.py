"""Periodic-grid fields with exact spectral calculus.

The box is ``[-L, L)**dim`` with ``n`` points per axis.  Spectral
coefficients use the *forward* normalisation: the forward transform carries
``1/n**dim`` so that a constant field ``c`` has a single coefficient ``c`` at
mode zero.  Physical integrals use the cell weight ``(2L/n)**dim``; with
these two conventions Parseval reads::

    sum(|u|**2) * (2L/n)**dim == (2L)**dim * sum(|c|**2)

Frequencies along an axis are ``xi = pi*m/L`` for the symmetric integer
index range ``m = -n/2 .. n/2 - 1``.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, DomainError, StorageError

__all__ = [
    "GridSpec",
    "Field",
    "State",
    "forward",
    "inverse",
    "transform",
    "derivative",
    "sobolev_norm",
    "lp_norm",
    "hcal_norm",
    "bessel_potential",
    "dealias",
    "dealiased_cube",
    "write_field",
    "read_field",
    "export_field_csv",
]


def fft_workers():
    """Thread count for FFTs, capped by ``WAVEGROW_THREADS`` (default 1)."""
    raw = os.environ.get("WAVEGROW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class GridSpec:
    dim: int
    n: int
    L: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim!r}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or self.n & (self.n - 1):
            raise ConfigurationError(f"n must be a power of two >= 8, got {self.n!r}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ConfigurationError(f"half width L must be positive, got {self.L!r}")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def size(self):
        return self.n**self.dim

    @property
    def dx(self):
        return 2.0 * self.L / self.n

    @property
    def cell_volume(self):
        return self.dx**self.dim

    @property
    def volume(self):
        return (2.0 * self.L) ** self.dim

    @cached_property
    def axis_points(self):
        return -self.L + self.dx * np.arange(self.n)

    @cached_property
    def coords(self):
        """Broadcastable physical coordinate arrays, one per axis."""
        return tuple(_along(self.axis_points, a, self.dim) for a in range(self.dim))

    @cached_property
    def radius(self):
        r2 = sum(x * x for x in self.coords)
        return np.sqrt(np.broadcast_to(r2, self.shape))

    @cached_property
    def mode_index(self):
        return np.rint(sfft.fftfreq(self.n, 1.0 / self.n)).astype(int)

    @cached_property
    def wavenumbers(self):
        """Broadcastable frequency arrays ``xi_a = pi*m/L``."""
        xi = np.pi * self.mode_index / self.L
        return tuple(_along(xi, a, self.dim) for a in range(self.dim))

    @cached_property
    def xi2(self):
        return np.broadcast_to(sum(k * k for k in self.wavenumbers), self.shape).copy()

    @cached_property
    def xi_abs(self):
        return np.sqrt(self.xi2)

    @cached_property
    def dealias_mask(self):
        """Two-thirds rule: keep modes with ``|m| <= n/3`` on every axis."""
        keep = np.abs(self.mode_index) <= self.n // 3
        mask = np.ones(self.shape, dtype=bool)
        for a in range(self.dim):
            mask &= _along(keep, a, self.dim)
        return mask

    def nyquist_plane(self, axis):
        """Index expression selecting the Nyquist modes of ``axis``."""
        idx = [slice(None)] * self.dim
        idx[axis] = self.n // 2
        return tuple(idx)


def _along(vec, axis, dim):
    shape = [1] * dim
    shape[axis] = vec.shape[0]
    return vec.reshape(shape)


def forward(grid, values):
    """Physical samples to spectral coefficients (carries ``1/n**dim``)."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ConfigurationError(f"sample array shape {values.shape} does not match grid {grid.shape}")
    return sfft.fftn(values, norm="forward", workers=fft_workers())


def inverse(grid, coeffs):
    """Spectral coefficients to real physical samples."""
    coeffs = np.asarray(coeffs)
    if coeffs.shape != grid.shape:
        raise ConfigurationError(f"coefficient array shape {coeffs.shape} does not match grid {grid.shape}")
    return sfft.ifftn(coeffs, norm="forward", workers=fft_workers()).real


def transform(grid, data, direction):
    if direction == "forward":
        return forward(grid, data)
    if direction == "inverse":
        return inverse(grid, data)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


@dataclass(frozen=True, eq=False)
class Field:
    """Real scalar function on a periodic grid, held as spectral coefficients.

    Fields built with :meth:`from_values` remember their samples, so
    ``Field.from_values(g, v).values`` is bit-identical to ``v``.
    """

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise ConfigurationError(
                f"coefficient array shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def from_values(cls, grid, values):
        values = np.array(values, dtype=float)
        field = cls(grid, forward(grid, values))
        values.setflags(write=False)
        field.__dict__["values"] = values
        return field

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def constant(cls, grid, c):
        coeffs = np.zeros(grid.shape, dtype=complex)
        coeffs[(0,) * grid.dim] = c
        return cls(grid, coeffs)

    @cached_property
    def values(self):
        v = inverse(self.grid, self.coeffs)
        v.setflags(write=False)
        return v

    def __add__(self, other):
        return Field(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return Field(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return Field(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.coeffs)

    def conjugate_symmetry_error(self):
        """Max deviation of ``c(-m)`` from ``conj(c(m))`` (zero for real fields)."""
        c = self.coeffs
        flipped = np.conj(np.roll(np.flip(c), 1, axis=tuple(range(c.ndim))))
        return float(np.max(np.abs(c - flipped))) if c.size else 0.0


@dataclass(frozen=True, eq=False)
class State:
    """Phase-space point ``(u, u_t)`` at time ``t``."""

    u: Field
    ut: Field
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.ut.grid:
            raise ConfigurationError("u and ut live on different grids")

    @property
    def grid(self):
        return self.u.grid

    @classmethod
    def zeros(cls, grid, t=0.0):
        return cls(Field.zeros(grid), Field.zeros(grid), t)

    @classmethod
    def from_values(cls, grid, u, ut, t=0.0):
        return cls(Field.from_values(grid, u), Field.from_values(grid, ut), float(t))

    @classmethod
    def from_coeffs(cls, grid, u_hat, ut_hat, t=0.0):
        return cls(Field(grid, u_hat), Field(grid, ut_hat), float(t))

    def __sub__(self, other):
        return State(self.u - other.u, self.ut - other.ut, self.t)


def derivative(field, axis, order=1):
    """Spectral derivative of ``order`` along ``axis``.

    Multiplies each coefficient by ``(i*xi)**order`` and zeroes the Nyquist
    plane of ``axis`` so the result stays real.
    """
    grid = field.grid
    if not 0 <= axis < grid.dim:
        raise DomainError(f"axis {axis} out of range for dim={grid.dim}")
    if order < 0:
        raise DomainError("derivative order must be nonnegative")
    return Field(grid, _derivative_coeffs(grid, field.coeffs, axis, order))


def _derivative_coeffs(grid, coeffs, axis, order):
    if order == 0:
        return coeffs.copy()
    out = coeffs * (1j * grid.wavenumbers[axis]) ** order
    out[grid.nyquist_plane(axis)] = 0.0
    return out


def multi_derivative_coeffs(grid, coeffs, alpha):
    """Apply ``d^alpha`` for a multi-index ``alpha`` (length ``dim``)."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != grid.dim or min(alpha, default=0) < 0:
        raise DomainError(f"multi-index {alpha} invalid for dim={grid.dim}")
    out = coeffs
    for axis, order in enumerate(alpha):
        if order:
            out = _derivative_coeffs(grid, out, axis, order)
    return out.copy() if out is coeffs else out


def sobolev_norm_coeffs(grid, coeffs, k):
    weight = (1.0 + grid.xi2) ** k if k else 1.0
    return float(np.sqrt(grid.volume * np.sum(weight * np.abs(coeffs) ** 2)))


def sobolev_norm(field, k):
    """``||(1 - Laplacian)^{k/2} u||_{L^2}`` through the Fourier multiplier."""
    if k < 0:
        raise DomainError("Sobolev index must be nonnegative")
    return sobolev_norm_coeffs(field.grid, field.coeffs, k)


def lp_norm_values(grid, values, p):
    if not p >= 1:
        raise DomainError(f"Lebesgue exponent must be >= 1, got {p!r}")
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 2:
        return float(np.sqrt(grid.cell_volume * np.sum(a * a)))
    peak = a.max()
    if peak == 0:
        return 0.0
    # scale by the peak so |u|**p stays representable for large p
    return float(peak * (grid.cell_volume * np.sum((a / peak) ** p)) ** (1.0 / p))


def lp_norm(field, p):
    """Rectangle-rule ``L^p`` norm over the box; ``p = inf`` is the sample max."""
    return lp_norm_values(field.grid, field.values, p)


def hcal_norm(state):
    """Phase-space norm ``||u||_{H^1} + ||u_t||_{L^2}``."""
    g = state.grid
    return sobolev_norm_coeffs(g, state.u.coeffs, 1) + sobolev_norm_coeffs(g, state.ut.coeffs, 0)


def bessel_potential(field, s):
    """``(1 - Laplacian)^{s/2} u`` as a new field."""
    return Field(field.grid, field.coeffs * (1.0 + field.grid.xi2) ** (s / 2.0))


def dealias(grid, coeffs):
    return np.where(grid.dealias_mask, coeffs, 0.0)


def dealiased_cube(grid, coeffs):
    """Coefficients of ``P[(P u)**3]`` with ``P`` the two-thirds truncation."""
    v = inverse(grid, dealias(grid, coeffs))
    return dealias(grid, forward(grid, v * v * v))


# --- serialisation ---------------------------------------------------------

_FIELD_MAGIC = b"WGFD"
_FIELD_VERSION = 1
_FIELD_HEADER = struct.Struct("<4sIIId")


def write_field(path, field):
    """Header ``(magic, version, dim, n, L)`` then float64 LE samples, row-major."""
    g = field.grid
    header = _FIELD_HEADER.pack(_FIELD_MAGIC, _FIELD_VERSION, g.dim, g.n, float(g.L))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    except OSError as exc:
        raise StorageError(f"cannot write field to {path}: {exc}") from exc


def read_field(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read field from {path}: {exc}") from exc
    if len(blob) < _FIELD_HEADER.size:
        raise StorageError(f"{path}: truncated field header")
    magic, version, dim, n, L = _FIELD_HEADER.unpack_from(blob)
    if magic != _FIELD_MAGIC:
        raise StorageError(f"{path}: not a field file")
    if version != _FIELD_VERSION:
        raise StorageError(f"{path}: field format version {version}, expected {_FIELD_VERSION}")
    try:
        grid = GridSpec(dim, n, L)
    except ConfigurationError as exc:
        raise StorageError(f"{path}: invalid grid header: {exc}") from exc
    payload = blob[_FIELD_HEADER.size:]
    if len(payload) != 8 * grid.size:
        raise StorageError(f"{path}: expected {8 * grid.size} payload bytes, found {len(payload)}")
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.shape)
    return Field.from_values(grid, values)


def export_field_csv(path, field):
    """Two-column ``x,u`` CSV for 1D fields."""
    if field.grid.dim != 1:
        raise ConfigurationError("CSV export is only defined for 1D fields")
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u"])
            for x, v in zip(field.grid.axis_points, field.values):
                w.writerow([format(x, ".17g"), format(v, ".17g")])
    except OSError as exc:
        raise StorageError(f"cannot write CSV to {path}: {exc}") from exc
