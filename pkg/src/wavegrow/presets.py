"""Named initial-data presets."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .spectral import Field, State, dealias, forward, read_field

PRESETS = ("gaussian-bump", "single-mode", "from-file", "random-smooth")


def gaussian_bump(grid, amplitude=1.0, width=1.0, velocity=0.0):
    """``u = A exp(-|x|^2 / w^2)``, ``u_t = velocity * u``."""
    if not width > 0:
        raise ConfigurationError("width must be positive")
    u = amplitude * np.exp(-(grid.radius**2) / width**2)
    return State.from_values(grid, u, velocity * u)


def single_mode(grid, m=1, amplitude=1.0, axis=0):
    """``u = A sin(pi m x_axis / L)`` at rest."""
    x = grid.coords[axis]
    u = amplitude * np.sin(np.pi * m * x / grid.L) * np.ones(grid.shape)
    return State.from_values(grid, u, np.zeros(grid.shape))


def random_smooth(grid, rng, amplitude=1.0, decay=4.0, band=None):
    """Band-limited random state with spectrum ``exp(-|xi|^2 / decay)``.

    Both components are rescaled to peak ``amplitude``.  Modes outside the
    dealiasing band (or ``|m| > band``) are removed.
    """
    out = []
    for _ in range(2):
        noise = rng.standard_normal(grid.shape)
        c = forward(grid, noise) * np.exp(-grid.xi2 / decay)
        c = dealias(grid, c)
        if band is not None:
            c = np.where(_band_mask(grid, band), c, 0.0)
        f = Field(grid, c)
        peak = np.max(np.abs(f.values))
        out.append(f * (amplitude / peak) if peak > 0 else f)
    return State(out[0], out[1], 0.0)


def _band_mask(grid, band):
    m = grid.mode_index
    mask = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        shape = [1] * grid.dim
        shape[ax] = grid.n
        mask &= (np.abs(m) <= band).reshape(shape)
    return mask


def from_file(grid, path, velocity_path=None):
    """Load ``u`` (and optionally ``u_t``) from binary field files."""
    u = read_field(path)
    if u.grid != grid:
        raise ConfigurationError(f"field in {path} was written on {u.grid}, not {grid}")
    if velocity_path is None:
        ut = Field.zeros(grid)
    else:
        ut = read_field(velocity_path)
        if ut.grid != grid:
            raise ConfigurationError(f"field in {velocity_path} was written on {ut.grid}, not {grid}")
    return State(u, ut, 0.0)


def build_state(grid, name, params, rng=None):
    if name == "gaussian-bump":
        return gaussian_bump(grid, params.get("amplitude", 1.0), params.get("width", 1.0),
                             params.get("velocity", 0.0))
    if name == "single-mode":
        return single_mode(grid, int(params.get("m", 1)), params.get("amplitude", 1.0))
    if name == "from-file":
        return from_file(grid, params["path"], params.get("velocity_path"))
    if name == "random-smooth":
        if rng is None:
            rng = np.random.default_rng(0)
        return random_smooth(grid, rng, params.get("amplitude", 1.0), params.get("decay", 4.0))
    raise ConfigurationError(f"unknown preset {name!r}")
