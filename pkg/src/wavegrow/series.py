"""Time-stamped diagnostic records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArityError, DomainError


@dataclass
class NormSeries:
    """Columns of diagnostics sampled at strictly increasing times."""

    times: list = field(default_factory=list)
    columns: dict = field(default_factory=dict)

    @property
    def names(self):
        return list(self.columns)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, name):
        if name == "t":
            return np.asarray(self.times, dtype=float)
        return np.asarray(self.columns[name], dtype=float)

    def append(self, t, row):
        if self.times and not t > self.times[-1]:
            raise DomainError(f"sample time {t} does not increase past {self.times[-1]}")
        if not self.columns:
            self.columns = {k: [] for k in row}
        elif set(row) != set(self.columns):
            raise ArityError(f"row keys {sorted(row)} differ from columns {sorted(self.columns)}")
        self.times.append(float(t))
        for k, v in row.items():
            self.columns[k].append(float(v))

    def rows(self):
        for i, t in enumerate(self.times):
            yield t, {k: v[i] for k, v in self.columns.items()}

    def window(self, t0, t1):
        t = self["t"]
        keep = (t >= t0) & (t <= t1)
        out = NormSeries()
        out.times = list(t[keep])
        out.columns = {k: list(np.asarray(v)[keep]) for k, v in self.columns.items()}
        return out

    def validate(self, norm_prefixes=("H", "X", "Y")):
        t = self["t"]
        if np.any(np.diff(t) <= 0):
            raise DomainError("times are not strictly increasing")
        for k, v in self.columns.items():
            if len(v) != len(t):
                raise ArityError(f"column {k} has {len(v)} entries for {len(t)} times")
            if k.startswith(norm_prefixes) and np.any(np.asarray(v) < 0):
                raise DomainError(f"norm column {k} has negative entries")
