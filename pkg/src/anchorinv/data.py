"""Measurement data containers, error models, and text data files.

Type-A data are direct linear measurements of the field (model unit):
z_a = H_a y + eps_a. Type-B data are forward-model outputs:
z_b = M(y) + eps_b.

File formats (whitespace separated, ``#`` starts a comment line):

  type-A:  ``location value [sd]``  -- location is a grid node coordinate
  type-B:  ``index value [sd]``     -- 1-based index into the forward output

A missing sd column means error-free; a mix of lines with and without sd
treats the missing ones as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import Grid1D

__all__ = [
    "ErrorDist",
    "TypeAData",
    "TypeBData",
    "assign_typeA_anchors",
    "perturb_forward_output",
    "read_typeA_file",
    "write_typeA_file",
    "read_typeB_file",
    "write_typeB_file",
]


@dataclass(frozen=True)
class ErrorDist:
    """Measurement error model: none, or independent zero-mean normals."""

    kind: str
    sd: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("none", "normal"):
            raise ValueError(f"unknown error kind {self.kind!r}")
        sd = self.sd
        if self.kind == "normal":
            sd = np.atleast_1d(np.asarray(sd, dtype=np.float64))
            if sd.ndim != 1 or not np.all(np.isfinite(sd)) or np.any(sd < 0):
                raise ValueError("sd must be a finite nonnegative vector")
        elif sd is not None:
            raise ValueError("error kind 'none' takes no sd")
        object.__setattr__(self, "sd", sd)

    @classmethod
    def none(cls) -> "ErrorDist":
        return cls("none")

    @classmethod
    def normal(cls, sd) -> "ErrorDist":
        return cls("normal", sd)

    @property
    def is_none(self) -> bool:
        return self.kind == "none"

    @property
    def is_degenerate(self) -> bool:
        """True when every draw is exactly zero."""
        return self.kind == "none" or not np.any(self.sd > 0)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """One error vector; for kind 'none' a caller-sized zero vector."""
        if self.kind == "none":
            if size is None:
                raise ValueError("error kind 'none' needs an explicit size")
            return np.zeros(size)
        if size is not None and size != self.sd.shape[0]:
            raise ValueError(f"size {size} does not match sd length {self.sd.shape[0]}")
        return self.sd * rng.standard_normal(self.sd.shape[0])


def _node_indices(grid: Grid1D, locations) -> np.ndarray:
    """Map coordinates to grid node indices; must hit nodes exactly."""
    loc = np.atleast_1d(np.asarray(locations, dtype=np.float64))
    idx = np.searchsorted(grid.locations, loc)
    idx = np.clip(idx, 0, grid.size - 1)
    left = np.clip(idx - 1, 0, grid.size - 1)
    pick = np.where(
        np.abs(grid.locations[left] - loc) < np.abs(grid.locations[idx] - loc),
        left,
        idx,
    )
    spacing = float(np.min(np.diff(grid.locations)))
    if np.any(np.abs(grid.locations[pick] - loc) > 1e-6 * spacing):
        bad = loc[np.abs(grid.locations[pick] - loc) > 1e-6 * spacing]
        raise ValueError(f"locations {bad} do not match grid nodes")
    return pick.astype(np.int64)


@dataclass(frozen=True)
class TypeAData:
    """Direct linear measurements z_a = H_a y + eps_a (model unit)."""

    H: np.ndarray
    values: np.ndarray
    error: ErrorDist

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=np.float64))
        values = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        if H.shape[0] != values.shape[0]:
            raise ValueError("one value per measurement row required")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(values))):
            raise ValueError("measurements must be finite")
        if self.error.kind == "normal" and self.error.sd.shape[0] != values.shape[0]:
            raise ValueError("error sd length must match the data length")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_points(
        cls, grid: Grid1D, locations, values, sd=None
    ) -> "TypeAData":
        """Point measurements at grid node coordinates."""
        idx = _node_indices(grid, locations)
        if len(set(idx.tolist())) != idx.shape[0]:
            raise ValueError("measurement locations must be distinct")
        H = np.zeros((idx.shape[0], grid.size))
        H[np.arange(idx.shape[0]), idx] = 1.0
        err = ErrorDist.none() if sd is None else ErrorDist.normal(sd)
        if err.kind == "normal" and not np.any(err.sd > 0):
            err = ErrorDist.none()
        return cls(H, values, err)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def node_indices(self) -> np.ndarray:
        """Node index per row; valid only for unit-selector rows."""
        idx = np.argmax(self.H, axis=1)
        if not np.allclose(self.H[np.arange(self.size), idx], 1.0) or not np.allclose(
            np.count_nonzero(self.H, axis=1), 1
        ):
            raise ValueError("measurements are not point selectors")
        return idx.astype(np.int64)


@dataclass(frozen=True)
class TypeBData:
    """Forward-output measurements z_b = M(y) + eps_b."""

    indices: np.ndarray
    values: np.ndarray
    error: ErrorDist

    def __post_init__(self):
        indices = np.atleast_1d(np.asarray(self.indices, dtype=np.int64))
        values = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        if indices.shape != values.shape or indices.ndim != 1:
            raise ValueError("indices and values must be matching vectors")
        if np.any(indices < 0):
            raise ValueError("output indices must be nonnegative")
        if len(set(indices.tolist())) != indices.shape[0]:
            raise ValueError("output indices must be distinct")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if self.error.kind == "normal" and self.error.sd.shape[0] != values.shape[0]:
            raise ValueError("error sd length must match the data length")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.shape[0]


def assign_typeA_anchors(data: TypeAData, rng: np.random.Generator) -> np.ndarray:
    """Anchor values from type-A data: z_a minus one error draw.

    Error-free data returns the measurements unchanged.
    """
    if data.error.is_none:
        return data.values.copy()
    return data.values - data.error.sample(rng)


def perturb_forward_output(
    m: np.ndarray, error: ErrorDist, rng: np.random.Generator
) -> np.ndarray:
    """Add one error draw to a forward output vector."""
    m = np.atleast_1d(np.asarray(m, dtype=np.float64))
    if error.is_none:
        return m.copy()
    if error.sd.shape[0] != m.shape[0]:
        raise ValueError("error sd length must match the output length")
    return m + error.sample(rng)


def _read_records(path, what: str):
    rows = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise ValueError(f"{path}:{ln}: expected '{what} value [sd]'")
            rows.append([float(p) for p in parts] + [0.0] * (3 - len(parts)))
    if not rows:
        raise ValueError(f"{path}: no data records")
    arr = np.asarray(rows, dtype=np.float64)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _error_from_sd(sd: np.ndarray) -> ErrorDist:
    return ErrorDist.none() if not np.any(sd > 0) else ErrorDist.normal(sd)


def read_typeA_file(path, grid: Grid1D) -> TypeAData:
    loc, val, sd = _read_records(path, "location")
    err = _error_from_sd(sd)
    return TypeAData.from_points(
        grid, loc, val, sd if err.kind == "normal" else None
    )


def write_typeA_file(path, locations, values, sd=None) -> None:
    locations = np.atleast_1d(np.asarray(locations, dtype=np.float64))
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    with open(path, "w") as fh:
        fh.write("# location value" + (" sd" if sd is not None else "") + "\n")
        for i in range(locations.shape[0]):
            line = f"{locations[i]:.17g} {values[i]:.17g}"
            if sd is not None:
                line += f" {np.atleast_1d(sd)[i]:.17g}"
            fh.write(line + "\n")


def read_typeB_file(path) -> TypeBData:
    """Read type-B records; file indices are 1-based, returned 0-based."""
    idx, val, sd = _read_records(path, "index")
    if np.any(idx != np.round(idx)) or np.any(idx < 1):
        raise ValueError(f"{path}: indices must be positive integers (1-based)")
    return TypeBData(idx.astype(np.int64) - 1, val, _error_from_sd(sd))


def write_typeB_file(path, indices, values, sd=None) -> None:
    """Write type-B records; ``indices`` are 0-based, written 1-based."""
    indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    with open(path, "w") as fh:
        fh.write("# index value" + (" sd" if sd is not None else "") + "\n")
        for i in range(indices.shape[0]):
            line = f"{indices[i] + 1:d} {values[i]:.17g}"
            if sd is not None:
                line += f" {np.atleast_1d(sd)[i]:.17g}"
            fh.write(line + "\n")
