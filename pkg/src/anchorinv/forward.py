"""Steady-state 1-D diffusion forward model and the external-command hook.

Each process solves d/dx(y dz/dx) = s on a unit-spacing node grid by finite
volumes: harmonic-mean interface transmissibilities, Dirichlet values at the
first and last cell centers, and the interior tridiagonal system eliminated
directly. The field y enters in natural unit (strictly positive); the
engine's fields live in model unit and are back-transformed before solving.

Observation and source indices are 0-based here; config and data files use
1-based node indices.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass

import numpy as np

from . import backends
from .exceptions import ForwardDomainError, ForwardModelError, ForwardSolveError
from .transform import Transform

__all__ = [
    "ProcessSpec",
    "ForwardSpec",
    "solve_process",
    "evaluate",
    "evaluate_batch",
    "DiffusionForward",
    "ExternalForward",
]


@dataclass(frozen=True)
class ProcessSpec:
    """One diffusion process: source vector, boundary values, observations."""

    source: np.ndarray
    bc: tuple
    observations: np.ndarray

    def __post_init__(self):
        source = np.atleast_1d(np.asarray(self.source, dtype=np.float64))
        obs = np.atleast_1d(np.asarray(self.observations, dtype=np.int64))
        left, right = (float(v) for v in self.bc)
        if source.ndim != 1 or source.shape[0] < 2:
            raise ValueError("source must cover a grid of at least two nodes")
        if not np.all(np.isfinite(source)):
            raise ValueError("source must be finite")
        if not (np.isfinite(left) and np.isfinite(right)):
            raise ValueError("boundary values must be finite")
        if obs.ndim != 1 or obs.shape[0] == 0:
            raise ValueError("at least one observation index required")
        if np.any(obs < 0) or np.any(obs >= source.shape[0]):
            raise ValueError("observation indices outside the grid")
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "bc", (left, right))

    @property
    def grid_size(self) -> int:
        return self.source.shape[0]


@dataclass(frozen=True)
class ForwardSpec:
    """Ordered collection of processes sharing one grid."""

    processes: tuple

    def __post_init__(self):
        procs = tuple(self.processes)
        if not procs:
            raise ValueError("at least one process required")
        sizes = {p.grid_size for p in procs}
        if len(sizes) != 1:
            raise ValueError("all processes must share the grid size")
        object.__setattr__(self, "processes", procs)

    @property
    def grid_size(self) -> int:
        return self.processes[0].grid_size

    @property
    def output_dim(self) -> int:
        return int(sum(p.observations.shape[0] for p in self.processes))


def _transmissibilities(y: np.ndarray) -> np.ndarray:
    return 2.0 * y[:-1] * y[1:] / (y[:-1] + y[1:])


def _interior_system(T: np.ndarray, source: np.ndarray, bc):
    left, right = bc
    m = source.shape[0] - 2
    d = -(T[:-1] + T[1:])
    dl = T[1:-1]
    du = T[1:-1]
    b = source[1:-1].copy()
    b[0] -= T[0] * left
    b[m - 1] -= T[m] * right
    return dl, d, du, b


def solve_process(y: np.ndarray, source: np.ndarray, bc) -> np.ndarray:
    """Solve one process for the state z over all nodes.

    ``y`` is the field in natural unit (all entries > 0). Raises
    ForwardDomainError for nonpositive y and ForwardSolveError when the
    elimination yields non-finite values.
    """
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    source = np.atleast_1d(np.asarray(source, dtype=np.float64))
    if y.shape != source.shape:
        raise ValueError("field and source must share the grid")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise ForwardDomainError("field values must be positive and finite")
    left, right = (float(v) for v in bc)
    G = y.shape[0]
    if G == 2:
        return np.array([left, right])
    T = _transmissibilities(y)
    dl, d, du, b = _interior_system(T, source, (left, right))
    x = backends.tridiag_solve(dl, d, du, b)
    if not np.all(np.isfinite(x)):
        raise ForwardSolveError("tridiagonal elimination produced non-finite values")
    return np.concatenate([[left], x, [right]])


def evaluate(spec: ForwardSpec, field_model: np.ndarray, field_transform: Transform) -> np.ndarray:
    """Forward output for one model-unit field: back-transform, solve every
    process, gather observations in process order."""
    field_model = np.atleast_1d(np.asarray(field_model, dtype=np.float64))
    if field_model.shape[0] != spec.grid_size:
        raise ValueError("field length must match the process grid")
    y_nat = np.atleast_1d(field_transform.invert(field_model))
    out = np.empty(spec.output_dim)
    pos = 0
    for proc in spec.processes:
        z = solve_process(y_nat, proc.source, proc.bc)
        nobs = proc.observations.shape[0]
        out[pos : pos + nobs] = z[proc.observations]
        pos += nobs
    return out


def evaluate_batch(
    spec: ForwardSpec, fields_model: np.ndarray, field_transform: Transform
):
    """Forward outputs for many fields at once.

    Returns (outputs (n, q), ok (n,)): rows with domain violations or
    non-finite solves are flagged False and left as NaN.
    """
    fields_model = np.atleast_2d(np.asarray(fields_model, dtype=np.float64))
    n, G = fields_model.shape
    if G != spec.grid_size:
        raise ValueError("field length must match the process grid")
    out = np.full((n, spec.output_dim), np.nan)
    ok = np.zeros(n, dtype=bool)
    if n == 0:
        return out, ok
    # invert only finite rows; transforms reject non-finite input outright
    finite = np.all(np.isfinite(fields_model), axis=1)
    y_nat = np.full((n, G), np.nan)
    if np.any(finite):
        y_nat[finite] = field_transform.invert(
            fields_model[finite].reshape(-1)
        ).reshape(-1, G)
    valid = finite & np.all(np.isfinite(y_nat), axis=1) & np.all(y_nat > 0, axis=1)
    if not np.any(valid):
        return out, ok
    yv = y_nat[valid]
    nv = yv.shape[0]
    z_parts = []
    if G == 2:
        fine = np.ones(nv, dtype=bool)
        for proc in spec.processes:
            z = np.tile(np.array(proc.bc), (nv, 1))
            z_parts.append(z[:, proc.observations])
    else:
        T = 2.0 * yv[:, :-1] * yv[:, 1:] / (yv[:, :-1] + yv[:, 1:])
        dl = T[:, 1:-1]
        du = T[:, 1:-1]
        d = -(T[:, :-1] + T[:, 1:])
        fine = np.ones(nv, dtype=bool)
        for proc in spec.processes:
            left, right = proc.bc
            b = np.tile(proc.source[1:-1], (nv, 1))
            b[:, 0] -= T[:, 0] * left
            b[:, -1] -= T[:, -1] * right
            x = backends.tridiag_solve_batch(dl, d, du, b)
            fine &= np.all(np.isfinite(x), axis=1)
            z = np.empty((nv, G))
            z[:, 0] = left
            z[:, -1] = right
            z[:, 1:-1] = x
            z_parts.append(z[:, proc.observations])
    rows = np.concatenate(z_parts, axis=1)
    keep = np.nonzero(valid)[0][fine]
    out[keep] = rows[fine]
    ok[keep] = True
    return out, ok


class DiffusionForward:
    """Built-in forward model bound to a spec and a field transform."""

    def __init__(self, spec: ForwardSpec, field_transform: Transform):
        self.spec = spec
        self.field_transform = field_transform

    @property
    def output_dim(self) -> int:
        return self.spec.output_dim

    def evaluate(self, field_model: np.ndarray) -> np.ndarray:
        return evaluate(self.spec, field_model, self.field_transform)

    def evaluate_many(self, fields_model: np.ndarray):
        return evaluate_batch(self.spec, fields_model, self.field_transform)


class ExternalForward:
    """Forward model delegated to a user executable.

    The command is invoked as ``cmd <input_file> <output_file>``. The input
    file holds the natural-unit field, one value per line; the executable
    must write one output value per line. Nonzero exit, missing output,
    wrong length, or non-finite values raise ForwardModelError.
    """

    def __init__(self, command: str, output_dim: int, field_transform: Transform):
        self.command = shlex.split(command)
        if not self.command:
            raise ValueError("empty external forward command")
        if output_dim < 1:
            raise ValueError("output_dim must be positive")
        self._output_dim = int(output_dim)
        self.field_transform = field_transform

    @property
    def output_dim(self) -> int:
        return self._output_dim

    def evaluate(self, field_model: np.ndarray) -> np.ndarray:
        field_model = np.atleast_1d(np.asarray(field_model, dtype=np.float64))
        y_nat = np.atleast_1d(self.field_transform.invert(field_model))
        with tempfile.TemporaryDirectory(prefix="anchorinv-fwd-") as tmp:
            in_path = os.path.join(tmp, "field.txt")
            out_path = os.path.join(tmp, "output.txt")
            np.savetxt(in_path, y_nat, fmt="%.17g")
            try:
                proc = subprocess.run(
                    self.command + [in_path, out_path],
                    capture_output=True,
                    text=True,
                )
            except OSError as exc:
                raise ForwardModelError(f"external forward failed to start: {exc}") from exc
            if proc.returncode != 0:
                raise ForwardModelError(
                    f"external forward exited {proc.returncode}: {proc.stderr.strip()}"
                )
            if not os.path.exists(out_path):
                raise ForwardModelError("external forward wrote no output file")
            try:
                vals = np.loadtxt(out_path, dtype=np.float64, ndmin=1)
            except ValueError as exc:
                raise ForwardModelError(f"unreadable external output: {exc}") from exc
        if vals.shape != (self._output_dim,):
            raise ForwardModelError(
                f"external forward returned {vals.shape[0]} values, "
                f"expected {self._output_dim}"
            )
        if not np.all(np.isfinite(vals)):
            raise ForwardSolveError("external forward returned non-finite values")
        return vals

    def evaluate_many(self, fields_model: np.ndarray):
        fields_model = np.atleast_2d(np.asarray(fields_model, dtype=np.float64))
        n = fields_model.shape[0]
        out = np.full((n, self._output_dim), np.nan)
        ok = np.zeros(n, dtype=bool)
        for i in range(n):
            try:
                out[i] = self.evaluate(fields_model[i])
                ok[i] = True
            except ForwardModelError:
                continue
        return out, ok
