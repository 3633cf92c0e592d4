"""Gaussian field model on a 1-D grid with linear-functional anchors.

The field (in model unit) is Y ~ N(X beta, eta2 * R(lam)) with exponential
correlation R_ij = exp(-|x_i - x_j| / lam). Anchors are linear functionals
H y whose values pin the field: conditioning on them is exact Gaussian
conditioning, and simulation reproduces anchor values to solver precision
via residual kriging.

A field realization (``GridField``) is a plain float64 vector over the grid
nodes, model unit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from . import mvn
from .mvn import MvnDist, chol_psd

__all__ = [
    "Grid1D",
    "StructuralParams",
    "AnchorSet",
    "ModelParams",
    "exp_correlation",
    "correlation_matrix",
    "prior_field_dist",
    "anchored_field_dist",
    "simulate_field",
    "anchor_conditional_dist",
]

MEASURED = "measured"
INVERTED = "inverted"


@dataclass(frozen=True)
class Grid1D:
    """Ordered 1-D grid of node locations plus the physical domain length."""

    locations: np.ndarray
    domain_length: float

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=np.float64)
        if loc.ndim != 1 or loc.shape[0] < 2:
            raise ValueError("grid needs at least two node locations")
        if not np.all(np.diff(loc) > 0):
            raise ValueError("grid locations must be strictly increasing")
        if not np.isfinite(self.domain_length) or self.domain_length <= 0:
            raise ValueError("domain_length must be positive")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "domain_length", float(self.domain_length))

    @classmethod
    def regular(cls, size: int, spacing: float = 1.0, start: float = 1.0) -> "Grid1D":
        if size < 2:
            raise ValueError("grid needs at least two nodes")
        loc = start + spacing * np.arange(size, dtype=np.float64)
        return cls(loc, domain_length=size * spacing)

    @property
    def size(self) -> int:
        return self.locations.shape[0]


@dataclass(frozen=True)
class StructuralParams:
    """Trend coefficients, field variance, and correlation range."""

    beta: np.ndarray
    eta2: float
    lam: float

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise ValueError("beta must be a finite vector")
        if not (np.isfinite(self.eta2) and self.eta2 > 0):
            raise ValueError("eta2 must be positive")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError("lam must be positive")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "eta2", float(self.eta2))
        object.__setattr__(self, "lam", float(self.lam))


@dataclass(frozen=True)
class AnchorSet:
    """Linear functionals H of the field, one row per anchor.

    kinds tags each row ``measured`` (value set by type-A data) or
    ``inverted`` (value to be inferred). ``values`` carries the anchor
    values once assigned. Rows must be nonzero and linearly independent;
    a row with a single nonzero entry is a point anchor and that entry
    must be exactly 1.
    """

    H: np.ndarray
    kinds: tuple
    values: np.ndarray | None = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=np.float64))
        if H.size == 0:
            H = H.reshape(0, H.shape[1] if H.ndim == 2 else 0)
        kinds = tuple(self.kinds)
        if H.shape[0] != len(kinds):
            raise ValueError("one kind per anchor row required")
        if any(k not in (MEASURED, INVERTED) for k in kinds):
            raise ValueError(f"anchor kinds must be {MEASURED!r} or {INVERTED!r}")
        if not np.all(np.isfinite(H)):
            raise ValueError("anchor matrix must be finite")
        m = H.shape[0]
        if m:
            rownorm = np.max(np.abs(H), axis=1)
            if np.any(rownorm == 0):
                raise ValueError("anchor rows must be nonzero")
            for i in range(m):
                nz = np.nonzero(H[i])[0]
                if nz.shape[0] == 1 and H[i, nz[0]] != 1.0:
                    raise ValueError(
                        "point-anchor rows must be unit selectors (single entry 1)"
                    )
            if np.linalg.matrix_rank(H) < m:
                raise ValueError("anchor rows must be linearly independent")
        values = self.values
        if values is not None:
            values = np.atleast_1d(np.asarray(values, dtype=np.float64))
            if values.shape != (m,):
                raise ValueError(f"anchor values must have shape ({m},)")
            if not np.all(np.isfinite(values)):
                raise ValueError("anchor values must be finite")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "values", values)

    @classmethod
    def empty(cls, grid_size: int) -> "AnchorSet":
        return cls(np.zeros((0, grid_size)), ())

    @classmethod
    def points(
        cls,
        grid: Grid1D,
        measured_nodes=(),
        inverted_nodes=(),
    ) -> "AnchorSet":
        """Point anchors at 0-based grid node indices."""
        idx = list(measured_nodes) + list(inverted_nodes)
        if len(set(idx)) != len(idx):
            raise ValueError("anchor nodes must be distinct")
        H = np.zeros((len(idx), grid.size))
        for r, node in enumerate(idx):
            if not 0 <= node < grid.size:
                raise ValueError(f"anchor node {node} outside grid")
            H[r, node] = 1.0
        kinds = (MEASURED,) * len(tuple(measured_nodes)) + (INVERTED,) * len(
            tuple(inverted_nodes)
        )
        return cls(H, kinds)

    @property
    def size(self) -> int:
        return self.H.shape[0]

    @property
    def measured_mask(self) -> np.ndarray:
        return np.array([k == MEASURED for k in self.kinds], dtype=bool)

    @property
    def H_measured(self) -> np.ndarray:
        return self.H[self.measured_mask]

    @property
    def H_inverted(self) -> np.ndarray:
        return self.H[~self.measured_mask]

    def with_values(self, values) -> "AnchorSet":
        return AnchorSet(self.H, self.kinds, values)


@dataclass(frozen=True)
class ModelParams:
    """A complete parameter draw: structural parameters plus anchor values."""

    structural: StructuralParams
    anchors: AnchorSet

    def __post_init__(self):
        if self.anchors.size and self.anchors.values is None:
            raise ValueError("ModelParams requires anchor values")


def exp_correlation(x1, x2, lam: float):
    """Exponential correlation exp(-|x1 - x2| / lam); lam > 0."""
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError("lam must be positive")
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    out = np.exp(-np.abs(x1 - x2) / lam)
    return float(out) if out.ndim == 0 else out


def correlation_matrix(locations: np.ndarray, lam: float) -> np.ndarray:
    loc = np.asarray(locations, dtype=np.float64)
    return exp_correlation(loc[:, None], loc[None, :], lam)


def _check_design(X: np.ndarray, grid: Grid1D, d_beta: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != grid.size:
        raise ValueError(f"design matrix must have {grid.size} rows")
    if X.shape[1] != d_beta:
        raise ValueError(
            f"design matrix has {X.shape[1]} columns, beta has {d_beta}"
        )
    return X


def prior_field_dist(grid: Grid1D, X: np.ndarray, structural: StructuralParams) -> MvnDist:
    """Unanchored field distribution N(X beta, eta2 * R(lam))."""
    X = _check_design(X, grid, structural.beta.shape[0])
    R = correlation_matrix(grid.locations, structural.lam)
    return MvnDist(X @ structural.beta, structural.eta2 * R)


def anchored_field_dist(
    grid: Grid1D,
    X: np.ndarray,
    structural: StructuralParams,
    anchors: AnchorSet,
) -> MvnDist:
    """Field distribution conditioned on all anchor values H y = values."""
    prior = prior_field_dist(grid, X, structural)
    if anchors.size == 0:
        return prior
    if anchors.values is None:
        raise ValueError("anchored_field_dist requires anchor values")
    if anchors.H.shape[1] != grid.size:
        raise ValueError("anchor matrix width must match grid size")
    return mvn.condition_on_linear(prior, anchors.H, anchors.values)


def simulate_field(
    grid: Grid1D,
    X: np.ndarray,
    structural: StructuralParams,
    anchors: AnchorSet,
    rng: np.random.Generator,
) -> np.ndarray:
    """One draw from the anchored field distribution.

    Uses residual kriging: draw an unanchored field, then correct it by the
    anchor misfit. The correction runs twice (one refinement pass); a long
    range makes the anchor system ill-conditioned enough that a single
    solve can leave a misfit near 1e-8 at large field variance.
    """
    X = _check_design(X, grid, structural.beta.shape[0])
    R = correlation_matrix(grid.locations, structural.lam)
    mean = X @ structural.beta
    L = chol_psd(R)
    y = mean + np.sqrt(structural.eta2) * (L @ rng.standard_normal(grid.size))
    if anchors.size == 0:
        return y
    if anchors.values is None:
        raise ValueError("simulate_field requires anchor values")
    H = anchors.H
    S = H @ R @ H.T
    Ls = chol_psd(0.5 * (S + S.T))
    for _ in range(2):
        y = y + R @ H.T @ cho_solve((Ls, True), anchors.values - H @ y)
    return y


def anchor_conditional_dist(
    structural: StructuralParams,
    grid: Grid1D,
    X: np.ndarray,
    H_known: np.ndarray,
    values_known: np.ndarray,
    H_query: np.ndarray,
) -> MvnDist:
    """Distribution of H_query y given H_known y = values_known.

    With no known rows this is just the image of the prior under H_query.
    """
    prior = prior_field_dist(grid, X, structural)
    H_query = np.atleast_2d(np.asarray(H_query, dtype=np.float64))
    H_known = np.atleast_2d(np.asarray(H_known, dtype=np.float64))
    if H_known.size == 0:
        return mvn.linear_image(prior, H_query)
    values_known = np.atleast_1d(np.asarray(values_known, dtype=np.float64))
    stacked = np.vstack([H_query, H_known])
    joint = mvn.linear_image(prior, stacked)
    return mvn.condition_partitioned(joint, H_query.shape[0], values_known)
