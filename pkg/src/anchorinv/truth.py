"""Synthetic truth generation for end-to-end runs.

Takes a known natural-unit profile (the bundled one by default), runs the
forward model on it, and packages the pieces a study needs: the true
field in both units, type-A measurements at chosen nodes, type-B values
for the forward outputs, and the true values of the inverted anchors for
later scoring. Optional noise perturbs the written data, never the truth.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .data import write_typeA_file, write_typeB_file
from .field import Grid1D
from .profiles import default_profile
from .transform import Transform

__all__ = [
    "TruthBundle",
    "default_study",
    "generate_truth",
    "write_truth",
]


def default_study(grid_size: int = 80):
    """The bundled reference study: grid, forward model, layout.

    Two diffusion processes on a unit-spacing grid. The first has no
    source and boundary values (1, 0) with 9 observed nodes; the second
    has point sources 4000 at node 20 and 2000 at node 53 (1-based),
    boundary values (100, 300), and 6 observed nodes. Five measured and
    fifteen inverted anchor nodes are spread evenly. The field transform
    is logit over (1.7, 10249), a tenfold margin around the bundled
    profile's value range.

    Returns (grid, forward, field_transform, typeA_nodes, inverted_nodes);
    node arrays are 0-based.
    """
    from .engine import default_anchor_layout, spread_nodes
    from .forward import DiffusionForward, ForwardSpec, ProcessSpec

    grid = Grid1D.regular(grid_size)
    field_transform = Transform.logit(1.7, 10249.0)
    source2 = np.zeros(grid_size)
    if grid_size >= 53:
        source2[19] = 4000.0
        source2[52] = 2000.0
    spec = ForwardSpec(
        (
            ProcessSpec(np.zeros(grid_size), (1.0, 0.0), spread_nodes(grid_size, 9)),
            ProcessSpec(source2, (100.0, 300.0), spread_nodes(grid_size, 6)),
        )
    )
    forward = DiffusionForward(spec, field_transform)
    typeA_nodes, inverted_nodes = default_anchor_layout(grid_size, 5, 15)
    return grid, forward, field_transform, typeA_nodes, inverted_nodes


@dataclass(frozen=True)
class TruthBundle:
    """A synthetic truth and the data extracted from it.

    Node indices are 0-based; anchor and type-A values are in model unit
    (the unit the anchored field lives in), fields carry both units.
    """

    grid: Grid1D
    field_natural: np.ndarray
    field_model: np.ndarray
    typeA_nodes: np.ndarray
    typeA_values: np.ndarray
    typeA_sd: np.ndarray | None
    typeB_indices: np.ndarray
    typeB_values: np.ndarray
    typeB_sd: np.ndarray | None
    inverted_nodes: np.ndarray
    inverted_values: np.ndarray
    outputs: np.ndarray


def generate_truth(
    grid: Grid1D,
    forward,
    field_transform: Transform,
    typeA_nodes,
    inverted_nodes,
    profile_natural=None,
    typeB_indices=None,
    typeA_sd=None,
    typeB_sd=None,
    rng: np.random.Generator | None = None,
) -> TruthBundle:
    """Build a TruthBundle from a natural-unit profile.

    With ``typeA_sd``/``typeB_sd`` given, an ``rng`` is required and the
    recorded data values are the true ones plus one noise draw.
    """
    if profile_natural is None:
        profile_natural = default_profile()
    profile_natural = np.asarray(profile_natural, dtype=np.float64)
    if profile_natural.shape != (grid.size,):
        raise ValueError(
            f"profile length {profile_natural.shape[0]} does not match "
            f"grid size {grid.size}"
        )
    field_model = np.asarray(field_transform.apply(profile_natural))

    typeA_nodes = np.asarray(typeA_nodes, dtype=np.int64)
    inverted_nodes = np.asarray(inverted_nodes, dtype=np.int64)
    for name, nodes in (("type-A", typeA_nodes), ("inverted", inverted_nodes)):
        if nodes.size and not (nodes.min() >= 0 and nodes.max() < grid.size):
            raise ValueError(f"{name} nodes outside the grid")
    overlap = set(typeA_nodes.tolist()) & set(inverted_nodes.tolist())
    if overlap:
        raise ValueError(f"nodes {sorted(overlap)} are both measured and inverted")

    outputs = forward.evaluate(field_model)
    if typeB_indices is None:
        typeB_indices = np.arange(outputs.shape[0])
    typeB_indices = np.asarray(typeB_indices, dtype=np.int64)
    if typeB_indices.size and not (
        typeB_indices.min() >= 0 and typeB_indices.max() < outputs.shape[0]
    ):
        raise ValueError("type-B indices outside the forward output")

    typeA_values = field_model[typeA_nodes].copy()
    typeB_values = outputs[typeB_indices].copy()
    if typeA_sd is not None:
        typeA_sd = np.broadcast_to(
            np.asarray(typeA_sd, dtype=np.float64), typeA_nodes.shape
        ).copy()
        if rng is None:
            raise ValueError("noisy type-A data needs an rng")
        typeA_values = typeA_values + typeA_sd * rng.standard_normal(typeA_nodes.shape)
    if typeB_sd is not None:
        typeB_sd = np.broadcast_to(
            np.asarray(typeB_sd, dtype=np.float64), typeB_indices.shape
        ).copy()
        if rng is None:
            raise ValueError("noisy type-B data needs an rng")
        typeB_values = typeB_values + typeB_sd * rng.standard_normal(typeB_indices.shape)

    return TruthBundle(
        grid=grid,
        field_natural=profile_natural.copy(),
        field_model=field_model,
        typeA_nodes=typeA_nodes,
        typeA_values=typeA_values,
        typeA_sd=typeA_sd,
        typeB_indices=typeB_indices,
        typeB_values=typeB_values,
        typeB_sd=typeB_sd,
        inverted_nodes=inverted_nodes,
        inverted_values=field_model[inverted_nodes].copy(),
        outputs=outputs,
    )


def write_truth(bundle: TruthBundle, out_dir) -> None:
    """Persist a bundle: data files plus reference CSVs.

    Files: ``data_typeA.txt``, ``data_typeB.txt`` (the package data-file
    formats), ``truth_field.csv`` (node, location, natural, model), and
    ``true_anchors.csv`` (kind, 1-based node, location, both units).
    """
    os.makedirs(out_dir, exist_ok=True)
    grid = bundle.grid
    write_typeA_file(
        os.path.join(out_dir, "data_typeA.txt"),
        grid.locations[bundle.typeA_nodes],
        bundle.typeA_values,
        bundle.typeA_sd,
    )
    write_typeB_file(
        os.path.join(out_dir, "data_typeB.txt"),
        bundle.typeB_indices,
        bundle.typeB_values,
        bundle.typeB_sd,
    )
    with open(os.path.join(out_dir, "truth_field.csv"), "w", newline="\n") as fh:
        fh.write("node,location,natural,model\n")
        for i in range(grid.size):
            fh.write(
                f"{i + 1},{grid.locations[i]:.17g},"
                f"{bundle.field_natural[i]:.17g},{bundle.field_model[i]:.17g}\n"
            )
    with open(os.path.join(out_dir, "true_anchors.csv"), "w", newline="\n") as fh:
        fh.write("kind,node,location,value_model,value_natural\n")
        for kind, nodes in (
            ("measured", bundle.typeA_nodes),
            ("inverted", bundle.inverted_nodes),
        ):
            for n in nodes:
                fh.write(
                    f"{kind},{n + 1},{grid.locations[n]:.17g},"
                    f"{bundle.field_model[n]:.17g},{bundle.field_natural[n]:.17g}\n"
                )
