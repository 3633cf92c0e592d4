"""Shared fixtures: a small but complete synthetic study."""

import numpy as np
import pytest

from anchorinv.data import ErrorDist, TypeAData, TypeBData
from anchorinv.engine import ScenarioConfig, default_anchor_layout, spread_nodes
from anchorinv.field import Grid1D
from anchorinv.forward import DiffusionForward, ForwardSpec, ProcessSpec
from anchorinv.prior import StructuralPrior
from anchorinv.transform import Transform
from anchorinv.truth import generate_truth


def build_study(grid_size=24, n_measured=3, n_inverted=5, obs_counts=(4, 3)):
    """A miniature analog of the bundled study on a smaller grid."""
    grid = Grid1D.regular(grid_size)
    field_transform = Transform.logit(1.7, 10249.0)
    source = np.zeros(grid_size)
    source[grid_size // 3] = 900.0
    spec = ForwardSpec(
        (
            ProcessSpec(
                np.zeros(grid_size), (1.0, 0.0), spread_nodes(grid_size, obs_counts[0])
            ),
            ProcessSpec(
                source, (100.0, 300.0), spread_nodes(grid_size, obs_counts[1])
            ),
        )
    )
    forward = DiffusionForward(spec, field_transform)
    typeA_nodes, inverted_nodes = default_anchor_layout(
        grid_size, n_measured, n_inverted
    )
    rng = np.random.default_rng(52)
    profile = 40.0 + 500.0 * rng.beta(2.0, 3.0, size=grid_size)
    bundle = generate_truth(
        grid, forward, field_transform, typeA_nodes, inverted_nodes,
        profile_natural=profile,
    )
    return grid, forward, field_transform, bundle


def build_config(scenario="AB", n=150, k=25, seed=7, posterior_draws=30, **overrides):
    grid, forward, field_transform, bundle = build_study()
    type_a = TypeAData.from_points(
        grid, grid.locations[bundle.typeA_nodes], bundle.typeA_values
    )
    type_b = TypeBData(bundle.typeB_indices, bundle.typeB_values, ErrorDist.none())
    kwargs = dict(
        scenario=scenario,
        grid=grid,
        field_transform=field_transform,
        prior=StructuralPrior((5.0, 80.0)),
        forward=forward,
        n=n,
        type_a=None if scenario == "B" else type_a,
        type_b=type_b,
        inverted_nodes=tuple(bundle.inverted_nodes.tolist()),
        k=k,
        seed=seed,
        posterior_draws=posterior_draws,
    )
    if scenario == "B":
        kwargs.setdefault("eta2_range", (0.05, 5.0))
        kwargs.setdefault("beta_range", (-8.0, 0.0))
    kwargs.update(overrides)
    return ScenarioConfig(**kwargs), bundle


@pytest.fixture(scope="session")
def small_study():
    return build_study()


@pytest.fixture()
def small_config():
    return build_config()
