"""Run configuration files (INI format).

All node and output indices in config files are 1-based, matching the data
files; the API converts to 0-based internally. Relative paths resolve
against the directory containing the config file. Example:

    [grid]
    size = 80

    [field]
    transform = logit 1.7 10249

    [prior]
    lambda_support = 5 80

    [transforms]
    eta2 = log
    output = identity

    [data]
    type_a = data_typeA.txt
    type_b = data_typeB.txt

    [anchors]
    inverted_nodes = auto 15

    [forward]
    processes = flow_a flow_b

    [forward.flow_a]
    bc = 1 0
    observations = auto 9

    [forward.flow_b]
    source = 20:4000 53:2000
    bc = 100 300
    observations = auto 6

    [run]
    scenario = AB
    n = 5000
    seed = 0
"""

from __future__ import annotations

import configparser
import os

import numpy as np

from .data import read_typeA_file, read_typeB_file
from .engine import ScenarioConfig, avoid_collisions, spread_nodes
from .exceptions import ConfigError
from .field import Grid1D
from .forward import DiffusionForward, ExternalForward, ForwardSpec, ProcessSpec
from .prior import StructuralPrior
from .transform import Transform

__all__ = ["load_config", "write_default_config"]


def _get(parser, section, option, default=None, required=False):
    if parser.has_option(section, option):
        return parser.get(section, option).strip()
    if required:
        raise ConfigError(f"missing required option [{section}] {option}")
    return default


def _parse_nodes(text: str, grid_size: int, what: str) -> np.ndarray:
    """1-based node list -> 0-based indices."""
    try:
        vals = [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise ConfigError(f"{what}: expected integer node indices: {exc}") from exc
    nodes = np.asarray(vals, dtype=np.int64) - 1
    if nodes.size and (nodes.min() < 0 or nodes.max() >= grid_size):
        raise ConfigError(f"{what}: node indices must be in 1..{grid_size}")
    return nodes


def _parse_pair(text: str, what: str, cast=float):
    parts = text.split()
    if len(parts) != 2:
        raise ConfigError(f"{what}: expected two values")
    try:
        return (cast(parts[0]), cast(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _parse_source(text: str, grid_size: int, section: str) -> np.ndarray:
    source = np.zeros(grid_size)
    for tok in text.split():
        if ":" not in tok:
            raise ConfigError(f"[{section}] source entries must be node:value")
        node_s, val_s = tok.split(":", 1)
        try:
            node = int(node_s)
            val = float(val_s)
        except ValueError as exc:
            raise ConfigError(f"[{section}] source: {exc}") from exc
        if not 1 <= node <= grid_size:
            raise ConfigError(f"[{section}] source node {node} outside 1..{grid_size}")
        source[node - 1] += val
    return source


def _transform_opt(parser, section, option, default: Transform) -> Transform:
    text = _get(parser, section, option)
    if text is None:
        return default
    try:
        return Transform.parse(text)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {option}: {exc}") from exc


def _build_forward(parser, grid_size: int, field_transform: Transform):
    kind = _get(parser, "forward", "kind", default="diffusion")
    if kind == "external":
        command = _get(parser, "forward", "command", required=True)
        dim_s = _get(parser, "forward", "output_dim", required=True)
        try:
            output_dim = int(dim_s)
        except ValueError as exc:
            raise ConfigError(f"[forward] output_dim: {exc}") from exc
        return ExternalForward(command, output_dim, field_transform)
    if kind != "diffusion":
        raise ConfigError(f"[forward] unknown kind {kind!r}")
    names = _get(parser, "forward", "processes", required=True).split()
    if not names:
        raise ConfigError("[forward] processes must name at least one process")
    procs = []
    for name in names:
        section = f"forward.{name}"
        if not parser.has_section(section):
            raise ConfigError(f"missing section [{section}]")
        source = _parse_source(_get(parser, section, "source", default=""), grid_size, section)
        bc = _parse_pair(
            _get(parser, section, "bc", required=True), f"[{section}] bc"
        )
        obs_text = _get(parser, section, "observations", required=True)
        parts = obs_text.split()
        if parts and parts[0] == "auto":
            if len(parts) != 2:
                raise ConfigError(f"[{section}] observations: auto takes a count")
            obs = spread_nodes(grid_size, int(parts[1]))
        else:
            obs = _parse_nodes(obs_text, grid_size, f"[{section}] observations")
        procs.append(ProcessSpec(source, bc, obs))
    return DiffusionForward(ForwardSpec(tuple(procs)), field_transform)


def load_config(path) -> ScenarioConfig:
    """Read an INI run configuration into a ScenarioConfig."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    size_s = _get(parser, "grid", "size", required=True)
    try:
        size = int(size_s)
    except ValueError as exc:
        raise ConfigError(f"[grid] size: {exc}") from exc
    spacing = float(_get(parser, "grid", "spacing", default="1.0"))
    start = float(_get(parser, "grid", "start", default="1.0"))
    grid = Grid1D.regular(size, spacing=spacing, start=start)

    field_transform = _transform_opt(
        parser, "field", "transform", Transform.identity()
    )

    support = _parse_pair(
        _get(parser, "prior", "lambda_support", required=True),
        "[prior] lambda_support",
    )
    prior = StructuralPrior(
        lambda_support=support,
        a=float(_get(parser, "prior", "a", default="1.0")),
        lambda_grid_size=int(_get(parser, "prior", "lambda_grid_size", default="200")),
    )

    t_lambda = _transform_opt(
        parser, "transforms", "lambda", Transform.logit(*support)
    )
    t_eta2 = _transform_opt(parser, "transforms", "eta2", Transform.log())
    t_output = _transform_opt(parser, "transforms", "output", Transform.identity())

    type_a = None
    type_b = None
    path_a = _get(parser, "data", "type_a")
    if path_a:
        type_a = read_typeA_file(resolve(path_a), grid)
    path_b = _get(parser, "data", "type_b")
    if path_b:
        type_b = read_typeB_file(resolve(path_b))

    inverted = np.empty(0, dtype=np.int64)
    inv_text = _get(parser, "anchors", "inverted_nodes", default="")
    if inv_text:
        parts = inv_text.split()
        if parts[0] == "auto":
            if len(parts) != 2:
                raise ConfigError("[anchors] inverted_nodes: auto takes a count")
            taken = type_a.node_indices() if type_a is not None else []
            inverted = avoid_collisions(spread_nodes(size, int(parts[1])), taken, size)
        else:
            inverted = _parse_nodes(inv_text, size, "[anchors] inverted_nodes")

    forward = _build_forward(parser, size, field_transform)

    scenario = _get(parser, "run", "scenario", required=True)
    kwargs = dict(
        scenario=scenario,
        grid=grid,
        field_transform=field_transform,
        prior=prior,
        forward=forward,
        n=int(_get(parser, "run", "n", required=True)),
        type_a=type_a,
        type_b=type_b,
        inverted_nodes=tuple(int(v) for v in inverted),
        t_lambda=t_lambda,
        t_eta2=t_eta2,
        t_output=t_output,
        k=int(_get(parser, "run", "k", default="500")),
        bandwidth=float(_get(parser, "run", "bandwidth", default="1.0")),
        seed=int(_get(parser, "run", "seed", default="0")),
        workers=int(_get(parser, "run", "workers", default="1")),
        posterior_draws=int(_get(parser, "run", "posterior_draws", default="1000")),
    )
    rng_text = _get(parser, "run", "eta2_range")
    if rng_text:
        kwargs["eta2_range"] = _parse_pair(rng_text, "[run] eta2_range")
    rng_text = _get(parser, "run", "beta_range")
    if rng_text:
        kwargs["beta_range"] = _parse_pair(rng_text, "[run] beta_range")
    try:
        return ScenarioConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def write_default_config(
    path,
    grid_size: int = 80,
    scenario: str = "AB",
    n: int = 5000,
    seed: int = 0,
    type_a_file: str = "data_typeA.txt",
    type_b_file: str = "data_typeB.txt",
) -> None:
    """Write the reference-study configuration next to generated data.

    The forward section mirrors ``truth.default_study`` for the same grid
    size, so a config emitted next to generated data always describes the
    forward model that produced that data (the point sources exist only
    when the grid reaches their nodes).
    """
    source_b = "20:4000 53:2000" if grid_size >= 53 else ""
    lines = [
        "[grid]",
        f"size = {grid_size}",
        "spacing = 1.0",
        "",
        "[field]",
        "transform = logit 1.7 10249",
        "",
        "[prior]",
        "lambda_support = 5 80",
        "a = 1",
        "lambda_grid_size = 200",
        "",
        "[transforms]",
        "lambda = logit 5 80",
        "eta2 = log",
        "output = identity",
        "",
        "[data]",
        f"type_a = {type_a_file}",
        f"type_b = {type_b_file}",
        "",
        "[anchors]",
        "inverted_nodes = auto 15",
        "",
        "[forward]",
        "kind = diffusion",
        "processes = flow_a flow_b",
        "",
        "[forward.flow_a]",
        "source =",
        "bc = 1 0",
        "observations = auto 9",
        "",
        "[forward.flow_b]",
        f"source = {source_b}",
        "bc = 100 300",
        "observations = auto 6",
        "",
        "[run]",
        f"scenario = {scenario}",
        f"n = {n}",
        "k = 500",
        "bandwidth = 1.0",
        f"seed = {seed}",
        "workers = 1",
        "posterior_draws = 1000",
        "",
    ]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines))
