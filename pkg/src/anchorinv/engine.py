"""End-to-end inversion pipeline.

Stages: (1) sample structural parameters and anchor values conditioned on
type-A data, simulate one anchored field per draw; (2) run the forward
model on every field exactly once; (3) assemble the transformed joint
sample, build the adaptive KDE, and condition it on the type-B data;
(4) draw posterior parameters from the conditioned mixture, simulate
posterior fields, rerun the forward model on them; (5) summarize data
reproduction and persist CSV artifacts.

Scenario "A" skips the KDE: its posterior is the type-A-conditioned
sample itself, so only the posterior-draw stages run and the forward call
count equals the posterior draw count (for "AB"/"B" it is n plus the
posterior draw count). Scenario "B" has no type-A data and samples
structural parameters from explicit proper prior ranges.

Reproducibility: every Monte Carlo draw i uses its own
``SeedSequence([seed, stream, i])`` substream and results are merged by
index, so artifacts are byte-identical for a given (config, seed) no
matter how many workers run. Workers are threads; per-range factor caches
are pure-value dictionaries, safe to fill concurrently.
"""

from __future__ import annotations

import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.linalg import cho_solve

from . import __version__ as _version
from . import backends, mixture as mixmod
from .data import (
    ErrorDist,
    TypeAData,
    TypeBData,
    assign_typeA_anchors,
    perturb_forward_output,
)
from .exceptions import ConfigError, EngineError, ForwardModelError
from .field import (
    INVERTED,
    MEASURED,
    AnchorSet,
    Grid1D,
    ModelParams,
    StructuralParams,
    correlation_matrix,
)
from .mvn import chol_psd
from .prior import StructuralPosterior, StructuralPrior
from .transform import Transform

__all__ = [
    "AB_SAMPLE_SIZES",
    "ESS_WARNING_THRESHOLD",
    "MAX_FORWARD_FAILURE_FRACTION",
    "ScenarioConfig",
    "RunArtifacts",
    "substream",
    "spread_nodes",
    "avoid_collisions",
    "default_anchor_layout",
    "sample_theta_given_typeA",
    "run_inversion",
    "draw_posterior_fields",
    "reproduction_stats",
    "save_artifacts",
]

logger = logging.getLogger("anchorinv")

AB_SAMPLE_SIZES = {"AB1": 5000, "AB2": 10000, "AB3": 20000, "AB4": 40000}
ESS_WARNING_THRESHOLD = 50.0
MAX_FORWARD_FAILURE_FRACTION = 0.10

_STREAM_SAMPLE = 1
_STREAM_PERTURB = 2
_STREAM_POSTERIOR = 3
_STREAM_FIELDS = 4


def substream(seed: int, *path) -> np.random.Generator:
    """Independent generator for one (seed, stream..., index) path."""
    entropy = [int(seed)] + [int(p) for p in path]
    if any(e < 0 for e in entropy):
        raise ValueError("substream path entries must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def spread_nodes(grid_size: int, count: int) -> np.ndarray:
    """``count`` interior node indices (0-based) spread evenly."""
    if not 1 <= count <= grid_size - 2:
        raise ValueError(f"cannot spread {count} nodes over {grid_size}")
    pts = np.linspace(0, grid_size - 1, count + 2)[1:-1]
    return np.round(pts).astype(np.int64)


def avoid_collisions(nodes, taken, grid_size: int) -> np.ndarray:
    """Shift nodes right past already-taken ones, deterministically."""
    taken = set(int(t) for t in taken)
    out = []
    for node in np.asarray(nodes, dtype=np.int64).tolist():
        while node in taken and node < grid_size - 1:
            node += 1
        if node in taken or node >= grid_size:
            raise ValueError("could not place all nodes without collisions")
        taken.add(node)
        out.append(node)
    return np.array(out, dtype=np.int64)


def default_anchor_layout(grid_size: int, n_measured: int, n_inverted: int):
    """Evenly spread measured and inverted anchor nodes, 0-based.

    Inverted nodes that collide with measured ones (or each other) shift
    right to the next free interior node, deterministically.
    """
    measured = spread_nodes(grid_size, n_measured)
    inverted = avoid_collisions(spread_nodes(grid_size, n_inverted), measured, grid_size)
    return measured, inverted


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one inversion run needs. See the README for the file format."""

    scenario: str
    grid: Grid1D
    field_transform: Transform
    prior: StructuralPrior
    forward: object
    n: int
    type_a: TypeAData | None = None
    type_b: TypeBData | None = None
    inverted_nodes: tuple = ()
    design: np.ndarray | None = None
    t_lambda: Transform | None = None
    t_eta2: Transform = dataclass_field(default_factory=Transform.log)
    t_output: Transform = dataclass_field(default_factory=Transform.identity)
    k: int = mixmod.DEFAULT_NEIGHBORS
    bandwidth: float = mixmod.DEFAULT_BANDWIDTH
    seed: int = 0
    workers: int = 1
    posterior_draws: int = 1000
    eta2_range: tuple | None = None
    beta_range: tuple | None = None

    def __post_init__(self):
        if self.scenario not in ("A", "AB", "B"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.scenario in ("A", "AB") and self.type_a is None:
            raise ConfigError(f"scenario {self.scenario} requires type-A data")
        if self.scenario in ("AB", "B") and self.type_b is None:
            raise ConfigError(f"scenario {self.scenario} requires type-B data")
        if self.scenario == "B":
            if self.type_a is not None:
                raise ConfigError("scenario B must not carry type-A data")
            if self.eta2_range is None or self.beta_range is None:
                raise ConfigError(
                    "scenario B needs proper prior stand-ins: eta2_range "
                    "(log-uniform) and beta_range (uniform)"
                )
            lo, hi = self.eta2_range
            if not 0 < lo < hi:
                raise ConfigError("eta2_range must satisfy 0 < lower < upper")
            lo, hi = self.beta_range
            if not lo < hi:
                raise ConfigError("beta_range must satisfy lower < upper")
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.k < 1:
            raise ConfigError("k must be positive")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ConfigError("bandwidth must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.posterior_draws < 0:
            raise ConfigError("posterior_draws must be nonnegative")
        design = self.design
        if design is None:
            design = np.ones((self.grid.size, 1))
        design = np.asarray(design, dtype=np.float64)
        if design.ndim != 2 or design.shape[0] != self.grid.size:
            raise ConfigError("design matrix must have one row per grid node")
        t_lambda = self.t_lambda
        if t_lambda is None:
            lo, hi = self.prior.lambda_support
            t_lambda = Transform.logit(lo, hi)
        inv = tuple(int(v) for v in self.inverted_nodes)
        if any(not 0 <= v < self.grid.size for v in inv):
            raise ConfigError("inverted anchor nodes outside the grid")
        if self.type_a is not None and self.type_a.H.shape[1] != self.grid.size:
            raise ConfigError("type-A measurement matrix must match the grid")
        if self.type_b is not None:
            if np.any(self.type_b.indices >= self.forward.output_dim):
                raise ConfigError("type-B indices outside the forward output")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "t_lambda", t_lambda)
        object.__setattr__(self, "inverted_nodes", inv)
        self.anchors  # validates distinctness / independence

    @property
    def anchors(self) -> AnchorSet:
        """All anchors: type-A measurement rows first, then inverted points."""
        G = self.grid.size
        blocks = []
        kinds = []
        if self.type_a is not None:
            blocks.append(self.type_a.H)
            kinds += [MEASURED] * self.type_a.size
        Hb = np.zeros((len(self.inverted_nodes), G))
        for r, node in enumerate(self.inverted_nodes):
            Hb[r, node] = 1.0
        blocks.append(Hb)
        kinds += [INVERTED] * len(self.inverted_nodes)
        H = np.vstack(blocks) if blocks else np.zeros((0, G))
        return AnchorSet(H, tuple(kinds))

    @property
    def n_measured(self) -> int:
        return 0 if self.type_a is None else self.type_a.size

    @property
    def n_inverted(self) -> int:
        return len(self.inverted_nodes)

    @property
    def include_va_in_theta(self) -> bool:
        """Type-A anchor values are uncertain (and so part of the joint
        sample) only when the type-A error model has spread."""
        return self.type_a is not None and not self.type_a.error.is_degenerate


@dataclass
class ParamDraws:
    """Columnar parameter draws in natural units."""

    lam: np.ndarray
    eta2: np.ndarray
    beta: np.ndarray
    va: np.ndarray
    vb: np.ndarray

    @property
    def count(self) -> int:
        return self.lam.shape[0]

    def subset(self, mask) -> "ParamDraws":
        return ParamDraws(
            self.lam[mask], self.eta2[mask], self.beta[mask],
            self.va[mask], self.vb[mask],
        )

    def anchor_values(self) -> np.ndarray:
        return np.concatenate([self.va, self.vb], axis=1)


class _ParamLayout:
    """Coordinate layout of the transformed parameter block."""

    def __init__(self, config: ScenarioConfig):
        self.d_beta = config.design.shape[1]
        self.ma = config.n_measured if config.include_va_in_theta else 0
        self.ma_total = config.n_measured
        self.mb = config.n_inverted
        self.t_lambda = config.t_lambda
        self.t_eta2 = config.t_eta2
        self.names = ["lambda", "eta2"]
        self.names += [f"beta{j + 1}" for j in range(self.d_beta)]
        self.names += [f"anchor_a{j + 1}" for j in range(self.ma)]
        self.names += [f"anchor_b{j + 1}" for j in range(self.mb)]
        self.transforms = [self.t_lambda, self.t_eta2] + [
            Transform.identity()
        ] * (self.d_beta + self.ma + self.mb)

    @property
    def dim(self) -> int:
        return 2 + self.d_beta + self.ma + self.mb

    def to_rows(self, draws: ParamDraws) -> np.ndarray:
        cols = [
            np.atleast_1d(self.t_lambda.apply(draws.lam)),
            np.atleast_1d(self.t_eta2.apply(draws.eta2)),
            draws.beta,
        ]
        if self.ma:
            cols.append(draws.va)
        cols.append(draws.vb)
        return np.column_stack(cols)

    def from_rows(self, rows: np.ndarray, va_fixed: np.ndarray) -> ParamDraws:
        rows = np.atleast_2d(rows)
        n = rows.shape[0]
        lam = np.atleast_1d(self.t_lambda.invert(rows[:, 0]))
        eta2 = np.atleast_1d(self.t_eta2.invert(rows[:, 1]))
        beta = rows[:, 2 : 2 + self.d_beta]
        pos = 2 + self.d_beta
        if self.ma:
            va = rows[:, pos : pos + self.ma]
            pos += self.ma
        else:
            va = np.tile(va_fixed, (n, 1))
        vb = rows[:, pos : pos + self.mb]
        return ParamDraws(lam, eta2, beta, va, vb)


class _RangeOps:
    """Per-range factorizations for anchored-field work, variance-free."""

    __slots__ = ("chol_R", "RHt", "chol_S", "W_ba", "chol_schur")

    def __init__(self, grid: Grid1D, H: np.ndarray, ma: int, lam: float):
        R = correlation_matrix(grid.locations, lam)
        self.chol_R = chol_psd(R)
        m = H.shape[0]
        if m:
            self.RHt = R @ H.T
            S = H @ self.RHt
            self.chol_S = chol_psd(0.5 * (S + S.T))
            mb = m - ma
            if mb:
                if ma:
                    Caa = S[:ma, :ma]
                    Cab = S[:ma, ma:]
                    Cbb = S[ma:, ma:]
                    chol_Caa = chol_psd(0.5 * (Caa + Caa.T))
                    self.W_ba = cho_solve((chol_Caa, True), Cab).T
                    schur = Cbb - self.W_ba @ Cab
                    self.chol_schur = chol_psd(0.5 * (schur + schur.T))
                else:
                    self.W_ba = None
                    self.chol_schur = chol_psd(0.5 * (S + S.T))


class _Machine:
    """Shared immutable state for one run, plus per-range caches."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.anchors = config.anchors
        self.H = self.anchors.H
        self.ma = config.n_measured
        self.mb = config.n_inverted
        self.X = config.design
        self.grid = config.grid
        self._cache: dict = {}
        self._post_a: StructuralPosterior | None = None
        if config.type_a is not None:
            # factorizations depend on locations only; rebind swaps values
            self._post_a = StructuralPosterior.from_anchors(
                self.grid, self.X, config.type_a.H, config.type_a.values,
                config.prior,
            )

    def range_ops(self, lam: float, cache: bool = True) -> _RangeOps:
        if cache:
            ops = self._cache.get(lam)
            if ops is None:
                ops = _RangeOps(self.grid, self.H, self.ma, lam)
                self._cache[lam] = ops
            return ops
        return _RangeOps(self.grid, self.H, self.ma, lam)

    def structural_posterior(self, va: np.ndarray) -> StructuralPosterior:
        if self._post_a is None:
            raise EngineError("no type-A data to condition on")
        if np.array_equal(va, self._post_a.y):
            return self._post_a
        return self._post_a.rebind(va)

    def draw_vb(
        self, ops: _RangeOps, beta, eta2: float, va: np.ndarray,
        rng: np.random.Generator,
    ) -> np.ndarray:
        if self.mb == 0:
            return np.empty(0)
        mean = self.X @ beta
        Hb = self.H[self.ma :]
        mean_b = Hb @ mean
        if self.ma:
            mean_b = mean_b + ops.W_ba @ (va - self.H[: self.ma] @ mean)
        z = rng.standard_normal(self.mb)
        return mean_b + np.sqrt(eta2) * (ops.chol_schur @ z)

    def simulate_field(
        self, ops: _RangeOps, beta, eta2: float, values: np.ndarray,
        rng: np.random.Generator,
    ) -> np.ndarray:
        mean = self.X @ beta
        y = mean + np.sqrt(eta2) * (ops.chol_R @ rng.standard_normal(self.grid.size))
        if self.H.shape[0]:
            # second pass is iterative refinement; the anchor system is
            # ill-conditioned at long range and one solve can miss by ~1e-8
            for _ in range(2):
                resid = values - self.H @ y
                y = y + ops.RHt @ cho_solve((ops.chol_S, True), resid)
        return y

    def sample_one(self, rng: np.random.Generator, cache: bool = True):
        """One draw of (structural, anchor values) given the data, plus its
        simulated field."""
        config = self.config
        if config.scenario == "B":
            va = np.empty(0)
            lam = float(rng.choice(config.prior.lambda_grid()))
            lo, hi = config.eta2_range
            eta2 = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
            blo, bhi = config.beta_range
            beta = rng.uniform(blo, bhi, size=self.X.shape[1])
        else:
            va = assign_typeA_anchors(config.type_a, rng)
            post = self.structural_posterior(va)
            params, _ = post.sample(1, rng)
            beta = params[0].beta
            eta2 = params[0].eta2
            lam = params[0].lam
        ops = self.range_ops(lam, cache=cache)
        vb = self.draw_vb(ops, beta, eta2, va, rng)
        values = np.concatenate([va, vb])
        field_model = self.simulate_field(ops, beta, eta2, values, rng)
        return lam, eta2, beta, va, vb, field_model


def _parallel_indexed(fn, count: int, workers: int) -> None:
    """Run fn(i) for i in range(count); fn writes into preallocated arrays."""
    if count == 0:
        return
    if workers <= 1:
        for i in range(count):
            fn(i)
        return
    chunk = max(1, (count + 4 * workers - 1) // (4 * workers))

    def run_range(start):
        for i in range(start, min(start + chunk, count)):
            fn(i)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(run_range, range(0, count, chunk)))


def _sample_stage(machine: _Machine, count: int, stream: int, cache: bool = True):
    """Per-draw conditioned sampling plus field simulation, fanned out."""
    config = machine.config
    G = config.grid.size
    draws = ParamDraws(
        lam=np.empty(count),
        eta2=np.empty(count),
        beta=np.empty((count, machine.X.shape[1])),
        va=np.empty((count, machine.ma)),
        vb=np.empty((count, machine.mb)),
    )
    fields = np.empty((count, G))

    def one(i):
        rng = substream(config.seed, stream, i)
        lam, eta2, beta, va, vb, field_model = machine.sample_one(rng, cache=cache)
        draws.lam[i] = lam
        draws.eta2[i] = eta2
        draws.beta[i] = beta
        draws.va[i] = va
        draws.vb[i] = vb
        fields[i] = field_model

    _parallel_indexed(one, count, config.workers)
    return draws, fields


def _simulate_given_params(
    machine: _Machine, draws: ParamDraws, rng_for, workers: int
):
    """Anchored field per draw for externally supplied parameters.

    Returns (fields, ok): draws with invalid structural values (possible
    under identity transforms) are flagged instead of raising.
    """
    count = draws.count
    G = machine.grid.size
    fields = np.full((count, G), np.nan)
    ok = np.zeros(count, dtype=bool)
    values = draws.anchor_values()

    def one(i):
        rng = rng_for(i)
        if not (np.isfinite(draws.eta2[i]) and draws.eta2[i] > 0) or not (
            np.isfinite(draws.lam[i]) and draws.lam[i] > 0
        ):
            return
        ops = machine.range_ops(float(draws.lam[i]), cache=False)
        fields[i] = machine.simulate_field(
            ops, draws.beta[i], float(draws.eta2[i]), values[i], rng
        )
        ok[i] = True

    _parallel_indexed(one, count, workers)
    return fields, ok


def _forward_stage(config: ScenarioConfig, fields: np.ndarray, perturb_stream=None):
    """Forward outputs for a stack of fields, plus optional type-B
    perturbation; returns (outputs, ok, calls)."""
    outputs, ok = config.forward.evaluate_many(fields)
    calls = fields.shape[0]
    if (
        perturb_stream is not None
        and config.type_b is not None
        and not config.type_b.error.is_degenerate
    ):
        sd_full = np.zeros(config.forward.output_dim)
        sd_full[config.type_b.indices] = config.type_b.error.sd
        err_full = ErrorDist.normal(sd_full)
        for i in np.nonzero(ok)[0]:
            rng = substream(config.seed, perturb_stream, int(i))
            outputs[i] = perturb_forward_output(outputs[i], err_full, rng)
    return outputs, ok, calls


def _check_failures(kept: int, attempted: int, what: str) -> int:
    failed = attempted - kept
    if failed:
        logger.info("%s: discarded %d of %d draws", what, failed, attempted)
    if attempted and failed > MAX_FORWARD_FAILURE_FRACTION * attempted:
        raise EngineError(
            f"{what}: {failed} of {attempted} forward evaluations failed "
            f"(tolerance {MAX_FORWARD_FAILURE_FRACTION:.0%})"
        )
    return failed


@dataclass
class RunArtifacts:
    """Everything run_inversion produces (see save_artifacts for files)."""

    scenario: str
    seed: int
    n: int
    k: int
    bandwidth: float
    layout: _ParamLayout
    sample: ParamDraws | None = None
    sample_outputs: np.ndarray | None = None
    joint: mixmod.WeightedJointSample | None = None
    posterior: mixmod.NormalMixture | None = None
    ess: float | None = None
    posterior_params: ParamDraws | None = None
    fields_model: np.ndarray | None = None
    fields_natural: np.ndarray | None = None
    reproductions: np.ndarray | None = None
    stats: np.ndarray | None = None
    n_attempted: int = 0
    n_discarded: int = 0
    posterior_attempted: int = 0
    posterior_discarded: int = 0
    forward_calls: int = 0


def sample_theta_given_typeA(config: ScenarioConfig, count: int, rng: np.random.Generator):
    """Draws of the full parameter vector conditioned on type-A data only.

    Returns (params, weights): a list of ModelParams and the uniform 1/count
    weights that make them a weighted sample.
    """
    if config.type_a is None:
        raise EngineError("sample_theta_given_typeA requires type-A data")
    machine = _Machine(config)
    anchors = config.anchors
    out = []
    for _ in range(count):
        lam, eta2, beta, va, vb, _field = machine.sample_one(rng)
        out.append(
            ModelParams(
                StructuralParams(beta, eta2, lam),
                anchors.with_values(np.concatenate([va, vb])),
            )
        )
    return out, np.full(count, 1.0 / count)


def reproduction_stats(reproductions: np.ndarray, type_b: TypeBData) -> np.ndarray:
    """Per observed component: index, observed value, the 5/25/50/75/95%
    quantiles of the reproduced outputs, and a [q05, q95] coverage flag.

    Returns one row per observed component, columns in that order.
    """
    reproductions = np.atleast_2d(np.asarray(reproductions, dtype=np.float64))
    if reproductions.shape[0] < 1:
        raise ValueError("need at least one reproduction row")
    rows = np.empty((type_b.size, 8))
    qs = (0.05, 0.25, 0.50, 0.75, 0.95)
    for r in range(type_b.size):
        col = reproductions[:, type_b.indices[r]]
        quant = np.quantile(col, qs)
        obs = type_b.values[r]
        rows[r] = [
            type_b.indices[r] + 1, obs, *quant,
            1.0 if quant[0] <= obs <= quant[-1] else 0.0,
        ]
    return rows


def run_inversion(config: ScenarioConfig, out_dir=None) -> RunArtifacts:
    """Execute the full pipeline; optionally persist artifacts to out_dir."""
    machine = _Machine(config)
    layout = _ParamLayout(config)
    art = RunArtifacts(
        scenario=config.scenario,
        seed=config.seed,
        n=config.n,
        k=config.k,
        bandwidth=config.bandwidth,
        layout=layout,
    )
    va_fixed = np.empty(0)
    if config.type_a is not None and not config.include_va_in_theta:
        va_fixed = config.type_a.values.copy()

    if config.scenario in ("AB", "B"):
        logger.info(
            "sampling %d draws conditioned on type-A data (scenario %s)",
            config.n, config.scenario,
        )
        draws, fields = _sample_stage(machine, config.n, _STREAM_SAMPLE)
        outputs, ok, calls = _forward_stage(config, fields, _STREAM_PERTURB)
        art.forward_calls += calls
        art.n_attempted = config.n
        art.n_discarded = _check_failures(int(ok.sum()), config.n, "sampling stage")
        draws = draws.subset(ok)
        outputs = outputs[ok]
        art.sample = draws
        art.sample_outputs = outputs

        rows_param = layout.to_rows(draws)
        out_t = np.atleast_2d(config.t_output.apply(outputs))
        points = np.hstack([rows_param, out_t])
        joint = mixmod.WeightedJointSample(
            points, np.full(draws.count, 1.0 / draws.count), split=layout.dim
        )
        art.joint = joint
        k_eff = min(config.k, draws.count - 1)
        art.k = k_eff
        logger.info("building KDE: n=%d k=%d h=%g", draws.count, k_eff, config.bandwidth)
        kde = mixmod.build_kde(joint, k=k_eff, h=config.bandwidth)
        z_t = np.atleast_1d(config.t_output.apply(config.type_b.values))
        posterior = mixmod.condition(
            kde, layout.dim, z_t, data_indices=config.type_b.indices
        )
        art.posterior = posterior
        art.ess = mixmod.effective_sample_size(posterior.weights)
        logger.info("conditioned mixture ESS = %.2f", art.ess)
        if art.ess < ESS_WARNING_THRESHOLD:
            warnings.warn(
                f"effective sample size {art.ess:.1f} below "
                f"{ESS_WARNING_THRESHOLD:g}; posterior weights are highly skewed",
                RuntimeWarning,
                stacklevel=2,
            )
        count = config.posterior_draws
        if count:
            rows_t = mixmod.sample_mixture(
                posterior, count, substream(config.seed, _STREAM_POSTERIOR)
            )
            post_params = layout.from_rows(rows_t, va_fixed)
            pfields, sim_ok = _simulate_given_params(
                machine, post_params,
                lambda i: substream(config.seed, _STREAM_FIELDS, i),
                config.workers,
            )
            outputs2 = np.full((count, config.forward.output_dim), np.nan)
            fok = np.zeros(count, dtype=bool)
            if np.any(sim_ok):
                o, f = config.forward.evaluate_many(pfields[sim_ok])
                outputs2[sim_ok] = o
                fok[sim_ok] = f
            art.forward_calls += int(sim_ok.sum())
            art.posterior_attempted = count
            art.posterior_discarded = _check_failures(
                int(fok.sum()), count, "posterior stage"
            )
            art.posterior_params = post_params.subset(fok)
            art.fields_model = pfields[fok]
            art.reproductions = outputs2[fok]
    else:
        # scenario A: the posterior IS the type-A-conditioned law
        count = config.posterior_draws
        logger.info("scenario A: %d draws conditioned on type-A data", count)
        draws, fields = _sample_stage(machine, count, _STREAM_POSTERIOR)
        outputs, ok, calls = _forward_stage(config, fields, None)
        art.forward_calls += calls
        art.posterior_attempted = count
        art.posterior_discarded = _check_failures(int(ok.sum()), count, "scenario A")
        art.posterior_params = draws.subset(ok)
        art.fields_model = fields[ok]
        art.reproductions = outputs[ok]

    if art.fields_model is not None and art.fields_model.shape[0]:
        flat = config.field_transform.invert(art.fields_model.reshape(-1))
        art.fields_natural = np.asarray(flat).reshape(art.fields_model.shape)
    if art.reproductions is not None and config.type_b is not None:
        if art.reproductions.shape[0] == 0:
            raise EngineError("no posterior reproductions survived")
        art.stats = reproduction_stats(art.reproductions, config.type_b)
    if out_dir is not None:
        save_artifacts(art, out_dir, config)
    return art


def draw_posterior_fields(
    config: ScenarioConfig,
    posterior: mixmod.NormalMixture | None,
    count: int,
    rng: np.random.Generator,
):
    """Posterior parameter draws plus their fields and forward outputs.

    ``posterior`` is the conditioned mixture for AB/B runs, or None for
    scenario A (fresh type-A-conditioned draws). Returns a RunArtifacts
    carrying only the posterior blocks.
    """
    machine = _Machine(config)
    layout = _ParamLayout(config)
    art = RunArtifacts(
        scenario=config.scenario, seed=config.seed, n=config.n,
        k=config.k, bandwidth=config.bandwidth, layout=layout,
    )
    child_seeds = rng.integers(0, 2**63 - 1, size=max(count, 1))
    if posterior is None:
        if config.type_a is None:
            raise EngineError("scenario without type-A data needs a posterior mixture")
        draws = ParamDraws(
            lam=np.empty(count), eta2=np.empty(count),
            beta=np.empty((count, machine.X.shape[1])),
            va=np.empty((count, machine.ma)), vb=np.empty((count, machine.mb)),
        )
        fields = np.empty((count, config.grid.size))

        def one(i):
            r = np.random.default_rng(np.random.SeedSequence(int(child_seeds[i])))
            lam, eta2, beta, va, vb, fm = machine.sample_one(r)
            draws.lam[i] = lam
            draws.eta2[i] = eta2
            draws.beta[i] = beta
            draws.va[i] = va
            draws.vb[i] = vb
            fields[i] = fm

        _parallel_indexed(one, count, config.workers)
        outputs, ok, calls = _forward_stage(config, fields, None)
    else:
        va_fixed = np.empty(0)
        if config.type_a is not None and not config.include_va_in_theta:
            va_fixed = config.type_a.values.copy()
        rows_t = mixmod.sample_mixture(posterior, count, rng)
        draws = layout.from_rows(rows_t, va_fixed) if count else ParamDraws(
            np.empty(0), np.empty(0), np.empty((0, machine.X.shape[1])),
            np.empty((0, machine.ma)), np.empty((0, machine.mb)),
        )
        fields, sim_ok = _simulate_given_params(
            machine, draws,
            lambda i: np.random.default_rng(np.random.SeedSequence(int(child_seeds[i]))),
            config.workers,
        )
        outputs = np.full((count, config.forward.output_dim), np.nan)
        ok = np.zeros(count, dtype=bool)
        if np.any(sim_ok):
            o, f = config.forward.evaluate_many(fields[sim_ok])
            outputs[sim_ok] = o
            ok[sim_ok] = f
    art.posterior_attempted = count
    art.posterior_discarded = _check_failures(int(ok.sum()), count, "posterior fields")
    art.posterior_params = draws.subset(ok)
    art.fields_model = fields[ok]
    art.reproductions = outputs[ok]
    if art.fields_model.shape[0]:
        flat = config.field_transform.invert(art.fields_model.reshape(-1))
        art.fields_natural = np.asarray(flat).reshape(art.fields_model.shape)
    else:
        art.fields_natural = art.fields_model.copy()
    if config.type_b is not None and art.reproductions.shape[0]:
        art.stats = reproduction_stats(art.reproductions, config.type_b)
    return art


def _write_csv(path, header, rows) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _param_table(layout: _ParamLayout, draws: ParamDraws):
    header = ["lambda", "eta2"]
    header += [f"beta{j + 1}" for j in range(layout.d_beta)]
    header += [f"anchor_a{j + 1}" for j in range(draws.va.shape[1])]
    header += [f"anchor_b{j + 1}" for j in range(draws.vb.shape[1])]
    rows = np.column_stack(
        [draws.lam, draws.eta2, draws.beta, draws.va, draws.vb]
    )
    return header, rows


def save_artifacts(art: RunArtifacts, out_dir, config: ScenarioConfig) -> None:
    """Persist CSV artifacts, the mixture file, and the run log."""
    os.makedirs(out_dir, exist_ok=True)
    layout = art.layout
    if art.sample is not None:
        header, rows = _param_table(layout, art.sample)
        _write_csv(os.path.join(out_dir, "theta_sample.csv"), header, rows)
    if art.joint is not None:
        header = ["weight"] + layout.names + [
            f"out{j + 1}" for j in range(art.joint.data_dim)
        ]
        rows = np.column_stack([art.joint.weights, art.joint.points])
        _write_csv(os.path.join(out_dir, "joint_sample.csv"), header, rows)
    if art.posterior is not None:
        mixmod.save_mixture(art.posterior, os.path.join(out_dir, "mixture_posterior.txt"))
        with open(os.path.join(out_dir, "parameters.csv"), "w", newline="\n") as fh:
            fh.write("index,name,transform\n")
            for i, (name, t) in enumerate(zip(layout.names, layout.transforms)):
                fh.write(f"{i},{name},{t.spec_str()}\n")
    if art.posterior_params is not None:
        header, rows = _param_table(layout, art.posterior_params)
        _write_csv(os.path.join(out_dir, "posterior_draws.csv"), header, rows)
    if art.fields_model is not None:
        node_header = [f"node{j + 1}" for j in range(config.grid.size)]
        _write_csv(os.path.join(out_dir, "fields_model.csv"), node_header, art.fields_model)
        _write_csv(
            os.path.join(out_dir, "fields_natural.csv"), node_header, art.fields_natural
        )
    if art.reproductions is not None:
        header = [f"out{j + 1}" for j in range(art.reproductions.shape[1])]
        _write_csv(os.path.join(out_dir, "reproductions.csv"), header, art.reproductions)
    if art.stats is not None:
        _write_csv(
            os.path.join(out_dir, "reproduction_stats.csv"),
            ["index", "observed", "q05", "q25", "q50", "q75", "q95", "covered"],
            art.stats,
        )
    log_lines = [
        "format=anchorinv-run-log-v1",
        f"version={_version}",
        f"backend={backends.backend_name()}",
        f"scenario={art.scenario}",
        f"seed={art.seed}",
        f"n={art.n}",
        f"k={art.k}",
        f"bandwidth={art.bandwidth:.17g}",
        f"ess={'nan' if art.ess is None else format(art.ess, '.17g')}",
        f"n_attempted={art.n_attempted}",
        f"n_discarded={art.n_discarded}",
        f"posterior_attempted={art.posterior_attempted}",
        f"posterior_discarded={art.posterior_discarded}",
        f"forward_calls={art.forward_calls}",
        f"workers={config.workers}",
    ]
    with open(os.path.join(out_dir, "run_log.txt"), "w", newline="\n") as fh:
        fh.write("\n".join(log_lines) + "\n")
