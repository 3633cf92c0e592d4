"""Config files, synthetic truth generation, and the command line."""

import numpy as np
import pytest

from anchorinv.cli import main
from anchorinv.config import load_config, write_default_config
from anchorinv.data import read_typeA_file, read_typeB_file
from anchorinv.engine import default_anchor_layout
from anchorinv.exceptions import ConfigError
from anchorinv.forward import DiffusionForward, ExternalForward
from anchorinv.truth import default_study, generate_truth, write_truth

from conftest import build_study


@pytest.fixture(scope="module")
def reference_dir(tmp_path_factory):
    """The bundled 80-node study written to disk with its config."""
    out = tmp_path_factory.mktemp("reference")
    grid, forward, field_transform, typeA_nodes, inverted_nodes = default_study()
    bundle = generate_truth(grid, forward, field_transform, typeA_nodes, inverted_nodes)
    write_truth(bundle, out)
    write_default_config(out / "run.ini", n=150, seed=3)
    return out, bundle


class TestLoadConfig:
    def test_reference_round_trip(self, reference_dir):
        out, bundle = reference_dir
        cfg = load_config(out / "run.ini")
        assert cfg.scenario == "AB"
        assert cfg.n == 150 and cfg.seed == 3
        assert cfg.k == 500 and cfg.bandwidth == 1.0
        assert cfg.workers == 1 and cfg.posterior_draws == 1000
        assert cfg.grid.size == 80
        np.testing.assert_allclose(cfg.grid.locations, np.arange(1.0, 81.0))
        assert cfg.prior.lambda_support == (5.0, 80.0)
        assert cfg.prior.a == 1.0
        assert cfg.prior.lambda_grid().shape == (200,)
        assert cfg.field_transform.spec_str() == "logit 1.7 10249"
        assert cfg.t_lambda.spec_str() == "logit 5 80"
        assert cfg.t_eta2.spec_str() == "log"
        assert cfg.t_output.spec_str() == "identity"
        assert isinstance(cfg.forward, DiffusionForward)
        assert cfg.forward.output_dim == 15
        np.testing.assert_array_equal(
            cfg.type_a.node_indices(), bundle.typeA_nodes
        )
        np.testing.assert_allclose(cfg.type_a.values, bundle.typeA_values)
        assert cfg.type_a.error.is_degenerate
        np.testing.assert_array_equal(cfg.type_b.indices, bundle.typeB_indices)
        np.testing.assert_allclose(cfg.type_b.values, bundle.typeB_values)
        np.testing.assert_array_equal(
            np.array(cfg.inverted_nodes), bundle.inverted_nodes
        )

    def test_loaded_forward_reproduces_truth_outputs(self, reference_dir):
        out, bundle = reference_dir
        cfg = load_config(out / "run.ini")
        np.testing.assert_allclose(
            cfg.forward.evaluate(bundle.field_model), bundle.outputs, rtol=1e-12
        )

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nowhere.ini")


MINI_INI = """\
[grid]
size = 24

[field]
transform = logit 1.7 10249

[prior]
lambda_support = 5 80

[data]
type_a = data_typeA.txt
type_b = data_typeB.txt

[anchors]
inverted_nodes = auto 5

[forward]
processes = p1 p2

[forward.p1]
bc = 1 0
observations = auto 4

[forward.p2]
source = 9:900
bc = 100 300
observations = auto 3

[run]
scenario = AB
n = 50  # inline comments are stripped
"""


@pytest.fixture(scope="module")
def mini_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("mini")
    _grid, _forward, _ft, bundle = build_study()
    write_truth(bundle, out)
    (out / "run.ini").write_text(MINI_INI)
    return out, bundle


class TestMiniConfig:
    def test_matches_programmatic_study(self, mini_dir):
        out, bundle = mini_dir
        cfg = load_config(out / "run.ini")
        assert cfg.n == 50  # inline comment stripped
        np.testing.assert_array_equal(
            np.array(cfg.inverted_nodes), bundle.inverted_nodes
        )
        np.testing.assert_allclose(
            cfg.forward.evaluate(bundle.field_model), bundle.outputs, rtol=1e-12
        )

    @pytest.mark.parametrize(
        "old,new",
        [
            ("size = 24", "nosize = 24"),
            ("scenario = AB", "scenario = XY"),
            ("processes = p1 p2", "processes = p1 p2 p3"),
            ("inverted_nodes = auto 5", "inverted_nodes = auto"),
            ("source = 9:900", "source = 9x900"),
            ("source = 9:900", "source = 99:900"),
            ("observations = auto 4", "observations = 0 5"),
            ("lambda_support = 5 80", "lambda_support = 5"),
        ],
    )
    def test_corrupted_configs_raise(self, mini_dir, tmp_path, old, new):
        out, _ = mini_dir
        text = MINI_INI.replace(old, new)
        assert text != MINI_INI
        bad = tmp_path / "bad.ini"
        bad.write_text(text)
        # data paths resolve relative to the config file
        for name in ("data_typeA.txt", "data_typeB.txt"):
            (tmp_path / name).write_text((out / name).read_text())
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_unknown_forward_kind(self, mini_dir, tmp_path):
        out, _ = mini_dir
        text = MINI_INI.replace("[forward]", "[forward]\nkind = spectral")
        bad = tmp_path / "bad.ini"
        bad.write_text(text)
        for name in ("data_typeA.txt", "data_typeB.txt"):
            (tmp_path / name).write_text((out / name).read_text())
        with pytest.raises(ConfigError):
            load_config(bad)


EXTERNAL_INI = """\
[grid]
size = 10

[prior]
lambda_support = 2 9

[data]
type_b = data_typeB.txt

[forward]
kind = external
command = {command}
output_dim = 3

[run]
scenario = B
n = 40
eta2_range = 0.1 2.0
beta_range = -5 5
"""


def test_external_forward_config(tmp_path):
    from anchorinv.data import write_typeB_file

    write_typeB_file(tmp_path / "data_typeB.txt", [0, 2], [1.0, 2.0])
    ini = tmp_path / "run.ini"
    ini.write_text(EXTERNAL_INI.format(command="cat"))
    cfg = load_config(ini)
    assert isinstance(cfg.forward, ExternalForward)
    assert cfg.forward.output_dim == 3
    assert cfg.scenario == "B"
    assert cfg.eta2_range == (0.1, 2.0)
    assert cfg.field_transform.spec_str() == "identity"


class TestGenerateTruth:
    def test_validations(self, small_study):
        grid, forward, ft, _ = small_study
        with pytest.raises(ValueError):
            generate_truth(grid, forward, ft, [3], [5], profile_natural=np.ones(7))
        with pytest.raises(ValueError):
            generate_truth(grid, forward, ft, [3], [3])  # overlap
        with pytest.raises(ValueError):
            generate_truth(grid, forward, ft, [99], [5])
        with pytest.raises(ValueError):
            generate_truth(
                grid, forward, ft, [3], [5], typeB_indices=[99]
            )
        with pytest.raises(ValueError):
            generate_truth(grid, forward, ft, [3], [5], typeA_sd=0.1)  # no rng

    def test_noise_perturbs_data_not_truth(self, small_study):
        grid, forward, ft, clean = small_study
        rng = np.random.default_rng(5)
        noisy = generate_truth(
            grid, forward, ft, clean.typeA_nodes, clean.inverted_nodes,
            profile_natural=clean.field_natural,
            typeA_sd=0.5, typeB_sd=1.0, rng=rng,
        )
        np.testing.assert_array_equal(noisy.field_model, clean.field_model)
        np.testing.assert_array_equal(noisy.outputs, clean.outputs)
        assert not np.array_equal(noisy.typeA_values, clean.typeA_values)
        assert not np.array_equal(noisy.typeB_values, clean.typeB_values)
        np.testing.assert_array_equal(noisy.typeA_sd, np.full(3, 0.5))

    def test_write_and_read_back(self, small_study, tmp_path):
        grid, _forward, _ft, bundle = small_study
        write_truth(bundle, tmp_path)
        type_a = read_typeA_file(tmp_path / "data_typeA.txt", grid)
        np.testing.assert_array_equal(type_a.node_indices(), bundle.typeA_nodes)
        np.testing.assert_allclose(type_a.values, bundle.typeA_values)
        type_b = read_typeB_file(tmp_path / "data_typeB.txt")
        np.testing.assert_array_equal(type_b.indices, bundle.typeB_indices)
        np.testing.assert_allclose(type_b.values, bundle.typeB_values)
        field = np.loadtxt(tmp_path / "truth_field.csv", delimiter=",", skiprows=1)
        assert field.shape == (grid.size, 4)
        np.testing.assert_allclose(field[:, 2], bundle.field_natural)
        anchors = (tmp_path / "true_anchors.csv").read_text().splitlines()
        assert len(anchors) - 1 == bundle.typeA_nodes.size + bundle.inverted_nodes.size

    def test_default_study_layout(self):
        grid, forward, ft, typeA_nodes, inverted_nodes = default_study()
        assert grid.size == 80
        assert forward.output_dim == 15
        measured, inverted = default_anchor_layout(80, 5, 15)
        np.testing.assert_array_equal(typeA_nodes, measured)
        np.testing.assert_array_equal(inverted_nodes, inverted)
        assert ft.spec_str() == "logit 1.7 10249"


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    """truth + invert executed once through the CLI entry point."""
    workdir = tmp_path_factory.mktemp("cli")
    data = workdir / "study"
    assert main([
        "truth", "--out", str(data), "--emit-config", "--n", "150", "--seed", "3",
    ]) == 0
    run1 = workdir / "run1"
    assert main([
        "invert", "--config", str(data / "run.ini"), "--out", str(run1),
        "--posterior-draws", "25",
    ]) == 0
    return workdir, data, run1


class TestCli:
    def test_truth_and_invert_artifacts(self, cli_run):
        _workdir, data, run1 = cli_run
        for name in ("run.ini", "data_typeA.txt", "data_typeB.txt",
                     "truth_field.csv", "true_anchors.csv"):
            assert (data / name).is_file(), name
        for name in ("mixture_posterior.txt", "parameters.csv",
                     "posterior_draws.csv", "run_log.txt"):
            assert (run1 / name).is_file(), name

    def test_fields_command(self, cli_run, capsys):
        workdir, data, run1 = cli_run
        fields_dir = workdir / "fields"
        assert main([
            "fields", "--config", str(data / "run.ini"), "--out", str(fields_dir),
            "--mixture", str(run1 / "mixture_posterior.txt"),
            "--count", "10", "--seed", "5",
        ]) == 0
        assert "field realizations written" in capsys.readouterr().out
        rows = np.loadtxt(fields_dir / "fields_model.csv", delimiter=",", skiprows=1)
        assert rows.shape[1] == 80

    def test_density_by_index(self, cli_run, tmp_path, capsys):
        _workdir, _data, run1 = cli_run
        dens_csv = tmp_path / "density.csv"
        assert main([
            "density", "--mixture", str(run1 / "mixture_posterior.txt"),
            "--index", "0", "--grid", "-3", "3", "41", "--out", str(dens_csv),
        ]) == 0
        capsys.readouterr()
        dens = np.loadtxt(dens_csv, delimiter=",", skiprows=1)
        assert dens.shape == (41, 2)
        assert np.all(dens[:, 1] >= 0)

    def test_density_by_name(self, cli_run, capsys):
        _workdir, _data, run1 = cli_run
        assert main([
            "density", "--mixture", str(run1 / "mixture_posterior.txt"),
            "--name", "eta2", "--parameters", str(run1 / "parameters.csv"),
        ]) == 0
        out = capsys.readouterr().out
        assert out.startswith("value,density")

    def test_stats_command(self, cli_run, tmp_path, capsys):
        _workdir, data, run1 = cli_run
        stats_csv = tmp_path / "stats.csv"
        assert main([
            "stats", "--reproductions", str(run1 / "reproductions.csv"),
            "--typeb", str(data / "data_typeB.txt"), "--out", str(stats_csv),
        ]) == 0
        capsys.readouterr()
        assert stats_csv.read_text() == (run1 / "reproduction_stats.csv").read_text()

    def test_scenario_override(self, cli_run, tmp_path, capsys):
        _workdir, data, _run1 = cli_run
        run_a = tmp_path / "runA"
        assert main([
            "invert", "--config", str(data / "run.ini"), "--out", str(run_a),
            "--scenario", "A", "--posterior-draws", "20",
        ]) == 0
        out = capsys.readouterr().out
        assert "scenario A" in out
        assert not (run_a / "mixture_posterior.txt").exists()
        assert (run_a / "posterior_draws.csv").is_file()

    def test_noisy_small_grid_flow(self, tmp_path, capsys):
        profile = tmp_path / "profile.txt"
        rng = np.random.default_rng(8)
        np.savetxt(profile, 40.0 + 500.0 * rng.beta(2.0, 3.0, size=24))
        data = tmp_path / "study24"
        assert main([
            "truth", "--out", str(data), "--grid-size", "24",
            "--profile", str(profile), "--typea-sd", "0.15",
            "--emit-config", "--n", "100", "--seed", "5",
        ]) == 0
        capsys.readouterr()
        run_dir = tmp_path / "run24"
        assert main([
            "invert", "--config", str(data / "run.ini"), "--out", str(run_dir),
            "--posterior-draws", "12",
        ]) == 0
        out = capsys.readouterr().out
        assert "artifacts written" in out
        assert "effective sample size" in out
        # noisy type-A anchors become sampled coordinates
        header = (run_dir / "posterior_draws.csv").read_text().splitlines()[0]
        assert "anchor_a1" in header

    def test_error_exit_codes(self, tmp_path, capsys):
        assert main([
            "invert", "--config", str(tmp_path / "missing.ini"),
            "--out", str(tmp_path / "x"),
        ]) == 1
        err = capsys.readouterr().err
        assert "error:" in err

        assert main([
            "stats", "--reproductions", str(tmp_path / "nope.csv"),
            "--typeb", str(tmp_path / "nope.txt"),
        ]) == 1
        capsys.readouterr()

    def test_density_argument_errors(self, cli_run, capsys):
        _workdir, _data, run1 = cli_run
        with pytest.raises(SystemExit):
            main(["density", "--mixture", str(run1 / "mixture_posterior.txt")])
        with pytest.raises(SystemExit):
            main([
                "density", "--mixture", str(run1 / "mixture_posterior.txt"),
                "--index", "999",
            ])
        capsys.readouterr()

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "anchorinv" in capsys.readouterr().out
