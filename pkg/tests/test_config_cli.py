import subprocess
from pathlib import Path
from textwrap import dedent

import numpy as np
import pytest

from snse.cli import main
from snse.config import (load_config, parse_coeff_list, parse_map_spec,
                         parse_measure_spec)
from snse.errors import ConfigError

MINIMAL = """\
[basis]
n_max = 1

[solver]
t_end = 0.2
dt = 1e-3

[brownian]
sigma = constant:0.5@0

[experiment]
paths = 120
"""

WITH_JUMP = MINIMAL + """
[jump]
sigma = constant:0.5@0
family_h = annulus
epsilon = 0.2, 0.1
measure = stable:1.0
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(dedent(text))
    return str(p)


class TestMapAndMeasureSpecs:
    def test_map_specs(self):
        assert parse_map_spec("zero", 8).name == "zero"
        m = parse_map_spec("identity:2", 8)
        assert m.name == "identity:2"
        assert np.allclose(m.fn(np.ones(8)), 2.0)
        sat = parse_map_spec("saturating:0.8", 8)
        u = np.zeros(8)
        u[0] = 1.0
        assert sat.fn(u)[0] == pytest.approx(0.4)
        c = parse_map_spec("constant:0.5@0;-0.25@3", 8)
        g = c.fn(np.zeros(8))
        assert g[0] == 0.5 and g[3] == -0.25

    def test_map_spec_errors(self):
        with pytest.raises(ConfigError):
            parse_map_spec("fourier", 8)
        with pytest.raises(ConfigError):
            parse_map_spec("identity:abc", 8)
        with pytest.raises(ConfigError):
            parse_map_spec("constant:1.0@99", 8)

    def test_measure_specs(self):
        assert "1" in parse_measure_spec("stable:1.0").label()
        nu = parse_measure_spec("power:-0.5,1,inf")
        assert nu.density(2.0) == pytest.approx(2.0 ** -0.5)
        with pytest.raises(ConfigError):
            parse_measure_spec("gaussian:1")
        with pytest.raises(ConfigError):
            parse_measure_spec("stable:abc")

    def test_coeff_list(self):
        v = parse_coeff_list("0.3@0, -0.1@5", 8)
        assert v[0] == 0.3 and v[5] == -0.1 and np.count_nonzero(v) == 2
        with pytest.raises(ConfigError):
            parse_coeff_list("0.3@9", 8)
        with pytest.raises(ConfigError):
            parse_coeff_list("x@0", 8)


class TestLoader:
    def test_minimal_defaults(self, tmp_path):
        run = load_config(_write(tmp_path, MINIMAL))
        cfg = run.experiment
        assert cfg.basis.dim == 8
        assert cfg.solver.t_end == 0.2
        assert cfg.functionals == ("normH2",)
        assert cfg.kernels == ()
        assert cfg.seed == 0
        assert cfg.n_paths == 120
        # default initial condition excites two low modes
        assert np.count_nonzero(cfg.initial) == 2
        assert run.out_dir is None and not run.dump_paths

    def test_jump_section(self, tmp_path):
        run = load_config(_write(tmp_path, WITH_JUMP))
        cfg = run.experiment
        assert cfg.epsilons == (0.2, 0.1)
        assert cfg.kernels[0].channels[0].sigma.name == "constant:0.5@0"
        assert run.jump_spec["family_h"] == "annulus"

    def test_overrides(self, tmp_path):
        path = _write(tmp_path, MINIMAL)
        cfg = load_config(path, seed=99, n_paths=12).experiment
        assert cfg.seed == 99 and cfg.n_paths == 12

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown section"):
            load_config(_write(tmp_path, MINIMAL + "\n[extra]\nx = 1\n"))

    def test_unknown_key(self, tmp_path):
        bad = MINIMAL.replace("dt = 1e-3", "dt = 1e-3\ntimestep = 2")
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(_write(tmp_path, bad))

    def test_missing_section_and_key(self, tmp_path):
        with pytest.raises(ConfigError, match="missing required section"):
            load_config(_write(tmp_path, "[basis]\nn_max = 1\n"))
        bad = MINIMAL.replace("paths = 120", "")
        with pytest.raises(ConfigError, match="missing required key"):
            load_config(_write(tmp_path, bad))

    def test_sigma_mismatch(self, tmp_path):
        bad = WITH_JUMP.replace("sigma = constant:0.5@0\nfamily_h",
                                "sigma = identity:0.5\nfamily_h")
        with pytest.raises(ConfigError, match="sigma must equal"):
            load_config(_write(tmp_path, bad))

    def test_epsilon_must_decrease(self, tmp_path):
        bad = WITH_JUMP.replace("epsilon = 0.2, 0.1", "epsilon = 0.1, 0.2")
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, bad))

    def test_track_modes_follow_functionals(self, tmp_path):
        text = MINIMAL.replace("paths = 120",
                               "paths = 120\nfunctionals = normH2, mode:3\n"
                               "track = 1")
        cfg = load_config(_write(tmp_path, text)).experiment
        assert cfg.solver.track_modes == (1, 3)

    def test_bad_values(self, tmp_path):
        with pytest.raises(ConfigError, match="not a number"):
            load_config(_write(tmp_path, MINIMAL.replace("t_end = 0.2",
                                                         "t_end = fast")))
        text = MINIMAL.replace("dt = 1e-3", "dt = 1e-3\nnonlinearity = maybe")
        with pytest.raises(ConfigError, match="not a boolean"):
            load_config(_write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.cfg")


GOOD_JUMP = """\
[basis]
n_max = 1

[solver]
t_end = 0.2
dt = 1e-3

[brownian]
sigma = identity:0.4

[jump]
sigma = identity:0.4
family_h = annulus
epsilon = 0.2, 0.1
measure = stable:1.0

[experiment]
paths = 100
seed = 3
functionals = normH2, mode:0
"""

BAD_JUMP = GOOD_JUMP.replace("family_h = annulus", "family_h = outer_linear")


class TestCliCheck:
    def test_pass_writes_report(self, tmp_path, capsys):
        cfg = _write(tmp_path, GOOD_JUMP)
        assert main(["check", "--config", cfg,
                     "--out", str(tmp_path / "rep")]) == 0
        out = capsys.readouterr().out
        assert "CERTIFIED" in out
        report = (tmp_path / "rep" / "check_report.csv").read_text()
        assert report.splitlines()[0] == "check,epsilon,value,witness,pass"
        assert "generator_gap" in report

    def test_failing_grid_exits_1(self, tmp_path, capsys):
        cfg = _write(tmp_path, BAD_JUMP)
        assert main(["check", "--config", cfg]) == 1
        out = capsys.readouterr().out
        assert "FAILED" in out
        assert "note:" in out

    def test_missing_config_is_usage_error(self, tmp_path):
        assert main(["check", "--config", str(tmp_path / "nope.cfg")]) == 2
        assert main(["check"]) == 2

    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["bogus"]) == 2
        capsys.readouterr()


class TestCliSimulate:
    def test_bm_arm_prints_and_dumps(self, tmp_path, capsys):
        cfg = _write(tmp_path, GOOD_JUMP)
        out_a = tmp_path / "a"
        assert main(["simulate", "--config", cfg, "--paths", "5",
                     "--out", str(out_a)]) == 0
        text = capsys.readouterr().out
        assert "arm: bm" in text and "normH2: mean=" in text
        dump_a = (out_a / "paths_bm.csv").read_bytes()
        out_b = tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--paths", "5",
                     "--out", str(out_b)]) == 0
        capsys.readouterr()
        assert dump_a == (out_b / "paths_bm.csv").read_bytes()

    def test_jump_arm_uses_smallest_epsilon(self, tmp_path, capsys):
        cfg = _write(tmp_path, GOOD_JUMP)
        assert main(["simulate", "--config", cfg, "--paths", "4",
                     "--arm", "jump", "--out", str(tmp_path / "j")]) == 0
        assert "eps=0.1" in capsys.readouterr().out
        assert (tmp_path / "j" / "paths_eps0.1.csv").exists()

    def test_seed_precedence(self, tmp_path, capsys, monkeypatch):
        cfg = _write(tmp_path, GOOD_JUMP)
        monkeypatch.setenv("SNSE_SEED", "21")
        assert main(["simulate", "--config", cfg, "--paths", "2"]) == 0
        assert "seed: 21" in capsys.readouterr().out
        assert main(["simulate", "--config", cfg, "--paths", "2",
                     "--seed", "9"]) == 0
        assert "seed: 9" in capsys.readouterr().out
        monkeypatch.setenv("SNSE_SEED", "pi")
        assert main(["simulate", "--config", cfg, "--paths", "2"]) == 2

    def test_blowup_exits_3(self, tmp_path, capsys):
        text = GOOD_JUMP.replace(
            "dt = 1e-3", "dt = 1e-3\nblowup_norm = 2").replace(
            "[experiment]", "[drift]\nforcing = identity:40\n\n[experiment]")
        cfg = _write(tmp_path, text)
        assert main(["simulate", "--config", cfg, "--paths", "3"]) == 3
        capsys.readouterr()


ZERO_NOISE = GOOD_JUMP.replace("identity:0.4", "zero") + """
[output]
dir = PLACEHOLDER
"""


class TestCliConverge:
    def test_zero_noise_run_passes(self, tmp_path, capsys):
        text = ZERO_NOISE.replace("PLACEHOLDER", str(tmp_path / "run"))
        cfg = _write(tmp_path, text)
        assert main(["converge", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out
        summary = (tmp_path / "run" / "summary.csv").read_text()
        assert summary.splitlines()[0].startswith("arm,epsilon,functional")
        assert (tmp_path / "run" / "moments.csv").exists()
        assert (tmp_path / "run" / "manifest.txt").exists()
        # second run into the same directory must refuse without --force
        assert main(["converge", "--config", cfg]) == 2
        capsys.readouterr()
        assert main(["converge", "--config", cfg, "--force"]) == 0
        capsys.readouterr()

    def test_uncertified_paths(self, tmp_path, capsys):
        cfg = _write(tmp_path, BAD_JUMP)
        assert main(["converge", "--config", cfg,
                     "--out", str(tmp_path / "x")]) == 1
        assert "certification failed" in capsys.readouterr().err
        assert main(["converge", "--config", cfg, "--force",
                     "--out", str(tmp_path / "y")]) == 1
        out = capsys.readouterr().out
        assert "UNCERTIFIED" in out
        manifest = (tmp_path / "y" / "manifest.txt").read_text()
        assert "UNCERTIFIED" in manifest

    def test_requires_out_dir(self, tmp_path, capsys):
        cfg = _write(tmp_path, GOOD_JUMP)
        assert main(["converge", "--config", cfg]) == 2
        assert "output directory" in capsys.readouterr().err


class TestCliTensorDump:
    def test_dump_to_file(self, tmp_path, capsys):
        assert main(["tensor-dump", "--nmax", "1",
                     "--out", str(tmp_path)]) == 0
        capsys.readouterr()
        lines = (tmp_path / "tensor_n1.csv").read_text().splitlines()
        assert lines[0] == "i,j,l,b_ijl"
        assert len(lines) > 1

    def test_dump_to_stdout(self, capsys):
        assert main(["tensor-dump", "--nmax", "1"]) == 0
        assert capsys.readouterr().out.startswith("i,j,l,b_ijl")

    def test_guard_rails(self, capsys):
        assert main(["tensor-dump", "--nmax", "9"]) == 1
        assert "refusing" in capsys.readouterr().err
        assert main(["tensor-dump", "--nmax", "0"]) == 2
        capsys.readouterr()


EXAMPLES = Path(__file__).resolve().parent.parent / "examples"


class TestShippedConfigs:
    def test_family_i_certifies(self, capsys):
        assert main(["check", "--config",
                     str(EXAMPLES / "family_i.cfg")]) == 0
        capsys.readouterr()

    def test_family_ii_stable_fails(self, capsys):
        assert main(["check", "--config",
                     str(EXAMPLES / "family_ii_stable.cfg")]) == 1
        capsys.readouterr()

    def test_family_ii_alt_passes(self, capsys):
        assert main(["check", "--config",
                     str(EXAMPLES / "family_ii_alt.cfg")]) == 0
        capsys.readouterr()

    def test_remaining_configs_load(self):
        for name in ("ou_linear", "desk_convergence"):
            run = load_config(EXAMPLES / f"{name}.cfg")
            assert run.experiment.kernels

    def test_console_script_installed(self):
        proc = subprocess.run(["snse", "tensor-dump", "--nmax", "1"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.startswith("i,j,l,b_ijl")
