import dataclasses

import numpy as np
import pytest

from snse.basis import get_basis
from snse.errors import CertificationError, ConfigError
from snse.harness import (ExperimentConfig, functional_samples, manifest_lines,
                          persist, run_arm, run_experiment)
from snse.hypotheses import kernel_grid
from snse.integrate import BrownianNoiseSpec, SolverConfig
from snse.kernels import constant_field, scaled_identity, zero_map
from snse.measures import alpha_stable_measure
from snse.stats import compare_laws


def _sigma(basis, amp=0.5, idx=0):
    g = np.zeros(basis.dim)
    g[idx] = amp
    return constant_field(g)


def _solver(t_end=0.5, dt=1e-3, stride=50):
    return SolverConfig(t_end, dt, record_stride=stride,
                        include_nonlinearity=False, track_modes=(0,))


def _config(basis, eps=(0.2, 0.1), n_paths=120, seed=11, **kw):
    sigma = kw.pop("sigma", None) or _sigma(basis)
    kernels = kw.pop("kernels", None)
    if kernels is None:
        kernels = kernel_grid(sigma, "annulus", "one", eps,
                              alpha_stable_measure(1.0))
    u0 = np.zeros(basis.dim)
    u0[0] = 0.3
    return ExperimentConfig(
        basis=basis, solver=kw.pop("solver", _solver()), initial=u0,
        noise=BrownianNoiseSpec((sigma,)), kernels=tuple(kernels),
        functionals=kw.pop("functionals", ("normH2", "mode:0")),
        n_paths=n_paths, seed=seed, **kw)


@pytest.fixture(scope="module")
def basis1():
    return get_basis(1)


class TestConfigValidation:
    def test_wrong_initial_dimension(self, basis1):
        with pytest.raises(ConfigError):
            cfg = _config(basis1)
            ExperimentConfig(basis=basis1, solver=cfg.solver,
                             initial=np.zeros(3), noise=cfg.noise,
                             kernels=cfg.kernels)

    def test_unknown_functional(self, basis1):
        with pytest.raises(ConfigError):
            _config(basis1, functionals=("energy",))

    def test_mode_index_out_of_range(self, basis1):
        with pytest.raises(ConfigError):
            _config(basis1, functionals=("mode:99",))

    def test_sigma_name_mismatch(self, basis1):
        kernels = kernel_grid(_sigma(basis1), "annulus", "one",
                              (0.2, 0.1), alpha_stable_measure(1.0))
        cfg = _config(basis1)
        with pytest.raises(ConfigError):
            ExperimentConfig(basis=basis1, solver=cfg.solver,
                             initial=cfg.initial,
                             noise=BrownianNoiseSpec((scaled_identity(0.5),)),
                             kernels=tuple(kernels))

    def test_grid_must_decrease(self, basis1):
        kernels = kernel_grid(_sigma(basis1), "annulus", "one",
                              (0.2, 0.1), alpha_stable_measure(1.0))
        with pytest.raises(ConfigError):
            _config(basis1, kernels=tuple(reversed(kernels)))

    def test_hash_stable_and_sensitive(self, basis1):
        a = _config(basis1, seed=11)
        b = _config(basis1, seed=11)
        c = _config(basis1, seed=12)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()
        assert len(a.config_hash()) == 16


class TestRunArm:
    def test_thread_count_does_not_change_bytes(self, basis1):
        cfg = _config(basis1, n_paths=130, chunk_size=32)
        for arm, j in (("brownian", 0), ("jump", 1)):
            one = run_arm(cfg, arm, j, threads=1)
            four = run_arm(cfg, arm, j, threads=4)
            for name in ("norm_h2", "terminal", "jump_counts", "int_v2"):
                assert np.array_equal(getattr(one, name), getattr(four, name),
                                      equal_nan=True)

    def test_chunk_size_does_not_change_values(self, basis1):
        cfg = _config(basis1, n_paths=50, chunk_size=512)
        alt = dataclasses.replace(cfg, chunk_size=7)
        a = run_arm(cfg, "jump", 0)
        b = run_arm(alt, "jump", 0)
        assert np.array_equal(a.terminal, b.terminal, equal_nan=True)
        assert np.array_equal(a.jump_counts, b.jump_counts)

    def test_paths_override(self, basis1):
        cfg = _config(basis1, n_paths=120)
        batch = run_arm(cfg, "brownian", 0, n_paths=3)
        assert batch.n_paths == 3


class TestFunctionalSamples:
    def test_deterministic_decay_values(self, basis1):
        zero = zero_map()
        cfg = _config(basis1, sigma=zero, n_paths=4,
                      functionals=("normH2", "normV2", "mode:0",
                                   "sup_normH2"))
        batch = run_arm(cfg, "brownian", 0, n_paths=4)
        # eigenvalue 1 for the first mode, so the field is 0.3 e^{-t} e_0
        ref = 0.3 * np.exp(-0.5)
        assert functional_samples(batch, "mode:0") == pytest.approx(
            [ref] * 4, rel=1e-12)
        assert functional_samples(batch, "normH2") == pytest.approx(
            [ref ** 2] * 4, rel=1e-12)
        assert functional_samples(batch, "normV2") == pytest.approx(
            [ref ** 2] * 4, rel=1e-12)
        assert functional_samples(batch, "sup_normH2") == pytest.approx(
            [0.09] * 4, rel=1e-12)

    def test_unknown_name_rejected(self, basis1):
        cfg = _config(basis1)
        batch = run_arm(cfg, "brownian", 0, n_paths=2)
        with pytest.raises(ConfigError):
            functional_samples(batch, "enstrophy")


@pytest.fixture(scope="module")
def result(basis1):
    return run_experiment(_config(basis1, n_paths=150))


class TestRunExperiment:
    def test_row_layout(self, result):
        assert len(result.rows) == 2 * (1 + 2)
        assert [r.arm for r in result.rows[:2]] == ["bm", "bm"]
        jump = result.rows[2:]
        assert [r.epsilon for r in jump] == [0.2, 0.2, 0.1, 0.1]
        for r in jump:
            assert np.isfinite(r.gap_vs_bm) and np.isfinite(r.ks_stat)
            assert r.ks_pass is not None

    def test_rows_match_direct_comparison(self, result):
        row = result.jump_rows("normH2")[0]
        cmp = compare_laws(result.samples_bm["normH2"],
                           result.samples_jump[0]["normH2"])
        assert row.gap_vs_bm == cmp.mean_gap
        assert row.joint_se == cmp.joint_se
        assert row.ks_stat == cmp.ks_stat

    def test_matched_linear_arms_agree(self, result):
        # both arms share the constant sigma, so the mode mean matches
        # e^{-T} u0 up to Monte Carlo error on either side
        for row in result.jump_rows("mode:0"):
            assert row.gap_vs_bm <= 5.0 * row.joint_se + 1e-12

    def test_no_blowup_and_uniform_moments(self, result):
        assert result.blowup_bm == 0.0
        assert result.blowup_jump == [0.0, 0.0]
        assert not result.invalid
        assert len(result.moments) == 3
        assert all(m.uniform for m in result.moments)

    def test_certified(self, result):
        assert result.certified and not result.forced
        assert result.notes == ()

    def test_gate_refuses_nondecaying_kernels(self, basis1):
        bad = kernel_grid(_sigma(basis1), "outer_linear", "one", (0.2, 0.1),
                          alpha_stable_measure(1.0))
        cfg = _config(basis1, kernels=tuple(bad))
        with pytest.raises(CertificationError):
            run_experiment(cfg)

    def test_force_runs_and_marks_uncertified(self, basis1):
        bad = kernel_grid(_sigma(basis1), "outer_linear", "one", (0.2, 0.1),
                          alpha_stable_measure(1.0))
        cfg = _config(basis1, kernels=tuple(bad), n_paths=100)
        res = run_experiment(cfg, force=True)
        assert res.forced and not res.certified
        assert any("UNCERTIFIED" in line for line in manifest_lines(res))

    def test_too_few_paths(self, basis1):
        with pytest.raises(ConfigError):
            run_experiment(_config(basis1, n_paths=50))

    def test_all_blowup_marks_invalid(self, basis1):
        zero = zero_map()
        solver = SolverConfig(0.5, 1e-3, record_stride=50,
                              include_nonlinearity=False, track_modes=(0,),
                              blowup_norm=5.0)
        cfg = _config(basis1, sigma=zero, n_paths=100, solver=solver,
                      forcing=scaled_identity(8.0))
        res = run_experiment(cfg)
        assert res.blowup_bm == 1.0
        assert res.invalid
        assert np.isnan(res.rows[0].mean)

    def test_no_kernels_runs_bm_only(self, basis1):
        cfg = _config(basis1, kernels=())
        res = run_experiment(cfg)
        assert len(res.rows) == 2
        assert len(res.moments) == 1
        assert res.moments[0].uniform


class TestPersist:
    def test_reruns_and_threads_are_byte_identical(self, basis1, tmp_path):
        res_a = run_experiment(_config(basis1, n_paths=110), threads=1)
        res_b = run_experiment(_config(basis1, n_paths=110), threads=3)
        persist(res_a, tmp_path / "a", dump_paths=True)
        persist(res_b, tmp_path / "b", dump_paths=True, threads=3)
        for name in ("summary.csv", "moments.csv", "manifest.txt",
                     "paths_bm.csv", "paths_eps0.2.csv", "paths_eps0.1.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                   (tmp_path / "b" / name).read_bytes(), name

    def test_refuses_overwrite(self, basis1, tmp_path):
        res = run_experiment(_config(basis1, n_paths=100))
        persist(res, tmp_path)
        with pytest.raises(FileExistsError):
            persist(res, tmp_path)
        persist(res, tmp_path, overwrite=True)

    def test_manifest_contents(self, basis1, tmp_path):
        cfg = _config(basis1, n_paths=100, seed=23)
        res = run_experiment(cfg)
        persist(res, tmp_path)
        text = (tmp_path / "manifest.txt").read_text()
        fields = dict(line.split(": ", 1) for line in text.splitlines()
                      if ": " in line)
        assert fields["seed"] == "23"
        assert fields["config_hash"] == cfg.config_hash()
        assert fields["certification"] == "passed"
        assert fields["invalid"] == "false"
        assert "timestamp" not in text

    def test_csv_headers_and_dump_shape(self, basis1, tmp_path):
        cfg = _config(basis1, n_paths=100)
        res = run_experiment(cfg)
        persist(res, tmp_path, dump_paths=True)
        summary = (tmp_path / "summary.csv").read_text().splitlines()
        assert summary[0] == ("arm,epsilon,functional,mean,se,"
                              "gap_vs_bm,joint_se,ks_stat,ks_pass")
        assert summary[1].startswith("bm,,normH2,")
        moments = (tmp_path / "moments.csv").read_text().splitlines()
        assert moments[0] == ("arm,epsilon,supH4,supH4_se,"
                              "intV2sq,intV2sq_se,uniformity_flag")
        dump = (tmp_path / "paths_bm.csv").read_text().splitlines()
        assert dump[0] == "path_id,t,normH2,normV2,u_e0,n_jumps_so_far"
        n_rec = cfg.solver.n_recorded
        assert len(dump) == 1 + 100 * n_rec
        assert all(line.endswith(",0") for line in dump[1:])
