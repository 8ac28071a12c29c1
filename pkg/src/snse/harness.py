"""Monte Carlo experiment harness: paired arms, law gaps, persistence.

An experiment runs one Brownian arm plus one jump arm per epsilon from the
same initial field and time grid, evaluates a fixed set of terminal
functionals on every path, and compares each jump law against the Brownian
reference (mean gap with joint standard error, and a two-sample KS test).

Reproducibility contract: paths are split into fixed-size chunks whose
boundaries never depend on the worker-thread count, every path owns a
counter-based stream keyed by (seed, arm, eps-index, path-index), and
results are folded in path-index order.  (config, seed) therefore determine
every output byte; persisted files carry no timestamps.

Before simulating, the harness re-derives the linear-growth / Lipschitz and
jump-size-decay certificates for the supplied kernel grid and refuses to run
when either fails, unless explicitly forced; forced runs are labelled
UNCERTIFIED in the manifest.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .basis import BasisSpec
from .errors import CertificationError, ConfigError
from .hypotheses import check_growth_lipschitz, check_jump_size_decay
from .integrate import (BrownianNoiseSpec, PathBatch, SolverConfig,
                        simulate_brownian_batch, simulate_jump_batch)
from .kernels import FieldMap, JumpKernel
from .sampling import derive_stream, stream_key
from .stats import compare_laws, summarize

BLOWUP_BUDGET = 0.01

_KNOWN_FUNCTIONALS = ("normH2", "normV2", "sup_normH2")


def _check_functional(name: str, dim: int) -> None:
    if name in _KNOWN_FUNCTIONALS:
        return
    if name.startswith("mode:"):
        try:
            k = int(name[5:])
        except ValueError:
            raise ConfigError(f"bad functional {name!r}") from None
        if not 0 <= k < dim:
            raise ConfigError(f"functional {name!r}: mode index out of range")
        return
    raise ConfigError(f"unknown functional {name!r}")


def functional_samples(batch: PathBatch, name: str) -> np.ndarray:
    """Per-path functional values, restricted to non-blown-up paths."""
    valid = batch.valid_mask()
    if name == "normH2":
        vals = batch.norm_h2[:, -1]
    elif name == "normV2":
        vals = batch.norm_v2[:, -1]
    elif name == "sup_normH2":
        vals = np.sqrt(batch.sup_h4)
    elif name.startswith("mode:"):
        vals = batch.terminal[:, int(name[5:])]
    else:
        raise ConfigError(f"unknown functional {name!r}")
    return vals[valid]


@dataclass
class ExperimentConfig:
    """Everything a paired Brownian-vs-jump experiment needs.

    The Brownian channels must be the same named coefficient maps as the
    jump kernels' base sigma so the two arms share a diffusion limit.
    """

    basis: BasisSpec
    solver: SolverConfig
    initial: np.ndarray
    noise: BrownianNoiseSpec
    kernels: tuple[JumpKernel, ...]
    functionals: tuple[str, ...] = ("normH2",)
    n_paths: int = 1000
    seed: int = 0
    forcing: FieldMap | None = None
    chunk_size: int = 512
    label: str = "experiment"

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=np.float64)
        if self.initial.shape != (self.basis.dim,):
            raise ConfigError("initial condition has wrong dimension")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be positive")
        if self.chunk_size < 1:
            raise ConfigError("chunk_size must be positive")
        if not self.functionals:
            raise ConfigError("at least one functional required")
        for name in self.functionals:
            _check_functional(name, self.basis.dim)
        eps = [k.epsilon for k in self.kernels]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("kernel grid must have strictly decreasing epsilon")
        for kern in self.kernels:
            if len(kern.channels) != self.noise.n_channels:
                raise ConfigError("Brownian and jump channel counts differ")
            for bm_map, ch in zip(self.noise.channels, kern.channels):
                if bm_map.name != ch.sigma.name:
                    raise ConfigError(
                        f"Brownian sigma {bm_map.name!r} does not match "
                        f"jump base sigma {ch.sigma.name!r}")

    @property
    def epsilons(self) -> tuple[float, ...]:
        return tuple(k.epsilon for k in self.kernels)

    def canonical(self) -> str:
        """Stable plain-text rendering used for the config hash."""
        s = self.solver
        nz = np.nonzero(self.initial)[0]
        lines = [
            f"basis.n_max={self.basis.n_max}",
            f"solver.t_end={s.t_end!r}",
            f"solver.dt={s.dt!r}",
            f"solver.record_stride={s.record_stride}",
            f"solver.nonlinearity={s.include_nonlinearity}",
            f"solver.blowup_norm={s.blowup_norm!r}",
            "solver.track_modes=" + ",".join(str(k) for k in s.track_modes),
            "initial=" + ";".join(f"{self.initial[i]!r}@{i}" for i in nz),
            "forcing=" + (self.forcing.name if self.forcing else "zero"),
            "brownian=" + ",".join(ch.name for ch in self.noise.channels),
            "functionals=" + ",".join(self.functionals),
            f"paths={self.n_paths}",
            f"seed={self.seed}",
            f"chunk={self.chunk_size}",
        ]
        for kern in self.kernels:
            ch = kern.channels[0]
            lines.append(
                f"jump.eps={kern.epsilon!r}:h={ch.h.family}"
                f":theta={ch.theta.family}:measure={ch.measure.label()}"
                f":sigma={ch.sigma.name}:delta={ch.cutoff_delta!r}"
                f":channels={len(kern.channels)}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _chunk_bounds(n: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _merge_batches(parts: list[PathBatch]) -> PathBatch:
    if len(parts) == 1:
        return parts[0]

    def cat(name):
        return np.concatenate([getattr(p, name) for p in parts], axis=0)

    return PathBatch(parts[0].times, cat("norm_h2"), cat("norm_v2"),
                     cat("int_v2"), cat("mode_traces"), cat("drift_traces"),
                     cat("jump_counts"), cat("sup_h4"), cat("blowup_time"),
                     cat("terminal"))


def run_arm(config: ExperimentConfig, arm: str, eps_index: int = 0,
            n_paths: int | None = None, threads: int = 1) -> PathBatch:
    """One full arm, chunked; byte-identical for any thread count."""
    n = config.n_paths if n_paths is None else n_paths

    def work(bounds):
        lo, hi = bounds
        streams = [derive_stream(config.seed, arm, eps_index, p)
                   for p in range(lo, hi)]
        if arm == "brownian":
            return simulate_brownian_batch(config.basis, config.solver,
                                           config.initial, streams,
                                           config.noise, config.forcing)
        return simulate_jump_batch(config.basis, config.solver,
                                   config.initial, streams,
                                   config.kernels[eps_index], config.forcing)

    chunks = _chunk_bounds(n, config.chunk_size)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return _merge_batches(parts)


def _audit_streams(config: ExperimentConfig) -> None:
    # collision audit: every (arm, eps-index, path) key must be distinct
    keys = set()
    total = 0
    plans = [("brownian", 0)] + [("jump", j) for j in range(len(config.kernels))]
    for arm, j in plans:
        for p in range(config.n_paths):
            keys.add(stream_key(config.seed, arm, j, p))
            total += 1
    if len(keys) != total:
        raise RuntimeError("stream key collision detected")


@dataclass(frozen=True)
class FunctionalRow:
    arm: str
    epsilon: float | None
    functional: str
    mean: float
    se: float
    gap_vs_bm: float | None = None
    joint_se: float | None = None
    ks_stat: float | None = None
    ks_pass: bool | None = None


@dataclass(frozen=True)
class MomentRow:
    """Fourth-moment summaries: E sup_t |u|_H^4 and E (int |u|_V^2 dt)^2."""

    arm: str
    epsilon: float | None
    sup_h4: float
    sup_h4_se: float
    int_v2_sq: float
    int_v2_sq_se: float
    uniform: bool


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[FunctionalRow]
    moments: list[MomentRow]
    samples_bm: dict
    samples_jump: list[dict]
    bm_batch: PathBatch
    jump_batches: list[PathBatch]
    blowup_bm: float
    blowup_jump: list[float]
    certified: bool
    forced: bool
    notes: tuple[str, ...] = ()

    @property
    def invalid(self) -> bool:
        frac = [self.blowup_bm] + list(self.blowup_jump)
        return any(f > BLOWUP_BUDGET for f in frac)

    def jump_rows(self, functional: str) -> list[FunctionalRow]:
        return [r for r in self.rows
                if r.arm == "jump" and r.functional == functional]

    def gaps(self, functional: str) -> list[float]:
        return [r.gap_vs_bm for r in self.jump_rows(functional)]


def _blowup_fraction(batch: PathBatch) -> float:
    return float(1.0 - batch.valid_mask().mean())


def _moment_samples(batch: PathBatch) -> tuple[np.ndarray, np.ndarray]:
    valid = batch.valid_mask()
    return batch.sup_h4[valid], batch.int_v2[valid, -1] ** 2


def _summ(x: np.ndarray) -> tuple[float, float]:
    # all-blow-up arms yield empty samples; report nan instead of raising
    if x.size == 0:
        return float("nan"), float("nan")
    mean, _, se = summarize(x)
    return mean, se


def _floor3(vals) -> float:
    arr = np.asarray(vals, dtype=np.float64)
    finite = arr[np.isfinite(arr)]
    return 3.0 * float(finite.min()) if finite.size else float("inf")


def run_experiment(config: ExperimentConfig, force: bool = False,
                   threads: int = 1) -> ExperimentResult:
    """Simulate all arms and assemble the comparison tables.

    Raises CertificationError when the kernel grid fails the startup checks
    and force is not set.  Blow-up above 1 percent on any arm marks the
    result invalid but still returns it, so callers can report the failure.
    """
    if config.n_paths < 100:
        raise ConfigError("experiments need at least 100 paths per arm")
    _audit_streams(config)

    notes: list[str] = []
    certified = True
    if config.kernels:
        growth = check_growth_lipschitz(config.basis, config.kernels,
                                        config.forcing)
        decay = check_jump_size_decay(config.kernels)
        certified = growth.passed and decay.passed
        for rep in (growth, decay):
            if not rep.passed:
                notes.append(f"check {rep.name} failed")
                notes.extend(rep.notes)
        if not certified and not force:
            raise CertificationError("; ".join(notes))

    bm_batch = run_arm(config, "brownian", 0, threads=threads)
    jump_batches = [run_arm(config, "jump", j, threads=threads)
                    for j in range(len(config.kernels))]

    samples_bm = {f: functional_samples(bm_batch, f)
                  for f in config.functionals}
    samples_jump = [{f: functional_samples(b, f) for f in config.functionals}
                    for b in jump_batches]

    rows: list[FunctionalRow] = []
    for f in config.functionals:
        mean, se = _summ(samples_bm[f])
        rows.append(FunctionalRow("bm", None, f, mean, se))
    for kern, sj in zip(config.kernels, samples_jump):
        for f in config.functionals:
            mean, se = _summ(sj[f])
            a, b = samples_bm[f], sj[f]
            if a.size and b.size:
                cmp = compare_laws(a, b)
                rows.append(FunctionalRow("jump", kern.epsilon, f, mean, se,
                                          cmp.mean_gap, cmp.joint_se,
                                          cmp.ks_stat, cmp.ks_pass))
            else:
                rows.append(FunctionalRow("jump", kern.epsilon, f, mean, se,
                                          float("nan"), float("nan"),
                                          float("nan"), False))

    raw = [("bm", None) + _moments_of(bm_batch)]
    for kern, b in zip(config.kernels, jump_batches):
        raw.append(("jump", kern.epsilon) + _moments_of(b))
    lim_sup = _floor3([r[2] for r in raw if r[0] == "jump"])
    lim_iv = _floor3([r[4] for r in raw if r[0] == "jump"])
    moments = [MomentRow(arm, eps, s4, s4se, iv, ivse,
                         bool(s4 <= lim_sup and iv <= lim_iv))
               for arm, eps, s4, s4se, iv, ivse in raw]

    return ExperimentResult(config, rows, moments, samples_bm, samples_jump,
                            bm_batch, jump_batches,
                            _blowup_fraction(bm_batch),
                            [_blowup_fraction(b) for b in jump_batches],
                            certified, force and not certified, tuple(notes))


def _moments_of(batch: PathBatch) -> tuple[float, float, float, float]:
    sup4, iv2sq = _moment_samples(batch)
    return _summ(sup4) + _summ(iv2sq)


# ---------------------------------------------------------------------------
# persistence


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_text(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n")


def summary_lines(result: ExperimentResult) -> list[str]:
    header = "arm,epsilon,functional,mean,se,gap_vs_bm,joint_se,ks_stat,ks_pass"
    out = [header]
    for r in result.rows:
        out.append(",".join(_fmt(v) for v in (
            r.arm, r.epsilon, r.functional, r.mean, r.se,
            r.gap_vs_bm, r.joint_se, r.ks_stat, r.ks_pass)))
    return out


def moment_lines(result: ExperimentResult) -> list[str]:
    header = "arm,epsilon,supH4,supH4_se,intV2sq,intV2sq_se,uniformity_flag"
    out = [header]
    for m in result.moments:
        out.append(",".join(_fmt(v) for v in (
            m.arm, m.epsilon, m.sup_h4, m.sup_h4_se,
            m.int_v2_sq, m.int_v2_sq_se, m.uniform)))
    return out


def manifest_lines(result: ExperimentResult, threads: int = 1) -> list[str]:
    # plain key: value; deliberately no timestamps so reruns are
    # byte-identical (threads is excluded from the hash for the same reason)
    cfg = result.config
    lines = [
        "format: snse-manifest-1",
        f"code_version: {__version__}",
        f"seed: {cfg.seed}",
        f"config_hash: {cfg.config_hash()}",
        f"paths: {cfg.n_paths}",
        "epsilons: " + ",".join(repr(e) for e in cfg.epsilons),
        "functionals: " + ",".join(cfg.functionals),
        "certification: " + ("UNCERTIFIED (forced)" if result.forced
                             else "passed" if result.certified else "failed"),
        f"invalid: {_fmt(result.invalid)}",
        f"blowup_bm: {result.blowup_bm!r}",
    ]
    for eps, frac in zip(cfg.epsilons, result.blowup_jump):
        lines.append(f"blowup_eps={eps:g}: {frac!r}")
    for note in result.notes:
        lines.append(f"note: {note}")
    return lines


def path_dump_lines(batch: PathBatch, track_modes) -> list[str]:
    cols = ["path_id", "t", "normH2", "normV2"]
    cols += [f"u_e{k}" for k in track_modes]
    cols.append("n_jumps_so_far")
    out = [",".join(cols)]
    for p in range(batch.n_paths):
        for r in range(batch.n_recorded):
            row = [str(p), repr(float(batch.times[r])),
                   repr(float(batch.norm_h2[p, r])),
                   repr(float(batch.norm_v2[p, r]))]
            row += [repr(float(batch.mode_traces[p, r, i]))
                    for i in range(len(track_modes))]
            row.append(str(int(batch.jump_counts[p, r])))
            out.append(",".join(row))
    return out


def persist(result: ExperimentResult, out_dir, dump_paths: bool = False,
            overwrite: bool = False, threads: int = 1) -> Path:
    """Write summary.csv, moments.csv, manifest.txt (and optional dumps)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "summary.csv"
    if target.exists() and not overwrite:
        raise FileExistsError(f"{target} exists; pass overwrite to replace")
    _write_text(target, summary_lines(result))
    _write_text(out / "moments.csv", moment_lines(result))
    _write_text(out / "manifest.txt", manifest_lines(result, threads))
    if dump_paths:
        track = result.config.solver.track_modes
        _write_text(out / "paths_bm.csv",
                    path_dump_lines(result.bm_batch, track))
        for eps, batch in zip(result.config.epsilons, result.jump_batches):
            _write_text(out / f"paths_eps{eps:g}.csv",
                        path_dump_lines(batch, track))
    return out
