"""Seeded Monte-Carlo experiments driven by a JSON configuration.

Each run derives its own seed from ``(master_seed, run_index)``; runs share
no mutable state, so results depend only on the configuration bytes and not
on execution order. Output layout under the output directory::

    curve.csv          n,PI_dB averaged over successful runs
    runs.csv           one line per run (seed, status, final PI, matched source)
    runs/run_0000.csv  n,PI_dB learning curve of each run
    summary.json       aggregate numbers
    timing.csv         wall time per run (the only non-deterministic file)
"""

from __future__ import annotations

import copy
import json
import logging
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .adaptive_direct import init_direct, run_direct
from .dual_lp import init_dual, run_dual
from .exceptions import ConfigError, GCCAError
from .metrics import global_vector, performance_index
from .pencil import extract_sequential
from .signals import (
    DEFAULT_SOURCE_FILTERS,
    MixtureModel,
    SourceSpec,
    check_positive_lag_correlation,
    generate_sources,
    mix,
    random_mixing_matrix,
    read_matrix_csv,
)
from .stats import PredictorCoeffs, normalized_autocorrelations

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "ExperimentResult",
    "load_config",
    "load_preset",
    "run_seed",
    "run_single",
    "run_experiment",
    "write_outputs",
    "with_overrides",
]

log = logging.getLogger(__name__)

ADAPTIVE_METHODS = ("direct", "dual-lp")
BATCH_METHODS = ("cca-batch", "gcca-batch")


def _schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("presets/config.schema.json").read_text())


def _fmt(v) -> str:
    return format(float(v), ".17g")


@dataclass
class ExperimentConfig:
    """Validated experiment configuration.

    ``raw`` keeps the user's dictionary; ``base_dir`` anchors relative file
    references (the directory of the config file).
    """

    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        try:
            jsonschema.validate(self.raw, _schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {where}: {exc.message}") from None
        self.base_dir = Path(self.base_dir)
        mixing = self.raw["mixing"]
        if "file" in mixing and not self._resolve(mixing["file"]).is_file():
            raise ConfigError(f"mixing matrix file not found: {mixing['file']}")
        if self.method in ADAPTIVE_METHODS and "predictor" not in self.raw:
            raise ConfigError(f"method {self.method!r} requires a 'predictor' section")
        if "mixing" in self.resample and "random" not in mixing:
            raise ConfigError("resampling the mixing matrix requires a 'random' mixing section")

    def _resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    @property
    def method(self) -> str:
        return self.raw["method"]

    @property
    def sample_count(self) -> int:
        return self.raw["sample_count"]

    @property
    def run_count(self) -> int:
        return self.raw["run_count"]

    @property
    def master_seed(self) -> int:
        return self.raw["master_seed"]

    @property
    def noise_variance(self) -> float:
        return float(self.raw.get("noise_variance", 0.0))

    @property
    def resample(self) -> tuple:
        return tuple(self.raw.get("resample", ()))

    @property
    def checkpoint_interval(self) -> int:
        return int(self.raw.get("checkpoint_interval", 100))

    @property
    def output_dir(self) -> Path | None:
        d = self.raw.get("output", {}).get("dir")
        return Path(d) if d else None

    def source_spec(self, seed=None) -> SourceSpec:
        src = self.raw.get("sources", {})
        filters = src.get("filters")
        return SourceSpec(
            filters=tuple(filters) if filters else DEFAULT_SOURCE_FILTERS,
            seed=src.get("seed", 0) if seed is None else seed,
            length=self.sample_count,
            normalize_power=src.get("normalize_power", True),
        )

    @property
    def require_positive_lag1(self) -> bool:
        return self.raw.get("sources", {}).get("require_positive_lag1", True)

    def mixing_matrix(self, seed=None) -> np.ndarray:
        mixing = self.raw["mixing"]
        if "matrix" in mixing:
            A = np.array(mixing["matrix"], dtype=float)
        elif "file" in mixing:
            A = read_matrix_csv(self._resolve(mixing["file"]))
        else:
            rnd = mixing["random"]
            L = self.source_spec().source_count
            return random_mixing_matrix(
                rnd.get("n_mixtures", L), L,
                seed=rnd["seed"] if seed is None else seed,
                max_condition=rnd.get("max_condition", 10.0),
                row_normalized=mixing.get("row_normalize", True),
            )
        if mixing.get("row_normalize", False):
            A = A / np.linalg.norm(A, axis=1, keepdims=True)
        return A

    def predictor(self) -> PredictorCoeffs:
        p = self.raw["predictor"]
        return PredictorCoeffs(b=tuple(p["b"]), d=tuple(p.get("d", [1.0])))

    def lags(self) -> dict:
        lags = self.raw.get("lags", {})
        return {
            "delta0": lags.get("delta0", 1),
            "delta1": lags.get("delta1", 2),
            "numerator_weights": lags.get("numerator_weights"),
            "denominator_weights": lags.get("denominator_weights"),
        }


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return ExperimentConfig(raw, base_dir=path.parent)


def load_preset(name: str) -> ExperimentConfig:
    """Load a bundled preset, e.g. ``"paper_iv"``."""
    res = resources.files(__package__).joinpath(f"presets/{name}.json")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}")
    return ExperimentConfig(json.loads(res.read_text()))


def run_seed(master_seed: int, run_index: int) -> int:
    """Per-run seed, a hash of ``(master_seed, run_index)``."""
    return int(np.random.SeedSequence([master_seed, run_index]).generate_state(1, np.uint64)[0])


@dataclass
class RunRecord:
    run_index: int
    seed: int
    steps: np.ndarray
    pi: np.ndarray
    final_pi: float
    matched_source: int
    match_corr: float
    wall_time: float
    target_source: int | None = None
    status: str = "ok"
    error: str = ""
    w: np.ndarray | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    curve_n: np.ndarray
    curve_pi: np.ndarray
    target_source: int | None

    @property
    def ok_records(self) -> list:
        return [r for r in self.records if r.status == "ok"]

    @property
    def match_fraction(self) -> float:
        """Share of successful runs whose dominant source is that run's expected target."""
        ok = [r for r in self.ok_records if r.target_source is not None]
        if not ok:
            return float("nan")
        return sum(r.matched_source == r.target_source for r in ok) / len(ok)


class _Shared:
    """Data common to all runs that do not resample it."""

    def __init__(self, cfg: ExperimentConfig):
        self.sources = None if "sources" in cfg.resample else generate_sources(cfg.source_spec())
        self.A = None if "mixing" in cfg.resample else cfg.mixing_matrix()
        self.target = None if self.sources is None else _safe_target(cfg, self.sources)


def _target_source(cfg: ExperimentConfig, sources) -> int | None:
    """Source the method is expected to extract, from the sources' own statistics."""
    s = sources.data
    n = s.shape[1]

    def acf(k):
        return np.sum(s[:, k:] * s[:, : n - k], axis=1) / (n - k)

    if cfg.method == "dual-lp":
        return int(np.argmin(normalized_autocorrelations(sources, cfg.predictor())))
    if cfg.method == "direct":
        b = cfg.predictor().b
        num = sum(bk * acf(k + 2) for k, bk in enumerate(b))
        return int(np.argmax(num / acf(1)))
    lags = cfg.lags()
    if lags["numerator_weights"] or lags["denominator_weights"]:
        return None
    d0 = 0 if cfg.method == "cca-batch" else lags["delta0"]
    return int(np.argmax(acf(lags["delta1"]) / acf(d0)))


def _safe_target(cfg: ExperimentConfig, sources) -> int | None:
    try:
        return _target_source(cfg, sources)
    except GCCAError as exc:
        log.warning("no expected target source: %s", exc)
        return None


def run_single(cfg: ExperimentConfig, run_index: int, shared: _Shared | None = None) -> RunRecord:
    """Execute one run; module errors are recorded rather than raised."""
    shared = shared or _Shared(cfg)
    seed = run_seed(cfg.master_seed, run_index)
    noise_seed, init_seed, source_seed, mixing_seed = np.random.default_rng(seed).integers(2**63, size=4)
    t0 = time.perf_counter()
    try:
        sources = shared.sources if shared.sources is not None else generate_sources(cfg.source_spec(int(source_seed)))
        if cfg.require_positive_lag1:
            check_positive_lag_correlation(sources, 1)
        A = shared.A if shared.A is not None else cfg.mixing_matrix(int(mixing_seed))
        x = mix(MixtureModel(A, cfg.noise_variance), sources, int(noise_seed))
        target = shared.target if shared.sources is not None else _safe_target(cfg, sources)
        steps, pi, w, y = _execute(cfg, x, A, int(init_seed))
        dominant = global_vector(A, w).dominant
        tail = slice(-max(len(y) // 4, 2), None)
        corr = float(np.corrcoef(y[tail], sources.data[dominant, tail])[0, 1])
        rec = RunRecord(run_index, seed, steps, pi, float(pi[-1]), dominant, corr, 0.0, target, w=w)
    except (GCCAError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("run %d failed: %s", run_index, exc)
        rec = RunRecord(run_index, seed, np.zeros(0, int), np.zeros(0), float("nan"), -1, float("nan"), 0.0,
                        status="error", error=str(exc))
    rec.wall_time = time.perf_counter() - t0
    return rec


def _execute(cfg: ExperimentConfig, x, A, init_seed: int):
    N = cfg.sample_count
    M = x.channel_count
    if cfg.method in BATCH_METHODS:
        lags = cfg.lags()
        res = extract_sequential(
            x, n_sources=cfg.raw.get("n_sources", 1), delta0=lags["delta0"], delta1=lags["delta1"],
            mode="cca" if cfg.method == "cca-batch" else "gcca",
            numerator_weights=lags["numerator_weights"], denominator_weights=lags["denominator_weights"],
            subspace_dim=A.shape[1],
        )
        w = res.demixing[0]
        return np.array([N]), np.array([performance_index(global_vector(A, w))]), w, res.outputs.data[0]

    coeffs = cfg.predictor()
    warmup = cfg.raw.get("warmup", 100)
    if cfg.method == "direct":
        state = init_direct(M, coeffs.b, cfg.raw.get("mu", 0.0015), cfg.raw.get("beta", 0.975),
                            seed=init_seed, warmup=warmup)
        w0 = state.w.copy()
        run = run_direct(state, x)
    else:
        betas = cfg.raw.get("betas", {})
        state = init_dual(M, coeffs, mu=cfg.raw.get("mu", 0.0015),
                          betas=(betas.get("e", 0.975), betas.get("y", 0.975), betas.get("f", 0.975)),
                          seed=init_seed, warmup=warmup, normalize=cfg.raw.get("normalize_w", False))
        w0 = state.w.copy()
        run = run_dual(state, x)
    k = cfg.checkpoint_interval
    steps = np.r_[0, np.arange(k, N + 1, k)]
    if steps[-1] != N:
        steps = np.r_[steps, N]
    W = np.vstack([w0, run.w_history[steps[1:] - 1]])
    G = W @ A
    pi = np.array([performance_index(g) for g in G])
    return steps, pi, state.w.copy(), run.y


def run_experiment(config: ExperimentConfig, out_dir=None, run_indices=None) -> ExperimentResult:
    """Run every configured run and aggregate the averaged learning curve.

    ``run_indices`` (default ``range(run_count)``) may be permuted or split;
    records are always ordered by run index before aggregation. When
    ``out_dir`` (or the config's ``output.dir``) is given, CSV outputs are
    written there.
    """
    shared = _Shared(config)
    indices = range(config.run_count) if run_indices is None else run_indices
    records = sorted((run_single(config, i, shared) for i in indices), key=lambda r: r.run_index)
    ok = [r for r in records if r.status == "ok"]
    if ok:
        curve_n = ok[0].steps
        curve_pi = np.mean(np.vstack([r.pi for r in ok]), axis=0)
    else:
        curve_n, curve_pi = np.zeros(0, int), np.zeros(0)
    targets = {r.target_source for r in ok}
    target = targets.pop() if len(targets) == 1 else None
    result = ExperimentResult(config, records, curve_n, curve_pi, target)
    out = out_dir if out_dir is not None else config.output_dir
    if out is not None:
        write_outputs(result, out)
    return result


def write_outputs(result: ExperimentResult, out_dir) -> Path:
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    lines = ["n,PI_dB"] + [f"{n},{_fmt(p)}" for n, p in zip(result.curve_n, result.curve_pi)]
    (out / "curve.csv").write_text("\n".join(lines) + "\n")
    rows = ["run,seed,status,final_PI_dB,target_source,matched_source,match_corr,error"]
    timing = ["run,wall_time_s"]
    for r in result.records:
        err = r.error.replace(",", ";").replace("\n", " ")
        tgt = "" if r.target_source is None else r.target_source
        rows.append(
            f"{r.run_index},{r.seed},{r.status},{_fmt(r.final_pi)},{tgt},{r.matched_source},{_fmt(r.match_corr)},{err}"
        )
        timing.append(f"{r.run_index},{r.wall_time:.6f}")
        per = ["n,PI_dB"] + [f"{n},{_fmt(p)}" for n, p in zip(r.steps, r.pi)]
        (out / "runs" / f"run_{r.run_index:04d}.csv").write_text("\n".join(per) + "\n")
    (out / "runs.csv").write_text("\n".join(rows) + "\n")
    (out / "timing.csv").write_text("\n".join(timing) + "\n")
    ok = result.ok_records
    summary = {
        "method": result.config.method,
        "run_count": len(result.records),
        "ok_count": len(ok),
        "final_mean_PI_dB": float(result.curve_pi[-1]) if result.curve_pi.size else None,
        "target_source": result.target_source,
        "match_fraction": None if np.isnan(result.match_fraction) else result.match_fraction,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out


def with_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Copy of ``config`` with top-level keys replaced (validated again)."""
    raw = copy.deepcopy(config.raw)
    raw.update(overrides)
    return ExperimentConfig(raw, base_dir=config.base_dir)
