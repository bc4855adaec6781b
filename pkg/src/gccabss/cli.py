"""Command line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
precondition violated.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .adaptive_direct import init_direct, run_direct
from .dual_lp import init_dual, run_dual
from .exceptions import ConfigError, PreconditionError
from .harness import load_config, load_preset, run_experiment
from .metrics import global_vector, match_source, performance_index
from .pencil import extract_sequential, solve_pencil
from .signals import (
    DEFAULT_SOURCE_FILTERS,
    REFERENCE_MIXING_MATRIX,
    MixtureModel,
    SignalMatrix,
    SourceFilter,
    SourceSpec,
    generate_sources,
    mix,
    read_matrix_csv,
    write_matrix_csv,
)
from .stats import REFERENCE_PREDICTOR_B, PredictorCoeffs

log = logging.getLogger("gccabss")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(",", " ").split()]


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _load_signal(path) -> SignalMatrix:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"file not found: {p}")
    return SignalMatrix(read_matrix_csv(p))


def _load_matrix(path) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"file not found: {p}")
    return read_matrix_csv(p)


def cmd_generate(args) -> None:
    if args.filters:
        filters = tuple(SourceFilter.from_dict(f) for f in json.loads(Path(args.filters).read_text()))
    else:
        filters = DEFAULT_SOURCE_FILTERS
    spec = SourceSpec(filters=filters, seed=args.seed, length=args.length, normalize_power=not args.raw_power)
    generate_sources(spec).to_csv(args.out)


def cmd_mix(args) -> None:
    sources = _load_signal(args.sources)
    A = REFERENCE_MIXING_MATRIX if args.matrix is None else _load_matrix(args.matrix)
    model = MixtureModel(A, noise_variance=args.noise_variance, row_normalized=args.row_normalize)
    mix(model, sources, args.seed).to_csv(args.out)
    if args.matrix_out:
        write_matrix_csv(args.matrix_out, model.A)


def cmd_solve_pencil(args) -> None:
    num = _load_matrix(args.numerator)
    den = _load_matrix(args.denominator)
    if args.symmetrize:
        num, den = 0.5 * (num + num.T), 0.5 * (den + den.T)
    sol = solve_pencil(num, den)
    # first row eigenvalues, then one row per eigenvector
    rows = [sol.eigenvalues] + [sol.eigenvectors[:, j] for j in range(sol.eigenvectors.shape[1])]
    text = "\n".join(",".join(_fmt(v) for v in r) for r in rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_extract_batch(args) -> None:
    x = _load_signal(args.mixtures)
    res = extract_sequential(
        x, n_sources=args.n_sources, delta0=args.delta0, delta1=args.delta1, mode=args.mode,
        deflation_lag=args.deflation_lag, subspace_dim=args.subspace_dim,
    )
    res.outputs.to_csv(args.out)
    if args.weights_out:
        write_matrix_csv(args.weights_out, res.demixing)
    if args.mixing:
        A = _load_matrix(args.mixing)
        for k, w in enumerate(res.demixing):
            print(f"source {k}: PI = {performance_index(global_vector(A, w)):.2f} dB")


def cmd_extract_adaptive(args) -> None:
    x = _load_signal(args.mixtures)
    M = x.channel_count
    A = _load_matrix(args.mixing) if args.mixing else None
    if args.method == "direct":
        b = _floats(args.b) if args.b else [1.0]
        state = init_direct(M, b, args.mu, args.beta, seed=args.seed, warmup=args.warmup)
        run = run_direct(state, x)
        cols = {"n": np.arange(x.sample_count), "y": run.y, "sigma_y": run.sigma_y}
    else:
        b = _floats(args.b) if args.b else list(REFERENCE_PREDICTOR_B)
        d = _floats(args.d) if args.d else [1.0]
        state = init_dual(M, PredictorCoeffs(tuple(b), tuple(d)), mu=args.mu, betas=args.beta,
                          seed=args.seed, warmup=args.warmup, normalize=args.normalize)
        run = run_dual(state, x)
        cols = {
            "n": np.arange(x.sample_count), "y": run.y, "e": run.e, "f": run.f,
            "sigma_e": run.sigmas[:, 0], "sigma_y": run.sigmas[:, 1], "sigma_f": run.sigmas[:, 2],
        }
    if A is not None:
        G = run.w_history @ A
        cols["PI"] = np.array([performance_index(g) for g in G])
    SignalMatrix(run.y).to_csv(args.out)
    if args.weights_out:
        write_matrix_csv(args.weights_out, state.w)
    if args.telemetry:
        names = list(cols)
        lines = [",".join(names)]
        for i in range(x.sample_count):
            lines.append(",".join(str(int(cols[k][i])) if k == "n" else _fmt(cols[k][i]) for k in names))
        Path(args.telemetry).write_text("\n".join(lines) + "\n")
    if state.skipped:
        log.warning("%d updates skipped because the normalizer was near zero", state.skipped)
    if A is not None:
        print(f"final PI = {cols['PI'][-1]:.2f} dB")


def cmd_run_experiment(args) -> None:
    cfg = load_preset(args.preset) if args.preset else load_config(args.config)
    if args.runs is not None:
        from .harness import with_overrides

        cfg = with_overrides(cfg, run_count=args.runs)
    out = args.out_dir if args.out_dir else (cfg.output_dir or Path("experiment_out"))
    result = run_experiment(cfg, out_dir=out)
    n_ok = len(result.ok_records)
    print(f"{n_ok}/{len(result.records)} runs ok; outputs in {out}")
    if result.curve_pi.size:
        print(f"final averaged PI = {result.curve_pi[-1]:.2f} dB")
    if n_ok and not np.isnan(result.match_fraction):
        print(f"expected source extracted in {100 * result.match_fraction:.1f}% of runs")


def cmd_evaluate(args) -> None:
    A = _load_matrix(args.mixing)
    W = _load_matrix(args.weights)
    for k, w in enumerate(W):
        g = global_vector(A, w)
        print(f"vector {k}: PI = {performance_index(g):.2f} dB, dominant source {g.dominant}")
    if args.extracted and args.sources:
        Y = _load_signal(args.extracted).data
        S = _load_signal(args.sources)
        for k, y in enumerate(Y):
            idx, corr = match_source(y, S)
            print(f"output {k}: best match source {idx}, corr {corr:+.4f}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gccabss", description="Generalized CCA blind source extraction toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate filtered Gaussian sources")
    g.add_argument("--length", type=int, default=10_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--filters", help="JSON file with a list of {kind, coefficients}")
    g.add_argument("--raw-power", action="store_true", help="skip unit-power normalization")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    m = sub.add_parser("mix", help="mix sources and add white Gaussian noise")
    m.add_argument("--sources", required=True)
    m.add_argument("--matrix", help="mixing matrix CSV (default: the 3x3 reference matrix)")
    m.add_argument("--row-normalize", action="store_true")
    m.add_argument("--noise-variance", type=float, default=0.0)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.add_argument("--matrix-out", help="write the (normalized) mixing matrix here")
    m.set_defaults(func=cmd_mix)

    s = sub.add_parser("solve-pencil", help="generalized eigenpairs of two symmetric matrices")
    s.add_argument("--numerator", required=True)
    s.add_argument("--denominator", required=True)
    s.add_argument("--symmetrize", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve_pencil)

    b = sub.add_parser("extract-batch", help="batch CCA/GCCA extraction with deflation")
    b.add_argument("--mixtures", required=True)
    b.add_argument("--mode", choices=["gcca", "cca"], default="gcca")
    b.add_argument("--delta0", type=int, default=1)
    b.add_argument("--delta1", type=int, default=2)
    b.add_argument("--n-sources", type=int, default=1)
    b.add_argument("--deflation-lag", type=int)
    b.add_argument("--subspace-dim", type=int, help="number of sources when mixtures outnumber them")
    b.add_argument("--mixing", help="ground-truth mixing matrix CSV, to report PI")
    b.add_argument("--weights-out")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_extract_batch)

    a = sub.add_parser("extract-adaptive", help="online extraction")
    a.add_argument("--method", choices=["direct", "dual-lp"], required=True)
    a.add_argument("--mixtures", required=True)
    a.add_argument("--b", help="predictor / lag weights, comma separated")
    a.add_argument("--d", help="second predictor (dual-lp), default 1")
    a.add_argument("--mu", type=float, default=0.0015)
    a.add_argument("--beta", type=float, default=0.975)
    a.add_argument("--warmup", type=int, default=100)
    a.add_argument("--normalize", action="store_true", help="renormalize w each step (dual-lp)")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--mixing", help="ground-truth mixing matrix CSV, adds a PI column")
    a.add_argument("--telemetry", help="per-step CSV")
    a.add_argument("--weights-out")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_extract_adaptive)

    r = sub.add_parser("run-experiment", help="seeded Monte-Carlo experiment from a JSON config")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--preset", help="bundled preset name, e.g. paper_iv")
    r.add_argument("--out-dir")
    r.add_argument("--runs", type=int, help="override run_count")
    r.set_defaults(func=cmd_run_experiment)

    e = sub.add_parser("evaluate", help="performance index of demixing vectors")
    e.add_argument("--mixing", required=True)
    e.add_argument("--weights", required=True, help="CSV, one demixing vector per row")
    e.add_argument("--extracted")
    e.add_argument("--sources")
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except PreconditionError as exc:
        print(f"error: numerical precondition violated: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
