"""Command-line entry points: ``outcomes {phantom,optimize,evaluate,compare,sweep}``.

Datasets live next to a manifest JSON that records the grid, the per-contrast
k-space files with their checksums, the phantom seed and the tool version. Every
other command takes ``--manifest`` and writes its outputs under ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .cost import CostConfig, CostContext
from .grappa import build_table
from .io import array_checksum, config_hash, read_array, read_header, read_mask, write_array, write_mask
from .kspace import AcsSpec, GridSpec, SamplingMask
from .optimizer import OptimizerConfig, config_to_dict, optimize
from .phantom import CoilModel, PhantomSpec, default_contrast_weights, make_dataset
from .recon import ReconConfig, evaluate_trajectory
from .trajectories import TrajectoryBudget, psf_optimized_mask, uniform_mask, variable_density_mask

logger = logging.getLogger("outcomes")

STRATEGIES = ("uniform", "variable-density", "psf", "outcomes-uniform", "outcomes-vd")
COMPARE_HEADER = [
    "strategy",
    "ref_contrast",
    "target_contrast",
    "R",
    "seed",
    "nrmse",
    "improvement_vs_uniform",
    "runtime_seconds",
]
REPORT_HEADER = ["mask_name", "R", "nrmse", "runtime_seconds"]
SWEEP_CONFIGS = ((10, 100), (20, 50), (33, 33), (50, 20))
SWEEP_HEADER = [
    "iterations",
    "candidates",
    "n_seeds",
    "max_evaluations",
    "mean_evaluations",
    "mean_wall_time_seconds",
    "mean_final_cost",
    "mean_nrmse",
]


class CliError(Exception):
    """A user-facing failure reported as one line on stderr."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# ---- manifest --------------------------------------------------------------


class Manifest:
    """Loaded experiment manifest; paths are resolved against the manifest directory."""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.exists():
            raise CliError(f"manifest not found: {self.path}")
        try:
            self.data = json.loads(self.path.read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"manifest {self.path} is not valid JSON: {exc}") from None
        self.grid = GridSpec(**self.data["grid"])
        self.root = self.path.parent
        for entry in self.data["contrasts"]:
            header_path = self.root / entry["file"]
            if not header_path.exists():
                raise CliError(f"dataset file missing: {header_path}")
            if tuple(read_header(header_path)["shape"]) != self.grid.shape:
                raise CliError(f"dataset {header_path} does not match the manifest grid {self.grid.shape}")

    @property
    def n_contrasts(self) -> int:
        return len(self.data["contrasts"])

    def kspace(self, contrast: int) -> np.ndarray:
        if not 0 <= contrast < self.n_contrasts:
            raise CliError(f"contrast {contrast} out of range (manifest has {self.n_contrasts})")
        return read_array(self.root / self.data["contrasts"][contrast]["file"]).astype(np.complex128)


def _write_json(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _budget(grid: GridSpec, reduction: float, acs_width: int) -> TrajectoryBudget:
    try:
        return TrajectoryBudget(grid.n_lines, reduction, AcsSpec(acs_width))
    except ValueError as exc:
        raise CliError(f"invalid R/ACS combination: {exc}") from None


# ---- shared pipeline steps ---------------------------------------------------


def run_optimization(ksp, b: TrajectoryBudget, cfg: OptimizerConfig, p: float = 8.0, d_max: int = 4, kx_window: int = 3):
    """Build the extrapolation table once and search; returns (mask, trace, context, table_seconds)."""
    start = time.perf_counter()
    table = build_table(ksp, b.acs, d_max, kx_window)
    table_seconds = time.perf_counter() - start
    ctx = CostContext(ksp, table, CostConfig(p=p))
    mask, trace = optimize(ctx, b, cfg)
    return mask, trace, ctx, table_seconds


def baseline_mask(strategy: str, b: TrajectoryBudget, seed: int) -> SamplingMask:
    if strategy == "uniform":
        return uniform_mask(b)
    if strategy == "variable-density":
        return variable_density_mask(b, seed=seed)
    if strategy == "psf":
        return psf_optimized_mask(b, seed=seed)
    raise ValueError(f"unknown baseline strategy {strategy!r}")


# ---- commands ----------------------------------------------------------------


def cmd_phantom(args) -> int:
    grid = GridSpec(args.size, args.size, args.coils)
    spec = PhantomSpec(
        grid=grid,
        contrast_weights=default_contrast_weights(6, args.contrasts, args.seed),
        noise_std=args.noise_std,
        seed=args.seed,
    )
    dataset = make_dataset(spec, CoilModel(n_coils=args.coils))
    out = Path(args.out)
    entries = []
    for c, ksp in enumerate(dataset.kspaces):
        header, _ = write_array(out / f"contrast{c}", ksp)
        entries.append(
            {"index": c, "file": header.name, "weights": list(spec.contrast_weights[c]), "checksum": array_checksum(ksp.astype(np.complex64))}
        )
    params = {"size": args.size, "coils": args.coils, "contrasts": args.contrasts, "noise_std": args.noise_std, "seed": args.seed}
    _write_json(
        out / "manifest.json",
        {
            "tool_version": __version__,
            "grid": asdict(grid),
            "seed": args.seed,
            "noise_std": args.noise_std,
            "contrasts": entries,
            "config_hash": config_hash(params),
        },
    )
    print(out / "manifest.json")
    return 0


def _optimizer_cfg(args, init=None, seed=None) -> OptimizerConfig:
    return OptimizerConfig(
        n_iterations=args.iterations,
        n_candidates=args.candidates,
        seed=args.seed if seed is None else seed,
        init=init or args.init,
        n_jobs=args.jobs,
    )


def cmd_optimize(args) -> int:
    manifest = Manifest(args.manifest)
    b = _budget(manifest.grid, args.R, args.acs)
    cfg = _optimizer_cfg(args)
    ksp = manifest.kspace(args.ref_contrast)
    mask, trace, _, table_seconds = run_optimization(ksp, b, cfg, p=args.p, d_max=args.dmax)
    out = Path(args.out)
    write_mask(out / "mask.json", mask)
    trace.to_csv(out / "trace.csv")
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    _write_json(
        out / "run.json",
        {
            "tool_version": __version__,
            "manifest": str(Path(args.manifest).resolve()),
            "manifest_hash": config_hash(manifest.data),
            "flags": flags,
            "optimizer": config_to_dict(cfg),
            "optimizer_hash": config_hash(config_to_dict(cfg)),
            "seed": args.seed,
            "budget": b.budget,
            "wall_time_seconds": trace.wall_time_seconds,
            "table_seconds": table_seconds,
            "total_evaluations": trace.total_evaluations,
            "best_cost": trace.best_costs[-1],
        },
    )
    print(f"best cost {trace.best_costs[-1]:.6g} after {trace.total_evaluations} evaluations ({trace.wall_time_seconds:.1f}s)")
    return 0


def cmd_evaluate(args) -> int:
    manifest = Manifest(args.manifest)
    mask = read_mask(args.mask)
    cfg = ReconConfig(lam=args.lam, n_fista_iterations=args.fista_iterations)
    ksp = manifest.kspace(args.contrast)
    out = Path(args.out)
    report = evaluate_trajectory(ksp, mask, AcsSpec(args.acs), cfg, out_dir=out, name=args.name)
    report_path = out / "report.csv"
    new = not report_path.exists()
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with report_path.open("a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(REPORT_HEADER)
        writer.writerow([report.mask_name, report.reduction, repr(report.nrmse), repr(report.runtime_seconds)])
    print(f"{report.mask_name}: NRMSE {report.nrmse:.6g}")
    return 0


def cmd_compare(args) -> int:
    manifest = Manifest(args.manifest)
    b = _budget(manifest.grid, args.R, args.acs)
    targets = args.target_contrasts
    if targets is None:
        targets = [c for c in range(manifest.n_contrasts) if c != args.ref_contrast]
    recon_cfg = ReconConfig()
    out = Path(args.out)
    reference = manifest.kspace(args.ref_contrast)
    data = {c: manifest.kspace(c) for c in targets}

    rows = []
    for seed in args.seeds:
        masks = {}
        for strategy in STRATEGIES:
            if strategy.startswith("outcomes"):
                init = "uniform" if strategy == "outcomes-uniform" else "variable-density"
                masks[strategy], _, _, _ = run_optimization(reference, b, _optimizer_cfg(args, init=init, seed=seed), d_max=args.dmax)
            else:
                masks[strategy] = baseline_mask(strategy, b, seed)
            write_mask(out / "masks" / f"{strategy}_seed{seed}.json", masks[strategy])
        for c in targets:
            reports = {}
            for strategy, mask in masks.items():
                name = f"{strategy}_c{c}_seed{seed}"
                reports[strategy] = evaluate_trajectory(data[c], mask, b.acs, recon_cfg, out_dir=out / "images", name=name)
            hashes = {r.config_hash for r in reports.values()}
            if len(hashes) != 1:
                raise RuntimeError("reconstruction settings differ between compared masks")
            base = reports["uniform"].nrmse
            for strategy, r in reports.items():
                ref = args.ref_contrast if strategy.startswith("outcomes") else ""
                rows.append([strategy, ref, c, args.R, seed, repr(r.nrmse), repr(1 - r.nrmse / base), repr(r.runtime_seconds)])
    path = _write_csv(out / "compare.csv", COMPARE_HEADER, rows)
    print(path)
    return 0


def _parse_configs(text: str):
    configs = []
    for item in text.split(","):
        its, _, cands = item.lower().partition("x")
        configs.append((int(its), int(cands)))
    return tuple(configs)


def cmd_sweep(args) -> int:
    manifest = Manifest(args.manifest)
    b = _budget(manifest.grid, args.R, args.acs)
    ksp = manifest.kspace(args.ref_contrast)
    table = build_table(ksp, b.acs, args.dmax, 3)
    ctx = CostContext(ksp, table, CostConfig(p=args.p))
    recon_cfg = ReconConfig()
    rows = []
    for its, cands in args.configs:
        times, costs, scores, evals = [], [], [], []
        for seed in args.seeds:
            cfg = OptimizerConfig(n_iterations=its, n_candidates=cands, seed=seed, init=args.init, n_jobs=args.jobs)
            mask, trace = optimize(ctx, b, cfg)
            times.append(trace.wall_time_seconds)
            costs.append(trace.best_costs[-1])
            evals.append(trace.total_evaluations)
            scores.append(evaluate_trajectory(ksp, mask, b.acs, recon_cfg).nrmse)
        rows.append(
            [its, cands, len(args.seeds), (its + 1) * cands, repr(float(np.mean(evals))), repr(float(np.mean(times))), repr(float(np.mean(costs))), repr(float(np.mean(scores)))]
        )
    path = _write_csv(Path(args.out) / "sweep.csv", SWEEP_HEADER, rows)
    print(path)
    return 0


# ---- argument parsing --------------------------------------------------------


def _add_search_flags(p, manifest=True):
    if manifest:
        p.add_argument("--manifest", required=True, help="manifest JSON written by `outcomes phantom`")
    p.add_argument("--ref-contrast", type=int, default=0)
    p.add_argument("--R", type=float, default=4.0, help="reduction factor")
    p.add_argument("--acs", type=int, default=24, help="ACS block width in lines")
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--candidates", type=int, default=50)
    p.add_argument("--p", type=float, default=8.0, help="exponent of the surrogate error norm")
    p.add_argument("--dmax", type=int, default=4, help="largest GRAPPA extrapolation shift")
    p.add_argument("--init", choices=("uniform", "vd"), default="uniform")
    p.add_argument("--jobs", type=int, default=1, help="threads for candidate evaluation")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="outcomes", description="Data-driven 1D Cartesian undersampling mask design.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="write a synthetic multi-contrast dataset")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--coils", type=int, default=8)
    p.add_argument("--contrasts", type=int, default=4)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("optimize", help="optimize a mask on one reference contrast")
    _add_search_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="reconstruct with a mask and report its NRMSE")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--contrast", type=int, default=0)
    p.add_argument("--acs", type=int, default=24)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--fista-iterations", type=int, default=60)
    p.add_argument("--name", default="mask")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="score all five strategies across contrasts and seeds")
    _add_search_flags(p)
    p.add_argument("--target-contrasts", type=int, nargs="+", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="equal-budget iteration/candidate trade-off")
    _add_search_flags(p)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument(
        "--configs",
        type=_parse_configs,
        default=SWEEP_CONFIGS,
        help="comma-separated ITERATIONSxCANDIDATES pairs (default 10x100,20x50,33x33,50x20)",
    )
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
        if getattr(args, "init", None) == "vd":
            args.init = "variable-density"
        return args.func(args)
    except (CliError, ValueError, OSError, KeyError, RuntimeError) as exc:
        message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"outcomes: error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
