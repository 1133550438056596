"""``hsforge`` command-line interface.

Thin orchestration over the library modules: every subcommand reads the
optional config file, applies flag overrides, calls one pipeline
operation, and reports what it wrote.  All commands are deterministic for
fixed (config, seed, inputs); only ``bench`` prints timing-dependent text.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from .bundle import TileBundle, validate_bundle, write_tile_bundle
from .config import PipelineConfig
from .errors import ConfigError, ConsistencyError, HsforgeError
from .inversion import invert_image, simulate_from_traits
from .kernels import accumulator_to_cost, topk_search, topk_search_reference
from .lut import build_lut, load_lut, save_lut
from .parameters import PARAMETER_NAMES
from .raster import RasterCube, read_raster, write_raster
from .rtm import (
    generate_reference_coefficients,
    generate_reference_soils,
    load_coefficients,
    save_coefficients,
    save_soils,
)
from .synth import (
    BANDS_SUFFIX,
    SCENE_CLASS_SUFFIX,
    SyntheticSceneSpec,
    TRUTH_SUFFIX,
    generate_scene_inputs,
)

__all__ = ["main"]


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (HsforgeError, FileExistsError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsforge",
        description="Synthetic hyperspectral scene pipeline: simulate, invert, assemble.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--workers", type=int, help="override the configured worker count")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-coeffs", parents=[common], help="write the reference coefficient table")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(handler=_cmd_gen_coeffs)

    p = sub.add_parser("gen-soil", parents=[common], help="write a reference soil library")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--regions", help="comma-separated region names (default: configured region)")
    p.set_defaults(handler=_cmd_gen_soil)

    p = sub.add_parser("build-lut", parents=[common], help="sample, filter, and serialize a lookup table")
    p.add_argument("--out", required=True, help="output table path")
    p.add_argument("--size", type=int, help="target entry count")
    p.add_argument("--region", help="soil region override")
    p.add_argument("--coeffs", help="coefficient CSV (default: built-in generator)")
    p.add_argument("--soil-file", help="soil library CSV (default: built-in generator)")
    p.add_argument("--no-refill", action="store_true", help="keep one sampling round's survivors only")
    p.add_argument("--no-coupling", action="store_true", help="disable the chlorophyll/LAI envelope")
    p.add_argument("--no-green-filter", action="store_true", help="disable the green-peak filter")
    p.set_defaults(handler=_cmd_build_lut)

    p = sub.add_parser("synth-input", parents=[common], help="generate synthetic input tiles with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tiles", type=int, default=4, help="tile count (default 4)")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="per-band Gaussian noise sigma")
    p.add_argument("--smoothness", type=float, default=8.0, help="trait field correlation length in pixels")
    p.add_argument("--region", help="soil region override")
    p.set_defaults(handler=_cmd_synth_input)

    p = sub.add_parser("invert", parents=[common], help="invert one multiband cube into trait rasters")
    p.add_argument("--cube", required=True, help="input raster stem")
    p.add_argument("--lut", required=True, help="lookup table path")
    p.add_argument("--out", required=True, help="output raster stem prefix")
    p.set_defaults(handler=_cmd_invert)

    p = sub.add_parser("simulate", parents=[common], help="forward-simulate a spectral cube from a trait raster")
    p.add_argument("--traits", required=True, help="median trait raster stem")
    p.add_argument("--out", required=True, help="output raster stem")
    p.add_argument("--region", help="soil region override")
    p.add_argument("--coeffs", help="coefficient CSV (default: built-in generator)")
    p.add_argument("--soil-file", help="soil library CSV (default: built-in generator)")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("make-dataset", parents=[common], help="invert + simulate every input tile into a dataset tree")
    p.add_argument("--input", required=True, help="directory of *_bands input rasters")
    p.add_argument("--lut", required=True, help="lookup table path")
    p.add_argument("--out", required=True, help="dataset root directory")
    p.add_argument("--region", help="region directory name override")
    p.add_argument("--coeffs", help="coefficient CSV (default: built-in generator)")
    p.add_argument("--soil-file", help="soil library CSV (default: built-in generator)")
    p.add_argument("--overwrite", action="store_true", help="replace existing tile directories")
    p.set_defaults(handler=_cmd_make_dataset)

    p = sub.add_parser("validate", parents=[common], help="validate tile bundles")
    p.add_argument("--tile", help="one tile directory")
    p.add_argument("--dataset", help="dataset root (validates every tile)")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("export-spectra", parents=[common], help="export pixel spectra from a cube to CSV")
    p.add_argument("--cube", required=True, help="input raster stem")
    p.add_argument("--pixel", action="append", required=True, metavar="ROW,COL", help="pixel to export (repeatable)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(handler=_cmd_export_spectra)

    p = sub.add_parser("bench", parents=[common], help="time the inversion search kernels")
    p.add_argument("--lut", required=True, help="lookup table path")
    p.add_argument("--pixels", type=int, default=4096, help="random observation count (default 4096)")
    p.set_defaults(handler=_cmd_bench)

    return parser


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "region", None) is not None:
        overrides["region"] = args.region
    if getattr(args, "soil_file", None) is not None:
        overrides["soil_path"] = args.soil_file
    return cfg.override(**overrides)


def _coefficients(cfg: PipelineConfig, args: argparse.Namespace, grid):
    path = getattr(args, "coeffs", None)
    return load_coefficients(path, grid) if path else generate_reference_coefficients(grid)


def _cmd_gen_coeffs(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    table = generate_reference_coefficients(cfg.grid())
    save_coefficients(table, args.out)
    print(f"wrote coefficient table ({table.grid.count} samples) to {args.out}")
    return 0


def _cmd_gen_soil(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    regions = [r.strip() for r in args.regions.split(",")] if args.regions else [cfg.region]
    library = generate_reference_soils(cfg.grid(), regions)
    save_soils(library, args.out)
    print(f"wrote soil library ({', '.join(library.names)}) to {args.out}")
    return 0


def _cmd_build_lut(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    overrides = {}
    if args.size is not None:
        overrides["lut_size"] = args.size
    if args.no_refill:
        overrides["refill"] = False
    if args.no_coupling:
        overrides["coupling_enabled"] = False
    if args.no_green_filter:
        overrides["green_peak_enabled"] = False
    cfg = cfg.override(**overrides)

    grid = cfg.grid()
    coeffs = _coefficients(cfg, args, grid)
    soils = cfg.soils(grid)
    ranges = cfg.ranges(soils)
    lut = build_lut(
        cfg.lhs_config(ranges),
        cfg.constraint_config(),
        coeffs,
        soils,
        cfg.rtm_config(),
        cfg.band_set(),
        refill=cfg.refill,
    )
    save_lut(lut, args.out)
    print(f"wrote lookup table ({len(lut)} entries, {len(lut.band_set)} bands) to {args.out}")
    return 0


def _cmd_synth_input(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    spec = SyntheticSceneSpec(
        tiles=args.tiles,
        smoothness=args.smoothness,
        noise_sigma=args.noise_sigma,
        seed=cfg.seed,
    )
    grid = cfg.grid()
    coeffs = generate_reference_coefficients(grid)
    soils = cfg.soils(grid)
    ids = generate_scene_inputs(
        spec, cfg.ranges(soils), coeffs, soils, cfg.band_set(), args.out, cfg.rtm_config()
    )
    print(f"wrote {len(ids)} tile(s) to {args.out}")
    return 0


def _cmd_invert(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    lut = load_lut(args.lut, cfg.grid())
    cube = read_raster(args.cube)
    maps = invert_image(cube.data, lut, cfg.inversion_config(), workers=cfg.workers)
    out = Path(args.out)
    write_raster(RasterCube(maps.median.astype(np.float32), band_names=PARAMETER_NAMES), f"{out}_traits")
    write_raster(RasterCube(maps.p5.astype(np.float32), band_names=PARAMETER_NAMES), f"{out}_p5")
    write_raster(RasterCube(maps.p95.astype(np.float32), band_names=PARAMETER_NAMES), f"{out}_p95")
    write_raster(RasterCube(maps.cost[:, :, None].astype(np.float32)), f"{out}_cost")
    valid = int(maps.valid_mask().sum())
    print(
        f"inverted {maps.rows}x{maps.cols} cube: {valid} valid pixel(s), "
        f"wrote {out}_traits/_p5/_p95/_cost"
    )
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    grid = cfg.grid()
    coeffs = _coefficients(cfg, args, grid)
    soils = cfg.soils(grid)
    traits = read_raster(args.traits)
    cube = simulate_from_traits(traits.data.astype(np.float64), coeffs, soils, cfg.rtm_config())
    write_raster(
        RasterCube(cube, wavelengths=tuple(grid.wavelengths.tolist())), args.out
    )
    print(f"simulated {cube.shape[0]}x{cube.shape[1]}x{cube.shape[2]} cube to {args.out}")
    return 0


def _discover_input_tiles(input_dir: Path) -> list[str]:
    suffix = f"{BANDS_SUFFIX}.img"
    ids = sorted(p.name[: -len(suffix)] for p in input_dir.glob(f"*{suffix}"))
    if not ids:
        raise ConfigError(f"no *{BANDS_SUFFIX} rasters found in {input_dir}")
    return ids


def _cmd_make_dataset(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    grid = cfg.grid()
    band_set = cfg.band_set()
    coeffs = _coefficients(cfg, args, grid)
    soils = cfg.soils(grid)
    lut = load_lut(args.lut, grid)
    if lut.band_set.names != band_set.names:
        raise ConfigError(
            f"lookup table bands {lut.band_set.names} do not match "
            f"the configured band set {band_set.names}"
        )
    lut = lut.rebind_band_set(band_set)

    input_dir = Path(args.input)
    out_root = Path(args.out)
    ids = _discover_input_tiles(input_dir)
    rows: list[tuple[str, str, str, str]] = []
    failures = 0
    for tid in ids:
        try:
            cube = read_raster(input_dir / f"{tid}{BANDS_SUFFIX}")
            maps = invert_image(cube.data, lut, cfg.inversion_config(), workers=cfg.workers)
            surf = simulate_from_traits(maps, coeffs, soils, cfg.rtm_config())
            scl_stem = input_dir / f"{tid}{SCENE_CLASS_SUFFIX}"
            if (input_dir / f"{tid}{SCENE_CLASS_SUFFIX}.img").is_file():
                scene = read_raster(scl_stem).data.astype(np.uint8)
            else:
                scene = np.zeros((maps.rows, maps.cols, 1), dtype=np.uint8)
            tile = TileBundle(
                region=cfg.region,
                tile_id=tid,
                surf_refl=surf,
                traits=maps.median.astype(np.float32),
                p5=maps.p5.astype(np.float32),
                p95=maps.p95.astype(np.float32),
                scene_class=scene,
                grid=grid,
            )
            write_tile_bundle(tile, out_root, overwrite=args.overwrite)
            valid = maps.valid_mask()
            invalid_count = maps.rows * maps.cols - int(valid.sum())
            mean_cost = float(np.mean(maps.cost[valid])) if valid.any() else float("nan")
            rows.append((tid, repr(mean_cost), str(invalid_count), "ok"))
            print(f"tile {tid}: ok (mean cost {mean_cost:.6g}, {invalid_count} invalid)")
        except (HsforgeError, FileExistsError, OSError) as err:
            failures += 1
            rows.append((tid, "nan", "", f"failed: {err}"))
            print(f"tile {tid}: FAILED ({err})", file=sys.stderr)

    out_root.mkdir(parents=True, exist_ok=True)
    manifest = out_root / "manifest.csv"
    with manifest.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tile_id", "mean_cost", "invalid_pixels", "status"])
        writer.writerows(rows)
    print(f"wrote manifest for {len(ids)} tile(s) to {manifest}")
    return 1 if failures else 0


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if bool(args.tile) == bool(args.dataset):
        raise ConfigError("pass exactly one of --tile or --dataset")
    grid_count = cfg.grid().count
    if args.tile:
        tile_dirs = [Path(args.tile)]
    else:
        root = Path(args.dataset)
        if not root.is_dir():
            raise ConfigError(f"dataset root not found: {root}")
        tile_dirs = sorted(
            p for p in root.glob("*/*") if p.is_dir()
        )
        if not tile_dirs:
            raise ConfigError(f"no <region>/<tile> directories under {root}")
    total = 0
    for tile_dir in tile_dirs:
        report = validate_bundle(tile_dir, grid_count=grid_count)
        if report.ok:
            print(f"ok: {tile_dir}")
        else:
            total += len(report.violations)
            for violation in report.violations:
                print(f"violation: {tile_dir}: {violation}")
    print(f"{len(tile_dirs)} tile(s), {total} violation(s)")
    return 0 if total == 0 else 1


def _cmd_export_spectra(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    cube = read_raster(args.cube)
    pixels = []
    for spec in args.pixel:
        try:
            r_txt, c_txt = spec.split(",")
            r, c = int(r_txt), int(c_txt)
        except ValueError:
            raise ConfigError(f"--pixel expects ROW,COL, got {spec!r}") from None
        if not (0 <= r < cube.rows and 0 <= c < cube.cols):
            raise ConfigError(
                f"pixel ({r}, {c}) outside the {cube.rows}x{cube.cols} cube"
            )
        pixels.append((r, c))

    if cube.wavelengths is not None:
        wavelengths = cube.wavelengths
    else:
        grid = cfg.grid()
        if grid.count != cube.bands:
            raise ConfigError(
                f"cube has {cube.bands} bands with no wavelength metadata and the "
                f"configured grid has {grid.count} samples; cannot label rows"
            )
        wavelengths = tuple(grid.wavelengths.tolist())

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = "wavelength_nm," + ",".join(f"r{r}_c{c}" for r, c in pixels)
    lines = [header]
    for b in range(cube.bands):
        row = [repr(float(wavelengths[b]))]
        row += [repr(float(cube.data[r, c, b])) for r, c in pixels]
        lines.append(",".join(row))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"exported {len(pixels)} spectrum/spectra ({cube.bands} samples) to {out}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if args.pixels < 1:
        raise ConfigError(f"--pixels must be >= 1, got {args.pixels}")
    lut = load_lut(args.lut)
    table = lut.band_values_f64
    n = cfg.n_best
    rng = np.random.default_rng(cfg.seed)
    obs = rng.random((args.pixels, table.shape[1]))

    topk_search(table[: min(len(lut), 64)], obs[:2], min(n, min(len(lut), 64)), workers=1)  # JIT warm-up

    t0 = time.perf_counter()
    idx_naive, acc_naive = topk_search_reference(table, obs, n)
    t_naive = time.perf_counter() - t0

    t0 = time.perf_counter()
    idx_one, acc_one = topk_search(table, obs, n, workers=1)
    t_one = time.perf_counter() - t0

    t0 = time.perf_counter()
    idx_many, acc_many = topk_search(table, obs, n, workers=cfg.workers)
    t_many = time.perf_counter() - t0

    if not (
        np.array_equal(idx_naive, idx_one)
        and np.array_equal(acc_naive, acc_one)
        and np.array_equal(idx_naive, idx_many)
        and np.array_equal(acc_naive, acc_many)
    ):
        raise ConsistencyError("kernel results disagree; refusing to report timings")
    costs = accumulator_to_cost(acc_one, table.shape[1])

    comparisons = args.pixels * len(lut)
    print(f"table entries: {len(lut)}, bands: {table.shape[1]}, pixels: {args.pixels}, n_best: {n}")
    print(f"naive reference:        {t_naive:8.3f} s  ({comparisons / t_naive / 1e6:8.2f} M cmp/s)")
    print(f"optimized @ 1 worker:   {t_one:8.3f} s  ({comparisons / t_one / 1e6:8.2f} M cmp/s)")
    print(f"optimized @ {cfg.workers} worker(s): {t_many:8.3f} s  ({comparisons / t_many / 1e6:8.2f} M cmp/s)")
    print(f"speedup ({cfg.workers} vs 1): {t_one / t_many:.2f}x")
    print(f"kernels agree exactly: yes (mean best cost {float(np.mean(costs[:, 0])):.6g})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
