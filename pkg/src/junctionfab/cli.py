import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from junctionfab.core import HEATMAP_METRICS, Analysis, Pipeline
from junctionfab.errors import JunctionFabError
from junctionfab.features import litho_dose, mc_psf
from junctionfab.features.config_manager import PRESETS, get_preset, load_run_config
from junctionfab.features.dataset import read_dataset
from junctionfab.features.experiments import EXPERIMENTS, checks_frame, render_checks
from junctionfab.metadata import __version__
from junctionfab.settings import JunctionFabSettings

logger = logging.getLogger(__name__)

MIN_PSF_ELECTRONS = 10_000


def setup_logging(level: int = logging.INFO) -> None:
    """Set up logging with errors to stderr and others to stdout."""
    # create separate handlers for stdout and stderr
    stdout_handler = logging.StreamHandler(sys.stdout)
    stdout_handler.setLevel(level)
    # set filter to allow only non-error messages
    stdout_handler.addFilter(lambda record: record.levelno < logging.ERROR)

    stderr_handler = logging.StreamHandler(sys.stderr)
    stderr_handler.setLevel(logging.ERROR)

    # common formatter
    formatter = logging.Formatter('[%(asctime)s] %(levelname)s %(name)s: %(message)s')
    stdout_handler.setFormatter(formatter)
    stderr_handler.setFormatter(formatter)

    # configure root logger
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.addHandler(stdout_handler)
    root_logger.addHandler(stderr_handler)


def _grid(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 10x10, got {text!r}") from None
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return nx, ny


def _metric_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--metric", action="append", choices=HEATMAP_METRICS,
                        help="heat-map metric, repeatable (default: all)")


def _print_analysis(analysis: Analysis) -> None:
    print(analysis.report.render())
    if analysis.frequency is not None:
        print()
        print(analysis.frequency.render())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="junctionfab",
                                     description="Josephson junction fabrication variability")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--settings", type=Path, help="Path to process settings YAML")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a wafer and analyze it")
    source = sim.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=Path, help="run configuration (YAML or JSON)")
    source.add_argument("--preset", choices=sorted(PRESETS), help="built-in run configuration")
    sim.add_argument("--seed", type=int, help="override the configured seed")
    sim.add_argument("--out", type=Path, required=True, help="output directory")
    sim.add_argument("--grid", type=_grid, help="heat-map grid NxM")
    _metric_option(sim)

    ana = sub.add_parser("analyze", help="analyze an existing dataset CSV")
    ana.add_argument("dataset", type=Path)
    ana.add_argument("--out", type=Path, required=True)
    ana.add_argument("--strict", action="store_true", help="abort on the first malformed row")
    ana.add_argument("--grid", type=_grid, default=(10, 10))
    ana.add_argument("--no-outlier-filter", action="store_true")
    _metric_option(ana)

    rep = sub.add_parser("repro", help="run reference experiments against their acceptance bands")
    rep.add_argument("experiment", choices=sorted(EXPERIMENTS) + ["all"])
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--out", type=Path, required=True)

    psf = sub.add_parser("psf", help="Monte Carlo point-spread function")
    psf.add_argument("--stack", choices=sorted(mc_psf.STACK_PRESETS), default="si")
    psf.add_argument("--energy", type=float, default=50.0, help="beam energy in keV")
    psf.add_argument("--electrons", type=int, default=100_000)
    psf.add_argument("--seed", type=int, default=0)
    psf.add_argument("--out", type=Path, required=True)

    dose = sub.add_parser("dose", help="proximity dose map of a layout")
    dose.add_argument("--preset", default="mma-pmma-a4", help="resist preset")
    dose.add_argument("--psf", type=Path, help="psf_fit.json from the psf command; replaces the preset PSF")
    dose.add_argument("--layout", type=Path, help="layout CSV/JSON (default: reference layout)")
    dose.add_argument("--grid", type=_grid, default=(101, 101))
    dose.add_argument("--extent", type=float, default=2.0, help="half width of the map in µm")
    dose.add_argument("--out", type=Path, required=True)
    return parser


def cmd_simulate(args: argparse.Namespace, settings: JunctionFabSettings) -> int:
    config = load_run_config(args.config) if args.config else get_preset(args.preset)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    grid = args.grid or config.heatmap_grid
    with Pipeline(args.out, settings) as pipeline:
        dataset = pipeline.simulate(config)
        analysis = pipeline.analyze(dataset, grid=grid, outlier_filter=config.outlier_filter,
                                    substrate_size=config.wafer.substrate_size,
                                    metrics=args.metric or HEATMAP_METRICS,
                                    electrical=config.electrical)
        pipeline.write_metadata("simulate", config=config)
    _print_analysis(analysis)
    return 0


def cmd_analyze(args: argparse.Namespace, settings: JunctionFabSettings) -> int:
    with Pipeline(args.out, settings) as pipeline:
        dataset, errors = read_dataset(args.dataset, strict=args.strict)
        analysis = pipeline.analyze(dataset, grid=args.grid, outlier_filter=not args.no_outlier_filter,
                                    metrics=args.metric or HEATMAP_METRICS)
        extra = {"dataset": str(args.dataset), "malformed_rows": [e.row for e in errors]}
        if analysis.frequency is not None:
            extra["ra_product"] = analysis.frequency.ra_product
        pipeline.write_metadata("analyze", extra=extra)
    _print_analysis(analysis)
    return 0


def cmd_repro(args: argparse.Namespace, settings: JunctionFabSettings) -> int:
    names = sorted(EXPERIMENTS) if args.experiment == "all" else [args.experiment]
    rows = []
    with Pipeline(args.out, settings) as pipeline:
        for name in names:
            logger.info("running %s", name)
            rows.extend(EXPERIMENTS[name](args.seed, settings.threads))
        checks_frame(rows).to_csv(args.out / "checks.csv", index=False, lineterminator="\n")
        pipeline.write_metadata("repro", seed=args.seed, extra={"experiments": names})
    print(render_checks(rows))
    return 0


def cmd_psf(args: argparse.Namespace, settings: JunctionFabSettings) -> int:
    if args.electrons < MIN_PSF_ELECTRONS:
        raise JunctionFabError(f"at least {MIN_PSF_ELECTRONS} electrons needed for a usable fit")
    beam = mc_psf.BeamConfig(energy=args.energy, electron_count=args.electrons, rng_seed=args.seed)
    with Pipeline(args.out, settings) as pipeline:
        hist = mc_psf.simulate_psf(mc_psf.STACK_PRESETS[args.stack](), beam, workers=settings.threads)
        hist.write_csv(args.out / "psf_histogram.csv")
        pipeline.write_metadata("psf", seed=args.seed, extra={
            "stack": args.stack, "energy_kev": args.energy, "electrons": args.electrons})
        fit = mc_psf.fit_double_gaussian(hist)
        (args.out / "psf_fit.json").write_text(fit.model_dump_json(indent=2) + "\n")
    print(f"alpha {fit.alpha_fwd * 1000:.1f} nm, beta {fit.beta_back:.2f} um, eta {fit.eta:.3f}")
    return 0


def cmd_dose(args: argparse.Namespace, settings: JunctionFabSettings) -> int:
    preset = litho_dose.get_preset(args.preset)
    if args.psf is not None:
        preset = litho_dose.preset_with_psf(preset, litho_dose.load_psf(args.psf))
    layout = litho_dose.load_layout(args.layout) if args.layout else litho_dose.reference_layout()
    nx, ny = args.grid
    xs = np.linspace(-args.extent, args.extent, nx)
    ys = np.linspace(-args.extent, args.extent, ny)
    with Pipeline(args.out, settings) as pipeline:
        litho_dose.write_dose_map(args.out / "dose_map.csv", xs, ys,
                                  litho_dose.dose_map(layout, preset.psf, xs, ys))
        pipeline.write_metadata("dose", extra={"preset": preset.name,
                                               "layout": str(args.layout or "reference"),
                                               "psf": preset.psf.model_dump()})
    if args.layout is None:
        increase = litho_dose.backscatter_increase(layout, preset.psf, litho_dose.reference_region())
        print(f"{preset.name}: backscatter increase {increase:.1f} %")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "repro": cmd_repro,
    "psf": cmd_psf,
    "dose": cmd_dose,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # usage errors exit with status 2

    try:
        settings = JunctionFabSettings.from_yaml(args.settings)
    except JunctionFabError as e:
        print(f"junctionfab: {e}", file=sys.stderr)
        return 1
    if settings.log_to_console:
        setup_logging(getattr(logging, settings.log_level.upper(), logging.INFO))

    try:
        return COMMANDS[args.command](args, settings)
    except (JunctionFabError, ValidationError) as e:
        logger.error("%s", e)
        return 1
    except KeyboardInterrupt:
        logger.info("Interrupted.")
        return 130


if __name__ == "__main__":
    sys.exit(main())
