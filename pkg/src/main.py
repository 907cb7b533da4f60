import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from optomech_converter import __version__
from optomech_converter.data_logger import DataLogger, build_provenance, jsonable, read_table
from optomech_converter.design import DesignTarget, solve
from optomech_converter.errors import ConverterError, DataFileError, InfeasibleTargetError, ParameterDomainError
from optomech_converter.estimation import fit_lorentzian, infer_bath
from optomech_converter.model import (DerivedRates, check_regime, derive_rates, drive_for_cooperativity,
                                      load_device, params_to_dict)
from optomech_converter.noise import (NoiseSpectrum, SynthesisConfig, floor_from_noise_temperature,
                                      output_noise_spectrum, synthesize_spectrum)
from optomech_converter.scattering import sweep_cooperativity, sweep_ratio, trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_DATA = 3


class UsageError(Exception):
    """Raised for invalid command-line combinations."""
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that exits with the usage code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    """Everything one command needs, gathered before any computation."""
    command: str
    device: Optional[str]
    out_dir: str
    seed: Optional[int]
    options: Dict[str, Any] = field(default_factory=dict)
    argv: List[str] = field(default_factory=list)


def _load(config: RunConfig):
    if not config.device:
        raise UsageError("--device is required for this command")
    params, _ = load_device(config.device)
    eta1, eta2 = config.options.get("eta1"), config.options.get("eta2")
    params = params.with_eta(eta1, eta2)
    if config.options.get("n_th") is not None:
        params = params.with_n_th(config.options["n_th"])
    return params


def _logger_for(config: RunConfig) -> DataLogger:
    provenance = build_provenance(__version__, config.argv, config.device, config.seed)
    return DataLogger(config.out_dir, provenance=provenance)


def _grid(low: float, high: float, points: int, spacing: str) -> np.ndarray:
    if points < 1:
        raise UsageError("sweep needs at least one point")
    if spacing == "linear":
        if not 0 <= low <= high:
            raise UsageError("linear sweep bounds must satisfy 0 <= min <= max")
        return np.linspace(low, high, points)
    if not 0 < low <= high:
        raise UsageError("log-spaced sweep bounds must satisfy 0 < min <= max")
    return np.geomspace(low, high, points)


def cmd_sweep(config: RunConfig) -> int:
    """Cooperativity, ratio or detuning sweep to CSV."""
    opts = config.options
    params = _load(config)
    data_logger = _logger_for(config)
    metadata: Dict[str, Any] = {"device": params_to_dict(params), "mode": opts["mode"], "model": opts["model"],
                                "spacing": opts["spacing"]}

    if opts["mode"] == "cooperativity":
        c_totals = opts["c_total"] or list(_grid(opts["c_total_min"], opts["c_total_max"], opts["points"], opts["spacing"]))
        frame = sweep_cooperativity(params, c_totals, model=opts["model"])
        name = "sweep_cooperativity"
    elif opts["mode"] == "ratio":
        ratios = opts["ratio"] or list(_grid(opts["ratio_min"], opts["ratio_max"], opts["points"], opts["spacing"]))
        frame = sweep_ratio(params, opts["c1_fixed"], ratios, model=opts["model"])
        metadata["c1_fixed"] = opts["c1_fixed"]
        name = "sweep_ratio"
    else:
        if opts["points"] < 2:
            raise UsageError("a detuning trace needs at least two points")
        c_total = opts["c_total"][0] if opts["c_total"] else 156.0
        rates = derive_rates(params, drive_for_cooperativity(params, c_total / 2.0, c_total / 2.0))
        span = opts["span"] or 5.0 * rates.gamma_total
        frame = trace(params, rates, -span, span, opts["points"]).to_frame()
        metadata.update(c_total=c_total, rates=rates.to_dict(),
                        regime_warnings=list(check_regime(params, rates).warnings))
        name = "trace"
    if frame.empty:
        raise UsageError("sweep list is empty")
    data_logger.write_table(name, frame, metadata)
    print(f"Wrote {len(frame)} rows to {os.path.join(config.out_dir, name + '.csv')}")
    return EXIT_OK


def cmd_spectrum(config: RunConfig) -> int:
    """Emitted noise spectra, optionally with synthetic radiometer noise."""
    opts = config.options
    params = _load(config)
    if not opts["c_total"]:
        raise UsageError("at least one --c-total is required")
    cavity = params.cavity(opts["cavity"])
    if opts["floor_quanta"] is not None:
        floor = opts["floor_quanta"]
    elif opts["t_noise_k"] is not None:
        floor = floor_from_noise_temperature(opts["t_noise_k"], cavity.f_c)
    elif cavity.t_noise is not None:
        floor = floor_from_noise_temperature(cavity.t_noise, cavity.f_c)
    else:
        floor = 0.0
    if opts["points"] < 2:
        raise UsageError("a spectrum needs at least two points")

    if opts["synthesize"] and config.seed is None:
        raise UsageError("--synthesize requires --seed")
    # Build every spectrum before writing any, so a bad --c-total leaves no partial output
    tables = []
    for c_total in opts["c_total"]:
        rates = derive_rates(params, drive_for_cooperativity(params, c_total / 2.0, c_total / 2.0))
        span = opts["span"] or 10.0 * rates.gamma_total
        deltas = np.linspace(-span, span, opts["points"])
        spectrum = output_noise_spectrum(params, rates, opts["cavity"], params.mech.n_th, floor, deltas,
                                         lineshape=opts["lineshape"])
        if opts["synthesize"]:
            spectrum = synthesize_spectrum(spectrum, SynthesisConfig(n_avg=opts["n_avg"]), config.seed)
        metadata = spectrum.metadata()
        metadata.update(device=params_to_dict(params), c_total=c_total,
                        eta1=params.cavity1.eta, eta2=params.cavity2.eta)
        tables.append((f"spectrum_c{c_total:g}", spectrum.to_frame(), metadata))
    data_logger = _logger_for(config)
    for name, frame, metadata in tables:
        data_logger.write_table(name, frame, metadata)
    print(f"Wrote {len(opts['c_total'])} spectra to {config.out_dir} (floor {floor:.4g} quanta)")
    return EXIT_OK


def _first(*values):
    return next((value for value in values if value is not None), None)


def _fit_one(path: str, eta_override: Dict[str, Optional[float]]) -> Dict[str, Any]:
    frame, sidecar = read_table(path, required=("delta_hz", "quanta"))
    metadata = (sidecar or {}).get("metadata") or {}
    try:
        which_cavity = int(metadata.get("which_cavity", 1))
        rates = DerivedRates(**metadata["rates"]) if metadata.get("rates") else None
    except (TypeError, ValueError) as e:
        raise DataFileError(f"{path} has an unusable sidecar: {e}") from e
    spectrum = NoiseSpectrum(deltas=frame["delta_hz"].to_numpy(dtype=float),
                             values=frame["quanta"].to_numpy(dtype=float),
                             floor_quanta=_first(metadata.get("floor_quanta"), float("nan")),
                             which_cavity=which_cavity,
                             n_th=_first(metadata.get("n_th"), float("nan")))
    fit = fit_lorentzian(spectrum)
    record: Dict[str, Any] = {"file": path, "fit": fit.to_record()}
    eta1 = _first(eta_override.get("eta1"), metadata.get("eta1"))
    eta2 = _first(eta_override.get("eta2"), metadata.get("eta2"))
    if rates is not None and eta1 is not None and eta2 is not None:
        bath = infer_bath(fit, rates, eta1, eta2, spectrum.which_cavity)
        record["bath"] = {"c_total": rates.c_total, "n_add": bath.n_add, "n_m": bath.n_m,
                          "n_th": bath.n_th, "referred_to": bath.referred_to, "warnings": list(bath.warnings)}
    return record


def cmd_fit(config: RunConfig) -> int:
    """Fit every spectrum CSV; a failing file does not stop the batch."""
    opts = config.options
    stems = [os.path.splitext(os.path.basename(path))[0] for path in opts["inputs"]]
    duplicates = sorted({stem for stem in stems if stems.count(stem) > 1})
    if duplicates:
        raise UsageError(f"inputs share file names {duplicates}; their fit records would collide")
    data_logger = _logger_for(config)
    overrides = {"eta1": opts.get("eta1"), "eta2": opts.get("eta2")}

    def attempt(path):
        try:
            return _fit_one(path, overrides)
        except ConverterError as e:
            logger.error(f"Fit of {path} failed: {e}")
            return {"file": path, "error": str(e)}

    with ThreadPoolExecutor(max_workers=max(1, opts["workers"])) as pool:
        records = list(pool.map(attempt, opts["inputs"]))

    rollup = []
    for stem, record in zip(stems, records):
        data_logger.write_json(f"fit_{stem}", {"provenance": data_logger.provenance, **record})
        if "bath" in record:
            bath = record["bath"]
            rollup.append((bath["c_total"], bath["n_add"], bath["n_m"], bath["n_th"]))
    if rollup:
        frame = pd.DataFrame(sorted(rollup), columns=["c_total", "n_add", "n_m", "n_th"])
        data_logger.write_table("fit_summary", frame, {"inputs": list(opts["inputs"])})

    failed = [r["file"] for r in records if "error" in r]
    print(f"Fitted {len(records) - len(failed)} of {len(records)} spectra")
    return EXIT_DATA if failed else EXIT_OK


def _design_target(opts: Dict[str, Any]) -> DesignTarget:
    if opts["target"]:
        try:
            with open(opts["target"], "r") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read design target {opts['target']}: {e}") from e
        return DesignTarget.from_dict(data)
    keys = ("bandwidth_hz", "transmission_sq", "split_t_sq", "c1_fixed", "max_drive_photons",
            "eta1", "eta2", "n_th")
    return DesignTarget(**{key: opts.get(key) for key in keys})


def cmd_design(config: RunConfig) -> int:
    """Solve a design target and report the drive configuration."""
    params = _load(config)
    try:
        target = _design_target(config.options)
    except ParameterDomainError as e:
        raise UsageError(str(e)) from e
    data_logger = _logger_for(config)
    target_dict = {k: v for k, v in target.__dict__.items() if v is not None}
    try:
        solutions = solve(params, target)
    except InfeasibleTargetError as e:
        payload = {"feasible": False, "message": str(e), "achievable": e.achievable, "target": target_dict}
        data_logger.write_json("design", {"provenance": data_logger.provenance, **payload})
        print(f"Infeasible: {e}")
        print(json.dumps(jsonable(payload), indent=2, sort_keys=True))
        return EXIT_INFEASIBLE

    feasible = any(solution.feasible for solution in solutions)
    payload = {"feasible": feasible, "target": target_dict, "solutions": [s.to_dict() for s in solutions]}
    data_logger.write_json("design", {"provenance": data_logger.provenance, **payload})
    for solution in solutions:
        rates = solution.rates
        label = f" [{solution.branch}]" if solution.branch else ""
        print(f"Solution{label}: C1={rates.c1:.6g} C2={rates.c2:.6g}")
        print(f"  n1={solution.drive.n1:.4g} n2={solution.drive.n2:.4g} photons, "
              f"pump powers {solution.pump_power_w[0]:.4g} W / {solution.pump_power_w[1]:.4g} W")
        print(f"  |t|^2={solution.t_sq:.6g} |r1|^2={solution.r1_sq:.6g} |r2|^2={solution.r2_sq:.6g} "
              f"Gamma={solution.gamma_total:.6g} Hz")
    print(json.dumps(jsonable(payload), indent=2, sort_keys=True))
    return EXIT_OK if feasible else EXIT_INFEASIBLE


COMMANDS = {"sweep": cmd_sweep, "spectrum": cmd_spectrum, "fit": cmd_fit, "design": cmd_design}


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="optoconv", description="Optomechanical frequency converter toolkit")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    common = ArgumentParser(add_help=False)
    common.add_argument('--device', help='Device description (ConverterParams JSON)')
    common.add_argument('--out-dir', default='results', help='Output directory')
    common.add_argument('--seed', type=int, default=None, help='Random seed, recorded in every output')
    common.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Logging level')
    common.add_argument('--eta1', type=float, help='Override cavity-1 coupling efficiency')
    common.add_argument('--eta2', type=float, help='Override cavity-2 coupling efficiency')
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=ArgumentParser)

    sweep = subparsers.add_parser('sweep', parents=[common], help='On-resonance sweeps and detuning traces')
    sweep.add_argument('--mode', choices=['cooperativity', 'ratio', 'detuning'], default='cooperativity',
                       help='Swept quantity; detuning mode traces the frequency response at one C1+C2')
    sweep.add_argument('--points', type=int, default=200, help='Grid points')
    sweep.add_argument('--spacing', choices=['log', 'linear'], default='log',
                       help='Spacing of the C1+C2 or C2/C1 grid')
    sweep.add_argument('--c-total', type=float, action='append', default=[],
                       help='Explicit C1+C2 value (repeatable); detuning mode uses the first')
    sweep.add_argument('--c-total-min', type=float, default=1.0, help='Lowest C1+C2 of the grid')
    sweep.add_argument('--c-total-max', type=float, default=3000.0, help='Highest C1+C2 of the grid')
    sweep.add_argument('--c1-fixed', type=float, default=400.0, help='C1 held fixed in ratio mode')
    sweep.add_argument('--ratio', type=float, action='append', default=[], help='Explicit C2/C1 (repeatable)')
    sweep.add_argument('--ratio-min', type=float, default=0.01, help='Lowest C2/C1 of the grid')
    sweep.add_argument('--ratio-max', type=float, default=10.0, help='Highest C2/C1 of the grid')
    sweep.add_argument('--span', type=float, default=None, help='Half-width of the detuning grid in Hz')
    sweep.add_argument('--model', choices=['closed', 'full'], default='closed',
                       help='Closed-form or full-matrix on-resonance values')

    spectrum = subparsers.add_parser('spectrum', parents=[common], help='Emitted noise spectra')
    spectrum.add_argument('--c-total', type=float, action='append', default=[], help='C1+C2 (repeatable)')
    spectrum.add_argument('--n-th', type=float, default=None, help='Mechanical bath occupancy')
    floor = spectrum.add_mutually_exclusive_group()
    floor.add_argument('--floor-quanta', type=float, default=None, help='Noise floor in quanta')
    floor.add_argument('--t-noise-k', type=float, default=None, help='System noise temperature in K')
    spectrum.add_argument('--cavity', type=int, choices=[1, 2], default=1, help='Emitting cavity')
    spectrum.add_argument('--span', type=float, default=None, help='Half-width of the grid in Hz')
    spectrum.add_argument('--points', type=int, default=801, help='Grid points')
    spectrum.add_argument('--lineshape', choices=['lorentzian', 'full'], default='lorentzian',
                          help='Lorentzian approximation or the full frequency-dependent lineshape')
    spectrum.add_argument('--synthesize', action='store_true', help='Add seeded radiometer noise')
    spectrum.add_argument('--n-avg', type=float, default=1e4, help='Averages per bin for --synthesize')

    fit = subparsers.add_parser('fit', parents=[common], help='Lorentzian fits and bath inference')
    fit.add_argument('inputs', nargs='+', help='Spectrum CSV files')
    fit.add_argument('--workers', type=int, default=1, help='Parallel fits')

    design = subparsers.add_parser('design', parents=[common], help='Inverse design of drive settings')
    design.add_argument('--target', default=None, help='DesignTarget JSON file')
    design.add_argument('--bandwidth-hz', type=float, default=None, help='Target conversion bandwidth Gamma_total in Hz')
    design.add_argument('--transmission-sq', type=float, default=None,
                        help='Target on-resonance |t|^2 with balanced drives')
    design.add_argument('--split-t-sq', type=float, default=None,
                        help='Target |t|^2 of the beam splitter at fixed C1 (needs --c1-fixed)')
    design.add_argument('--c1-fixed', type=float, default=None, help='Cavity-1 cooperativity held fixed')
    design.add_argument('--max-drive-photons', type=float, default=None,
                        help='Largest allowed intracavity photon number per drive')
    design.add_argument('--n-th', type=float, default=None, help='Mechanical bath occupancy used for added noise')
    return parser


def make_config(args: argparse.Namespace, argv: Sequence[str]) -> RunConfig:
    options = {k: v for k, v in vars(args).items()
               if k not in ('command', 'device', 'out_dir', 'seed', 'log_level')}
    return RunConfig(command=args.command, device=args.device, out_dir=args.out_dir, seed=args.seed,
                     options=options, argv=list(argv))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Command-line entry point; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    config = make_config(args, ["optoconv", *argv])
    try:
        return COMMANDS[config.command](config)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        print(f"optoconv {config.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleTargetError as e:
        logger.error(f"Infeasible: {e}")
        return EXIT_INFEASIBLE
    except ConverterError as e:
        logger.error(f"Data error: {e}")
        print(f"optoconv {config.command}: error: {e}", file=sys.stderr)
        return EXIT_DATA


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
