"""Added noise and emitted noise spectra, in quanta (photons/s/Hz).

Only the mechanical bath contributes; cavity thermal occupancy is taken as zero.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import constants

from .errors import GridError, ParameterDomainError
from .model import ConverterParams, DerivedRates, derive_rates, drive_for_cooperativity
from .scattering import BATH, EXT1, EXT2, bath_fraction_on_resonance, scattering_matrix

logger = logging.getLogger(__name__)

SPECTRUM_COLUMNS = ["delta_hz", "quanta"]


def bose_occupancy(f: float, temperature: float) -> float:
    """Mean thermal occupancy 1/(exp(hf/kT) - 1) of a mode at frequency ``f``."""
    if not temperature > 0:
        raise ParameterDomainError("temperature", temperature, "must be positive")
    if not f > 0:
        raise ParameterDomainError("f", f, "must be positive")
    return 1.0 / math.expm1(constants.h * f / (constants.k * temperature))


def rayleigh_jeans_occupancy(f: float, temperature: float) -> float:
    """High-temperature approximation kT/hf."""
    if not temperature > 0:
        raise ParameterDomainError("temperature", temperature, "must be positive")
    if not f > 0:
        raise ParameterDomainError("f", f, "must be positive")
    return constants.k * temperature / (constants.h * f)


def floor_from_noise_temperature(t_noise: float, f: float, form: str = "bose") -> float:
    """Convert a system noise temperature to a noise floor in quanta."""
    if form == "bose":
        return bose_occupancy(f, t_noise)
    if form == "rayleigh-jeans":
        return rayleigh_jeans_occupancy(f, t_noise)
    raise ParameterDomainError("form", form, "must be 'bose' or 'rayleigh-jeans'")


def lorentzian(delta, center: float, fwhm: float, peak: float, floor: float):
    half = 0.5 * fwhm
    return floor + peak * half ** 2 / (half ** 2 + (np.asarray(delta) - center) ** 2)


def lorentzian_area(peak: float, fwhm: float) -> float:
    """Integral of the Lorentzian above its floor."""
    return 0.5 * math.pi * peak * fwhm


@dataclass(frozen=True)
class AddedNoiseResult:
    """Added quanta referred to each input, with the final mechanical occupancy."""
    n_add_1: float
    n_add_2: float
    n_m: float
    bound_ok: Tuple[bool, bool]
    diagnostics: Tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class NoiseSpectrum:
    """Noise emitted by one cavity, about its resonance."""
    deltas: np.ndarray
    values: np.ndarray
    floor_quanta: float
    which_cavity: int
    n_th: float
    rates: Optional[DerivedRates] = None
    seed: Optional[int] = None
    n_avg: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"delta_hz": self.deltas, "quanta": self.values}, columns=SPECTRUM_COLUMNS)

    def metadata(self) -> Dict[str, Any]:
        return {
            "which_cavity": self.which_cavity,
            "n_th": self.n_th,
            "floor_quanta": self.floor_quanta,
            "rates": self.rates.to_dict() if self.rates is not None else None,
            "seed": self.seed,
            "n_avg": None if self.n_avg is None or math.isinf(self.n_avg) else self.n_avg,
        }


@dataclass(frozen=True)
class SynthesisConfig:
    """Radiometer averaging for synthetic spectra; ``inf`` means noiseless."""
    n_avg: float = 1e4

    def __post_init__(self):
        if not self.n_avg > 0:
            raise ParameterDomainError("n_avg", self.n_avg, "must be positive")


def added_noise(rates: DerivedRates, eta1: float, eta2: float, n_th: float) -> AddedNoiseResult:
    """Input-referred added noise n_add_i = n_th/(eta_i C_i) and final occupancy."""
    if n_th < 0:
        raise ParameterDomainError("n_th", n_th, "must be non-negative")
    n_m = n_th / (1.0 + rates.c1 + rates.c2)
    diagnostics = []
    values = []
    for index, eta, coop in ((1, eta1, rates.c1), (2, eta2, rates.c2)):
        if eta * coop == 0:
            values.append(math.inf)
            diagnostics.append(
                f"n_add_{index} is unbounded: eta{index}*C{index} = 0, nothing is converted into cavity {index}"
            )
        else:
            values.append(n_th / (eta * coop))
    for message in diagnostics:
        logger.warning(message)
    bound_ok = tuple(value > 2.0 * n_m for value in values)
    return AddedNoiseResult(n_add_1=values[0], n_add_2=values[1], n_m=n_m, bound_ok=bound_ok,
                            diagnostics=tuple(diagnostics))


def emitted_peak(rates: DerivedRates, eta: float, which_cavity: int, n_th: float) -> float:
    """Peak noise above the floor emitted by ``which_cavity``: 4 eta_i C_i n_th/(1+C)^2."""
    return bath_fraction_on_resonance(rates, eta, which_cavity) * n_th


def _check_grid(deltas: np.ndarray) -> None:
    if deltas.ndim != 1 or deltas.size < 2:
        raise GridError("spectrum grid needs at least 2 points")
    if not np.all(np.isfinite(deltas)) or np.any(np.diff(deltas) <= 0):
        raise GridError("spectrum grid must be finite and strictly increasing")


def output_noise_spectrum(params: ConverterParams, rates: DerivedRates, which_cavity: int, n_th: float,
                          floor_quanta: float, deltas: Sequence[float],
                          lineshape: str = "lorentzian") -> NoiseSpectrum:
    """Noise emitted by one cavity: the floor plus a mechanical Lorentzian of width Gamma_total.

    Args:
        which_cavity: 1 or 2, the emitting cavity
        lineshape: "lorentzian" for the weak-coupling form, "full" to use the
            bath column of the scattering matrix at every detuning
    """
    grid = np.asarray(deltas, dtype=float)
    _check_grid(grid)
    cavity = params.cavity(which_cavity)
    if lineshape == "lorentzian":
        peak = emitted_peak(rates, cavity.eta, which_cavity, n_th)
        values = lorentzian(grid, 0.0, rates.gamma_total, peak, floor_quanta)
    elif lineshape == "full":
        port = EXT1 if which_cavity == 1 else EXT2
        matrices = scattering_matrix(params, rates, grid)
        values = floor_quanta + n_th * np.abs(matrices[:, port, BATH]) ** 2
    else:
        raise ParameterDomainError("lineshape", lineshape, "must be 'lorentzian' or 'full'")
    return NoiseSpectrum(deltas=grid, values=np.asarray(values, dtype=float), floor_quanta=floor_quanta,
                         which_cavity=which_cavity, n_th=n_th, rates=rates)


def synthesize_spectrum(spectrum: NoiseSpectrum, config: SynthesisConfig, seed: int) -> NoiseSpectrum:
    """Add per-bin radiometer fluctuations of standard deviation value/sqrt(n_avg)."""
    rng = np.random.default_rng(seed)
    sigma = spectrum.values / math.sqrt(config.n_avg)
    values = spectrum.values + sigma * rng.standard_normal(spectrum.values.shape)
    return replace(spectrum, values=values, seed=seed, n_avg=config.n_avg)


def added_noise_curve(params: ConverterParams, c_totals: Sequence[float],
                      n_th: Optional[float] = None) -> pd.DataFrame:
    """Added noise and final occupancy versus total cooperativity, balanced drives."""
    bath = params.mech.n_th if n_th is None else n_th
    rows = []
    for c_total in c_totals:
        drive = drive_for_cooperativity(params, c_total / 2.0, c_total / 2.0)
        result = added_noise(derive_rates(params, drive), params.cavity1.eta, params.cavity2.eta, bath)
        rows.append((c_total, result.n_add_1, result.n_add_2, result.n_m))
    return pd.DataFrame(rows, columns=["c_total", "n_add_1", "n_add_2", "n_m"])
