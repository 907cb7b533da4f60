"""Inverse problems: drive settings for a target bandwidth, transmission or split ratio."""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from scipy import constants

from .errors import InfeasibleTargetError, ParameterDomainError
from .model import (ConverterParams, DerivedRates, DriveConfig, check_regime, derive_rates,
                    drive_for_cooperativity, drive_to_dict)
from .noise import added_noise
from .scattering import scattering_on_resonance

logger = logging.getLogger(__name__)

# Input flux at 1 dB compression of the transmission amplitude (photons/s).
DEFAULT_P1DB_FLUX = 5e12

OBJECTIVES = ("bandwidth_hz", "transmission_sq", "split_t_sq")


@dataclass(frozen=True)
class DesignTarget:
    """One design objective plus optional constraints."""
    bandwidth_hz: Optional[float] = None
    transmission_sq: Optional[float] = None
    split_t_sq: Optional[float] = None
    c1_fixed: Optional[float] = None
    max_drive_photons: Optional[float] = None
    eta1: Optional[float] = None
    eta2: Optional[float] = None
    n_th: Optional[float] = None

    def __post_init__(self):
        chosen = [name for name in OBJECTIVES if getattr(self, name) is not None]
        if len(chosen) != 1:
            raise ParameterDomainError("objective", chosen, f"exactly one of {OBJECTIVES} must be set")
        if self.split_t_sq is not None and self.c1_fixed is None:
            raise ParameterDomainError("c1_fixed", None, "a split target needs a fixed C1")
        for name in ("c1_fixed", "max_drive_photons"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ParameterDomainError(name, value, "must be positive")

    @property
    def objective(self) -> str:
        return next(name for name in OBJECTIVES if getattr(self, name) is not None)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DesignTarget":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterDomainError("target", sorted(unknown), "unknown design target keys")
        return cls(**data)


@dataclass(frozen=True)
class DesignSolution:
    """A drive configuration with everything it predicts."""
    drive: DriveConfig
    rates: DerivedRates
    t_sq: float
    r1_sq: float
    r2_sq: float
    gamma_total: float
    n_add: Tuple[float, float]
    pump_power_w: Tuple[float, float]
    flags: Dict[str, bool]
    branch: Optional[str] = None
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return self.flags.get("within_drive_limit", True)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "branch": self.branch,
            "drive": drive_to_dict(self.drive),
            "rates": self.rates.to_dict(),
            "predicted": {
                "t_sq": self.t_sq,
                "r1_sq": self.r1_sq,
                "r2_sq": self.r2_sq,
                "gamma_total_hz": self.gamma_total,
                "n_add_1": _json_number(self.n_add[0]),
                "n_add_2": _json_number(self.n_add[1]),
            },
            "pump_power_w": list(self.pump_power_w),
            "flags": dict(self.flags),
            "warnings": list(self.warnings),
        }


def _json_number(value: float):
    return None if math.isinf(value) else value


def dbm_to_watts(power_dbm: float) -> float:
    return 10.0 ** ((power_dbm - 30.0) / 10.0)


def photon_flux(power_dbm: float, f: float) -> float:
    """Photons per second carried by a tone of ``power_dbm`` at frequency ``f``."""
    if not f > 0:
        raise ParameterDomainError("f", f, "must be positive")
    return dbm_to_watts(power_dbm) / (constants.h * f)


def check_compression(flux: float, configured_p1db_flux: float = DEFAULT_P1DB_FLUX) -> bool:
    """Return True (and warn) when an input flux exceeds the 1 dB compression ceiling."""
    if flux > configured_p1db_flux:
        logger.warning(f"Input flux {flux:.3g} photons/s exceeds the compression ceiling "
                       f"{configured_p1db_flux:.3g} photons/s")
        return True
    return False


def drive_power(params: ConverterParams, which_cavity: int, n_photons: float) -> float:
    """Port power (W) holding ``n_photons`` in a cavity driven on its lower sideband.

    A drive detuned by -f_m from a cavity of total width kappa and external
    width kappa_ext obeys, in angular units, n = kappa_ext P / (hbar w_d) /
    ((kappa/2)^2 + Omega_m^2). In cyclic units that reads
    P = n h f_d 2 pi ((kappa/2)^2 + f_m^2) / kappa_ext.
    """
    if n_photons < 0:
        raise ParameterDomainError("n_photons", n_photons, "must be non-negative")
    if n_photons == 0:
        return 0.0
    cavity = params.cavity(which_cavity)
    if cavity.kappa_ext == 0:
        raise ParameterDomainError("eta", cavity.eta, "a cavity without external coupling cannot be driven")
    f_drive = cavity.f_c - params.mech.f_m
    detuning_term = (0.5 * cavity.kappa) ** 2 + params.mech.f_m ** 2
    return n_photons * constants.h * f_drive * 2.0 * math.pi * detuning_term / cavity.kappa_ext


def _solution(params: ConverterParams, c1: float, c2: float, n_th: Optional[float],
              max_drive_photons: Optional[float], branch: Optional[str] = None) -> DesignSolution:
    drive = drive_for_cooperativity(params, c1, c2)
    rates = derive_rates(params, drive)
    eta1, eta2 = params.cavity1.eta, params.cavity2.eta
    scattering = scattering_on_resonance(rates, eta1, eta2)
    noise = added_noise(rates, eta1, eta2, params.mech.n_th if n_th is None else n_th)
    regime = check_regime(params, rates)
    within_limit = max_drive_photons is None or max(drive.n1, drive.n2) <= max_drive_photons
    warnings = list(regime.warnings)
    if not within_limit:
        warnings.append(f"drive photons {max(drive.n1, drive.n2):.4g} exceed the limit {max_drive_photons:.4g}")
        logger.warning(warnings[-1])
    return DesignSolution(
        drive=drive,
        rates=rates,
        t_sq=scattering.t_sq,
        r1_sq=scattering.r1_sq,
        r2_sq=scattering.r2_sq,
        gamma_total=rates.gamma_total,
        n_add=(noise.n_add_1, noise.n_add_2),
        pump_power_w=(drive_power(params, 1, drive.n1), drive_power(params, 2, drive.n2)),
        flags={
            "weak_coupling": all(regime.weak_coupling),
            "sideband_resolved": all(regime.sideband_resolved),
            "within_drive_limit": within_limit,
        },
        branch=branch,
        warnings=tuple(warnings),
    )


def solve_bandwidth(params: ConverterParams, target_bw: float, balanced: bool = True,
                    c1_fixed: Optional[float] = None, n_th: Optional[float] = None,
                    max_drive_photons: Optional[float] = None) -> DesignSolution:
    """Drives whose conversion FWHM Gamma_m (1 + C1 + C2) equals ``target_bw``."""
    gamma_m = params.mech.gamma_m
    if target_bw < gamma_m:
        raise InfeasibleTargetError(
            f"bandwidth {target_bw} Hz is below the intrinsic linewidth {gamma_m} Hz", achievable=gamma_m)
    c_total = target_bw / gamma_m - 1.0
    if balanced:
        c1 = c2 = 0.5 * c_total
    else:
        if c1_fixed is None:
            raise ParameterDomainError("c1_fixed", None, "an unbalanced split needs a fixed C1")
        if c1_fixed > c_total:
            raise InfeasibleTargetError(
                f"fixed C1={c1_fixed} alone exceeds the required C1+C2={c_total}",
                achievable=gamma_m * (1.0 + c1_fixed))
        c1, c2 = c1_fixed, c_total - c1_fixed
    logger.info(f"Bandwidth {target_bw:.6g} Hz needs C1+C2={c_total:.6g}")
    return _solution(params, c1, c2, n_th, max_drive_photons)


def solve_transmission(params: ConverterParams, target_t_sq: float, n_th: Optional[float] = None,
                       max_drive_photons: Optional[float] = None) -> DesignSolution:
    """Balanced drives reaching an on-resonance transmission ``target_t_sq``."""
    ceiling = params.cavity1.eta * params.cavity2.eta
    if not target_t_sq > 0:
        raise ParameterDomainError("target_t_sq", target_t_sq, "must be positive")
    ratio = math.sqrt(target_t_sq / ceiling) if ceiling > 0 else math.inf
    if ratio >= 1.0:
        raise InfeasibleTargetError(
            f"transmission {target_t_sq} is not reachable; eta1*eta2={ceiling} bounds it from above",
            achievable=ceiling)
    c_total = ratio / (1.0 - ratio)
    return _solution(params, 0.5 * c_total, 0.5 * c_total, n_th, max_drive_photons)


def max_split_transmission(params: ConverterParams, c1_fixed: float) -> float:
    """Largest |t|^2 reachable by tuning C2 at fixed C1 (attained at C2 = 1 + C1)."""
    return params.cavity1.eta * params.cavity2.eta * c1_fixed / (1.0 + c1_fixed)


def solve_split(params: ConverterParams, c1_fixed: float, target_t_sq: float, n_th: Optional[float] = None,
                max_drive_photons: Optional[float] = None) -> List[DesignSolution]:
    """C2 values giving |t|^2 = ``target_t_sq`` at fixed C1.

    Solves T (1 + C1 + C2)^2 = 4 eta1 eta2 C1 C2, a quadratic in C2 whose roots
    multiply to (1 + C1)^2 and so straddle the maximizer C2 = 1 + C1.

    Returns:
        two solutions flagged "lesser"/"greater", or one flagged "double" at tangency
    """
    if not c1_fixed > 0:
        raise ParameterDomainError("c1_fixed", c1_fixed, "must be positive")
    if not target_t_sq > 0:
        raise ParameterDomainError("target_t_sq", target_t_sq, "must be positive")
    best = max_split_transmission(params, c1_fixed)
    if target_t_sq > best * (1.0 + 1e-12):
        raise InfeasibleTargetError(
            f"transmission {target_t_sq} exceeds the maximum {best:.6g} reachable at C1={c1_fixed}",
            achievable=best)

    a = 1.0 + c1_fixed
    k = 4.0 * params.cavity1.eta * params.cavity2.eta * c1_fixed
    discriminant = k * (k - 4.0 * target_t_sq * a)
    # Tangent within rounding counts as a single root
    if discriminant <= 1e-12 * k * k:
        return [_solution(params, c1_fixed, a, n_th, max_drive_photons, branch="double")]
    greater = ((k - 2.0 * target_t_sq * a) + math.sqrt(discriminant)) / (2.0 * target_t_sq)
    lesser = a * a / greater
    logger.info(f"Split |t|^2={target_t_sq} at C1={c1_fixed}: C2/C1 in "
                f"{{{lesser / c1_fixed:.6g}, {greater / c1_fixed:.6g}}}")
    return [
        _solution(params, c1_fixed, lesser, n_th, max_drive_photons, branch="lesser"),
        _solution(params, c1_fixed, greater, n_th, max_drive_photons, branch="greater"),
    ]


def solve(params: ConverterParams, target: DesignTarget) -> List[DesignSolution]:
    """Dispatch a design target to its solver."""
    device = params.with_eta(target.eta1, target.eta2)
    if target.objective == "bandwidth_hz":
        return [solve_bandwidth(device, target.bandwidth_hz, balanced=target.c1_fixed is None,
                                c1_fixed=target.c1_fixed, n_th=target.n_th,
                                max_drive_photons=target.max_drive_photons)]
    if target.objective == "transmission_sq":
        return [solve_transmission(device, target.transmission_sq, n_th=target.n_th,
                                   max_drive_photons=target.max_drive_photons)]
    return solve_split(device, target.c1_fixed, target.split_t_sq, n_th=target.n_th,
                       max_drive_photons=target.max_drive_photons)
