"""Device and drive descriptions for a two-cavity, one-mechanical-mode converter.

All frequencies and rates are cyclic (Hz), i.e. the ``/2pi`` values quoted for a
device. Angular conversions happen only inside the scattering model.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import DataFileError, InfeasibleDriveError, ParameterDomainError

logger = logging.getLogger(__name__)

# Weak coupling holds while Gamma_i <= kappa_i / WEAK_COUPLING_RATIO.
WEAK_COUPLING_RATIO = 10.0

CAVITY_KEYS = ("f_c_hz", "kappa_hz", "eta", "g0_hz", "t_noise_k")
MECH_KEYS = ("f_m_hz", "gamma_m_hz", "n_th")
DRIVE_KEYS = ("n1", "n2")


def _require(condition: bool, name: str, value: Any, message: str) -> None:
    if not condition:
        raise ParameterDomainError(name, value, message)


def _finite(value: float) -> bool:
    return isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value)


@dataclass(frozen=True)
class CavityParams:
    """One microwave cavity seen from the shared measurement port."""
    f_c: float
    kappa: float
    eta: float
    g0: float
    t_noise: Optional[float] = None

    def __post_init__(self):
        _require(_finite(self.f_c) and self.f_c > 0, "f_c", self.f_c, "must be a positive frequency")
        _require(_finite(self.kappa) and self.kappa > 0, "kappa", self.kappa, "must be a positive linewidth")
        _require(_finite(self.eta) and 0.0 <= self.eta <= 1.0, "eta", self.eta, "must lie in [0, 1]")
        _require(_finite(self.g0) and self.g0 >= 0, "g0", self.g0, "must be non-negative")
        if self.t_noise is not None:
            _require(_finite(self.t_noise) and self.t_noise > 0, "t_noise", self.t_noise,
                     "must be a positive temperature")

    @property
    def kappa_ext(self) -> float:
        return self.eta * self.kappa

    @property
    def kappa_int(self) -> float:
        return (1.0 - self.eta) * self.kappa


@dataclass(frozen=True)
class MechanicalParams:
    """The mechanical mode mediating the conversion."""
    f_m: float
    gamma_m: float
    n_th: float = 0.0

    def __post_init__(self):
        _require(_finite(self.f_m) and self.f_m > 0, "f_m", self.f_m, "must be a positive frequency")
        _require(_finite(self.gamma_m) and self.gamma_m > 0, "gamma_m", self.gamma_m,
                 "must be a positive relaxation rate")
        _require(_finite(self.n_th) and self.n_th >= 0, "n_th", self.n_th, "must be non-negative")


@dataclass(frozen=True)
class ConverterParams:
    """Static device description: two cavities sharing one mechanical mode."""
    cavity1: CavityParams
    cavity2: CavityParams
    mech: MechanicalParams

    def __post_init__(self):
        separation = abs(self.cavity1.f_c - self.cavity2.f_c)
        widest = max(self.cavity1.kappa, self.cavity2.kappa)
        _require(separation > widest, "f_c", (self.cavity1.f_c, self.cavity2.f_c),
                 f"cavities must be separated by more than their linewidths ({widest} Hz)")

    def cavity(self, which: int) -> CavityParams:
        if which == 1:
            return self.cavity1
        if which == 2:
            return self.cavity2
        raise ParameterDomainError("which_cavity", which, "must be 1 or 2")

    def with_eta(self, eta1: Optional[float] = None, eta2: Optional[float] = None) -> "ConverterParams":
        """Copy with coupling efficiencies replaced for one operating point."""
        cavity1 = self.cavity1 if eta1 is None else replace(self.cavity1, eta=eta1)
        cavity2 = self.cavity2 if eta2 is None else replace(self.cavity2, eta=eta2)
        return replace(self, cavity1=cavity1, cavity2=cavity2)

    def with_n_th(self, n_th: float) -> "ConverterParams":
        return replace(self, mech=replace(self.mech, n_th=n_th))

    def swapped(self) -> "ConverterParams":
        """Copy with the cavity labels exchanged."""
        return replace(self, cavity1=self.cavity2, cavity2=self.cavity1)


@dataclass(frozen=True)
class DriveConfig:
    """Intracavity photon numbers of the two lower-sideband drives."""
    n1: float = 0.0
    n2: float = 0.0

    def __post_init__(self):
        _require(_finite(self.n1) and self.n1 >= 0, "n1", self.n1, "must be non-negative")
        _require(_finite(self.n2) and self.n2 >= 0, "n2", self.n2, "must be non-negative")

    def swapped(self) -> "DriveConfig":
        return DriveConfig(n1=self.n2, n2=self.n1)


@dataclass(frozen=True)
class DerivedRates:
    """Everything that follows from a device plus its drives."""
    g1_eff: float
    g2_eff: float
    gamma1: float
    gamma2: float
    c1: float
    c2: float
    gamma_total: float
    f_drive1: float
    f_drive2: float
    n_m: float
    kappa1: float
    kappa2: float
    gamma_m: float
    n_th: float

    @property
    def c_total(self) -> float:
        return self.c1 + self.c2

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class RegimeReport:
    """Validity flags for the resolved-sideband, weak-coupling description."""
    sideband_resolved: Tuple[bool, bool]
    weak_coupling: Tuple[bool, bool]
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(self.sideband_resolved) and all(self.weak_coupling)


class EtaTable:
    """Coupling efficiency versus drive power, interpolated linearly.

    Powers outside the table are clamped to the end values.
    """

    def __init__(self, powers_w: Sequence[float], etas: Sequence[float]):
        powers = np.asarray(powers_w, dtype=float)
        values = np.asarray(etas, dtype=float)
        if powers.ndim != 1 or powers.shape != values.shape or powers.size == 0:
            raise ParameterDomainError("etas", etas, "table needs matching, non-empty columns")
        if np.any(np.diff(powers) <= 0):
            raise ParameterDomainError("powers_w", powers_w, "must be strictly increasing")
        if np.any((values < 0) | (values > 1)):
            raise ParameterDomainError("etas", etas, "must lie in [0, 1]")
        self.powers_w = powers
        self.etas = values

    def eta_at(self, power_w: float) -> float:
        return float(np.interp(power_w, self.powers_w, self.etas))


def derive_rates(params: ConverterParams, drive: DriveConfig) -> DerivedRates:
    """Compute scattering rates, cooperativities and bandwidth for a drive setting.

    Uses the resolved-sideband relation Gamma_i = 4 g0_i^2 n_i / kappa_i.
    """
    c1, c2, mech = params.cavity1, params.cavity2, params.mech
    g1_sq = c1.g0 ** 2 * drive.n1
    g2_sq = c2.g0 ** 2 * drive.n2
    gamma1 = 4.0 * g1_sq / c1.kappa
    gamma2 = 4.0 * g2_sq / c2.kappa
    coop1 = gamma1 / mech.gamma_m
    coop2 = gamma2 / mech.gamma_m
    return DerivedRates(
        g1_eff=math.sqrt(g1_sq),
        g2_eff=math.sqrt(g2_sq),
        gamma1=gamma1,
        gamma2=gamma2,
        c1=coop1,
        c2=coop2,
        gamma_total=mech.gamma_m + gamma1 + gamma2,
        f_drive1=c1.f_c - mech.f_m,
        f_drive2=c2.f_c - mech.f_m,
        n_m=mech.n_th / (1.0 + coop1 + coop2),
        kappa1=c1.kappa,
        kappa2=c2.kappa,
        gamma_m=mech.gamma_m,
        n_th=mech.n_th,
    )


def drive_for_cooperativity(params: ConverterParams, c1: float, c2: float) -> DriveConfig:
    """Intracavity photon numbers realizing the requested cooperativities."""
    photons = []
    for name, coop, cavity in (("C1", c1, params.cavity1), ("C2", c2, params.cavity2)):
        _require(_finite(coop) and coop >= 0, name, coop, "cooperativity must be non-negative")
        if coop == 0:
            photons.append(0.0)
            continue
        if cavity.g0 == 0:
            raise InfeasibleDriveError(f"{name}={coop} requested but g0 of that cavity is zero")
        photons.append(coop * params.mech.gamma_m * cavity.kappa / (4.0 * cavity.g0 ** 2))
    return DriveConfig(n1=photons[0], n2=photons[1])


def check_regime(params: ConverterParams, rates: DerivedRates) -> RegimeReport:
    """Flag departures from the resolved-sideband and weak-coupling limits."""
    warnings = []
    resolved = []
    weak = []
    for index, cavity, gamma in ((1, params.cavity1, rates.gamma1), (2, params.cavity2, rates.gamma2)):
        is_resolved = cavity.kappa < params.mech.f_m
        is_weak = gamma <= cavity.kappa / WEAK_COUPLING_RATIO
        resolved.append(is_resolved)
        weak.append(is_weak)
        if not is_resolved:
            warnings.append(
                f"cavity {index}: kappa={cavity.kappa:.6g} Hz is not below f_m={params.mech.f_m:.6g} Hz; "
                "counter-rotating gain and noise are not modelled"
            )
        if not is_weak:
            warnings.append(
                f"cavity {index}: Gamma={gamma:.6g} Hz exceeds kappa/{WEAK_COUPLING_RATIO:g}; "
                "closed-form scattering no longer applies, use the full model"
            )
        if cavity.f_c - params.mech.f_m <= 0:
            warnings.append(f"cavity {index}: lower-sideband drive frequency is not positive")
    for message in warnings:
        logger.warning(message)
    return RegimeReport(sideband_resolved=tuple(resolved), weak_coupling=tuple(weak),
                        warnings=tuple(warnings))


def cavity_to_dict(cavity: CavityParams) -> Dict[str, Any]:
    return {
        "f_c_hz": cavity.f_c,
        "kappa_hz": cavity.kappa,
        "eta": cavity.eta,
        "g0_hz": cavity.g0,
        "t_noise_k": cavity.t_noise,
    }


def params_to_dict(params: ConverterParams) -> Dict[str, Any]:
    return {
        "cavity1": cavity_to_dict(params.cavity1),
        "cavity2": cavity_to_dict(params.cavity2),
        "mech": {
            "f_m_hz": params.mech.f_m,
            "gamma_m_hz": params.mech.gamma_m,
            "n_th": params.mech.n_th,
        },
    }


def drive_to_dict(drive: DriveConfig) -> Dict[str, float]:
    return {"n1": drive.n1, "n2": drive.n2}


def _check_keys(section: str, data: Dict[str, Any], allowed: Sequence[str], optional=()) -> None:
    if not isinstance(data, dict):
        raise DataFileError(f"section '{section}' must be a JSON object")
    unknown = set(data) - set(allowed)
    missing = set(allowed) - set(data) - set(optional)
    if unknown:
        raise DataFileError(f"section '{section}' has unknown keys: {sorted(unknown)}")
    if missing:
        raise DataFileError(f"section '{section}' is missing keys: {sorted(missing)}")


def cavity_from_dict(data: Dict[str, Any], section: str = "cavity") -> CavityParams:
    _check_keys(section, data, CAVITY_KEYS, optional=("t_noise_k",))
    return CavityParams(
        f_c=data["f_c_hz"],
        kappa=data["kappa_hz"],
        eta=data["eta"],
        g0=data["g0_hz"],
        t_noise=data.get("t_noise_k"),
    )


def params_from_dict(data: Dict[str, Any]) -> ConverterParams:
    _check_keys("device", {k: v for k, v in data.items() if k != "drive"}, ("cavity1", "cavity2", "mech"))
    mech = data["mech"]
    _check_keys("mech", mech, MECH_KEYS, optional=("n_th",))
    return ConverterParams(
        cavity1=cavity_from_dict(data["cavity1"], "cavity1"),
        cavity2=cavity_from_dict(data["cavity2"], "cavity2"),
        mech=MechanicalParams(f_m=mech["f_m_hz"], gamma_m=mech["gamma_m_hz"], n_th=mech.get("n_th", 0.0)),
    )


def drive_from_dict(data: Dict[str, Any]) -> DriveConfig:
    _check_keys("drive", data, DRIVE_KEYS)
    return DriveConfig(n1=data["n1"], n2=data["n2"])


def load_device(path) -> Tuple[ConverterParams, Optional[DriveConfig]]:
    """Read a device JSON file, optionally carrying a ``drive`` section.

    Raises:
        DataFileError: if the file cannot be read or parsed
        ParameterDomainError: if a value violates its domain
    """
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataFileError(f"Failed to read device file {path}: {e}") from e
    if not isinstance(data, dict):
        raise DataFileError(f"Device file {path} must hold a JSON object")
    params = params_from_dict(data)
    drive = drive_from_dict(data["drive"]) if "drive" in data else None
    logger.debug(f"Loaded device from {path}")
    return params, drive
