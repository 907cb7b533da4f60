"""Parameter recovery from spectra and raw scattering magnitudes."""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import constants
from scipy.optimize import least_squares
from scipy.signal import savgol_filter
from scipy.stats import linregress

from .data_quality import SpectrumQuality
from .errors import FitConvergenceError, GridError, ParameterDomainError
from .model import CavityParams, DerivedRates, MechanicalParams
from .noise import NoiseSpectrum, bose_occupancy, lorentzian, lorentzian_area
from .scattering import scattering_on_resonance

logger = logging.getLogger(__name__)

FIT_PARAMETERS = ("center", "fwhm", "peak", "floor")
MAX_EVALUATIONS = 200
STEP_TOLERANCE = 1e-9
# Lower bound on the fitted linewidth, in grid steps.
MIN_FWHM_STEPS = 1e-6
# Allowed mismatch between a fitted width and the predicted Gamma_total.
WIDTH_TOLERANCE = 0.25


@dataclass(frozen=True)
class LorentzianFit:
    """Least-squares Lorentzian with its parameter covariance."""
    center: float
    fwhm: float
    peak: float
    floor: float
    residual_rms: float
    covariance: np.ndarray
    low_snr: bool = False
    converged: bool = True
    evaluations: int = 0

    @property
    def uncertainties(self) -> Dict[str, float]:
        sigma = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        return dict(zip(FIT_PARAMETERS, (float(s) for s in sigma)))

    def curve(self, deltas) -> np.ndarray:
        return lorentzian(deltas, self.center, self.fwhm, self.peak, self.floor)

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {}
        uncertainties = self.uncertainties
        for name in FIT_PARAMETERS:
            record[name] = getattr(self, name)
            record[f"{name}_uncertainty"] = uncertainties[name]
        record.update(residual_rms=self.residual_rms, low_snr=self.low_snr,
                      converged=self.converged, evaluations=self.evaluations)
        return record


@dataclass(frozen=True)
class BathEstimate:
    n_th: float
    n_m: float
    n_add: float
    referred_to: int
    warnings: Tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class LineCalibration:
    """Input-attenuation x output-gain products for each measured path."""
    alpha1_beta1: float
    alpha2_beta2: float
    alpha1_beta2: float
    alpha2_beta1: float
    t_sq: float

    @property
    def consistency_residual(self) -> float:
        """Relative mismatch of (a1b1)(a2b2) against (a1b2)(a2b1); zero for exact data."""
        direct = self.alpha1_beta1 * self.alpha2_beta2
        return abs(direct - self.alpha1_beta2 * self.alpha2_beta1) / direct


@dataclass(frozen=True)
class ThermometryReference:
    """Known drive and measurement-chain constants for a sideband-cooling series.

    Attributes:
        n_drive: intracavity photons of the cooling drive
        gain: measured power units per emitted photon/s at the reference plane
        bandwidth_hz: integration bandwidth of the measured sideband power
    """
    n_drive: float
    gain: float
    bandwidth_hz: float

    def __post_init__(self):
        for name in ("n_drive", "gain", "bandwidth_hz"):
            value = getattr(self, name)
            if not value > 0:
                raise ParameterDomainError(name, value, "must be positive")


@dataclass(frozen=True)
class ThermometryFit:
    slope: float
    intercept: float
    g0: float
    cooperativity: float
    floor_quanta: float
    noise_temperature: Optional[float]
    slope_stderr: float
    intercept_stderr: float


def _smoothed(values: np.ndarray) -> np.ndarray:
    """Savitzky-Golay smoothing for locating the line; short spectra pass through."""
    window = 2 * (values.size // 100) + 1
    if window < 5:
        return values
    return savgol_filter(values, window, 2)


def _initial_guess(deltas: np.ndarray, raw_values: np.ndarray,
                   smooth: bool = True) -> Tuple[float, float, float, float]:
    n = deltas.size
    values = _smoothed(raw_values) if smooth else raw_values
    quarter = max(1, n // 4)
    floor = float(np.median(np.concatenate([values[:quarter], values[-quarter:]])))
    index = int(np.argmax(values))
    peak = float(values[index] - floor)
    center = float(deltas[index])
    half = floor + 0.5 * peak

    def crossing(indices):
        previous = index
        for i in indices:
            if values[i] < half:
                # Linear interpolation between the last point above and the first below
                x0, x1 = deltas[previous], deltas[i]
                y0, y1 = values[previous], values[i]
                return x0 + (half - y0) * (x1 - x0) / (y1 - y0)
            previous = i
        return deltas[indices[-1]] if len(indices) else center

    left = crossing(list(range(index - 1, -1, -1)))
    right = crossing(list(range(index + 1, n)))
    return center, float(right - left), peak, floor


def fit_lorentzian(spectrum: NoiseSpectrum) -> LorentzianFit:
    """Fit floor + peak * (w/2)^2 / ((w/2)^2 + (delta - center)^2) to a spectrum.

    Trust-region least squares with an analytic Jacobian, on parameters scaled
    by their initial estimates. Converged when the relative step falls below
    1e-9, otherwise stops after 200 evaluations.

    Raises:
        GridError: if the grid is too short, holds non-finite bins,
            or does not resolve the line
        FitConvergenceError: if the fit does not converge and the line is
            clearly above the noise
    """
    deltas = np.asarray(spectrum.deltas, dtype=float)
    values = np.asarray(spectrum.values, dtype=float)
    stats = SpectrumQuality().check(deltas, values)
    step = stats["step"]
    if not np.all(np.isfinite(values)):
        raise GridError(f"spectrum has {int(np.count_nonzero(~np.isfinite(values)))} non-finite bins")

    # Smoothing blurs lines narrower than its window; start from whichever guess fits better
    guesses = [_initial_guess(deltas, values, smooth) for smooth in (True, False)]
    center0, fwhm0, peak0, floor0 = min(
        guesses, key=lambda g: float(np.sum((lorentzian(deltas, *g) - values) ** 2)))
    min_fwhm = MIN_FWHM_STEPS * step
    if not fwhm0 > 0:
        fwhm0 = step
    if stats["span"] < fwhm0:
        raise GridError(f"grid span {stats['span']:.6g} Hz is narrower than the line width {fwhm0:.6g} Hz")

    tiny = np.finfo(float).tiny
    y_scale = max(float(np.max(np.abs(values))), tiny)
    scale = np.array([
        fwhm0,
        fwhm0,
        max(abs(peak0), stats["noise_estimate"] or 0.0, 1e-12 * y_scale, tiny),
        max(abs(floor0), 1e-12 * y_scale, tiny),
    ])
    # Center is fitted as an offset from its initial estimate
    offset = np.array([center0, 0.0, 0.0, 0.0])
    x0 = (np.array([center0, fwhm0, peak0, floor0]) - offset) / scale
    lower = (np.array([deltas[0], min_fwhm, -np.inf, -np.inf]) - offset) / scale
    # The grid must span at least one linewidth
    upper = (np.array([deltas[-1], stats["span"], np.inf, np.inf]) - offset) / scale
    history: List[float] = []

    def residuals(x):
        center, fwhm, peak, floor = x * scale + offset
        r = (lorentzian(deltas, center, fwhm, peak, floor) - values) / y_scale
        history.append(float(np.sqrt(np.mean(r ** 2))) * y_scale)
        return r

    def jacobian(x):
        center, fwhm, peak, _ = x * scale + offset
        half = 0.5 * fwhm
        u = deltas - center
        denom = half ** 2 + u ** 2
        shape = half ** 2 / denom
        columns = np.column_stack([
            peak * half ** 2 * 2.0 * u / denom ** 2,
            peak * half * u ** 2 / denom ** 2,
            shape,
            np.ones_like(deltas),
        ])
        return columns * scale / y_scale

    result = least_squares(residuals, x0, jac=jacobian, bounds=(lower, upper), method="trf",
                           xtol=STEP_TOLERANCE, ftol=1e-15, gtol=1e-15, max_nfev=MAX_EVALUATIONS)
    center, fwhm, peak, floor = (float(v) for v in result.x * scale + offset)
    model_values = lorentzian(deltas, center, fwhm, peak, floor)
    residual_rms = float(np.sqrt(np.mean((model_values - values) ** 2)))

    dof = max(deltas.size - len(FIT_PARAMETERS), 1)
    jac = result.jac * y_scale / scale
    variance = float(np.sum((model_values - values) ** 2)) / dof
    covariance = np.linalg.pinv(jac.T @ jac) * variance

    low_snr = not peak > 2.0 * residual_rms
    converged = result.status > 0
    fit = LorentzianFit(center=center, fwhm=fwhm, peak=peak, floor=floor, residual_rms=residual_rms,
                        covariance=covariance, low_snr=low_snr, converged=converged,
                        evaluations=int(result.nfev))
    if fwhm < step:
        logger.warning(f"Fitted width {fwhm:.4g} Hz is narrower than the grid step {step:.4g} Hz")
    if low_snr:
        logger.warning(f"Fitted peak {peak:.4g} is within twice the per-bin noise {residual_rms:.4g}")
    if not converged:
        if not low_snr:
            raise FitConvergenceError(
                f"Lorentzian fit did not converge after {result.nfev} evaluations: {result.message}",
                best=fit, history=history)
        logger.warning("Lorentzian fit stopped without converging on a low-SNR spectrum")
    logger.debug(f"Fitted fwhm={fwhm:.6g} Hz peak={peak:.6g} floor={floor:.6g} in {result.nfev} evaluations")
    return fit


def infer_bath(fit: LorentzianFit, rates: DerivedRates, eta1: float, eta2: float,
               which_cavity: int = 1) -> BathEstimate:
    """Bath occupancy from the noise peak emitted by ``which_cavity``.

    The emitted peak is the added noise referred to the opposite input times
    |t(0)|^2, so n_th = (peak/|t|^2) * eta_j * C_j with j the opposite cavity.
    """
    if fit.peak < 0:
        raise ParameterDomainError("peak", fit.peak, "an emitted noise peak cannot be negative")
    if which_cavity not in (1, 2):
        raise ParameterDomainError("which_cavity", which_cavity, "must be 1 or 2")
    warnings = []
    if abs(fit.fwhm - rates.gamma_total) > WIDTH_TOLERANCE * rates.gamma_total:
        warnings.append(
            f"fitted width {fit.fwhm:.6g} Hz differs from Gamma_total {rates.gamma_total:.6g} Hz "
            f"by more than {WIDTH_TOLERANCE:.0%}"
        )
    for message in warnings:
        logger.warning(message)

    t_sq = scattering_on_resonance(rates, eta1, eta2).t_sq
    if t_sq == 0:
        raise ParameterDomainError("t_sq", t_sq, "no transmission to refer the noise through")
    referred_to = 2 if which_cavity == 1 else 1
    eta, coop = (eta2, rates.c2) if referred_to == 2 else (eta1, rates.c1)
    n_add = fit.peak / t_sq
    n_th = n_add * eta * coop
    return BathEstimate(n_th=n_th, n_m=n_th / (1.0 + rates.c1 + rates.c2), n_add=n_add,
                        referred_to=referred_to, warnings=tuple(warnings))


def self_calibrate(raw: Mapping[str, float]) -> LineCalibration:
    """Calibrate line attenuation and gain from off-resonant reflections and two-way transmission.

    Off-resonant reflections are taken as unity at the device plane, so
    R_i = alpha_i beta_i and T_ij = alpha_i beta_j |t|.

    Args:
        raw: amplitude magnitudes keyed R1_off, R2_off, T12, T21
    """
    values = {}
    for key in ("R1_off", "R2_off", "T12", "T21"):
        if key not in raw:
            raise ParameterDomainError(key, None, "raw calibration value missing")
        value = float(raw[key])
        if not (math.isfinite(value) and value > 0):
            raise ParameterDomainError(key, value, "must be a positive magnitude")
        values[key] = value
    r1, r2, t12, t21 = values["R1_off"], values["R2_off"], values["T12"], values["T21"]
    t_sq = (t12 * t21) / (r1 * r2)
    t_abs = math.sqrt(t_sq)
    return LineCalibration(alpha1_beta1=r1, alpha2_beta2=r2, alpha1_beta2=t12 / t_abs,
                           alpha2_beta1=t21 / t_abs, t_sq=t_sq)


def _sideband_area_per_quantum(cooperativity: float, eta: float, gamma_m: float) -> float:
    # Emitted Lorentzian area for unit bath occupancy with one drive: 2 pi eta Gamma_m C/(1+C)
    peak = 4.0 * eta * cooperativity / (1.0 + cooperativity) ** 2
    return lorentzian_area(peak, gamma_m * (1.0 + cooperativity))


def sideband_power(temperature: float, reference: ThermometryReference, mech: MechanicalParams,
                   cavity: CavityParams, floor_quanta: float = 0.0) -> float:
    """Integrated sideband power expected at a cryostat temperature, in measured units."""
    cooperativity = 4.0 * cavity.g0 ** 2 * reference.n_drive / (cavity.kappa * mech.gamma_m)
    area = _sideband_area_per_quantum(cooperativity, cavity.eta, mech.gamma_m)
    n_th = bose_occupancy(mech.f_m, temperature)
    return reference.gain * (area * n_th + floor_quanta * reference.bandwidth_hz)


def thermometry(points: Sequence[Tuple[float, float]], reference: ThermometryReference,
                mech: MechanicalParams, cavity: CavityParams) -> ThermometryFit:
    """Calibrate g0 and the noise floor from sideband power at several temperatures.

    Regresses integrated sideband power against the Bose occupancy of the
    mechanical mode. The slope fixes the cooperativity of the known drive,
    hence g0; the intercept fixes the measurement floor.
    """
    if len(points) < 3:
        raise GridError(f"thermometry needs at least 3 temperature points, got {len(points)}")
    temperatures = np.array([p[0] for p in points], dtype=float)
    powers = np.array([p[1] for p in points], dtype=float)
    if np.any(temperatures <= 0):
        raise ParameterDomainError("temperature", temperatures.min(), "must be positive")
    if temperatures.max() < 2.0 * temperatures.min():
        raise GridError("temperatures must span at least a factor of 2")

    occupancies = np.array([bose_occupancy(mech.f_m, t) for t in temperatures])
    regression = linregress(occupancies, powers)
    slope, intercept = float(regression.slope), float(regression.intercept)
    if not slope > 0:
        raise ParameterDomainError("slope", slope, "sideband power must grow with temperature")

    # Slope approaches gain * 2 pi eta Gamma_m as C grows without bound
    full_scale = reference.gain * 2.0 * math.pi * cavity.eta * mech.gamma_m
    ratio = slope / full_scale
    if not 0 < ratio < 1:
        raise ParameterDomainError("slope", slope, "implies a cooperativity outside the physical range")
    cooperativity = ratio / (1.0 - ratio)
    g0 = math.sqrt(cooperativity * cavity.kappa * mech.gamma_m / (4.0 * reference.n_drive))

    floor_quanta = intercept / (reference.gain * reference.bandwidth_hz)
    noise_temperature = None
    if floor_quanta > 0:
        noise_temperature = constants.h * cavity.f_c / (constants.k * math.log1p(1.0 / floor_quanta))
    logger.info(f"Thermometry: g0={g0:.6g} Hz, C={cooperativity:.6g}, floor={floor_quanta:.6g} quanta")
    return ThermometryFit(slope=slope, intercept=intercept, g0=g0, cooperativity=cooperativity,
                          floor_quanta=floor_quanta, noise_temperature=noise_temperature,
                          slope_stderr=float(regression.stderr),
                          intercept_stderr=float(regression.intercept_stderr))
