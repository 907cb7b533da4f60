
from .model import (CavityParams, MechanicalParams, ConverterParams, DriveConfig, DerivedRates,
                    RegimeReport, EtaTable, derive_rates, drive_for_cooperativity, check_regime, load_device)
from .scattering import (ScatteringPoint, ScatteringTrace, scattering_on_resonance, scattering_at,
                         trace, sweep_cooperativity, sweep_ratio)
from .noise import (NoiseSpectrum, AddedNoiseResult, SynthesisConfig, added_noise, output_noise_spectrum,
                    floor_from_noise_temperature, synthesize_spectrum)
from .estimation import (LorentzianFit, LineCalibration, ThermometryFit, ThermometryReference, fit_lorentzian,
                         infer_bath, self_calibrate, thermometry)
from .design import (DesignTarget, DesignSolution, solve_bandwidth, solve_split, solve_transmission,
                     drive_power, photon_flux, check_compression)
from .data_logger import DataLogger

__version__ = "0.1.0"

__all__ = [
    'CavityParams', 'MechanicalParams', 'ConverterParams', 'DriveConfig', 'DerivedRates', 'RegimeReport',
    'EtaTable', 'derive_rates', 'drive_for_cooperativity', 'check_regime', 'load_device',
    'ScatteringPoint', 'ScatteringTrace', 'scattering_on_resonance', 'scattering_at', 'trace',
    'sweep_cooperativity', 'sweep_ratio',
    'NoiseSpectrum', 'AddedNoiseResult', 'SynthesisConfig', 'added_noise', 'output_noise_spectrum',
    'floor_from_noise_temperature', 'synthesize_spectrum',
    'LorentzianFit', 'LineCalibration', 'ThermometryFit', 'ThermometryReference', 'fit_lorentzian',
    'infer_bath', 'self_calibrate', 'thermometry',
    'DesignTarget', 'DesignSolution', 'solve_bandwidth', 'solve_split', 'solve_transmission',
    'drive_power', 'photon_flux', 'check_compression',
    'DataLogger',
]
