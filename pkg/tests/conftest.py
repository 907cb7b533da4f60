import json

import pytest

from optomech_converter.model import CavityParams, ConverterParams, MechanicalParams, params_to_dict


@pytest.fixture
def device():
    """Two-cavity device with one 14.98 MHz drum, as characterized at 30 mK."""
    return ConverterParams(
        cavity1=CavityParams(f_c=8.89e9, kappa=1.7e6, eta=0.96, g0=145.0, t_noise=9.5),
        cavity2=CavityParams(f_c=9.93e9, kappa=2.1e6, eta=0.99, g0=170.0, t_noise=10.5),
        mech=MechanicalParams(f_m=14.98e6, gamma_m=9.2, n_th=60.0),
    )


@pytest.fixture
def device_file(tmp_path, device):
    path = tmp_path / "device.json"
    path.write_text(json.dumps(params_to_dict(device), indent=2))
    return str(path)
