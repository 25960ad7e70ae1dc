import numpy as np
import pytest

from dlcz_link import (
    EnsembleParams,
    ExponentialEfficiency,
    LinkConfig,
    ModePair,
    NoiseField,
    SpinWaveMode,
)


@pytest.fixture()
def lattice_node() -> EnsembleParams:
    """Lattice-memory node: gamma_0 = 76%, tau_d = 410 ms exponential."""
    return EnsembleParams(
        chi=0.005,
        gamma_0=0.76,
        decay=ExponentialEfficiency(tau_d=0.410),
        xi_se=0.26,
        z_noise=3.0e-4,
        eta=0.4,
    )


@pytest.fixture()
def clock_mode() -> SpinWaveMode:
    """Lattice clock coherence, mu' = 5 Hz/mG."""
    return SpinWaveMode(mu_prime=5000.0)


def link_at(node: EnsembleParams, mode: SpinWaveMode, sigma_b: float, **kw) -> LinkConfig:
    return LinkConfig.symmetric(node, NoiseField(sigma_b=sigma_b), mode, **kw)


@pytest.fixture()
def measured_pair() -> ModePair:
    """The measured single-ensemble parameter set (per-mode efficiencies)."""
    decay = ExponentialEfficiency(tau_d=1.0e-3)
    common = dict(chi=0.005, xi_se=0.26, eta=0.4, decay=decay)
    return ModePair(
        mfi=EnsembleParams(gamma_0=0.22, z_noise=3.1e-4, **common),
        mfs=EnsembleParams(gamma_0=0.17, z_noise=3.3e-4, **common),
        mode_mfi=SpinWaveMode.mfi(),
        mode_mfs=SpinWaveMode.mfs(),
        noise=NoiseField(sigma_b=2.25e-3),
        zeta=0.85,
        xi_prime=0.88,
    )


def assert_within_se(value: float, expected: float, std_error: float, n_se: float = 3.0) -> None:
    assert abs(value - expected) <= n_se * std_error, (
        f"{value} vs {expected}: off by {abs(value - expected) / std_error:.2f} SE"
    )
