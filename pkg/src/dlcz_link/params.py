"""Parameter containers for the two-node spin-wave link simulator.

Unit conventions, used everywhere in this package:

* times in seconds,
* magnetic fields and field widths in Gauss,
* magnetic sensitivities in Hz/G (so 5 Hz/mG reads as 5000.0),
* wavevectors in rad/m, lengths in m, speeds in m/s,
* probabilities and efficiencies dimensionless in [0, 1].

Infinite lifetimes are represented by ``math.inf`` so that limiting cases
(no gradient, shared supply, clock transition) are exact rather than
approximated by large floats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import scipy.constants as _const

#: Bohr magneton over Planck constant in Hz/G: the magnetic sensitivity of a
#: |Delta m_F| = 2 ground-state alkali coherence.
BOHR_MAGNETON_HZ_PER_G = _const.physical_constants["Bohr magneton in Hz/T"][0] * 1e-4


class Topology(str, Enum):
    """How the two nodes' bias-coil supplies are wired."""

    #: one DC supply per node; field fluctuations are independent draws
    INDEPENDENT = "independent"
    #: coils of both nodes in series on one supply; fluctuations identical
    SHARED = "shared"


class ModeLabel(str, Enum):
    MFI = "mfi"  # magnetic-field-insensitive ("clock") transition
    MFS = "mfs"  # magnetic-field-sensitive transition


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name}: expected a probability in [0, 1], got {value}")


def _check_nonnegative(name: str, value: float) -> None:
    if not value >= 0.0:
        raise ValueError(f"{name}: expected a value >= 0, got {value}")


@dataclass(frozen=True)
class MotionBroadeningParams:
    """Inputs of the two inhomogeneous dephasing channels of a stored spin wave.

    ``delta_k`` is the spin-wave wavevector magnitude (write minus Stokes),
    ``v_s`` the RMS atomic speed along the spin-wave axis, ``cloud_length``
    the RMS cloud length, ``b_gradient`` the magnetic-field gradient along z
    and ``mu_prime`` the sensitivity of the storage transition.
    """

    delta_k: float = 0.0  # rad/m
    v_s: float = 0.0  # m/s
    cloud_length: float = 0.0  # m
    b_gradient: float = 0.0  # G/m
    mu_prime: float = 0.0  # Hz/G

    def __post_init__(self) -> None:
        for name in ("delta_k", "v_s", "cloud_length", "b_gradient", "mu_prime"):
            _check_nonnegative(name, getattr(self, name))


@dataclass(frozen=True)
class GaussianAmplitude:
    """Amplitude factor D(t) = exp(-t^2 / 2 tau_d^2)."""

    tau_d: float  # s

    def __post_init__(self) -> None:
        if not self.tau_d > 0.0:
            raise ValueError(f"tau_d: expected > 0, got {self.tau_d}")


@dataclass(frozen=True)
class ExponentialEfficiency:
    """Efficiency-law decay |D(t)|^2 = exp(-t / tau_d), i.e. D(t) = exp(-t / 2 tau_d).

    This is the empirical law measured for lattice-held and cold-cloud
    memories; the decay law is always an explicit configuration choice,
    never inferred from other parameters.
    """

    tau_d: float  # s

    def __post_init__(self) -> None:
        if not self.tau_d > 0.0:
            raise ValueError(f"tau_d: expected > 0, got {self.tau_d}")


@dataclass(frozen=True)
class FromMotion:
    """Gaussian decay with lifetimes derived from motion/gradient parameters."""

    motion: MotionBroadeningParams


#: One of the three decay-law variants accepted by the model operations.
DecayModel = GaussianAmplitude | ExponentialEfficiency | FromMotion


@dataclass(frozen=True)
class SpinWaveMode:
    """Magnetic character of a stored coherence.

    ``mu_prime`` is the stochastic-phase sensitivity in Hz/G; ``omega_0``
    the deterministic Larmor angular frequency under the bias field (kept
    for bookkeeping: the deterministic beat is folded into the scanned
    fringe phase, only the stochastic phase dephases).
    """

    mu_prime: float  # Hz/G
    omega_0: float = 0.0  # rad/s
    label: ModeLabel = ModeLabel.MFS

    def __post_init__(self) -> None:
        _check_nonnegative("mu_prime", self.mu_prime)

    @classmethod
    def mfi(cls, mu_prime: float = 0.0) -> "SpinWaveMode":
        """Clock-transition mode; exactly insensitive by default."""
        return cls(mu_prime=mu_prime, label=ModeLabel.MFI)

    @classmethod
    def mfs(cls, mu_prime: float = BOHR_MAGNETON_HZ_PER_G, bias_field: float = 0.0) -> "SpinWaveMode":
        """Field-sensitive mode, mu' = mu_B/h per unit field by default."""
        return cls(mu_prime=mu_prime, omega_0=2.0 * math.pi * mu_prime * bias_field, label=ModeLabel.MFS)


@dataclass(frozen=True)
class NoiseField:
    """Slow magnetic-field fluctuation (Lorentzian, shot-to-shot) at the nodes."""

    sigma_b: float  # G, Lorentzian half-width per node
    topology: Topology = Topology.INDEPENDENT

    def __post_init__(self) -> None:
        _check_nonnegative("sigma_b", self.sigma_b)
        if not isinstance(self.topology, Topology):
            object.__setattr__(self, "topology", Topology(self.topology))

    @property
    def sigma_delta(self) -> float:
        """Width of the inter-node field difference: 2 sigma_b, or 0 when shared."""
        if self.topology is Topology.SHARED:
            return 0.0
        return 2.0 * self.sigma_b


@dataclass(frozen=True)
class EnsembleParams:
    """Write/read parameters of one ensemble (or of one spin-wave mode).

    ``chi`` is the excitation probability per write pulse, ``gamma_0`` the
    zero-delay retrieval efficiency, ``xi_se`` the branching ratio of the
    read-photon transitions feeding the retrieval-noise channel, ``z_noise``
    the per-pulse background probability in the anti-Stokes channel and
    ``eta`` the detection efficiency per channel.
    """

    chi: float
    gamma_0: float
    decay: DecayModel
    xi_se: float = 0.0
    z_noise: float = 0.0
    eta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("chi", "gamma_0", "xi_se", "z_noise", "eta"):
            _check_probability(name, getattr(self, name))
        if self.chi > 0.1:
            warnings.warn(
                f"chi = {self.chi} is outside the chi << 1 regime the linear-order "
                "probability chain assumes",
                stacklevel=2,
            )


@dataclass(frozen=True)
class LinkConfig:
    """Two memory nodes plus everything the interferometric link needs.

    The measured-visibility contrast multipliers are ``zeta`` (mode overlap
    of the two interferometer arms) and ``xi_prime`` (empirical extra
    contrast loss, unity unless configured). ``residual_phase_jitter`` is
    the RMS of the unstabilized interferometer phase in rad (0 = perfectly
    stabilized write/read interferometers).
    """

    node_l: EnsembleParams
    node_r: EnsembleParams
    noise: NoiseField
    mode_l: SpinWaveMode
    mode_r: SpinWaveMode
    zeta: float = 1.0
    xi_prime: float = 1.0
    residual_phase_jitter: float = 0.0

    def __post_init__(self) -> None:
        for name in ("zeta", "xi_prime"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name}: expected a value in (0, 1], got {value}")
        _check_nonnegative("residual_phase_jitter", self.residual_phase_jitter)

    @classmethod
    def symmetric(
        cls,
        node: EnsembleParams,
        noise: NoiseField,
        mode: SpinWaveMode,
        zeta: float = 1.0,
        xi_prime: float = 1.0,
        residual_phase_jitter: float = 0.0,
    ) -> "LinkConfig":
        """The default symmetric link: identical nodes and storage modes."""
        return cls(
            node_l=node,
            node_r=node,
            noise=noise,
            mode_l=mode,
            mode_r=mode,
            zeta=zeta,
            xi_prime=xi_prime,
            residual_phase_jitter=residual_phase_jitter,
        )


@dataclass(frozen=True)
class ModePair:
    """Two spin-wave modes stored in a single ensemble (one shared field).

    Models the single-ensemble experiment where the entangled pair lives in
    two modes of the same cloud: per-mode write/read parameters, the mode
    magnetic characters and the single noise field they both see.
    """

    mfi: EnsembleParams
    mfs: EnsembleParams
    mode_mfi: SpinWaveMode
    mode_mfs: SpinWaveMode
    noise: NoiseField
    zeta: float = 1.0
    xi_prime: float = 1.0

    def __post_init__(self) -> None:
        for name in ("zeta", "xi_prime"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name}: expected a value in (0, 1], got {value}")
