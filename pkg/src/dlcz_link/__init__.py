"""Simulator and analysis toolkit for single-excitation entanglement over a
two-node DLCZ memory link.

Layers:

* :mod:`dlcz_link.params` - parameter containers and unit conventions;
* :mod:`dlcz_link.model` - closed-form decay, dephasing, detection and
  concurrence formulas;
* :mod:`dlcz_link.stochastic` - a shot-by-shot Monte-Carlo engine that
  estimates the same quantities from simulated photon counts;
* :mod:`dlcz_link.analysis` - curve fitting, entanglement-lifetime root
  finding and the lifetime/link-efficiency table;
* :mod:`dlcz_link.cli` - the ``dlcz-link`` command-line entry point.
"""

from .params import (
    BOHR_MAGNETON_HZ_PER_G,
    DecayModel,
    EnsembleParams,
    ExponentialEfficiency,
    FromMotion,
    GaussianAmplitude,
    LinkConfig,
    ModeLabel,
    ModePair,
    MotionBroadeningParams,
    NoiseField,
    SpinWaveMode,
    Topology,
)

__version__ = "0.1.0"

__all__ = [
    "BOHR_MAGNETON_HZ_PER_G",
    "DecayModel",
    "EnsembleParams",
    "ExponentialEfficiency",
    "FromMotion",
    "GaussianAmplitude",
    "LinkConfig",
    "ModeLabel",
    "ModePair",
    "MotionBroadeningParams",
    "NoiseField",
    "SpinWaveMode",
    "Topology",
    "__version__",
]
