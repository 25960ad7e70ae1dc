"""Shot-by-shot Monte-Carlo engine for the heralded-entanglement protocols.

The engine simulates the write/herald/store/read cycle trial by trial and
estimates visibility, cross-correlation, conditional pair probabilities and
concurrence from the resulting counts. It is deliberately independent of
the closed-form layer in :mod:`dlcz_link.model`: the only physics it shares
are the per-trial ingredient probabilities (thermal pair statistics
truncated at two pairs per node, retrieval/noise/background channels,
Lorentzian field samples), so the two layers cross-check each other.

Randomness is counter-based: every trial owns a fixed 24-word block of a
Philox stream addressed by ``(seed, stream, trial_index)``. Results are
therefore bit-identical for a given seed no matter how trials are chunked,
scheduled or parallelized; accumulation is plain integer addition and is
order-independent.

Three measurement modes mirror the three detector configurations of the
experiment:

* fringe mode - both Stokes and anti-Stokes outputs mixed on beam
  splitters; conditional coincidences versus the scanned phase give V;
* pair-count mode - Stokes mixed (heralding), anti-Stokes per channel;
  conditional two-channel tallies give p_ij;
* correlation mode - nothing mixed; per-channel singles and coincidences
  give the cross-correlation g.

Only the heralded single-excitation component interferes coherently;
multi-pair components, retrieval noise and backgrounds pick beam-splitter
ports at random (phase-incoherent, additive), and the retrieval-noise
channel fires per node with the trial-averaged probability
chi (1 - gamma(t)) xi_se, uncorrelated with the herald.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from . import model
from .params import EnsembleParams, LinkConfig, ModePair, NoiseField, SpinWaveMode, Topology

__all__ = [
    "WORDS_PER_TRIAL",
    "TrialRandomness",
    "TrialOutcome",
    "ThetaBin",
    "PairCounts",
    "ChannelTallies",
    "CountsRecord",
    "VisibilityEstimate",
    "CorrelationEstimate",
    "CountsStatistics",
    "trial_uniforms",
    "lorentzian_from_uniform",
    "sample_lorentzian",
    "sample_link_phases",
    "run_link_trial",
    "run_single_ensemble_trial",
    "simulate_link_fringe",
    "simulate_link_pairs",
    "simulate_link_correlation",
    "simulate_mode_pair_fringe",
    "simulate_mode_pair_pairs",
    "simulate_mode_pair_correlation",
    "merge_counts",
    "estimate_visibility",
    "estimate_cross_correlation",
    "estimate_statistics",
    "mc_phase_average",
    "default_thetas",
]

#: Fixed randomness budget per trial, in 64-bit words (multiple of the
#: Philox 4-word counter block so chunk boundaries stay aligned).
WORDS_PER_TRIAL = 24

# column map of a trial's uniform block
_COL_N_A = 0
_COL_N_B = 1
_COL_STOKES_A = (2, 3)
_COL_STOKES_B = (4, 5)
_COL_FIELD_A = 6
_COL_FIELD_B = 7
_COL_COHERENT = 8
_COL_RETRIEVE_A = (9, 10)
_COL_RETRIEVE_B = (11, 12)
_COL_PORT_A = (13, 14)
_COL_PORT_B = (15, 16)
_COL_SE_A = 17
_COL_SE_B = 18
_COL_BG_A = 19
_COL_BG_B = 20
_COL_JITTER = 21

# stream ids: distinct Philox keys per measurement purpose
STREAM_FRINGE = 0
STREAM_PAIRS = 1
STREAM_CORRELATION = 2
STREAM_PHASE = 3

_MASK64 = (1 << 64) - 1
_DEFAULT_CHUNK = 1 << 18


def trial_uniforms(seed: int, start: int, count: int, stream: int = STREAM_FRINGE) -> np.ndarray:
    """Uniform block for trials [start, start+count), shape (count, 24).

    Row i is a pure function of (seed, stream, start + i): the Philox
    counter is advanced to the trial's block, so any chunking reproduces
    the same rows bit for bit.
    """
    if start < 0 or count < 0:
        raise ValueError("start and count must be >= 0")
    key = ((stream & _MASK64) << 64) | (seed & _MASK64)
    bitgen = np.random.Philox(key=key)
    if start:
        bitgen = bitgen.advance(start * (WORDS_PER_TRIAL // 4))
    gen = np.random.Generator(bitgen)
    return gen.random(count * WORDS_PER_TRIAL).reshape(count, WORDS_PER_TRIAL)


@dataclass(frozen=True)
class TrialRandomness:
    """Address of one trial's random stream; results depend only on this."""

    seed: int
    trial_index: int
    stream: int = STREAM_FRINGE

    def __post_init__(self) -> None:
        if self.trial_index < 0:
            raise ValueError("trial_index must be >= 0")

    def uniforms(self) -> np.ndarray:
        return trial_uniforms(self.seed, self.trial_index, 1, self.stream)[0]


@dataclass(frozen=True)
class TrialOutcome:
    """What one fringe-mode trial produced.

    ``herald_port`` is "s1"/"s2" or None; ``as_clicks`` are the detector
    flags (D_aS1, D_aS2), reported only for heralded trials; ``excitations``
    the sampled pair counts per node (0..2 each, thermal truncation).
    """

    heralded: bool
    herald_port: str | None
    as_clicks: tuple[bool, bool]
    excitations: tuple[int, int]


@dataclass(frozen=True)
class _ArmPhysics:
    """One retrieval channel at a fixed storage time."""

    chi: float
    gamma: float
    xi_se: float
    z_noise: float
    eta: float
    mu_prime: float

    @property
    def se_noise(self) -> float:
        # trial-averaged retrieval-noise emission probability, additive per node
        return self.chi * (1.0 - self.gamma) * self.xi_se


def _arm(node: EnsembleParams, mode: SpinWaveMode, t: float) -> _ArmPhysics:
    gamma = float(model.retrieval_efficiency(node.gamma_0, node.decay, t))
    return _ArmPhysics(
        chi=node.chi,
        gamma=gamma,
        xi_se=node.xi_se,
        z_noise=node.z_noise,
        eta=node.eta,
        mu_prime=mode.mu_prime,
    )


@dataclass(frozen=True)
class _Protocol:
    """Fully evaluated two-arm trial description at one storage time."""

    arm_a: _ArmPhysics
    arm_b: _ArmPhysics
    sigma_b: float
    shared_field: bool
    time: float
    contrast: float  # fringe-contrast multiplier (zeta, xi' where applicable)
    jitter_rms: float  # rad


def _link_protocol(cfg: LinkConfig, t: float) -> _Protocol:
    if t < 0.0:
        raise ValueError("storage time t must be >= 0")
    contrast = cfg.zeta * cfg.xi_prime
    return _Protocol(
        arm_a=_arm(cfg.node_l, cfg.mode_l, t),
        arm_b=_arm(cfg.node_r, cfg.mode_r, t),
        sigma_b=cfg.noise.sigma_b,
        shared_field=cfg.noise.topology is Topology.SHARED,
        time=t,
        contrast=contrast,
        jitter_rms=cfg.residual_phase_jitter,
    )


def _mode_pair_protocol(pair: ModePair, t: float) -> _Protocol:
    if t < 0.0:
        raise ValueError("storage time t must be >= 0")
    mixed = pair.mode_mfi.label != pair.mode_mfs.label
    contrast = pair.zeta * (pair.xi_prime if mixed else 1.0)
    # one ensemble: both modes always see the same field sample
    return _Protocol(
        arm_a=_arm(pair.mfi, pair.mode_mfi, t),
        arm_b=_arm(pair.mfs, pair.mode_mfs, t),
        sigma_b=pair.noise.sigma_b,
        shared_field=True,
        time=t,
        contrast=contrast,
        jitter_rms=0.0,
    )


# ---------------------------------------------------------------------------
# vectorized trial kernels


def lorentzian_from_uniform(sigma: float, u):
    """Quantile transform: sigma * tan(pi (u - 1/2)) for u uniform in (0, 1)."""
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return np.zeros_like(u) if isinstance(u, np.ndarray) else 0.0
    return sigma * np.tan(np.pi * (np.asarray(u) - 0.5)) if isinstance(u, np.ndarray) else sigma * math.tan(
        math.pi * (u - 0.5)
    )


def _thermal_counts(u: np.ndarray, chi: float) -> np.ndarray:
    """Pair number per trial: P(n) proportional to chi^n, truncated at n = 2."""
    norm = 1.0 + chi + chi * chi
    p0 = 1.0 / norm
    p1 = p0 + chi / norm
    return (u >= p0).astype(np.int8) + (u >= p1).astype(np.int8)


def _stokes_ports(u: np.ndarray, n: np.ndarray, cols: tuple[int, int], eta: float):
    """Per-arm Stokes clicks behind the 50/50 splitter (threshold detectors)."""
    half = 0.5 * eta
    s1 = np.zeros(n.shape, dtype=bool)
    s2 = np.zeros(n.shape, dtype=bool)
    for k, col in enumerate(cols):
        exists = n > k
        uu = u[:, col]
        s1 |= exists & (uu < half)
        s2 |= exists & (uu >= half) & (uu < eta)
    return s1, s2


def _field_samples(u: np.ndarray, proto: _Protocol):
    """Lorentzian field offsets per arm; one shared draw when wired in series."""
    db_a = lorentzian_from_uniform(proto.sigma_b, u[:, _COL_FIELD_A])
    if proto.shared_field:
        return db_a, db_a
    return db_a, lorentzian_from_uniform(proto.sigma_b, u[:, _COL_FIELD_B])


def _noise_port_clicks(u: np.ndarray, col: int, emit_prob: float, eta: float):
    """Incoherent photon into the mixed output: (aS1 click, aS2 click)."""
    p_click = emit_prob * eta
    uu = u[:, col]
    return uu < 0.5 * p_click, (uu >= 0.5 * p_click) & (uu < p_click)


def _fringe_batch(proto: _Protocol, theta: np.ndarray, u: np.ndarray):
    """Interference-mode trials; returns herald flags and mixed-port clicks."""
    a, b = proto.arm_a, proto.arm_b
    if a.eta != b.eta:
        raise ValueError(
            "fringe mode shares detectors between arms; per-arm detection "
            "efficiencies must be equal"
        )
    eta = a.eta
    n_a = _thermal_counts(u[:, _COL_N_A], a.chi)
    n_b = _thermal_counts(u[:, _COL_N_B], b.chi)
    s1, s2 = _stokes_ports(u, n_a, _COL_STOKES_A, eta)
    s1_b, s2_b = _stokes_ports(u, n_b, _COL_STOKES_B, eta)
    s1 |= s1_b
    s2 |= s2_b
    heralded_any = s1 | s2

    db_a, db_b = _field_samples(u, proto)
    phase = 2.0 * np.pi * proto.time * (a.mu_prime * db_a - b.mu_prime * db_b) + theta
    if proto.jitter_rms > 0.0:
        phase = phase + proto.jitter_rms * ndtri(u[:, _COL_JITTER])

    total = n_a + n_b
    # only a heralded single excitation is projected onto the two-arm
    # superposition and interferes with itself; an unheralded one sits in a
    # definite arm and splits incoherently like every other photon
    coherent = heralded_any & (total == 1)
    incoherent = ~coherent
    sign = np.where(s1, 1.0, -1.0)
    w_a = a.chi * a.gamma
    w_b = b.chi * b.gamma
    w_sum = max(a.chi + b.chi, np.finfo(float).tiny)
    base = w_a + w_b
    cross = 2.0 * proto.contrast * math.sqrt(w_a * w_b)
    p1 = eta * (base + sign * cross * np.cos(phase)) / (2.0 * w_sum)
    p2 = eta * (base - sign * cross * np.cos(phase)) / (2.0 * w_sum)
    u_coh = u[:, _COL_COHERENT]
    click1 = coherent & (u_coh < p1)
    click2 = coherent & (u_coh >= p1) & (u_coh < p1 + p2)

    # every other retrieved photon picks a port at random
    for arm, n, rcols, pcols in (
        (a, n_a, _COL_RETRIEVE_A, _COL_PORT_A),
        (b, n_b, _COL_RETRIEVE_B, _COL_PORT_B),
    ):
        for k in range(2):
            retrieved = incoherent & (n > k) & (u[:, rcols[k]] < arm.gamma)
            up = u[:, pcols[k]]
            click1 |= retrieved & (up < 0.5 * eta)
            click2 |= retrieved & (up >= 0.5 * eta) & (up < eta)

    # additive noise channels (retrieval noise, background), phase-incoherent
    for col_se, col_bg, arm in ((_COL_SE_A, _COL_BG_A, a), (_COL_SE_B, _COL_BG_B, b)):
        se1, se2 = _noise_port_clicks(u, col_se, arm.se_noise, eta)
        bg1, bg2 = _noise_port_clicks(u, col_bg, arm.z_noise, eta)
        click1 |= se1 | bg1
        click2 |= se2 | bg2

    return s1, s2, click1, click2, n_a, n_b


def _channel_clicks(proto: _Protocol, u: np.ndarray):
    """Per-channel anti-Stokes clicks (no output mixing): which-node is definite."""
    clicks = []
    for arm, ncol, rcols, pcols, col_se, col_bg in (
        (proto.arm_a, _COL_N_A, _COL_RETRIEVE_A, _COL_PORT_A, _COL_SE_A, _COL_BG_A),
        (proto.arm_b, _COL_N_B, _COL_RETRIEVE_B, _COL_PORT_B, _COL_SE_B, _COL_BG_B),
    ):
        n = _thermal_counts(u[:, ncol], arm.chi)
        click = np.zeros(n.shape, dtype=bool)
        for k in range(2):
            click |= (n > k) & (u[:, rcols[k]] < arm.gamma) & (u[:, pcols[k]] < arm.eta)
        click |= u[:, col_se] < arm.se_noise * arm.eta
        click |= u[:, col_bg] < arm.z_noise * arm.eta
        clicks.append((n, click))
    return clicks


def _pair_batch(proto: _Protocol, u: np.ndarray):
    """Pair-count mode: mixed Stokes herald, per-channel anti-Stokes clicks."""
    a, b = proto.arm_a, proto.arm_b
    if a.eta != b.eta:
        raise ValueError(
            "heralding shares the Stokes detectors between arms; per-arm "
            "detection efficiencies must be equal"
        )
    (n_a, click_a), (n_b, click_b) = _channel_clicks(proto, u)
    s1_a, _ = _stokes_ports(u, n_a, _COL_STOKES_A, a.eta)
    s1_b, _ = _stokes_ports(u, n_b, _COL_STOKES_B, b.eta)
    heralded = s1_a | s1_b
    return heralded, click_a, click_b


def _correlation_batch(proto: _Protocol, u: np.ndarray):
    """Correlation mode: per-channel Stokes and anti-Stokes clicks."""
    (n_a, as_a), (n_b, as_b) = _channel_clicks(proto, u)
    out = []
    for arm, n, cols, as_click in (
        (proto.arm_a, n_a, _COL_STOKES_A, as_a),
        (proto.arm_b, n_b, _COL_STOKES_B, as_b),
    ):
        s_click = np.zeros(n.shape, dtype=bool)
        for k, col in enumerate(cols):
            s_click |= (n > k) & (u[:, col] < arm.eta)
        out.append((s_click, as_click))
    return out


# ---------------------------------------------------------------------------
# single-trial operations (batch kernel at batch size one)


def run_link_trial(cfg: LinkConfig, t: float, theta: float, r: TrialRandomness) -> TrialOutcome:
    """One write/herald/read cycle of the two-node link at phase theta.

    Bit-identical to the corresponding row of any batched fringe run with
    the same seed: the trial consumes exactly its own uniform block.
    """
    proto = _link_protocol(cfg, t)
    return _single_trial(proto, theta, r)


def run_single_ensemble_trial(
    modes: tuple[SpinWaveMode, SpinWaveMode],
    p: EnsembleParams | tuple[EnsembleParams, EnsembleParams],
    noise: NoiseField,
    t: float,
    theta: float,
    r: TrialRandomness,
    zeta: float = 1.0,
    xi_prime: float = 1.0,
) -> TrialOutcome:
    """One trial of the single-ensemble protocol (two modes, one field sample).

    ``p`` may be a single parameter set shared by both modes or a pair
    (per-mode retrieval and background values). ``xi_prime`` is applied to
    the fringe contrast only when the two modes differ in label.
    """
    params = p if isinstance(p, tuple) else (p, p)
    pair = ModePair(
        mfi=params[0],
        mfs=params[1],
        mode_mfi=modes[0],
        mode_mfs=modes[1],
        noise=noise,
        zeta=zeta,
        xi_prime=xi_prime,
    )
    proto = _mode_pair_protocol(pair, t)
    return _single_trial(proto, theta, r)


def _single_trial(proto: _Protocol, theta: float, r: TrialRandomness) -> TrialOutcome:
    u = trial_uniforms(r.seed, r.trial_index, 1, r.stream)
    s1, s2, c1, c2, n_a, n_b = _fringe_batch(proto, np.asarray([float(theta)]), u)
    port = "s1" if s1[0] else ("s2" if s2[0] else None)
    heralded_any = bool(s1[0] or s2[0])
    return TrialOutcome(
        heralded=bool(s1[0]),
        herald_port=port,
        as_clicks=(bool(c1[0]) and heralded_any, bool(c2[0]) and heralded_any),
        excitations=(int(n_a[0]), int(n_b[0])),
    )


def sample_lorentzian(sigma: float, r: TrialRandomness) -> float:
    """One Lorentzian field offset sigma * tan(pi (u - 1/2)); 0 when sigma = 0.

    Samples are never truncated: downstream use is through bounded
    trigonometric functions, so the heavy tails are harmless.
    """
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return 0.0
    return float(lorentzian_from_uniform(sigma, float(r.uniforms()[_COL_FIELD_A])))


def sample_link_phases(cfg: LinkConfig, t: float, r: TrialRandomness) -> tuple[float, float]:
    """Per-trial stochastic phases (delta_phi_l, delta_phi_r) = 2 pi mu' dB t.

    A shared supply assigns the same field draw to both nodes, so the
    phases are exactly equal every trial; independent supplies draw two.
    Uses the same uniform columns as the full trial, so the phases match
    what ``run_link_trial`` saw for the same (seed, trial_index).
    """
    if t < 0.0:
        raise ValueError("storage time t must be >= 0")
    proto = _link_protocol(cfg, t)
    u = trial_uniforms(r.seed, r.trial_index, 1, r.stream)
    db_a, db_b = _field_samples(u, proto)
    phi_l = 2.0 * math.pi * proto.arm_a.mu_prime * float(db_a[0]) * t
    phi_r = 2.0 * math.pi * proto.arm_b.mu_prime * float(db_b[0]) * t
    return phi_l, phi_r


# ---------------------------------------------------------------------------
# counts containers


@dataclass(frozen=True)
class ThetaBin:
    """One fringe bin: scanned phase, coincidences and heralds behind them."""

    theta: float
    n_coincidence: int
    n_heralds: int


@dataclass(frozen=True)
class PairCounts:
    """Conditional (i, j) anti-Stokes tallies over the two retrieval channels."""

    n00: int
    n01: int
    n10: int
    n11: int

    @property
    def total(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11


@dataclass(frozen=True)
class ChannelTallies:
    """Unconditional per-channel tallies for the cross-correlation estimate."""

    n_pulses: int
    n_stokes: int
    n_anti_stokes: int
    n_coincidence: int


@dataclass
class CountsRecord:
    """Monte-Carlo tallies from which V, g, p_ij and C are estimated.

    ``theta_bins`` holds D_S1-heralded fringe tallies, ``theta_bins_alt``
    the D_S2-heralded ones (fringe flipped by pi). ``pij_counts`` are the
    conditional two-channel tallies over ``pair_trials`` trials with
    ``pair_heralds`` heralds, and ``correlation`` the per-channel tallies
    of the unmixed run.
    """

    n_trials: int = 0
    n_heralds: int = 0
    n_as1_clicks: int = 0  # unconditional D_aS1 clicks over the fringe trials
    theta_bins: list[ThetaBin] = field(default_factory=list)
    theta_bins_alt: list[ThetaBin] = field(default_factory=list)
    pair_trials: int = 0
    pair_heralds: int = 0
    pij_counts: PairCounts | None = None
    correlation_trials: int = 0
    correlation: tuple[ChannelTallies, ChannelTallies] | None = None

    def __post_init__(self) -> None:
        if self.n_heralds > self.n_trials:
            raise ValueError("herald count exceeds trial count")
        if self.theta_bins:
            if sum(b.n_heralds for b in self.theta_bins) != self.n_heralds:
                raise ValueError("per-bin herald counts must sum to n_heralds")
            for b in self.theta_bins + self.theta_bins_alt:
                if b.n_coincidence > b.n_heralds:
                    raise ValueError("bin has more coincidences than heralds")
        if self.pij_counts is not None and self.pij_counts.total != self.pair_heralds:
            raise ValueError("pair counts must partition the pair-mode heralds")


def merge_counts(a: CountsRecord, b: CountsRecord) -> CountsRecord:
    """Combine two records of the same layout (commutative integer adds)."""

    def _merge_bins(x: list[ThetaBin], y: list[ThetaBin]) -> list[ThetaBin]:
        if not x:
            return list(y)
        if not y:
            return list(x)
        if len(x) != len(y) or any(p.theta != q.theta for p, q in zip(x, y)):
            raise ValueError("theta grids differ; records cannot be merged")
        return [
            ThetaBin(p.theta, p.n_coincidence + q.n_coincidence, p.n_heralds + q.n_heralds)
            for p, q in zip(x, y)
        ]

    pij = None
    if a.pij_counts or b.pij_counts:
        pa = a.pij_counts or PairCounts(0, 0, 0, 0)
        pb = b.pij_counts or PairCounts(0, 0, 0, 0)
        pij = PairCounts(pa.n00 + pb.n00, pa.n01 + pb.n01, pa.n10 + pb.n10, pa.n11 + pb.n11)
    corr = None
    if a.correlation or b.correlation:
        ca = a.correlation or (ChannelTallies(0, 0, 0, 0), ChannelTallies(0, 0, 0, 0))
        cb = b.correlation or (ChannelTallies(0, 0, 0, 0), ChannelTallies(0, 0, 0, 0))
        corr = tuple(
            ChannelTallies(
                x.n_pulses + y.n_pulses,
                x.n_stokes + y.n_stokes,
                x.n_anti_stokes + y.n_anti_stokes,
                x.n_coincidence + y.n_coincidence,
            )
            for x, y in zip(ca, cb)
        )
    return CountsRecord(
        n_trials=a.n_trials + b.n_trials,
        n_heralds=a.n_heralds + b.n_heralds,
        n_as1_clicks=a.n_as1_clicks + b.n_as1_clicks,
        theta_bins=_merge_bins(a.theta_bins, b.theta_bins),
        theta_bins_alt=_merge_bins(a.theta_bins_alt, b.theta_bins_alt),
        pair_trials=a.pair_trials + b.pair_trials,
        pair_heralds=a.pair_heralds + b.pair_heralds,
        pij_counts=pij,
        correlation_trials=a.correlation_trials + b.correlation_trials,
        correlation=corr,
    )


def default_thetas(n: int = 12) -> np.ndarray:
    """n equally spaced fringe phases over [0, 2 pi)."""
    if n < 1:
        raise ValueError("need at least one theta bin")
    return np.arange(n) * (2.0 * np.pi / n)


# ---------------------------------------------------------------------------
# batch drivers


def _run_fringe(
    proto: _Protocol,
    thetas: np.ndarray,
    trials_per_theta: int,
    seed: int,
    chunk_size: int,
) -> CountsRecord:
    thetas = np.asarray(thetas, dtype=float)
    n_bins = thetas.size
    total = n_bins * trials_per_theta
    her = np.zeros(n_bins, dtype=np.int64)
    coin = np.zeros(n_bins, dtype=np.int64)
    her_alt = np.zeros(n_bins, dtype=np.int64)
    coin_alt = np.zeros(n_bins, dtype=np.int64)
    n_as1 = 0
    start = 0
    while start < total:
        count = min(chunk_size, total - start)
        u = trial_uniforms(seed, start, count, STREAM_FRINGE)
        idx = (np.arange(start, start + count) // trials_per_theta).astype(np.int64)
        s1, s2, c1, _c2, _na, _nb = _fringe_batch(proto, thetas[idx], u)
        n_as1 += int(c1.sum())
        # D_S2-only heralds give the phase-flipped fringe; kept disjoint from
        # the primary D_S1 tallies so the two estimates are independent
        alt = s2 & ~s1
        her += np.bincount(idx, weights=s1.astype(np.float64), minlength=n_bins).astype(np.int64)
        coin += np.bincount(idx, weights=(s1 & c1).astype(np.float64), minlength=n_bins).astype(np.int64)
        her_alt += np.bincount(idx, weights=alt.astype(np.float64), minlength=n_bins).astype(np.int64)
        coin_alt += np.bincount(idx, weights=(alt & c1).astype(np.float64), minlength=n_bins).astype(np.int64)
        start += count
    bins = [ThetaBin(float(th), int(c), int(h)) for th, c, h in zip(thetas, coin, her)]
    bins_alt = [ThetaBin(float(th), int(c), int(h)) for th, c, h in zip(thetas, coin_alt, her_alt)]
    return CountsRecord(
        n_trials=total,
        n_heralds=int(her.sum()),
        n_as1_clicks=n_as1,
        theta_bins=bins,
        theta_bins_alt=bins_alt,
    )


def _run_pairs(proto: _Protocol, trials: int, seed: int, chunk_size: int) -> CountsRecord:
    tallies = np.zeros(4, dtype=np.int64)  # 00, 01, 10, 11
    heralds = 0
    start = 0
    while start < trials:
        count = min(chunk_size, trials - start)
        u = trial_uniforms(seed, start, count, STREAM_PAIRS)
        heralded, click_a, click_b = _pair_batch(proto, u)
        heralds += int(heralded.sum())
        code = np.where(heralded, click_a.astype(np.int8) * 2 + click_b.astype(np.int8), -1)
        for j in range(4):
            tallies[j] += int(np.count_nonzero(code == j))
        start += count
    # channel a is the left node / MFI mode: index i of p_ij
    pij = PairCounts(n00=int(tallies[0]), n01=int(tallies[1]), n10=int(tallies[2]), n11=int(tallies[3]))
    return CountsRecord(pair_trials=trials, pair_heralds=heralds, pij_counts=pij)


def _run_correlation(proto: _Protocol, trials: int, seed: int, chunk_size: int) -> CountsRecord:
    sums = np.zeros((2, 3), dtype=np.int64)  # per channel: stokes, anti-stokes, coincidence
    start = 0
    while start < trials:
        count = min(chunk_size, trials - start)
        u = trial_uniforms(seed, start, count, STREAM_CORRELATION)
        for ch, (s_click, as_click) in enumerate(_correlation_batch(proto, u)):
            sums[ch] += (
                int(s_click.sum()),
                int(as_click.sum()),
                int((s_click & as_click).sum()),
            )
        start += count
    tallies = tuple(
        ChannelTallies(
            n_pulses=trials,
            n_stokes=int(sums[ch, 0]),
            n_anti_stokes=int(sums[ch, 1]),
            n_coincidence=int(sums[ch, 2]),
        )
        for ch in range(2)
    )
    return CountsRecord(correlation_trials=trials, correlation=tallies)


def simulate_link_fringe(
    cfg: LinkConfig,
    t: float,
    *,
    trials_per_theta: int,
    seed: int,
    thetas: np.ndarray | None = None,
    theta_points: int = 12,
    chunk_size: int = _DEFAULT_CHUNK,
) -> CountsRecord:
    """Fringe-mode run of the link protocol over a theta grid."""
    if trials_per_theta < 1:
        raise ValueError("trials_per_theta must be >= 1")
    th = default_thetas(theta_points) if thetas is None else np.asarray(thetas, dtype=float)
    return _run_fringe(_link_protocol(cfg, t), th, trials_per_theta, seed, chunk_size)


def simulate_link_pairs(
    cfg: LinkConfig, t: float, *, trials: int, seed: int, chunk_size: int = _DEFAULT_CHUNK
) -> CountsRecord:
    """Pair-count-mode run of the link protocol (conditional p_ij tallies)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return _run_pairs(_link_protocol(cfg, t), trials, seed, chunk_size)


def simulate_link_correlation(
    cfg: LinkConfig, t: float, *, trials: int, seed: int, chunk_size: int = _DEFAULT_CHUNK
) -> CountsRecord:
    """Correlation-mode run of the link protocol (per-channel g tallies)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return _run_correlation(_link_protocol(cfg, t), trials, seed, chunk_size)


def simulate_mode_pair_fringe(
    pair: ModePair,
    t: float,
    *,
    trials_per_theta: int,
    seed: int,
    thetas: np.ndarray | None = None,
    theta_points: int = 12,
    chunk_size: int = _DEFAULT_CHUNK,
) -> CountsRecord:
    """Fringe-mode run of the single-ensemble two-mode protocol."""
    if trials_per_theta < 1:
        raise ValueError("trials_per_theta must be >= 1")
    th = default_thetas(theta_points) if thetas is None else np.asarray(thetas, dtype=float)
    return _run_fringe(_mode_pair_protocol(pair, t), th, trials_per_theta, seed, chunk_size)


def simulate_mode_pair_pairs(
    pair: ModePair, t: float, *, trials: int, seed: int, chunk_size: int = _DEFAULT_CHUNK
) -> CountsRecord:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return _run_pairs(_mode_pair_protocol(pair, t), trials, seed, chunk_size)


def simulate_mode_pair_correlation(
    pair: ModePair, t: float, *, trials: int, seed: int, chunk_size: int = _DEFAULT_CHUNK
) -> CountsRecord:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return _run_correlation(_mode_pair_protocol(pair, t), trials, seed, chunk_size)


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class VisibilityEstimate:
    """Fringe visibility |B|/A of the fit A + B cos(theta), with its error."""

    value: float
    std_error: float
    offset: float
    amplitude: float


def estimate_visibility(
    counts: CountsRecord, *, port: str = "s1", method: str = "fit"
) -> VisibilityEstimate:
    """Visibility of the conditional coincidence fringe.

    The default estimator least-squares fits A + B cos(theta) to the
    per-bin conditional rates and returns V = |B|/A with the error
    propagated from per-bin binomial counting statistics (lower variance
    than the fringe extrema). ``method="extrema"`` gives the max/min
    cross-check estimator instead.
    """
    bins = counts.theta_bins if port == "s1" else counts.theta_bins_alt
    if port not in ("s1", "s2"):
        raise ValueError("port must be 's1' or 's2'")
    if len(bins) < 8:
        raise ValueError("need at least 8 theta bins spanning [0, 2 pi)")
    span = max(b.theta for b in bins) - min(b.theta for b in bins)
    if span < np.pi:
        raise ValueError("theta bins must span [0, 2 pi)")
    heralds = np.array([b.n_heralds for b in bins], dtype=float)
    if np.any(heralds == 0):
        raise ValueError("every theta bin needs a nonzero herald count")
    coinc = np.array([b.n_coincidence for b in bins], dtype=float)
    rates = coinc / heralds
    thetas = np.array([b.theta for b in bins], dtype=float)

    if method == "extrema":
        hi, lo = int(np.argmax(rates)), int(np.argmin(rates))
        a_r, b_r = rates[hi], rates[lo]
        if a_r + b_r == 0.0:
            raise ValueError("no coincidences recorded; visibility undefined")
        value = (a_r - b_r) / (a_r + b_r)
        var_hi = a_r * (1.0 - a_r) / heralds[hi]
        var_lo = b_r * (1.0 - b_r) / heralds[lo]
        dda = 2.0 * b_r / (a_r + b_r) ** 2
        ddb = 2.0 * a_r / (a_r + b_r) ** 2
        se = math.sqrt(dda**2 * var_hi + ddb**2 * var_lo)
        return VisibilityEstimate(value=value, std_error=se, offset=(a_r + b_r) / 2, amplitude=(a_r - b_r) / 2)
    if method != "fit":
        raise ValueError("method must be 'fit' or 'extrema'")

    design = np.column_stack([np.ones_like(thetas), np.cos(thetas)])
    beta, *_ = np.linalg.lstsq(design, rates, rcond=None)
    offset, amplitude = float(beta[0]), float(beta[1])
    if offset <= 0.0:
        raise ValueError("no coincidences recorded; visibility undefined")
    fitted = np.clip(design @ beta, 1e-12, 1.0 - 1e-12)
    var = fitted * (1.0 - fitted) / heralds
    gram_inv = np.linalg.inv(design.T @ design)
    cov = gram_inv @ (design.T * var) @ design @ gram_inv
    # deliberately unclipped: near V ~ 1 a [0, 1] clip would bias the
    # estimator low; consumers needing a physical visibility clip themselves
    value = abs(amplitude) / offset
    grad = np.array([-abs(amplitude) / offset**2, math.copysign(1.0, amplitude) / offset])
    se = float(np.sqrt(grad @ cov @ grad))
    return VisibilityEstimate(value=value, std_error=se, offset=offset, amplitude=amplitude)


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    std_error: float


def estimate_cross_correlation(counts: CountsRecord, channel: str = "both") -> CorrelationEstimate:
    """Cross-correlation g = P_coincidence / (P_stokes P_anti_stokes).

    ``channel`` selects one retrieval channel ("a"/"b") or pools both
    (valid for a symmetric link). The error treats the three tallies as
    independent Poisson counts, adequate in the rare-coincidence regime.
    """
    if counts.correlation is None:
        raise ValueError("record holds no correlation-mode tallies")
    ch_a, ch_b = counts.correlation
    if channel == "a":
        chans = [ch_a]
    elif channel == "b":
        chans = [ch_b]
    elif channel == "both":
        chans = [ch_a, ch_b]
    else:
        raise ValueError("channel must be 'a', 'b' or 'both'")
    pulses = sum(c.n_pulses for c in chans)
    n_s = sum(c.n_stokes for c in chans)
    n_as = sum(c.n_anti_stokes for c in chans)
    n_sas = sum(c.n_coincidence for c in chans)
    if n_s == 0 or n_as == 0 or n_sas == 0:
        raise ValueError("correlation tallies too sparse: zero singles or coincidences")
    g = n_sas * pulses / (n_s * n_as)
    se = g * math.sqrt(1.0 / n_sas + 1.0 / n_s + 1.0 / n_as)
    return CorrelationEstimate(value=float(g), std_error=float(se))


@dataclass(frozen=True)
class CountsStatistics:
    """Counts-derived estimates: g, conditional p_ij, visibility and concurrence."""

    g: float
    g_std_error: float
    p00: float
    p01: float
    p10: float
    p11: float
    pij_std_errors: tuple[float, float, float, float]
    visibility: VisibilityEstimate
    concurrence: float
    concurrence_std_error: float


def estimate_statistics(counts: CountsRecord) -> CountsStatistics:
    """All photon-counting estimates in one pass.

    p_ij are conditional on the herald (they partition it exactly), g comes
    from the correlation-mode singles and coincidences, the visibility from
    the fringe fit, and the concurrence feeds all of these into the
    photon-counting formula; its error combines the multinomial covariance
    of the p_ij with the visibility error.
    """
    if counts.pij_counts is None or counts.pair_heralds == 0:
        raise ValueError("record holds no heralded pair-count tallies")
    vis = estimate_visibility(counts)
    corr = estimate_cross_correlation(counts)
    n = counts.pair_heralds
    pij = counts.pij_counts
    p = np.array([pij.n00, pij.n01, pij.n10, pij.n11], dtype=float) / n
    p_se = tuple(float(x) for x in np.sqrt(p * (1.0 - p) / n))

    conc = model.concurrence_from_probs(p[0], p[1], p[2], p[3], min(vis.value, 1.0))
    # delta method: C = V(p01+p10) - 2 sqrt(p00 p11) for conditional (sum-1) probs
    root = math.sqrt(p[0] * p[3])
    if root > 0.0:
        grad = np.array([-p[3] / root, vis.value, vis.value, -p[0] / root])
    else:
        grad = np.array([0.0, vis.value, vis.value, 0.0])
    cov = (np.diag(p) - np.outer(p, p)) / n
    var = float(grad @ cov @ grad) + ((p[1] + p[2]) * vis.std_error) ** 2
    return CountsStatistics(
        g=corr.value,
        g_std_error=corr.std_error,
        p00=float(p[0]),
        p01=float(p[1]),
        p10=float(p[2]),
        p11=float(p[3]),
        pij_std_errors=p_se,
        visibility=vis,
        concurrence=conc,
        concurrence_std_error=math.sqrt(max(var, 0.0)),
    )


@dataclass(frozen=True)
class PhaseAverage:
    mean_cos: float
    std_error: float


def mc_phase_average(
    mu_prime: float, sigma: float, t: float, n: int, seed: int, chunk_size: int = _DEFAULT_CHUNK
) -> PhaseAverage:
    """Monte-Carlo estimate of <cos(2 pi mu' dB t)> over Lorentzian dB.

    The integrand is bounded, so the estimator has finite variance despite
    the heavy Cauchy tails; no truncation is applied.
    """
    if n < 1000:
        raise ValueError("need at least 1000 samples")
    if t < 0.0:
        raise ValueError("t must be >= 0")
    total = 0.0
    total_sq = 0.0
    start = 0
    while start < n:
        count = min(chunk_size, n - start)
        u = trial_uniforms(seed, start, count, STREAM_PHASE)[:, _COL_FIELD_A]
        db = lorentzian_from_uniform(sigma, u)
        c = np.cos(2.0 * np.pi * mu_prime * db * t)
        total += float(c.sum())
        total_sq += float((c * c).sum())
        start += count
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return PhaseAverage(mean_cos=mean, std_error=math.sqrt(var / n))
