"""Curve fitting, entanglement-lifetime root finding and the lifetime table.

Fits are damped least squares (scipy's Levenberg-Marquardt) restarted from
a coarse grid of initial guesses; decay rates are fitted as rates (1/tau)
so that flat data lands on the exact infinite-lifetime sentinel instead of
a large float.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, brentq, curve_fit

from . import model
from .params import LinkConfig, ModePair, NoiseField

__all__ = [
    "DecaySeries",
    "FitResult",
    "FitError",
    "fit_decay",
    "fit_cross_correlation",
    "fit_visibility_dephasing",
    "entanglement_lifetime",
    "mode_pair_lifetime",
    "link_efficiency",
    "Table1Row",
    "make_table1",
]


class FitError(RuntimeError):
    """A fit failed to converge or produced an unphysical parameter."""


def _exp(x):
    # keeps trial steps with absurd rates finite instead of overflowing
    return np.exp(np.clip(x, -700.0, 700.0))


@dataclass(frozen=True)
class DecaySeries:
    """Sampled decay curve: strictly increasing times, finite values."""

    times: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray | None = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if self.std_errors is not None:
            errs = np.asarray(self.std_errors, dtype=float)
            object.__setattr__(self, "std_errors", errs)
            if errs.shape != times.shape or np.any(errs < 0.0):
                raise ValueError("std_errors must match times and be >= 0")

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class FitResult:
    """Named best-fit parameters with their standard errors."""

    parameters: dict[str, float]
    std_errors: dict[str, float]
    residual_norm: float
    flags: tuple[str, ...] = ()


def _multistart_fit(
    fun: Callable,
    times: np.ndarray,
    values: np.ndarray,
    starts: Iterable[Sequence[float]],
    sigma: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Levenberg-Marquardt from several starting points; best residual wins."""
    best = None
    for p0 in starts:
        try:
            with warnings.catch_warnings():
                # exact data makes the covariance singular; expected here
                warnings.simplefilter("ignore", OptimizeWarning)
                popt, pcov = curve_fit(fun, times, values, p0=p0, sigma=sigma, maxfev=20000)
        except (RuntimeError, ValueError):
            continue
        resid = float(np.linalg.norm(fun(times, *popt) - values))
        if best is None or resid < best[2]:
            best = (popt, pcov, resid)
    if best is None:
        raise FitError("fit did not converge from any starting point")
    return best


def _rate_to_lifetime(rate: float, rate_err: float, t_span: float) -> tuple[float, float]:
    """Map a fitted decay rate to a lifetime; ~zero rates are the inf sentinel."""
    floor = 1e-9 / t_span
    if abs(rate) <= floor:
        return math.inf, math.inf
    if rate < 0.0:
        raise FitError(f"fitted a negative decay rate ({rate:.3g} 1/s): data grows with time")
    return 1.0 / rate, rate_err / rate**2


def fit_decay(series: DecaySeries, law: str = "exponential") -> FitResult:
    """Fit A e^{-t/tau} or A e^{-t^2/tau^2}; returns parameters A and tau.

    A constant series yields the exact tau = inf sentinel.
    """
    if len(series) < 3:
        raise ValueError("need at least 3 points to fit a decay")
    if law not in ("exponential", "gaussian"):
        raise ValueError("law must be 'exponential' or 'gaussian'")
    t, y = series.times, series.values
    t_span = float(t[-1] - t[0])

    if np.ptp(y) == 0.0:
        return FitResult(
            parameters={"amplitude": float(y[0]), "tau": math.inf},
            std_errors={"amplitude": 0.0, "tau": math.inf},
            residual_norm=0.0,
        )

    if law == "exponential":
        fun = lambda tt, a, r: a * _exp(-r * tt)  # noqa: E731
    else:
        fun = lambda tt, a, r: a * _exp(-((r * tt) ** 2))  # noqa: E731
    a0 = float(np.max(np.abs(y)))
    starts = [(a0, r) for r in np.geomspace(0.1 / t_span, 100.0 / t_span, 7)]
    popt, pcov, resid = _multistart_fit(fun, t, y, starts, series.std_errors)
    a_fit, rate = float(popt[0]), float(popt[1])
    errs = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    tau, tau_err = _rate_to_lifetime(rate, float(errs[1]), t_span)
    return FitResult(
        parameters={"amplitude": a_fit, "tau": tau},
        std_errors={"amplitude": float(errs[0]), "tau": tau_err},
        residual_norm=resid,
    )


def fit_cross_correlation(
    series: DecaySeries,
    gamma: np.ndarray | Callable[[np.ndarray], np.ndarray],
    chi: float,
    z_noise: float,
) -> FitResult:
    """One-parameter fit of the retrieval-noise branching ratio xi_se.

    ``gamma`` supplies the retrieval efficiency at each sample time (array
    aligned with the series, or a callable). The fitted value is clamped to
    [0, 1]; leaving the bounds sets the ``clamped`` flag instead of failing.
    """
    if len(series) < 2:
        raise ValueError("need at least 2 points to fit xi_se")
    gam = np.asarray(gamma(series.times) if callable(gamma) else gamma, dtype=float)
    if gam.shape != series.times.shape:
        raise ValueError("gamma must provide one efficiency per sample time")

    def fun(_t, xi):
        return model.cross_correlation_from_efficiency(gam, chi, xi, z_noise)

    starts = [(x,) for x in (0.05, 0.2, 0.5, 0.8)]
    popt, pcov, resid = _multistart_fit(fun, series.times, series.values, starts, series.std_errors)
    xi = float(popt[0])
    err = float(np.sqrt(max(pcov[0, 0], 0.0)))
    flags: tuple[str, ...] = ()
    if not 0.0 <= xi <= 1.0:
        xi = min(max(xi, 0.0), 1.0)
        flags = ("clamped",)
    return FitResult(
        parameters={"xi_se": xi}, std_errors={"xi_se": err}, residual_norm=resid, flags=flags
    )


def fit_visibility_dephasing(
    series: DecaySeries,
    vg: np.ndarray | Callable[[np.ndarray], np.ndarray],
    mu_prime: float,
) -> FitResult:
    """Fit V(t) = vg(t) xi' e^{-t/tau_0}; reports xi', tau_0 and sigma_b.

    ``vg`` is the noise-free visibility at the sample times. The implied
    field width is sigma_b = 1/(2 pi mu' tau_0) (zero for the tau_0 = inf
    sentinel); a clearly negative fitted rate raises, since the model has
    no growing branch.
    """
    if len(series) < 3:
        raise ValueError("need at least 3 points to fit the dephasing")
    vg_vals = np.asarray(vg(series.times) if callable(vg) else vg, dtype=float)
    if vg_vals.shape != series.times.shape:
        raise ValueError("vg must provide one value per sample time")
    t_span = float(series.times[-1] - series.times[0])

    def fun(tt, xi_p, rate):
        return vg_vals * xi_p * _exp(-rate * tt)

    starts = [(1.0, r) for r in np.geomspace(0.1 / t_span, 100.0 / t_span, 7)]
    starts.append((1.0, 0.0))
    popt, pcov, resid = _multistart_fit(fun, series.times, series.values, starts, series.std_errors)
    xi_p, rate = float(popt[0]), float(popt[1])
    errs = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    tau_0, tau_err = _rate_to_lifetime(rate, float(errs[1]), t_span)
    sigma_b = 0.0 if math.isinf(tau_0) else 1.0 / (2.0 * math.pi * mu_prime * tau_0)
    return FitResult(
        parameters={"xi_prime": xi_p, "tau_0": tau_0, "sigma_b": sigma_b},
        std_errors={"xi_prime": float(errs[0]), "tau_0": tau_err},
        residual_norm=resid,
    )


def _first_zero(inner: Callable[[float], float], xtol: float, t_max: float) -> float:
    """Smallest positive root of a decreasing sign-changing function.

    Expands the bracket geometrically, bisects to ``xtol`` and verifies the
    function stays non-positive beyond the root on the bracket used.
    """
    f0 = inner(0.0)
    if f0 <= 0.0:
        raise ValueError("link never entangled under these parameters (C(0) = 0)")
    hi = 1e-3
    while inner(hi) > 0.0:
        hi *= 2.0
        if hi > t_max:
            raise FitError(f"no concurrence zero crossing below {t_max} s")
    root = float(brentq(inner, hi / 2.0 if inner(hi / 2.0) > 0 else 0.0, hi, xtol=xtol))
    for t in np.linspace(root + xtol, hi, 8):
        if inner(float(t)) > 0.0:
            raise FitError("concurrence is not monotone beyond its first zero crossing")
    return root


def entanglement_lifetime(cfg: LinkConfig, *, xtol: float = 1e-4, t_max: float = 1e4) -> float:
    """Smallest storage time with zero link concurrence, to 0.1 ms by default."""

    def inner(t: float) -> float:
        pt = model.link_curves(cfg, t)
        p_c = float(pt.gamma) * cfg.node_l.eta
        return float(pt.visibility) - 2.0 * math.sqrt((1.0 - p_c) / float(pt.g))

    return _first_zero(inner, xtol, t_max)


def mode_pair_lifetime(pair: ModePair, pairing: str, *, xtol: float = 1e-7, t_max: float = 1e2) -> float:
    """Concurrence zero crossing for a mixed (MFI-MFS) or matched (MFS-MFS) pairing."""
    if pairing not in ("mixed", "matched"):
        raise ValueError("pairing must be 'mixed' or 'matched'")

    def inner(t: float) -> float:
        pt = model.mode_pair_curves(pair, t)
        if pairing == "mixed":
            g = 0.5 * (float(pt.g_mfi) + float(pt.g_mfs))
            p_c = pair.mfs.eta * 0.5 * (float(pt.gamma_mfi) + float(pt.gamma_mfs))
            v = float(pt.v_mixed)
        else:
            g = float(pt.g_mfs)
            p_c = pair.mfs.eta * float(pt.gamma_mfs)
            v = float(pt.v_matched)
        return v - 2.0 * math.sqrt((1.0 - p_c) / g)

    return _first_zero(inner, xtol, t_max)


def link_efficiency(t_s: float, t_g: float) -> float:
    """Quantum link efficiency: storage lifetime over generation time."""
    if t_g <= 0.0:
        raise ValueError("t_g must be > 0")
    if t_s < 0.0:
        raise ValueError("t_s must be >= 0")
    return t_s / t_g


@dataclass(frozen=True)
class Table1Row:
    sigma_b: float  # G
    sigma_delta: float  # G
    lifetime: float  # s
    eta_link: float


def make_table1(sigma_b_list: Sequence[float], cfg: LinkConfig, t_g: float) -> list[Table1Row]:
    """Entanglement lifetime and link efficiency per field-noise width.

    Each row re-evaluates the link with the given per-node width under the
    configured supply topology; sigma_b = 0 is the shared-supply limit
    (sigma_delta = 0) either way.
    """
    rows = []
    for sigma_b in sigma_b_list:
        noise = NoiseField(sigma_b=sigma_b, topology=cfg.noise.topology)
        row_cfg = LinkConfig(
            node_l=cfg.node_l,
            node_r=cfg.node_r,
            noise=noise,
            mode_l=cfg.mode_l,
            mode_r=cfg.mode_r,
            zeta=cfg.zeta,
            xi_prime=cfg.xi_prime,
            residual_phase_jitter=cfg.residual_phase_jitter,
        )
        t_s = entanglement_lifetime(row_cfg)
        rows.append(
            Table1Row(
                sigma_b=sigma_b,
                sigma_delta=noise.sigma_delta,
                lifetime=t_s,
                eta_link=link_efficiency(t_s, t_g),
            )
        )
    return rows
