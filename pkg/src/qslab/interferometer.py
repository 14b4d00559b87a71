"""Ramsey measurement chain: fringe synthesis, counting noise and estimators.

A fast two-pulse interrogation maps the overlap A(t) = V exp{-i[phi + E_n t]}
onto the spin-down probability p(phi_R) = (1 - V cos(phi_R - phi))/2, where
phi_R is the control phase of the second pulse.  The chain simulated here
draws binomial counts per phase point, fits the cosine to recover (V, phi),
and turns the short-time series into estimates of the mean energy (odd
polynomial in the phase), the energy uncertainty (even polynomial in the
visibility) and the geometric deviation coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError, ParameterError
from .dynamics import OverlapTrace
from .qsl import deviation_from_geometry

# differential light shift of the interrogation beams, subtracted during analysis
LIGHT_SHIFT_PRESET_RAD_PER_US = 81.0


def default_phase_grid(k: int = 12) -> np.ndarray:
    return np.arange(k) * 2.0 * np.pi / k


@dataclass(frozen=True)
class RamseyConfig:
    """Sampling configuration for the simulated interrogation.

    atoms_per_shot * repetitions detections enter each phase point; losses
    shrink the detected fraction and are divided out during normalization.
    noiseless=True replaces the binomial draw by its expectation, which the
    round-trip tests use.
    """

    phase_grid: np.ndarray = field(default_factory=default_phase_grid)
    atoms_per_shot: int = 20
    repetitions: int = 10
    loss_fraction: float = 0.05
    light_shift_slope: float = 0.0    # rad/us
    rng_seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        grid = np.asarray(self.phase_grid, dtype=float)
        grid.flags.writeable = False
        object.__setattr__(self, "phase_grid", grid)
        if grid.size < 6 or np.unique(np.round(grid, 12)).size < 6:
            raise ParameterError("need at least 6 distinct Ramsey phases")
        if self.atoms_per_shot < 1 or self.repetitions < 1:
            raise ParameterError("atoms_per_shot and repetitions must be positive")
        if not 0.0 <= self.loss_fraction < 1.0:
            raise ParameterError("loss fraction must lie in [0, 1)")

    @property
    def detections_per_point(self) -> int:
        return self.atoms_per_shot * self.repetitions


def ideal_fringe(visibility: float, phase: float, phi_r) -> np.ndarray:
    """p_down(phi_R) = (1 - V cos(phi_R - phi))/2 for |V| <= 1."""
    if abs(visibility) > 1.0 + 1e-10:
        raise ParameterError(f"visibility {visibility} outside [0, 1]")
    phi_r = np.asarray(phi_r, dtype=float)
    out = (1.0 - visibility * np.cos(phi_r - phase)) / 2.0
    return out if out.ndim else float(out)


def fringe_phase(trace: OverlapTrace, e_n: float) -> np.ndarray:
    """Fringe phase phi(t) = -arg A(t) - E_n t, unwrapped along the series.

    The stationary branch of the interferometer accumulates exp(-i E_n t),
    so the fringe tracks the overlap argument relative to that reference;
    for short times phi(t) = (E - E_n) t + O(t^3).
    """
    return -trace.phase - e_n * trace.times


@dataclass(frozen=True)
class FringeFit:
    """Cosine-fit results for one evolution time."""

    v: float          # clipped to [0, 1]
    v_raw: float      # unclipped amplitude estimate
    v_err: float
    phi: float        # in (-pi, pi]
    phi_err: float
    offset: float
    flagged: bool     # True when the amplitude is too small to date the phase


@dataclass(frozen=True)
class FringeRecord:
    """Samples and fit for one evolution time."""

    t_us: float
    phi_r: np.ndarray
    n_total: int
    n_down: np.ndarray
    fit: FringeFit


def sample_fringe(visibility: float, phase: float, config: RamseyConfig,
                  t_index: int) -> np.ndarray:
    """Detected spin-down counts per phase point.

    Counts are binomial with success probability p_down * (1 - loss); the
    stream for each (seed, t-index, phase-index) triple is independent, so
    records can be generated concurrently with reproducible output.
    """
    p_down = ideal_fringe(visibility, phase, config.phase_grid)
    p_eff = np.clip(p_down * (1.0 - config.loss_fraction), 0.0, 1.0)
    n = config.detections_per_point
    if config.noiseless:
        return p_eff * n
    counts = np.empty(p_eff.size, dtype=np.int64)
    for j, p in enumerate(p_eff):
        rng = np.random.default_rng([config.rng_seed, t_index, j])
        counts[j] = rng.binomial(n, p)
    return counts


def fit_fringe(phi_r: np.ndarray, n_down: np.ndarray, n_total: float,
               loss_fraction: float = 0.0) -> FringeFit:
    """Linear least squares of a + b cos(phi_R) + c sin(phi_R) on normalized counts.

    V = 2 sqrt(b^2 + c^2), phi = atan2(-c, -b) to match the fringe sign
    convention; standard errors come from the residual covariance.
    """
    phi_r = np.asarray(phi_r, dtype=float)
    n_down = np.asarray(n_down, dtype=float)
    if phi_r.size < 6 or np.unique(np.round(phi_r, 12)).size < 6:
        raise ParameterError("need at least 6 distinct Ramsey phases")
    y = n_down / (n_total * (1.0 - loss_fraction))
    design = np.column_stack([np.ones_like(phi_r), np.cos(phi_r), np.sin(phi_r)])
    gram = design.T @ design
    if np.linalg.cond(gram) > 1e12:
        raise ParameterError("degenerate phase design; spread the phase grid")
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = max(phi_r.size - 3, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(gram)
    a, b, c = coef
    v_raw = 2.0 * float(np.hypot(b, c))
    phi = float(np.arctan2(-c, -b))
    if v_raw > 1e-12:
        grad_v = np.array([0.0, 4.0 * b, 4.0 * c]) / v_raw
        v_err = float(np.sqrt(max(grad_v @ cov @ grad_v, 0.0)))
        grad_p = np.array([0.0, c, -b]) / (b**2 + c**2)
        phi_err = float(np.sqrt(max(grad_p @ cov @ grad_p, 0.0)))
    else:
        v_err = 2.0 * float(np.sqrt(cov[1, 1] + cov[2, 2]))
        phi_err = np.pi
    flagged = v_raw < 2.0 * v_err
    return FringeFit(v=float(np.clip(v_raw, 0.0, 1.0)), v_raw=v_raw, v_err=v_err,
                     phi=phi, phi_err=min(phi_err, np.pi), offset=float(a),
                     flagged=flagged)


def simulate_series(times_us: np.ndarray, visibility: np.ndarray,
                    phase: np.ndarray, config: RamseyConfig) -> list[FringeRecord]:
    """Fringe records over an evolution-time series.

    The light-shift systematic enters here as a phase slope in rad/us; the
    extraction step subtracts the same slope, mirroring how the measured
    shift is calibrated out.
    """
    records = []
    for i, (t_us, v, p) in enumerate(zip(times_us, visibility, phase)):
        p_tot = p + config.light_shift_slope * t_us
        counts = sample_fringe(v, p_tot, config, t_index=i)
        fit = fit_fringe(config.phase_grid, counts, config.detections_per_point,
                         config.loss_fraction)
        records.append(FringeRecord(t_us=float(t_us), phi_r=config.phase_grid,
                                    n_total=config.detections_per_point,
                                    n_down=counts, fit=fit))
    return records


def _nearest_branch_unwrap(wrapped: np.ndarray) -> np.ndarray:
    return np.unwrap(wrapped)


def extract_mean_energy(times_us: np.ndarray, phi_series: np.ndarray, e_n: float,
                        light_shift_slope: float, recoil_hertz: float,
                        tau_mt_us: float, window: float = 0.35):
    """Mean energy from the phase series, E = a1 + E_n (E_R).

    Subtracts the known light-shift slope, unwraps by nearest-branch
    continuation, then fits phi(t) = a1 t + a3 t^3 + a5 t^5 on
    [0, min(window * tau_MT, first wrap)].  Returns (e, e_err) in E_R.
    """
    times_us = np.asarray(times_us, dtype=float)
    phi_series = np.asarray(phi_series, dtype=float)
    rad_per_us_per_er = 2.0 * np.pi * recoil_hertz * 1e-6
    detrended = phi_series - light_shift_slope * times_us
    wrapped = np.angle(np.exp(1j * detrended))
    unwrapped = _nearest_branch_unwrap(wrapped)
    t_max = window * tau_mt_us
    beyond = np.nonzero(np.abs(unwrapped) > np.pi)[0]
    if beyond.size:
        t_max = min(t_max, times_us[beyond[0]])
    mask = times_us <= t_max * (1 + 1e-12)
    if mask.sum() < 7:
        raise ParameterError(f"need at least 7 phase samples in the window, got {int(mask.sum())}")
    t = times_us[mask]
    design = np.column_stack([t, t**3, t**5])
    coef, residuals, *_ = np.linalg.lstsq(design, unwrapped[mask], rcond=None)
    rss = float(residuals[0]) if residuals.size else float(
        ((design @ coef - unwrapped[mask]) ** 2).sum())
    cov = rss / max(t.size - 3, 1) * np.linalg.inv(design.T @ design)
    e = coef[0] / rad_per_us_per_er + e_n
    e_err = np.sqrt(max(cov[0, 0], 0.0)) / rad_per_us_per_er
    return float(e), float(e_err)


def extract_uncertainty(times_us: np.ndarray, v_series: np.ndarray,
                        recoil_hertz: float, tau_mt_us: float,
                        window: float = 1.0, v_weights: np.ndarray | None = None):
    """Energy uncertainty from the visibility series (E_R).

    Fits V(t) = 1 + b2 t^2 + b4 t^4 + b6 t^6 on [0, window * tau_MT] and
    maps dE = sqrt(-2 b2).  The even sixth-order form keeps the omitted
    O(t^8) terms below counting noise over the full trace window; b2 >= 0
    after the fit means the visibility decay is unresolved.
    """
    times_us = np.asarray(times_us, dtype=float)
    v_series = np.asarray(v_series, dtype=float)
    mask = times_us <= window * tau_mt_us * (1 + 1e-12)
    if mask.sum() < 7:
        raise ParameterError(f"need at least 7 visibility samples in the window, got {int(mask.sum())}")
    t = times_us[mask]
    design = np.column_stack([t**2, t**4, t**6])
    y = v_series[mask] - 1.0
    if v_weights is not None:
        w = np.asarray(v_weights, dtype=float)[mask]
        design = design * w[:, None]
        y = y * w
    coef, residuals, *_ = np.linalg.lstsq(design, y, rcond=None)
    if coef[0] >= 0.0:
        raise EstimationError("fitted quadratic visibility coefficient is not negative; "
                              "signal too flat to resolve dE")
    rss = float(residuals[0]) if residuals.size else float(((design @ coef - y) ** 2).sum())
    cov = rss / max(t.size - 3, 1) * np.linalg.inv(design.T @ design)
    rad_per_us_per_er = 2.0 * np.pi * recoil_hertz * 1e-6
    de_rad_us = np.sqrt(-2.0 * coef[0])
    de = de_rad_us / rad_per_us_per_er
    de_err = np.sqrt(max(cov[0, 0], 0.0)) / de_rad_us / rad_per_us_per_er
    return float(de), float(de_err)


def extract_xi(times_us: np.ndarray, v_series: np.ndarray, tau_mt_us: float):
    """Deviation coefficient from a visibility series.

    Converts V to the geodesic-to-path ratio arccos(V)/((pi/2) t/tau_MT) and
    delegates to the short-window geometry fit.
    """
    times_us = np.asarray(times_us, dtype=float)
    v_series = np.asarray(v_series, dtype=float)
    de_rad = np.pi / (2.0 * tau_mt_us)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(times_us > 0,
                         np.arccos(np.clip(v_series, -1.0, 1.0)) / (de_rad * times_us),
                         1.0)
    return deviation_from_geometry(times_us, ratio, tau_mt_us)
