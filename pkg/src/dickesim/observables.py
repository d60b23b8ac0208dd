"""Charging observables, detector convolution and regime classification.

Everything here consumes energy traces produced by the moment solver.  The
charging figures of merit (rise time, peak stored energy, peak charging
power) are always evaluated on the bare model output; convolution with the
detector response exists for comparison with measured transients and must be
applied explicitly.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, replace
from multiprocessing import Pool

import numpy as np

from .cumulant import SolverConfig, simulate_energy
from .model import (
    HBAR_MEV_PS,
    ModelParams,
    PulseParams,
    drive_amplitude_from_photon_ratio,
    effective_dephasing,
)

logger = logging.getLogger(__name__)

DECAY_DOMINATED = "decay-dominated"
COUPLING_DOMINATED = "coupling-dominated"
CROSSOVER = "crossover"
NON_RESONANT = "non-resonant"

SWEEP_AXES = ("N", "r")


class UndefinedMetricError(RuntimeError):
    """A charging metric does not exist for this trace (e.g. no energy at all)."""


@dataclass(frozen=True)
class EnergyTrace:
    """Stored energy per molecule (meV) on a uniform time grid (ps)."""

    times_ps: np.ndarray
    energy_mev: np.ndarray
    photons: np.ndarray | None = None
    n_molecules: float | None = None

    def __post_init__(self) -> None:
        t = np.asarray(self.times_ps, dtype=float)
        e = np.asarray(self.energy_mev, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("need at least two samples")
        if e.shape != t.shape:
            raise ValueError("energy and time arrays must match")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(e))):
            raise ValueError("trace contains non-finite values")
        dt = np.diff(t)
        if dt.min() <= 0:
            raise ValueError("times must be strictly increasing")
        if (dt.max() - dt.min()) > 1e-7 * dt.max():
            raise ValueError("time grid must be uniform")
        object.__setattr__(self, "times_ps", t)
        object.__setattr__(self, "energy_mev", e)

    @property
    def dt_ps(self) -> float:
        return float(self.times_ps[1] - self.times_ps[0])

    @property
    def photon_ratio(self) -> np.ndarray | None:
        if self.photons is None or not self.n_molecules:
            return None
        return self.photons / self.n_molecules


def convolve_response(trace: EnergyTrace, response_ps: float) -> EnergyTrace:
    """Smear the energy trace with a normalised Gaussian detector response.

    The kernel extends to +-5 sigma_R; beyond the trace edges the signal is
    continued with its edge value, so a flat trace convolves to itself
    exactly.  A zero response width returns the trace unchanged.
    """
    if response_ps < 0 or not math.isfinite(response_ps):
        raise ValueError(f"response width must be finite and non-negative, got {response_ps}")
    if response_ps == 0.0:
        return trace
    dt = trace.dt_ps
    k = int(math.ceil(5.0 * response_ps / dt))
    offsets = np.arange(-k, k + 1) * dt
    kernel = np.exp(-0.5 * (offsets / response_ps) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(trace.energy_mev, k, mode="edge")
    smeared = np.convolve(padded, kernel, mode="valid")
    return EnergyTrace(
        times_ps=trace.times_ps,
        energy_mev=smeared,
        photons=None,
        n_molecules=trace.n_molecules,
    )


@dataclass(frozen=True)
class ChargingMetrics:
    """Figures of merit for one charging transient.

    ``tau_ps`` is the delay from pump arrival to the first upward crossing of
    half the peak energy; it can be negative when collective oscillation
    stores energy before the pulse center has passed.
    """

    tau_ps: float
    e_max_mev: float
    p_max_mev_per_ps: float
    t_peak_ps: float
    t_half_ps: float


def charging_metrics(trace: EnergyTrace, pump_arrival_ps: float) -> ChargingMetrics:
    """Extract rise time, peak energy and peak power from a bare energy trace.

    The half-maximum crossing is located by scanning the whole trace for the
    first upward passage and interpolating linearly between the bracketing
    samples; a first sample already at or above half maximum counts as
    crossing there.  The pump arrival time is clamped into the trace window
    (with a warning) so degenerate configurations still yield a number.
    """
    t = trace.times_ps
    e = trace.energy_mev
    if t.size < 3:
        raise UndefinedMetricError("need at least three samples for charging metrics")
    e_max = float(e.max())
    if e_max <= 0.0:
        raise UndefinedMetricError("trace never stores energy; half maximum undefined")
    i_peak = int(np.argmax(e))
    t_peak = float(t[i_peak])

    half = 0.5 * e_max
    if e[0] >= half:
        t_half = float(t[0])
    else:
        above = np.nonzero(e >= half)[0]
        i = int(above[0])
        # e[i-1] < half <= e[i] by construction
        frac = (half - e[i - 1]) / (e[i] - e[i - 1])
        t_half = float(t[i - 1] + frac * (t[i] - t[i - 1]))

    t_p = pump_arrival_ps
    if not (t[0] <= t_p <= t[-1]):
        warnings.warn(
            f"pump arrival {pump_arrival_ps:g} ps lies outside the trace "
            f"[{t[0]:g}, {t[-1]:g}] ps; clamping",
            stacklevel=2,
        )
        t_p = float(min(max(t_p, t[0]), t[-1]))

    power = (e[2:] - e[:-2]) / (t[2:] - t[:-2])
    p_max = float(power.max())

    return ChargingMetrics(
        tau_ps=t_half - t_p,
        e_max_mev=e_max,
        p_max_mev_per_ps=p_max,
        t_peak_ps=t_peak,
        t_half_ps=t_half,
    )


@dataclass(frozen=True)
class RegimeReport:
    """Where a configuration sits relative to the charging-regime boundaries.

    ``n_kappa`` and ``n_gammaz`` are the molecule numbers where the
    collective coupling g sqrt(N r') overtakes cavity loss and dephasing;
    ``n_sigma`` is where the polariton splitting outruns the pulse bandwidth
    and the pump stops addressing the polaritons.  All are +inf at g = 0.
    """

    regime: str
    effective_coupling_mev: float
    thresholds: dict
    n_kappa: float
    n_gammaz: float
    n_sigma: float


def classify_regime(
    params: ModelParams,
    photon_ratio: float,
    pulse_sigma_ps: float,
) -> RegimeReport:
    """Classify the charging dynamics expected of this configuration.

    Comparison scale is x = g sqrt(N r') with r' = max(1, r): below every
    decay scale the cavity feeds molecules incoherently (decay-dominated),
    above all of them the ensemble Rabi-oscillates (coupling-dominated).
    A configuration whose splitting exceeds the pulse bandwidth is classified
    non-resonant first, since the pump then misses the polaritons entirely.
    """
    if photon_ratio < 0:
        raise ValueError(f"photon_ratio must be non-negative, got {photon_ratio}")
    if pulse_sigma_ps <= 0:
        raise ValueError(f"pulse_sigma_ps must be positive, got {pulse_sigma_ps}")
    g = params.g_mev
    n = params.n_molecules
    r_eff = max(1.0, photon_ratio)
    gz = effective_dephasing(params)
    bandwidth = (0.4 ** 0.25) * HBAR_MEV_PS / pulse_sigma_ps

    x = g * math.sqrt(n * r_eff)
    if g > 0:
        n_kappa = (params.kappa_mev ** 2) / (g * g * r_eff)
        n_gammaz = ((params.gamma0z_mev * params.n_ref) ** 2 / (g * g * r_eff)) ** (1.0 / 3.0)
        n_sigma = (bandwidth / g) ** 2
    else:
        n_kappa = math.inf
        n_gammaz = math.inf
        n_sigma = math.inf

    if n > n_sigma:
        regime = NON_RESONANT
    elif x < min(params.kappa_mev, gz):
        regime = DECAY_DOMINATED
    elif x > max(params.kappa_mev, gz):
        regime = COUPLING_DOMINATED
    else:
        regime = CROSSOVER

    return RegimeReport(
        regime=regime,
        effective_coupling_mev=x,
        thresholds={
            "kappa_mev": params.kappa_mev,
            "gamma_z_mev": gz,
            "gamma_minus_mev": params.gamma_minus_mev,
            "pulse_bandwidth_mev": bandwidth,
        },
        n_kappa=n_kappa,
        n_gammaz=n_gammaz,
        n_sigma=n_sigma,
    )


def scaling_exponent(q_i: float, q_j: float, n_i: float, n_j: float) -> float:
    """Pairwise scaling exponent f with q proportional to N^f.

    Both quantities must share a sign and both molecule numbers must be
    positive and distinct; otherwise the exponent does not exist.
    """
    if n_i <= 0 or n_j <= 0:
        raise ValueError("molecule numbers must be positive")
    if n_i == n_j:
        raise ValueError("molecule numbers must differ")
    ratio = q_i / q_j
    if not ratio > 0:
        raise ValueError("quantities must be nonzero and share a sign")
    return math.log(ratio) / math.log(n_i / n_j)


@dataclass(frozen=True)
class SweepPoint:
    """One row of a charging sweep; ``error`` holds the failure if any."""

    axis_value: float
    tau_ps: float
    e_max_mev: float
    p_max_mev_per_ps: float
    regime: str
    n_kappa: float
    n_gammaz: float
    n_sigma: float
    error: str | None = None


def _sweep_task(args) -> SweepPoint:
    params, pulse, config, axis, value, photon_ratio, lower_polariton = args
    try:
        if axis == "N":
            point_params = replace(params, n_molecules=value)
            r = photon_ratio
        else:
            point_params = params
            r = value
        if lower_polariton:
            split = point_params.g_mev * math.sqrt(point_params.n_molecules)
            point_params = replace(point_params, delta_a_mev=split, delta_c_mev=split)
        amplitude = drive_amplitude_from_photon_ratio(r, point_params.n_molecules)
        point_pulse = replace(pulse, amplitude=amplitude)
        trace = simulate_energy(point_params, point_pulse, config)
        metrics = charging_metrics(trace, point_pulse.center_ps)
        report = classify_regime(point_params, r, point_pulse.sigma_ps)
        return SweepPoint(
            axis_value=value,
            tau_ps=metrics.tau_ps,
            e_max_mev=metrics.e_max_mev,
            p_max_mev_per_ps=metrics.p_max_mev_per_ps,
            regime=report.regime,
            n_kappa=report.n_kappa,
            n_gammaz=report.n_gammaz,
            n_sigma=report.n_sigma,
        )
    except Exception as exc:
        logger.warning("sweep point %s = %g failed: %s", axis, value, exc)
        return SweepPoint(
            axis_value=value,
            tau_ps=math.nan,
            e_max_mev=math.nan,
            p_max_mev_per_ps=math.nan,
            regime="failed",
            n_kappa=math.nan,
            n_gammaz=math.nan,
            n_sigma=math.nan,
            error=str(exc),
        )


def sweep(
    params: ModelParams,
    axis: str,
    grid,
    pulse: PulseParams,
    config: SolverConfig,
    photon_ratio: float | None = None,
    lower_polariton: bool = False,
    workers: int = 1,
) -> list[SweepPoint]:
    """Charging metrics and regime labels along a molecule-number or pump grid.

    For ``axis="N"`` the per-point pulse area is recomputed as sqrt(r N), so
    ``photon_ratio`` is required; for ``axis="r"`` the grid itself supplies
    r.  Rows come back in grid order regardless of worker count, and a
    failing point is reported in its ``error`` field instead of aborting the
    rest of the sweep.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("grid must not be empty")
    if axis == "N":
        if photon_ratio is None:
            raise ValueError('axis="N" sweeps need photon_ratio to size the pulse')
        if any(v <= 0 for v in grid):
            raise ValueError("molecule numbers must be positive")
    else:
        if any(v < 0 for v in grid):
            raise ValueError("photon ratios must be non-negative")

    tasks = [
        (params, pulse, config, axis, value, photon_ratio, lower_polariton)
        for value in grid
    ]
    if workers > 1:
        with Pool(processes=workers) as pool:
            points = pool.map(_sweep_task, tasks)
    else:
        points = [_sweep_task(t) for t in tasks]
    return points


def write_sweep_csv(path, points: list[SweepPoint], axis: str, comment: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(f"# axis={axis}\n")
        fh.write("axis_value,tau_ps,Emax_meV,Pmax_meV_per_ps,regime,N_kappa,N_gammaz,N_sigma\n")
        for p in points:
            fh.write(
                f"{p.axis_value:.8e},{p.tau_ps:.8e},{p.e_max_mev:.8e},"
                f"{p.p_max_mev_per_ps:.8e},{p.regime},{p.n_kappa:.8e},"
                f"{p.n_gammaz:.8e},{p.n_sigma:.8e}\n"
            )
