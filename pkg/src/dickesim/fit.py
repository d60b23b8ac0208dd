"""Global chi-squared estimation of (g, gamma0_z, gamma_minus) from transients.

Each measured pump-probe transient is compared against the model energy
trace through two per-dataset nuisance parameters, an overall scale S and a
time shift T_0, both eliminated inside the objective: S in closed form, T_0
by a bracketed golden-section search.  The three physical rates are shared
by all datasets and scanned on a logarithmic grid; every dataset keeps its
own molecule number and pump photon ratio.

chi^2 = sum_i [ (S * d_i - E(t_i + T_0)) / sigma_i ]^2

with sigma_i estimated from quiet stretches of the measured signal itself.
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
    N_REF_DEFAULT,
    ModelParams,
    PulseParams,
    drive_amplitude_from_photon_ratio,
)
from .observables import EnergyTrace, convolve_response

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-12
# chi^2 quantile for a 68% region with three jointly estimated parameters
DELTA_CHI2_68 = 3.51

# label -> (molecules, photons entering the cavity)
# The B2 photon count restores the pump ratio its companion high-pump run
# shares and reproduces the published charging energies; the alternative
# reading an order of magnitude lower does neither.
LABEL_INFO = {
    "A1": (16.20e10, 1.90e10),
    "A2": (8.08e10, 0.98e10),
    "A3": (1.62e10, 0.26e10),
    "B1": (1.62e10, 4.53e10),
    "B2": (0.81e10, 1.60e10),
}

# noise-window boundaries in fs; outermost windows extend to the data edges
FIVE_WINDOWS = ((-math.inf, -300.0), (-300.0, 300.0), (300.0, 700.0), (700.0, 1000.0), (1000.0, math.inf))
FOUR_WINDOWS = ((-math.inf, -300.0), (-300.0, 300.0), (300.0, 1000.0), (1000.0, math.inf))
LABEL_WINDOWS = {
    "A1": FIVE_WINDOWS,
    "A2": FIVE_WINDOWS,
    "A3": FOUR_WINDOWS,
    "B1": FOUR_WINDOWS,
    "B2": FOUR_WINDOWS,
}

QUIET_SPAN_FS = 150.0


class DataError(RuntimeError):
    """A dataset file or its metadata cannot be used."""


class FitBoundaryError(RuntimeError):
    """The best fit sits on the edge of the search grid."""


@dataclass(frozen=True)
class NoiseWindow:
    lo_fs: float
    hi_fs: float
    sigma: float


@dataclass(frozen=True)
class ExperimentDataset:
    """One measured transient with the metadata the fit needs.

    ``signal`` is the raw differential reflectivity; ``sigma`` is per-sample
    noise, absent until ``estimate_noise`` has run.  ``response_ps``
    overrides the detector width otherwise taken from the cavity lifetime.
    """

    label: str
    times_fs: np.ndarray
    signal: np.ndarray
    n_dye: float
    photon_ratio: float
    response_ps: float | None = None
    sigma: np.ndarray | None = None
    windows: tuple[NoiseWindow, ...] | None = None

    def __post_init__(self) -> None:
        t = np.asarray(self.times_fs, dtype=float)
        d = np.asarray(self.signal, dtype=float)
        if t.ndim != 1 or t.shape != d.shape:
            raise ValueError("times and signal must be matching 1-D arrays")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(d))):
            raise ValueError("dataset contains non-finite values")
        if np.any(np.diff(t) < 0):
            raise ValueError("times must be sorted")
        if self.n_dye <= 0:
            raise ValueError(f"n_dye must be positive, got {self.n_dye}")
        if self.photon_ratio < 0:
            raise ValueError(f"photon_ratio must be non-negative, got {self.photon_ratio}")
        object.__setattr__(self, "times_fs", t)
        object.__setattr__(self, "signal", d)

    @property
    def n_points(self) -> int:
        return int(self.times_fs.size)


def load_dataset(
    path,
    label: str,
    n_dye: float | None = None,
    photon_ratio: float | None = None,
    response_ps: float | None = None,
) -> ExperimentDataset:
    """Read a two-column transient (t_fs, dR/R) with '#' comments.

    Known labels bring their molecule and photon numbers along; any other
    label requires both to be passed explicitly.  Unsorted files are sorted
    with a warning, since an unnoticed shuffle would silently corrupt the
    time-shift fit.
    """
    times = []
    signal = []
    try:
        fh = open(path, "r")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected two columns, got {len(parts)}")
            try:
                times.append(float(parts[0]))
                signal.append(float(parts[1]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: cannot parse {line!r}") from None
    if len(times) < 10:
        raise DataError(f"{path}: only {len(times)} samples; need at least 10")

    t = np.asarray(times)
    d = np.asarray(signal)
    if np.any(np.diff(t) < 0):
        warnings.warn(f"{path}: times were not sorted; sorting", stacklevel=2)
        order = np.argsort(t, kind="stable")
        t = t[order]
        d = d[order]

    if label in LABEL_INFO:
        default_n, default_phot = LABEL_INFO[label]
        if n_dye is None:
            n_dye = default_n
        if photon_ratio is None:
            photon_ratio = default_phot / n_dye
    else:
        if n_dye is None or photon_ratio is None:
            raise DataError(
                f"unknown label {label!r}: pass n_dye and photon_ratio explicitly"
            )
    try:
        return ExperimentDataset(
            label=label,
            times_fs=t,
            signal=d,
            n_dye=n_dye,
            photon_ratio=photon_ratio,
            response_ps=response_ps,
        )
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def _window_sigma(t_fs: np.ndarray, d: np.ndarray) -> float:
    """Noise of one window: detrended rms over its quietest 150 fs stretch.

    A window that also contains real signal would inflate a plain standard
    deviation, so the stretch with the smallest linear slope is located
    first and the rms is taken around that linear trend (two fitted
    parameters, hence the n-2 in the denominator).
    """
    n = t_fs.size
    best = None
    for i in range(n):
        if t_fs[i] + QUIET_SPAN_FS > t_fs[-1] + 1e-9:
            break  # only full-span stretches compete; a short tail rms is too noisy
        j = int(np.searchsorted(t_fs, t_fs[i] + QUIET_SPAN_FS, side="right"))
        if j - i < 3:
            continue
        tt = t_fs[i:j]
        dd = d[i:j]
        slope, intercept = np.polyfit(tt, dd, 1)
        if best is None or abs(slope) < best[0]:
            resid = dd - (slope * tt + intercept)
            sigma = math.sqrt(float(resid @ resid) / (j - i - 2))
            best = (abs(slope), sigma)
    if best is None:
        # window shorter than the quiet span: detrend the whole window
        slope, intercept = np.polyfit(t_fs, d, 1)
        resid = d - (slope * t_fs + intercept)
        sigma = math.sqrt(float(resid @ resid) / max(n - 2, 1))
        best = (abs(slope), sigma)
    return best[1]


def estimate_noise(
    dataset: ExperimentDataset,
    window_bounds=None,
) -> ExperimentDataset:
    """Fill per-sample noise levels from quiet stretches of each window.

    ``window_bounds`` is a sequence of (lo_fs, hi_fs) pairs partitioning the
    time axis; by default the label picks the published partition (five
    windows for the two high-concentration runs, four otherwise).  Every
    window needs at least five samples.  A window quieter than the 1e-12
    floor is clamped there, with a warning, so later weights stay finite.
    """
    if window_bounds is None:
        window_bounds = LABEL_WINDOWS.get(dataset.label, FOUR_WINDOWS)
    t = dataset.times_fs
    d = dataset.signal
    sigma = np.empty_like(d)
    covered = np.zeros(t.size, dtype=bool)
    windows = []
    for lo, hi in window_bounds:
        mask = (t >= lo) & (t < hi) & ~covered
        idx = np.nonzero(mask)[0]
        if idx.size < 5:
            raise DataError(
                f"noise window [{lo:g}, {hi:g}) fs has {idx.size} samples; need at least 5"
            )
        s = _window_sigma(t[idx], d[idx])
        if s < SIGMA_FLOOR:
            warnings.warn(
                f"noise window [{lo:g}, {hi:g}) fs came out below the floor; clamping",
                stacklevel=2,
            )
            s = SIGMA_FLOOR
        sigma[idx] = s
        covered[idx] = True
        windows.append(NoiseWindow(lo_fs=lo, hi_fs=hi, sigma=s))
    if not covered.all():
        missing = t[~covered]
        raise DataError(
            f"noise windows do not cover {missing.size} samples (first at {missing[0]:g} fs)"
        )
    return replace(dataset, sigma=sigma, windows=tuple(windows))


@dataclass(frozen=True)
class InnerFit:
    """Nuisance parameters of one dataset at one grid point."""

    scale: float
    t0_fs: float
    chi2: float


def _chi2_at(
    shift_ps: float,
    t_data_ps: np.ndarray,
    d: np.ndarray,
    w: np.ndarray,
    wd: np.ndarray,
    wdd: float,
    t_model: np.ndarray,
    e_model: np.ndarray,
) -> tuple[float, float]:
    e = np.interp(t_data_ps + shift_ps, t_model, e_model)
    scale = float(wd @ e) / wdd
    r = scale * d - e
    return float(w @ (r * r)), scale


def inner_fit(
    model: EnergyTrace,
    dataset: ExperimentDataset,
    t0_range_fs: tuple[float, float] = (-400.0, 400.0),
    coarse_points: int = 17,
) -> InnerFit:
    """Best scale and time shift of one dataset against one model trace.

    The scale minimising chi^2 at fixed shift is the weighted projection
    S = sum(w d E) / sum(w d^2).  The shift is found by a coarse scan over
    the allowed range followed by golden-section refinement of the best
    bracket; ties on the coarse scan resolve toward the smaller |T_0|.
    """
    if dataset.sigma is None:
        raise DataError(f"dataset {dataset.label!r} has no noise estimate yet")
    lo_fs, hi_fs = t0_range_fs
    if not hi_fs > lo_fs:
        raise ValueError("t0 range must have positive width")
    t_data_ps = dataset.times_fs * 1e-3
    lo = lo_fs * 1e-3
    hi = hi_fs * 1e-3
    t_model = model.times_ps
    if t_data_ps[0] + lo < t_model[0] or t_data_ps[-1] + hi > t_model[-1]:
        raise ValueError(
            "model trace does not span the dataset over the full shift range: "
            f"need [{t_data_ps[0] + lo:g}, {t_data_ps[-1] + hi:g}] ps, "
            f"have [{t_model[0]:g}, {t_model[-1]:g}] ps"
        )
    d = dataset.signal
    w = 1.0 / dataset.sigma ** 2
    wd = w * d
    wdd = float(wd @ d)
    if wdd <= 0.0:
        raise DataError(f"dataset {dataset.label!r} has no signal to scale")
    e_model = model.energy_mev

    args = (t_data_ps, d, w, wd, wdd, t_model, e_model)

    shifts = np.linspace(lo, hi, coarse_points)
    chi2s = np.array([_chi2_at(s, *args)[0] for s in shifts])
    best = np.min(chi2s)
    # ties (within numerical dust) resolve toward the smallest |shift|
    tied = np.nonzero(chi2s <= best * (1.0 + 1e-12))[0]
    i = int(tied[np.argmin(np.abs(shifts[tied]))])

    a = shifts[max(i - 1, 0)]
    b = shifts[min(i + 1, coarse_points - 1)]
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - gr * (b - a)
    x2 = a + gr * (b - a)
    f1 = _chi2_at(x1, *args)[0]
    f2 = _chi2_at(x2, *args)[0]
    while (b - a) > 1e-4:  # 0.1 fs
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - gr * (b - a)
            f1 = _chi2_at(x1, *args)[0]
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + gr * (b - a)
            f2 = _chi2_at(x2, *args)[0]
    shift = 0.5 * (a + b)
    chi2, scale = _chi2_at(shift, *args)
    if not chi2 < best * (1.0 - 1e-12):
        # a flat valley gives the refinement nothing to improve on, and the
        # search would otherwise drift across the bracket; stay on the
        # tie-resolved coarse point
        shift = shifts[i]
        chi2, scale = _chi2_at(shift, *args)
    return InnerFit(scale=scale, t0_fs=shift * 1e3, chi2=chi2)


@dataclass(frozen=True)
class FitGrid:
    """Logarithmic search grid over the three shared rates."""

    g_nev: np.ndarray
    gamma0z_mev: np.ndarray
    gamma_minus_mev: np.ndarray

    @classmethod
    def logspace(
        cls,
        g_bounds_nev: tuple[float, float] = (0.1, 5000.0),
        gamma0z_bounds_mev: tuple[float, float] = (0.1, 5000.0),
        gamma_minus_bounds_mev: tuple[float, float] = (0.001, 1.0),
        points: int = 9,
    ) -> "FitGrid":
        def axis(lo, hi):
            if not (0 < lo < hi):
                raise ValueError(f"bad axis bounds ({lo}, {hi})")
            return np.geomspace(lo, hi, points)

        return cls(
            g_nev=axis(*g_bounds_nev),
            gamma0z_mev=axis(*gamma0z_bounds_mev),
            gamma_minus_mev=axis(*gamma_minus_bounds_mev),
        )

    def refined_around(self, i: int, j: int, k: int, points: int | None = None) -> "FitGrid":
        """Zoom each axis to one coarse cell either side of (i, j, k).

        For a geometric axis this narrows the span to two coarse steps, so
        the same point count resolves it about four times finer.
        """
        def zoom(axis, idx, n):
            step = axis[1] / axis[0] if axis.size > 1 else 2.0
            return np.geomspace(axis[idx] / step, axis[idx] * step, n)

        n_g = points or self.g_nev.size
        n_z = points or self.gamma0z_mev.size
        n_m = points or self.gamma_minus_mev.size
        return FitGrid(
            g_nev=zoom(self.g_nev, i, n_g),
            gamma0z_mev=zoom(self.gamma0z_mev, j, n_z),
            gamma_minus_mev=zoom(self.gamma_minus_mev, k, n_m),
        )


@dataclass(frozen=True)
class FitResult:
    g_nev: float
    gamma0z_mev: float
    gamma_minus_mev: float
    chi2_reduced_min: float
    k_eff: int
    scales: dict
    shifts_fs: dict
    grid: FitGrid
    chi2_reduced_map: np.ndarray
    argmin: tuple[int, int, int]
    confidence: dict | None
    lifetime_fs: float
    coarse: "FitResult | None" = None


def _fit_trace_task(args) -> EnergyTrace:
    params, pulse, solver, response_ps = args
    trace = simulate_energy(params, pulse, solver)
    return convolve_response(trace, response_ps)


def model_traces(
    datasets: list[ExperimentDataset],
    grid: FitGrid,
    lifetime_fs: float,
    pulse_sigma_ps: float = 0.020,
    n_ref: float = N_REF_DEFAULT,
    solver: SolverConfig | None = None,
    t0_range_fs: tuple[float, float] = (-400.0, 400.0),
    workers: int = 1,
) -> dict:
    """Convolved model traces for every (grid point, dataset) pair.

    This is the expensive half of a global fit; computing it once and
    passing it to ``global_fit`` lets many noise realisations reuse the same
    table.  Keys are (i_g, i_z, i_m, dataset_index).
    """
    lifetime_ps = lifetime_fs * 1e-3
    kappa = HBAR_MEV_PS / lifetime_ps

    lo_ps = min(ds.times_fs[0] for ds in datasets) * 1e-3 + t0_range_fs[0] * 1e-3
    hi_ps = max(ds.times_fs[-1] for ds in datasets) * 1e-3 + t0_range_fs[1] * 1e-3
    pad = 5.0 * lifetime_ps + 0.05
    t_start = min(lo_ps - pad, -8.0 * pulse_sigma_ps)
    t_end = hi_ps + pad
    if solver is None:
        solver = SolverConfig(t_start_ps=t_start, t_end_ps=t_end)
    else:
        solver = replace(solver, t_start_ps=min(solver.t_start_ps, t_start), t_end_ps=max(solver.t_end_ps, t_end))

    tasks = []
    keys = []
    for i, g in enumerate(grid.g_nev):
        for j, gz in enumerate(grid.gamma0z_mev):
            for k, gm in enumerate(grid.gamma_minus_mev):
                for di, ds in enumerate(datasets):
                    params = ModelParams(
                        n_molecules=ds.n_dye,
                        g_mev=g * 1e-6,
                        kappa_mev=kappa,
                        gamma0z_mev=gz,
                        n_ref=n_ref,
                        gamma_minus_mev=gm,
                    )
                    pulse = PulseParams(
                        amplitude=drive_amplitude_from_photon_ratio(ds.photon_ratio, ds.n_dye),
                        center_ps=0.0,
                        sigma_ps=pulse_sigma_ps,
                        response_ps=ds.response_ps if ds.response_ps is not None else lifetime_ps,
                    )
                    tasks.append((params, pulse, solver, pulse.response_ps))
                    keys.append((i, j, k, di))
    if workers > 1:
        with Pool(processes=workers) as pool:
            traces = pool.map(_fit_trace_task, tasks)
    else:
        traces = [_fit_trace_task(t) for t in tasks]
    return dict(zip(keys, traces))


def global_fit(
    datasets: list[ExperimentDataset],
    grid: FitGrid,
    lifetime_fs: float = 120.0,
    pulse_sigma_ps: float = 0.020,
    n_ref: float = N_REF_DEFAULT,
    solver: SolverConfig | None = None,
    t0_range_fs: tuple[float, float] = (-400.0, 400.0),
    workers: int = 1,
    refine: bool = False,
    traces: dict | None = None,
) -> FitResult:
    """Scan the rate grid, minimise chi^2 jointly over all datasets.

    Every dataset must already carry a noise estimate.  ``refine`` runs one
    extra pass on a four-times-finer grid around the coarse minimum.  The
    reduced chi^2 uses k_eff = (total samples) - 3: only the shared rates
    count as parameters, matching how the per-dataset scale and shift are
    treated as nuisances.
    """
    if not datasets:
        raise ValueError("need at least one dataset")
    for ds in datasets:
        if ds.sigma is None:
            raise DataError(f"dataset {ds.label!r} has no noise estimate; run estimate_noise")
    k_total = sum(ds.n_points for ds in datasets)
    k_eff = k_total - 3
    if k_eff <= 0:
        raise DataError("fewer data points than fit parameters")

    if traces is None:
        traces = model_traces(
            datasets, grid, lifetime_fs,
            pulse_sigma_ps=pulse_sigma_ps, n_ref=n_ref, solver=solver,
            t0_range_fs=t0_range_fs, workers=workers,
        )

    shape = (grid.g_nev.size, grid.gamma0z_mev.size, grid.gamma_minus_mev.size)
    chi2_map = np.full(shape, np.inf)
    inner: dict[tuple[int, int, int], list[InnerFit]] = {}
    for i in range(shape[0]):
        for j in range(shape[1]):
            for k in range(shape[2]):
                total = 0.0
                fits = []
                try:
                    for di, ds in enumerate(datasets):
                        f = inner_fit(traces[(i, j, k, di)], ds, t0_range_fs=t0_range_fs)
                        total += f.chi2
                        fits.append(f)
                except (ValueError, DataError) as exc:
                    logger.warning("grid point (%d, %d, %d) failed: %s", i, j, k, exc)
                    continue
                chi2_map[i, j, k] = total / k_eff
                inner[(i, j, k)] = fits

    if not np.any(np.isfinite(chi2_map)):
        raise RuntimeError("every grid point failed; check the model window and data")
    argmin = np.unravel_index(np.argmin(chi2_map), shape)
    i, j, k = (int(v) for v in argmin)

    on_edge = (
        i in (0, shape[0] - 1)
        or j in (0, shape[1] - 1)
        or k in (0, shape[2] - 1)
    )
    confidence = None
    if on_edge:
        warnings.warn(
            "best fit sits on the grid boundary; confidence intervals are "
            "unavailable until the grid is extended",
            stacklevel=2,
        )
    else:
        confidence = confidence_intervals(chi2_map, grid, k_eff, (i, j, k))

    fits = inner[(i, j, k)]
    result = FitResult(
        g_nev=float(grid.g_nev[i]),
        gamma0z_mev=float(grid.gamma0z_mev[j]),
        gamma_minus_mev=float(grid.gamma_minus_mev[k]),
        chi2_reduced_min=float(chi2_map[i, j, k]),
        k_eff=k_eff,
        scales={ds.label: f.scale for ds, f in zip(datasets, fits)},
        shifts_fs={ds.label: f.t0_fs for ds, f in zip(datasets, fits)},
        grid=grid,
        chi2_reduced_map=chi2_map,
        argmin=(i, j, k),
        confidence=confidence,
        lifetime_fs=lifetime_fs,
    )
    if not refine:
        return result

    fine = global_fit(
        datasets,
        grid.refined_around(i, j, k),
        lifetime_fs=lifetime_fs,
        pulse_sigma_ps=pulse_sigma_ps,
        n_ref=n_ref,
        solver=solver,
        t0_range_fs=t0_range_fs,
        workers=workers,
        refine=False,
    )
    return replace(fine, coarse=result)


def confidence_intervals(
    chi2_reduced_map: np.ndarray,
    grid: FitGrid,
    k_eff: int,
    argmin: tuple[int, int, int],
) -> dict:
    """Per-axis 68% intervals from the joint chi^2 region.

    The region is every grid point with chi2_reduced within 3.51/k_eff of
    the minimum (three jointly estimated parameters); each axis reports the
    extent of the region's projection.  A region touching the grid edge
    only bounds the interval from one side, which is flagged as a warning;
    a minimum on the edge bounds nothing and raises instead.
    """
    i, j, k = argmin
    shape = chi2_reduced_map.shape
    if (
        i in (0, shape[0] - 1)
        or j in (0, shape[1] - 1)
        or k in (0, shape[2] - 1)
    ):
        raise FitBoundaryError(
            "chi^2 minimum lies on the search-grid boundary; extend the grid"
        )
    threshold = chi2_reduced_map[i, j, k] + DELTA_CHI2_68 / k_eff
    region = chi2_reduced_map <= threshold
    out = {}
    axes = (
        ("g_nev", grid.g_nev, region.any(axis=(1, 2))),
        ("gamma0z_mev", grid.gamma0z_mev, region.any(axis=(0, 2))),
        ("gamma_minus_mev", grid.gamma_minus_mev, region.any(axis=(0, 1))),
    )
    for name, axis, hit in axes:
        vals = axis[hit]
        if hit[0] or hit[-1]:
            warnings.warn(
                f"68% region for {name} touches the grid edge; interval is one-sided",
                stacklevel=2,
            )
        out[name] = (float(vals.min()), float(vals.max()))
    return out


def residuals(model: EnergyTrace, dataset: ExperimentDataset, fit: InnerFit) -> np.ndarray:
    """Weighted residuals (S d_i - E(t_i + T_0)) / sigma_i at the data times."""
    if dataset.sigma is None:
        raise DataError(f"dataset {dataset.label!r} has no noise estimate yet")
    t = dataset.times_fs * 1e-3 + fit.t0_fs * 1e-3
    e = np.interp(t, model.times_ps, model.energy_mev)
    return (fit.scale * dataset.signal - e) / dataset.sigma


def make_synthetic_dataset(
    params: ModelParams,
    pulse: PulseParams,
    times_fs: np.ndarray,
    true_scale: float = 1.0,
    true_shift_fs: float = 0.0,
    noise_rms: float = 0.0,
    rng: np.random.Generator | None = None,
    label: str = "synthetic",
    solver: SolverConfig | None = None,
) -> ExperimentDataset:
    """Generate a transient the fit should invert: d = E(t + T_0)/S + noise.

    The model is simulated, convolved with the pulse's detector response and
    sampled at the requested times.  Useful for self-consistency tests and
    for exercising the pipeline without measured data.
    """
    times_fs = np.asarray(times_fs, dtype=float)
    if solver is None:
        t_lo = times_fs[0] * 1e-3 + true_shift_fs * 1e-3 - 5.0 * pulse.response_ps - 0.05
        t_hi = times_fs[-1] * 1e-3 + true_shift_fs * 1e-3 + 5.0 * pulse.response_ps + 0.05
        solver = SolverConfig(
            t_start_ps=min(t_lo, pulse.center_ps - 8.0 * pulse.sigma_ps),
            t_end_ps=t_hi,
        )
    trace = convolve_response(simulate_energy(params, pulse, solver), pulse.response_ps)
    clean = np.interp(times_fs * 1e-3 + true_shift_fs * 1e-3, trace.times_ps, trace.energy_mev)
    d = clean / true_scale
    if noise_rms > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        d = d + rng.normal(scale=noise_rms, size=d.size)
    return ExperimentDataset(
        label=label,
        times_fs=times_fs,
        signal=d,
        n_dye=params.n_molecules,
        photon_ratio=pulse.amplitude ** 2 / params.n_molecules,
        response_ps=pulse.response_ps,
    )


def write_map_csv(path, result: FitResult) -> None:
    grid = result.grid
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# lifetime_fs={result.lifetime_fs:g} k_eff={result.k_eff} "
            f"chi2_reduced_min={result.chi2_reduced_min:.8e}\n"
        )
        fh.write("g_neV,gamma0z_meV,gammaminus_meV,chi2_reduced\n")
        for i, g in enumerate(grid.g_nev):
            for j, gz in enumerate(grid.gamma0z_mev):
                for k, gm in enumerate(grid.gamma_minus_mev):
                    fh.write(
                        f"{g:.8e},{gz:.8e},{gm:.8e},{result.chi2_reduced_map[i, j, k]:.8e}\n"
                    )
