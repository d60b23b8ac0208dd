"""Unit conventions, physical parameters and pump-pulse definitions.

Internally every module works in picoseconds and millielectronvolts.  All
rates that appear in the equations of motion are energies divided by hbar, so
they carry units of 1/ps.  The conversion happens exactly once, when a
parameter object is turned into solver rates; user-facing constructors accept
the units experimentalists actually quote (neV for the coupling, fs for pulse
widths, nm for wavelengths).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

# hbar in meV*ps.  Single definition site; everything else imports this.
HBAR_MEV_PS = 0.6582119569

# h*c in eV*nm, for converting transition wavelengths to energies.
HC_EV_NM = 1239.8419843320026

# Dephasing reference: molecule count of the 5%-concentration microcavity.
# gamma_z(N) = gamma0_z * N_REF_DEFAULT / N reproduces the concentration
# series when gamma0_z is quoted at this filling.
N_REF_DEFAULT = 8.08e10


class ConfigError(ValueError):
    """Raised when a configuration mapping cannot be turned into parameters."""


@dataclass(frozen=True)
class UnitSystem:
    """Conversion helpers anchored to the ps/meV working units.

    The defaults are the only values ever used in practice; the dataclass
    exists so the constants travel together and tests can state round-trip
    invariants against one object.
    """

    hbar_mev_ps: float = HBAR_MEV_PS
    hc_ev_nm: float = HC_EV_NM

    def fs_to_ps(self, t_fs: float) -> float:
        return t_fs * 1e-3

    def ps_to_fs(self, t_ps: float) -> float:
        return t_ps * 1e3

    def ev_to_mev(self, e_ev: float) -> float:
        return e_ev * 1e3

    def mev_to_ev(self, e_mev: float) -> float:
        return e_mev * 1e-3

    def nev_to_mev(self, e_nev: float) -> float:
        return e_nev * 1e-6

    def mev_to_nev(self, e_mev: float) -> float:
        return e_mev * 1e6

    def wavelength_nm_to_mev(self, lam_nm: float) -> float:
        if lam_nm <= 0:
            raise ValueError(f"wavelength must be positive, got {lam_nm}")
        return self.ev_to_mev(self.hc_ev_nm / lam_nm)

    def mev_to_wavelength_nm(self, e_mev: float) -> float:
        if e_mev <= 0:
            raise ValueError(f"energy must be positive, got {e_mev}")
        return self.hc_ev_nm / self.mev_to_ev(e_mev)

    def rate_per_ps(self, e_mev: float) -> float:
        """Energy-type decay constant -> angular rate in 1/ps."""
        return e_mev / self.hbar_mev_ps

    def lifetime_ps_to_mev(self, t_ps: float) -> float:
        """Photon lifetime T -> cavity linewidth kappa = hbar/T."""
        if t_ps <= 0:
            raise ValueError(f"lifetime must be positive, got {t_ps}")
        return self.hbar_mev_ps / t_ps


UNITS = UnitSystem()


@dataclass(frozen=True)
class ModelParams:
    """Cavity + emitter ensemble parameters, all energies in meV.

    Defaults are the best-fit values for the 120 fs photon-lifetime cavity:
    g = 10.6 neV, gamma0_z = 1.68 meV quoted at n_ref molecules, inversion
    decay gamma_minus = 14.1 ueV, and resonant tuning.  ``n_molecules`` below
    one is allowed numerically (the cumulant equations do not care) but is
    almost certainly a configuration mistake, so it only warns.
    """

    n_molecules: float = N_REF_DEFAULT
    g_mev: float = 10.6e-6
    kappa_mev: float = HBAR_MEV_PS / 0.120
    gamma0z_mev: float = 1.68
    n_ref: float = N_REF_DEFAULT
    gamma_minus_mev: float = 0.0141
    delta_c_mev: float = 0.0
    delta_a_mev: float = 0.0
    omega_a_mev: float = 2357.0

    def __post_init__(self) -> None:
        if not (self.n_molecules > 0) or not math.isfinite(self.n_molecules):
            raise ValueError(f"n_molecules must be positive, got {self.n_molecules}")
        if self.n_molecules < 1.0:
            warnings.warn(
                f"n_molecules = {self.n_molecules} is below one molecule; "
                "proceeding, but check the configuration",
                stacklevel=2,
            )
        if not (self.n_ref > 0) or not math.isfinite(self.n_ref):
            raise ValueError(f"n_ref must be positive, got {self.n_ref}")
        for name in ("g_mev", "kappa_mev", "gamma0z_mev", "gamma_minus_mev"):
            value = getattr(self, name)
            if value < 0 or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite non-negative energy, got {value}")
        if self.omega_a_mev <= 0 or not math.isfinite(self.omega_a_mev):
            raise ValueError(f"omega_a_mev must be positive, got {self.omega_a_mev}")
        for name in ("delta_c_mev", "delta_a_mev"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def from_lifetime(cls, lifetime_fs: float, **kwargs) -> "ModelParams":
        """Construct with kappa = hbar/T for a photon lifetime given in fs."""
        kappa = UNITS.lifetime_ps_to_mev(UNITS.fs_to_ps(lifetime_fs))
        return cls(kappa_mev=kappa, **kwargs)

    def with_molecule_count(self, n_molecules: float) -> "ModelParams":
        return replace(self, n_molecules=n_molecules)


@dataclass(frozen=True)
class PulseParams:
    """Gaussian pump pulse eta(t) = amplitude/(sigma sqrt(2 pi)) exp(-(t-t0)^2/2 sigma^2).

    ``amplitude`` is the integrated pulse area eta0 (dimensionless in the
    cumulant equations), ``sigma_ps`` the temporal width and ``response_ps``
    the detector response width sigma_R used when convolving model output for
    comparison with measured transients.
    """

    amplitude: float = 1.0
    center_ps: float = 0.0
    sigma_ps: float = 0.020
    response_ps: float = 0.120

    def __post_init__(self) -> None:
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise ValueError(f"amplitude must be non-negative, got {self.amplitude}")
        if self.sigma_ps <= 0 or not math.isfinite(self.sigma_ps):
            raise ValueError(f"sigma_ps must be positive, got {self.sigma_ps}")
        if self.response_ps < 0 or not math.isfinite(self.response_ps):
            raise ValueError(f"response_ps must be non-negative, got {self.response_ps}")
        if not math.isfinite(self.center_ps):
            raise ValueError("center_ps must be finite")


def pulse_envelope(pulse: PulseParams, t_ps):
    """Drive rate eta(t) in 1/ps; accepts scalars or arrays.

    The envelope integrates to ``pulse.amplitude`` over all time, which is
    what ties the pulse area to the injected photon number.
    """
    arg = (np.asarray(t_ps, dtype=float) - pulse.center_ps) / pulse.sigma_ps
    peak = pulse.amplitude / (pulse.sigma_ps * math.sqrt(2.0 * math.pi))
    out = peak * np.exp(-0.5 * arg * arg)
    if np.ndim(t_ps) == 0:
        return float(out)
    return out


def effective_dephasing(params: ModelParams) -> float:
    """Pure-dephasing energy gamma_z(N) = gamma0_z * n_ref / N in meV.

    Encodes the empirical density dependence: doubling the dye load halves
    the per-molecule dephasing."""
    return params.gamma0z_mev * params.n_ref / params.n_molecules


def gamma_total(params: ModelParams) -> float:
    """Total transverse decay 2 gamma_z(N) + gamma_minus / 2 in meV."""
    return 2.0 * effective_dephasing(params) + 0.5 * params.gamma_minus_mev


def drive_amplitude_from_photon_ratio(photon_ratio: float, n_molecules: float) -> float:
    """Pulse area eta0 = sqrt(r N) injecting r photons per molecule.

    With this normalisation an undamped, uncoupled cavity ends the pulse in a
    coherent state of amplitude eta0, i.e. with r*N photons."""
    if photon_ratio < 0:
        raise ValueError(f"photon_ratio must be non-negative, got {photon_ratio}")
    if n_molecules <= 0:
        raise ValueError(f"n_molecules must be positive, got {n_molecules}")
    return math.sqrt(photon_ratio * n_molecules)


def energy_density_from_inversion(c_z, omega_a_mev: float):
    """Stored energy per molecule E = (omega_a/2)(<sigma_z> + 1) in meV."""
    out = 0.5 * omega_a_mev * (np.asarray(c_z, dtype=float) + 1.0)
    if np.ndim(c_z) == 0:
        return float(out)
    return out


def estimate_molecule_count(
    fractional_transmission: float,
    thickness_cm: float,
    cross_section_cm2: float,
    beam_area_cm2: float,
) -> float:
    """Molecules in the pumped volume from a Beer-Lambert transmission ratio.

    N = -ln(T/T0) * A / sigma_abs.  The film thickness cancels (it enters the
    density and the column length with opposite powers) but is kept as an
    argument so callers state the geometry they measured explicitly.
    """
    if not (0.0 < fractional_transmission <= 1.0):
        raise ValueError(
            f"fractional_transmission must lie in (0, 1], got {fractional_transmission}"
        )
    if thickness_cm <= 0:
        raise ValueError(f"thickness_cm must be positive, got {thickness_cm}")
    if cross_section_cm2 <= 0:
        raise ValueError(f"cross_section_cm2 must be positive, got {cross_section_cm2}")
    if beam_area_cm2 <= 0:
        raise ValueError(f"beam_area_cm2 must be positive, got {beam_area_cm2}")
    return -math.log(fractional_transmission) * beam_area_cm2 / cross_section_cm2


def photons_in_cavity(pump_photons: float, reflectivity: float) -> float:
    """Photons entering the cavity, N_p * (1 - R)."""
    if pump_photons < 0:
        raise ValueError(f"pump_photons must be non-negative, got {pump_photons}")
    if not (0.0 <= reflectivity <= 1.0):
        raise ValueError(f"reflectivity must lie in [0, 1], got {reflectivity}")
    return pump_photons * (1.0 - reflectivity)


# --- flat key=value configuration ------------------------------------------
#
# The CLI reads files of "namespace.key = value" lines.  Each namespace is
# parsed here so the defaults live next to the dataclasses they fill.

_MODEL_KEYS = {
    "model.N": ("n_molecules", float),
    "model.g_neV": ("g_mev", lambda s: UNITS.nev_to_mev(float(s))),
    "model.kappa_meV": ("kappa_mev", float),
    "model.lifetime_fs": ("kappa_mev", lambda s: UNITS.lifetime_ps_to_mev(UNITS.fs_to_ps(float(s)))),
    "model.gamma0z_meV": ("gamma0z_mev", float),
    "model.N_ref": ("n_ref", float),
    "model.gamma_minus_meV": ("gamma_minus_mev", float),
    "model.delta_c_meV": ("delta_c_mev", float),
    "model.delta_a_meV": ("delta_a_mev", float),
    "model.omega_a_meV": ("omega_a_mev", float),
    "model.wavelength_nm": ("omega_a_mev", lambda s: UNITS.wavelength_nm_to_mev(float(s))),
}

_PULSE_KEYS = {
    "pulse.eta0": ("amplitude", float),
    "pulse.t0_fs": ("center_ps", lambda s: UNITS.fs_to_ps(float(s))),
    "pulse.sigma_fs": ("sigma_ps", lambda s: UNITS.fs_to_ps(float(s))),
    "pulse.response_fs": ("response_ps", lambda s: UNITS.fs_to_ps(float(s))),
}

_EXCLUSIVE_PAIRS = (
    ("model.kappa_meV", "model.lifetime_fs"),
    ("model.omega_a_meV", "model.wavelength_nm"),
    ("pulse.eta0", "pulse.photon_ratio"),
)


def _convert(key: str, raw: str, conv) -> object:
    try:
        return conv(raw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None


def model_params_from_config(cfg: Mapping[str, str]) -> ModelParams:
    """Build ModelParams from the ``model.`` namespace of a flat config.

    Unknown ``model.`` keys are rejected rather than ignored; a silently
    misspelled rate is the worst failure mode a fitting run can have.
    """
    for a, b in _EXCLUSIVE_PAIRS[:2]:
        if a in cfg and b in cfg:
            raise ConfigError(f"{a} and {b} are mutually exclusive")
    kwargs = {}
    for key, raw in cfg.items():
        if not key.startswith("model."):
            continue
        if key not in _MODEL_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        attr, conv = _MODEL_KEYS[key]
        kwargs[attr] = _convert(key, raw, conv)
    try:
        return ModelParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def pulse_params_from_config(cfg: Mapping[str, str], params: ModelParams | None = None) -> PulseParams:
    """Build PulseParams from the ``pulse.`` namespace.

    ``pulse.photon_ratio`` sets the amplitude via eta0 = sqrt(r N) and needs
    the model parameters for N; it is mutually exclusive with ``pulse.eta0``.
    """
    if "pulse.eta0" in cfg and "pulse.photon_ratio" in cfg:
        raise ConfigError("pulse.eta0 and pulse.photon_ratio are mutually exclusive")
    kwargs = {}
    for key, raw in cfg.items():
        if not key.startswith("pulse."):
            continue
        if key == "pulse.photon_ratio":
            if params is None:
                raise ConfigError("pulse.photon_ratio requires model parameters")
            ratio = _convert(key, raw, float)
            try:
                kwargs["amplitude"] = drive_amplitude_from_photon_ratio(ratio, params.n_molecules)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            continue
        if key not in _PULSE_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        attr, conv = _PULSE_KEYS[key]
        kwargs[attr] = _convert(key, raw, conv)
    try:
        return PulseParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def known_config_keys() -> set[str]:
    """Every model./pulse. key the parsers accept (for CLI validation)."""
    return set(_MODEL_KEYS) | set(_PULSE_KEYS) | {"pulse.photon_ratio"}
