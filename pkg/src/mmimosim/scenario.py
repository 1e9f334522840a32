"""System configuration, array geometry, and scenario files.

The numerology here mirrors an LTE-like 20 MHz TDD uplink: a 2048-point
FFT at 15 kHz subcarrier spacing (30.72 MS/s), 1200 occupied
subcarriers, and a 10 ms radio frame of twenty 0.5 ms slots. The base
station is a large linear or rectangular array (128 elements in the
reference setup) serving up to 12 single-antenna clients.

Scenario files are YAML with strict validation: unknown sections or
keys are rejected, and every violation found is reported in a single
error message.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ScenarioError

SPEED_OF_LIGHT = 299792458.0


# ---------------------------------------------------------------------------
# system configuration


@dataclass(frozen=True)
class SystemConfig:
    """Radio-level constants for one deployment.

    All rates are in Hz, durations in seconds. The derived relations
    (sampling rate = n_fft * subcarrier spacing, frame = 10 subframes =
    20 slots) are enforced at construction time.
    """

    carrier_freq: float = 3.51e9
    bandwidth: float = 20e6
    sampling_rate: float = 30.72e6
    subcarrier_spacing: float = 15e3
    n_fft: int = 2048
    n_occupied: int = 1200
    frame_duration: float = 0.01
    subframe_duration: float = 1e-3
    slot_duration: float = 0.5e-3
    tdd_period_slots: int = 1
    n_bs_antennas: int = 128
    n_users: int = 12

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ScenarioError("; ".join(problems))

    def violations(self) -> list[str]:
        """Return every consistency violation (empty list when valid)."""
        p = []
        for name in ("carrier_freq", "bandwidth", "sampling_rate",
                     "subcarrier_spacing", "frame_duration",
                     "subframe_duration", "slot_duration"):
            if not getattr(self, name) > 0:
                p.append(f"system.{name} must be positive")
        for name in ("n_fft", "n_occupied", "tdd_period_slots",
                     "n_bs_antennas", "n_users"):
            if not (isinstance(getattr(self, name), int) and getattr(self, name) > 0):
                p.append(f"system.{name} must be a positive integer")
        if isinstance(self.n_fft, int) and isinstance(self.n_occupied, int) \
                and 0 < self.n_fft < self.n_occupied:
            p.append("system.n_occupied cannot exceed n_fft")
        if self.sampling_rate > 0 and self.subcarrier_spacing > 0 and self.n_fft > 0:
            if not math.isclose(self.sampling_rate,
                                self.n_fft * self.subcarrier_spacing,
                                rel_tol=1e-9):
                p.append("system.sampling_rate must equal n_fft * subcarrier_spacing")
        if self.frame_duration > 0 and self.subframe_duration > 0:
            if not math.isclose(self.frame_duration, 10 * self.subframe_duration,
                                rel_tol=1e-9):
                p.append("system.frame_duration must equal 10 subframes")
        if self.frame_duration > 0 and self.slot_duration > 0:
            if not math.isclose(self.frame_duration, 20 * self.slot_duration,
                                rel_tol=1e-9):
                p.append("system.frame_duration must equal 20 slots")
        return p

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def slots_per_frame(self) -> int:
        return int(round(self.frame_duration / self.slot_duration))


def default_config() -> SystemConfig:
    """The reference 128-antenna, 12-user deployment."""
    return SystemConfig()


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class ArrayGeometry:
    """Base-station element positions in metres with per-element
    polarisation tags and the design wavelength."""

    positions: np.ndarray            # (M, 3)
    polarisations: tuple[str, ...]   # 'H' or 'V' per element
    wavelength: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", pos)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ScenarioError("array positions must have shape (n_elements, 3)")
        if not np.all(np.isfinite(pos)):
            raise ScenarioError("array positions must be finite")
        if len(self.polarisations) != pos.shape[0]:
            raise ScenarioError("one polarisation tag required per element")
        if any(tag not in ("H", "V") for tag in self.polarisations):
            raise ScenarioError("polarisation tags must be 'H' or 'V'")
        if not self.wavelength > 0:
            raise ScenarioError("array wavelength must be positive")
        if pos.shape[0] > 1:
            d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
            np.fill_diagonal(d2, np.inf)
            if d2.min() <= 0.0:
                raise ScenarioError("array element positions must be unique")

    @property
    def n_elements(self) -> int:
        return self.positions.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    @property
    def aperture(self) -> float:
        """Largest pairwise element separation in metres."""
        if self.n_elements == 1:
            return 0.0
        pos = self.positions
        d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))


def make_ula(n_elements: int, build_freq_hz: float) -> ArrayGeometry:
    """Uniform linear array along the x axis at half-wavelength pitch.

    The pitch comes from ``build_freq_hz`` (the frequency the array was
    built for), which may differ slightly from the operating carrier.
    Elements are centred on the origin and all vertically polarised.
    """
    if not (isinstance(n_elements, int) and n_elements >= 1):
        raise ScenarioError("array.n_elements must be a positive integer")
    if not build_freq_hz > 0:
        raise ScenarioError("array.build_freq_hz must be positive")
    spacing = SPEED_OF_LIGHT / build_freq_hz / 2.0
    x = (np.arange(n_elements) - (n_elements - 1) / 2.0) * spacing
    pos = np.column_stack([x, np.zeros(n_elements), np.zeros(n_elements)])
    return ArrayGeometry(pos, ("V",) * n_elements, SPEED_OF_LIGHT / build_freq_hz)


def make_ura(n_rows: int, n_cols: int, spacing_wavelengths: float,
             build_freq_hz: float) -> ArrayGeometry:
    """Uniform rectangular array in the x-z plane.

    Elements are indexed row-major and alternate 'H'/'V' polarisation
    along that raster, so a 4x32 panel carries 64 of each.
    """
    if not (isinstance(n_rows, int) and n_rows >= 1
            and isinstance(n_cols, int) and n_cols >= 1):
        raise ScenarioError("array.n_rows and array.n_cols must be positive integers")
    if not spacing_wavelengths > 0:
        raise ScenarioError("array.spacing_wavelengths must be positive")
    if not build_freq_hz > 0:
        raise ScenarioError("array.build_freq_hz must be positive")
    wavelength = SPEED_OF_LIGHT / build_freq_hz
    d = spacing_wavelengths * wavelength
    rows, cols = np.meshgrid(np.arange(n_rows), np.arange(n_cols), indexing="ij")
    x = (cols.ravel() - (n_cols - 1) / 2.0) * d
    z = (rows.ravel() - (n_rows - 1) / 2.0) * d
    pos = np.column_stack([x, np.zeros(x.size), z])
    pol = tuple("H" if i % 2 == 0 else "V" for i in range(n_rows * n_cols))
    return ArrayGeometry(pos, pol, wavelength)


@dataclass(frozen=True)
class UePlacement:
    """Client terminal positions in metres, one row per user."""

    positions: np.ndarray  # (K, 3)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", pos)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ScenarioError("user positions must have shape (n_users, 3)")
        if not np.all(np.isfinite(pos)):
            raise ScenarioError("user positions must be finite")

    @property
    def n_users(self) -> int:
        return self.positions.shape[0]


def place_ue_line(n_users: int, spacing_wavelengths: float, distance_m: float,
                  build_freq_hz: float, rotation_deg: float = 0.0) -> UePlacement:
    """Clients on a straight line parallel to the array at a given
    perpendicular distance.

    The line is centred on the array boresight (the +y axis) and may be
    rotated about its own centre in the horizontal plane.
    """
    if not (isinstance(n_users, int) and n_users >= 1):
        raise ScenarioError("users.n_users must be a positive integer")
    if not spacing_wavelengths > 0:
        raise ScenarioError("users.spacing_wavelengths must be positive")
    if not distance_m > 0:
        raise ScenarioError("users.distance_m must be positive")
    if not build_freq_hz > 0:
        raise ScenarioError("users.build_freq_hz must be positive")
    wavelength = SPEED_OF_LIGHT / build_freq_hz
    offsets = (np.arange(n_users) - (n_users - 1) / 2.0) * spacing_wavelengths * wavelength
    phi = math.radians(rotation_deg)
    direction = np.array([math.cos(phi), math.sin(phi), 0.0])
    centre = np.array([0.0, distance_m, 0.0])
    return UePlacement(centre[None, :] + offsets[:, None] * direction[None, :])


# ---------------------------------------------------------------------------
# scenario sections


@dataclass(frozen=True)
class ArraySpec:
    kind: str = "ula"                 # 'ula' or 'ura'
    n_elements: int = 128
    n_rows: int = 4
    n_cols: int = 32
    spacing_wavelengths: float = 0.5
    build_freq_hz: float = 3.5e9


@dataclass(frozen=True)
class UserSpec:
    kind: str = "line"
    n_users: int = 12
    spacing_wavelengths: float = 2.5
    distance_m: float = 24.8
    rotation_deg: float = 0.0
    build_freq_hz: float = 3.5e9


@dataclass(frozen=True)
class LinkSpec:
    model: str = "spherical"          # 'spherical', 'planar', or 'iid'
    detector: str = "mmse"            # 'mmse', 'zf', or 'mrc'
    modulation_order: int = 256
    snr_db: float = 30.0
    n_symbols: int = 2000
    amplitude_decay: bool = False
    ue_polarisation: Optional[str] = None   # None, 'H', or 'V'
    xpd: float = 0.0


@dataclass(frozen=True)
class PowerControlSpec:
    algorithm: str = "fixed_sinr"     # 'fixed_snr', 'fixed_sinr', 'hardening'
    target_db: float = 10.0
    initial_power_dbm: float = 0.0
    n_iterations: int = 30
    noise_power_dbm: float = 0.0
    path_gains_db: tuple[float, ...] = (0.0, -20.0)
    update_interval_slots: int = 10
    fading: str = "static"            # 'static' or 'iid'
    detector: str = "mmse"
    interference_margin_db: float = 0.0


@dataclass(frozen=True)
class LocateSpec:
    azimuths_deg: tuple[float, ...] = (20.0,)
    n_sources: int = 1
    grid_start_deg: float = -90.0
    grid_stop_deg: float = 90.0
    grid_step_deg: float = 0.01
    n_snapshots: int = 100
    snr_db: float = 10.0
    n_subarrays: int = 1
    anchors_m: Optional[tuple[tuple[float, float, float], ...]] = None
    source_m: Optional[tuple[float, float, float]] = None
    tdoa_noise_s: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """One fully resolved simulation configuration."""

    system: SystemConfig = field(default_factory=default_config)
    array: ArraySpec = field(default_factory=ArraySpec)
    users: UserSpec = field(default_factory=UserSpec)
    schedule: Any = None              # frame.FrameSchedule, set in __post_init__
    link: LinkSpec = field(default_factory=LinkSpec)
    powercontrol: Optional[PowerControlSpec] = None
    taps: Any = None                  # channel.TapSet or None
    locate: Optional[LocateSpec] = None

    def __post_init__(self):
        if self.schedule is None:
            from . import frame
            object.__setattr__(self, "schedule", frame.default_schedule())
        problems = self._cross_violations()
        if problems:
            raise ScenarioError("; ".join(problems))

    def _cross_violations(self) -> list[str]:
        p = []
        if self.array.kind == "ula":
            n = self.array.n_elements
        else:
            n = self.array.n_rows * self.array.n_cols
        if n != self.system.n_bs_antennas:
            p.append(f"array provides {n} elements but system.n_bs_antennas is "
                     f"{self.system.n_bs_antennas}")
        if self.users.n_users != self.system.n_users:
            p.append(f"users.n_users ({self.users.n_users}) must match "
                     f"system.n_users ({self.system.n_users})")
        return p

    def build_geometry(self) -> ArrayGeometry:
        a = self.array
        if a.kind == "ula":
            return make_ula(a.n_elements, a.build_freq_hz)
        return make_ura(a.n_rows, a.n_cols, a.spacing_wavelengths, a.build_freq_hz)

    def build_placement(self) -> UePlacement:
        u = self.users
        return place_ue_line(u.n_users, u.spacing_wavelengths, u.distance_m,
                             u.build_freq_hz, u.rotation_deg)


def default_scenario() -> Scenario:
    return Scenario()


# ---------------------------------------------------------------------------
# scenario file parsing

_SYSTEM_KEYS = {
    "carrier_freq_hz": ("carrier_freq", float),
    "bandwidth_hz": ("bandwidth", float),
    "sampling_rate_hz": ("sampling_rate", float),
    "subcarrier_spacing_hz": ("subcarrier_spacing", float),
    "n_fft": ("n_fft", int),
    "n_occupied": ("n_occupied", int),
    "frame_duration_s": ("frame_duration", float),
    "subframe_duration_s": ("subframe_duration", float),
    "slot_duration_s": ("slot_duration", float),
    "tdd_period_slots": ("tdd_period_slots", int),
    "n_bs_antennas": ("n_bs_antennas", int),
    "n_users": ("n_users", int),
}

_ARRAY_KEYS = {
    "kind": ("kind", str),
    "n_elements": ("n_elements", int),
    "n_rows": ("n_rows", int),
    "n_cols": ("n_cols", int),
    "spacing_wavelengths": ("spacing_wavelengths", float),
    "build_freq_hz": ("build_freq_hz", float),
}

_USER_KEYS = {
    "kind": ("kind", str),
    "n_users": ("n_users", int),
    "spacing_wavelengths": ("spacing_wavelengths", float),
    "distance_m": ("distance_m", float),
    "rotation_deg": ("rotation_deg", float),
    "build_freq_hz": ("build_freq_hz", float),
}

_SCHEDULE_KEYS = {
    "symbols_per_slot": ("symbols_per_slot", int),
    "slots_per_frame": ("slots_per_frame", int),
    "ul_pilot_symbols": ("ul_pilot_symbols_per_frame", int),
    "ul_data_symbols": ("ul_data_symbols_per_frame", int),
    "dl_symbols": ("dl_symbols_per_frame", int),
}

_LINK_KEYS = {
    "model": ("model", str),
    "detector": ("detector", str),
    "modulation_order": ("modulation_order", int),
    "snr_db": ("snr_db", float),
    "n_symbols": ("n_symbols", int),
    "amplitude_decay": ("amplitude_decay", bool),
    "ue_polarisation": ("ue_polarisation", str),
    "xpd": ("xpd", float),
}

_PC_KEYS = {
    "algorithm": ("algorithm", str),
    "target_db": ("target_db", float),
    "initial_power_dbm": ("initial_power_dbm", float),
    "n_iterations": ("n_iterations", int),
    "noise_power_dbm": ("noise_power_dbm", float),
    "path_gains_db": ("path_gains_db", "float_list"),
    "update_interval_slots": ("update_interval_slots", int),
    "fading": ("fading", str),
    "detector": ("detector", str),
    "interference_margin_db": ("interference_margin_db", float),
}

_LOCATE_KEYS = {
    "azimuths_deg": ("azimuths_deg", "float_list"),
    "n_sources": ("n_sources", int),
    "grid_start_deg": ("grid_start_deg", float),
    "grid_stop_deg": ("grid_stop_deg", float),
    "grid_step_deg": ("grid_step_deg", float),
    "n_snapshots": ("n_snapshots", int),
    "snr_db": ("snr_db", float),
    "n_subarrays": ("n_subarrays", int),
    "anchors_m": ("anchors_m", "point_list"),
    "source_m": ("source_m", "point"),
    "tdoa_noise_s": ("tdoa_noise_s", float),
}

_SECTIONS = ("system", "array", "users", "schedule", "link",
             "powercontrol", "taps", "locate")

_CHOICES = {
    "array.kind": ("ula", "ura"),
    "users.kind": ("line",),
    "link.model": ("spherical", "planar", "iid"),
    "link.detector": ("mmse", "zf", "mrc"),
    "link.ue_polarisation": ("H", "V"),
    "powercontrol.algorithm": ("fixed_snr", "fixed_sinr", "hardening"),
    "powercontrol.fading": ("static", "iid"),
    "powercontrol.detector": ("mmse", "zf", "mrc"),
}


def _coerce(section: str, key: str, value, kind, problems: list[str]):
    label = f"{section}.{key}"
    if kind is bool:
        if isinstance(value, bool):
            return value
        problems.append(f"{label} must be a boolean")
        return None
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{label} must be an integer")
            return None
        return value
    if kind is float:
        if isinstance(value, str):
            # YAML 1.1 reads exponents like 3.5e9 (no sign) as strings
            try:
                return float(value)
            except ValueError:
                problems.append(f"{label} must be a number")
                return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{label} must be a number")
            return None
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            problems.append(f"{label} must be a string")
            return None
        if label in _CHOICES and value not in _CHOICES[label]:
            problems.append(f"{label} must be one of {', '.join(_CHOICES[label])}")
            return None
        return value
    if kind == "float_list":
        if (not isinstance(value, (list, tuple)) or len(value) == 0
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in value)):
            problems.append(f"{label} must be a non-empty list of numbers")
            return None
        return tuple(float(v) for v in value)
    if kind == "point":
        if (not isinstance(value, (list, tuple)) or len(value) != 3
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in value)):
            problems.append(f"{label} must be a 3-element [x, y, z] list")
            return None
        return tuple(float(v) for v in value)
    if kind == "point_list":
        if not isinstance(value, (list, tuple)) or len(value) == 0:
            problems.append(f"{label} must be a non-empty list of [x, y, z] points")
            return None
        out = []
        for v in value:
            pt = _coerce(section, key, v, "point", problems)
            if pt is None:
                return None
            out.append(pt)
        return tuple(out)
    raise AssertionError(f"unknown coercion kind {kind!r}")


def _parse_section(name: str, mapping, schema, problems: list[str]) -> dict:
    out = {}
    if mapping is None:
        return out
    if not isinstance(mapping, dict):
        problems.append(f"section '{name}' must be a mapping")
        return out
    for key, value in mapping.items():
        if key not in schema:
            problems.append(f"{name}: unknown key '{key}'")
            continue
        attr, kind = schema[key]
        coerced = _coerce(name, key, value, kind, problems)
        if coerced is not None:
            out[attr] = coerced
    return out


def _parse_taps(raw, problems: list[str]):
    from . import channel
    if not isinstance(raw, list) or len(raw) == 0:
        problems.append("taps must be a non-empty list of tap mappings")
        return None
    delays, gains, directions = [], [], []
    any_direction = False
    for i, tap in enumerate(raw):
        if not isinstance(tap, dict):
            problems.append(f"taps[{i}] must be a mapping")
            continue
        unknown = set(tap) - {"delay_s", "gain_re", "gain_im", "azimuth_deg"}
        for key in sorted(unknown):
            problems.append(f"taps[{i}]: unknown key '{key}'")
        sub = []
        delay = _coerce(f"taps[{i}]", "delay_s", tap.get("delay_s", 0.0), float, sub)
        gre = _coerce(f"taps[{i}]", "gain_re", tap.get("gain_re", 1.0), float, sub)
        gim = _coerce(f"taps[{i}]", "gain_im", tap.get("gain_im", 0.0), float, sub)
        problems.extend(sub)
        if sub:
            continue
        if delay < 0:
            problems.append(f"taps[{i}].delay_s must be non-negative")
            continue
        delays.append(delay)
        gains.append(complex(gre, gim))
        if "azimuth_deg" in tap:
            any_direction = True
            az = _coerce(f"taps[{i}]", "azimuth_deg", tap["azimuth_deg"], float, problems)
            directions.append(channel.aoa_direction(az if az is not None else 0.0))
        else:
            directions.append(None)
    if problems or not delays:
        return None
    dirs = None
    if any_direction:
        dirs = np.array([d if d is not None else np.array([0.0, -1.0, 0.0])
                         for d in directions])
    return channel.TapSet(np.array(delays), np.array(gains), dirs)


def scenario_from_mapping(raw: dict) -> Scenario:
    """Build a validated Scenario from a parsed YAML mapping."""
    from . import frame

    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must contain a top-level mapping")
    for key in raw:
        if key not in _SECTIONS:
            problems.append(f"unknown section '{key}'")

    system_kw = _parse_section("system", raw.get("system"), _SYSTEM_KEYS, problems)
    array_kw = _parse_section("array", raw.get("array"), _ARRAY_KEYS, problems)
    user_kw = _parse_section("users", raw.get("users"), _USER_KEYS, problems)
    sched_kw = _parse_section("schedule", raw.get("schedule"), _SCHEDULE_KEYS, problems)
    link_kw = _parse_section("link", raw.get("link"), _LINK_KEYS, problems)
    pc_kw = _parse_section("powercontrol", raw.get("powercontrol"), _PC_KEYS, problems)
    loc_kw = _parse_section("locate", raw.get("locate"), _LOCATE_KEYS, problems)
    taps = None
    if "taps" in raw:
        taps = _parse_taps(raw["taps"], problems)

    system = array_spec = users = schedule = link = None
    pc = loc = None
    try:
        system = SystemConfig(**system_kw)
    except ScenarioError as exc:
        problems.append(str(exc))
    array_spec = ArraySpec(**array_kw)
    users = UserSpec(**user_kw)
    try:
        schedule = frame.FrameSchedule(**sched_kw) if sched_kw else frame.default_schedule()
    except ScenarioError as exc:
        problems.append(str(exc))
    link = LinkSpec(**link_kw)
    if "powercontrol" in raw:
        pc = PowerControlSpec(**pc_kw)
    if "locate" in raw:
        loc = LocateSpec(**loc_kw)

    if problems:
        raise ScenarioError("; ".join(problems))
    return Scenario(system=system, array=array_spec, users=users,
                    schedule=schedule, link=link, powercontrol=pc,
                    taps=taps, locate=loc)


def load_scenario(path) -> Scenario:
    """Parse and validate a YAML scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"cannot parse scenario file: {exc}") from exc
    if raw is None:
        raw = {}
    return scenario_from_mapping(raw)


def scenario_to_mapping(scn: Scenario) -> dict:
    """Inverse of scenario_from_mapping, for saving scenarios to disk."""
    out: dict[str, Any] = {
        "system": {
            "carrier_freq_hz": scn.system.carrier_freq,
            "bandwidth_hz": scn.system.bandwidth,
            "sampling_rate_hz": scn.system.sampling_rate,
            "subcarrier_spacing_hz": scn.system.subcarrier_spacing,
            "n_fft": scn.system.n_fft,
            "n_occupied": scn.system.n_occupied,
            "frame_duration_s": scn.system.frame_duration,
            "subframe_duration_s": scn.system.subframe_duration,
            "slot_duration_s": scn.system.slot_duration,
            "tdd_period_slots": scn.system.tdd_period_slots,
            "n_bs_antennas": scn.system.n_bs_antennas,
            "n_users": scn.system.n_users,
        },
        "array": {
            "kind": scn.array.kind,
            "n_elements": scn.array.n_elements,
            "n_rows": scn.array.n_rows,
            "n_cols": scn.array.n_cols,
            "spacing_wavelengths": scn.array.spacing_wavelengths,
            "build_freq_hz": scn.array.build_freq_hz,
        },
        "users": {
            "kind": scn.users.kind,
            "n_users": scn.users.n_users,
            "spacing_wavelengths": scn.users.spacing_wavelengths,
            "distance_m": scn.users.distance_m,
            "rotation_deg": scn.users.rotation_deg,
            "build_freq_hz": scn.users.build_freq_hz,
        },
        "schedule": {
            "symbols_per_slot": scn.schedule.symbols_per_slot,
            "slots_per_frame": scn.schedule.slots_per_frame,
            "ul_pilot_symbols": scn.schedule.ul_pilot_symbols_per_frame,
            "ul_data_symbols": scn.schedule.ul_data_symbols_per_frame,
            "dl_symbols": scn.schedule.dl_symbols_per_frame,
        },
        "link": {
            "model": scn.link.model,
            "detector": scn.link.detector,
            "modulation_order": scn.link.modulation_order,
            "snr_db": scn.link.snr_db,
            "n_symbols": scn.link.n_symbols,
            "amplitude_decay": scn.link.amplitude_decay,
            "xpd": scn.link.xpd,
        },
    }
    if scn.link.ue_polarisation is not None:
        out["link"]["ue_polarisation"] = scn.link.ue_polarisation
    if scn.powercontrol is not None:
        pc = scn.powercontrol
        out["powercontrol"] = {
            "algorithm": pc.algorithm,
            "target_db": pc.target_db,
            "initial_power_dbm": pc.initial_power_dbm,
            "n_iterations": pc.n_iterations,
            "noise_power_dbm": pc.noise_power_dbm,
            "path_gains_db": list(pc.path_gains_db),
            "update_interval_slots": pc.update_interval_slots,
            "fading": pc.fading,
            "detector": pc.detector,
            "interference_margin_db": pc.interference_margin_db,
        }
    if scn.taps is not None:
        out["taps"] = [
            {"delay_s": float(d), "gain_re": float(g.real), "gain_im": float(g.imag)}
            for d, g in zip(scn.taps.delays, np.atleast_1d(scn.taps.gains))
        ]
    if scn.locate is not None:
        lc = scn.locate
        loc_out: dict[str, Any] = {
            "azimuths_deg": list(lc.azimuths_deg),
            "n_sources": lc.n_sources,
            "grid_start_deg": lc.grid_start_deg,
            "grid_stop_deg": lc.grid_stop_deg,
            "grid_step_deg": lc.grid_step_deg,
            "n_snapshots": lc.n_snapshots,
            "snr_db": lc.snr_db,
            "n_subarrays": lc.n_subarrays,
            "tdoa_noise_s": lc.tdoa_noise_s,
        }
        if lc.anchors_m is not None:
            loc_out["anchors_m"] = [list(a) for a in lc.anchors_m]
        if lc.source_m is not None:
            loc_out["source_m"] = list(lc.source_m)
        out["locate"] = loc_out
    return out


def save_scenario(scn: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_mapping(scn), fh, sort_keys=False)
