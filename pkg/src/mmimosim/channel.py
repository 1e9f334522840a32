"""Narrowband and wideband channel synthesis.

Phase convention: a propagating wavefront is represented with entries
exp(+j 2 pi r / lambda) where r is the path length, so elements further
from the source lead in phase. The matching plane-wave signature of an
arrival is therefore evaluated along the propagation direction (from
the source towards the array); ``aoa_direction`` converts a bearing to
that vector. Channel matrices are stored users x antennas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ScenarioError
from .scenario import SPEED_OF_LIGHT, ArrayGeometry, UePlacement


# ---------------------------------------------------------------------------
# frequency grids and container types


@dataclass(frozen=True)
class FrequencyGrid:
    """Occupied-subcarrier grid, either dense or comb-decimated.

    A dense grid has stride 1 and holds every occupied tone. A
    decimated grid keeps one tone in every ``stride`` (one per resource
    block when stride is 12), with a per-user comb offset so different
    users sample interleaved tones.
    """

    n_occupied: int
    subcarrier_spacing: float
    stride: int = 1
    user_offsets: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if not (isinstance(self.n_occupied, int) and self.n_occupied >= 1):
            raise ScenarioError("grid n_occupied must be a positive integer")
        if not self.subcarrier_spacing > 0:
            raise ScenarioError("grid subcarrier_spacing must be positive")
        if not (isinstance(self.stride, int) and self.stride >= 1):
            raise ScenarioError("grid stride must be a positive integer")
        if self.n_occupied % self.stride != 0:
            raise ScenarioError("grid n_occupied must be divisible by stride")
        if self.stride == 1:
            if self.user_offsets is not None:
                raise ScenarioError("dense grids take no user offsets")
        else:
            if self.user_offsets is None:
                raise ScenarioError("decimated grids need per-user offsets")
            if any(not (0 <= o < self.stride) for o in self.user_offsets):
                raise ScenarioError("grid user offsets must lie in [0, stride)")

    @property
    def kind(self) -> str:
        return "full_occupied" if self.stride == 1 else "rb_decimated"

    @property
    def n_points(self) -> int:
        return self.n_occupied // self.stride

    def tone_indices(self, user: int = 0) -> np.ndarray:
        """Occupied-tone indices sampled for one user."""
        offset = 0 if self.user_offsets is None else self.user_offsets[user]
        return np.arange(offset, self.n_occupied, self.stride)

    def frequencies(self, user: int = 0) -> np.ndarray:
        """Baseband tone frequencies in Hz, measured from the first
        occupied subcarrier."""
        return self.tone_indices(user) * self.subcarrier_spacing


def full_grid(n_occupied: int, subcarrier_spacing: float) -> FrequencyGrid:
    return FrequencyGrid(n_occupied, subcarrier_spacing)


@dataclass(frozen=True)
class SpatialSignature:
    """Plane-wave array response along one unit direction."""

    coefficients: np.ndarray   # (M,) complex, unit modulus
    direction: np.ndarray      # (3,) unit vector
    wavelength: float


@dataclass(frozen=True)
class ChannelMatrix:
    """Narrowband channel, one row per user, one column per antenna."""

    matrix: np.ndarray   # (K, M) complex
    model: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2:
            raise ScenarioError("channel matrix must be two-dimensional")

    @property
    def n_users(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class TapSet:
    """Sparse delay-domain description of a wideband channel.

    ``gains`` is either one shared complex gain per tap, shape (L,), or
    per-user gains with shape (K, L). Each tap may carry its own
    arrival direction (propagation unit vector); without directions the
    tap illuminates all antennas with equal phase.
    """

    delays: np.ndarray                      # (L,) seconds
    gains: np.ndarray                       # (L,) or (K, L) complex
    directions: Optional[np.ndarray] = None  # (L, 3)

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=float)
        gains = np.asarray(self.gains, dtype=complex)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "gains", gains)
        if delays.ndim != 1 or delays.size == 0:
            raise ScenarioError("tap delays must be a non-empty 1-D array")
        if np.any(delays < 0):
            raise ScenarioError("tap delays must be non-negative")
        if gains.shape[-1] != delays.size or gains.ndim not in (1, 2):
            raise ScenarioError("tap gains must have shape (L,) or (n_users, L)")
        if self.directions is not None:
            d = np.asarray(self.directions, dtype=float)
            object.__setattr__(self, "directions", d)
            if d.shape != (delays.size, 3):
                raise ScenarioError("tap directions must have shape (L, 3)")

    @property
    def n_taps(self) -> int:
        return self.delays.size


@dataclass(frozen=True)
class ChannelTensor:
    """Frequency-resolved channel: tones x antennas x users.

    ``alias_free_delay`` records the longest delay the underlying tone
    sampling can represent without wrap-around; it is None when the
    tensor was synthesised directly on a dense grid.
    """

    cfr: np.ndarray          # (F, M, K) complex
    grid: FrequencyGrid
    model: str = "tapped"
    alias_free_delay: Optional[float] = None

    def __post_init__(self):
        cfr = np.asarray(self.cfr, dtype=complex)
        object.__setattr__(self, "cfr", cfr)
        if cfr.ndim != 3:
            raise ScenarioError("channel tensor must be tones x antennas x users")
        if cfr.shape[0] != self.grid.n_points:
            raise ScenarioError(
                f"tensor has {cfr.shape[0]} tone rows but the grid defines "
                f"{self.grid.n_points} points")
        if (self.grid.user_offsets is not None
                and len(self.grid.user_offsets) != cfr.shape[2]):
            raise ScenarioError("grid user offsets must match the user axis")

    @property
    def n_antennas(self) -> int:
        return self.cfr.shape[1]

    @property
    def n_users(self) -> int:
        return self.cfr.shape[2]


# ---------------------------------------------------------------------------
# plane-wave and spherical synthesis


def aoa_direction(azimuth_deg: float, elevation_deg: float = 0.0) -> np.ndarray:
    """Propagation unit vector for a source at the given bearing.

    Azimuth is measured from array boresight (+y) towards +x, elevation
    from the horizontal plane towards +z. The returned vector points
    from the source towards the array, which is the direction a
    signature of the arriving wave must be evaluated along.
    """
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    bearing = np.array([math.sin(az) * math.cos(el),
                        math.cos(az) * math.cos(el),
                        math.sin(el)])
    return -bearing


def spatial_signature(geometry: ArrayGeometry, direction,
                      wavelength: Optional[float] = None) -> SpatialSignature:
    """Array response exp(+j 2 pi p . d / lambda) along a unit vector d."""
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,):
        raise ScenarioError("direction must be a 3-vector")
    norm = np.linalg.norm(d)
    if abs(norm - 1.0) > 1e-9:
        raise ScenarioError(f"direction must be a unit vector (norm {norm:.3e})")
    lam = geometry.wavelength if wavelength is None else wavelength
    if not lam > 0:
        raise ScenarioError("wavelength must be positive")
    phase = 2.0 * np.pi / lam * (geometry.positions @ d)
    return SpatialSignature(np.exp(1j * phase), d, lam)


def planar_channel(row_signature: SpatialSignature,
                   col_signature: SpatialSignature) -> ChannelMatrix:
    """Rank-one far-field channel: the outer product of two signatures.

    Rows follow the first argument, columns the second.
    """
    return ChannelMatrix(
        np.outer(row_signature.coefficients, col_signature.coefficients),
        model="planar")


def spherical_channel(geometry: ArrayGeometry, placement: UePlacement,
                      amplitude_decay: bool = False) -> ChannelMatrix:
    """Exact spherical-wavefront channel from element-wise path lengths.

    Entries are exp(+j 2 pi r / lambda), optionally scaled by 1/r, with
    r in metres. No spacing assumption is made, so the model stays
    valid inside the Fraunhofer distance of a large array.
    """
    diff = placement.positions[:, None, :] - geometry.positions[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r <= 0.0):
        raise ScenarioError("a user position coincides with an array element")
    h = np.exp(1j * 2.0 * np.pi / geometry.wavelength * r)
    if amplitude_decay:
        h = h / r
    return ChannelMatrix(h, model="spherical")


def iid_rayleigh(n_users: int, n_antennas: int, seed=0) -> ChannelMatrix:
    """Unit-variance complex Gaussian channel.

    Rows are drawn from independent per-user substreams split off the
    seed, so user k sees the same fades regardless of how many other
    users are simulated alongside it.
    """
    if n_users < 1 or n_antennas < 1:
        raise ScenarioError("channel dimensions must be positive")
    children = np.random.SeedSequence(seed).spawn(n_users)
    rows = np.empty((n_users, n_antennas), dtype=complex)
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        rows[k] = (rng.standard_normal(n_antennas)
                   + 1j * rng.standard_normal(n_antennas)) / math.sqrt(2.0)
    return ChannelMatrix(rows, model="iid")


def polarisation_gains(geometry: ArrayGeometry, ue_polarisation: Optional[str],
                       xpd: float = 0.0) -> np.ndarray:
    """Per-element amplitude factors for a polarised client.

    Co-polarised elements receive gain 1, cross-polarised elements
    sqrt(xpd). An unpolarised client (None) couples fully into every
    element.
    """
    if ue_polarisation is None:
        return np.ones(geometry.n_elements)
    if ue_polarisation not in ("H", "V"):
        raise ScenarioError("ue polarisation must be 'H', 'V', or None")
    if not 0.0 <= xpd <= 1.0:
        raise ScenarioError("xpd must lie in [0, 1]")
    return np.array([1.0 if tag == ue_polarisation else math.sqrt(xpd)
                     for tag in geometry.polarisations])


def los_channel(geometry: ArrayGeometry, placement: UePlacement,
                model: str = "spherical", amplitude_decay: bool = False,
                ue_polarisation: Optional[str] = None,
                xpd: float = 0.0) -> ChannelMatrix:
    """Line-of-sight channel for every user, spherical or planar.

    The planar variant evaluates one plane-wave signature per user
    along the propagation direction from that user to the array
    centroid, which the spherical model converges to in the far field.
    """
    if model == "spherical":
        cm = spherical_channel(geometry, placement, amplitude_decay)
    elif model == "planar":
        centre = geometry.centroid
        rows = np.empty((placement.n_users, geometry.n_elements), dtype=complex)
        for k, pos in enumerate(placement.positions):
            path = centre - pos
            dist = np.linalg.norm(path)
            if dist <= 0.0:
                raise ScenarioError("a user position coincides with the array centre")
            sig = spatial_signature(geometry, path / dist)
            rows[k] = sig.coefficients
            if amplitude_decay:
                rows[k] /= dist
        cm = ChannelMatrix(rows, model="planar")
    else:
        raise ScenarioError(f"unknown line-of-sight model '{model}'")
    gains = polarisation_gains(geometry, ue_polarisation, xpd)
    if ue_polarisation is not None:
        cm = ChannelMatrix(cm.matrix * gains[None, :], model=cm.model)
    return cm


def fraunhofer_distance(geometry: ArrayGeometry) -> float:
    """Far-field boundary 2 D^2 / lambda of the array aperture."""
    d = geometry.aperture
    return 2.0 * d * d / geometry.wavelength


def phase_aligned_distance(a, b) -> float:
    """Relative l2 distance between two complex arrays after removing
    the best global phase: min over phi of ||exp(j phi) a - b|| / ||b||."""
    av = np.asarray(a, dtype=complex).ravel()
    bv = np.asarray(b, dtype=complex).ravel()
    if av.shape != bv.shape:
        raise ScenarioError("arrays must have matching shapes")
    nb = np.linalg.norm(bv)
    if nb == 0.0:
        raise ScenarioError("reference array must be non-zero")
    inner = np.vdot(bv, av)
    err2 = np.linalg.norm(av) ** 2 + nb ** 2 - 2.0 * abs(inner)
    return math.sqrt(max(err2, 0.0)) / nb


# ---------------------------------------------------------------------------
# wideband synthesis


def tapped_cfr(taps: TapSet, geometry: ArrayGeometry,
               placement: Union[UePlacement, int],
               grid: FrequencyGrid) -> ChannelTensor:
    """Frequency response of a sparse multipath channel on a tone grid.

    Each tap contributes gain * exp(-j 2 pi f tau) on every tone, so a
    positive delay appears at a positive lag after an inverse FFT. Taps
    with a direction are weighted by the matching plane-wave signature;
    directionless taps excite all antennas in phase.
    """
    if isinstance(placement, UePlacement):
        n_users = placement.n_users
    else:
        n_users = int(placement)
        if n_users < 1:
            raise ScenarioError("number of users must be positive")
    gains = taps.gains
    if gains.ndim == 1:
        gains = np.broadcast_to(gains, (n_users, taps.n_taps))
    elif gains.shape[0] != n_users:
        raise ScenarioError("per-user tap gains must match the user count")

    m = geometry.n_elements
    signatures = np.ones((taps.n_taps, m), dtype=complex)
    if taps.directions is not None:
        for l in range(taps.n_taps):
            signatures[l] = spatial_signature(geometry, taps.directions[l]).coefficients

    cfr = np.empty((grid.n_points, m, n_users), dtype=complex)
    for k in range(n_users):
        f = grid.frequencies(k)                              # (F,)
        phase = np.exp(-2j * np.pi * np.outer(f, taps.delays))  # (F, L)
        cfr[:, :, k] = (phase * gains[k][None, :]) @ signatures
    alias_free = None
    if grid.stride > 1:
        alias_free = 1.0 / (grid.stride * grid.subcarrier_spacing)
    return ChannelTensor(cfr, grid, model="tapped", alias_free_delay=alias_free)


# ---------------------------------------------------------------------------
# tensor persistence


def save_tensor(tensor: ChannelTensor, path, fmt: str = "binary") -> None:
    """Write a tensor to disk with a structured-text sidecar header.

    Binary mode stores raw little-endian complex128 values in C order
    and round-trips losslessly. CSV mode writes one
    (tone, antenna, user, re, im) row per entry at full double
    precision for interoperability.
    """
    path = str(path)
    offsets = tensor.grid.user_offsets
    meta_lines = [
        "mmimosim channel tensor",
        f"format: {fmt}",
        f"shape: {tensor.cfr.shape[0]} {tensor.cfr.shape[1]} {tensor.cfr.shape[2]}",
        f"model: {tensor.model}",
        f"n_occupied: {tensor.grid.n_occupied}",
        f"subcarrier_spacing_hz: {tensor.grid.subcarrier_spacing!r}",
        f"stride: {tensor.grid.stride}",
        "user_offsets: " + ("none" if offsets is None
                            else " ".join(str(o) for o in offsets)),
        "alias_free_delay_s: " + ("none" if tensor.alias_free_delay is None
                                  else repr(tensor.alias_free_delay)),
    ]
    with open(path + ".meta", "w", encoding="utf-8") as fh:
        fh.write("\n".join(meta_lines) + "\n")
    if fmt == "binary":
        tensor.cfr.astype("<c16").tofile(path)
    elif fmt == "csv":
        f_idx, a_idx, u_idx = np.meshgrid(
            np.arange(tensor.cfr.shape[0]), np.arange(tensor.cfr.shape[1]),
            np.arange(tensor.cfr.shape[2]), indexing="ij")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("tone,antenna,user,re,im\n")
            flat = tensor.cfr.ravel()
            for fi, ai, ui, v in zip(f_idx.ravel(), a_idx.ravel(),
                                     u_idx.ravel(), flat):
                fh.write(f"{fi},{ai},{ui},{float(v.real)!r},{float(v.imag)!r}\n")
    else:
        raise ScenarioError(f"unknown tensor format '{fmt}'")


def _parse_meta(path: str) -> dict:
    meta: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise ScenarioError(f"missing tensor header file {path}")
    for line in lines[1:]:
        if not line.strip():
            continue
        if ":" not in line:
            raise ScenarioError(f"malformed tensor header line: {line!r}")
        key, value = line.split(":", 1)
        meta[key.strip()] = value.strip()
    required = {"format", "shape", "model", "n_occupied",
                "subcarrier_spacing_hz", "stride", "user_offsets"}
    missing = required - set(meta)
    if missing:
        raise ScenarioError("tensor header missing keys: "
                            + ", ".join(sorted(missing)))
    return meta


def load_tensor(path) -> ChannelTensor:
    """Read back a tensor written by save_tensor."""
    path = str(path)
    meta = _parse_meta(path + ".meta")
    try:
        shape = tuple(int(s) for s in meta["shape"].split())
        stride = int(meta["stride"])
        n_occupied = int(meta["n_occupied"])
        spacing = float(meta["subcarrier_spacing_hz"])
        offsets = None
        if meta["user_offsets"] != "none":
            offsets = tuple(int(o) for o in meta["user_offsets"].split())
        alias_free = None
        if meta.get("alias_free_delay_s", "none") != "none":
            alias_free = float(meta["alias_free_delay_s"])
    except ValueError as exc:
        raise ScenarioError(f"malformed tensor header: {exc}") from exc
    if len(shape) != 3:
        raise ScenarioError("tensor header shape must have three axes")
    grid = FrequencyGrid(n_occupied, spacing, stride, offsets)
    if meta["format"] == "binary":
        data = np.fromfile(path, dtype="<c16")
        if data.size != shape[0] * shape[1] * shape[2]:
            raise ScenarioError("tensor payload does not match the header shape")
        cfr = data.reshape(shape).astype(complex)
    elif meta["format"] == "csv":
        cfr = np.zeros(shape, dtype=complex)
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if header.strip() != "tone,antenna,user,re,im":
                raise ScenarioError("tensor CSV header row is malformed")
            count = 0
            for line in fh:
                parts = line.strip().split(",")
                if len(parts) != 5:
                    raise ScenarioError(f"malformed tensor CSV row: {line!r}")
                try:
                    fi, ai, ui = int(parts[0]), int(parts[1]), int(parts[2])
                    cfr[fi, ai, ui] = complex(float(parts[3]), float(parts[4]))
                except (ValueError, IndexError) as exc:
                    raise ScenarioError(f"malformed tensor CSV row: {line!r}") from exc
                count += 1
        if count != shape[0] * shape[1] * shape[2]:
            raise ScenarioError("tensor CSV row count does not match the header shape")
    else:
        raise ScenarioError(f"unknown tensor format '{meta['format']}'")
    return ChannelTensor(cfr, grid, model=meta["model"],
                         alias_free_delay=alias_free)
