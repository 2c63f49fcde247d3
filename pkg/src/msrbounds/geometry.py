"""Network layout, target kinematics and TOA/FOA measurement models.

The leader is radar 0 and acts as a monostatic transmitter/receiver; every
follower is a receive-only bistatic node illuminated by the leader.  All
vectors are 3-D; planar scenarios simply use zero z-components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import MIN_RANGE_M, SPEED_OF_LIGHT
from .errors import ConfigurationError, DegenerateGeometryError


def _vec3(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {np.shape(x)}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RadarNode:
    """One radar of the network.

    Attributes:
        id: Index within the network; the leader is always 0.
        position: Antenna phase-centre position [m].
        is_leader: True for the transmitting (monostatic) node.
        tx_gain: Transmit antenna gain, linear power ratio.
        rx_gain: Receive antenna gain, linear power ratio.
    """

    id: int
    position: np.ndarray
    is_leader: bool = False
    tx_gain: float = 1.0
    rx_gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        if self.is_leader != (self.id == 0):
            raise ConfigurationError("the leader must be node 0 and node 0 must be the leader")


@dataclass(frozen=True)
class TargetState:
    """Point target position p [m] and velocity v [m/s]."""

    p: np.ndarray
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "p", _vec3(self.p, "p"))
        object.__setattr__(self, "v", _vec3(self.v, "v"))


@dataclass(frozen=True)
class GeometryCache:
    """Radar-to-target unit vectors and ranges for one target position.

    ``u_r[i]``/``r_r[i]`` are indexed by radar; entry 0 is the leader, so
    ``u_r[0] == u_t`` and ``r_r[0] == r_t``.
    """

    u_t: np.ndarray
    r_t: float
    u_r: np.ndarray  # (N, 3)
    r_r: np.ndarray  # (N,)

    @property
    def n_radars(self) -> int:
        return len(self.r_r)


@dataclass(frozen=True)
class MeasurementJacobian:
    """2x6 derivative of [TOA, FOA] w.r.t. [p, v] for one radar."""

    G: np.ndarray

    @property
    def dtau_dp(self) -> np.ndarray:
        return self.G[0, :3]

    @property
    def dtau_dv(self) -> np.ndarray:
        return self.G[0, 3:]

    @property
    def df_dp(self) -> np.ndarray:
        return self.G[1, :3]

    @property
    def df_dv(self) -> np.ndarray:
        return self.G[1, 3:]


def validate_network(nodes: Sequence[RadarNode]) -> None:
    """Raise ConfigurationError unless ``nodes`` form a valid network."""
    if not nodes:
        raise ConfigurationError("network has no nodes")
    leaders = [n for n in nodes if n.is_leader]
    if len(leaders) != 1 or nodes[0] is not leaders[0]:
        raise ConfigurationError("exactly one leader is required and it must come first")
    ids = [n.id for n in nodes]
    if ids != list(range(len(nodes))):
        raise ConfigurationError(f"node ids must be 0..{len(nodes) - 1} in order, got {ids}")
    pos = np.array([n.position for n in nodes])
    if len(np.unique(pos, axis=0)) != len(nodes):
        raise ConfigurationError("two nodes share the same position")


def build_layout(
    n_nodes: int,
    spacing: float,
    height: float,
    tx_gain: float = 1.0,
    rx_gain: float = 1.0,
) -> list[RadarNode]:
    """Square grid with the leader at the centre.

    The grid lies in the plane z = ``height`` and is centred on the origin,
    so the leader sits at (0, 0, height).  Followers are numbered 1..N in
    row-major order (rows along +y, columns along +x), skipping the centre.
    """
    s = math.isqrt(n_nodes) if n_nodes > 0 else 0
    if n_nodes < 1 or s * s != n_nodes or s % 2 == 0:
        raise ConfigurationError(
            f"n_nodes must be an odd perfect square (1, 9, 25, ...), got {n_nodes}"
        )
    if not (spacing > 0 and math.isfinite(spacing)):
        raise ConfigurationError(f"spacing must be positive, got {spacing}")
    half = s // 2
    leader = RadarNode(0, (0.0, 0.0, height), True, tx_gain, rx_gain)
    followers = []
    for row in range(s):
        for col in range(s):
            if row == half and col == half:
                continue
            pos = ((col - half) * spacing, (row - half) * spacing, height)
            followers.append(RadarNode(len(followers) + 1, pos, False, tx_gain, rx_gain))
    return [leader] + followers


def nodes_from_positions(positions, tx_gain: float = 1.0, rx_gain: float = 1.0) -> list[RadarNode]:
    """Explicit layout; the first position is the leader."""
    nodes = [
        RadarNode(i, p, i == 0, tx_gain, rx_gain) for i, p in enumerate(positions)
    ]
    validate_network(nodes)
    return nodes


def node_positions(nodes: Sequence[RadarNode]) -> np.ndarray:
    return np.array([n.position for n in nodes], dtype=float)


def compute_geometry(nodes: Sequence[RadarNode], target: TargetState) -> GeometryCache:
    pos = node_positions(nodes)
    d = target.p[None, :] - pos
    r = np.sqrt(np.einsum("ij,ij->i", d, d))
    if np.any(r < MIN_RANGE_M):
        i = int(np.argmin(r))
        raise DegenerateGeometryError(
            f"target within {MIN_RANGE_M} m of radar {i} (range {r[i]:.3g} m)"
        )
    u = d / r[:, None]
    return GeometryCache(u_t=u[0], r_t=float(r[0]), u_r=u, r_r=r)


def toa_mean(cache: GeometryCache, radar_index: int) -> float:
    """Leader -> target -> radar propagation delay [s]."""
    if radar_index == 0:
        return 2.0 * cache.r_t / SPEED_OF_LIGHT
    return (cache.r_t + cache.r_r[radar_index]) / SPEED_OF_LIGHT


def foa_mean(cache: GeometryCache, radar_index: int, v, wavelength: float) -> float:
    """Doppler shift [Hz] seen at ``radar_index``; positive for a receding target."""
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    v = np.asarray(v, dtype=float)
    if radar_index == 0:
        return 2.0 * float(cache.u_t @ v) / wavelength
    return float((cache.u_t + cache.u_r[radar_index]) @ v) / wavelength


def _projector(u: np.ndarray, r: float) -> np.ndarray:
    # d(u)/dp = (I - u u^T) / r
    return (np.eye(3) - np.outer(u, u)) / r


def jacobian(cache: GeometryCache, radar_index: int, v, wavelength: float) -> MeasurementJacobian:
    v = np.asarray(v, dtype=float)
    G = np.zeros((2, 6))
    if radar_index == 0:
        u_sum = 2.0 * cache.u_t
        proj = 2.0 * _projector(cache.u_t, cache.r_t)
    else:
        u_r = cache.u_r[radar_index]
        u_sum = cache.u_t + u_r
        proj = _projector(cache.u_t, cache.r_t) + _projector(u_r, cache.r_r[radar_index])
    G[0, :3] = u_sum / SPEED_OF_LIGHT
    G[1, :3] = (v @ proj) / wavelength
    G[1, 3:] = u_sum / wavelength
    return MeasurementJacobian(G)
