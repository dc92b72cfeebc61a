"""Nonlinear thermal model of a two-bank radiant thermoforming oven.

The sheet is split into six lateral zones laid out as a 2 x 3 grid (front
row zones 1-3, back row zones 4-6, left to right); each zone has five nodes
through its thickness, node 1 on the top surface and node 5 on the bottom.
Heater ``j`` of each bank sits directly above (below) zone ``j``.  Lateral
conduction between zones is ignored.  Temperatures are kelvin internally
and degrees Celsius at the public boundary (setpoints, sensor readings,
ambient temperature).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .stats import gaussian_block

STEFAN_BOLTZMANN = 5.669e-8
KELVIN = 273.15
N_ZONES = 6
N_LAYERS = 5
GRID_ROWS = 2
GRID_COLS = 3


class SimulationError(RuntimeError):
    """Raised when the integration produces non-finite temperatures."""


@dataclass(frozen=True)
class OvenParams:
    """Material, geometry and integration settings.

    Material defaults are the nominal sheet; see :data:`DISTURBED`.
    """

    density: float = 950.0  # kg/m^3
    specific_heat: float = 1838.0  # J/(kg K)
    emissivity: float = 0.45  # effective
    absorptivity: float = 300.0  # 1/m
    conduction: float = 0.4  # W/(m K)
    convection: float = 6.0  # W/(m^2 K)
    thickness: float = 0.012  # m
    zone_width: float = 0.30  # m, along a row
    zone_depth: float = 0.30  # m, across rows
    heater_distance: float = 0.12  # m
    heater_area: float | None = 0.11  # m^2, None means the zone area
    initial_temp: float = 25.0  # degC
    cycle_time: float = 300.0  # s
    dt: float = 0.5  # s
    sensor_zones: tuple[int, int, int] = (1, 2, 6)

    def __post_init__(self) -> None:
        positive = (
            "density", "specific_heat", "emissivity", "absorptivity", "conduction",
            "convection", "thickness", "zone_width", "zone_depth", "heater_distance",
            "cycle_time", "dt",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.heater_area is not None and not self.heater_area > 0:
            raise ValueError("heater_area must be strictly positive")
        if self.dt > 1.0:
            raise ValueError("dt must not exceed 1 s")
        zones = tuple(int(z) for z in self.sensor_zones)
        if len(zones) != 3 or any(not 1 <= z <= N_ZONES for z in zones):
            raise ValueError("sensor_zones must name three zones in 1..6")
        object.__setattr__(self, "sensor_zones", zones)

    @property
    def zone_area(self) -> float:
        return self.zone_width * self.zone_depth

    @property
    def layer_thickness(self) -> float:
        return self.thickness / N_LAYERS

    @property
    def surface_absorption(self) -> float:
        """Fraction of incident radiation absorbed by a surface (half) layer."""
        return 1.0 - math.exp(-self.absorptivity * self.layer_thickness / 2.0)

    @property
    def internal_absorption(self) -> float:
        """Fraction of radiation reaching an internal layer that it absorbs."""
        return 1.0 - math.exp(-self.absorptivity * self.layer_thickness)

    def with_overrides(self, **kw) -> "OvenParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sensor_zones"] = list(self.sensor_zones)
        return d


NOMINAL = OvenParams()
DISTURBED = OvenParams(
    density=1045.0,
    specific_heat=2022.0,
    emissivity=0.495,
    absorptivity=350.0,
    conduction=0.3,
    convection=10.0,
)


def zone_position(k: int) -> tuple[int, int]:
    """``(row, col)`` of 1-based zone/heater ``k``."""
    return (k - 1) // GRID_COLS, (k - 1) % GRID_COLS


def mirror_zone(k: int) -> int:
    """Zone index after a left-right mirror of the grid."""
    r, c = zone_position(k)
    return r * GRID_COLS + (GRID_COLS - 1 - c) + 1


def _corner_term(x: float, y: float, z: float) -> float:
    """Primitive for the view factor between parallel, axis-aligned rectangles."""
    rx = math.hypot(x, z)
    ry = math.hypot(y, z)
    g = 0.0
    if y != 0.0:
        g += y * rx * math.atan(y / rx)
    if x != 0.0:
        g += x * ry * math.atan(x / ry)
    g -= 0.5 * z * z * math.log(x * x + y * y + z * z)
    return g / (2.0 * math.pi)


def parallel_rect_view_factor(
    emitter: tuple[float, float, float, float],
    receiver: tuple[float, float, float, float],
    distance: float,
) -> float:
    """View factor from ``emitter`` to ``receiver``, two rectangles in parallel planes.

    Rectangles are ``(x0, x1, y0, y1)`` in their own planes with aligned
    axes.  Uses the closed-form contour integral summed over the sixteen
    corner combinations.
    """
    x0, x1, y0, y1 = emitter
    xi0, xi1, eta0, eta1 = receiver
    total = 0.0
    for i, x in enumerate((x0, x1)):
        for j, y in enumerate((y0, y1)):
            for k, eta in enumerate((eta0, eta1)):
                for l, xi in enumerate((xi0, xi1)):
                    sign = (-1) ** (i + j + k + l)
                    total += sign * _corner_term(x - xi, y - eta, distance)
    return total / ((x1 - x0) * (y1 - y0))


def view_factor_matrix(params: OvenParams = NOMINAL) -> np.ndarray:
    """``F[k, j]``: fraction of the radiation leaving heater ``j`` that reaches zone ``k``.

    Heaters have the zone footprint scaled about the zone center to the
    configured heater area.
    """
    w, dep, d = params.zone_width, params.zone_depth, params.heater_distance
    if w <= 0 or dep <= 0 or d <= 0:
        raise ValueError("geometry dimensions must be positive")
    scale = math.sqrt((params.heater_area or params.zone_area) / params.zone_area)
    F = np.empty((N_ZONES, N_ZONES))
    for k in range(1, N_ZONES + 1):
        rk, ck = zone_position(k)
        zone = (ck * w, (ck + 1) * w, rk * dep, (rk + 1) * dep)
        for j in range(1, N_ZONES + 1):
            rj, cj = zone_position(j)
            cx, cy = (cj + 0.5) * w, (rj + 0.5) * dep
            hw, hd = 0.5 * w * scale, 0.5 * dep * scale
            heater = (cx - hw, cx + hw, cy - hd, cy + hd)
            F[k - 1, j - 1] = parallel_rect_view_factor(heater, zone, d)
    return np.clip(F, 0.0, 1.0)


def heater_expand(u: np.ndarray) -> np.ndarray:
    """Map the six grouped setpoints to the twelve heaters (top 1-6, bottom 1-6).

    ``u = [T2-T5, T1-T4, T3-T6, B2-B5, B1-B4, B3-B6]``.
    """
    u = np.asarray(u, dtype=float)
    top = u[..., [1, 0, 2, 1, 0, 2]]
    bottom = u[..., [4, 3, 5, 4, 3, 5]]
    return np.concatenate([top, bottom], axis=-1)


def ambient_drift(k, enabled: bool = True, base: float = 125.0,
                  amplitude: float = 20.0, rate: float = 0.0175):
    """Oven ambient temperature (degC) at cycle ``k``: ``base + amplitude * sin(rate * k)``."""
    k = np.asarray(k, dtype=float)
    if not enabled:
        return base + 0.0 * k
    return base + amplitude * np.sin(rate * k)


@dataclass
class OvenState:
    """Node temperatures ``T`` (K, shape ``(..., 6, 5)``), ambient and heater temperatures (K)."""

    T: np.ndarray
    ambient: float
    heaters: np.ndarray = field(default_factory=lambda: np.full(2 * N_ZONES, np.nan))


class Oven:
    """Batched simulator; every leading axis of the setpoint array is an independent oven."""

    def __init__(self, params: OvenParams = NOMINAL):
        self.params = params
        self.F = view_factor_matrix(params)
        self._F_rowsum = self.F.sum(axis=1)
        p = params
        b1, b2 = p.surface_absorption, p.internal_absorption
        A = p.zone_area
        V = A * p.layer_thickness
        self._cap = p.density * V * p.specific_heat
        self._rad = STEFAN_BOLTZMANN * p.emissivity * (p.heater_area or A)
        self._hA = p.convection * A
        self._kA = p.conduction * A / p.layer_thickness
        # Share of the top-bank (column 0) and bottom-bank (column 1) flux absorbed by each node.
        w = np.zeros((N_LAYERS, 2))
        w[0] = (b1, b1 * (1 - b1) * (1 - b2) ** 3)
        w[4] = (b1 * (1 - b1) * (1 - b2) ** 3, b1)
        for i in (2, 3, 4):
            w[i - 1] = (b2 * (1 - b1) * (1 - b2) ** (i - 2), b2 * (1 - b1) * (1 - b2) ** (4 - i))
        self._absorb = w
        self._inv_cap = np.array([2.0, 1.0, 1.0, 1.0, 2.0]) / self._cap
        # Flattened form used by the integrator: dT = T @ L + T_surf**4 @ R + forcing.
        n = N_ZONES * N_LAYERS
        L = np.zeros((N_ZONES, N_LAYERS, N_ZONES, N_LAYERS))
        for z in range(N_ZONES):
            for i in range(N_LAYERS - 1):
                L[z, i, z, i] -= self._kA
                L[z, i + 1, z, i] += self._kA
                L[z, i + 1, z, i + 1] -= self._kA
                L[z, i, z, i + 1] += self._kA
            L[z, 0, z, 0] -= self._hA
            L[z, 4, z, 4] -= self._hA
        self._L = (L * self._inv_cap).reshape(n, n)
        R = np.zeros((2, N_ZONES, N_ZONES, N_LAYERS))
        for z in range(N_ZONES):
            R[0, z, z] = -self._rad * self._F_rowsum[z] * w[:, 0]
            R[1, z, z] = -self._rad * self._F_rowsum[z] * w[:, 1]
        self._R = (R * self._inv_cap).reshape(2 * N_ZONES, n)

    def initial_state(self, batch_shape: tuple[int, ...] = ()) -> np.ndarray:
        return np.full(batch_shape + (N_ZONES, N_LAYERS), self.params.initial_temp + KELVIN)

    def derivative(self, T: np.ndarray, theta4_top: np.ndarray, theta4_bot: np.ndarray,
                   t_amb: np.ndarray) -> np.ndarray:
        """Time derivative of node temperatures (K/s)."""
        Ts, Tb = T[..., 0], T[..., 4]
        q_top = self._rad * (theta4_top - self._F_rowsum * Ts**4)
        q_bot = self._rad * (theta4_bot - self._F_rowsum * Tb**4)
        flux = q_top[..., None] * self._absorb[:, 0] + q_bot[..., None] * self._absorb[:, 1]
        cond = np.zeros_like(T)
        diff = self._kA * (T[..., 1:] - T[..., :-1])
        cond[..., :-1] += diff
        cond[..., 1:] -= diff
        conv = np.zeros_like(T)
        conv[..., 0] = self._hA * (t_amb[..., None] - Ts)
        conv[..., 4] = self._hA * (t_amb[..., None] - Tb)
        return (flux + cond + conv) * self._inv_cap

    # Flat indices of the top-surface nodes then the bottom-surface nodes.
    _SURF = np.concatenate([np.arange(N_ZONES) * N_LAYERS, np.arange(N_ZONES) * N_LAYERS + N_LAYERS - 1])

    def _forcing(self, th4_top, th4_bot, t_amb):
        q = self._rad * (th4_top[..., :, None] * self._absorb[:, 0] + th4_bot[..., :, None] * self._absorb[:, 1])
        q[..., 0] += self._hA * t_amb[..., None]
        q[..., N_LAYERS - 1] += self._hA * t_amb[..., None]
        return (q * self._inv_cap).reshape(q.shape[:-2] + (-1,))

    def simulate_cycle(self, u: np.ndarray, ambient: float | np.ndarray = 125.0,
                       T0: np.ndarray | None = None, duration: float | None = None,
                       dt: float | None = None) -> np.ndarray:
        """Integrate one heating cycle with fixed-step RK4.

        Parameters
        ----------
        u : array, shape ``(..., 6)``
            Grouped heater setpoints in degC, held for the whole cycle.
        ambient : float or array broadcastable to ``u.shape[:-1]``
            Oven air temperature in degC.
        T0 : array, shape ``(..., 6, 5)``, optional
            Initial node temperatures in K; defaults to the loading
            temperature.

        Returns
        -------
        ndarray, shape ``(..., 6, 5)``
            Node temperatures in K at the end of the cycle.
        """
        p = self.params
        duration = p.cycle_time if duration is None else duration
        dt = p.dt if dt is None else dt
        if duration <= 0 or dt <= 0:
            raise ValueError("duration and dt must be positive")
        u = np.asarray(u, dtype=float)
        batch = u.shape[:-1]
        theta = heater_expand(u) + KELVIN
        th4 = theta**4
        th4_top = th4[..., :N_ZONES] @ self.F.T
        th4_bot = th4[..., N_ZONES:] @ self.F.T
        t_amb = np.broadcast_to(np.asarray(ambient, dtype=float) + KELVIN, batch)
        T = self.initial_state(batch) if T0 is None else np.array(T0, dtype=float)
        n_steps = int(round(duration / dt))
        h = duration / n_steps
        shape = T.shape
        forcing = self._forcing(th4_top, th4_bot, t_amb)
        L, R = self._L, self._R
        x = T.reshape(batch + (-1,))

        def f(x):
            s = x[..., self._SURF]
            s2 = s * s
            return x @ L + (s2 * s2) @ R + forcing

        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(n_steps):
                k1 = f(x)
                k2 = f(x + 0.5 * h * k1)
                k3 = f(x + 0.5 * h * k2)
                k4 = f(x + h * k3)
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        T = x.reshape(shape)
        if not np.all(np.isfinite(T)):
            raise SimulationError(f"non-finite temperatures after {n_steps} steps (dt={h})")
        return T

    def sensor_values(self, T: np.ndarray) -> np.ndarray:
        """Noise-free IR readings (degC): top then bottom surface of the sensor zones."""
        z = [k - 1 for k in self.params.sensor_zones]
        return np.concatenate([T[..., z, 0], T[..., z, 4]], axis=-1) - KELVIN

    def read_sensors(self, T: np.ndarray, noise_sd: float = 0.0, seed: int = 0,
                     cycle: int = 0) -> np.ndarray:
        y = self.sensor_values(T)
        if noise_sd > 0:
            y = y + noise_sd * gaussian_block(seed, cycle, y.shape[-1])
        return y

    def terminal_outputs(self, u: np.ndarray, ambient: float | np.ndarray = 125.0) -> np.ndarray:
        """Noise-free terminal sensor vector for setpoints ``u``; usable as a batch oracle."""
        return self.sensor_values(self.simulate_cycle(u, ambient))


def read_sensors(oven: Oven, T: np.ndarray, noise_sd: float = 0.0, seed: int = 0, cycle_k: int = 0) -> np.ndarray:
    return oven.read_sensors(T, noise_sd, seed, cycle_k)


def simulate_cycle(oven: Oven, u: Sequence[float], ambient: float = 125.0, **kw) -> np.ndarray:
    return oven.simulate_cycle(np.asarray(u, dtype=float), ambient, **kw)
