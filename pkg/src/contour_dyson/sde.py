"""Euler-Maruyama integration of Dyson diffusion in arclength coordinates.

Each particle moves along the contour by

    ds_i = d_{s_i} E dt + sqrt(kappa) dB_i,

positions wrap modulo the perimeter.  The state is kept as unwrapped,
cyclically ordered arclengths ``x_0 < x_1 < ... < x_{N-1} < x_0 + L`` so that
a step which would make two particles meet or pass each other is detected
and rejected.  Arrays may carry a leading replica axis; replicas share one
random stream but never interact.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .energy import Configuration, GasParams, SEPARATION_GUARD, drift_batch
from .errors import StepSizeError
from .geometry import Contour, Frame

__all__ = [
    "SdeSettings",
    "Trajectory",
    "sde_step",
    "simulate",
    "run_trajectory",
    "embed_increment",
    "angular_langevin",
    "default_dt",
]

MAX_RETRIES = 1000
WRAP_PERIODS = 64  # |s_1| beyond this many perimeters triggers a whole-period shift


def default_dt(contour: Contour) -> float:
    return 1e-4 * (contour.perimeter / (2 * np.pi)) ** 2


@dataclass
class SdeSettings:
    dt: float | None = None
    t_end: float = 1.0
    seed: int = 0
    taming_cap: float = 0.25
    burn_in: float = 0.0
    thinning: int = 1
    exact_geometry: bool = False

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.taming_cap <= 0.5:
            raise ValueError("taming_cap must lie in (0, 0.5]")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.t_end < 0 or self.burn_in < 0:
            raise ValueError("t_end and burn_in must be nonnegative")


@dataclass
class Trajectory:
    """Snapshot times and positions, shape ``(T, N)`` or ``(T, R, N)``."""

    times: np.ndarray
    positions: np.ndarray
    perimeter: float
    steps: int = 0
    rejections: int = 0
    taming_events: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def rejection_rate(self):
        return self.rejections / max(self.steps, 1)

    def configurations(self, contour):
        if self.positions.ndim != 2:
            raise ValueError("configurations() needs a single-replica trajectory")
        return [Configuration(contour, s) for s in self.positions]

    def to_csv(self, label="t"):
        if self.positions.ndim != 2:
            raise ValueError("CSV output needs a single-replica trajectory")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.positions.shape[1]
        w.writerow([label] + [f"s_{i + 1}" for i in range(n)])
        for t, row in zip(self.times, self.positions):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()


def _order_state(s, perimeter):
    """Sort positions and return unwrapped cyclic coordinates."""
    return np.sort(np.mod(s, perimeter), axis=-1)


def _valid(x, perimeter, guard):
    gaps = np.diff(x, axis=-1)
    closing = x[..., 0] + perimeter - x[..., -1]
    return np.all(gaps > guard, axis=-1) & (closing > guard)


def _min_gap(x, perimeter):
    gaps = np.diff(x, axis=-1)
    closing = (x[..., 0] + perimeter - x[..., -1])[..., None]
    return np.min(np.concatenate([gaps, closing], axis=-1), axis=-1)


def _drift(contour, x, potential, exact):
    u = contour.u_of_s(x, refine=exact)
    return drift_batch(contour.frame_u(u), potential)


def _advance(contour, x, p, dt, cap, rng, exact, counters, noise=None):
    """One tamed Euler-Maruyama step on ordered state ``x`` (shape (R, N))."""
    L = contour.perimeter
    guard = SEPARATION_GUARD * L
    n = x.shape[-1]
    if n > 1:
        d = _drift(contour, x, p.potential, exact) * dt
        limit = cap * _min_gap(x, L)[:, None]
        tamed = np.abs(d) > limit
        counters["taming"] += int(tamed.sum())
        d = np.clip(d, -limit, limit)
    else:
        d = _drift(contour, x, p.potential, exact) * dt
    amp = np.sqrt(p.kappa * dt)
    g = rng.standard_normal(x.shape) if noise is None else noise
    new = x + d + amp * g
    if n > 1:
        bad = ~_valid(new, L, guard)
        retries = 0
        while bad.any():
            counters["rejections"] += int(bad.sum())
            retries += 1
            if retries > MAX_RETRIES:
                raise StepSizeError(
                    f"step rejected {MAX_RETRIES} times in a row; reduce dt (now {dt:g})"
                )
            idx = np.nonzero(bad)[0]
            new[idx] = x[idx] + d[idx] + amp * rng.standard_normal((idx.size, n))
            bad[idx] = ~_valid(new[idx], L, guard)
    # coordinates are unwrapped; shift whole periods only once they drift far,
    # so short runs follow the plain recursion exactly
    far = np.abs(new[:, :1]) >= WRAP_PERIODS * L
    if far.any():
        new = new - np.where(far, np.floor(new[:, :1] / L) * L, 0.0)
    return new


def sde_step(cfg: Configuration, p: GasParams, settings: SdeSettings, rng) -> Configuration:
    """Single step for one configuration (particles are relabelled in cyclic order)."""
    dt = settings.dt or default_dt(cfg.contour)
    counters = {"rejections": 0, "taming": 0}
    x = _order_state(cfg.s, cfg.contour.perimeter)[None, :]
    x = _advance(cfg.contour, x, p, dt, settings.taming_cap, rng,
                 settings.exact_geometry, counters)
    return Configuration(cfg.contour, np.mod(x[0], cfg.contour.perimeter))


def simulate(contour: Contour, s0, p: GasParams, settings: SdeSettings) -> Trajectory:
    """Integrate from ``s0`` (shape ``(N,)`` or ``(R, N)``) up to ``t_end``.

    Snapshots are stored every ``thinning`` steps once ``t >= burn_in``.
    """
    s0 = np.asarray(s0, dtype=float)
    single = s0.ndim == 1
    L = contour.perimeter
    x = _order_state(np.atleast_2d(s0), L)
    if p.n_particles > 1 and not _valid(x, L, SEPARATION_GUARD * L).all():
        raise StepSizeError("initial configuration has coincident particles")
    dt = settings.dt or default_dt(contour)
    n_steps = int(round(settings.t_end / dt))
    rng = np.random.default_rng(settings.seed)
    counters = {"rejections": 0, "taming": 0}
    burn_steps = min(int(np.ceil(settings.burn_in / dt - 1e-9)), n_steps)

    times, snaps = [], []

    def record(k, state):
        if k >= burn_steps and (k - burn_steps) % settings.thinning == 0:
            times.append(k * dt)
            snaps.append(np.mod(state, L))

    if n_steps == 0:
        times.append(0.0)
        snaps.append(np.mod(x, L))
    else:
        record(0, x)
    for k in range(1, n_steps + 1):
        x = _advance(contour, x, p, dt, settings.taming_cap, rng,
                     settings.exact_geometry, counters)
        record(k, x)
    positions = np.array(snaps)
    if single:
        positions = positions[:, 0, :]
    return Trajectory(
        times=np.array(times),
        positions=positions,
        perimeter=L,
        steps=n_steps * x.shape[0],
        rejections=counters["rejections"],
        taming_events=counters["taming"],
        extra={"dt": dt},
    )


def run_trajectory(cfg0: Configuration, p: GasParams, settings: SdeSettings) -> Trajectory:
    return simulate(cfg0.contour, cfg0.s, p, settings)


def embed_increment(frame: Frame, ds):
    """Second-order plane displacement ``tau ds - (1/2) nu k ds^2``."""
    return frame.tau * ds - 0.5 * frame.nu * frame.k * ds * ds


def angular_langevin(theta0, kappa, dt, n_steps, noise, drift=None):
    """Unit-circle Langevin equation in angles with precomputed ``noise``.

    ``noise`` has shape ``(n_steps, N)`` of standard normals.  ``drift(theta)``
    defaults to the zero-potential log-gas force ``sum_j cot((t_i - t_j)/2)``.
    Returns the angle path, shape ``(n_steps + 1, N)``.
    """
    if drift is None:
        drift = circle_log_force
    theta = np.array(theta0, dtype=float)
    path = [theta.copy()]
    amp = np.sqrt(kappa * dt)
    for g in noise:
        theta = theta + drift(theta) * dt + amp * g
        path.append(theta.copy())
    return np.array(path)


def circle_log_force(theta):
    d = theta[:, None] - theta[None, :]
    n = theta.size
    off = ~np.eye(n, dtype=bool)
    out = np.zeros((n, n))
    out[off] = 1.0 / np.tan(d[off] / 2)
    return out.sum(axis=1)


def embedded_circle_path(z0, kappa, dt, n_steps, noise, drift_theta):
    """Plane-embedded unit-circle scheme ``dz = i z F dt - (kappa/2) z dB^2 + i z sqrt(kappa) dB``.

    ``drift_theta(z)`` returns the angular force at the current points.  The
    points are not projected back onto the circle.
    """
    z = np.array(z0, dtype=complex)
    path = [z.copy()]
    for g in noise:
        dB = np.sqrt(dt) * g
        z = z + 1j * z * drift_theta(z) * dt - 0.5 * kappa * z * dB**2 + 1j * z * np.sqrt(kappa) * dB
        path.append(z.copy())
    return np.array(path)
