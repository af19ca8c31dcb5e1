"""Log-gas energy on a contour and its tangential derivatives.

The energy of ``N`` particles at ``z_1..z_N`` on the contour is

    E = 2 sum_{i<j} log|z_i - z_j| + sum_i W(z_i)

and ``d_s = tau d_z + conj(tau) d_zbar`` is the derivative along the contour.
Second tangential derivatives use

    d_s^2 f = -k d_n f + tau^2 f_zz + conj(tau)^2 f_zbar zbar + 2 f_z zbar

so everything is closed form given ``W`` and the contour frame.

The ``*_batch`` kernels act on arrays shaped ``(..., N)`` and are what the
samplers call in their inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import CollisionError
from .geometry import Contour, Frame

__all__ = [
    "Potential",
    "GasParams",
    "Configuration",
    "energy",
    "drift",
    "drift_second",
    "nearest_neighbor_gaps",
]

SEPARATION_GUARD = 1e-12


@dataclass(frozen=True)
class Potential:
    """External potential ``W(z) = sum_k t_k Re(z^k) + c |z|^2``.

    ``harmonic[k-1]`` is ``t_k`` (so ``harmonic=(0.5,)`` means ``0.5 Re z``);
    ``radial`` is ``c``.
    """

    harmonic: tuple = ()
    radial: float = 0.0

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "zero")
        coeffs = [float(c) for c in d.get("coeffs", [])]
        if kind == "zero":
            return cls()
        if kind == "harmonic":
            return cls(harmonic=tuple(coeffs))
        if kind == "radial":
            if len(coeffs) != 1:
                raise ValueError("radial potential takes exactly one coefficient")
            return cls(radial=coeffs[0])
        raise ValueError(f"unknown potential kind {kind!r}")

    @property
    def kind(self):
        if self.radial and any(self.harmonic):
            return "mixed"
        if self.radial:
            return "radial"
        if any(self.harmonic):
            return "harmonic"
        return "zero"

    @property
    def is_zero(self):
        return self.kind == "zero"

    def to_dict(self):
        if self.kind == "mixed":
            raise ValueError("mixed potentials have no single-kind JSON form")
        if self.kind == "radial":
            return {"kind": "radial", "coeffs": [self.radial]}
        if self.kind == "harmonic":
            return {"kind": "harmonic", "coeffs": list(self.harmonic)}
        return {"kind": "zero", "coeffs": []}

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        w = np.zeros(z.shape)
        zk = np.ones_like(z)
        for t in self.harmonic:
            zk = zk * z
            w = w + t * zk.real
        if self.radial:
            w = w + self.radial * (z * np.conj(z)).real
        return w

    def dz(self, z):
        """Wirtinger derivative ``dW/dz``; ``dW/dzbar`` is its conjugate."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        zk = np.ones_like(z)
        for k, t in enumerate(self.harmonic, start=1):
            out = out + 0.5 * k * t * zk
            zk = zk * z
        if self.radial:
            out = out + self.radial * np.conj(z)
        return out

    def dzbar(self, z):
        return np.conj(self.dz(z))

    def dzz(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for k, t in enumerate(self.harmonic, start=1):
            if k >= 2:
                out = out + 0.5 * k * (k - 1) * t * z ** (k - 2)
        return out

    def dzzbar(self, z):
        return np.full(np.shape(z), float(self.radial))


@dataclass(frozen=True)
class GasParams:
    """Particle number, inverse temperature and potential; ``kappa = 2 / beta``."""

    n_particles: int
    beta: float
    potential: Potential = field(default_factory=Potential)

    def __post_init__(self):
        if int(self.n_particles) < 1:
            raise ValueError("n_particles must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def from_kappa(cls, n_particles, kappa, potential=None):
        return cls(n_particles, 2.0 / kappa, potential or Potential())

    @property
    def kappa(self):
        return 2.0 / self.beta


class Configuration:
    """``N`` particles on a contour, stored by arclength position."""

    def __init__(self, contour: Contour, s):
        self.contour = contour
        s = np.atleast_1d(np.asarray(s, dtype=float))
        self.s = np.mod(s, contour.perimeter)
        check_separation(self.frame.z, contour.perimeter)

    @property
    def n(self):
        return self.s.size

    @cached_property
    def u(self):
        return self.contour.u_of_s(self.s)

    @cached_property
    def frame(self) -> Frame:
        return self.contour.frame_u(self.u)

    @property
    def z(self):
        return self.frame.z

    def moved(self, i, ds):
        s = self.s.copy()
        s[i] += ds
        return Configuration(self.contour, s)

    def __repr__(self):
        return f"Configuration(N={self.n}, s={np.array2string(self.s, precision=6)})"


def check_separation(z, perimeter):
    z = np.asarray(z)
    n = z.shape[-1]
    if n < 2:
        return
    d = np.abs(z[..., :, None] - z[..., None, :])
    d = d + np.diag(np.full(n, np.inf))
    flat = d.reshape(-1, n, n)
    for dd in flat:
        i, j = np.unravel_index(np.argmin(dd), dd.shape)
        if dd[i, j] < SEPARATION_GUARD * perimeter:
            raise CollisionError(min(i, j), max(i, j), dd[i, j])


# -- batched kernels --------------------------------------------------------
def _inverse_differences(z):
    n = z.shape[-1]
    diff = z[..., :, None] - z[..., None, :]
    idx = np.arange(n)
    diff[..., idx, idx] = 1.0
    inv = np.reciprocal(diff, out=diff)
    inv[..., idx, idx] = 0.0
    return inv


def energy_batch(z, potential: Potential):
    n = z.shape[-1]
    iu, ju = np.triu_indices(n, 1)
    pair = 2 * np.log(np.abs(z[..., iu] - z[..., ju])).sum(axis=-1)
    return pair + potential.value(z).sum(axis=-1)


def drift_batch(frame: Frame, potential: Potential):
    inv = _inverse_differences(frame.z)
    s1 = inv.sum(axis=-1)
    return 2 * np.real(frame.tau * (s1 + potential.dz(frame.z)))


def derivatives_batch(frame: Frame, potential: Potential):
    """Return ``(d_s E, d_s^2 E)`` per particle."""
    z, tau, nu, k = frame.z, frame.tau, frame.nu, frame.k
    inv = _inverse_differences(z)
    s1 = inv.sum(axis=-1)
    s2 = (inv * inv).sum(axis=-1)
    wz = potential.dz(z)
    first = 2 * np.real(tau * (s1 + wz))
    second = (
        -2 * k * np.real(nu * (s1 + wz))
        + 2 * np.real(tau * tau * (potential.dzz(z) - s2))
        + 2 * potential.dzzbar(z)
    )
    return first, second


# -- public operations -------------------------------------------------------
def energy(cfg: Configuration, p: GasParams) -> float:
    return float(energy_batch(cfg.z, p.potential))


def drift(cfg: Configuration, p: GasParams):
    """Tangential gradient ``d E / d s_i`` for every particle."""
    return drift_batch(cfg.frame, p.potential)


def drift_second(cfg: Configuration, p: GasParams):
    return derivatives_batch(cfg.frame, p.potential)[1]


def nearest_neighbor_gaps(s, perimeter):
    """Cyclic arclength gaps between consecutive particles, shape ``(..., N)``."""
    s = np.sort(np.mod(s, perimeter), axis=-1)
    wrap = s[..., :1] + perimeter
    return np.diff(np.concatenate([s, wrap], axis=-1), axis=-1)
