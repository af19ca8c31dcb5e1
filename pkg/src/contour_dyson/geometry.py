"""Closed plane contours given by truncated Fourier series.

A contour is ``z(u) = sum_m c_m exp(i m u)`` for ``u`` in ``[0, 2*pi)``.  The
:class:`Contour` object adds the arclength parametrization ``s`` (with
perimeter ``L``), the Frenet-type frame (unit tangent ``tau``, outward unit
normal ``nu = -i tau``) and the signed curvature ``k = d arg(tau) / ds``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from shapely.geometry import LineString

from .errors import ContourError

__all__ = [
    "ContourSpec",
    "Contour",
    "Frame",
    "build_contour",
    "frame_at",
]


@dataclass(frozen=True)
class ContourSpec:
    """Fourier description of a closed curve.

    ``coeffs`` is a tuple of ``(m, c_m)`` pairs.  The constructor orients the
    curve counterclockwise (positive signed area), reversing ``u`` if needed.
    """

    coeffs: tuple
    name: str = "fourier"

    def __post_init__(self):
        merged = {}
        for m, c in self.coeffs:
            m = int(m)
            merged[m] = merged.get(m, 0j) + complex(c)
        merged = {m: c for m, c in merged.items() if c != 0}
        if not any(m != 0 for m in merged):
            raise ContourError("contour needs at least one non-constant Fourier mode")
        area = np.pi * sum(m * abs(c) ** 2 for m, c in merged.items())
        if area == 0:
            raise ContourError("contour has zero signed area")
        if area < 0:
            merged = {-m: c for m, c in merged.items()}
        object.__setattr__(self, "coeffs", tuple(sorted(merged.items())))

    @classmethod
    def circle(cls, center=0j, radius=1.0):
        if radius <= 0:
            raise ContourError("circle radius must be positive")
        return cls(((0, complex(center)), (1, complex(radius))), name="circle")

    @classmethod
    def ellipse(cls, a, b, center=0j):
        if a <= 0 or b <= 0:
            raise ContourError("ellipse semi-axes must be positive")
        return cls(
            ((0, complex(center)), (1, (a + b) / 2), (-1, (a - b) / 2)),
            name="ellipse",
        )

    @classmethod
    def fourier(cls, coeffs):
        """Build from a mapping ``{m: c_m}`` or an iterable of pairs."""
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        return cls(tuple((int(m), complex(c)) for m, c in items))

    @property
    def modes(self):
        return np.array([m for m, _ in self.coeffs], dtype=float)

    @property
    def values(self):
        return np.array([c for _, c in self.coeffs], dtype=complex)

    def scaled(self, factor):
        return ContourSpec(tuple((m, c * factor) for m, c in self.coeffs), name=self.name)

    def signed_area(self):
        return float(np.pi * sum(m * abs(c) ** 2 for m, c in self.coeffs))

    def derivatives(self, u, order=2):
        """Return ``z, z', z'', ...`` up to ``order`` at parameter values ``u``."""
        u = np.asarray(u, dtype=float)
        m = self.modes
        c = self.values
        phase = np.exp(1j * np.multiply.outer(u, m))
        out = []
        for p in range(order + 1):
            out.append(phase @ (c * (1j * m) ** p))
        return out

    def z(self, u):
        return self.derivatives(u, order=0)[0]

    def to_dict(self):
        return {
            "type": "fourier",
            "coeffs": [[m, c.real, c.imag] for m, c in self.coeffs],
        }

    def digest(self):
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class Frame:
    """Position, unit tangent, outward unit normal and curvature (arrays allowed)."""

    z: complex
    tau: complex
    nu: complex
    k: float


def _frame_from_derivatives(z, dz, d2z):
    speed = np.abs(dz)
    tau = dz / speed
    nu = -1j * tau
    k = np.imag(np.conj(dz) * d2z) / speed**3
    return Frame(z=z, tau=tau, nu=nu, k=k)


def _first_crossing(points):
    """Locate a pair of non-adjacent crossing segments of a closed polyline."""
    p = points
    q = np.roll(points, -1)
    n = len(p)
    idx = np.arange(n)

    def orient(a, b, c):
        return np.sign(np.imag(np.conj(b - a) * (c - a)))

    block = 256
    for start in range(0, n, block):
        i = idx[start:start + block, None]
        a, b = p[i], q[i]
        c, d = p[None, :], q[None, :]
        hit = (
            (orient(a, b, c) * orient(a, b, d) < 0)
            & (orient(c, d, a) * orient(c, d, b) < 0)
        )
        gap = np.abs(i - idx[None, :])
        hit &= (gap > 1) & (gap < n - 1)
        rows, cols = np.nonzero(hit)
        if rows.size:
            return int(i[rows[0], 0]), int(cols[0])
    return None


class Contour:
    """Arclength-parametrized view of a :class:`ContourSpec`.

    The map ``u -> s`` is evaluated from the Fourier series of the speed
    ``|z'(u)|``; its inverse uses a periodic spline guess followed by Newton
    steps.  Instances are immutable after construction.
    """

    def __init__(self, spec: ContourSpec, grid_size: int = 1024):
        self.spec = spec
        self.grid_size = int(grid_size)
        m_grid = self.grid_size
        u = 2 * np.pi * np.arange(m_grid) / m_grid
        _, dz = spec.derivatives(u, order=1)
        speed = np.abs(dz)
        coef = np.fft.rfft(speed) / m_grid
        keep = np.nonzero(np.abs(coef) > 1e-15 * abs(coef[0]))[0]
        cutoff = int(keep.max()) + 1 if keep.size else 1
        cutoff = min(cutoff, m_grid // 2)
        self._speed_coef = coef[:cutoff].copy()
        self._speed_coef[1:] *= 2  # one-sided series for real data
        self._speed_modes = np.arange(cutoff, dtype=float)
        self.perimeter = float(2 * np.pi * coef[0].real)

        self.u_grid = np.append(u, 2 * np.pi)
        self.s_grid = self.s_of_u(self.u_grid)
        self.s_grid[-1] = self.perimeter
        drift = self.u_grid - 2 * np.pi * self.s_grid / self.perimeter
        drift[-1] = drift[0]
        self._u_spline = CubicSpline(self.s_grid, drift, bc_type="periodic")

    # -- parametrization -------------------------------------------------
    @property
    def L(self):
        return self.perimeter

    def speed(self, u):
        u = np.asarray(u, dtype=float)
        phase = np.exp(1j * np.multiply.outer(u, self._speed_modes))
        return np.real(phase @ self._speed_coef)

    def s_of_u(self, u):
        """Arclength from ``u = 0``; monotone, ``s(u + 2 pi) = s(u) + L``."""
        u = np.asarray(u, dtype=float)
        m = self._speed_modes[1:]
        c = self._speed_coef[1:]
        s = self._speed_coef[0].real * u
        if m.size:
            phase = np.exp(1j * np.multiply.outer(u, m)) - 1.0
            s = s + np.real(phase @ (c / (1j * m)))
        return s

    def u_of_s(self, s, refine=True):
        """Inverse of :meth:`s_of_u`; ``s`` is taken modulo ``L``."""
        s = np.asarray(s, dtype=float)
        turns = np.floor(s / self.perimeter)
        s0 = s - turns * self.perimeter
        u = 2 * np.pi * s0 / self.perimeter + self._u_spline(s0)
        if refine:
            for _ in range(2):
                u = u - (self.s_of_u(u) - s0) / self.speed(u)
        return u + 2 * np.pi * turns

    # -- geometry --------------------------------------------------------
    def frame_u(self, u) -> Frame:
        z, dz, d2z = self.spec.derivatives(u, order=2)
        return _frame_from_derivatives(z, dz, d2z)

    def frame_at(self, s, refine=True) -> Frame:
        return self.frame_u(self.u_of_s(s, refine=refine))

    def z_at(self, s, refine=True):
        return self.spec.z(self.u_of_s(s, refine=refine))

    def scaled(self, factor):
        return Contour(self.spec.scaled(factor), self.grid_size)

    def __repr__(self):
        return f"Contour({self.spec.name}, L={self.perimeter:.10g}, M={self.grid_size})"


def _check_regular(spec, m_dense):
    u = 2 * np.pi * np.arange(m_dense) / m_dense
    z, dz = spec.derivatives(u, order=1)
    speed = np.abs(dz)
    scale = np.max(np.abs(z - z.mean()))
    j = int(np.argmin(speed))
    if speed[j] <= 1e-10 * scale:
        raise ContourError(f"degenerate parametrization: |z'(u)| = 0 near u = {u[j]:.6f}")
    return u, z


def build_contour(spec: ContourSpec, grid_size: int = 1024) -> Contour:
    """Validate ``spec`` and build its arclength table.

    The simplicity check scans the polyline sampled at 8x the grid density for
    crossing segments.  It is a heuristic: a crossing finer than the dense
    spacing can slip through.
    """
    if grid_size < 64:
        raise ContourError("grid_size must be at least 64")
    u, z = _check_regular(spec, 8 * grid_size)
    if not _closed_simple(z):
        hit = _first_crossing(z)
        where = f" near u = {u[hit[0]]:.6f} and u = {u[hit[1]]:.6f}" if hit else ""
        raise ContourError("contour is self-intersecting" + where)
    contour = Contour(spec, grid_size)
    check = quad(
        lambda t: float(abs(spec.derivatives(t, order=1)[1])),
        0, 2 * np.pi, limit=400, epsabs=1e-13,
    )[0]
    if abs(check - contour.perimeter) > 1e-9 * contour.perimeter:
        raise ContourError(
            f"grid_size={grid_size} under-resolves the speed: spectral perimeter "
            f"{contour.perimeter!r} vs adaptive quadrature {check!r}"
        )
    return contour


def _closed_simple(z):
    # LineString.is_simple ignores the closing segment
    closed = np.append(z, z[0])
    return LineString(np.column_stack([closed.real, closed.imag])).is_simple


def frame_at(contour: Contour, s) -> Frame:
    return contour.frame_at(s)
