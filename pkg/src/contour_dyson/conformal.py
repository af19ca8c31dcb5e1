"""Interior and exterior conformal maps of a contour via Theodorsen iteration.

Conventions: ``w_int`` maps the interior onto the unit disk with
``w_int(0) = 0``, ``w_int'(0) > 0``; ``w_ext`` maps the exterior onto
``|w| > 1`` with ``w_ext(z) ~ z / r`` at infinity (``r`` is the conformal
radius).  Both maps are represented by boundary correspondences
``phi -> u(phi)``: the boundary point ``z(u(phi))`` is sent to ``exp(i phi)``.

The interior map comes from Theodorsen's equation for the polar angle,

    arg z(u(phi)) = phi + K[log|z(u(phi))|],

with ``K`` the periodic conjugate-function operator.  The exterior map is the
interior map of the inverted curve ``1/z`` (reversed to stay counterclockwise),
mapped back.  Both steps need the curve to be star-shaped about the origin.

With ``psi = log|w'|`` on the boundary, ``psi(phi) = -log(ds/dphi)``; its
harmonic extensions are handled in the uniformized angle, where the
Dirichlet-to-Neumann map is the Fourier multiplier ``|m|``.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ContourError, ConvergenceError
from .geometry import Contour

__all__ = [
    "Correspondence",
    "ConformalPair",
    "PsiFields",
    "solve_maps",
    "eval_psi",
    "conjugate",
    "dtn",
]


# -- spectral helpers --------------------------------------------------------
def _wavenumbers(n):
    return np.fft.fftfreq(n, 1.0 / n)


def conjugate(values):
    """Periodic conjugate function: ``cos(m phi) -> sin(m phi)``, mean dropped."""
    n = len(values)
    m = _wavenumbers(n)
    c = np.fft.fft(values)
    mult = -1j * np.sign(m)
    if n % 2 == 0:
        mult[n // 2] = 0
    return np.real(np.fft.ifft(c * mult))


def dtn(values):
    """Dirichlet-to-Neumann multiplier ``|m|`` on the unit circle."""
    m = np.abs(_wavenumbers(len(values)))
    return np.real(np.fft.ifft(np.fft.fft(values) * m))


def spectral_derivative(values):
    n = len(values)
    m = _wavenumbers(n)
    mult = 1j * m
    if n % 2 == 0:
        mult[n // 2] = 0
    return np.real(np.fft.ifft(np.fft.fft(values) * mult))


def fourier_eval(values, phi):
    """Trigonometric interpolant of equispaced ``values`` evaluated at ``phi``."""
    n = len(values)
    c = np.fft.fft(values) / n
    m = _wavenumbers(n)
    if n % 2 == 0:
        # split the Nyquist mode so the interpolant is real
        c = np.append(c, c[n // 2] / 2)
        c[n // 2] /= 2
        m = np.append(m, n / 2)
        m[n // 2] = -n / 2
    phi = np.asarray(phi, dtype=float)
    return np.real(np.exp(1j * np.multiply.outer(phi, m)) @ c)


class Correspondence:
    """Monotone degree-one circle map ``phi -> u`` sampled on an equispaced grid."""

    def __init__(self, u_values):
        self.values = np.asarray(u_values, dtype=float)
        n = len(self.values)
        self.phi = 2 * np.pi * np.arange(n) / n
        self._periodic = self.values - self.phi
        self.derivative = 1.0 + spectral_derivative(self._periodic)

    @property
    def n(self):
        return len(self.values)

    def __call__(self, phi):
        return np.asarray(phi) + fourier_eval(self._periodic, phi)

    def derivative_at(self, phi):
        return 1.0 + fourier_eval(spectral_derivative(self._periodic), phi)

    def inverse(self, u):
        """``phi`` with ``u(phi) = u``, by Newton from a linear-interpolation guess."""
        u = np.asarray(u, dtype=float)
        closed_u = np.append(self.values, self.values[0] + 2 * np.pi)
        closed_phi = np.append(self.phi, 2 * np.pi)
        base = self.values[0]
        turns = np.floor((u - base) / (2 * np.pi))
        uu = u - 2 * np.pi * turns
        phi = np.interp(uu, closed_u, closed_phi)
        dper = spectral_derivative(self._periodic)
        for _ in range(30):
            res = phi + fourier_eval(self._periodic, phi) - uu
            phi = phi - res / (1.0 + fourier_eval(dper, phi))
            if np.max(np.abs(res), initial=0) < 1e-14:
                break
        return phi + 2 * np.pi * turns


# -- Theodorsen solver -------------------------------------------------------
class _PolarCurve:
    """Curve ``zeta(v)`` with a continuous polar angle, for Theodorsen's method."""

    def __init__(self, zfun, n_ref):
        self.zfun = zfun
        v = 2 * np.pi * np.arange(n_ref + 1) / n_ref
        z, dz = zfun(v)
        if np.min(np.abs(z)) == 0:
            raise ContourError("the origin lies on the contour")
        rate = np.imag(dz / z)
        if np.min(rate) <= 0:
            j = int(np.argmin(rate))
            raise ContourError(
                f"contour is not star-shaped about 0 (arg z decreases near u = {v[j]:.4f}); "
                "Theodorsen's method needs a star-shaped curve"
            )
        h = np.unwrap(np.angle(z * np.exp(-1j * v)))
        if abs(h[-1] - h[0]) > 1e-6:
            raise ContourError("the origin is not inside the contour")
        self.ref_v = v
        self.ref_h = h

    def polar(self, v):
        z, dz = self.zfun(v)
        base = np.angle(z * np.exp(-1j * v))
        ref = np.interp(np.mod(v, 2 * np.pi), self.ref_v, self.ref_h)
        h = base + 2 * np.pi * np.round((ref - base) / (2 * np.pi))
        return z, v + h, np.imag(dz / z)

    def invert_angle(self, target, v0):
        v = np.array(v0, dtype=float)
        for _ in range(60):
            _, theta, rate = self.polar(v)
            res = theta - target
            v = v - res / rate
            if np.max(np.abs(res)) < 1e-14:
                break
        return v


@dataclass
class _TheodorsenResult:
    v: np.ndarray
    log_lead: float  # log of the leading Taylor coefficient of the inverse map
    defect: float
    iterations: int


def _theodorsen(zfun, n, tol, max_iter, relax):
    curve = _PolarCurve(zfun, 8 * n)
    phi = 2 * np.pi * np.arange(n) / n
    v = curve.invert_angle(phi, phi)
    defect = np.inf
    omega = relax
    prev = np.inf
    for it in range(1, max_iter + 1):
        z, theta, _ = curve.polar(v)
        target = phi + conjugate(np.log(np.abs(z)))
        defect = float(np.max(np.abs(theta - target)))
        if defect <= tol:
            break
        if defect > prev:
            omega = max(0.5 * omega, 0.05)
        prev = defect
        v_new = curve.invert_angle(target, v)
        v = v + omega * (v_new - v)
    else:
        raise ConvergenceError(
            f"Theodorsen iteration did not converge in {max_iter} iterations "
            f"(defect {defect:.3e})", defect,
        )
    z, _, _ = curve.polar(v)
    return _TheodorsenResult(v, float(np.mean(np.log(np.abs(z)))), defect, it)


# -- public types ------------------------------------------------------------
@dataclass
class ConformalPair:
    """Boundary correspondences and normalizations of ``w_int`` and ``w_ext``.

    ``u_int[j]`` / ``u_ext[j]`` are the curve parameters sent to
    ``exp(2 pi i j / n)`` by the interior / exterior map.
    """

    contour: Contour
    u_int: np.ndarray
    u_ext: np.ndarray
    log_lead_int: float  # log f'(0) for the inverse interior map f
    conformal_radius: float
    defects: dict = field(default_factory=dict)

    def __post_init__(self):
        self.int_map = Correspondence(self.u_int)
        self.ext_map = Correspondence(self.u_ext)

    @property
    def n(self):
        return len(self.u_int)

    @property
    def phi(self):
        return self.int_map.phi

    @property
    def r(self):
        return self.conformal_radius

    @property
    def w_int_derivative_at_zero(self):
        return float(np.exp(-self.log_lead_int))

    # boundary correspondences u -> arg w
    def arg_w_int(self, u):
        return self.int_map.inverse(u)

    def arg_w_ext(self, u):
        return self.ext_map.inverse(u)

    def boundary_speed(self, which):
        """``ds/dphi`` on the grid for ``which`` in {"int", "ext"}."""
        cmap = self.int_map if which == "int" else self.ext_map
        return self.contour.speed(cmap.values) * cmap.derivative

    def interior_series(self):
        """Taylor coefficients ``a_m`` of the inverse interior map ``f(w) = sum a_m w^m``."""
        z = self.contour.spec.z(self.u_int)
        return np.fft.fft(z) / self.n

    def inverted_series(self):
        """Taylor coefficients of ``h(w) = 1 / g(1/w)``, ``g`` the inverse exterior map."""
        n = self.n
        # h(exp(i phi')) = 1 / z(u_ext(-phi'))
        idx = (-np.arange(n)) % n
        zeta = 1.0 / self.contour.spec.z(self.u_ext[idx])
        return np.fft.fft(zeta) / n

    def interior_inverse(self, w):
        a = self.interior_series()[: self.n // 2]
        return np.polynomial.polynomial.polyval(np.asarray(w, complex), a)

    def exterior_inverse(self, w):
        b = self.inverted_series()[: self.n // 2]
        return 1.0 / np.polynomial.polynomial.polyval(1.0 / np.asarray(w, complex), b)

    # serialization
    def to_dict(self):
        return {
            "contour": self.contour.spec.to_dict(),
            "contour_digest": self.contour.spec.digest(),
            "grid_size": self.contour.grid_size,
            "modes": self.n,
            "u_int": self.u_int.tolist(),
            "u_ext": self.u_ext.tolist(),
            "log_lead_int": self.log_lead_int,
            "r": self.conformal_radius,
            "defects": self.defects,
        }

    @classmethod
    def from_dict(cls, d, contour):
        if d["contour_digest"] != contour.spec.digest():
            raise ValueError("cached conformal maps belong to a different contour")
        return cls(
            contour,
            np.array(d["u_int"]),
            np.array(d["u_ext"]),
            float(d["log_lead_int"]),
            float(d["r"]),
            dict(d.get("defects", {})),
        )

    def save(self, path):
        _atomic_write_text(path, json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path, contour):
        with open(path) as fh:
            return cls.from_dict(json.load(fh), contour)


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def cache_path(directory, contour, modes):
    return os.path.join(directory, f"maps-{contour.spec.digest()}-{modes}.json")


def solve_maps(contour: Contour, modes: int = 512, tol: float = 1e-12,
               max_iter: int = 2000, relax: float = 1.0,
               tail_tol: float = 1e-13, max_modes: int = 8192) -> ConformalPair:
    """Solve both boundary correspondences on ``modes`` equispaced angles.

    If the Taylor coefficients of either inverse map have not decayed below
    ``tail_tol`` at the top of the resolved band, the mode count is doubled
    (up to ``max_modes``) and the solve repeated.
    """
    requested = modes
    while True:
        pair = _solve_maps_once(contour, modes, tol, max_iter, relax)
        tail = max(pair.defects["interior_tail"], pair.defects["exterior_tail"])
        if tail <= tail_tol or 2 * modes > max_modes:
            pair.defects["requested_modes"] = requested
            return pair
        modes *= 2


def _solve_maps_once(contour, modes, tol, max_iter, relax):
    spec = contour.spec

    def interior(u):
        z, dz = spec.derivatives(u, order=1)
        return z, dz

    def inverted(v):
        z, dz = spec.derivatives(-v, order=1)
        return 1.0 / z, dz / z**2

    res_int = _theodorsen(interior, modes, tol, max_iter, relax)
    res_inv = _theodorsen(inverted, modes, tol, max_iter, relax)

    # exterior: w_ext(z(u)) = exp(i phi_ext) with u = -v(-phi_ext)
    n = modes
    v = res_inv.v
    u_ext = np.empty(n)
    u_ext[0] = -v[0]
    u_ext[1:] = 2 * np.pi - v[n - np.arange(1, n)]
    # log r = -log h'(0) for the inverted interior map h
    r = float(np.exp(-res_inv.log_lead))

    defects = {
        "interior": res_int.defect,
        "exterior": res_inv.defect,
        "interior_iterations": res_int.iterations,
        "exterior_iterations": res_inv.iterations,
    }
    pair = ConformalPair(contour, res_int.v, u_ext, res_int.log_lead, r, defects)
    a = pair.interior_series()
    b = pair.inverted_series()
    neg = slice(n // 2 + 1, None)
    defects["interior_analyticity"] = float(np.max(np.abs(a[neg]), initial=0.0))
    defects["exterior_analyticity"] = float(np.max(np.abs(b[neg]), initial=0.0))
    # relative to the leading coefficient so the doubling decision is scale invariant
    defects["interior_tail"] = float(np.max(np.abs(a[n // 2 - 8 : n // 2])) / abs(a[1]))
    defects["exterior_tail"] = float(np.max(np.abs(b[n // 2 - 8 : n // 2])) / abs(b[1]))
    return pair


@dataclass
class PsiFields:
    """``psi = log|w'|`` traces, values at 0 / infinity, and outward normal derivatives.

    Interior quantities live on the interior grid (boundary points
    ``z(pair.u_int)``), exterior ones on the exterior grid.
    """

    psi_int: np.ndarray
    psi_ext: np.ndarray
    psi_int_at_zero: float
    psi_ext_at_infinity: float
    dn_psi_int: np.ndarray
    dn_psi_ext: np.ndarray

    def psi_int_at(self, pair, u):
        return fourier_eval(self.psi_int, pair.int_map.inverse(u))

    def psi_ext_at(self, pair, u):
        return fourier_eval(self.psi_ext, pair.ext_map.inverse(u))


def eval_psi(pair: ConformalPair, contour: Contour | None = None) -> PsiFields:
    psi_int = -np.log(pair.boundary_speed("int"))
    psi_ext = -np.log(pair.boundary_speed("ext"))
    # |w'| rescales the uniformized normal derivative; exterior extensions
    # decay as rho^-|m| so their outward derivative carries a minus sign
    dn_int = np.exp(psi_int) * dtn(psi_int)
    dn_ext = -np.exp(psi_ext) * dtn(psi_ext)
    return PsiFields(
        psi_int=psi_int,
        psi_ext=psi_ext,
        psi_int_at_zero=-pair.log_lead_int,
        psi_ext_at_infinity=-float(np.log(pair.conformal_radius)),
        dn_psi_int=dn_int,
        dn_psi_ext=dn_ext,
    )
