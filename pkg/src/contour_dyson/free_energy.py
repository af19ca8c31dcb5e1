"""Large-N free-energy coefficients of the log-gas on a contour.

``F0 = beta log r``; ``F1`` has a boundary term, the average of ``W`` against
harmonic measure from infinity, plus constants in ``beta`` and ``r``; the O(1)
term splits into an electrostatic part built on the Neumann jump operator and
a fluctuation part equal to ``I^L / 24 + log sqrt(beta)``, where ``I^L`` is
the Loewner energy of the contour.

Boundary integrals are trapezoidal sums in the uniformized angle of whichever
map is natural for the integrand, using ``ds = (ds/dphi) dphi``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln

from .conformal import ConformalPair, PsiFields, dtn, eval_psi, fourier_eval
from .energy import Potential
from .geometry import Contour

__all__ = [
    "BoundaryFunction",
    "FreeEnergyReport",
    "neumann_jump",
    "jump_form",
    "compute_F0_F1",
    "compute_F2cl",
    "compute_F2q",
    "dirichlet_energies",
    "free_energy_report",
    "f1_conventions",
]

TAIL_WARN = 1e-10


class BoundaryFunction:
    """A real function on the contour.

    Either ``func_u`` (a vectorized callable of the curve parameter ``u``) or
    ``values`` on the arclength nodes ``s_j = j L / n`` must be given; in the
    latter case off-node values come from the trigonometric interpolant in
    ``s``.
    """

    def __init__(self, contour: Contour, func_u=None, values=None):
        if (func_u is None) == (values is None):
            raise ValueError("give exactly one of func_u or values")
        self.contour = contour
        self._func_u = func_u
        self.values = None if values is None else np.asarray(values, dtype=float)

    @classmethod
    def from_z(cls, contour, func_z):
        return cls(contour, func_u=lambda u: np.real(func_z(contour.spec.z(u))))

    @classmethod
    def from_potential(cls, contour, potential: Potential):
        return cls.from_z(contour, potential.value)

    def at_u(self, u):
        if self._func_u is not None:
            return np.asarray(self._func_u(np.asarray(u, dtype=float)), dtype=float)
        s = self.contour.s_of_u(u)
        n = len(self.values)
        return fourier_eval(self.values, 2 * np.pi * s / self.contour.perimeter)

    def nodes(self, n):
        """Arclength nodes and the function's values there."""
        s = self.contour.perimeter * np.arange(n) / n
        return s, self.at_u(self.contour.u_of_s(s))


def _check_tail(values, label):
    c = np.abs(np.fft.rfft(values)) / len(values)
    tail = float(np.linalg.norm(c[-max(len(c) // 16, 1):]))
    if tail > TAIL_WARN * max(np.linalg.norm(c), 1e-300):
        warnings.warn(f"{label}: unresolved high-frequency content (tail norm {tail:.2e})",
                      RuntimeWarning, stacklevel=3)
    return tail


def _pullbacks(f, pair):
    return f.at_u(pair.u_int), f.at_u(pair.u_ext)


def neumann_jump(f: BoundaryFunction, pair: ConformalPair, contour: Contour | None = None,
                 psi: PsiFields | None = None, n_out: int | None = None) -> BoundaryFunction:
    """``d_n f_H - d_n f^H`` (outward normal on both sides) on arclength nodes.

    Each harmonic extension is computed in its uniformized angle, where the
    interior and exterior Dirichlet-to-Neumann maps are both ``|m|`` up to the
    sign of the outward direction, and rescaled by ``|w'|``.
    """
    contour = contour or pair.contour
    psi = psi or eval_psi(pair)
    fi, fe = _pullbacks(f, pair)
    _check_tail(fi, "neumann_jump (interior pullback)")
    _check_tail(fe, "neumann_jump (exterior pullback)")
    ti = dtn(fi)
    te = dtn(fe)
    n = n_out or pair.n
    s = contour.perimeter * np.arange(n) / n
    u = contour.u_of_s(s)
    phi_i = pair.int_map.inverse(u)
    phi_e = pair.ext_map.inverse(u)
    jump = (np.exp(fourier_eval(psi.psi_int, phi_i)) * fourier_eval(ti, phi_i)
            + np.exp(fourier_eval(psi.psi_ext, phi_e)) * fourier_eval(te, phi_e))
    return BoundaryFunction(contour, values=jump)


def jump_form(f: BoundaryFunction, g: BoundaryFunction, pair: ConformalPair) -> float:
    """Bilinear form ``oint f * N(g) ds`` evaluated in the uniformized angles."""
    fi, fe = _pullbacks(f, pair)
    gi, ge = _pullbacks(g, pair)
    h = 2 * np.pi / pair.n
    return float(h * (np.dot(fi, dtn(gi)) + np.dot(fe, dtn(ge))))


@dataclass
class FreeEnergyReport:
    beta: float
    F0: float
    F1: float
    F1_convention: str
    F2_cl: float
    F2_q: float
    loewner_contour: float
    loewner_area: float
    tolerances: dict = field(default_factory=dict)
    F1_alternative: float = float("nan")

    @property
    def F2(self):
        return self.F2_cl + self.F2_q

    @property
    def consistent(self):
        return bool(self.tolerances.get("loewner_consistent", True))

    def to_dict(self):
        d = asdict(self)
        d.pop("F1_alternative")
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def f1_conventions(beta, r=1.0, boundary_term=0.0):
    """``F1`` under the verbatim formula ("verbatim") and the ``dtheta/2pi``-measure
    variant ("morris") that matches the exact circular partition function.

    They differ by ``(beta - 1) log(2 pi)``.
    """
    verbatim = (boundary_term - (beta - 1) * math.log(math.e * r / (2 * math.pi * beta))
                + math.log(2 * math.pi) - float(gammaln(beta)))
    morris = verbatim - (beta - 1) * math.log(2 * math.pi)
    return {"verbatim": verbatim, "morris": morris, "discrepancy": verbatim - morris}


def compute_F0_F1(pair: ConformalPair, contour: Contour | None, W: Potential, beta: float,
                  convention: str = "verbatim"):
    """Return ``(F0, F1)``; the boundary term averages ``W`` over the exterior angle."""
    contour = contour or pair.contour
    F0 = beta * math.log(pair.r)
    w_ext = W.value(contour.spec.z(pair.u_ext))
    boundary = beta * float(np.mean(w_ext))  # (beta/2pi) oint |w_ext'| W ds
    F1 = f1_conventions(beta, pair.r, boundary)[convention]
    return F0, F1


def compute_F2cl(pair: ConformalPair, contour: Contour | None, W: Potential, beta: float,
                 psi: PsiFields | None = None) -> float:
    contour = contour or pair.contour
    psi = psi or eval_psi(pair)
    lam = 1.0 - 1.0 / beta

    def g(u):
        return lam * psi.psi_ext_at(pair, u) + W.value(contour.spec.z(u))

    gf = BoundaryFunction(contour, func_u=g)
    return beta / (8 * np.pi) * jump_form(gf, gf, pair)


def _series_on_circle(coeffs, rho, n_phi, power):
    """``sum_m m^(power) a_m rho^m exp(i m phi)`` on ``n_phi`` angles; falling factorial power."""
    m = np.arange(len(coeffs), dtype=float)
    weight = np.ones_like(m)
    for k in range(power):
        weight = weight * (m - k)
    padded = np.zeros(n_phi, dtype=complex)
    padded[: len(coeffs)] = coeffs * weight * rho**m
    return np.fft.ifft(padded) * n_phi


def dirichlet_energies(pair: ConformalPair, n_radial: int = 96):
    """Dirichlet integrals of ``psi_int`` over the interior and ``psi_ext`` over
    the exterior, by polar quadrature in the uniformizing disks.

    Interior: ``psi = -log|f'|`` with ``f`` the inverse interior map, so
    ``|grad psi| = |f''/f'|``.  Exterior, in ``omega = 1/w``: ``psi =
    -log|h'| + 2 log|h/omega|`` with ``h(omega) = 1/g(1/omega)``.
    """
    n = pair.n
    half = n // 2
    a = pair.interior_series()[:half]
    b = pair.inverted_series()[:half]
    q = b[1:]  # h(omega)/omega
    n_phi = 2 * n
    x, wts = np.polynomial.legendre.leggauss(n_radial)
    rho = 0.5 * (x + 1)
    wts = 0.5 * wts
    e_int = 0.0
    e_ext = 0.0
    for r, wt in zip(rho, wts):
        f1 = _series_on_circle(a, r, n_phi, 1)  # w f'
        f2 = _series_on_circle(a, r, n_phi, 2)  # w^2 f''
        grad_int = np.abs(f2 / f1) / r
        h1 = _series_on_circle(b, r, n_phi, 1)
        h2 = _series_on_circle(b, r, n_phi, 2)
        q0 = _series_on_circle(q, r, n_phi, 0)
        q1 = _series_on_circle(q, r, n_phi, 1)
        grad_ext = np.abs(-h2 / h1 + 2 * q1 / q0) / r
        ring = 2 * np.pi * r * wt
        e_int += ring * np.mean(grad_int**2)
        e_ext += ring * np.mean(grad_ext**2)
    return float(e_int), float(e_ext)


def compute_F2q(pair: ConformalPair, contour: Contour | None, beta: float,
                psi: PsiFields | None = None, rel_tol: float = 1e-6, n_radial: int = 96):
    """Return ``(F2_q, loewner_contour, loewner_area, info)``.

    ``loewner_contour`` comes from the boundary-integral expression,
    ``loewner_area`` from Dirichlet integrals computed by area quadrature.
    """
    psi = psi or eval_psi(pair)
    h = 2 * np.pi / pair.n
    ds_int = pair.boundary_speed("int") * h
    ds_ext = pair.boundary_speed("ext") * h
    flux = float(np.sum(psi.psi_int * psi.dn_psi_int * ds_int)
                 - np.sum(psi.psi_ext * psi.dn_psi_ext * ds_ext))
    point = psi.psi_ext_at_infinity - psi.psi_int_at_zero
    log_sqrt_beta = 0.5 * math.log(beta)
    F2_q = flux / (24 * np.pi) + point / 6 + log_sqrt_beta
    loewner_contour = 24 * (F2_q - log_sqrt_beta)
    e_int, e_ext = dirichlet_energies(pair, n_radial)
    loewner_area = (e_int + e_ext) / np.pi + 4 * point
    diff = abs(loewner_contour - loewner_area)
    scale = max(abs(loewner_contour), abs(loewner_area))
    ok = diff <= rel_tol * scale or diff <= 1e-8
    info = {
        "loewner_abs_diff": diff,
        "loewner_rel_tol": rel_tol,
        "loewner_consistent": bool(ok),
        "dirichlet_int": e_int,
        "dirichlet_ext": e_ext,
    }
    if not ok:
        warnings.warn(f"Loewner energy forms disagree by {diff:.3e}", RuntimeWarning, stacklevel=2)
    return F2_q, loewner_contour, loewner_area, info


def free_energy_report(pair: ConformalPair, W: Potential, beta: float,
                       convention: str = "verbatim", rel_tol: float = 1e-6) -> FreeEnergyReport:
    if convention not in ("verbatim", "morris"):
        raise ValueError("convention must be 'verbatim' or 'morris'")
    psi = eval_psi(pair)
    F0, F1 = compute_F0_F1(pair, None, W, beta, convention)
    other = "morris" if convention == "verbatim" else "verbatim"
    _, F1_other = compute_F0_F1(pair, None, W, beta, other)
    F2_cl = compute_F2cl(pair, None, W, beta, psi)
    F2_q, lc, la, info = compute_F2q(pair, None, beta, psi, rel_tol)
    tolerances = {
        "theodorsen_defect": max(pair.defects.get("interior", 0.0), pair.defects.get("exterior", 0.0)),
        "modes": pair.n,
        f"F1_{other}": F1_other,
        **info,
    }
    return FreeEnergyReport(beta, F0, F1, convention, F2_cl, F2_q, lc, la, tolerances, F1_other)
