"""Generator, Fokker-Planck adjoint and similarity-transformed Hamiltonian.

Functions of the particle positions are handled through :class:`Jet` objects
carrying the value and the diagonal tangential derivatives ``d_{s_i} f`` and
``d^2_{s_i} f`` at one configuration.  A jet may carry a log factor so that
``exp(beta E)``-sized quantities stay finite: the represented numbers are
``exp(log_factor) * (value, d1, d2)``.

Pointwise evaluation is all the operators need; the only grid discretization
is the one-particle Fokker-Planck evolution in :func:`fp1d_evolve`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .energy import Configuration, GasParams, derivatives_batch, energy_batch
from .errors import ContourError, StepSizeError

__all__ = [
    "Jet",
    "ContourFunction",
    "FiniteDifferenceFunction",
    "OperatorResult",
    "OperatorReport",
    "GridFunction",
    "energy_jet",
    "stationary_jet",
    "apply_generator",
    "apply_adjoint",
    "apply_hamiltonian",
    "similarity_hamiltonian",
    "calogero_sutherland",
    "fp1d_evolve",
]


@dataclass
class Jet:
    value: float
    d1: np.ndarray
    d2: np.ndarray
    log_factor: float = 0.0

    def __mul__(self, other: "Jet") -> "Jet":
        return Jet(
            self.value * other.value,
            self.d1 * other.value + self.value * other.d1,
            self.d2 * other.value + 2 * self.d1 * other.d1 + self.value * other.d2,
            self.log_factor + other.log_factor,
        )

    @classmethod
    def exp_of(cls, phi: "Jet") -> "Jet":
        """``exp(phi)`` with the exponential kept in the log factor."""
        return cls(1.0, phi.d1.copy(), phi.d2 + phi.d1**2, float(phi.value))

    def scaled(self, c):
        return Jet(c * self.value, c * self.d1, c * self.d2, self.log_factor)


class ContourFunction:
    """A function of ``(z_1..z_N)`` on the contour that can produce a jet."""

    def jet(self, cfg: Configuration) -> Jet:
        raise NotImplementedError

    def __call__(self, cfg):
        j = self.jet(cfg)
        return j.value * np.exp(j.log_factor)


class AnalyticFunction(ContourFunction):
    """Wraps callables ``value(cfg)``, ``d1(cfg)``, ``d2(cfg)``."""

    def __init__(self, value, d1, d2):
        self._value, self._d1, self._d2 = value, d1, d2

    def jet(self, cfg):
        return Jet(float(self._value(cfg)), np.asarray(self._d1(cfg), float),
                   np.asarray(self._d2(cfg), float))


class FiniteDifferenceFunction(ContourFunction):
    """Tangential derivatives of ``func(cfg)`` by central differences in ``s_i``.

    The default step is ``eps**(1/3) * L``.
    """

    def __init__(self, func, h=None):
        self.func = func
        self.h = h

    def jet(self, cfg):
        h = self.h or np.finfo(float).eps ** (1 / 3) * cfg.contour.perimeter
        f0 = float(self.func(cfg))
        d1 = np.empty(cfg.n)
        d2 = np.empty(cfg.n)
        for i in range(cfg.n):
            fp = float(self.func(cfg.moved(i, h)))
            fm = float(self.func(cfg.moved(i, -h)))
            d1[i] = (fp - fm) / (2 * h)
            d2[i] = (fp - 2 * f0 + fm) / h**2
        return Jet(f0, d1, d2)


def energy_jet(cfg: Configuration, p: GasParams) -> Jet:
    d1, d2 = derivatives_batch(cfg.frame, p.potential)
    return Jet(float(energy_batch(cfg.z, p.potential)), d1, d2)


def stationary_jet(cfg: Configuration, p: GasParams, power=None) -> Jet:
    """Jet of ``exp(power * E)``; the default power ``beta`` gives ``P_0``."""
    power = p.beta if power is None else power
    return Jet.exp_of(energy_jet(cfg, p).scaled(power))


@dataclass
class OperatorResult:
    """``value * exp(log_factor)`` is the operator output; ``scale`` is the sum
    of the absolute values of the individual terms (same units as ``value``)."""

    value: float
    scale: float
    log_factor: float = 0.0

    @property
    def relative(self):
        return abs(self.value) / self.scale if self.scale > 0 else abs(self.value)

    @property
    def true_value(self):
        return self.value * np.exp(self.log_factor)


def _as_jet(f, cfg):
    return f if isinstance(f, Jet) else f.jet(cfg)


def _collect(terms, log_factor):
    total = sum(t.sum() for t in terms)
    scale = sum(np.abs(t).sum() for t in terms)
    return OperatorResult(float(total), float(scale), log_factor)


def apply_generator(f, p: GasParams, cfg: Configuration) -> OperatorResult:
    """``sum_i (kappa/2) f_ii + E_i f_i``."""
    j = _as_jet(f, cfg)
    e1, _ = derivatives_batch(cfg.frame, p.potential)
    return _collect([0.5 * p.kappa * j.d2, e1 * j.d1], j.log_factor)


def apply_adjoint(P, p: GasParams, cfg: Configuration) -> OperatorResult:
    """Right-hand side of the Fokker-Planck equation at ``cfg``."""
    j = _as_jet(P, cfg)
    e1, e2 = derivatives_batch(cfg.frame, p.potential)
    return _collect([0.5 * p.kappa * j.d2, -e1 * j.d1, -e2 * j.value], j.log_factor)


def apply_hamiltonian(f, p: GasParams, cfg: Configuration) -> OperatorResult:
    """Explicit form ``(1/2) sum_i (kappa f_ii - E_i^2 f / kappa - E_ii f)``."""
    j = _as_jet(f, cfg)
    e1, e2 = derivatives_batch(cfg.frame, p.potential)
    k = p.kappa
    return _collect(
        [0.5 * k * j.d2, -0.5 / k * e1**2 * j.value, -0.5 * e2 * j.value],
        j.log_factor,
    )


def similarity_hamiltonian(f, p: GasParams, cfg: Configuration) -> OperatorResult:
    """``exp(-E/kappa) A* (exp(E/kappa) f)`` evaluated through the adjoint."""
    j = _as_jet(f, cfg)
    g = stationary_jet(cfg, p, power=1.0 / p.kappa) * j
    res = apply_adjoint(g, p, cfg)
    # exp(-E/kappa) cancels the log factor picked up from exp(E/kappa)
    res.log_factor -= energy_jet(cfg, p).value / p.kappa
    return res


def calogero_sutherland(f, p: GasParams, cfg: Configuration) -> OperatorResult:
    """Calogero-Sutherland Hamiltonian on the unit circle, zero constant.

    ``(kappa/2) (sum_i f_ii - (2/kappa)(2/kappa - 1) sum_{i!=j} f / (4 sin^2((t_i - t_j)/2)))``
    with angles ``t_i = s_i``.  Only meaningful on the unit circle.
    """
    j = _as_jet(f, cfg)
    k = p.kappa
    theta = cfg.s
    n = theta.size
    dt = theta[:, None] - theta[None, :]
    off = ~np.eye(n, dtype=bool)
    kernel = np.zeros((n, n))
    kernel[off] = 1.0 / (4 * np.sin(dt[off] / 2) ** 2)
    coupling = (2 / k) * (2 / k - 1)
    return _collect(
        [0.5 * k * j.d2, -0.5 * k * coupling * kernel.sum(axis=1) * j.value],
        j.log_factor,
    )


@dataclass
class OperatorReport:
    operator: str
    residuals: list = field(default_factory=list)
    configurations: list = field(default_factory=list)

    def add(self, result: OperatorResult, cfg: Configuration):
        self.residuals.append(result.relative)
        self.configurations.append(cfg.s.tolist())

    @property
    def max_residual(self):
        return max(self.residuals) if self.residuals else 0.0

    def to_dict(self):
        return {
            "operator": self.operator,
            "max_residual": self.max_residual,
            "residuals": self.residuals,
            "configurations": self.configurations,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


# -- one-particle Fokker-Planck evolution -----------------------------------
@dataclass
class GridFunction:
    """Values on the uniform arclength grid ``s_j = j L / n`` (one particle)."""

    contour: object
    s: np.ndarray
    values: np.ndarray
    times: np.ndarray = None
    masses: np.ndarray = None
    entropies: np.ndarray = None

    @property
    def h(self):
        return self.contour.perimeter / self.s.size

    def mass(self):
        return float(self.values.sum() * self.h)


def _bernoulli(x):
    """``x / (exp(x) - 1)`` with the removable singularity at 0."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    big = np.abs(x) > 1e-6
    out[big] = x[big] / np.expm1(x[big])
    small = ~big
    out[small] = 1 - x[small] / 2 + x[small] ** 2 / 12
    return out


def fp1d_matrix(contour, p: GasParams, grid_size: int):
    """Conservative Scharfetter-Gummel discretization of the one-particle
    Fokker-Planck operator; returns ``(A, s, E)`` with ``dP/dt = A P``."""
    n = int(grid_size)
    L = contour.perimeter
    h = L / n
    s = h * np.arange(n)
    e = p.potential.value(contour.z_at(s))
    a = p.beta * (np.roll(e, -1) - e)  # across face j+1/2
    c = 0.5 * p.kappa / h**2
    fwd = c * _bernoulli(a)  # coefficient of P_{j+1} in flux F_{j+1/2}
    bwd = c * _bernoulli(-a)  # coefficient of P_j in F_{j+1/2}
    # dP_j/dt = (F_{j+1/2} - F_{j-1/2}) / h
    rows = np.arange(n)
    diag = -bwd - np.roll(fwd, 1)
    upper = fwd
    lower = np.roll(bwd, 1)
    A = sp.csc_matrix(
        (
            np.concatenate([diag, upper, lower]),
            (
                np.concatenate([rows, rows, rows]),
                np.concatenate([rows, (rows + 1) % n, (rows - 1) % n]),
            ),
        ),
        shape=(n, n),
    )
    return A, s, e


def fp1d_evolve(contour, p: GasParams, grid_size=512, dt=0.05, t_end=60.0,
                method="implicit", initial=None) -> GridFunction:
    """Evolve the one-particle density from uniform (or ``initial``).

    ``method="implicit"`` is backward Euler (unconditionally stable);
    ``"explicit"`` is forward Euler and raises :class:`StepSizeError` when
    ``dt`` violates the stability bound.  The scheme's stationary state is
    ``exp(beta W)`` at the nodes and total mass is conserved to round-off.
    """
    if p.n_particles != 1:
        raise ContourError("fp1d_evolve is defined for a single particle")
    A, s, e = fp1d_matrix(contour, p, grid_size)
    h = contour.perimeter / grid_size
    if method == "explicit":
        limit = 1.0 / np.max(np.abs(A.diagonal()))
        if dt > limit:
            raise StepSizeError(f"dt={dt:g} violates the explicit stability bound; use dt <= {limit:.3e}")
        step = lambda P: P + dt * (A @ P)  # noqa: E731
    elif method == "implicit":
        lu = splu(sp.identity(grid_size, format="csc") - dt * A)
        step = lu.solve
    else:
        raise ValueError(f"unknown method {method!r}")

    P = np.full(grid_size, 1.0 / contour.perimeter) if initial is None else np.array(initial, float)
    stat = np.exp(p.beta * (e - e.max()))
    stat /= stat.sum() * h
    n_steps = int(round(t_end / dt))
    times = [0.0]
    masses = [P.sum() * h]
    entropies = [_relative_entropy(P, stat, h)]
    for k in range(n_steps):
        P = step(P)
        times.append((k + 1) * dt)
        masses.append(P.sum() * h)
        entropies.append(_relative_entropy(P, stat, h))
    return GridFunction(contour, s, P, np.array(times), np.array(masses), np.array(entropies))


def _relative_entropy(P, Q, h):
    ratio = np.where(P > 0, P / Q, 1.0)
    return float(np.sum(P * np.log(ratio)) * h)
