"""Invariant checks shared by the ``validate`` command and the test suite.

Each check returns a :class:`Check` carrying the measured value, the
threshold it was compared against and whether it passed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .conformal import solve_maps
from .energy import Configuration, GasParams, nearest_neighbor_gaps
from .free_energy import free_energy_report
from .geometry import Contour
from .mcmc import McSettings, mh_chain
from .operators import apply_adjoint, fp1d_evolve, stationary_jet
from .partition import QuadratureSettings, morris_exact, z_quadrature
from .sde import SdeSettings, simulate

__all__ = [
    "Check",
    "random_configuration",
    "zero_mode_check",
    "integrated_autocorrelation",
    "gap_ks_check",
    "fp1d_check",
    "loewner_check",
    "circle_partition_check",
]


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = bool(self.passed)
        return d

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: value={self.value:.3e} threshold={self.threshold:.3e}"


def random_configuration(contour: Contour, n, rng, min_gap_fraction=0.02):
    """Uniform random arclength positions with a minimum cyclic gap."""
    L = contour.perimeter
    while True:
        s = np.sort(rng.uniform(0, L, n))
        if n == 1 or nearest_neighbor_gaps(s, L).min() > min_gap_fraction * L / n:
            return Configuration(contour, s)


def zero_mode_check(contour, p: GasParams, n_configs=100, seed=0, tol=1e-8, name=None):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        cfg = random_configuration(contour, p.n_particles, rng)
        res = apply_adjoint(stationary_jet(cfg, p), p, cfg)
        worst = max(worst, res.relative)
    return Check(name or f"zero_mode[N={p.n_particles},beta={p.beta:g}]", worst <= tol, worst, tol,
                 {"configurations": n_configs})


def integrated_autocorrelation(series, c=5.0):
    """Integrated autocorrelation time of ``series`` (shape ``(T, R)``), pooled
    over the replica axis, with Sokal's self-consistent window."""
    x = np.asarray(series, dtype=float)
    x = x - x.mean(axis=0)
    T = x.shape[0]
    nfft = 1 << (2 * T - 1).bit_length()
    f = np.fft.rfft(x, nfft, axis=0)
    acf = np.fft.irfft(f * np.conj(f), nfft, axis=0)[:T].mean(axis=1)
    if acf[0] <= 0:
        return 1.0
    rho = acf / acf[0]
    tau = 1.0
    for m in range(1, T):
        tau += 2 * rho[m]
        if m >= c * tau:
            break
    return max(tau, 1.0)


def _effective_samples(positions, perimeter):
    """``positions`` shape (T, R, N); uses the smallest gap of each replica as
    the tracked observable."""
    gaps = nearest_neighbor_gaps(positions, perimeter)
    tau = integrated_autocorrelation(gaps.min(axis=-1))
    T, R = positions.shape[:2]
    return T * R / tau, tau


def gap_ks_check(contour, p: GasParams, replicas=1000, seed=0, dt=None, burn=3.0, collect=12.0,
                 snapshot=0.5, mc_sweeps=None, mc_thin=None, threshold=0.02, min_eff=1e4,
                 name=None):
    """Two-sample KS distance between pooled nearest-neighbor gaps from the SDE
    and from the Metropolis chain.

    Times are in units of ``(L/2 pi)^2``; both samplers start from equally
    spaced particles and run ``replicas`` independent copies.
    """
    L = contour.perimeter
    scale = (L / (2 * np.pi)) ** 2
    dt = dt or 1e-3 * scale
    N = p.n_particles
    s0 = np.tile((np.arange(N) + 0.5) * L / N, (replicas, 1))
    thin = max(1, int(round(snapshot * scale / dt)))
    traj = simulate(contour, s0, p, SdeSettings(dt=dt, t_end=(burn + collect) * scale, seed=seed,
                                               burn_in=burn * scale, thinning=thin))
    sde_pos = traj.positions
    mc_thin = mc_thin or 10
    mc_sweeps = mc_sweeps or mc_thin * sde_pos.shape[0]
    mc = mh_chain(contour, s0, p, McSettings(proposal_sigma=0.3 * L / N, sweeps=mc_sweeps,
                                             burn_in=500, thinning=mc_thin, seed=seed + 1))
    mc_pos = mc.positions
    g_sde = nearest_neighbor_gaps(sde_pos, L).ravel()
    g_mc = nearest_neighbor_gaps(mc_pos, L).ravel()
    ks = float(stats.ks_2samp(g_sde, g_mc).statistic)
    n_sde, tau_sde = _effective_samples(sde_pos, L)
    n_mc, tau_mc = _effective_samples(mc_pos, L)
    ok = ks <= threshold and n_sde >= min_eff and n_mc >= min_eff
    details = {
        "effective_sde": n_sde, "effective_mc": n_mc, "tau_sde": tau_sde, "tau_mc": tau_mc,
        "dt": dt, "rejection_rate": traj.rejection_rate, "acceptance_mc": mc.acceptance_rate,
        "min_effective": min_eff,
    }
    return Check(name or f"gap_ks[{contour.spec.name},N={N}]", ok, ks, threshold, details)


def fp1d_check(contour, p: GasParams, grid_size=512, tol=1e-4, mass_tol=1e-10, name=None):
    p1 = GasParams(1, p.beta, p.potential)
    g = fp1d_evolve(contour, p1, grid_size=grid_size)
    z = contour.spec.z(contour.u_of_s(g.s))
    exact = np.exp(p1.beta * p1.potential.value(z))
    exact /= exact.sum() * g.h
    err = float(np.max(np.abs(g.values - exact) / exact))
    t_span = max(g.times[-1] - g.times[0], 1e-300)
    drift = float(np.max(np.abs(np.asarray(g.masses) - g.masses[0]))) / t_span
    ok = err <= tol and drift <= mass_tol
    return Check(name or "fp1d_stationary", ok, err, tol, {"mass_drift_per_time": drift,
                                                          "mass_tolerance": mass_tol})


def loewner_check(contour, p: GasParams, modes=512, rel_tol=1e-6, name=None):
    pair = solve_maps(contour, modes)
    rep = free_energy_report(pair, p.potential, p.beta, rel_tol=rel_tol)
    diff = abs(rep.loewner_contour - rep.loewner_area)
    scale = max(abs(rep.loewner_contour), abs(rep.loewner_area))
    rel = diff / scale if scale > 1e-8 else diff
    ok = bool(rep.tolerances["loewner_consistent"])
    return Check(name or "loewner_consistency", ok, rel, rel_tol,
                 {"loewner_contour": rep.loewner_contour, "loewner_area": rep.loewner_area}), rep


def circle_partition_check(betas=(1.0, 2.0), ns=(1, 2, 3), nodes=128, tol=1e-8, name=None):
    from .geometry import ContourSpec, build_contour

    circle = build_contour(ContourSpec.circle(0, 1))
    worst = 0.0
    for beta in betas:
        for n in ns:
            lq = z_quadrature(circle, GasParams(n, beta), QuadratureSettings(nodes=nodes))
            worst = max(worst, abs(math.expm1(lq - morris_exact(n, beta))))
    return Check(name or "circle_partition", worst <= tol, worst, tol, {"nodes": nodes})
