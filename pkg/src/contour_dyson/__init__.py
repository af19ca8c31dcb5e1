"""Dyson diffusion of log-interacting particles on closed plane contours.

Modules: ``geometry`` (contours, arclength, frames), ``energy`` (log-gas
energy and its tangential derivatives), ``sde`` (Euler-Maruyama dynamics),
``mcmc`` (Metropolis sampler), ``operators`` (generator, Fokker-Planck and
Hamiltonian operators), ``conformal`` (interior/exterior maps), ``free_energy``,
``partition`` and ``cli``.
"""

from .conformal import ConformalPair, PsiFields, eval_psi, solve_maps
from .energy import Configuration, GasParams, Potential, drift, drift_second, energy
from .errors import (CollisionError, ConfigError, ContourError, ConvergenceError, SamplerError,
                     StepSizeError)
from .free_energy import (BoundaryFunction, FreeEnergyReport, compute_F0_F1, compute_F2cl,
                          compute_F2q, free_energy_report, neumann_jump)
from .geometry import Contour, ContourSpec, Frame, build_contour, frame_at
from .mcmc import McSettings, SampleSet, estimate_observable, mh_chain
from .operators import (GridFunction, OperatorReport, apply_adjoint, apply_generator,
                        apply_hamiltonian, fp1d_evolve)
from .partition import ExpansionFit, QuadratureSettings, fit_expansion, morris_exact, z_quadrature
from .sde import SdeSettings, Trajectory, embed_increment, run_trajectory, sde_step, simulate

__version__ = "0.1.0"
