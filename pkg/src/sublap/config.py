"""Numerical defaults used across the library.

All tolerances live here so a CLI run can override them in one place and
record the effective values in its manifest.
"""

from dataclasses import dataclass, asdict


@dataclass
class Tolerances:
    # finite differences
    fd_step_scale: float = 1e-4        # first-derivative step: scale*(1+|q|_inf)
    dir2_step_scale: float = 1e-2      # integral-curve second-derivative stencil
    dir2_substeps: int = 8             # RK4 sub-steps per stencil flow

    # ODE integration
    ode_step: float = 1e-3             # default fixed RK4 step for geodesics
    sde_step: float = 1e-3             # Stratonovich-Heun step

    # linear algebra
    frame_det_rtol: float = 1e-12      # degenerate-frame detection
    contact_min_sv: float = 1e-8       # smallest singular value of J for "contact"
    eig_gap: float = 1e-6              # quasi-Reeb eigenvalue separation
    lstsq_consistent: float = 1e-8     # affine-solvability residual bound
    none_residual: float = 1e-4        # certified-infeasibility lower bound

    # structure invariants
    antisymmetry: float = 1e-8
    unit_cylinder: float = 1e-12
    chi_roundtrip: float = 1e-5
    integrability: float = 1e-4   # above nested-FD noise, far below real violations

    # Monte Carlo
    discard_fraction: float = 0.01     # hard-error threshold for failed draws
    mc_chunk: int = 250_000

    def asdict(self):
        return asdict(self)

    def override(self, **kwargs):
        unknown = set(kwargs) - set(self.asdict())
        if unknown:
            raise KeyError(f"unknown tolerance name(s): {sorted(unknown)}")
        for name, value in kwargs.items():
            setattr(self, name, value)
        return self


DEFAULTS = Tolerances()
