"""Central tolerance configuration.

Every numeric routine takes an optional ``Tolerances`` record so that test
suites can tighten or loosen all thresholds uniformly.
"""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    root_residual: float = 1e-12   # |p(root)| <= root_residual * evaluation scale
    root_cluster: float = 1e-7     # root clustering radius, relative to root scale
    zero_trim: float = 1e-13       # trailing-coefficient trim, relative to max |coeff|
    quad: float = 1e-11            # quadrature absolute error target
    ode: float = 1e-10             # ODE per-step relative tolerance
    fd_step: float = 1e-6          # relative finite-difference step
    divisor: float = 1e-9          # divisor-point residual bound, relative to scale
    disc_gap: float = 1e-3         # minimum branch-point separation of a generic curve
    branch_avoid: float = 1e-2     # path avoidance radius around branch points
    puncture_radius: float = 1e-3  # evaluation exclusion radius around theta punctures
    cluster_merge: float = 1e-7    # duplicate-point merge radius

    def scaled(self, factor: float) -> "Tolerances":
        """Uniformly rescale the residual-type tolerances by ``factor``."""
        return replace(
            self,
            root_residual=self.root_residual * factor,
            quad=self.quad * factor,
            ode=self.ode * factor,
            divisor=self.divisor * factor,
        )


DEFAULT = Tolerances()
