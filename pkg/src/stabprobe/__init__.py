"""Local identifiability probes for blind source separation.

The probe is the smallest singular value of the Jacobian of a constraint
family (lagged covariances or fourth-order cumulant matrices) with respect to
rotations of the whitened mixing model.
"""

from .experiments import ExperimentConfig, GridResult, monte_carlo
from .linalg import commutator, expm_skew, singular_spectrum, skew_basis, vec
from .probe import (
    JacobianReport,
    ObservationEvaluator,
    StabilizerProbe,
    jacobian_fd,
    jacobian_sos_analytic,
    kernel_intersection_check,
    probe,
)
from .separation import JADE, SOBI, amari_index, jade_separate, joint_diagonalize, sobi_separate
from .signals import RngSeed, SourceSpec, generate_sources, mix
from .statistics import ConstraintSet, Whitener, cumulant_matrices, fit_whitener, sos_constraints

__version__ = "0.1.0"
