"""Parabolic connections on the punctured sphere: monodromy, elementary
transforms and isomonodromic (Schlesinger) deformation."""

__version__ = "0.1.0"

from .core import DEFAULT_TOL, ExactScalar, Flag, MarkedSphere, flag_subspace, subspace_contains
from .errors import (ChartExit, ConfigurationCollision, FlagDegenerate, GeometryTooTight, IMLError,
                     InconsistentCandidate, NonIntegralDegree, NonTermination, NumericalError,
                     OrderingCutCrossed, RankBudgetExceeded, SearchBudgetExceeded, SingularGauge,
                     SpectrumMismatch, StepUnderflow, ValidationError)
from .monodromy import (LocalMonodromyData, Loop, MonodromyRep, check_rh_consistency, is_singular_point,
                        monodromy_rep, oracle_transport, rep_invariants, rh_map, standard_loops, transport)
from .parabolic import (ExponentData, FuchsianSystem, ParabolicConnection, StabilityCandidate, Weights,
                        build_flags, check_compatibility, classify_lambda, degree_of, moduli_dimension,
                        residue_invariant_subspaces, stability_test)
from .schlesinger import (DeformationPath, FlowResult, flow, horizontal_lift, schlesinger_rhs,
                          verify_isomonodromy)
from .transforms import (GaugeFunction, TransformRecord, apply_gauge, elm, normalize_sigma, permute_a,
                         twist_b)
