"""n-party Hardy states, nonlocality bounds and self-testing checks."""

from .behavior import (BehaviorTensor, HardyStats, MeasurementSet, Scenario,
                       check_no_signaling, hardy_statistics,
                       joint_distribution, measurements_from_observables,
                       measurements_from_pairs)
from .linalg import (StateVector, SymEigResult, eig_herm, eig_sym, kron,
                     partial_trace, psd_project, schmidt_spectrum)
from .npa import (MomentProblem, build_moment_problem, canonical_monomial,
                  monomial_list, npa_upper_bound, problem_from_text,
                  problem_to_text)
from .polytope import (BoundQuery, LinearProgram, LPSolution,
                       deterministic_vertices, local_max, lp_solve,
                       nosignaling_max)
from .sdp import MomentSolution, sdp_solve
from .selftest import (JordanDecomposition, ObservablePair, SelfTestReport,
                       canonical_observables, jordan_blocks, selftest_report)
from .states import (MeasurementPair, PmaxResult, ProductBasis,
                     TripartiteCoefficients, hardy_state,
                     is_genuinely_entangled, optimal_alpha_sq_tripartite,
                     pmax, product_basis, success_prob_closed,
                     tripartite_explicit)
from .variational import (AnsatzParams, LowerBoundResult, ansatz_measurements,
                          ansatz_state, lower_bound)

__version__ = "0.1.0"
