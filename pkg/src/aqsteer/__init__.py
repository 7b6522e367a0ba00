"""Steering assemblages, almost-quantum moment matrices and their certificates."""
from .errors import (AqsteerError, IllDefinedMarginalError, InconsistentMomentMatrixError, InvalidInputError,
                     LiftInconsistencyError, NotPSDError, PreconditionError, ScenarioTooLargeError,
                     SolverFailure)
from .ghjw import Realization, moment_to_realization, ns_to_moment, realize, verify_realization
from .lift import (BlockDecomposition, LiftReport, Prop1Report, bell_certificate_from_epr,
                   build_pr_product_fixture, commuting_bell_certificate, decompose_bell_moment, lift,
                   lift_correlation, prop1_check)
from .moments import (MembershipReport, MomentMatrix, compile_bell, compile_epr, maximize_functional,
                      membership, write_sdpa)
from .quantum import (Assemblage, Correlation, MeasurementSet, assemblage_correlation, born_assemblage,
                      check_nonsignalling, marginal, reduced_state)
from .sdp import SdpProblem, SdpSolution, SolverOptions, embed_hermitian, gram_vectors, solve
from .tomography import (TomographyFrame, is_tomographically_complete, pauli_frame, reconstruct,
                         tomographic_correlation)
from .words import (EMPTY, NULL, Letter, Scenario, Word, canonicalize, generate_aq_words, is_null,
                    product_key)

__version__ = "0.1.0"
