"""Exact desk-scale tools for Gibbs random fields on finite lattice windows."""

__version__ = "0.1.0"

from .errors import (DomainError, GibbsLabError, InconsistentKernelError, PositivityError,
                     ResourceError, UnsupportedPotentialError)
from .lattice import Configuration, LatticeConfig, Volume, ball, enumerate_configurations
from .distribution import DistributionTable
from .potential import (PairPotential, Potential, TablePotential, build_potential, energy,
                        evaluate_potential, exponential_pair, ising, ising_weights,
                        moebius_extract, potts, zero_potential)
from .specification import (GibbsSpecification, OnePointKernel, ReconstructedSpecification,
                            SpecKernel, gibbs_element, gibbs_onepoint, quasilocality_modulus,
                            reconstruct_from_onepoint, validate_onepoint_cycle,
                            validate_spec_consistency)
from .fields import (FieldTable, MixtureField, ProductMeasure, TransferChain, finite_conditional,
                     marginal, reconstruct_field, transfer_marginals, validate_fcycle,
                     validate_fcycle2)
from .criteria import (DefectSchedule, VerdictReport, condition_A_schedule, condition_C_defect,
                       condition_D_defect, condition_E_defect, gibbs_verdict, sullivan_envelope,
                       uniform_nonnullness)
