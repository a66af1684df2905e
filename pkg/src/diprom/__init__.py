"""Displacement-interpolation reduced-order modelling of parametrized
conservation laws.

The package solves the inviscid Burgers equation with an exponential
source by a Godunov finite-volume method, builds local reduced bases on
a parameter-time decomposition by displacement interpolation of shock
profiles (monotone rearrangement of signed derivative pieces), projects
the dynamics onto those bases, optionally compresses them further with
a proper-orthogonal-decomposition second stage, and drives Monte-Carlo
uncertainty quantification of shock quantities of interest.
"""
from .basis import (LocalBasis, SignatureReport, build_local_basis,
                    check_signature_condition, orthonormalize,
                    sample_element, transition_matrix)
from .config import PipelineConfig
from .errors import (CflViolation, ConfigError, SignatureMismatch,
                     StoreIntegrityError)
from .hfm import (PARAM_BOX, Grid1D, HfmConfig, ParamPoint, Snapshot,
                  Trajectory, godunov_flux, solve)
from .param_space import (Element, TimePartition, Triangulation, delaunay,
                          element)
from .pod import (collect_sweep, jacobi_eigh, pod_truncate, reduce_basis,
                  svd_spectrum)
from .rom import (RomOperators, RomResult, assemble_operators,
                  build_flux_tensor, build_source_matrix, rom_solve,
                  rom_step)
from .store import OfflineStore, read_basis, read_trajectory, verify_store
from .transport import (BasisCandidate, Density, Piece, Quantile,
                        decompose, differentiate, displacement_interp,
                        signature, to_quantile)
from .uq import (Kde2D, Poly2Surrogate, QoiSample, kde2d, polyfit2d,
                 relative_error, sample_uniform, shock_qois,
                 shock_qois_robust, sliding_correlation)

__version__ = "1.0.0"

__all__ = [
    "BasisCandidate", "CflViolation", "ConfigError", "Density", "Element",
    "Grid1D", "HfmConfig", "Kde2D", "LocalBasis", "OfflineStore",
    "PARAM_BOX", "ParamPoint", "PipelineConfig", "Piece", "Poly2Surrogate",
    "QoiSample", "Quantile", "RomOperators", "RomResult",
    "SignatureMismatch", "SignatureReport", "Snapshot",
    "StoreIntegrityError", "TimePartition", "Trajectory", "Triangulation",
    "assemble_operators", "build_flux_tensor", "build_local_basis",
    "build_source_matrix", "check_signature_condition", "collect_sweep",
    "decompose", "delaunay", "differentiate", "displacement_interp",
    "element", "godunov_flux", "jacobi_eigh", "kde2d", "orthonormalize",
    "pod_truncate", "polyfit2d", "read_basis", "read_trajectory",
    "reduce_basis", "relative_error", "rom_solve", "rom_step",
    "sample_element", "sample_uniform", "shock_qois", "shock_qois_robust",
    "signature", "sliding_correlation", "solve", "svd_spectrum",
    "to_quantile", "transition_matrix", "verify_store",
]
