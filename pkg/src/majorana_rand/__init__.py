"""Random Majorana constellations, SU(2) multipoles and their ensemble statistics."""

__version__ = "0.1.0"

from .angular import CGTable, HalfInteger, as_spin, cg_row, cg_table, clebsch_gordan, spherical_harmonic
from .engine import EnsembleStats, RunConfig, ScalingFit, compare_ensembles, fit_kmax_scaling, run_ensemble
from .ensembles import EnsembleKind, RngStream, sample_cue, sample_majorana, sample_symmetric_projection
from .errors import (
    DegenerateState,
    DomainError,
    IllConditioned,
    InconclusiveOrdering,
    MajoranaError,
    OutOfRange,
    QuadratureDegreeTooLow,
    RootFindingFailure,
    SizeLimit,
)
from .husimi import SphereGrid, integrate, multipoles_from_q, q_from_state, q_function, q_on_grid
from .multipoles import MultipoleSpectrum, cumulative, cumulative_curve, k_max, multipoles, quantumness
from .oracles import (
    cs_cumulative,
    cs_multipole_lengths,
    cs_quantumness,
    cue_cumulative,
    cue_mean_lengths,
    cue_mean_quantumness,
    oracle_report,
    symproj_mean_sq_multipole,
    symproj_mean_sq_multipole_quartic,
    symproj_mean_sq_table,
)
from .states import (
    Constellation,
    SpinState,
    UnnormalizedSymState,
    coherent_amplitude,
    constellation_from_state,
    make_coherent_state,
    normalization_permanent,
    state_from_constellation,
    symmetric_projection,
)
