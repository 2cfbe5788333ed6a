"""qplab: a numerical laboratory for quasiperiodic Schrödinger cocycles.

Lyapunov spectra on complex strips, dual finite-range operators and their
banded determinants, exterior-power minor identities, almost-localization
decay of eigenvectors, and constructive almost-reducibility conjugations
with certified strip-norm errors.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateLeadingCoefficient,
    DeterminantVanishes,
    EmptyMaskWarning,
    HypothesisError,
    IndexOutOfRange,
    NearSingular,
    NoEigenvalueWithin,
    NonAffineWarning,
    NotSubcritical,
    NumericError,
    PrecisionExhausted,
    ResonantDivisor,
    SingularInverse,
    VectorVanishes,
    ZeroDenominator,
    ZeroHit,
)
from .arithmetic import (
    ContinuedFraction,
    QuadraticSurd,
    ResonanceSet,
    beta_estimate,
    circle_distance,
    continued_fraction,
    resonances,
)
from .cocycle import (
    AccelerationFit,
    LyapunovSpectrum,
    QuasiperiodicCocycle,
    RotationResult,
    TrigPolynomial,
    acceleration,
    dual_cocycle,
    lyapunov_spectrum,
    rotation_number,
    schrodinger_cocycle,
    subcritical_radius,
    symplectic_convention,
    symplectic_form,
    transfer_log_norms,
    transfer_product,
)
from .operators import (
    GreensTable,
    LogComplex,
    TruncatedOperator,
    avg_log_det,
    det_P,
    greens,
    reconstruct_interior,
    spectrum_sample,
    truncate,
)
from .wedge import (
    NumeratorBoundReport,
    RatioReport,
    StructuralZeroReport,
    WedgeMinorRequest,
    block_minor_expansion,
    block_structural_zeros,
    block_tridiagonal,
    compound_matrix,
    general_truncated_det,
    numerator_bound_check,
    pinned_column_set,
    ratio_constancy_check,
    wedge_minor,
    zero_set_correspondence,
)
from .localization import (
    Eigenpair,
    LocalizationReport,
    decay_report,
    eigenpair_near,
    regularity_check,
    resonant_block_intervals,
    scale_indices,
    scale_shrink_factor,
)
from .reducibility import (
    AnalyticTorusFunction,
    BandNorm,
    BlochPair,
    ConjugationReport,
    ParabolicTarget,
    RotationTarget,
    TorusMatrix,
    almost_reduce,
    band_norm,
    build_bloch,
    cohomological_solve,
    complete_to_sl2,
    conjugation_error_pointwise,
    eliminate_offdiag,
    realify,
    schrodinger_matrix,
    transfer_norm_growth,
)
