"""Mean curvature of level-set foliations, conformal prescription of mean
curvature, and formal boundary expansions for asymptotically hyperbolic
metrics."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CmcfolError, DegenerateSliceError, DomainError, FlowLineError, NotAsymptoticallyHyperbolicError,
    NotPositiveDefiniteError, ParseError, PreconditionError, SeriesError,
)
from .expr import Expression, Jet2, eval_jet2, parse, to_source  # noqa: E402
from .geometry import (  # noqa: E402
    Chart, ConformalMetric, FieldMetric, FiniteDifferenceMetric, christoffel, covariant_hessian,
    covector_norm, euclidean, laplacian, scalar_curvature,
)
from .foliation import (  # noqa: E402
    CmcReport, CurvatureSample, Ray, SliceFunction, detect_cmc, generic_cmc_residual,
    linearize_mean_curvature, mean_curvature, mean_curvature_field, normalize_constant_H,
    second_fundamental_form, unit_normal, weighted_cmc_residual,
)
from .conformal import (  # noqa: E402
    Collar, ConformalFactor, cmc_factor, integrate_flow_line, minimalizing_factor,
    prescribing_factor, transform_mean_curvature,
)
from .series import Axis, BoundaryChart, Series  # noqa: E402
from .ahseries import (  # noqa: E402
    ExpansionState, NormalFormMetric, ah_defect, expand_cmc, expand_minimal,
    interior_mean_curvature_relation, mean_curvature_series,
)
from .corpus import CorpusEntry, corpus_get, corpus_names  # noqa: E402
