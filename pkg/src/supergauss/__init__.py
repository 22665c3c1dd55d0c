"""Super-Gaussian directions for arbitrary random vectors.

Pipeline: angularly-isotropic position, cap-based direction selection and a
Monte Carlo tail certificate.
"""

SCHEMA_VERSION = "supergauss-report/1"

from .distributions import BallMarginal, Dataset, SourceSpec, load_dataset, sample, save_dataset  # noqa: E402
from .direction import DirectionSelection, SelectionConfig, select_direction  # noqa: E402
from .effective_rank import effective_rank_exact, effrank_at_least  # noqa: E402
from .isotropy import isotropize  # noqa: E402
from .pipeline import PipelineConfig, run_pipeline  # noqa: E402
from .verifier import certify, median_abs, tail_curve  # noqa: E402

__all__ = [
    "SCHEMA_VERSION", "BallMarginal", "Dataset", "SourceSpec", "load_dataset", "sample", "save_dataset",
    "DirectionSelection", "SelectionConfig", "select_direction", "effective_rank_exact", "effrank_at_least",
    "isotropize", "PipelineConfig", "run_pipeline", "certify", "median_abs", "tail_curve",
]
