"""Rate-distortion tools for sources whose distortion measure depends on side information."""

from .errors import (
    BudgetError,
    ConvergenceError,
    DsiError,
    InfeasibleError,
    ModelError,
    SingularSystemError,
)
from .model import (
    DistortionTensor,
    QDistribution,
    RDCurve,
    SideInfoModel,
    build_model,
    check_decomposition,
    independent_model,
    load_model_json,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "ConvergenceError",
    "DistortionTensor",
    "DsiError",
    "InfeasibleError",
    "ModelError",
    "QDistribution",
    "RDCurve",
    "SideInfoModel",
    "SingularSystemError",
    "build_model",
    "check_decomposition",
    "independent_model",
    "load_model_json",
]
