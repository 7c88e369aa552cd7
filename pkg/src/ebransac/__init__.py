"""EB-RANSAC robust estimation: estimator, baselines, theory and experiments."""
from .core import CallableLossModel, DataPoint, Dataset, LossModel, NonFiniteLossError, mean_loss, mean_loss_grad
from .ebr import EbrConfig, FitResult, InitBox, InitGaussian, ebr_loss, ebr_loss_grad, fit
from .kernels import BACKEND
from .models import ExponentialModel, GaussianModel, LinearRegressionModel, get_model

__all__ = [
    "BACKEND", "CallableLossModel", "DataPoint", "Dataset", "EbrConfig", "ExponentialModel", "FitResult",
    "GaussianModel", "InitBox", "InitGaussian", "LinearRegressionModel", "LossModel", "NonFiniteLossError",
    "ebr_loss", "ebr_loss_grad", "fit", "get_model", "mean_loss", "mean_loss_grad",
]
__version__ = "0.1.0"
