"""Knothe-Rosenblatt domain adaptation (KRDA) for tabular data.

Fit a shared-backbone autoregressive Gaussian-mixture density model to a
source and a target dataset, push every source row through the triangular
quantile-preserving map into the target domain, and train a classifier on
the transferred rows.
"""

__version__ = "0.1.0"

from .classifier import SvmModel, accuracy, svm_fit, svm_predict
from .data import Dataset, GmmSpec, MoonsSpec, Standardizer, gen_gmm, gen_moons, load_csv, save_csv, subsample
from .errors import (
    BracketNotFound, DimensionMismatch, EmptyDataset, KrdaError, NonFiniteGradient, NonFiniteValue,
    ParseError, SingleClassData,
)
from .mixture import GaussianMixture1D, mixture_cdf, mixture_inverse_cdf, mixture_log_pdf, mixture_pdf
from .nade import KrdaModel, load_model, log_likelihood, save_model
from .trainer import TrainConfig, fit_joint
from .transport import TransferReport, transfer_dataset, transfer_sample
