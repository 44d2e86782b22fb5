"""Divide-and-conquer nearest-neighbor classification (bigNN) and its denoised variant."""

from .core import (ConfigError, DataError, Dataset, LabeledPoint, ParameterError, PartitionPlan,
                   RngStream, alpha_from_holder, make_partition)
from .denoise import DenoisedModel, predict_denoised, predict_denoised_batch, pretrain
from .ensemble import (BigNnModel, FixedK, OracleDividedK, Sim3K, TheoryK, divide_oracle_k,
                       predict, predict_batch, predict_local, select_k, select_k_sim3, train,
                       tune_k_cv)
from .knn_index import BruteForceIndex, KdTreeIndex, KnnIndex, NeighborSet, build_index, mean_label, query_knn
from .serialization import load_model, save_model

__version__ = "0.1.0"
