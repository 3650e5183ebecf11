"""Kernelized online pairwise learning with random Fourier features and stratified buffers."""

from .dataio import (Dataset, Example, binarize_labels, gaussian_mixture_stream, k_folds,
                     load_dataset, normalize, order_stream, parse_libsvm, read_libsvm)
from .learner import Model, RunConfig, Trajectory, fpogd_step, grid_search, run
from .metrics import auc, batch_comparator, exact_variance, mc_variance, regret
from .rff import FourierMap, MappedExample, rff_count, sample_map
from .strata import ReservoirBuffer, StrataBuffer, max_clusters_bound

__version__ = "0.1.0"
