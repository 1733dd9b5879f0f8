"""Bayesian scalar-on-tensor regression with a low-rank Tucker coefficient.

Library surface: dense tensor algebra (:mod:`btrt.tensor_ops`), seedable
random streams (:mod:`btrt.rng`), the Gibbs sampler and posterior containers
(:mod:`btrt.model`), a scikit-learn style estimator
(:class:`btrt.TuckerRegressor`), a voxelwise GLM baseline (:mod:`btrt.glm`),
post-hoc sparsification and rank search (:mod:`btrt.selection`), simulation
(:mod:`btrt.simulate`), diagnostics (:mod:`btrt.diagnostics`), and file
formats plus the command line (:mod:`btrt.io`, :mod:`btrt.cli`).
"""

from .diagnostics import FitReport, ess, rmse, rmspe_pearson, trace_summary
from .estimator import CollinearityWarning, TuckerRegressor, UnitRankWarning
from .glm import bh_adjust, glm_coefficient_map, residualize, voxelwise_fit
from .model import (
    Dataset,
    DicResult,
    GibbsSampler,
    Hyperparams,
    ModelState,
    PosteriorDraws,
    RunManifest,
    dic,
    posterior_predict,
)
from .rng import RngStream
from .selection import RankSearchTrace, rank_search, sequential_2means
from .simulate import GroundTruth, SimConfig, gen_dataset, gen_regions, simulate
from .tensor_ops import (
    cp_compose,
    inner,
    margin_contract,
    matricize,
    summand_project,
    tucker_compose,
    vectorize,
)

__version__ = "0.1.0"

__all__ = [
    "TuckerRegressor",
    "CollinearityWarning",
    "UnitRankWarning",
    "Dataset",
    "DicResult",
    "GibbsSampler",
    "Hyperparams",
    "ModelState",
    "PosteriorDraws",
    "RunManifest",
    "RngStream",
    "FitReport",
    "GroundTruth",
    "SimConfig",
    "RankSearchTrace",
    "dic",
    "posterior_predict",
    "rank_search",
    "sequential_2means",
    "simulate",
    "gen_dataset",
    "gen_regions",
    "rmse",
    "rmspe_pearson",
    "ess",
    "trace_summary",
    "bh_adjust",
    "glm_coefficient_map",
    "residualize",
    "voxelwise_fit",
    "vectorize",
    "matricize",
    "inner",
    "cp_compose",
    "tucker_compose",
    "summand_project",
    "margin_contract",
]
