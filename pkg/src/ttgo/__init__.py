"""Tensor-train global optimization: fit, condition, sample and refine."""

from .cross import CrossOptions, CrossReport, matrix_cross, maxvol, tt_cross
from .errors import (ChecksumError, EmptyConditionError, HeaderError, InvalidGridError, InvalidValueError,
                     MalformedModelError, ModelFormatError, PivotError, PoisonedEvaluationError, RankChainError,
                     SizeError, TTGOError, UnsupportedVersionError)
from .grid import Domain, Grid, TaskSplit, grid_point, locate, make_uniform_grid
from .optimize import RefineOptions, refine
from .persist import load_model, save_model
from .pipeline import Problem, SolveResult, TTGOModel, cost_to_pdf, evaluate_run, solve, train
from .sampler import SampleBatch, build_sampler, sample, top_k_deterministic
from .tt import TTCores, random_tt, tt_condition, tt_eval_continuous, tt_eval_index, tt_from_dense, tt_num_params

__version__ = "0.1.0"
