"""Median-based robust estimators of means and pairwise means.

The estimators take a sample (and a kernel for pairwise targets), split it
into blocks, average inside each block and return the lower median of the
block averages.  Planners in :mod:`mompair.bounds` choose the number and
size of blocks from a confidence level.
"""
from .bounds import (
    EstimatorPlan,
    plan_mom,
    plan_mom_split_pairs,
    plan_moiu,
    plan_morm,
    plan_mogu,
    plan_morgu,
    plan_mou,
    plan_moru,
    run_plan,
)
from .distributions import LOGNORMAL, NORMAL, PARETO3, STUDENT3, LawSpec, draw, law_by_name
from .errors import ComplexityCap, InsufficientData, InvalidArgument, OutOfRange
from .kernels import Kernel, complete_ustat, estimate_components, variance_kernel
from .mean_estimators import median, mom, morm
from .ustat_estimators import MultiSampleSpec, moiu, mogu, mom_on_split_pairs, mou, moru

__version__ = "0.1.0"
