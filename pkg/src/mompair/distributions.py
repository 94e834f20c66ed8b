"""Seeded samplers for the test laws, with analytic mean and variance."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import InvalidArgument
from .sampling import as_generator

__all__ = [
    "LawSpec",
    "NORMAL",
    "STUDENT3",
    "LOGNORMAL",
    "PARETO3",
    "PAPER_LAWS",
    "law_by_name",
    "constant_law",
    "draw",
    "Contamination",
    "ContaminatedSample",
    "contaminate",
]


@dataclass(frozen=True)
class LawSpec:
    family: str
    true_mean: float
    true_variance: float
    central_m4: float = math.inf  # E[(X - mean)^4]
    value: float = 0.0  # location of the constant law only

    @property
    def name(self) -> str:
        """Name accepted back by :func:`law_by_name`."""
        return f"constant({self.value!r})" if self.family == "constant" else self.family

    def variance_kernel_components(self):
        """(sigma1^2, sigma2^2) of h(x, y) = (x - y)^2 / 2 under this law."""
        return (self.central_m4 - self.true_variance**2) / 4, self.true_variance**2


_LN_VAR = (math.e - 1) * math.e
NORMAL = LawSpec("normal", 0.0, 1.0, 3.0)
STUDENT3 = LawSpec("student3", 0.0, 3.0)
LOGNORMAL = LawSpec(
    "lognormal", math.exp(0.5), _LN_VAR,
    (math.e**4 + 2 * math.e**3 + 3 * math.e**2 - 3) * _LN_VAR**2,
)
# shape 3, scale 1, support [1, inf)
PARETO3 = LawSpec("pareto3", 1.5, 0.75)
PAPER_LAWS = (NORMAL, STUDENT3, LOGNORMAL, PARETO3)


def constant_law(c: float) -> LawSpec:
    """Point mass at ``c``; zero variance, for degenerate checks."""
    return LawSpec("constant", float(c), 0.0, 0.0, float(c))


def law_by_name(name: str) -> LawSpec:
    raw = name.strip().lower()
    if raw.startswith("constant"):
        try:
            return constant_law(float(raw[len("constant"):].strip(" ()_") or 0.0))
        except ValueError as exc:
            raise InvalidArgument(f"bad constant law {name!r}") from exc
    key = "".join(ch for ch in raw if ch not in " -_(),")
    aliases = {
        "normal": NORMAL, "gaussian": NORMAL, "normal01": NORMAL,
        "student3": STUDENT3, "student": STUDENT3, "t3": STUDENT3,
        "lognormal": LOGNORMAL, "lognormal01": LOGNORMAL,
        "pareto3": PARETO3, "pareto": PARETO3,
    }
    if key not in aliases:
        raise InvalidArgument(f"unknown law {name!r}")
    return aliases[key]


def draw(law: LawSpec, n: int, rng=None) -> np.ndarray:
    """``n`` i.i.d. draws from ``law``."""
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    rng = as_generator(rng)
    fam = law.family
    if fam == "normal":
        return rng.standard_normal(n)
    if fam == "student3":
        # ratio construction: Z / sqrt(chi2_3 / 3)
        z = rng.standard_normal(n)
        chi2 = rng.chisquare(3, n)
        return z / np.sqrt(chi2 / 3)
    if fam == "lognormal":
        return np.exp(rng.standard_normal(n))
    if fam == "pareto3":
        # inverse cdf of the classical Pareto with x_m = 1: U^(-1/3)
        return (1.0 - rng.random(n)) ** (-1.0 / 3.0)
    if fam == "constant":
        return np.full(n, law.value)
    raise InvalidArgument(f"unknown law family {fam!r}")


@dataclass(frozen=True)
class Contamination:
    fraction: float
    outlier: Union[LawSpec, float]


class ContaminatedSample(NamedTuple):
    sample: np.ndarray
    replaced_indices: np.ndarray


def contaminate(sample, c: Contamination, rng=None) -> ContaminatedSample:
    """Replace ``floor(fraction * n)`` uniformly chosen entries by outliers."""
    if not 0 <= c.fraction < 0.5:
        raise InvalidArgument(f"contamination fraction must lie in [0, 1/2), got {c.fraction}")
    rng = as_generator(rng)
    x = np.array(sample, dtype=float, copy=True)
    n = x.shape[0]
    m = int(math.floor(c.fraction * n))
    idx = np.sort(rng.choice(n, size=m, replace=False)) if m else np.empty(0, dtype=np.int64)
    if m:
        if isinstance(c.outlier, LawSpec):
            x[idx] = draw(c.outlier, m, rng)
        else:
            x[idx] = float(c.outlier)
    return ContaminatedSample(x, idx)
