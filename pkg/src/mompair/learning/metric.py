"""Mahalanobis metric learning by median-of-randomized-U gradient descent."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..errors import InsufficientData, InvalidArgument
from ..mean_estimators import lower_median
from ..sampling import as_generator, swor_blocks

__all__ = [
    "MahalanobisModel",
    "PairLabelDataset",
    "NonFiniteGradient",
    "TraceRow",
    "GDResult",
    "project_psd",
    "pairwise_loss",
    "pairwise_loss_gradient",
    "block_risk_and_gradient",
    "full_risk",
    "moru_minibatch_gd",
    "count_spikes",
    "write_trace",
    "load_points_csv",
    "load_pair_labels_csv",
    "make_two_cluster_data",
    "contamination_demo",
]

SIMILAR, DISSIMILAR, UNKNOWN = 1, 0, -1


class NonFiniteGradient(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite gradient at step {step}")
        self.step = step


def project_psd(M) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm: symmetrize, clip eigenvalues at 0."""
    S = (np.asarray(M, dtype=float) + np.asarray(M, dtype=float).T) / 2
    w, V = np.linalg.eigh(S)
    P = (V * np.maximum(w, 0.0)) @ V.T
    return (P + P.T) / 2


@dataclass(frozen=True)
class MahalanobisModel:
    """d(x, y)^2 = (x - y)^T M (x - y)."""

    M: np.ndarray
    margin: float = 1.0
    step_size: float = 0.1

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidArgument("M must be a square matrix")
        if not np.allclose(M, M.T, atol=1e-12, rtol=0):
            raise InvalidArgument("M must be symmetric")
        if np.linalg.eigvalsh(M).min() < -1e-10:
            raise InvalidArgument("M must be positive semidefinite")
        if not self.margin > 0 or not self.step_size > 0:
            raise InvalidArgument("margin and step_size must be positive")
        object.__setattr__(self, "M", M)

    @classmethod
    def identity(cls, d: int, **kw) -> "MahalanobisModel":
        return cls(np.eye(d), **kw)

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    def distance_sq(self, x, y):
        D = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return np.einsum("...i,ij,...j->...", D, self.M, D)


@dataclass(frozen=True)
class PairLabelDataset:
    """Points with similarity labels.

    Labels are implicit (``classes``: same class means similar) or explicit
    (``pairs`` rows ``(i, j, label)``; unlisted pairs are unknown and carry
    no loss).
    """

    points: np.ndarray
    classes: Optional[np.ndarray] = None
    pairs: Optional[np.ndarray] = None
    _labels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        X = np.asarray(self.points, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or not np.all(np.isfinite(X)):
            raise InvalidArgument("points must be a finite (n, d) array")
        n = X.shape[0]
        if (self.classes is None) == (self.pairs is None):
            raise InvalidArgument("give exactly one of classes or pairs")
        if self.classes is not None:
            c = np.asarray(self.classes)
            if c.shape != (n,):
                raise InvalidArgument("one class per point")
            L = (c[:, None] == c[None, :]).astype(np.int8)
        else:
            P = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 3)
            if P.size and (P[:, :2].min() < 0 or P[:, :2].max() >= n):
                raise InvalidArgument("pair index out of range")
            if P.size and not np.isin(P[:, 2], (0, 1)).all():
                raise InvalidArgument("pair labels must be 0 or 1")
            L = np.full((n, n), UNKNOWN, dtype=np.int8)
            for i, j, lab in P:
                if L[i, j] != UNKNOWN and L[i, j] != lab:
                    raise InvalidArgument(f"conflicting labels for pair ({i}, {j})")
                L[i, j] = L[j, i] = lab
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "_labels", L)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def label(self, i: int, j: int) -> int:
        return int(self._labels[i, j])

    def subset(self, idx) -> "PairLabelDataset":
        idx = np.asarray(idx)
        if self.classes is not None:
            return PairLabelDataset(self.points[idx], classes=np.asarray(self.classes)[idx])
        L = self._labels[np.ix_(idx, idx)]
        I, J = np.triu_indices(len(idx), 1)
        keep = L[I, J] != UNKNOWN
        return PairLabelDataset(self.points[idx], pairs=np.c_[I[keep], J[keep], L[I, J][keep]])


def _check_label(label) -> bool:
    if label in (SIMILAR, True):
        return True
    if label in (DISSIMILAR, False):
        return False
    raise InvalidArgument(f"label must be 0/1, got {label!r}")


def pairwise_loss(model: MahalanobisModel, x, y, label) -> float:
    """Contrastive loss: d^2 for similar pairs, max(0, margin - d^2) otherwise."""
    d2 = float(model.distance_sq(x, y))
    return d2 if _check_label(label) else max(0.0, model.margin - d2)


def pairwise_loss_gradient(model: MahalanobisModel, x, y, label) -> np.ndarray:
    D = np.atleast_1d(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    outer = np.outer(D, D)
    if _check_label(label):
        return outer
    if model.margin - float(D @ model.M @ D) > 0:
        return -outer
    return np.zeros_like(outer)


def _pair_terms(model, X, L, idx):
    I, J = np.triu_indices(len(idx), 1)
    a, b = idx[I], idx[J]
    lab = L[a, b]
    known = lab != UNKNOWN
    a, b, lab = a[known], b[known], lab[known]
    D = X[a] - X[b]
    d2 = np.einsum("pi,ij,pj->p", D, model.M, D)
    sim = lab == SIMILAR
    active = ~sim & (model.margin - d2 > 0)
    loss = np.where(sim, d2, np.where(active, model.margin - d2, 0.0))
    sign = np.where(sim, 1.0, np.where(active, -1.0, 0.0))
    return D, loss, sign


def block_risk_and_gradient(model: MahalanobisModel, data: PairLabelDataset, idx):
    """Mean loss over the labelled pairs inside ``idx`` and its gradient in M."""
    idx = np.asarray(idx)
    D, loss, sign = _pair_terms(model, data.points, data._labels, idx)
    if loss.size == 0:
        return 0.0, np.zeros_like(model.M)
    G = (D * sign[:, None]).T @ D / loss.size
    return float(loss.mean()), (G + G.T) / 2


def full_risk(model: MahalanobisModel, data: PairLabelDataset) -> float:
    """Complete U-statistic of the loss over all labelled pairs."""
    idx = np.arange(data.n)
    total, count = 0.0, 0
    # row chunks keep memory at O(chunk * n)
    step = max(1, 2_000_000 // max(data.n, 1))
    for start in range(0, data.n, step):
        rows = idx[start:start + step]
        I = np.repeat(rows, data.n)
        J = np.tile(idx, len(rows))
        keep = (J > I) & (data._labels[I, J] != UNKNOWN)
        I, J = I[keep], J[keep]
        D = data.points[I] - data.points[J]
        d2 = np.einsum("pi,ij,pj->p", D, model.M, D)
        sim = data._labels[I, J] == SIMILAR
        loss = np.where(sim, d2, np.maximum(0.0, model.margin - d2))
        total += math.fsum(loss)
        count += loss.size
    return total / count if count else 0.0


@dataclass(frozen=True)
class TraceRow:
    step: int
    block_risk: float
    full_risk: float


@dataclass(frozen=True)
class GDResult:
    model: MahalanobisModel
    trace: List[TraceRow]
    initial_risk: float

    @property
    def full_risks(self) -> np.ndarray:
        return np.array([r.full_risk for r in self.trace])


def moru_minibatch_gd(
    data: PairLabelDataset,
    model: MahalanobisModel,
    K: int,
    B: int,
    steps: int,
    rng=None,
) -> GDResult:
    """Gradient descent on the median-risk block among ``K`` fresh SWoR blocks.

    Each step: draw ``K`` blocks of size ``B`` without replacement, evaluate
    every block's pairwise risk, step along the gradient of the block at the
    lower median of those risks, then project ``M`` back onto the PSD cone.
    ``K = 1`` is plain mini-batch gradient descent.
    """
    if int(B) != B or B < 2:
        raise InsufficientData(f"blocks need B >= 2, got {B}")
    if int(steps) != steps or steps < 1:
        raise InvalidArgument(f"steps must be >= 1, got {steps}")
    if data.n < B:
        raise InsufficientData(f"n={data.n} < B={B}")
    if model.dim != data.points.shape[1]:
        raise InvalidArgument(f"model dimension {model.dim} != data dimension {data.points.shape[1]}")
    rng = as_generator(rng)
    initial = full_risk(model, data)
    trace = []
    for step in range(1, int(steps) + 1):
        blocks = swor_blocks(data.n, K, B, rng).blocks
        # overflow is reported below as NonFiniteGradient, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            results = [block_risk_and_gradient(model, data, b) for b in blocks]
        risks = np.array([r for r, _ in results])
        k = int(np.flatnonzero(risks == lower_median(risks))[0])
        risk, grad = results[k]
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(step)
        M = project_psd(model.M - model.step_size * grad)
        model = replace(model, M=M)
        trace.append(TraceRow(step, risk, full_risk(model, data)))
    return GDResult(model, trace, initial)


def count_spikes(trace, window: int = 20, factor: float = 3.0) -> int:
    """Steps whose value exceeds ``factor`` times the median of the previous ``window``."""
    v = np.asarray(trace, dtype=float)
    return sum(int(v[t] > factor * np.median(v[t - window:t])) for t in range(window, v.size))


def write_trace(result: GDResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "block_risk", "full_risk"))
        w.writerow((0, "", format(result.initial_risk, ".17g")))
        for r in result.trace:
            w.writerow((r.step, format(r.block_risk, ".17g"), format(r.full_risk, ".17g")))


def load_points_csv(path) -> np.ndarray:
    """One point per row, comma separated; a non-numeric first row is a header."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if lineno == 1:
                    continue
                raise InvalidArgument(f"{path}:{lineno}: non-numeric entry")
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidArgument(f"{path}: need at least one row and a constant column count")
    return np.array(rows)


def load_pair_labels_csv(path) -> np.ndarray:
    """Rows ``i, j, label`` with 0-based indices and label in {0, 1}."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                i, j, lab = (int(c) for c in row)
            except ValueError:
                if lineno == 1:
                    continue
                raise InvalidArgument(f"{path}:{lineno}: expected 'i,j,label'")
            rows.append((i, j, lab))
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def make_two_cluster_data(n: int = 200, contamination: float = 0.0, outlier_scale: float = 10.0,
                          rng=None) -> PairLabelDataset:
    """Two classes separated along axis 0 (noise sd 0.1); axis 1 is pure N(0, 1) noise.

    A ``contamination`` fraction of points is replaced by N(0, outlier_scale^2 I)
    features while keeping its class label.
    """
    rng = as_generator(rng)
    y = np.arange(n) % 2
    X = np.c_[np.where(y == 1, 1.0, -1.0) + 0.1 * rng.standard_normal(n), rng.standard_normal(n)]
    m = int(math.floor(contamination * n))
    if m:
        idx = rng.choice(n, m, replace=False)
        X[idx] = outlier_scale * rng.standard_normal((m, 2))
    return PairLabelDataset(X, classes=y)


def contamination_demo(seed: int, K: int, contamination: float = 0.05, B: int = 2, steps: int = 500,
                       n: int = 200, outlier_scale: float = 10.0, step_size: float = 0.1,
                       margin: float = 1.0) -> GDResult:
    """Seeded two-cluster run: data from stream ``(seed, 0)``, blocks from ``(seed, 1)``.

    The same ``seed`` gives the same clean points whatever ``contamination``
    is, so clean and contaminated runs are directly comparable.
    """
    from ..sampling import derive_generator

    data = make_two_cluster_data(n, contamination, outlier_scale, rng=derive_generator(seed, 0))
    model = MahalanobisModel.identity(2, margin=margin, step_size=step_size)
    return moru_minibatch_gd(data, model, K, B, steps, derive_generator(seed, 1))
