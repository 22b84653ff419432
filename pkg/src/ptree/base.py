"""Base measures H on a rectangular sample space.

A base measure is a product of one-dimensional marginals, each defined on
the corresponding side of the bounding box.  Only uniform and (rescaled)
beta marginals are supported; both are closed under affine changes of
scale, which keeps likelihood ratios scale free.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import EmptyDomain, ZeroMass


@dataclass(frozen=True)
class Marginal:
    """One coordinate of a product base measure on ``[lo, hi]``."""

    kind: str = "uniform"
    params: tuple = ()
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise EmptyDomain(f"degenerate interval [{self.lo}, {self.hi}]")
        if self.kind not in ("uniform", "beta"):
            raise ValueError(f"unknown marginal kind {self.kind!r}")
        if self.kind == "beta":
            if len(self.params) != 2 or min(self.params) <= 0:
                raise ValueError("beta marginal needs two positive shapes")

    @property
    def width(self):
        return self.hi - self.lo

    def _dist(self):
        a, b = self.params
        return stats.beta(a, b, loc=self.lo, scale=self.width)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.clip((x - self.lo) / self.width, 0.0, 1.0)
        return self._dist().cdf(x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            inside = (x >= self.lo) & (x <= self.hi)
            return np.where(inside, 1.0 / self.width, 0.0)
        return self._dist().pdf(x)

    def to_dict(self):
        return {"kind": self.kind, "params": list(self.params),
                "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], tuple(d["params"]), d["lo"], d["hi"])


@dataclass(frozen=True)
class BaseMeasure:
    """Product base measure H with density h on the box spanned by its marginals."""

    marginals: tuple = field(default_factory=lambda: (Marginal(),))

    @classmethod
    def uniform(cls, lower: Sequence[float], upper: Sequence[float]):
        return cls(tuple(Marginal("uniform", (), float(a), float(b))
                         for a, b in zip(lower, upper)))

    @property
    def kind(self):
        if all(m.kind == "uniform" for m in self.marginals):
            return "Uniform"
        return "ProductOfMarginals"

    @property
    def dim(self):
        return len(self.marginals)

    @property
    def lower(self):
        return np.array([m.lo for m in self.marginals])

    @property
    def upper(self):
        return np.array([m.hi for m in self.marginals])

    def density(self, points):
        """Evaluate h at an ``(m, d)`` array of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(points.shape[0])
        for j, m in enumerate(self.marginals):
            out = out * m.pdf(points[:, j])
        return out

    def conditional_mass(self, j, lo, hi, cut):
        """H(A_{j,l} | A) for a cut at ``cut`` of the interval ``[lo, hi]`` on axis j.

        Vectorised over array arguments.  Masses of the other coordinates
        cancel in the ratio, so only the j-th marginal is consulted.
        """
        m = self.marginals[j]
        g_lo, g_hi, g_cut = m.cdf(lo), m.cdf(hi), m.cdf(cut)
        total = g_hi - g_lo
        if np.any(total <= 0):
            raise ZeroMass(f"base measure puts no mass on a node along axis {j}")
        return (g_cut - g_lo) / total

    def to_dict(self):
        return {"marginals": [m.to_dict() for m in self.marginals]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(Marginal.from_dict(m) for m in d["marginals"]))
