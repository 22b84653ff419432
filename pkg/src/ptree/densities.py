"""Reference densities on the unit interval and unit square.

Each scenario exposes an exact pdf and an exact seeded sampler.  Truncated
normals are normalised with the normal cdf; bivariate normals have diagonal
covariance, so their truncation to the unit square factorises per axis.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from scipy import special, stats

from .errors import DomainError, UnknownScenario
from .rng import stream


def _gbeta_check(params):
    params = tuple(float(v) for v in params)
    if len(params) != 6 or min(params) <= 0:
        raise ValueError("generalized beta needs six positive parameters")
    return params


def log_generalized_beta(params, x, y):
    """Log density of the bivariate generalized beta.

    ``params = (a0, b0, a1, b1, a2, b2)``; the density is that of
    ``(G1 / (G1 + G0), G2 / (G2 + G0))`` for independent
    ``G_i ~ Gamma(a_i, rate=b_i)``.
    """
    a0, b0, a1, b1, a2, b2 = _gbeta_check(params)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x <= 0) | (x >= 1) | (y <= 0) | (y >= 1)):
        raise DomainError("generalized beta density is defined on the open unit square")
    l1, l2 = b1 / b0, b2 / b0
    log_b = special.gammaln(a0) + special.gammaln(a1) + special.gammaln(a2) \
        - special.gammaln(a0 + a1 + a2)
    u = x / (1.0 - x)
    v = y / (1.0 - y)
    return (a1 * np.log(l1) + (a1 - 1.0) * np.log(x) - (a1 + 1.0) * np.log1p(-x)
            + a2 * np.log(l2) + (a2 - 1.0) * np.log(y) - (a2 + 1.0) * np.log1p(-y)
            - log_b - (a0 + a1 + a2) * np.log1p(l1 * u + l2 * v))


def eval_generalized_beta(params, x, y):
    """Generalized beta density at ``(x, y)``; raises DomainError on the boundary."""
    out = np.exp(log_generalized_beta(params, x, y))
    return float(out) if out.ndim == 0 else out


def sample_generalized_beta(params, n, seed):
    """``(n, 2)`` draws via the three-gamma construction."""
    a0, b0, a1, b1, a2, b2 = _gbeta_check(params)
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    g0 = rng.gamma(a0, 1.0 / b0, size=n)
    g1 = rng.gamma(a1, 1.0 / b1, size=n)
    g2 = rng.gamma(a2, 1.0 / b2, size=n)
    return np.column_stack([g1 / (g1 + g0), g2 / (g2 + g0)])


@dataclass(frozen=True)
class Component:
    """One mixture component: a pdf on ``(m, d)`` points and a sampler."""

    pdf: Callable
    sample: Callable
    label: str = ""


def _beta1(a, b):
    dist = stats.beta(a, b)
    return Component(lambda p: dist.pdf(p[:, 0]),
                     lambda rng, n: dist.rvs(size=n, random_state=rng)[:, None],
                     f"Beta({a:g},{b:g})")


def _uniform(d):
    return Component(lambda p: np.all((p >= 0) & (p <= 1), axis=1).astype(float),
                     lambda rng, n: rng.random((n, d)), "Uniform")


@dataclass(frozen=True)
class TruncNormal:
    """Normal(mu, sd^2) truncated to [a, b], normalised through the normal cdf."""

    mu: float
    sd: float
    a: float
    b: float

    @property
    def log_z(self):
        lo, hi = (self.a - self.mu) / self.sd, (self.b - self.mu) / self.sd
        return float(np.log(special.ndtr(hi) - special.ndtr(lo)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mu) / self.sd
        dens = np.exp(-0.5 * z * z - self.log_z) / (self.sd * np.sqrt(2.0 * np.pi))
        return np.where((x >= self.a) & (x <= self.b), dens, 0.0)

    def rvs(self, size, random_state):
        lo = special.ndtr((self.a - self.mu) / self.sd)
        hi = special.ndtr((self.b - self.mu) / self.sd)
        u = random_state.random(size)
        x = self.mu + self.sd * special.ndtri(lo + u * (hi - lo))
        return np.clip(x, self.a, self.b)


def truncnorm_1d(mu, sd, a, b):
    return TruncNormal(float(mu), float(sd), float(a), float(b))


def _truncnorm(mus, sds, a=0.0, b=1.0):
    dists = [truncnorm_1d(m, s, a, b) for m, s in zip(mus, sds)]

    def pdf(p):
        out = np.ones(p.shape[0])
        for j, dist in enumerate(dists):
            out *= dist.pdf(p[:, j])
        return out

    def sample(rng, n):
        return np.column_stack([dist.rvs(size=n, random_state=rng) for dist in dists])

    return Component(pdf, sample, f"TN({list(mus)})")


def _gbeta(params):
    params = _gbeta_check(params)

    def pdf(p):
        inside = np.all((p > 0) & (p < 1), axis=1)
        out = np.zeros(p.shape[0])
        out[inside] = eval_generalized_beta(params, p[inside, 0], p[inside, 1])
        return out

    return Component(pdf, lambda rng, n: sample_generalized_beta(params, n, rng),
                     "GBeta" + str(params))


@dataclass(frozen=True)
class ScenarioDensity:
    """A named reference density on the unit cube of dimension 1 or 2."""

    name: str
    dimension: int
    weights: Tuple[float, ...]
    components: Tuple[Component, ...]
    params: Dict = None

    def pdf(self, points):
        p = np.asarray(points, dtype=float)
        if p.ndim == 1:
            p = p.reshape(-1, 1) if self.dimension == 1 else p.reshape(1, -1)
        out = np.zeros(p.shape[0])
        for w, comp in zip(self.weights, self.components):
            out += w * comp.pdf(p)
        return out

    def sample(self, n, seed):
        """``(n, d)`` draws; component labels first, then each component's draws."""
        rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
        if len(self.components) == 1:
            return np.asarray(self.components[0].sample(rng, n), dtype=float).reshape(n, -1)
        z = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        out = np.empty((n, self.dimension))
        for k, comp in enumerate(self.components):
            sel = z == k
            m = int(sel.sum())
            if m:
                out[sel] = np.asarray(comp.sample(rng, m), dtype=float).reshape(m, -1)
        return out

    @property
    def lower(self):
        return np.zeros(self.dimension)

    @property
    def upper(self):
        return np.ones(self.dimension)


GBETA_PARAMS = {
    "gbeta1": (50, 1, 100, 1, 150, 1),
    "gbeta2": (12, 1, 25, 1, 35, 1),
    "gbeta3": (3, 1, 6, 1, 9, 1),
    "gbeta4": (5, 10, 3, 10, 3, 10),
}

MIX2D_NORMALS = {
    "mu_a": (0.2, 0.5), "var_a": (0.01, 0.03),
    "mu_b": (0.4, 0.3), "var_b": (0.02, 0.02),
}

# The GBeta weight is not stated; 0.2 is the only value that normalises the mixture.
MIX2D_WEIGHTS = (0.4, 0.4, 0.2)
MIX1D_WEIGHTS = (0.1, 0.2, 0.2, 0.3, 0.2)


def _mix2d(name, gparams):
    m = MIX2D_NORMALS
    comps = (_truncnorm(m["mu_a"], np.sqrt(m["var_a"])),
             _truncnorm(m["mu_b"], np.sqrt(m["var_b"])),
             _gbeta(gparams))
    return ScenarioDensity(name, 2, MIX2D_WEIGHTS, comps,
                           {"normals": m, "gbeta": gparams})


def _build(name):
    if name == "beta6_4":
        return ScenarioDensity(name, 1, (1.0,), (_beta1(6, 4),), {"a": 6, "b": 4})
    if name == "beta500_20":
        return ScenarioDensity(name, 1, (1.0,), (_beta1(500, 20),), {"a": 500, "b": 20})
    if name == "mix1d":
        comps = (_uniform(1), _beta1(2, 5), _beta1(1200, 800),
                 _truncnorm([0.5], [0.1], 0.1, 0.9),
                 _truncnorm([0.7], [0.05], 0.3, 0.87))
        return ScenarioDensity(name, 1, MIX1D_WEIGHTS, comps)
    if name in GBETA_PARAMS:
        return ScenarioDensity(name, 2, (1.0,), (_gbeta(GBETA_PARAMS[name]),),
                               {"gbeta": GBETA_PARAMS[name]})
    if name == "mix2d_1":
        return _mix2d(name, (200, 1, 150, 1, 150, 1))
    if name == "mix2d_2":
        return _mix2d(name, (100, 1, 250, 1, 250, 1))
    raise UnknownScenario(name)


SCENARIOS: Sequence[str] = ("beta6_4", "beta500_20", "mix1d", "gbeta1", "gbeta2", "gbeta3",
                            "gbeta4", "mix2d_1", "mix2d_2")

_CACHE = {}


def scenario(name) -> ScenarioDensity:
    """Registered reference density by name; raises UnknownScenario otherwise."""
    if name not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    if name not in _CACHE:
        _CACHE[name] = _build(name)
    return _CACHE[name]


def list_scenarios():
    return [(n, scenario(n).dimension) for n in SCENARIOS]
