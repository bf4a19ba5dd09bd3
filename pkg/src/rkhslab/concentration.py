"""Monte Carlo checks of spectral-norm concentration for random rank-one sums.

Families of bounded random vectors with known expectation operator feed a
deviation statistic ||(1/n) sum y y* - Lambda||.  The validation is
one-sided: empirical tail rates must stay under the theoretical envelopes
(plus Monte Carlo slack); nothing asserts sharpness.  All deviations are
computed on the truncated coordinate block, which is itself a family the
tail bound applies to, so no truncation residual enters the comparison.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .densities import draw_nodes, trial_rng
from .leastsq import assemble_design

# 99% two-sided normal quantile for Wilson intervals
WILSON_Z = 2.5758293035489004

_NORM_SLACK = 1.0 + 1e-12


class KernelVectorFamily:
    """y = (sigma_k eta_k(x))_{k<=dim} with x drawn from the base measure."""

    def __init__(self, model, dim):
        self.model = model
        self.dim = int(dim)
        self.sig = model.singular_values(np.arange(1, self.dim + 1))
        self.lambda_diag = self.sig ** 2
        self.lambda_op = float(self.lambda_diag.max()) if dim else 0.0
        # partial sups of the weighted sums are attained at the same point
        # as the full ones for both built-in bases, so the truncated sup is
        # an exact difference of tail functions
        m_sq = model.tail_function(1) - model.tail_function(self.dim + 1)
        self.m_bound = math.sqrt(m_sq)

    def describe(self):
        return {"kind": "kernel", "basis": self.model.basis.name,
                "dim": self.dim}

    def sample(self, rng, count):
        x = rng.random(count)
        block = self.model.basis.eval_block(np.arange(1, self.dim + 1), x)
        return block * self.sig[None, :]

    def expectation(self):
        return np.diag(self.lambda_diag.astype(float))


class SphereVectorFamily:
    """Uniform on the sphere of radius M in R^dim; Lambda = (M^2/dim) I."""

    def __init__(self, dim, radius=1.0):
        self.dim = int(dim)
        self.m_bound = float(radius)
        self.lambda_op = radius ** 2 / dim

    def describe(self):
        return {"kind": "sphere", "dim": self.dim, "radius": self.m_bound}

    def sample(self, rng, count):
        v = rng.standard_normal((count, self.dim))
        v /= np.linalg.norm(v, axis=1)[:, None]
        return v * self.m_bound

    def expectation(self):
        return np.eye(self.dim) * (self.m_bound ** 2 / self.dim)


class TwoPointVectorFamily:
    """a e_1 with probability p, else b e_2; everything is closed form."""

    def __init__(self, a=1.0, b=1.0, p=0.5, m_bound=None):
        self.a, self.b, self.p = float(a), float(b), float(p)
        self.dim = 2
        true_m = max(abs(a), abs(b))
        # an understated m_bound is allowed on purpose: the negative-control
        # tests need a family whose declared bound is wrong
        self.m_bound = true_m if m_bound is None else float(m_bound)
        self.lambda_op = max(p * a * a, (1 - p) * b * b)

    def describe(self):
        return {"kind": "two-point", "a": self.a, "b": self.b, "p": self.p}

    def sample(self, rng, count):
        pick = rng.random(count) < self.p
        out = np.zeros((count, 2))
        out[pick, 0] = self.a
        out[~pick, 1] = self.b
        return out

    def expectation(self):
        return np.diag([self.p * self.a ** 2, (1 - self.p) * self.b ** 2])


def deviation_trial(family, n, rng):
    """One realization of ||(1/n) sum y y* - Lambda||.

    A sampled vector exceeding the family's stated norm bound is a
    generation bug and raises immediately.
    """
    Y = family.sample(rng, int(n))
    norms_sq = np.einsum("ij,ij->i", Y.conj(), Y).real
    if np.any(norms_sq > (family.m_bound ** 2) * _NORM_SLACK ** 2):
        raise ValueError(
            "sampled vector norm %.6g exceeds the stated bound %.6g"
            % (math.sqrt(float(norms_sq.max())), family.m_bound))
    E = Y.conj().T @ Y / n - family.expectation()
    E = 0.5 * (E + E.conj().T)
    eigs = np.linalg.eigvalsh(E)
    return float(max(abs(eigs[0]), abs(eigs[-1])))


def tail_envelope(n, t, m_bound):
    """min(1, 2^(3/4) n exp(-t^2 n / (21 M^2)))."""
    val = 2.0 ** 0.75 * n * math.exp(-t * t * n / (21.0 * m_bound ** 2))
    return min(1.0, val)


def deviation_threshold(n, r, m_bound, lambda_op):
    """The all-in-one deviation level exceeded with prob <= 2^(3/4) n^(1-r)."""
    kappa_sq = ((1.0 + math.sqrt(5.0)) / 2.0) ** 2
    return max(8.0 * r * math.log(n) / n * m_bound ** 2 * kappa_sq,
               lambda_op)


def default_t_grid(family, n, points=10):
    """Levels in (0, 1] where the tail envelope is informative (< 1).

    Empty when even t = 1 leaves the envelope at 1; callers report such a
    configuration as vacuous instead of asserting anything.
    """
    m_sq = family.m_bound ** 2
    thr_sq = 21.0 * m_sq * math.log(2.0 ** 0.75 * n) / n
    t_min = math.sqrt(thr_sq) if thr_sq > 0 else 0.0
    if t_min >= 1.0:
        return np.empty(0)
    return np.linspace(t_min, 1.0, points + 1)[1:]


def wilson_interval(successes, total, z=WILSON_Z):
    if total <= 0:
        raise ValueError("need at least one observation")
    phat = successes / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total
                         + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def binom_se(phat, total):
    return math.sqrt(max(phat * (1.0 - phat), 0.0) / total)


@dataclass
class TailExperiment:
    family: object
    n: int
    t_grid: np.ndarray
    trials: int
    seed: int

    deviations: np.ndarray = field(default=None, repr=False)

    def run(self):
        devs = np.empty(self.trials)
        for i in range(self.trials):
            devs[i] = deviation_trial(self.family, self.n,
                                      trial_rng(self.seed, i))
        self.deviations = devs
        return devs

    def empirical_tail(self, t):
        if self.deviations is None:
            self.run()
        hits = int(np.count_nonzero(self.deviations >= t))
        rate = hits / self.trials
        return rate, wilson_interval(hits, self.trials)

    def curve(self):
        """Rows (t, rate, wilson_lo, wilson_hi, envelope) over the grid."""
        if self.deviations is None:
            self.run()
        rows = []
        for t in np.atleast_1d(self.t_grid):
            rate, (lo, hi) = self.empirical_tail(float(t))
            rows.append((float(t), rate, lo, hi,
                         tail_envelope(self.n, float(t), self.family.m_bound)))
        return rows


def chernoff_c(t):
    """(1-t)^(1-t) e^t for 0 <= t <= 1."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 1.0:
        return math.e
    return (1.0 - t) ** (1.0 - t) * math.exp(t)


def chernoff_d(t):
    """(1+t)^(1+t) e^(-t) for t >= 0."""
    if t < 0.0:
        raise ValueError("t must be non-negative")
    return (1.0 + t) ** (1.0 + t) * math.exp(-t)


def eig_tail_envelopes(n, m, t, n_eff):
    """Chernoff envelopes for lambda_min < 1-t and lambda_max > 1+t."""
    lo = min(1.0, m * math.exp(-n * math.log(chernoff_c(t)) / n_eff))
    hi = min(1.0, m * math.exp(-n * math.log(chernoff_d(t)) / n_eff))
    return lo, hi


def spectral_budget(model, density_kind, m):
    """A-priori bound on the density-normalized spectral function."""
    if density_kind in (None, "plain"):
        return model.spectral_function(m)
    if density_kind == "spectral-mix":
        return 2.0 * (m - 1)
    if density_kind == "spectral-mix-atom":
        return 3.0 * (m - 1)
    raise ValueError("no spectral-function bound for density %r"
                     % (density_kind,))


def chernoff_eig_tails(model, density, n, m, t_list, trials, seed,
                       n_eff=None):
    """Empirical eigenvalue tail frequencies against the Chernoff envelopes.

    Returns a dict with the sampled extreme eigenvalues and one row per t:
    (t, freq_min, env_min, freq_max, env_max, vacuous flags).
    """
    if n_eff is None:
        n_eff = spectral_budget(model, density.kind, m)
    lmin = np.empty(trials)
    lmax = np.empty(trials)
    for i in range(trials):
        nodes = draw_nodes(density, n, seed, stream=i)
        ds = assemble_design(model, density, nodes, m)
        lmin[i] = ds.lambda_min
        lmax[i] = ds.lambda_max
    rows = []
    for t in t_list:
        t = float(t)
        env_lo, env_hi = eig_tail_envelopes(n, m, t, n_eff)
        f_lo = float(np.mean(lmin < 1.0 - t))
        f_hi = float(np.mean(lmax > 1.0 + t))
        rows.append({
            "t": t,
            "freq_min": f_lo, "envelope_min": env_lo,
            "vacuous_min": env_lo >= 1.0,
            "freq_max": f_hi, "envelope_max": env_hi,
            "vacuous_max": env_hi >= 1.0,
        })
    return {"lambda_min": lmin, "lambda_max": lmax, "n_eff": n_eff,
            "rows": rows}
