"""Sampling densities adapted to a spectral kernel model, with exact samplers.

Densities are expressed w.r.t. the uniform base measure of the model's 1-d
domain and written as flat mixtures whose components are the normalized
squared basis functions |eta_j|^2 (plus a uniform component for the diagonal
atom).  Supported kinds:

  plain             constant 1 (sample from the base measure itself)
  spectral-mix      1/2 * [mean of |eta_j|^2, j < m]
                    + 1/2 * [(K(x,x) - sum_{j<m} lambda_j |eta_j|^2) / remaining trace]
  spectral-mix-atom equal thirds: spectral part, eigenvalue tail part, atom part
                    (terms with zero mass are dropped and weights renormalized)
  kernel-diag       K(x, x) / trace

Sampling is exact mixture sampling with a fixed RNG consumption order so that
identical (seed, stream) pairs reproduce identical nodes bit for bit.  The
rare draws whose tail index falls beyond the cached cumulative table are
resolved by binary search on the closed-form eigenvalue tail, so slow decay
does not bias the sampler.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDensityError, DomainError
from .kernels import TWO_PI, GeometricDecay, SobolevDecay, grid_maximum

_TAIL_TABLE_CAP = 1 << 16


@dataclass
class NodeSet:
    """Random nodes with the density values at the nodes."""

    x: np.ndarray
    density_values: np.ndarray
    kind: str
    n: int
    seed: int = 0
    stream: int = 0
    component_counts: dict = field(default_factory=dict)

    def save(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "x", "density"])
            for i, (xi, di) in enumerate(zip(self.x, self.density_values)):
                w.writerow([i, repr(float(xi)), repr(float(di))])

    @classmethod
    def load(cls, path, kind="loaded"):
        xs, ds = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            next(r)
            for row in r:
                xs.append(float(row[1]))
                ds.append(float(row[2]))
        x = np.asarray(xs)
        return cls(x=x, density_values=np.asarray(ds), kind=kind, n=x.size)


class SamplingDensity:
    """A node-drawing density tied to a model (and a mode count for the
    m-adapted kinds)."""

    KINDS = ("plain", "spectral-mix", "spectral-mix-atom", "kernel-diag")

    def __init__(self, model, kind, m=None):
        if kind not in self.KINDS:
            raise ValueError("unknown density kind %r" % (kind,))
        self.model = model
        self.kind = kind
        self.m = None if m is None else int(m)
        self._tail_table = None
        if kind in ("spectral-mix", "spectral-mix-atom"):
            if self.m is None or self.m < 2:
                raise ValueError("%s needs m >= 2" % kind)
            if model.rank is not None and self.m - 1 > model.rank:
                raise DegenerateDensityError(
                    "density requests %d modes but the kernel has rank %d"
                    % (self.m - 1, model.rank))
        if kind == "kernel-diag" and model.trace <= 0.0:
            raise DegenerateDensityError("kernel-diag needs positive trace")
        self._weights = self._term_weights()

    # -- mixture structure ---------------------------------------------------

    def _tail_mass(self):
        return self.model.tail_sum(self.m) if self.m is not None else 0.0

    def _term_weights(self):
        """Mixture term -> weight.  Zero-mass terms are dropped."""
        atom = self.model.atom_mass
        if self.kind == "plain":
            return {"plain": 1.0}
        if self.kind == "kernel-diag":
            return {"diag": 1.0}
        if self.kind == "spectral-mix":
            # second term bundles the remaining trace: eigen tail plus atom
            rest = self._tail_mass() + atom
            if rest <= 0.0:
                return {"spectral": 1.0}
            return {"spectral": 0.5, "rest": 0.5}
        # spectral-mix-atom
        terms = ["spectral"]
        if self._tail_mass() > 0.0:
            terms.append("tail")
        if atom > 0.0:
            terms.append("atom")
        w = 1.0 / len(terms)
        return {t: w for t in terms}

    def mixture_weights(self):
        return dict(self._weights)

    def component_values(self, x):
        """Each mixture term's own probability density at x (integrates to 1)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        model = self.model
        out = {}
        for term in self._weights:
            if term == "plain" or term == "atom":
                out[term] = np.ones(x.shape)
            elif term == "spectral":
                out[term] = model.basis.spectral_sum_at(self.m, x) / (self.m - 1)
            elif term == "tail":
                v, _ = model.tail_energy_at(self.m, x)
                out[term] = v / self._tail_mass()
            elif term == "rest":
                v, _ = model.tail_energy_at(self.m, x)
                out[term] = (v + model.atom_mass) / (self._tail_mass()
                                                     + model.atom_mass)
            elif term == "diag":
                out[term] = model.diag_value(x) / model.trace
        return out

    def evaluate(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        comps = self.component_values(x)
        total = np.zeros(x.shape)
        for term, w in self._weights.items():
            total += w * comps[term]
        return total

    def evaluate_with_residual(self, x):
        """Density values plus an upper bound on the series truncation error."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = self.evaluate(x)
        res = 0.0
        if self.kind in ("spectral-mix", "spectral-mix-atom", "kernel-diag"):
            m_eff = self.m if self.kind != "kernel-diag" else 1
            _, r = self.model.tail_energy_at(m_eff, x[:1])
            denom = {"spectral-mix": self._tail_mass() + self.model.atom_mass,
                     "spectral-mix-atom": self._tail_mass(),
                     "kernel-diag": self.model.trace}[self.kind]
            if denom > 0.0:
                res = r / denom
        return vals, res

    def sup_inverse(self):
        """Analytic upper bound on sup_x 1/rho(x), used by envelope checks.

        The atom term of the three-part kind is constant 1, so its weight
        bounds the density from below; for the other kinds a grid bound is
        returned (built-in densities are bounded away from zero through the
        constant basis function eta_1).
        """
        w = self._weights
        if self.kind == "plain":
            return 1.0
        if self.kind == "spectral-mix-atom" and "atom" in w:
            return 1.0 / w["atom"]
        val, _ = grid_maximum(lambda x: 1.0 / self.evaluate(x), npts=20001)
        return val

    # -- distribution function ----------------------------------------------

    def _component_cdf(self, freq, x):
        """CDF of the |eta|^2 component with the given frequency."""
        if self.model.basis.name == "fourier" or freq == 0:
            return x.copy()
        return x + np.sin(TWO_PI * freq * x) / (TWO_PI * freq)

    def _osc_cdf_closed(self, m, x):
        """(1/2pi) sum_{j >= m-1} lambda_{j+1} sin(2 pi j x) / j in closed
        form where one is known, else None.  m >= 2 here."""
        rule = self.model.rule
        j0 = m - 1
        theta = TWO_PI * (np.asarray(x, dtype=float) % 1.0)
        if isinstance(rule, SobolevDecay) and rule.s == 1.0:
            # sum_{j>=1} sin(j t)/(j(1+j^2))
            #   = (pi - t)/2 - (pi/2) sinh(pi - t)/sinh(pi) on [0, 2 pi]
            full = (0.5 * (math.pi - theta)
                    - 0.5 * math.pi * np.sinh(math.pi - theta)
                    / math.sinh(math.pi))
        elif isinstance(rule, GeometricDecay):
            q = rule.q
            # sum_{j>=1} q^j sin(j t)/j = arg(1 - q e^{it})^{-1}
            full = rule.scale * np.arctan2(q * np.sin(theta),
                                           1.0 - q * np.cos(theta))
        else:
            return None
        js = np.arange(1, j0)
        if js.size:
            lam = self.model.eigenvalues(js + 1)
            full = full - np.sin(np.outer(theta, js)) @ (lam / js)
        return full / TWO_PI

    def _tail_cdf_series(self, m, x):
        """sum_{k >= m} lambda_k F_k(x) with F_k the component CDF."""
        model = self.model
        tail = model.tail_sum(m)
        if model.basis.name == "fourier" or tail == 0.0:
            return tail * x
        osc = self._osc_cdf_closed(max(m, 2), x)
        if osc is not None:
            return tail * x + osc
        # oscillatory part: sum lambda_k sin(2 pi (k-1) x) / (2 pi (k-1))
        cut = model.rank if model.rank is not None else _TAIL_TABLE_CAP
        # remainder of the CDF series is <= tail(cut+1) / (2 pi cut)
        while (model.rank is None and cut < (1 << 22)
               and model.tail_sum(cut + 1) / (TWO_PI * cut) > 1e-12):
            cut *= 2
        ks = np.arange(max(m, 2), cut + 1)
        lam = model.eigenvalues(ks)
        keep = lam > 0.0
        ks, lam = ks[keep], lam[keep]
        out = tail * x
        freqs = (ks - 1).astype(float)
        coef = lam / (TWO_PI * freqs)
        for lo in range(0, ks.size, 4096):
            blk = slice(lo, lo + 4096)
            out += np.sin(TWO_PI * np.outer(x, freqs[blk])) @ coef[blk]
        return out

    def cdf(self, x):
        """Distribution function of the density on [0, 1]."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        model = self.model
        total = np.zeros(x.shape)
        for term, w in self._weights.items():
            if term in ("plain", "atom"):
                total += w * x
            elif term == "spectral":
                acc = np.zeros(x.shape)
                for j in range(1, self.m):
                    freq = j - 1 if model.basis.name == "cosine" else 0
                    acc += self._component_cdf(freq, x)
                total += w * acc / (self.m - 1)
            elif term == "tail":
                total += w * self._tail_cdf_series(self.m, x) / self._tail_mass()
            elif term == "rest":
                mass = self._tail_mass() + model.atom_mass
                total += w * (model.atom_mass * x
                              + self._tail_cdf_series(self.m, x)) / mass
            elif term == "diag":
                total += w * (model.atom_mass * x
                              + self._tail_cdf_series(1, x)) / model.trace
        return total

    # -- sampling ------------------------------------------------------------

    def _tail_index_table(self, m_start):
        """Cached cumulative tail-eigenvalue table starting at m_start."""
        if self._tail_table is None or self._tail_table[0] != m_start:
            model = self.model
            total = model.tail_sum(m_start)
            cap = model.rank if model.rank is not None else m_start + _TAIL_TABLE_CAP
            ks = np.arange(m_start, cap + 1)
            lam = model.eigenvalues(ks)
            cum = np.cumsum(lam) / total
            self._tail_table = (m_start, ks, cum, total)
        return self._tail_table

    def _deep_tail_index(self, m_start, u, total):
        """Exact inverse CDF for a single deep draw: smallest K with
        tail(m) - tail(K+1) >= u * tail(m)."""
        target = (1.0 - u) * total
        lo = m_start
        hi = m_start + _TAIL_TABLE_CAP
        while self.model.tail_sum(hi + 1) > target:
            lo, hi = hi, hi * 2
            if hi > 1 << 62:
                return lo
        while lo < hi:
            mid = (lo + hi) // 2
            if self.model.tail_sum(mid + 1) <= target:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def _sample_tail_indices(self, rng, count, m_start):
        m0, ks, cum, total = self._tail_index_table(m_start)
        u = rng.random(count)
        pos = np.searchsorted(cum, u, side="left")
        out = np.empty(count, dtype=np.int64)
        inside = pos < ks.size
        out[inside] = ks[pos[inside]]
        for i in np.nonzero(~inside)[0]:
            out[i] = self._deep_tail_index(m_start, float(u[i]), total)
        return out

    def _coordinate_for_indices(self, rng, eigen_idx):
        """Draw x from |eta_k|^2 for each eigen index (vectorized)."""
        count = eigen_idx.size
        u = rng.random(count)
        if self.model.basis.name == "fourier":
            return u
        freqs = (eigen_idx - 1).astype(np.int64)
        return invert_cosine_component_cdf(freqs, u)

    def _sample(self, rng, count):
        model = self.model
        if self.kind == "plain":
            return rng.random(count), {"plain": count}
        terms = list(self._weights.items())
        edges = np.cumsum([w for _, w in terms])
        choice = np.searchsorted(edges, rng.random(count), side="right")
        choice = np.minimum(choice, len(terms) - 1)
        x = np.empty(count)
        tally = {}
        for t_i, (term, _w) in enumerate(terms):
            mask = choice == t_i
            k = int(np.count_nonzero(mask))
            tally[term] = k
            if k == 0:
                continue
            if term in ("plain", "atom"):
                x[mask] = rng.random(k)
            elif term == "spectral":
                idx = rng.integers(1, self.m, size=k)
                x[mask] = self._coordinate_for_indices(rng, idx)
            elif term == "tail":
                idx = self._sample_tail_indices(rng, k, self.m)
                x[mask] = self._coordinate_for_indices(rng, idx)
            elif term == "rest":
                mass = self._tail_mass() + model.atom_mass
                is_atom = rng.random(k) < (model.atom_mass / mass)
                ka = int(np.count_nonzero(is_atom))
                vals = np.empty(k)
                vals[is_atom] = rng.random(ka)
                if k - ka:
                    idx = self._sample_tail_indices(rng, k - ka, self.m)
                    vals[~is_atom] = self._coordinate_for_indices(rng, idx)
                x[mask] = vals
            elif term == "diag":
                is_atom = rng.random(k) < (model.atom_mass / model.trace)
                ka = int(np.count_nonzero(is_atom))
                vals = np.empty(k)
                vals[is_atom] = rng.random(ka)
                if k - ka:
                    idx = self._sample_tail_indices(rng, k - ka, 1)
                    vals[~is_atom] = self._coordinate_for_indices(rng, idx)
                x[mask] = vals
        return x, tally


def invert_cosine_component_cdf(freqs, u, iters=60):
    """Solve F_j(x) = x + sin(2 pi j x)/(2 pi j) = u on [0, 1], vectorized.

    Bisection only: F is monotone with flat points, 60 halvings push the
    bracket width below 1e-18 which is far inside the 1e-12 target.
    Frequency 0 means the uniform component.
    """
    freqs = np.asarray(freqs, dtype=float)
    u = np.asarray(u, dtype=float)
    out = np.empty(u.shape)
    flat = freqs == 0
    out[flat] = u[flat]
    act = ~flat
    if np.any(act):
        j = freqs[act]
        target = u[act]
        lo = np.zeros(target.shape)
        hi = np.ones(target.shape)
        wj = TWO_PI * j
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            val = mid + np.sin(wj * mid) / wj
            high = val > target
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        out[act] = 0.5 * (lo + hi)
    return out


def trial_rng(seed, stream=0):
    """Counter-based per-trial generator: streams never overlap."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def draw_nodes(density, count, seed, stream=0):
    """Draw ``count`` i.i.d. nodes from the density.

    Collisions (probability zero under the continuous densities, but finite
    floats) are resampled; all returned density values are strictly positive.
    """
    count = int(count)
    if count < 1:
        raise ValueError("need at least one node")
    rng = trial_rng(seed, stream)
    x, tally = density._sample(rng, count)
    for _ in range(64):
        order = np.argsort(x, kind="stable")
        dup_sorted = np.zeros(count, dtype=bool)
        dup_sorted[1:] = np.diff(x[order]) == 0.0
        dup = np.zeros(count, dtype=bool)
        dup[order] = dup_sorted
        if not dup.any():
            break
        redraw, _ = density._sample(rng, int(dup.sum()))
        x[dup] = redraw
    else:
        raise RuntimeError("node collisions persisted after resampling")
    vals = density.evaluate(x)
    if np.any(vals <= 0.0):
        raise DegenerateDensityError("drew a node with non-positive density")
    return NodeSet(x=x, density_values=vals, kind=density.kind, n=count,
                   seed=int(seed), stream=int(stream),
                   component_counts=tally)


def nodes_from_points(density, x):
    """Wrap explicitly chosen points (tests, reproductions) as a NodeSet."""
    x = np.asarray(x, dtype=float)
    x = density.model.domain.canonical(x)
    if np.unique(x).size != x.size:
        raise ValueError("points must be distinct")
    vals = density.evaluate(x)
    return NodeSet(x=x, density_values=vals, kind=density.kind, n=x.size)


class NormalizedKernelView:
    """The model seen through a density: K~(x,y) = K(x,y)/sqrt(rho(x) rho(y)).

    The system eta_k / sqrt(rho) is orthonormal w.r.t. the sampling measure
    rho dmu, so the view exposes the same spectral quantities with the
    density folded in.  Used for eigenvalue tail experiments under importance
    sampling and for checking the density-design bounds on grids.
    """

    def __init__(self, model, density):
        self.model = model
        self.density = density

    def spectral_sum(self, m, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (self.model.basis.spectral_sum_at(m, x)
                / self.density.evaluate(x))

    def tail_energy(self, m, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v, res = self.model.tail_energy_at(m, x)
        rho = self.density.evaluate(x)
        return v / rho, res

    def atom_diag(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.model.atom_mass / self.density.evaluate(x)

    def diag(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.model.diag_value(x) / self.density.evaluate(x)

    def kernel(self, x, y):
        k = self.model.eval_kernel(x, y)
        rx = self.density.evaluate(x)[0]
        ry = self.density.evaluate(y)[0]
        return k / math.sqrt(rx * ry)

    def spectral_sum_grid_max(self, m, npts=100001):
        return grid_maximum(lambda x: self.spectral_sum(m, x), npts)

    def tail_energy_grid_max(self, m, npts=100001):
        def f(x):
            v, _ = self.tail_energy(m, x)
            return v
        return grid_maximum(f, npts)
