"""Kernels defined by an explicit singular system on 1-d reference domains.

A model couples an orthonormal function system (Fourier exponentials on the
torus, or the cosine system on the unit interval, both orthonormal w.r.t. the
uniform probability measure) with a summable non-increasing eigenvalue
sequence lambda_1 >= lambda_2 >= ... > 0, plus an optional diagonal atom of
mass ``atom_mass`` modelling the component of the space that is invisible in
L2.  The kernel is

    K(x, y) = sum_k lambda_k eta_k(x) conj(eta_k(y)) + atom_mass * 1{x == y}

and the spectral quantities driving the bounds are

    N(m) = sup_x sum_{k < m} |eta_k(x)|^2        (partial supremum)
    T(m) = sup_x sum_{k >= m} lambda_k |eta_k(x)|^2   (tail energy supremum)

For the built-in rule/basis combinations these are available in closed form;
every truncated evaluation carries an explicit residual bound and raises when
the model tolerance cannot be met.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import zeta

from .errors import DomainError, TruncationError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Domain:
    """Reference domain carrying the uniform probability measure."""

    kind: str  # "torus-1d" | "unit-interval"

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "torus-1d":
            return np.isfinite(x)
        return (x >= 0.0) & (x <= 1.0)

    def canonical(self, x):
        """Map points to the fundamental domain, rejecting outsiders."""
        x = np.asarray(x, dtype=float)
        if self.kind == "torus-1d":
            return np.mod(x, 1.0)
        if not np.all(self.contains(x)):
            raise DomainError("point outside the unit interval")
        return x


# ---------------------------------------------------------------------------
# eigenvalue rules
# ---------------------------------------------------------------------------


class EigenvalueRule:
    """Non-increasing positive sequence with exact tail sums.

    Indices are 1-based.  ``tail(m)`` returns sum_{k >= m} lambda_k; for the
    built-in rules this is exact (closed form or Euler-Maclaurin with a
    remainder far below float resolution), which is what makes deep
    truncation-residual bookkeeping cheap.
    """

    name = "abstract"
    rank = None  # finite rank, or None for an infinite sequence

    def values(self, k):
        raise NotImplementedError

    def tail(self, m):
        raise NotImplementedError

    def value(self, k):
        return float(self.values(np.asarray([k], dtype=np.int64))[0])

    def total(self):
        return self.tail(1)

    def index_for_tail(self, bound):
        """Smallest N with tail(N+1) <= bound."""
        if self.tail(1) <= bound:
            return 0
        if self.rank is not None:
            lo, hi = 1, self.rank
        else:
            hi = 1
            while self.tail(hi + 1) > bound:
                hi *= 2
                if hi > 2 ** 62:
                    raise TruncationError("tail bound unreachable")
            lo = hi // 2
        while lo < hi:
            mid = (lo + hi) // 2
            if self.tail(mid + 1) <= bound:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def describe(self):
        return {"name": self.name}


class PolynomialDecay(EigenvalueRule):
    """lambda_k = k^(-2s); summable for s > 1/2."""

    name = "poly"

    def __init__(self, s):
        if not s > 0.5:
            raise ValueError("polynomial decay needs s > 1/2 for a finite trace")
        self.s = float(s)

    def values(self, k):
        k = np.asarray(k, dtype=float)
        return k ** (-2.0 * self.s)

    def tail(self, m):
        # Hurwitz zeta gives the exact tail
        return float(zeta(2.0 * self.s, m))

    def describe(self):
        return {"name": self.name, "s": self.s}


class SobolevDecay(EigenvalueRule):
    """lambda_k = (1 + (k-1)^2)^(-s); the constant mode carries weight 1."""

    name = "sobolev"

    def __init__(self, s):
        if not s > 0.5:
            raise ValueError("sobolev decay needs s > 1/2 for a finite trace")
        self.s = float(s)

    def values(self, k):
        j = np.asarray(k, dtype=float) - 1.0
        return (1.0 + j * j) ** (-self.s)

    def tail(self, m):
        return self._freq_tail(int(m) - 1)

    @lru_cache(maxsize=4096)
    def _freq_tail(self, j0):
        """sum_{j >= j0} (1+j^2)^(-s) by partial sum + Euler-Maclaurin."""
        if j0 <= 0:
            return 1.0 + self._freq_tail(1)
        s = self.s
        cut = j0 + 4096
        j = np.arange(j0, cut, dtype=float)
        head = float(np.sum((1.0 + j * j) ** (-s)))
        t = float(cut)
        if s == 1.0:
            integral = math.atan2(1.0, t)  # arctan(1/t), exact
        else:
            integral, _ = quad(lambda u: (1.0 + u * u) ** (-s), t, np.inf,
                               epsabs=1e-15, epsrel=1e-13)
        f_t = (1.0 + t * t) ** (-s)
        fp_t = -2.0 * s * t * (1.0 + t * t) ** (-s - 1.0)
        # remainder of the correction is O(f'''(t)), far below 1e-16 here
        return head + integral + 0.5 * f_t - fp_t / 12.0

    def describe(self):
        return {"name": self.name, "s": self.s}


class GeometricDecay(EigenvalueRule):
    """lambda_k = scale * q^(k-1), 0 < q < 1."""

    name = "geometric"

    def __init__(self, q, scale=1.0):
        if not 0.0 < q < 1.0:
            raise ValueError("geometric ratio must lie in (0, 1)")
        if scale <= 0.0:
            raise ValueError("geometric scale must be positive")
        self.q = float(q)
        self.scale = float(scale)

    def values(self, k):
        k = np.asarray(k, dtype=float)
        return self.scale * self.q ** (k - 1.0)

    def tail(self, m):
        return self.scale * self.q ** (m - 1.0) / (1.0 - self.q)

    def describe(self):
        return {"name": self.name, "q": self.q, "scale": self.scale}


class ExplicitEigenvalues(EigenvalueRule):
    """Finite list of eigenvalues; indices past the rank carry zero mass."""

    name = "explicit"

    def __init__(self, values):
        vals = np.asarray(list(values), dtype=float)
        if vals.size and (np.any(vals <= 0.0) or np.any(np.diff(vals) > 1e-15)):
            raise ValueError("explicit eigenvalues must be positive and non-increasing")
        self._values = vals
        self.rank = int(vals.size)
        self._suffix = np.concatenate([np.cumsum(vals[::-1])[::-1], [0.0]])

    def values(self, k):
        k = np.asarray(k, dtype=np.int64)
        out = np.zeros(k.shape, dtype=float)
        inside = (k >= 1) & (k <= self.rank)
        out[inside] = self._values[k[inside] - 1]
        return out

    def tail(self, m):
        m = int(m)
        if m < 1:
            m = 1
        if m > self.rank:
            return 0.0
        return float(self._suffix[m - 1])

    def describe(self):
        return {"name": self.name, "values": [float(v) for v in self._values]}


# ---------------------------------------------------------------------------
# bases
# ---------------------------------------------------------------------------


def _unit_circle_powers(theta, f_lo, f_hi):
    """Columns exp(i*f*theta) for f = f_lo..f_hi via stepwise rotation.

    One exact anchor exponential plus elementwise rotations; phase drift grows
    like (f_hi - f_lo) * eps which stays far below the tolerances used here.
    """
    theta = np.asarray(theta, dtype=float)
    count = f_hi - f_lo + 1
    out = np.empty((theta.size, count), dtype=complex)
    out[:, 0] = np.exp(1j * f_lo * theta)
    if count > 1:
        step = np.exp(1j * theta)
        for c in range(1, count):
            np.multiply(out[:, c - 1], step, out=out[:, c])
    return out


class FourierBasis:
    """Complex exponentials on the 1-d torus, rank-ordered by |frequency|.

    Index 1 is the constant; even indices carry frequency +k/2, odd indices
    frequency -(k-1)/2.  |eta_k| == 1 everywhere, so partial suprema and tail
    energies collapse to plain eigenvalue sums.
    """

    name = "fourier"
    domain = Domain("torus-1d")
    sup_eta_sq = 1.0

    @staticmethod
    def frequency(k):
        k = np.asarray(k, dtype=np.int64)
        return np.where(k % 2 == 0, k // 2, -((k - 1) // 2))

    def eval_block(self, ks, x):
        ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
        x = self.domain.canonical(np.atleast_1d(x))
        freqs = self.frequency(ks)
        f_abs = np.abs(freqs)
        f_lo, f_hi = int(f_abs.min()), int(f_abs.max())
        powers = _unit_circle_powers(TWO_PI * x, f_lo, f_hi)
        out = np.empty((x.size, ks.size), dtype=complex)
        for c, f in enumerate(freqs):
            col = powers[:, int(abs(f)) - f_lo]
            out[:, c] = col if f >= 0 else np.conj(col)
        return out

    def eval(self, k, x):
        scalar = np.isscalar(x)
        out = self.eval_block([int(k)], np.atleast_1d(x))[:, 0]
        return out[0] if scalar else out

    def spectral_sum_max(self, m):
        # |eta_k|^2 == 1
        return float(m - 1)

    def spectral_sum_at(self, m, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, float(m - 1))

    def weighted_tail_at(self, rule, m, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, rule.tail(m)), 0.0

    def weighted_tail_max(self, rule, m):
        return rule.tail(m)

    def kernel_sum_at(self, rule, x, y, eps):
        """sum_k lambda_k eta_k(x) conj(eta_k(y)) with residual control."""
        delta = float(x) - float(y)
        if rule.name == "geometric":
            z = np.exp(TWO_PI * 1j * delta)
            q = rule.q
            val = rule.scale * (1.0 + q * z / (1.0 - q * q * z)
                                + q * q * np.conj(z) / (1.0 - q * q * np.conj(z)))
            return complex(val), 0.0
        cut = rule.rank if rule.rank is not None else 1 << 20
        cut = min(cut, 1 << 20)
        residual = rule.tail(cut + 1)
        if residual > eps:
            raise TruncationError(
                "off-diagonal kernel series for rule %r cannot reach eps=%.3e"
                % (rule.name, eps))
        ks = np.arange(1, cut + 1)
        lam = rule.values(ks)
        keep = lam > 0.0
        ks = ks[keep]
        lam = lam[keep]
        fx = self.eval_block(ks, [x])[0]
        fy = self.eval_block(ks, [y])[0]
        return complex(np.sum(lam * fx * np.conj(fy))), residual


class CosineBasis:
    """Cosine system on [0, 1]: eta_1 = 1, eta_k = sqrt(2) cos(pi (k-1) x).

    All |eta_k(x)|^2 are maximal simultaneously at x = 0, which gives exact
    closed forms for the partial suprema and tail energy suprema.
    """

    name = "cosine"
    domain = Domain("unit-interval")
    sup_eta_sq = 2.0

    def eval_block(self, ks, x):
        ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
        x = self.domain.canonical(np.atleast_1d(x))
        freqs = ks - 1
        f_lo = int(max(freqs.min(), 1))
        f_hi = int(freqs.max())
        powers = None
        if f_hi >= 1:
            powers = _unit_circle_powers(math.pi * x, f_lo, f_hi)
        out = np.empty((x.size, ks.size))
        sqrt2 = math.sqrt(2.0)
        for c, f in enumerate(freqs):
            if f == 0:
                out[:, c] = 1.0
            else:
                np.multiply(sqrt2, powers[:, int(f) - f_lo].real, out=out[:, c])
        return out

    def eval(self, k, x):
        scalar = np.isscalar(x)
        out = self.eval_block([int(k)], np.atleast_1d(x))[:, 0]
        return out[0] if scalar else out

    def spectral_sum_max(self, m):
        # at x = 0: 1 + 2 (m - 2) for m >= 2
        if m <= 1:
            return 0.0
        return float(2 * m - 3)

    def spectral_sum_at(self, m, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape)
        if m >= 2:
            total += 1.0
            for j in range(1, m - 1):
                total += 2.0 * np.cos(math.pi * j * x) ** 2
        return total

    def _osc_tail(self, rule, m, theta):
        """sum_{k >= m} lambda_k cos((k-1) theta) for m >= 2, with residual."""
        if rule.name == "sobolev" and rule.s == 1.0:
            full = _cos_series_inverse_sq(theta)
            j = np.arange(1, m - 1, dtype=float)
            if j.size:
                partial = np.sum((1.0 + j * j) ** (-1.0)
                                 * np.cos(np.outer(np.atleast_1d(theta), j)), axis=1)
            else:
                partial = 0.0
            return full - partial, 0.0
        if rule.name == "geometric":
            z = np.exp(1j * np.asarray(theta, dtype=float))
            w = rule.q * z
            val = rule.scale * np.real(w ** (m - 1) / (1.0 - w))
            return val, 0.0
        cut = rule.rank if rule.rank is not None else 1 << 17
        cut = max(cut, m)
        residual = rule.tail(cut + 1)
        ks = np.arange(m, cut + 1)
        lam = rule.values(ks)
        keep = lam > 0.0
        ks, lam = ks[keep], lam[keep]
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        val = np.zeros(theta.shape)
        for lo in range(0, ks.size, 4096):
            blk = slice(lo, lo + 4096)
            val += np.cos(np.outer(theta, ks[blk] - 1)) @ lam[blk]
        return val, residual

    def weighted_tail_at(self, rule, m, x):
        """(sum_{k >= m} lambda_k |eta_k(x)|^2, residual bound)."""
        x = self.domain.canonical(np.atleast_1d(x))
        if m <= 1:
            v, r = self.weighted_tail_at(rule, 2, x)
            return rule.value(1) + v, r
        # |eta_k|^2 = 1 + cos(2 pi (k-1) x) for k >= 2
        osc, res = self._osc_tail(rule, m, TWO_PI * x)
        return rule.tail(m) + osc, res

    def weighted_tail_max(self, rule, m):
        if m <= 1:
            return rule.value(1) + 2.0 * rule.tail(2)
        return 2.0 * rule.tail(m)

    def kernel_sum_at(self, rule, x, y, eps):
        """Product expansion: 2 cos(a) cos(b) = cos(a-b) + cos(a+b)."""
        x = float(x)
        y = float(y)
        lam1 = rule.value(1)
        if rule.name in ("sobolev", "geometric") and (
                rule.name == "geometric" or rule.s == 1.0):
            # series over frequencies j >= 1 of lambda_{j+1} cos(j theta)
            def series(theta):
                v, _ = self._osc_tail(rule, 2, np.asarray([theta]))
                return float(v[0])
            val = lam1 + series(math.pi * (x - y)) + series(math.pi * (x + y))
            return complex(val), 0.0
        cut = rule.rank if rule.rank is not None else 1 << 17
        residual = 2.0 * rule.tail(cut + 1)
        if residual > eps:
            raise TruncationError(
                "off-diagonal kernel series for rule %r cannot reach eps=%.3e"
                % (rule.name, eps))
        ks = np.arange(1, cut + 1)
        lam = rule.values(ks)
        keep = lam > 0.0
        ks, lam = ks[keep], lam[keep]
        fx = self.eval_block(ks, [x])[0]
        fy = self.eval_block(ks, [y])[0]
        return complex(np.sum(lam * fx * np.conj(fy))), residual


def _cos_series_inverse_sq(theta):
    """sum_{j >= 1} cos(j theta) / (1 + j^2), exactly.

    Classical Fourier series: on [0, 2 pi] the sum equals
    pi cosh(pi - theta) / (2 sinh pi) - 1/2; extended by symmetry and period.
    """
    t = np.abs(np.asarray(theta, dtype=float)) % TWO_PI
    return math.pi * np.cosh(math.pi - t) / (2.0 * math.sinh(math.pi)) - 0.5


_BASES = {"fourier": FourierBasis(), "cosine": CosineBasis()}


def get_basis(name):
    try:
        return _BASES[name]
    except KeyError:
        raise ValueError("unknown basis %r" % (name,)) from None


# ---------------------------------------------------------------------------
# grid maximization
# ---------------------------------------------------------------------------


def grid_maximum(f, npts=100001, refine=40):
    """Maximize a vectorized function on [0, 1] by grid + local ternary refine.

    Returns (value, resolution) where resolution is the final bracket width.
    """
    npts = int(min(npts, 100001))
    xs = np.linspace(0.0, 1.0, npts)
    vals = np.asarray(f(xs), dtype=float)
    i = int(np.argmax(vals))
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, npts - 1)]
    best = float(vals[i])
    for _ in range(refine):
        a = lo + (hi - lo) / 3.0
        b = hi - (hi - lo) / 3.0
        fa = float(f(np.asarray([a]))[0])
        fb = float(f(np.asarray([b]))[0])
        best = max(best, fa, fb)
        if fa < fb:
            lo = a
        else:
            hi = b
    return best, float(hi - lo)


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------


class SpectralKernelModel:
    """Kernel with explicit eigenvalue sequence, basis, and diagonal atom.

    Immutable after construction.  ``eps_trunc`` is the absolute truncation
    tolerance (relative tolerance times the eigenvalue trace);
    ``trunc_index`` is the smallest N with tail_sum(N+1) <= eps_trunc, kept as
    a number (it may be astronomically large for slow decay; operations that
    materialize arrays use their own caps and report residuals instead).
    """

    def __init__(self, basis, rule, atom_mass=0.0, eps_trunc_rel=1e-10):
        if isinstance(basis, str):
            basis = get_basis(basis)
        if atom_mass < 0.0:
            raise ValueError("atom mass must be non-negative")
        self.basis = basis
        self.rule = rule
        self.atom_mass = float(atom_mass)
        self.eps_trunc_rel = float(eps_trunc_rel)
        base = rule.total()
        self.eps_trunc = eps_trunc_rel * base if base > 0.0 else eps_trunc_rel
        self.trunc_index = rule.index_for_tail(self.eps_trunc) if base > 0.0 else 0

    # -- scalar spectral data ------------------------------------------------

    @property
    def domain(self):
        return self.basis.domain

    @property
    def rank(self):
        return self.rule.rank

    @property
    def trace(self):
        """Integral of K(x, x) over the domain."""
        return self.rule.total() + self.atom_mass

    @property
    def trace0(self):
        """Mass of the diagonal atom (the part invisible to L2)."""
        return self.atom_mass

    @property
    def embedding_norm(self):
        """Operator norm of the embedding into L2: the top singular value."""
        if self.rank == 0:
            return 0.0
        return math.sqrt(self.rule.value(1))

    @property
    def sup_diag(self):
        """sup_x K(x, x); the squared sup-norm bound for the kernel."""
        base = self.basis.weighted_tail_max(self.rule, 1) if self.rank != 0 else 0.0
        return base + self.atom_mass

    def eigenvalues(self, ks):
        return self.rule.values(ks)

    def singular_values(self, ks):
        return np.sqrt(self.rule.values(ks))

    def traces(self):
        return self.trace, self.trace0

    # -- pointwise evaluation ------------------------------------------------

    def eigenfunction(self, k, x):
        return self.basis.eval(k, x)

    def diag_value(self, x):
        """K(x, x), vectorized; exact for the built-in combinations."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.rank == 0:
            vals = np.zeros(x.shape)
            res = 0.0
        else:
            vals, res = self.basis.weighted_tail_at(self.rule, 1, x)
        if res > self.eps_trunc:
            raise TruncationError("diagonal series residual %.3e > eps" % res)
        return vals + self.atom_mass

    def eval_kernel(self, x, y):
        """K(x, y) at a pair of points (scalar).  The atom sits on x == y."""
        xs = self.domain.canonical(np.asarray([x], dtype=float))[0]
        ys = self.domain.canonical(np.asarray([y], dtype=float))[0]
        if xs == ys:
            return complex(self.diag_value(xs)[0])
        if self.rank == 0:
            return 0.0 + 0.0j
        val, _res = self.basis.kernel_sum_at(self.rule, xs, ys, self.eps_trunc)
        return val

    def kernel_matrix(self, xs):
        xs = np.asarray(xs, dtype=float)
        n = xs.size
        out = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(i, n):
                out[i, j] = self.eval_kernel(xs[i], xs[j])
                out[j, i] = np.conj(out[i, j])
        return out

    # -- spectral functions --------------------------------------------------

    def spectral_function(self, m):
        """N(m) = sup_x sum_{k < m} |eta_k(x)|^2, exact."""
        if m < 1:
            raise ValueError("m must be >= 1")
        return self.basis.spectral_sum_max(m)

    def spectral_function_grid(self, m, npts=100001):
        return grid_maximum(lambda x: self.basis.spectral_sum_at(m, x), npts)

    def tail_function(self, m):
        """T(m) = sup_x sum_{k >= m} lambda_k |eta_k(x)|^2, exact."""
        if m < 1:
            raise ValueError("m must be >= 1")
        if self.rank is not None and m > self.rank:
            return 0.0
        return self.basis.weighted_tail_max(self.rule, m)

    def tail_function_grid(self, m, npts=100001):
        def f(x):
            v, _ = self.basis.weighted_tail_at(self.rule, m, x)
            return v
        return grid_maximum(f, npts)

    def tail_sum(self, m):
        """sum_{k >= m} lambda_k, exact."""
        if m < 1:
            raise ValueError("m must be >= 1")
        return self.rule.tail(m)

    def tail_energy_at(self, m, x):
        """Pointwise tail energy with its residual bound."""
        if self.rank is not None and m > self.rank:
            x = np.atleast_1d(np.asarray(x, dtype=float))
            return np.zeros(x.shape), 0.0
        return self.basis.weighted_tail_at(self.rule, m, x)

    def describe(self):
        return {
            "basis": self.basis.name,
            "eigenvalues": self.rule.describe(),
            "atom_mass": self.atom_mass,
            "eps_trunc_rel": self.eps_trunc_rel,
        }
