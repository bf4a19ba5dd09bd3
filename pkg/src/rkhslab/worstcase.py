"""Worst-case recovery and discretization errors as operator norms.

The sup of the squared L2 error over the unit ball of the source space is the
squared largest singular value of an explicit error operator.  Truncating the
spectral expansion at N makes it a matrix; everything dropped is covered by a
residual bound reported next to the value, added on the conservative side
when the value is compared against a theoretical bound.

The error matrix has the block form [[A, B], [0, D]] with m-1 dense rows and
a diagonal tail, so its Gram is diagonal-plus-low-rank.  The largest
eigenvalue then comes from a one-dimensional secular equation, which keeps
large truncation orders cheap; the dense SVD path below stays as the
reference method for moderate N.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import RankDeficientError
from .leastsq import assemble_design

KAPPA = (1.0 + math.sqrt(5.0)) / 2.0
KAPPA_SQ = KAPPA * KAPPA
# multiplier in the recovery failure probability FAIL_MULT * n^(1-r)
FAIL_MULT = 2.0 ** 0.75 + 1.0

_DENSE_RECOVERY = 600
_DENSE_DISCRETIZE = 1024
_TRUNC_CAP = 4096
_EVAL_CHUNK = 1024


# ---------------------------------------------------------------------------
# result containers
# ---------------------------------------------------------------------------


@dataclass
class WceValue:
    """Squared worst-case recovery error over the truncated unit ball."""

    value_sq: float
    residual: float
    trunc_dim: int
    lambda_min: float
    pinv_norm: float

    @property
    def value(self):
        return math.sqrt(max(self.value_sq, 0.0))

    @property
    def upper_sq(self):
        """Conservative squared value covering the truncated modes."""
        return (self.value + self.residual) ** 2


@dataclass
class DiscretizationValue:
    """Spectral-norm deviation between the exact and sampled quadratic form."""

    value: float
    residual: float
    trunc_dim: int

    @property
    def upper(self):
        return self.value + self.residual


@dataclass
class ErrorMatrix:
    """Dense error operator for small instances (oracle cross-checks)."""

    matrix: np.ndarray
    residual: float


@dataclass
class NullspaceReport:
    component: float
    envelope: float
    lambda_min: float
    within_envelope: object  # bool when lambda_min >= 1/2, else None


@dataclass
class BoundReport:
    name: str
    value: float
    inputs: dict
    constants: dict
    notes: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# internals
# ---------------------------------------------------------------------------


def _pick_trunc(model, trunc, lowest):
    if trunc is None:
        n = min(model.trunc_index, _TRUNC_CAP)
    else:
        n = int(trunc)
    n = max(n, lowest)
    if model.rank is not None:
        n = min(n, max(model.rank, lowest))
    return n


def _scaled_design(model, x, row_scale, col_scale, n_cols, dtype=None):
    """G[i, k] = col_scale[k] * row_scale[i] * eta_{k+1}(x_i), chunked."""
    out = None
    for lo in range(0, n_cols, _EVAL_CHUNK):
        hi = min(lo + _EVAL_CHUNK, n_cols)
        block = model.basis.eval_block(np.arange(lo + 1, hi + 1), x)
        if out is None:
            out = np.empty((x.size, n_cols), dtype=block.dtype)
        out[:, lo:hi] = block * row_scale[:, None] * col_scale[lo:hi][None, :]
    return out


def _lowrank_plus_diag_norm(d, C):
    """Largest eigenvalue of diag(d) + C* C with C short and wide.

    Eigenvalues above max(d) solve lambda_max(C (mu I - diag d)^{-1} C*) = 1;
    the left side decreases in mu, so bisection between max(d) and
    max(d) + ||C||^2 nails the top one.
    """
    d = np.asarray(d, dtype=float)
    gram_small = C @ C.conj().T
    gram_small = 0.5 * (gram_small + gram_small.conj().T)
    big = float(np.linalg.eigvalsh(gram_small)[-1])
    d_max = float(d.max())
    if big <= 0.0:
        return d_max

    def wmax(mu):
        scaled = C * (1.0 / (mu - d))[None, :]
        w = scaled @ C.conj().T
        w = 0.5 * (w + w.conj().T)
        return float(np.linalg.eigvalsh(w)[-1])

    scale = max(d_max, big, 1.0)
    probe = d_max + 1e-13 * scale
    if wmax(probe) < 1.0:
        return d_max
    lo, hi = probe, d_max + big + 1e-30
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if wmax(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _recovery_parts(model, density, nodes, m, trunc, design):
    ds = design if design is not None else assemble_design(model, density,
                                                           nodes, m)
    if not ds.full_rank:
        raise RankDeficientError(
            "design matrix is rank deficient (lambda_min=%.3e)"
            % ds.lambda_min)
    n, w = ds.n, ds.weights
    N = _pick_trunc(model, trunc, m - 1)
    sig = model.singular_values(np.arange(1, N + 1))
    G = _scaled_design(model, np.asarray(nodes.x, dtype=float), w, sig, N)
    cho = cho_factor(n * ds.gram)
    W = cho_solve(cho, ds.matrix.conj().T @ G)
    C = -W
    head = np.arange(m - 1)
    C[head, head] += sig[head]
    d = np.concatenate([np.zeros(m - 1), sig[m - 1:] ** 2])

    tail = model.tail_sum(N + 1)
    lam_next = float(model.eigenvalues(np.asarray([N + 1]))[0])
    pinv = ds.pinv_norm()
    wsum = float(np.sum(w ** 2))
    resid = math.sqrt(lam_next
                      + pinv ** 2 * model.basis.sup_eta_sq * tail * wsum)
    return ds, C, d, sig, N, resid


def _dense_error_matrix(C, d, sig, m, N):
    E = np.zeros((N, N), dtype=C.dtype)
    E[: m - 1, :] = C
    idx = np.arange(m - 1, N)
    E[idx, idx] = sig[idx]
    return E


# ---------------------------------------------------------------------------
# worst-case values
# ---------------------------------------------------------------------------


def recovery_error_matrix(model, density, nodes, m, trunc=None, design=None):
    """Dense error operator; meant for small N (tests and oracles)."""
    ds, C, d, sig, N, resid = _recovery_parts(model, density, nodes, m,
                                              trunc, design)
    if N > 2000:
        raise ValueError("dense error matrix capped at N=2000, got %d" % N)
    return ErrorMatrix(matrix=_dense_error_matrix(C, d, sig, m, N),
                       residual=resid)


def exact_wce_recovery(model, density, nodes, m, trunc=None, design=None):
    """Exact squared worst-case L2 recovery error over the truncated ball."""
    ds, C, d, sig, N, resid = _recovery_parts(model, density, nodes, m,
                                              trunc, design)
    if N <= _DENSE_RECOVERY:
        E = _dense_error_matrix(C, d, sig, m, N)
        top = float(np.linalg.svd(E, compute_uv=False)[0])
        value_sq = top * top
    else:
        value_sq = _lowrank_plus_diag_norm(d, C)
    return WceValue(value_sq=value_sq, residual=resid, trunc_dim=N,
                    lambda_min=ds.lambda_min, pinv_norm=ds.pinv_norm())


_EIGSH_SEED = np.random.SeedSequence(9001)


def exact_wce_discretization(model, nodes, weights=None, trunc=None):
    """Spectral norm of diag(lambda) - (1/n) G* G at the given nodes.

    ``weights``: per-node multipliers for the sampled quadratic form (the
    reciprocal sampling density for importance-weighted discretization);
    omitted means the plain equal-weight average.
    """
    x = np.asarray(getattr(nodes, "x", nodes), dtype=float)
    n = x.size
    if n < 1:
        raise ValueError("need at least one node")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != x.shape or np.any(w < 0.0):
        raise ValueError("weights must be non-negative, one per node")
    N = _pick_trunc(model, trunc, 1)
    sig = model.singular_values(np.arange(1, N + 1))
    lam = sig ** 2
    G = _scaled_design(model, x, np.sqrt(w), sig, N)
    if N <= _DENSE_DISCRETIZE:
        Y = -(G.conj().T @ G) / n
        idx = np.arange(N)
        Y[idx, idx] += lam
        Y = 0.5 * (Y + Y.conj().T)
        eigs = np.linalg.eigvalsh(Y)
        value = float(max(abs(eigs[0]), abs(eigs[-1])))
    else:
        def matvec(v):
            return lam * v - G.conj().T @ (G @ v) / n

        op = LinearOperator((N, N), matvec=matvec, dtype=G.dtype)
        v0 = np.random.Generator(np.random.Philox(_EIGSH_SEED)).standard_normal(N)
        vals = eigsh(op, k=1, which="LM", v0=v0, tol=1e-10,
                     return_eigenvectors=False)
        value = float(abs(vals[0]))

    lam_next = float(model.eigenvalues(np.asarray([N + 1]))[0])
    q2 = model.basis.sup_eta_sq * model.tail_sum(N + 1) * float(w.max())
    lam_one = float(model.eigenvalues(np.asarray([1]))[0])
    resid = lam_next + q2 + math.sqrt((lam_one + value) * q2)
    return DiscretizationValue(value=value, residual=resid, trunc_dim=N)


def wce_nullspace_component(atom_mass, nodes, design):
    """Worst-case L2 mass the solver picks up from the kernel's diagonal
    part: sup over the nullspace unit ball of ||fitted function||^2.

    The nullspace Gram at distinct nodes is atom_mass times the identity, so
    the sup is an (m-1)-dimensional eigenvalue problem.  When the Gram
    eigenvalues are at least one half the value provably stays below
    2 atom_mass max(1/rho) / n; the report carries that envelope.
    """
    atom_mass = float(atom_mass)
    if atom_mass < 0.0:
        raise ValueError("atom mass must be non-negative")
    x = np.asarray(nodes.x, dtype=float)
    if np.unique(x).size != x.size:
        raise ValueError("nodes must be distinct")
    ds = design
    n = ds.n
    w = ds.weights
    cho = cho_factor(n * ds.gram)
    Mw = cho_solve(cho, ds.matrix.conj().T) * w[None, :]
    small = Mw @ Mw.conj().T
    small = 0.5 * (small + small.conj().T)
    component = atom_mass * float(np.linalg.eigvalsh(small)[-1])
    max_w_sq = float(np.max(w ** 2))
    envelope = 2.0 * atom_mass * max_w_sq / n
    within = None
    if ds.lambda_min >= 0.5:
        within = bool(component <= envelope + 1e-12)
    return NullspaceReport(component=component, envelope=envelope,
                           lambda_min=ds.lambda_min, within_envelope=within)


# ---------------------------------------------------------------------------
# oracle helpers (Monte Carlo + power iteration)
# ---------------------------------------------------------------------------


def _random_units(rng, dim, count, dtype):
    if np.issubdtype(dtype, np.complexfloating):
        v = rng.standard_normal((dim, count)) + 1j * rng.standard_normal(
            (dim, count))
    else:
        v = rng.standard_normal((dim, count))
    return v / np.linalg.norm(v, axis=0)[None, :]


def power_iteration_norm(mat, iters=200, tol=1e-9, start=None, rng=None):
    """Largest singular value of ``mat`` by power iteration on mat* mat."""
    mat = np.asarray(mat)
    dim = mat.shape[1]
    if start is not None:
        v = np.asarray(start, dtype=mat.dtype).copy()
    else:
        rng = rng or np.random.default_rng(0)
        v = _random_units(rng, dim, 1, mat.dtype)[:, 0]
    v /= np.linalg.norm(v)
    last = 0.0
    for _ in range(iters):
        u = mat @ v
        s = np.linalg.norm(u)
        if s == 0.0:
            return 0.0
        v = mat.conj().T @ u
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return float(s)
        v /= nv
        est = math.sqrt(nv)
        if abs(est - last) <= tol * max(est, 1.0):
            return float(est)
        last = est
    return float(last)


def mc_sup_singular(mat, trials, rng, refine_iters=200, tol=1e-9):
    """(raw Monte Carlo sup, power-iteration refinement) of ||mat a||."""
    mat = np.asarray(mat)
    dim = mat.shape[1]
    best = 0.0
    best_v = None
    chunk = 2048
    done = 0
    while done < trials:
        take = min(chunk, trials - done)
        V = _random_units(rng, dim, take, mat.dtype)
        norms = np.linalg.norm(mat @ V, axis=0)
        i = int(np.argmax(norms))
        if norms[i] > best:
            best = float(norms[i])
            best_v = V[:, i].copy()
        done += take
    refined = power_iteration_norm(mat, iters=refine_iters, tol=tol,
                                   start=best_v)
    return best, max(best, refined)


def mc_sup_quadratic(Y, trials, rng, refine_iters=200, tol=1e-9):
    """(raw Monte Carlo sup, refinement) of |a* Y a| for Hermitian Y."""
    Y = np.asarray(Y)
    dim = Y.shape[0]
    best = 0.0
    best_v = None
    chunk = 2048
    done = 0
    while done < trials:
        take = min(chunk, trials - done)
        V = _random_units(rng, dim, take, Y.dtype)
        vals = np.abs(np.einsum("ij,ij->j", V.conj(), Y @ V).real)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best = float(vals[i])
            best_v = V[:, i].copy()
        done += take
    # power iteration on the Hermitian matrix itself converges to the
    # eigenvalue of largest modulus
    v = best_v
    last = best
    for _ in range(refine_iters):
        u = Y @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            break
        v = u / nu
        est = abs(float((v.conj() @ (Y @ v)).real))
        if abs(est - last) <= tol * max(est, 1.0):
            last = est
            break
        last = est
    return best, max(best, float(last))


# ---------------------------------------------------------------------------
# bound formulas
# ---------------------------------------------------------------------------


def fail_prob(n, r, mult=1.0):
    """mult * n^(1-r), the generic failure-probability envelope."""
    return mult * float(n) ** (1.0 - float(r))


def choose_m(n, r):
    """Default mode count floor(n / (14 r log n))."""
    n = int(n)
    if n < 3:
        raise ValueError("n must be at least 3")
    return int(n / (14.0 * float(r) * math.log(n)))


def max_m_under(model, n, r, c=7.0, density_kind=None, m_cap=None):
    """Largest m >= 2 whose (density-adjusted) spectral function stays below
    n / (c r log n).

    density_kind None means the raw spectral function; the two mixture kinds
    use their a-priori bounds 2(m-1) and 3(m-1).
    """
    budget = n / (c * float(r) * math.log(n))
    if density_kind is None or density_kind == "plain":
        neff = model.spectral_function
    elif density_kind == "spectral-mix":
        def neff(m):
            return 2.0 * (m - 1)
    elif density_kind == "spectral-mix-atom":
        def neff(m):
            return 3.0 * (m - 1)
    else:
        raise ValueError("no spectral-function bound for density %r"
                         % (density_kind,))
    cap = m_cap if m_cap is not None else n + 1
    best = None
    m = 2
    while m <= cap and neff(m) <= budget:
        best = m
        m += 1
    if best is None:
        raise ValueError("no m >= 2 satisfies the spectral budget %.3f"
                         % budget)
    return best


def bound(name, **inputs):
    """Evaluate a named bound formula; natural logs throughout."""
    get = inputs.get

    def need(*keys):
        missing = [k for k in keys if get(k) is None]
        if missing:
            raise ValueError("bound %r needs inputs %s" % (name, missing))
        return [float(inputs[k]) for k in keys]

    notes = {}
    if name == "recovery-tail-sup":
        s_sq, t_sup, n, r = need("sigma_m_sq", "tail_weighted_sup", "n", "r")
        alt = 8.0 * r * math.log(n) / n * t_sup * KAPPA_SQ
        value = 5.0 * max(s_sq, alt)
        constants = {"lead": 5.0, "log_coef": 8.0, "kappa_sq": KAPPA_SQ}
    elif name == "recovery-tail-sum":
        s_sq, t_sum, n, r = need("sigma_m_sq", "tail_sum", "n", "r")
        alt = 16.0 * r * KAPPA_SQ * math.log(n) / n * t_sum
        value = 5.0 * max(s_sq, alt)
        constants = {"lead": 5.0, "log_coef": 16.0, "kappa_sq": KAPPA_SQ}
    elif name == "recovery-half-tail":
        m, half = need("m", "half_tail_sum")
        value = 15.0 / m * half
        constants = {"lead": 15.0}
    elif name == "recovery-atom":
        s_sq, t_sum, atom, n, r = need("sigma_m_sq", "tail_sum", "atom_mass",
                                       "n", "r")
        value = 441.0 * max(s_sq, r * math.log(n) / n * t_sum, atom / n)
        constants = {"lead": 441.0}
    elif name == "recovery-intermediate":
        s_sq, t_sup, m0_sq, n, r = need("sigma_m_sq", "tail_weighted_sup",
                                        "m0_sq", "n", "r")
        value = 7.0 * max(s_sq, 8.0 * r * math.log(n) / n * t_sup * KAPPA_SQ,
                          8.0 * m0_sq * KAPPA_SQ / n)
        constants = {"lead": 7.0, "log_coef": 8.0, "kappa_sq": KAPPA_SQ}
    elif name == "discretize-sup":
        emb, sup_nrm, n, r = need("embedding_norm", "sup_norm", "n", "r")
        value = emb * sup_nrm * math.sqrt(21.0 * r * math.log(n) / n)
        constants = {"inside": 21.0}
        thr = 21.0 * r * sup_nrm ** 2 / emb ** 2 if emb > 0 else math.inf
        notes["threshold_ok"] = bool(n / math.log(n) >= thr)
        notes["threshold"] = thr
    elif name == "discretize-trace":
        tr, emb, n, r = need("trace", "embedding_norm", "n", "r")
        value = math.sqrt(21.0 * tr * emb ** 2 * r * math.log(n) / n)
        constants = {"inside": 21.0}
    elif name == "discretize-sup-final":
        sup_diag, n, r = need("sup_diag", "n", "r")
        value = 8.0 * math.sqrt(r * math.log(n) / n) * sup_diag
        constants = {"lead": 8.0}
    elif name == "discretize-trace-final":
        tr, n, r = need("trace", "n", "r")
        value = 8.0 * tr * math.sqrt(r * math.log(n) / n)
        constants = {"lead": 8.0}
    elif name == "deviation-threshold":
        m_sq, lam_norm, n, r = need("m_sq", "lambda_op_norm", "n", "r")
        value = max(8.0 * r * math.log(n) / n * m_sq * KAPPA_SQ, lam_norm)
        constants = {"log_coef": 8.0, "kappa_sq": KAPPA_SQ,
                     "fail_mult": 2.0 ** 0.75}
    elif name == "baseline-scan":
        rule = inputs.get("rule")
        if rule is None:
            raise ValueError("bound 'baseline-scan' needs inputs ['rule']")
        tr, n = need("trace", "n")
        best = math.inf
        arg = 1
        ell = 1
        while True:
            linear = tr * ell / n
            if linear >= best:
                break
            cand = rule.value(ell) + linear
            if cand < best:
                best = cand
                arg = ell
            ell += 1
        value = best
        notes["argmin"] = arg
        constants = {}
    elif name == "baseline-p2":
        tr, n = need("trace", "n")
        center = max(1, int(round(math.sqrt(n))))
        cands = {max(1, center + k) for k in range(-2, 3)} | {1}
        value, arg = min((tr / ell + tr * ell / n, ell) for ell in cands)
        notes["argmin"] = arg
        constants = {}
    elif name == "choose-m":
        n, r = need("n", "r")
        value = float(choose_m(int(n), r))
        constants = {"denom_coef": 14.0}
    else:
        raise ValueError("unknown bound name %r" % (name,))
    if value < 0.0:
        raise AssertionError("bound %r evaluated negative" % name)
    return BoundReport(name=name, value=float(value), inputs=dict(inputs),
                       constants=constants, notes=notes)


BOUND_NAMES = (
    "recovery-tail-sup", "recovery-tail-sum", "recovery-half-tail",
    "recovery-atom", "recovery-intermediate", "discretize-sup",
    "discretize-trace", "discretize-sup-final", "discretize-trace-final",
    "deviation-threshold", "baseline-scan", "baseline-p2", "choose-m",
)


def model_bound_inputs(model, n, r, m, density=None):
    """Collect every spectral input the named bounds can ask for."""
    m = int(m)
    lam_m = float(model.eigenvalues(np.asarray([m]))[0])
    half_start = max(1, m // 2)
    inputs = {
        "n": int(n),
        "r": float(r),
        "m": m,
        "sigma_m_sq": lam_m,
        "tail_weighted_sup": model.tail_function(m),
        "tail_sum": model.tail_sum(m),
        "half_tail_sum": model.tail_sum(half_start),
        "atom_mass": model.atom_mass,
        "trace": model.trace,
        "embedding_norm": model.embedding_norm,
        "sup_norm": math.sqrt(model.sup_diag),
        "sup_diag": model.sup_diag,
        "rule": model.rule,
    }
    if density is not None:
        inputs["m0_sq"] = model.atom_mass * density.sup_inverse()
    return inputs
