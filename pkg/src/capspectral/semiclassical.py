"""Orthonormal polynomials for the semiclassical weight (x - alpha)^a (1 - x^2)^(b/2) on [alpha, 1].

The polynomials R_n are orthonormal under the inner product normalised by the
total weight, so R_0 == 1 and

    x R_n = beta_n R_{n+1} + alpha_n R_n + beta_{n-1} R_{n-1}.

Recurrence coefficients come from a discretised Stieltjes procedure run on a
Gauss-Jacobi rule that integrates the weight exactly against polynomials.
"""
import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln, logsumexp

__all__ = [
    "ParameterError", "AccuracyLossError", "TableExtentError",
    "WeightParams", "RecurrenceTable", "GaussRule1D",
    "normalization", "log_normalization", "recurrence_table", "gauss_rule", "eval_R", "eval_R_all",
    "eval_weighted_R_all", "family", "clear_cache",
]


class ParameterError(ValueError):
    """Weight parameters outside the supported domain."""


class AccuracyLossError(ArithmeticError):
    """The recurrence lost positivity; the table cannot be extended at this precision."""


class TableExtentError(IndexError):
    """A polynomial index beyond the computed recurrence table was requested."""


@dataclass(frozen=True)
class WeightParams:
    alpha: float
    a: float = 0
    b: int = 0

    def __post_init__(self):
        if not -1 < self.alpha < 1:
            raise ParameterError(f"alpha must lie in (-1, 1), got {self.alpha}")
        if self.a < 0:
            raise ParameterError(f"a must be non-negative, got {self.a}")
        if int(self.b) != self.b or self.b < 0 or self.b % 2:
            raise ParameterError(f"b must be a non-negative even integer, got {self.b}")

    @property
    def half_b(self):
        return int(self.b) // 2

    def weight(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.alpha) ** self.a * (1 - x**2) ** self.half_b


@dataclass(frozen=True, eq=False)
class RecurrenceTable:
    params: WeightParams
    alphas: np.ndarray
    betas: np.ndarray
    log_omega: float

    @property
    def omega(self):
        """Total weight; may underflow to 0 for extreme parameters, log_omega does not."""
        return float(np.exp(self.log_omega))

    @property
    def n_max(self):
        return len(self.alphas) - 1


@dataclass(frozen=True, eq=False)
class GaussRule1D:
    """Nodes and weights; log_weights stays finite where weights underflow."""
    nodes: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray


def _gauss_jacobi_log(m, p, q):
    """Gauss-Jacobi nodes and log weights for (1 - t)^p (1 + t)^q on [-1, 1].

    Golub-Welsch on the orthonormal Jacobi recurrence, with weights taken from
    the Christoffel function so that tiny weights keep their relative accuracy.
    """
    n = np.arange(m, dtype=float)
    s = 2 * n + p + q
    with np.errstate(divide="ignore", invalid="ignore"):
        diag = (q**2 - p**2) / (s * (s + 2))
    diag[0] = (q - p) / (p + q + 2)
    k = n[:-1]
    sk = s[:-1]
    off = 2 / (sk + 2) * np.sqrt(
        (k + 1) * (k + p + 1) * (k + q + 1) * (k + p + q + 1) / ((sk + 1) * (sk + 3))
    )
    if m == 1:
        nodes = diag.copy()
    else:
        nodes = eigh_tridiagonal(diag, off, eigvals_only=True)
    log_mass = (p + q + 1) * np.log(2) + gammaln(p + 1) + gammaln(q + 1) - gammaln(p + q + 2)
    return nodes, log_mass - _log_christoffel_sum(diag, off, m - 1, nodes)


def _base_rule(params, m):
    """m-point rule on [alpha, 1], exact against the full weight for degree <= 2m - 1 - b/2.

    Gauss-Jacobi handles (x - alpha)^a (1 - x)^(b/2) after the affine map to
    [-1, 1]; the analytic factor (1 + x)^(b/2) is folded into the weights.
    Log weights are returned since the factors can span hundreds of decades
    for large b.
    """
    alpha, a, k = params.alpha, params.a, params.half_b
    t, logwt = _gauss_jacobi_log(m, k, a)
    half = (1 - alpha) / 2
    x = alpha + half * (t + 1)
    logw = logwt + (a + k + 1) * np.log(half) + k * np.log1p(x)
    return x, logw


def log_normalization(params):
    """log of the total weight, finite even when the weight itself underflows."""
    m = params.half_b // 2 + 1
    _, logw = _base_rule(params, m)
    return float(logsumexp(logw))


def normalization(params):
    """Total weight omega = int_alpha^1 (x - alpha)^a (1 - x^2)^(b/2) dx."""
    return float(np.exp(log_normalization(params)))


def _stieltjes(x, sqrt_p, n_max):
    """Discretised Stieltjes procedure for the discrete measure sum_j p_j delta(x - x_j), sum p = 1.

    Runs on the weighted vectors q_n = sqrt(p) R_n(x), which stay bounded even
    where R_n itself is astronomically large (nodes carrying negligible weight).
    Taking sqrt(p) as input keeps nodes whose weight p would underflow.
    """
    alphas = np.empty(n_max + 1)
    betas = np.empty(n_max + 1)
    prev = np.zeros_like(x)
    cur = np.asarray(sqrt_p, dtype=float)
    beta_prev = 0.0
    for n in range(n_max + 1):
        alphas[n] = np.dot(x * cur, cur)
        nxt = (x - alphas[n]) * cur - beta_prev * prev
        nrm = np.linalg.norm(nxt)
        if not np.isfinite(nrm) or nrm <= 0:
            raise AccuracyLossError(f"recurrence lost positivity at n={n}")
        betas[n] = nrm
        prev, cur = cur, nxt / nrm
        beta_prev = nrm
    return alphas, betas


def recurrence_table(params, n_max):
    """Recurrence coefficients alpha_0..alpha_{n_max}, beta_0..beta_{n_max}."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    # exactness for p_{n_max+1}^2 times (1 + x)^(b/2): 2m - 1 >= 2 n_max + 2 + b/2
    m = n_max + 2 + (params.half_b + 1) // 2 + 2
    x, logw = _base_rule(params, m)
    total = logsumexp(logw)
    log_omega = float(total) if params.half_b == 0 else log_normalization(params)
    alphas, betas = _stieltjes(x, np.exp((logw - total) / 2), n_max)
    if np.any(alphas <= params.alpha) or np.any(alphas >= 1):
        raise AccuracyLossError("recurrence midpoints left (alpha, 1)")
    return RecurrenceTable(params, alphas, betas, log_omega)


_cache = {}
_cache_lock = threading.Lock()


# tables are built at n_max rounded up to a multiple of this, so a request's
# result never depends on what was cached before it
_TABLE_BUCKET = 16


def family(alpha, a, b, n_max):
    """Cached recurrence table for (alpha, a, b) covering at least n_max."""
    size = _TABLE_BUCKET * (max(n_max, 0) // _TABLE_BUCKET + 1) - 1
    key = (float(alpha), float(a), int(b), size)
    with _cache_lock:
        table = _cache.get(key)
        if table is None:
            table = recurrence_table(WeightParams(alpha, a, b), size)
            _cache[key] = table
    return table


def clear_cache():
    with _cache_lock:
        _cache.clear()


def gauss_rule(params_or_table, m):
    """m-point Gauss rule for the weight, by Golub-Welsch on the Jacobi matrix."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if isinstance(params_or_table, RecurrenceTable):
        table = params_or_table
        if table.n_max < m - 1:
            raise TableExtentError(f"table covers n <= {table.n_max}, rule needs {m - 1}")
    else:
        p = params_or_table
        table = family(p.alpha, p.a, p.b, m - 1)
    d = table.alphas[:m]
    e = table.betas[: m - 1]
    if m == 1:
        nodes, vecs = d.copy(), np.ones((1, 1))
    else:
        nodes, vecs = eigh_tridiagonal(d, e)
    # eigenvector entries are only absolutely accurate; the Christoffel function
    # gives relatively accurate weights even where they underflow towards zero
    log_weights = table.log_omega - _log_christoffel_sum(table.alphas, table.betas, m - 1, nodes)
    return GaussRule1D(nodes, np.exp(log_weights), log_weights)


def _log_christoffel_sum(al, be, n_max, x):
    """log sum_{n <= n_max} p_n(x)^2 for the orthonormal recurrence (al, be).

    Rescales as it goes so large values cannot overflow.
    """
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    total = np.ones_like(x)
    log_scale = np.zeros_like(x)
    for n in range(n_max):
        bp = be[n - 1] if n > 0 else 0.0
        prev, cur = cur, ((x - al[n]) * cur - bp * prev) / be[n]
        total += cur**2
        big = total > 1e100
        if np.any(big):
            f = np.sqrt(total[big])
            prev[big] /= f
            cur[big] /= f
            total[big] = 1.0
            log_scale[big] += 2 * np.log(f)
    return np.log(total) + log_scale


def eval_R_all(table, n_max, x, deriv=0, scale=None):
    """Values (and derivatives up to ``deriv``) of R_0..R_{n_max} at x.

    Returns an array of shape (deriv + 1, n_max + 1) + x.shape.  With
    ``scale`` every value is multiplied pointwise by it, applied before the
    recurrence so that growth is tempered.
    """
    if n_max > table.n_max:
        raise TableExtentError(f"table covers n <= {table.n_max}, asked for {n_max}")
    x = np.asarray(x, dtype=float)
    out = np.zeros((deriv + 1, n_max + 1) + x.shape)
    out[0, 0] = 1.0 if scale is None else scale
    al, be = table.alphas, table.betas
    for n in range(n_max):
        xm = x - al[n]
        bp = be[n - 1] if n > 0 else 0.0
        out[0, n + 1] = (xm * out[0, n] - bp * out[0, n - 1]) / be[n] if n > 0 else xm * out[0, 0] / be[0]
        if deriv >= 1:
            prev = out[1, n - 1] if n > 0 else 0.0
            out[1, n + 1] = (xm * out[1, n] + out[0, n] - bp * prev) / be[n]
        if deriv >= 2:
            prev = out[2, n - 1] if n > 0 else 0.0
            out[2, n + 1] = (xm * out[2, n] + 2 * out[1, n] - bp * prev) / be[n]
    return out


def eval_weighted_R_all(table, n_max, rule, deriv=0):
    """sqrt(w_j / omega) times R_n and its derivatives at the nodes of ``rule``.

    Sums over j of products of two such rows are inner products, and the
    scaling keeps every entry finite even where R_n overflows.
    """
    scale = np.exp((rule.log_weights - table.log_omega) / 2)
    return eval_R_all(table, n_max, rule.nodes, deriv, scale)


def eval_R(params, n, x, deriv_order=0):
    """R_n (or its first/second derivative) at x by forward recurrence."""
    if deriv_order not in (0, 1, 2):
        raise ValueError("deriv_order must be 0, 1 or 2")
    table = params if isinstance(params, RecurrenceTable) else family(params.alpha, params.a, params.b, n)
    vals = eval_R_all(table, n, x, deriv_order)
    return vals[deriv_order, n]
