"""Closed-form limiting-value laws: shapes, densities, quantiles, mixtures.

The limiting fraction of a run started from populations (b0, r0) follows a
beta law with shapes (b0+1, r0+1). A coupling asymmetry eps rescales the
blue shape to beta*(1+eps). Coherent-state inputs replace the fixed shapes
by a Poisson mixture over photon numbers (shape = photon count + 1), with
the Poisson mean optionally averaged uniformly over a grid spanning an
interval to model shot-to-shot attenuation jitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import betainc, betaln, gammaln

QUANTILE_CDF_TOL = 1e-10


class QuantileError(RuntimeError):
    """Quantile inversion failed; message records the bracket state."""


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of the limiting law, with optional coupling bias.

    ``beta`` and ``rho`` are the unbiased shapes (initial population + 1 for
    this process); ``epsilon`` rescales the blue coupling so the effective
    blue shape is beta*(1+epsilon).
    """

    beta: float
    rho: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.beta > 0.0 and self.rho > 0.0):
            raise ValueError(f"shapes must be positive, got beta={self.beta}, rho={self.rho}")
        if self.epsilon < -1.0 or self.effective_beta <= 0.0:
            raise ValueError(f"coupling bias {self.epsilon} gives a non-positive blue shape")

    @property
    def effective_beta(self) -> float:
        return self.beta * (1.0 + self.epsilon)

    @classmethod
    def from_initial_populations(cls, blue: int, red: int, epsilon: float = 0.0) -> "BetaParams":
        return cls(beta=blue + 1.0, rho=red + 1.0, epsilon=epsilon)


@dataclass(frozen=True)
class MixtureSpec:
    """Poisson photon-number mixture of beta laws for coherent-state inputs."""

    lambda_min: float
    lambda_max: float
    truncation_mass: float = 1e-12
    lambda_grid: int = 11

    def __post_init__(self):
        if self.lambda_min < 0 or self.lambda_max < self.lambda_min:
            raise ValueError("need 0 <= lambda_min <= lambda_max")
        if not 0.0 < self.truncation_mass < 1.0:
            raise ValueError("truncation_mass must lie in (0, 1)")
        if self.lambda_grid < 1:
            raise ValueError("lambda_grid must be >= 1")

    def grid(self) -> np.ndarray:
        if self.lambda_min == self.lambda_max:
            return np.array([self.lambda_min])
        return np.linspace(self.lambda_min, self.lambda_max, self.lambda_grid)


# ---------------------------------------------------------------------------
# beta law
# ---------------------------------------------------------------------------


def _check_domain(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any((t < 0.0) | (t > 1.0)):
        raise ValueError("argument outside [0, 1]")
    return t


def _beta_pdf_ab(t, a: float, b: float):
    """Density of Beta(a, b) via the log formulation, with edge handling."""
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.empty_like(t)
    interior = (t > 0.0) & (t < 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        ti = t[interior]
        out[interior] = np.exp(
            (a - 1.0) * np.log(ti) + (b - 1.0) * np.log1p(-ti) - betaln(a, b)
        )
    norm = math.exp(-betaln(a, b))
    for edge, shape in ((t == 0.0, a), (t == 1.0, b)):
        if np.any(edge):
            if shape < 1.0:
                out[edge] = np.inf
            elif shape == 1.0:
                out[edge] = norm
            else:
                out[edge] = 0.0
    return out[0] if scalar else out


def beta_pdf(t, params: BetaParams):
    """Limiting-value density at t for the (possibly biased) shape pair."""
    return _beta_pdf_ab(_check_domain(t), params.effective_beta, params.rho)


def beta_cdf(t, params: BetaParams):
    """Regularized incomplete beta integral of the limiting law."""
    t = _check_domain(t)
    return betainc(params.effective_beta, params.rho, t)


def beta_moments(params: BetaParams) -> tuple[float, float]:
    """Exact (mean, variance) of the limiting law, bias included."""
    a, b = params.effective_beta, params.rho
    mean = a / (a + b)
    var = a * b / ((a + b) ** 2 * (a + b + 1.0))
    return mean, var


def population_ratio_moments(initial_blue: int, initial_red: int) -> tuple[float, float]:
    """(mean, variance) computed directly from the raw initial populations.

    This is the unshifted b0/(b0+r0) form. It differs from the exact moments
    of the shifted-shape law returned by ``beta_moments`` (those use
    b0+1, r0+1); both are exposed so the two conventions can be compared.
    """
    total = initial_blue + initial_red
    if total <= 0:
        raise ValueError("population-ratio moments need at least one initial ball")
    mean = initial_blue / total
    var = initial_blue * initial_red / (total**2 * (total + 1.0))
    return mean, var


def invert_cdf(cdf, xi: float, lo: float = 0.0, hi: float = 1.0) -> float:
    """Solve cdf(t) = xi on [lo, hi] by bracketed root finding.

    The returned float is snapped to whichever neighbouring double gives the
    smallest |cdf(t) - xi|, so analytically exact quantiles (for example the
    uniform case) come back exactly.
    """
    if not 0.0 < xi < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {xi}")
    f_lo = cdf(lo) - xi
    f_hi = cdf(hi) - xi
    if f_lo > 0.0 or f_hi < 0.0:
        raise QuantileError(
            f"no bracket: cdf({lo})-xi={f_lo:.3e}, cdf({hi})-xi={f_hi:.3e}"
        )
    try:
        root = brentq(lambda t: cdf(t) - xi, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
    except Exception as exc:
        raise QuantileError(
            f"root finding failed on [{lo}, {hi}] at level {xi}: {exc}"
        ) from exc
    candidates = (np.nextafter(root, lo), root, np.nextafter(root, hi))
    errors = [abs(float(cdf(c)) - xi) for c in candidates]
    best = candidates[int(np.argmin(errors))]
    if min(errors) > QUANTILE_CDF_TOL:
        raise QuantileError(
            f"converged point misses target: |cdf(t)-xi|={min(errors):.3e} "
            f"at t={best!r}, xi={xi}"
        )
    return float(best)


def beta_quantile(xi: float, params: BetaParams) -> float:
    """Value t with beta_cdf(t) = xi, to within QUANTILE_CDF_TOL."""
    return invert_cdf(lambda t: float(beta_cdf(t, params)), xi)


class BetaModel:
    """pdf/cdf/quantile bundle for one shape configuration."""

    def __init__(self, params: BetaParams):
        self.params = params

    def pdf(self, t):
        return beta_pdf(t, self.params)

    def cdf(self, t):
        return beta_cdf(t, self.params)

    def quantile(self, xi: float) -> float:
        return beta_quantile(xi, self.params)

    def moments(self) -> tuple[float, float]:
        return beta_moments(self.params)

    def describe(self) -> str:
        p = self.params
        return f"beta(beta={p.beta!r},rho={p.rho!r},epsilon={p.epsilon!r})"


# ---------------------------------------------------------------------------
# Poisson mixture
# ---------------------------------------------------------------------------


def poisson_weights(lam: float, truncation_mass: float) -> np.ndarray:
    """Poisson(lam) masses truncated to cumulative tail <= truncation_mass,
    renormalized to sum to one."""
    if lam < 0:
        raise ValueError("Poisson mean must be non-negative")
    if lam == 0.0:
        return np.array([1.0])
    target = 1.0 - truncation_mass
    n_max = int(lam + 12.0 * math.sqrt(lam) + 24.0)
    while True:
        n = np.arange(n_max + 1)
        logw = n * math.log(lam) - lam - gammaln(n + 1.0)
        w = np.exp(logw)
        cum = np.cumsum(w)
        hit = np.nonzero(cum >= target)[0]
        if hit.size:
            w = w[: hit[0] + 1]
            return w / w.sum()
        n_max *= 2


def _lambda_tables(spec: MixtureSpec) -> list[np.ndarray]:
    return [poisson_weights(lam, spec.truncation_mass) for lam in spec.grid()]


def mixture_components(spec: MixtureSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flattened (blue shape, red shape, weight) arrays of the mixture.

    Shapes are photon count + 1; weights average the per-mean Poisson outer
    products uniformly over the grid and sum to 1 up to rounding.
    """
    tables = _lambda_tables(spec)
    size = max(len(w) for w in tables)
    joint = np.zeros((size, size))
    for w in tables:
        joint[: len(w), : len(w)] += np.outer(w, w)
    joint /= len(tables)
    n_idx, m_idx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    keep = joint.ravel() > 0.0
    return (
        (n_idx.ravel()[keep] + 1.0),
        (m_idx.ravel()[keep] + 1.0),
        joint.ravel()[keep],
    )


def mixture_pdf(t, spec: MixtureSpec):
    """Density of the photon-number mixture at t."""
    t = _check_domain(t)
    a, b, w = mixture_components(spec)
    scalar = t.ndim == 0
    tv = np.atleast_1d(t)
    out = np.zeros_like(tv)
    interior = (tv > 0.0) & (tv < 1.0)
    if np.any(interior):
        ti = tv[interior]
        logpdf = (
            (a - 1.0)[:, None] * np.log(ti)[None, :]
            + (b - 1.0)[:, None] * np.log1p(-ti)[None, :]
            - betaln(a, b)[:, None]
        )
        out[interior] = w @ np.exp(logpdf)
    for edge in (tv == 0.0, tv == 1.0):
        if np.any(edge):
            vals = _mixture_pdf_edge(float(tv[edge][0]), a, b, w)
            out[edge] = vals
    return out[0] if scalar else out


def _mixture_pdf_edge(t_edge: float, a, b, w) -> float:
    total = 0.0
    for ai, bi, wi in zip(a, b, w):
        shape = ai if t_edge == 0.0 else bi
        if shape < 1.0:
            return math.inf
        if shape == 1.0:
            total += wi * math.exp(-betaln(ai, bi))
    return total


def mixture_cdf(t, spec: MixtureSpec):
    """Mixture distribution function: weighted regularized incomplete betas."""
    t = _check_domain(t)
    a, b, w = mixture_components(spec)
    tv = np.atleast_1d(t)
    vals = w @ betainc(a[:, None], b[:, None], tv[None, :])
    return float(vals[0]) if t.ndim == 0 else vals


def mixture_quantile(xi: float, spec: MixtureSpec) -> float:
    """Value t with mixture_cdf(t) = xi, to within QUANTILE_CDF_TOL."""
    a, b, w = mixture_components(spec)

    def cdf(t):
        return float(w @ betainc(a, b, t))

    return invert_cdf(cdf, xi)


class MixtureModel:
    """pdf/cdf/quantile bundle for one mixture configuration."""

    def __init__(self, spec: MixtureSpec):
        self.spec = spec
        self._components = mixture_components(spec)

    def pdf(self, t):
        return mixture_pdf(t, self.spec)

    def cdf(self, t):
        t = _check_domain(t)
        a, b, w = self._components
        tv = np.atleast_1d(t)
        vals = w @ betainc(a[:, None], b[:, None], tv[None, :])
        return float(vals[0]) if t.ndim == 0 else vals

    def quantile(self, xi: float) -> float:
        a, b, w = self._components
        return invert_cdf(lambda t: float(w @ betainc(a, b, t)), xi)

    def describe(self) -> str:
        s = self.spec
        return (
            f"mixture(lambda=[{s.lambda_min!r},{s.lambda_max!r}],"
            f"grid={s.lambda_grid},truncation={s.truncation_mass!r})"
        )


# ---------------------------------------------------------------------------
# quantile tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantileTable:
    """Thresholds splitting [0, 1] into 2**n_bits equal-probability cells."""

    n_bits: int
    thresholds: tuple[float, ...]

    def __post_init__(self):
        expected = (1 << self.n_bits) - 1
        if self.n_bits < 1:
            raise ValueError("n_bits must be >= 1")
        if len(self.thresholds) != expected:
            raise ValueError(
                f"{self.n_bits}-bit table needs {expected} thresholds, got {len(self.thresholds)}"
            )
        arr = np.asarray(self.thresholds)
        if np.any(arr <= 0.0) or np.any(arr >= 1.0) or np.any(np.diff(arr) <= 0.0):
            raise ValueError("thresholds must be strictly increasing inside (0, 1)")


def build_quantile_table(model, n_bits: int) -> QuantileTable:
    """Thresholds at the model quantiles j/2**n_bits, j = 1 .. 2**n_bits - 1."""
    cells = 1 << n_bits
    thresholds = tuple(model.quantile(j / cells) for j in range(1, cells))
    return QuantileTable(n_bits=n_bits, thresholds=thresholds)


def save_quantile_table(table: QuantileTable, path, model_desc: str = "") -> None:
    lines = [
        "# quantile-table v1",
        f"# n_bits={table.n_bits}",
        f"# model={model_desc}",
        f"# solver_cdf_tol={QUANTILE_CDF_TOL!r}",
    ]
    lines += [repr(t) for t in table.thresholds]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_quantile_table(path) -> QuantileTable:
    n_bits = None
    thresholds = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# n_bits="):
                    n_bits = int(line.split("=", 1)[1])
                continue
            thresholds.append(float(line))
    if n_bits is None:
        raise ValueError(f"{path}: missing n_bits header")
    return QuantileTable(n_bits=n_bits, thresholds=tuple(thresholds))
