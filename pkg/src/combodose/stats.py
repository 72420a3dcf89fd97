"""Numerical kernels shared by the designs.

Beta distribution helpers, the conjugate binomial update, weighted 2-D
isotonic regression (projection onto the matrix partial order), geometric
means, and the reproducible stream-based RNG contract used by the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of a Beta distribution."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"Beta shapes must be positive and finite, got ({self.a}, {self.b})")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def ess(self) -> float:
        """Prior effective sample size a+b."""
        return self.a + self.b


def beta_cdf(x: float, p: BetaParams) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not (isinstance(x, (int, float)) and math.isfinite(x)):
        raise ValueError(f"x must be finite, got {x!r}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0,1], got {x}")
    return float(special.betainc(p.a, p.b, x))


def posterior_update(prior: BetaParams, n: int, y: int) -> BetaParams:
    """Conjugate update of a Beta prior with y toxicities out of n patients."""
    if not 0 <= y <= n:
        raise ValueError(f"need 0 <= y <= n, got y={y}, n={n}")
    return BetaParams(prior.a + y, prior.b + (n - y))


def _pava(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted pool-adjacent-violators: L2 projection onto non-decreasing sequences."""
    n = len(values)
    level_val = np.empty(n)
    level_w = np.empty(n)
    level_len = np.empty(n, dtype=np.int64)
    top = -1
    for k in range(n):
        top += 1
        level_val[top] = values[k]
        level_w[top] = weights[k]
        level_len[top] = 1
        while top > 0 and level_val[top - 1] > level_val[top]:
            w = level_w[top - 1] + level_w[top]
            level_val[top - 1] = (
                level_w[top - 1] * level_val[top - 1] + level_w[top] * level_val[top]
            ) / w
            level_w[top - 1] = w
            level_len[top - 1] += level_len[top]
            top -= 1
    out = np.empty(n)
    pos = 0
    for t in range(top + 1):
        out[pos : pos + level_len[t]] = level_val[t]
        pos += level_len[t]
    return out


def _project_rows(m: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.empty_like(m)
    for i in range(m.shape[0]):
        out[i] = _pava(m[i], w[i])
    return out


def isotonic_2d(
    values: np.ndarray,
    weights: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 10_000,
) -> np.ndarray:
    """Weighted least-squares projection onto matrices non-decreasing
    along both rows and columns.

    Uses Dykstra's alternating projections between the row-monotone and
    column-monotone cones, each solved exactly by weighted PAVA. Zero
    weights are treated as negligibly small so the projection stays
    well-defined on untested cells.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.shape != w.shape or v.ndim != 2:
        raise ValueError("values and weights must be matrices of equal shape")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    if not np.any(w > 0):
        raise ValueError("at least one weight must be positive")
    w = np.maximum(w, 1e-12)

    x = v.copy()
    p = np.zeros_like(v)
    q = np.zeros_like(v)
    for _ in range(max_iter):
        r = _project_rows(x + p, w)
        p = x + p - r
        x = _project_rows((r + q).T, w.T).T
        q = r + q - x
        if np.max(np.abs(x - r)) < tol:
            break
    return x


def is_monotone_matrix(m: np.ndarray, tol: float = 1e-9) -> bool:
    """True if non-decreasing along rows and columns within tol."""
    return bool(
        np.all(np.diff(m, axis=0) >= -tol) and np.all(np.diff(m, axis=1) >= -tol)
    )


def geometric_mean(xs: Sequence[float]) -> float:
    """(prod x_i)^(1/N); zero if any entry is zero."""
    if len(xs) == 0:
        raise ValueError("geometric mean of an empty list")
    arr = np.asarray(xs, dtype=float)
    if np.any(arr < 0):
        raise ValueError("geometric mean needs non-negative inputs")
    if np.any(arr == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(arr))))


def _coerce_stream_id(value) -> int:
    """Stable integer id for stream labels (strings hash deterministically)."""
    if isinstance(value, str):
        import hashlib

        return int.from_bytes(hashlib.sha256(value.encode()).digest()[:4], "little")
    return int(value)


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Streams are pure values: the same (master_seed, stream_id) always yields
    the same generator, and distinct ids give statistically independent
    streams. Advancing is explicit, either by consuming a generator
    sequentially or by deriving a child stream.
    """

    master_seed: int
    stream_id: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "stream_id", tuple(_coerce_stream_id(x) for x in self.stream_id)
        )

    def child(self, *ids) -> "RngStream":
        return RngStream(self.master_seed, self.stream_id + tuple(ids))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.stream_id)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def integer_seed(self) -> int:
        """A 64-bit seed derived from this stream, for external samplers."""
        return int(self.seed_sequence().generate_state(1, np.uint64)[0])


def draw(stream: RngStream, dist: str, **params: float):
    """One reproducible draw from a named distribution.

    The stream is not advanced; derive a child stream for the next draw.
    """
    g = stream.generator()
    if dist == "uniform":
        return float(g.random())
    if dist == "bernoulli":
        p = params["p"]
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli p must lie in [0,1], got {p}")
        if p == 0.0:
            return 0
        if p == 1.0:
            return 1
        return int(g.random() < p)
    if dist == "beta":
        a, b = params["a"], params["b"]
        if a <= 0 or b <= 0:
            raise ValueError("beta shapes must be positive")
        return float(g.beta(a, b))
    if dist == "normal":
        mu, sigma = params.get("mu", 0.0), params.get("sigma", 1.0)
        if sigma <= 0:
            raise ValueError("normal sigma must be positive")
        return float(g.normal(mu, sigma))
    raise ValueError(f"unknown distribution {dist!r}")
