"""Driving Lévy process: NIG cumulants, increment sampling and a Lévy-measure quadrature.

The driver ``H`` is a pure-jump normal inverse Gaussian process (optionally with
a Brownian component of variance rate ``c``).  Under the terminal measure it is
a martingale, so the simulation consumes *centred* increments and the drift
formulas use the compensated jump cumulant

    kappa_J(u) = int (e^{ux} - 1 - ux) F(dx) = kappa_NIG(u) - u * mean.

For the symmetric parameterisation (beta = mu = 0) both cumulants coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import k1e

__all__ = [
    "CumulantDomainError",
    "QuadratureError",
    "NigParams",
    "LevyDriverSpec",
    "LevyMeasureQuadrature",
    "nig_cumulant",
    "nig_mean",
    "nig_variance",
    "nig_levy_density",
    "sample_increment",
    "sample_increments",
    "jump_integral_quadrature",
]


class CumulantDomainError(ValueError):
    """Cumulant argument outside the exponential-moment strip."""


class QuadratureError(RuntimeError):
    """Node refinement of the Lévy-measure quadrature did not stabilise."""


@dataclass(frozen=True)
class NigParams:
    """NIG parameters per unit time.

    ``alpha`` controls tail heaviness, ``beta`` asymmetry, ``mu`` location and
    ``delta_bar`` scale.  Defaults are the symmetric unit-variance driver
    (alpha = delta_bar = 12).
    """

    alpha: float = 12.0
    beta: float = 0.0
    mu: float = 0.0
    delta_bar: float = 12.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.alpha, self.beta, self.mu, self.delta_bar)):
            raise ValueError("NIG parameters must be finite")
        if self.alpha <= 0.0:
            raise ValueError("NIG requires alpha > 0")
        if self.delta_bar <= 0.0:
            raise ValueError("NIG requires delta_bar > 0")
        if abs(self.beta) >= self.alpha:
            raise ValueError("NIG requires |beta| < alpha")

    @property
    def gamma(self) -> float:
        return math.sqrt(self.alpha**2 - self.beta**2)


def _check_domain(params: NigParams, u: np.ndarray) -> None:
    if np.any(np.abs(params.beta + u) > params.alpha):
        bad = np.asarray(u)[np.abs(params.beta + u) > params.alpha].ravel()[0]
        raise CumulantDomainError(
            f"cumulant argument {float(bad):.6g} outside |beta + u| <= alpha = {params.alpha:g}"
        )


def nig_cumulant(params: NigParams, u):
    """kappa(u) = mu u + delta_bar (gamma - sqrt(alpha^2 - (beta + u)^2)).

    Accepts scalars or arrays; raises :class:`CumulantDomainError` outside the
    strip |beta + u| <= alpha.
    """
    arr = np.asarray(u, dtype=float)
    _check_domain(params, arr)
    a, b = params.alpha, params.beta
    out = params.mu * arr + params.delta_bar * (params.gamma - np.sqrt(a * a - (b + arr) ** 2))
    return float(out) if out.ndim == 0 else out


def nig_mean(params: NigParams) -> float:
    """kappa'(0) = mu + delta_bar beta / gamma."""
    return params.mu + params.delta_bar * params.beta / params.gamma


def nig_variance(params: NigParams) -> float:
    """kappa''(0) = delta_bar alpha^2 / gamma^3 (delta_bar / alpha when beta = 0)."""
    g = params.gamma
    return params.delta_bar * params.alpha**2 / g**3


def nig_levy_density(params: NigParams, x):
    """NIG Lévy density (alpha delta_bar / pi) e^{beta x} K_1(alpha |x|) / |x|."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    # k1e(z) = K_1(z) e^{z}; fold the exponentials to avoid under/overflow.
    return (
        params.alpha
        * params.delta_bar
        / math.pi
        * k1e(params.alpha * ax)
        * np.exp(params.beta * x - params.alpha * ax)
        / ax
    )


@dataclass(frozen=True)
class LevyDriverSpec:
    """Driving process: NIG jumps plus an optional Brownian part with rate ``c``."""

    nig: NigParams = field(default_factory=NigParams)
    c: float = 0.0
    kind: str = "nig"

    def __post_init__(self) -> None:
        if self.kind != "nig":
            raise ValueError(f"unsupported driver kind {self.kind!r}")
        if not self.c >= 0.0:
            raise ValueError("diffusion coefficient c must be >= 0")

    @property
    def em_bound_M(self) -> float:
        """Exponential-moment bound: the cumulant strip is |u| <= alpha - |beta|."""
        return self.nig.alpha - abs(self.nig.beta)

    def jump_cumulant(self, u):
        """Compensated jump cumulant int (e^{ux} - 1 - ux) F(dx)."""
        out = nig_cumulant(self.nig, u) - nig_mean(self.nig) * np.asarray(u, dtype=float)
        return float(out) if np.ndim(out) == 0 else out

    def cumulant(self, u):
        """Cumulant of the martingale driver: c u^2 / 2 + jump cumulant."""
        arr = np.asarray(u, dtype=float)
        out = 0.5 * self.c * arr**2 + self.jump_cumulant(arr)
        return float(out) if np.ndim(out) == 0 else out


def sample_increment(params: NigParams, dt: float, rng: np.random.Generator) -> float:
    """One NIG increment H_{t+dt} - H_t by inverse-Gaussian subordination."""
    return float(sample_increments(params, dt, rng, 1)[0])


def sample_increments(
    params: NigParams,
    dt,
    rng: np.random.Generator,
    size,
    *,
    antithetic: bool = False,
    centred: bool = False,
) -> np.ndarray:
    """Draw NIG increments over ``dt`` (scalar or array broadcast against ``size``).

    X = mu dt + beta V + sqrt(V) Z with V ~ IG(mean delta_bar dt / gamma,
    shape (delta_bar dt)^2).  With ``antithetic`` the last axis of ``size`` is
    split in two halves sharing V and with Z mirrored.  ``centred`` subtracts
    the mean dt * kappa'(0).
    """
    dt_arr = np.asarray(dt, dtype=float)
    if np.any(dt_arr <= 0.0):
        raise ValueError("dt must be positive")
    size = (size,) if np.isscalar(size) else tuple(size)
    if antithetic:
        if size[-1] % 2:
            raise ValueError("antithetic sampling needs an even number of draws")
        half = size[:-1] + (size[-1] // 2,)
    else:
        half = size
    dtb = np.broadcast_to(dt_arr.reshape(dt_arr.shape + (1,) * (len(half) - dt_arr.ndim)), half)
    scale = params.delta_bar * dtb
    v = rng.wald(scale / params.gamma, scale**2)
    z = rng.standard_normal(half)
    shift = params.mu * dtb + params.beta * v
    if centred:
        shift = shift - nig_mean(params) * dtb
    root = np.sqrt(v) * z
    if antithetic:
        return np.concatenate([shift + root, shift - root], axis=-1)
    return shift + root


@dataclass(frozen=True)
class LevyMeasureQuadrature:
    """Gauss-Legendre rule on geometric panels over {r0 < |x| < R}, plus a Taylor ball.

    Inside |x| <= ``ball`` the integrand is replaced by its Taylor polynomial
    of orders 2..4 (coefficients by five-point central differences), integrated
    against x^k F(dx), which are smooth.  ``nodes``/``weights`` hold the
    outer rule with the Lévy density folded into the weights.
    """

    nodes: np.ndarray
    weights: np.ndarray
    ball: float
    radius: float
    ball_x2: float
    ball_x3: float
    ball_x4: float
    n_per_panel: int

    @classmethod
    def build(
        cls,
        params: NigParams,
        *,
        n_per_panel: int = 24,
        ball: float = 1e-3,
        panel_ratio: float = 2.0,
        radius: float | None = None,
    ) -> "LevyMeasureQuadrature":
        if radius is None:
            # Integrands grow at most like e^{0.9 M |x|}; leaves e^{-40} in the tail.
            radius = 400.0 / (params.alpha - abs(params.beta))
        n_panels = int(math.ceil(math.log(radius / ball) / math.log(panel_ratio)))
        edges = ball * panel_ratio ** np.arange(n_panels + 1)
        edges[-1] = radius
        t, wt = np.polynomial.legendre.leggauss(n_per_panel)
        lo, hi = edges[:-1, None], edges[1:, None]
        pos = (0.5 * (hi - lo) * t + 0.5 * (hi + lo)).ravel()
        pos_w = (0.5 * (hi - lo) * wt).ravel()
        nodes = np.concatenate([-pos[::-1], pos])
        weights = np.concatenate([pos_w[::-1], pos_w]) * nig_levy_density(params, nodes)

        # Ball moments: x^k F(dx) = x^{k-1} sign * smooth kernel; GL on [0, ball].
        tb, wb = np.polynomial.legendre.leggauss(40)
        xb = 0.5 * ball * (tb + 1.0)
        wb = 0.5 * ball * wb
        dens_p = nig_levy_density(params, xb)
        dens_m = nig_levy_density(params, -xb)
        x2 = float(np.sum(wb * xb**2 * (dens_p + dens_m)))
        x3 = float(np.sum(wb * xb**3 * (dens_p - dens_m)))
        x4 = float(np.sum(wb * xb**4 * (dens_p + dens_m)))
        return cls(nodes, weights, ball, radius, x2, x3, x4, n_per_panel)

    def integrate(self, integrand: Callable[[np.ndarray], np.ndarray]) -> float:
        h = self.ball
        fm2, fm1, f0, fp1, fp2 = np.asarray(integrand(np.array([-2 * h, -h, 0.0, h, 2 * h])), dtype=float)
        g2 = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h**2)
        g3 = (fp2 - 2 * fp1 + 2 * fm1 - fm2) / (2 * h**3)
        g4 = (fp2 - 4 * fp1 + 6 * f0 - 4 * fm1 + fm2) / h**4
        inner = g2 / 2.0 * self.ball_x2 + g3 / 6.0 * self.ball_x3 + g4 / 24.0 * self.ball_x4
        outer = float(np.sum(self.weights * integrand(self.nodes)))
        return inner + outer


_QUADRATURE_CACHE: dict[tuple, tuple[LevyMeasureQuadrature, LevyMeasureQuadrature]] = {}


def jump_integral_quadrature(
    spec: LevyDriverSpec,
    integrand: Callable[[np.ndarray], np.ndarray],
    *,
    tol: float = 1e-10,
) -> float:
    """Integral of ``integrand`` against the NIG Lévy measure.

    The integrand must be vectorised, O(x^2) at the origin and grow slower
    than e^{M |x|}.  The result of the base rule is compared with a rule of
    doubled node count, a smaller Taylor ball and a wider truncation radius;
    :class:`QuadratureError` is raised if they differ by more than ``tol``
    (absolute, scaled by max(1, |value|)).
    """
    key = (spec.nig.alpha, spec.nig.beta, spec.nig.delta_bar)
    if key not in _QUADRATURE_CACHE:
        _QUADRATURE_CACHE[key] = (
            LevyMeasureQuadrature.build(spec.nig, n_per_panel=24),
            LevyMeasureQuadrature.build(
                spec.nig, n_per_panel=48, ball=5e-4, radius=600.0 / (spec.nig.alpha - abs(spec.nig.beta))
            ),
        )
    coarse, fine = _QUADRATURE_CACHE[key]
    a = coarse.integrate(integrand)
    b = fine.integrate(integrand)
    if not (math.isfinite(a) and math.isfinite(b)) or abs(a - b) > tol * max(1.0, abs(b)):
        raise QuadratureError(f"quadrature did not stabilise: {a!r} vs {b!r}")
    return b
