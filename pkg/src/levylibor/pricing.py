"""Terminal-measure payoffs, Black-76 prices and implied volatility.

Every payoff takes the forward rates observed at the product's expiry T_i,
``rates[..., k] = L(T_i, T_{i+k})`` for k = 0..N-i, and returns the
undiscounted-by-simulation value whose terminal-measure mean is the price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from .market import MarketModel

__all__ = [
    "Caplet",
    "Swaption",
    "Fra",
    "RateObservation",
    "Product",
    "McEstimate",
    "NoSolutionError",
    "caplet_payoff",
    "swaption_payoff",
    "swaption_payoff_bond_form",
    "fra_payoff",
    "payoff",
    "black76_price",
    "implied_vol",
    "black_inputs",
    "product_implied_vol",
    "deterministic_price",
]


@dataclass(frozen=True)
class Caplet:
    strike: float
    expiry: int

    kind = "caplet"

    def __post_init__(self) -> None:
        if self.expiry < 1:
            raise ValueError("caplet expiry index must be >= 1")
        if not self.strike > 0.0:
            raise ValueError("caplet strike must be positive")

    @property
    def label(self) -> str:
        return f"caplet[{self.expiry}]@{self.strike:g}"


@dataclass(frozen=True)
class Swaption:
    """Payer swaption on the swap from T_start to T_end."""

    strike: float
    start: int
    end: int

    kind = "swaption"

    def __post_init__(self) -> None:
        if not 1 <= self.start < self.end:
            raise ValueError("swaption needs 1 <= start < end")
        if not self.strike > 0.0:
            raise ValueError("swaption strike must be positive")

    @property
    def expiry(self) -> int:
        return self.start

    @property
    def label(self) -> str:
        return f"swaption[{self.start}-{self.end}]@{self.strike:g}"


@dataclass(frozen=True)
class Fra:
    """Forward rate agreement receiving delta_i (K - L(T_i, T_i)) at T_{i+1}."""

    strike: float
    expiry: int

    kind = "fra"

    def __post_init__(self) -> None:
        if self.expiry < 1:
            raise ValueError("FRA expiry index must be >= 1")

    @property
    def label(self) -> str:
        return f"fra[{self.expiry}]@{self.strike:g}"


@dataclass(frozen=True)
class RateObservation:
    """L(T_i, T_i) itself; its terminal-measure mean is L(0, T_i) only for i = N."""

    expiry: int
    strike: float = float("nan")

    kind = "rate"

    @property
    def label(self) -> str:
        return f"rate[{self.expiry}]"


Product = Union[Caplet, Swaption, Fra, RateObservation]


@dataclass
class McEstimate:
    product: Product
    price: float
    std_error: float
    n_paths: int
    implied_vol: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def half_width(self) -> float:
        """95% confidence half-width, 1.96 standard errors."""
        return 1.96 * self.std_error


class NoSolutionError(ValueError):
    """Price outside the no-arbitrage bounds of the Black formula."""


def _check_rates(rates: np.ndarray, model: MarketModel, expiry: int) -> np.ndarray:
    r = np.asarray(rates, dtype=float)
    need = model.n_rates - expiry + 1
    if r.shape[-1] != need:
        raise ValueError(f"expected {need} rate observations at T_{expiry}, got {r.shape[-1]}")
    return r


def _growth(rates: np.ndarray, model: MarketModel, expiry: int) -> np.ndarray:
    """1 + delta_l L(T_i, T_l) for l = i..N."""
    return 1.0 + model.accruals[expiry : model.n_rates + 1] * rates


def caplet_payoff(rates, strike: float, expiry: int, model: MarketModel) -> np.ndarray:
    """delta_i B(0, T_*) prod_{l=i+1}^N (1 + delta_l L_l) (L_i - K)^+."""
    r = _check_rates(rates, model, expiry)
    g = _growth(r, model, expiry)
    d = model.accruals[expiry]
    return d * model.curve.terminal_bond * np.prod(g[..., 1:], axis=-1) * np.maximum(r[..., 0] - strike, 0.0)


def fra_payoff(rates, strike: float, expiry: int, model: MarketModel) -> np.ndarray:
    """delta_i B(0, T_*) prod_{l=i+1}^N (1 + delta_l L_l) (K - L_i)."""
    r = _check_rates(rates, model, expiry)
    g = _growth(r, model, expiry)
    d = model.accruals[expiry]
    return d * model.curve.terminal_bond * np.prod(g[..., 1:], axis=-1) * (strike - r[..., 0])


def _coupons(strike: float, start: int, end: int, model: MarketModel) -> np.ndarray:
    # c_k for k = start+1..end: the coupon paid at T_k accrues over [T_{k-1}, T_k]
    acc = model.accruals[start:end]
    c = acc * strike
    c[-1] += 1.0
    return c


def swaption_payoff(rates, strike: float, start: int, end: int, model: MarketModel) -> np.ndarray:
    """B(0, T_*) (-sum_{k=i}^{m} c_k prod_{l=k}^N (1 + delta_l L_l))^+ with c_i = -1."""
    if not 1 <= start < end <= model.n_rates:
        raise ValueError("swaption needs 1 <= start < end <= N")
    r = _check_rates(rates, model, start)
    g = _growth(r, model, start)
    # tail[k] = prod_{l=start+k}^{N} g_l
    tail = np.flip(np.cumprod(np.flip(g, axis=-1), axis=-1), axis=-1)
    c = _coupons(strike, start, end, model)
    value = tail[..., 0] - np.sum(c * tail[..., 1 : end - start + 1], axis=-1)
    return model.curve.terminal_bond * np.maximum(value, 0.0)


def swaption_payoff_bond_form(rates, strike: float, start: int, end: int, model: MarketModel) -> np.ndarray:
    """Same payoff via the time-T_i coupon-bond put and the terminal density."""
    r = _check_rates(rates, model, start)
    g = _growth(r, model, start)
    bonds = 1.0 / np.cumprod(g[..., : end - start], axis=-1)  # B(T_i, T_k), k = i+1..m
    c = _coupons(strike, start, end, model)
    put = np.maximum(1.0 - np.sum(c * bonds, axis=-1), 0.0)
    return model.curve.terminal_bond * np.prod(g, axis=-1) * put


def payoff(product: Product, rates, model: MarketModel) -> np.ndarray:
    if isinstance(product, Caplet):
        return caplet_payoff(rates, product.strike, product.expiry, model)
    if isinstance(product, Fra):
        return fra_payoff(rates, product.strike, product.expiry, model)
    if isinstance(product, Swaption):
        return swaption_payoff(rates, product.strike, product.start, product.end, model)
    if isinstance(product, RateObservation):
        return np.asarray(rates, dtype=float)[..., 0]
    raise TypeError(f"unknown product {product!r}")


def deterministic_price(product: Product, model: MarketModel) -> float:
    """Time-0 value when all rates stay at their initial values (zero volatility)."""
    i = product.expiry
    b = model.curve.discount
    l0 = model.curve.forwards[i - 1]
    d = model.accruals[i]
    if isinstance(product, Caplet):
        return d * b[i + 1] * max(l0 - product.strike, 0.0)
    if isinstance(product, Fra):
        return d * b[i + 1] * (product.strike - l0)
    if isinstance(product, Swaption):
        k = np.arange(product.start + 1, product.end + 1)
        annuity = float(np.sum(model.accruals[k - 1] * b[k]))
        return max(b[product.start] - b[product.end] - product.strike * annuity, 0.0)
    if isinstance(product, RateObservation):
        return float(l0)
    raise TypeError(f"unknown product {product!r}")


# --------------------------------------------------------------------------
# Black-76


def black76_price(forward: float, strike: float, vol: float, expiry: float, annuity: float) -> float:
    """annuity * (F N(d1) - K N(d2)); the intrinsic value when vol or expiry is zero."""
    if vol < 0.0:
        raise ValueError("volatility must be non-negative")
    sd = vol * math.sqrt(expiry)
    if sd == 0.0:
        return annuity * max(forward - strike, 0.0)
    d1 = (math.log(forward / strike) + 0.5 * sd * sd) / sd
    return annuity * (forward * norm.cdf(d1) - strike * norm.cdf(d1 - sd))


def implied_vol(
    price: float,
    forward: float,
    strike: float,
    expiry: float,
    annuity: float,
    *,
    lo: float = 1e-8,
    hi: float = 5.0,
    price_tol: float = 1e-12,
) -> float:
    """Black-76 volatility reproducing ``price``; 0 at the intrinsic value."""
    intrinsic = annuity * max(forward - strike, 0.0)
    upper = annuity * forward
    if not math.isfinite(price) or price < intrinsic - price_tol or price >= upper:
        raise NoSolutionError(f"price {price!r} outside [{intrinsic!r}, {upper!r})")
    if price <= intrinsic + price_tol * annuity or price <= black76_price(forward, strike, lo, expiry, annuity):
        return 0.0
    f = lambda v: black76_price(forward, strike, v, expiry, annuity) - price  # noqa: E731
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 100.0:
            raise NoSolutionError(f"no volatility below {hi:g} reaches price {price!r}")
    return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def black_inputs(product: Product, model: MarketModel) -> tuple[float, float, float] | None:
    """(forward, annuity, expiry time) for Black quoting, or None for linear products.

    Swaptions use the flat-annuity convention: forward swap rate
    (B(0,T_i) - B(0,T_m)) / A with A = sum_k delta_{k-1} B(0, T_k).
    """
    b = model.curve.discount
    t = float(model.tenor.dates[product.expiry])
    if isinstance(product, Caplet):
        i = product.expiry
        return float(model.curve.forwards[i - 1]), float(model.accruals[i] * b[i + 1]), t
    if isinstance(product, Swaption):
        k = np.arange(product.start + 1, product.end + 1)
        annuity = float(np.sum(model.accruals[k - 1] * b[k]))
        return float((b[product.start] - b[product.end]) / annuity), annuity, t
    return None


def product_implied_vol(product: Product, model: MarketModel, price: float) -> float | None:
    """Implied Black volatility of a Monte Carlo price; NaN when outside the bounds."""
    inputs = black_inputs(product, model)
    if inputs is None:
        return None
    forward, annuity, t = inputs
    try:
        return implied_vol(price, forward, product.strike, t, annuity)
    except NoSolutionError:
        return float("nan")
