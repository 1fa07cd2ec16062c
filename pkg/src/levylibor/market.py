"""Tenor structure, initial curve, volatility structure and the model conditions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .driver import LevyDriverSpec

__all__ = [
    "TenorStructure",
    "InitialCurve",
    "VolatilityStructure",
    "MarketModel",
    "Check",
    "ValidationReport",
    "initial_forward_rates",
    "libor_weight",
    "check_conditions",
    "validate_model",
    "reference_model",
]


@dataclass(frozen=True)
class TenorStructure:
    """Dates 0 = T_0 < T_1 < ... < T_{N+1} in year fractions."""

    dates: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.dates, dtype=float)
        if d.ndim != 1 or d.size < 2:
            raise ValueError("tenor needs at least T_0 and T_1")
        if d[0] != 0.0:
            raise ValueError("tenor must start at T_0 = 0")
        if np.any(np.diff(d) <= 0.0):
            raise ValueError("tenor dates must be strictly increasing")
        d.setflags(write=False)
        object.__setattr__(self, "dates", d)

    @classmethod
    def uniform(cls, n_rates: int, accrual: float = 0.5) -> "TenorStructure":
        return cls(accrual * np.arange(n_rates + 2))

    @property
    def n_rates(self) -> int:
        """N: number of simulated forward rates L(., T_1) .. L(., T_N)."""
        return self.dates.size - 2

    @property
    def accruals(self) -> np.ndarray:
        """delta_i = T_{i+1} - T_i for i = 0..N."""
        return np.diff(self.dates)

    @property
    def maturity(self) -> float:
        """T_* = T_{N+1}."""
        return float(self.dates[-1])


@dataclass(frozen=True)
class InitialCurve:
    """Discount factors B(0, T_i), i = 0..N+1 (B(0, T_0) = 1), and forwards L(0, T_i), i = 1..N."""

    discount: np.ndarray
    forwards: np.ndarray

    def bond(self, i: int) -> float:
        return float(self.discount[i])

    @property
    def terminal_bond(self) -> float:
        return float(self.discount[-1])


def initial_forward_rates(discount, accruals) -> InitialCurve:
    """Forward LIBORs from discount factors B(0, T_1), .., B(0, T_{N+1}).

    ``accruals`` are delta_0..delta_N (or delta_1..delta_N).  The discount
    factors must be strictly positive and strictly decreasing.
    """
    b = np.asarray(discount, dtype=float)
    acc = np.asarray(accruals, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise ValueError("need at least B(0, T_1) and B(0, T_2)")
    if np.any(b <= 0.0):
        raise ValueError("discount factors must be strictly positive")
    if np.any(np.diff(b) >= 0.0):
        raise ValueError("discount factors must be strictly decreasing")
    n = b.size - 1
    if acc.size == n + 1:
        acc = acc[1:]
    if acc.size != n:
        raise ValueError(f"expected {n} accruals for {b.size} discount factors, got {acc.size}")
    fwd = (b[:-1] / b[1:] - 1.0) / acc
    full = np.concatenate([[1.0], b])
    full.setflags(write=False)
    fwd.setflags(write=False)
    return InitialCurve(full, fwd)


def libor_weight(rate_value, accrual):
    """w = delta L / (1 + delta L), the measure-change weight of a forward rate."""
    x = np.asarray(rate_value, dtype=float) * accrual
    if np.any(1.0 + x <= 0.0):
        raise ValueError("1 + delta L must be positive")
    out = x / (1.0 + x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class VolatilityStructure:
    """Piecewise-constant loadings lambda(s, T_i).

    ``table[j, i-1]`` is lambda(s, T_i) for s in [T_j, T_{j+1}), j = 0..N-1.
    Entries with j >= i (rate already fixed) are forced to zero.
    """

    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.array(self.table, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError("volatility table must be N x N (interval x rate)")
        t = np.triu(t)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @classmethod
    def flat(cls, n_rates: int, vol: float = 0.18) -> "VolatilityStructure":
        return cls(np.full((n_rates, n_rates), vol))

    @property
    def n_rates(self) -> int:
        return self.table.shape[1]

    def loading(self, interval: int) -> np.ndarray:
        """lambda(s, T_1..T_N) for s in tenor interval ``interval``."""
        return self.table[interval]

    def __call__(self, s: float, i: int, tenor: TenorStructure) -> float:
        """lambda(s, T_i), zero for s > T_i."""
        if s > tenor.dates[i]:
            return 0.0
        j = int(np.searchsorted(tenor.dates, s, side="right") - 1)
        j = min(j, self.n_rates - 1)
        return float(self.table[j, i - 1])


@dataclass(frozen=True)
class MarketModel:
    tenor: TenorStructure
    curve: InitialCurve
    vols: VolatilityStructure
    driver: LevyDriverSpec = field(default_factory=LevyDriverSpec)

    def __post_init__(self) -> None:
        n = self.tenor.n_rates
        if self.curve.forwards.size != n or self.vols.n_rates != n:
            raise ValueError("tenor, curve and volatility sizes disagree")

    @property
    def n_rates(self) -> int:
        return self.tenor.n_rates

    @property
    def accruals(self) -> np.ndarray:
        return self.tenor.accruals


@dataclass(frozen=True)
class Check:
    code: str
    passed: bool
    slack: float | None = None
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        slack = "" if self.slack is None else f" slack={self.slack:.6g}"
        return f"{status} {self.code}{slack} {self.detail}".rstrip()


@dataclass
class ValidationReport:
    checks: list[Check]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, code: str) -> Check:
        for c in self.checks:
            if c.code == code:
                return c
        raise KeyError(code)

    def __str__(self) -> str:
        return "\n".join(c.line() for c in self.checks)


def check_conditions(
    tenor: TenorStructure,
    discount,
    vols: VolatilityStructure | None,
    driver: LevyDriverSpec,
) -> ValidationReport:
    """Check the model conditions on raw inputs without constructing a model.

    ``discount`` holds B(0, T_1)..B(0, T_{N+1}).  LR1 is evaluated on every
    tenor interval, which is exhaustive for piecewise-constant loadings.
    """
    checks: list[Check] = []
    n = tenor.n_rates
    if n < 1:
        checks.append(Check("EMPTY_TENOR", False, detail="no forward rates to simulate (N = 0)"))
        return ValidationReport(checks)

    b = np.asarray(discount, dtype=float)
    if b.size != n + 1:
        checks.append(Check("LR2", False, detail=f"expected {n + 1} discount factors, got {b.size}"))
    else:
        positive = bool(np.all(b > 0.0))
        diffs = np.diff(np.concatenate([[1.0], b]))
        decreasing = bool(np.all(diffs < 0.0))
        slack = float(-diffs.max())
        if positive and decreasing:
            checks.append(Check("LR2", True, slack, "discount factors positive and strictly decreasing"))
        else:
            why = "not strictly positive" if not positive else "not strictly decreasing"
            checks.append(Check("LR2", False, slack, f"discount factors {why}"))

    if vols is None or vols.n_rates != n:
        checks.append(Check("LR1", False, detail="volatility structure missing or of wrong size"))
    else:
        total = np.abs(vols.table).sum(axis=1).max()
        bound = driver.em_bound_M
        slack = float(bound - total)
        checks.append(
            Check(
                "LR1",
                bool(total <= bound),
                slack,
                f"max_s sum_i |lambda(s,T_i)| = {total:.6g} vs M = {bound:.6g}",
            )
        )
    return ValidationReport(checks)


def validate_model(model: MarketModel) -> ValidationReport:
    return check_conditions(model.tenor, model.curve.discount[1:], model.vols, model.driver)


def reference_model(
    n_rates: int = 20,
    *,
    accrual: float = 0.5,
    flat_rate: float = 0.04,
    vol: float = 0.18,
    driver: LevyDriverSpec | None = None,
) -> MarketModel:
    """Flat curve B(0,T) = exp(-flat_rate T), flat loadings, NIG(12, 0, 0, 12) driver."""
    tenor = TenorStructure.uniform(n_rates, accrual)
    curve = initial_forward_rates(np.exp(-flat_rate * tenor.dates[1:]), tenor.accruals)
    return MarketModel(tenor, curve, VolatilityStructure.flat(n_rates, vol), driver or LevyDriverSpec())
