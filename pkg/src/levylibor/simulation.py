"""Monte Carlo evolution of log-LIBOR rates under the terminal measure.

Schemes
-------
EULER        Z(t+h) = Z(t) + b(t; Z(t)) h + lambda dH
PICARD       drift read from the auxiliary processes Z1, which carry the
             deterministic frozen drift; rates decouple
PC           trapezoidal drift with an Euler predictor for Z(t+h)
IPC          as PC but rates corrected from the last one backwards, each
             corrector reading the already-corrected later rates
PICARD_PC    PC with both drift evaluations read from Z1(t), Z1(t+h)
PICARD_IPC   IPC on the Picard drift; identical to PICARD_PC
FROZEN_LONG_STEP
             one step from 0 to each expiry with the exact drift frozen at
             the initial curve

All schemes in one run consume the same driver increments (common random
numbers).  Paths are simulated in fixed-size blocks; block ``b`` draws from a
Philox stream keyed by ``(seed, b)`` so results do not depend on how many
threads process the blocks.
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .driver import sample_increments
from .drift import DriftCost, DriftEvaluator, DriftMode, drift_cost
from .market import MarketModel, validate_model
from .pricing import McEstimate, Product, payoff, product_implied_vol

__all__ = [
    "Scheme",
    "SimulationGrid",
    "RngPolicy",
    "PathState",
    "LiborEngine",
    "SimulationError",
    "RunSpec",
    "RunResult",
    "ExperimentResult",
    "PairedDifference",
    "evolve_step_euler",
    "evolve_step_picard",
    "evolve_step_pc",
    "evolve_step_ipc",
    "draw_increments",
    "coarsen_increments",
    "simulate_block",
    "run_experiment",
    "run_simulation",
]


class Scheme(str, enum.Enum):
    EULER = "euler"
    PICARD = "picard"
    PC = "pc"
    IPC = "ipc"
    PICARD_PC = "picard_pc"
    PICARD_IPC = "picard_ipc"
    FROZEN_LONG_STEP = "frozen_long_step"

    @property
    def uses_proxies(self) -> bool:
        return self in (Scheme.PICARD, Scheme.PICARD_PC, Scheme.PICARD_IPC)


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationGrid:
    """Time grid: ``steps_per_tenor`` equal steps in every tenor interval up to T_N.

    With ``long_step`` every expiry T_e is reached by a single step from 0;
    the driver is then sampled once per tenor interval.
    """

    steps_per_tenor: int = 5
    long_step: bool = False

    def __post_init__(self) -> None:
        if self.steps_per_tenor < 1:
            raise ValueError("steps_per_tenor must be >= 1")

    def sample_steps(self, model: MarketModel) -> tuple[np.ndarray, np.ndarray]:
        """(interval index, step length) of every driver increment."""
        k = 1 if self.long_step else self.steps_per_tenor
        acc = model.accruals[: model.n_rates]
        intervals = np.repeat(np.arange(model.n_rates), k)
        return intervals, acc[intervals] / k

    def times(self, model: MarketModel) -> np.ndarray:
        _, h = self.sample_steps(model)
        return np.concatenate([[0.0], np.cumsum(h)])


@dataclass(frozen=True)
class RngPolicy:
    seed: int = 2024
    antithetic: bool = True
    block_size: int = 4096

    def __post_init__(self) -> None:
        if self.block_size < 2 or self.block_size % 2:
            raise ValueError("block_size must be even and >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def generator(self, block: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.seed, block]))

    def blocks(self, n_paths: int) -> list[int]:
        """Path counts of the successive blocks."""
        if n_paths < 1:
            raise ValueError("n_paths must be positive")
        if self.antithetic and n_paths % 2:
            raise ValueError("antithetic sampling needs an even number of paths")
        full, rest = divmod(n_paths, self.block_size)
        return [self.block_size] * full + ([rest] if rest else [])


@dataclass
class PathState:
    """Log-rates Z(t, T_1..T_N) per path and, for Picard schemes, the proxies Z1."""

    z: np.ndarray
    proxy: np.ndarray | None = None
    step: int = 0

    @classmethod
    def initial(cls, z0: np.ndarray, n_paths: int, with_proxy: bool) -> "PathState":
        z = np.tile(z0, (n_paths, 1))
        return cls(z, z.copy() if with_proxy else None, 0)


class LiborEngine:
    """Drift machinery for one model and drift mode.

    One :class:`DriftEvaluator` per tenor interval (live rates j..N-1) and
    the deterministic frozen drift per interval, used by the FROZEN mode and
    as the drift of the Picard proxies.
    """

    def __init__(self, model: MarketModel, mode: DriftMode | str, *, grouping: str = "value") -> None:
        self.model = model
        self.mode = DriftMode(mode)
        self.grouping = grouping
        n = model.n_rates
        self.n_rates = n
        self.z0 = np.log(model.curve.forwards)
        self.rate_accruals = model.accruals[1 : n + 1]
        kappa = model.driver.jump_cumulant
        order = self.mode.order
        self.evaluators = [
            DriftEvaluator(model.vols.loading(j)[j:], kappa, order=order, diffusion=model.driver.c, grouping=grouping)
            for j in range(n)
        ]
        w0 = self.weights(self.z0[None, :])
        self.frozen = [ev.all_drifts(w0[:, j:]) for j, ev in enumerate(self.evaluators)]

    def loadings(self, j: int) -> np.ndarray:
        return self.model.vols.loading(j)[j:]

    def weights(self, z: np.ndarray) -> np.ndarray:
        """w = delta L / (1 + delta L) for log-rates ``z`` of the trailing rates."""
        x = self.rate_accruals[self.n_rates - z.shape[1] :] * np.exp(z)
        return x / (1.0 + x)

    def drifts(self, j: int, z_live: np.ndarray) -> np.ndarray:
        """Drifts of the live rates of interval ``j`` given their log-values."""
        if self.mode is DriftMode.FROZEN:
            return np.broadcast_to(self.frozen[j], z_live.shape)
        return self.evaluators[j].all_drifts(self.weights(z_live))


def _live(state_z: np.ndarray, j: int) -> np.ndarray:
    return state_z[:, j:]


def _diffusion_term(engine: LiborEngine, j: int, dh: np.ndarray) -> np.ndarray:
    return engine.loadings(j) * dh[:, None]


def _advance_proxy(engine: LiborEngine, state: PathState, j: int, h: float, dh: np.ndarray) -> np.ndarray:
    z1 = state.proxy.copy()
    z1[:, j:] = z1[:, j:] + engine.frozen[j] * h + _diffusion_term(engine, j, dh)
    return z1


def evolve_step_euler(engine: LiborEngine, state: PathState, j: int, h: float, dh: np.ndarray) -> PathState:
    """Left-point log-Euler step over ``h`` inside tenor interval ``j``."""
    z = state.z
    b = engine.drifts(j, _live(z, j))
    out = z.copy()
    out[:, j:] = z[:, j:] + b * h + _diffusion_term(engine, j, dh)
    return PathState(out, state.proxy, state.step + 1)


def evolve_step_picard(
    engine: LiborEngine,
    state: PathState,
    j: int,
    h: float,
    dh: np.ndarray,
    order: Sequence[int] | None = None,
) -> PathState:
    """Picard step: the drift of every rate reads only the proxies Z1(t).

    ``order`` lists live-rate positions (0 = rate j+1) in the order they are
    updated; any order gives the same result.
    """
    if state.proxy is None:
        raise ValueError("Picard step needs proxy processes")
    z = state.z
    b = engine.drifts(j, _live(state.proxy, j))
    diff = _diffusion_term(engine, j, dh)
    out = z.copy()
    n_live = engine.n_rates - j
    for p in range(n_live) if order is None else order:
        r = j + p
        out[:, r] = z[:, r] + b[:, p] * h + diff[:, p]
    return PathState(out, _advance_proxy(engine, state, j, h, dh), state.step + 1)


def evolve_step_pc(
    engine: LiborEngine,
    state: PathState,
    j: int,
    h: float,
    dh: np.ndarray,
    *,
    picard: bool = False,
) -> PathState:
    """Predictor-corrector: drift averaged over b(t; Z(t)) and b(t+h; predicted Z(t+h))."""
    diff = _diffusion_term(engine, j, dh)
    z = state.z
    if picard:
        if state.proxy is None:
            raise ValueError("Picard step needs proxy processes")
        z1_next = _advance_proxy(engine, state, j, h, dh)
        b0 = engine.drifts(j, _live(state.proxy, j))
        b1 = engine.drifts(j, _live(z1_next, j))
    else:
        z1_next = state.proxy
        b0 = engine.drifts(j, _live(z, j))
        pred = z[:, j:] + b0 * h + diff
        b1 = engine.drifts(j, pred)
    out = z.copy()
    out[:, j:] = z[:, j:] + 0.5 * (b0 + b1) * h + diff
    return PathState(out, z1_next, state.step + 1)


def evolve_step_ipc(
    engine: LiborEngine,
    state: PathState,
    j: int,
    h: float,
    dh: np.ndarray,
    *,
    picard: bool = False,
    order: Sequence[int] | None = None,
) -> PathState:
    """Iterative predictor-corrector: correct from the last rate backwards.

    The corrector drift of live rate p at t+h reads the already-corrected
    values of the rates after it (or the proxies Z1(t+h) when ``picard``).
    ``order`` must be strictly decreasing.
    """
    n_live = engine.n_rates - j
    seq = list(range(n_live - 1, -1, -1)) if order is None else list(order)
    if any(a <= b for a, b in zip(seq, seq[1:])) or sorted(seq) != list(range(n_live)):
        raise AssertionError("IPC must correct rates in strictly decreasing maturity order")
    diff = _diffusion_term(engine, j, dh)
    z = state.z
    frozen = engine.mode is DriftMode.FROZEN
    if picard:
        if state.proxy is None:
            raise ValueError("Picard step needs proxy processes")
        z1_next = _advance_proxy(engine, state, j, h, dh)
        b0 = engine.drifts(j, _live(state.proxy, j))
        w_next = None if frozen else engine.weights(_live(z1_next, j))
    else:
        z1_next = state.proxy
        b0 = engine.drifts(j, _live(z, j))
        w_next = None
    ev = engine.evaluators[j]
    suffix = None if frozen else ev.start(z.shape[0])
    out = z.copy()
    for p in seq:
        r = j + p
        b1 = engine.frozen[j][0, p] if frozen else ev.drift(suffix, p)
        out[:, r] = z[:, r] + 0.5 * (b0[:, p] + b1) * h + diff[:, p]
        if not frozen:
            w = w_next[:, p] if picard else engine.weights(out[:, r : r + 1])[:, 0]
            ev.push(suffix, p, w)
    return PathState(out, z1_next, state.step + 1)


def _step(engine: LiborEngine, scheme: Scheme, state: PathState, j: int, h: float, dh: np.ndarray) -> PathState:
    if scheme in (Scheme.EULER, Scheme.FROZEN_LONG_STEP):
        return evolve_step_euler(engine, state, j, h, dh)
    if scheme is Scheme.PICARD:
        return evolve_step_picard(engine, state, j, h, dh)
    if scheme is Scheme.PC:
        return evolve_step_pc(engine, state, j, h, dh)
    if scheme is Scheme.IPC:
        return evolve_step_ipc(engine, state, j, h, dh)
    if scheme is Scheme.PICARD_PC:
        return evolve_step_pc(engine, state, j, h, dh, picard=True)
    if scheme is Scheme.PICARD_IPC:
        return evolve_step_ipc(engine, state, j, h, dh, picard=True)
    raise ValueError(f"unknown scheme {scheme!r}")


def draw_increments(
    model: MarketModel, grid: SimulationGrid, rng: np.random.Generator, n_paths: int, antithetic: bool
) -> np.ndarray:
    """Centred driver increments, shape (n_increments, n_paths)."""
    _, h = grid.sample_steps(model)
    driver = model.driver
    dh = sample_increments(driver.nig, h, rng, (h.size, n_paths), antithetic=antithetic, centred=True)
    if driver.c > 0.0:
        half = n_paths // 2 if antithetic else n_paths
        g = rng.standard_normal((h.size, half))
        if antithetic:
            g = np.concatenate([g, -g], axis=1)
        dh = dh + np.sqrt(driver.c * h)[:, None] * g
    return dh


def coarsen_increments(increments: np.ndarray, n_intervals: int, steps_per_tenor: int) -> np.ndarray:
    """Sum fine increments into ``steps_per_tenor`` steps per tenor interval.

    The coarse grid then sees the same driver path as the fine one, so
    coarse and fine schemes can be compared path by path.
    """
    fine = increments.shape[0] // n_intervals
    if fine * n_intervals != increments.shape[0] or fine % steps_per_tenor:
        raise ValueError(f"{increments.shape[0]} increments do not coarsen to {steps_per_tenor} per tenor")
    p = increments.shape[1:]
    return increments.reshape((n_intervals, steps_per_tenor, fine // steps_per_tenor) + p).sum(axis=2).reshape(
        (n_intervals * steps_per_tenor,) + p
    )


def simulate_block(
    engine: LiborEngine,
    scheme: Scheme | str,
    grid: SimulationGrid,
    increments: np.ndarray,
    products: Sequence[Product],
) -> np.ndarray:
    """Per-path payoffs, shape (n_paths, n_products), on the given increments."""
    scheme = Scheme(scheme)
    model = engine.model
    n = model.n_rates
    n_paths = increments.shape[1]
    out = np.full((n_paths, len(products)), np.nan)
    by_expiry: dict[int, list[int]] = {}
    for k, prod in enumerate(products):
        if not 1 <= prod.expiry <= n:
            raise ValueError(f"{prod.label}: expiry index outside 1..{n}")
        by_expiry.setdefault(prod.expiry, []).append(k)

    def settle(e: int, z: np.ndarray) -> None:
        if e in by_expiry:
            rates = np.exp(z[:, e - 1 :])
            for k in by_expiry[e]:
                out[:, k] = payoff(products[k], rates, model)

    intervals, h = grid.sample_steps(model)
    long_step = grid.long_step or scheme is Scheme.FROZEN_LONG_STEP
    if long_step:
        stepper = engine
        if scheme is Scheme.FROZEN_LONG_STEP and engine.mode is not DriftMode.FROZEN:
            stepper = LiborEngine(model, DriftMode.FROZEN, grouping=engine.grouping)
        h_path = np.cumsum(increments, axis=0)
        t = np.cumsum(h)
        ends = np.flatnonzero(np.diff(np.append(intervals, n)) != 0)  # last increment of each interval
        for e in range(1, n + 1):
            if e not in by_expiry:
                continue
            k = ends[e - 1]
            state = PathState.initial(engine.z0, n_paths, scheme.uses_proxies)
            state = _step(stepper, scheme, state, 0, float(t[k]), h_path[k])
            settle(e, state.z)
        return out

    state = PathState.initial(engine.z0, n_paths, scheme.uses_proxies)
    for k in range(h.size):
        j = int(intervals[k])
        state = _step(engine, scheme, state, j, float(h[k]), increments[k])
        if k + 1 == h.size or intervals[k + 1] != j:
            settle(j + 1, state.z)
    return out


# --------------------------------------------------------------------------
# statistics


@dataclass
class _Moments:
    n: np.ndarray
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, x: np.ndarray) -> "_Moments":
        n = np.full(x.shape[1], float(x.shape[0]))
        if x.shape[0] == 0:
            return cls(n, np.zeros(x.shape[1]), np.zeros(x.shape[1]))
        mean = x.mean(axis=0)
        return cls(n, mean, ((x - mean) ** 2).sum(axis=0))

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.n + other.n
        safe = np.where(n > 0, n, 1.0)
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / safe
        m2 = self.m2 + other.m2 + delta**2 * self.n * other.n / safe
        return _Moments(n, mean, m2)

    @property
    def std_error(self) -> np.ndarray:
        n = self.n
        var = np.where(n > 1, self.m2 / np.maximum(n - 1, 1), np.nan)
        return np.sqrt(var / n)


def _reduce(parts: list[_Moments]) -> _Moments:
    # pairwise tree in block order: the result is independent of scheduling
    while len(parts) > 1:
        parts = [parts[i].merge(parts[i + 1]) if i + 1 < len(parts) else parts[i] for i in range(0, len(parts), 2)]
    return parts[0]


@dataclass(frozen=True)
class RunSpec:
    scheme: Scheme
    mode: DriftMode

    @classmethod
    def of(cls, scheme, mode) -> "RunSpec":
        return cls(Scheme(scheme), DriftMode(mode))

    @property
    def label(self) -> str:
        return f"{self.scheme.value}/{self.mode.value}"


@dataclass
class RunResult:
    spec: RunSpec
    estimates: list[McEstimate]
    cost: DriftCost
    wall_time: float


@dataclass
class PairedDifference:
    """Mean and standard error of (run - baseline) per product on common paths."""

    run: RunSpec
    baseline: RunSpec
    diff: np.ndarray
    std_error: np.ndarray


@dataclass
class ExperimentResult:
    runs: list[RunResult]
    differences: list[PairedDifference]
    n_paths: int
    n_failed: int
    wall_time: float
    products: list[Product] = field(default_factory=list)

    def run(self, scheme, mode) -> RunResult:
        spec = RunSpec.of(scheme, mode)
        for r in self.runs:
            if r.spec == spec:
                return r
        raise KeyError(spec.label)


def scheme_cost(engine: LiborEngine, scheme: Scheme, grid: SimulationGrid, n_paths: int) -> DriftCost:
    """Reference-algorithm drift cost of one run (see :class:`DriftCost`).

    Deterministic drifts (frozen mode, Picard proxies, long step) are
    counted once per interval; path-wise drifts once per evaluation.
    """
    n = engine.n_rates
    mode = DriftMode.FULL if engine.mode is DriftMode.FROZEN else engine.mode
    per_interval = [DriftCost() for _ in range(n)]
    for j in range(n):
        for p in range(n - j):
            per_interval[j] += drift_cost(n - j - 1 - p, mode)
    total = DriftCost()
    long_step = grid.long_step or scheme is Scheme.FROZEN_LONG_STEP
    if engine.mode is DriftMode.FROZEN or scheme.uses_proxies or long_step:
        for c in per_interval if not long_step else per_interval[:1]:
            total += c
    if engine.mode is DriftMode.FROZEN or long_step:
        return total
    evals = 1 if scheme in (Scheme.EULER, Scheme.PICARD) else 2
    intervals, _ = grid.sample_steps(engine.model)
    for j in intervals:
        total += per_interval[j].scaled(evals * n_paths)
    return total


def run_experiment(
    model: MarketModel,
    runs: Sequence[RunSpec | tuple],
    grid: SimulationGrid,
    rng: RngPolicy,
    n_paths: int,
    products: Sequence[Product],
    *,
    threads: int = 1,
    grouping: str = "value",
    max_failure_fraction: float = 1e-4,
) -> ExperimentResult:
    """Simulate several (scheme, mode) runs on common increments.

    Differences are reported for every run against the first one.  Paths
    with a non-finite payoff in any run are dropped from all runs (with
    their antithetic partner); more than ``max_failure_fraction`` of them
    aborts the experiment.
    """
    report = validate_model(model)
    if not report.ok:
        raise SimulationError(f"model fails validation:\n{report}")
    specs = [r if isinstance(r, RunSpec) else RunSpec.of(*r) for r in runs]
    if not specs:
        raise ValueError("need at least one run")
    products = list(products)
    engines: dict[tuple[DriftMode, str], LiborEngine] = {}
    for s in specs:
        key = (s.mode, grouping)
        if key not in engines:
            engines[key] = LiborEngine(model, s.mode, grouping=grouping)
    blocks = rng.blocks(n_paths)
    n_prod = len(products)
    t_start = time.perf_counter()

    def process(b: int):
        inc = draw_increments(model, grid, rng.generator(b), blocks[b], rng.antithetic)
        pay, times = [], []
        for s in specs:
            t0 = time.perf_counter()
            pay.append(simulate_block(engines[(s.mode, grouping)], s.scheme, grid, inc, products))
            times.append(time.perf_counter() - t0)
        bad = np.zeros(blocks[b], dtype=bool)
        for p in pay:
            bad |= ~np.all(np.isfinite(p), axis=1)
        if rng.antithetic:
            half = blocks[b] // 2
            pair_bad = bad[:half] | bad[half:]
            units = [0.5 * (p[:half] + p[half:])[~pair_bad] for p in pay]
            n_bad = 2 * int(pair_bad.sum())
        else:
            units = [p[~bad] for p in pay]
            n_bad = int(bad.sum())
        moments = [_Moments.of(u) for u in units]
        diffs = [_Moments.of(u - units[0]) for u in units[1:]]
        return moments, diffs, n_bad, times

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(process, range(len(blocks))))
    else:
        results = [process(b) for b in range(len(blocks))]

    n_failed = sum(r[2] for r in results)
    if n_failed > max_failure_fraction * n_paths:
        raise SimulationError(f"{n_failed} of {n_paths} paths failed (non-finite payoffs)")
    wall = time.perf_counter() - t_start

    out_runs = []
    for ri, s in enumerate(specs):
        m = _reduce([r[0][ri] for r in results]) if n_prod else None
        run_time = sum(r[3][ri] for r in results)
        cost = scheme_cost(engines[(s.mode, grouping)], s.scheme, grid, n_paths)
        ests = []
        for k, prod in enumerate(products):
            price = float(m.mean[k])
            ests.append(
                McEstimate(
                    prod,
                    price,
                    float(m.std_error[k]),
                    n_paths - n_failed,
                    product_implied_vol(prod, model, price),
                    {"scheme": s.scheme.value, "mode": s.mode.value, "wall_time": run_time, "drift_cost": cost},
                )
            )
        out_runs.append(RunResult(s, ests, cost, run_time))
    differences = []
    for ri, s in enumerate(specs[1:]):
        if n_prod:
            d = _reduce([r[1][ri] for r in results])
            differences.append(PairedDifference(s, specs[0], d.mean.copy(), d.std_error.copy()))
        else:
            differences.append(PairedDifference(s, specs[0], np.zeros(0), np.zeros(0)))
    return ExperimentResult(out_runs, differences, n_paths, n_failed, wall, products)


def run_simulation(
    model: MarketModel,
    scheme: Scheme | str,
    mode: DriftMode | str,
    grid: SimulationGrid,
    rng: RngPolicy,
    n_paths: int,
    products: Sequence[Product],
    *,
    threads: int = 1,
    grouping: str = "value",
) -> RunResult:
    result = run_experiment(
        model, [RunSpec.of(scheme, mode)], grid, rng, n_paths, products, threads=threads, grouping=grouping
    )
    return result.runs[0]
