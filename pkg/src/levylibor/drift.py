"""Terminal-measure drift of the log-LIBOR rates.

For rate i with subsequent rates l = i+1..N, weights w_l = delta_l L_l / (1 + delta_l L_l)
and loadings lambda_l, the drift is

    b_i = -1/2 lambda_i^2 c - c lambda_i sum_l w_l lambda_l - A,
    A   = int ((e^{lambda_i x} - 1) prod_l (1 + w_l (e^{lambda_l x} - 1)) - lambda_i x) F(dx).

Expanding the product over subsets S of the subsequent rates gives

    A = sum_S prod_{l in S} w_l * J(S),
    J(S) = sum_{T subset S} (-1)^{|S - T|} [kappa(lambda_i + lambda_T) - kappa(lambda_T)],

with kappa the compensated jump cumulant and J(empty) = kappa(lambda_i).  The
scalar functions below evaluate this literally (2^n subsets) or truncated at
subset size one or two.  :class:`DriftEvaluator` is the vectorised engine used
by the simulator: it groups subsequent rates by equal loading, so J only
depends on how many members of each group are in S and the sum over subsets
collapses onto per-group elementary symmetric polynomials.  The result is the
same expansion, exact for ``order=None``, at polynomial cost when loadings
take few distinct values.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DriftMode",
    "DriftCost",
    "DriftInputs",
    "DriftSizeError",
    "drift_cost",
    "elementary_symmetric",
    "elementary_symmetric_all",
    "jump_drift_full",
    "jump_drift_first_order",
    "jump_drift_second_order",
    "jump_drift",
    "brownian_drift",
    "total_drift",
    "DriftEvaluator",
]

Cumulant = Callable[[np.ndarray], np.ndarray]


class DriftMode(str, enum.Enum):
    FULL = "full"
    FIRST_ORDER = "first_order"
    SECOND_ORDER = "second_order"
    FROZEN = "frozen"

    @property
    def order(self) -> int | None:
        """Truncation order of the product expansion (None = exact)."""
        return {DriftMode.FIRST_ORDER: 1, DriftMode.SECOND_ORDER: 2}.get(self)


class DriftSizeError(ValueError):
    """Exact subset expansion refused: too many subsequent rates."""


@dataclass
class DriftCost:
    """Operation counts of the literal subset expansion.

    ``cumulant_evals`` counts kappa evaluations with no reuse between terms:
    a subset S costs 2^{|S|+1} - 1 evaluations.  ``product_terms`` counts the
    terms of the product expansion that are kept (2^n for the exact drift).
    ``multiply_adds`` counts weight products plus inclusion-exclusion
    additions.  These are a cost model of the reference algorithm, not of the
    grouped evaluator.
    """

    cumulant_evals: int = 0
    product_terms: int = 0
    multiply_adds: int = 0

    def __iadd__(self, other: "DriftCost") -> "DriftCost":
        self.cumulant_evals += other.cumulant_evals
        self.product_terms += other.product_terms
        self.multiply_adds += other.multiply_adds
        return self

    def scaled(self, k: int) -> "DriftCost":
        return DriftCost(self.cumulant_evals * k, self.product_terms * k, self.multiply_adds * k)


def drift_cost(n: int, mode: DriftMode | str) -> DriftCost:
    """Cost of one jump-drift evaluation with ``n`` subsequent rates."""
    mode = DriftMode(mode)
    order = mode.order
    kmax = n if order is None else min(order, n)
    evals = terms = madds = 0
    for k in range(kmax + 1):
        c = math.comb(n, k)
        terms += c
        evals += c * (2 ** (k + 1) - 1)
        # k-1 products for the weights, one to scale J, 2^{k+1}-2 combination adds, one accumulate
        madds += c * (max(k - 1, 0) + 1 + 2 ** (k + 1) - 2 + 1)
    return DriftCost(evals, terms, madds)


def elementary_symmetric_all(values: Sequence[float] | np.ndarray, kmax: int | None = None) -> np.ndarray:
    """e_0..e_kmax of ``values`` by the recurrence e_k <- e_k + x e_{k-1}.

    ``values`` may carry leading batch axes; the variables run along the last axis.
    """
    x = np.asarray(values, dtype=float)
    n = x.shape[-1]
    kmax = n if kmax is None else min(kmax, n)
    e = np.zeros(x.shape[:-1] + (kmax + 1,))
    e[..., 0] = 1.0
    for j in range(n):
        xj = x[..., j : j + 1]
        e[..., 1:] = e[..., 1:] + xj * e[..., :-1]
    return e


def elementary_symmetric(values: Sequence[float] | np.ndarray, k: int) -> float:
    """Elementary symmetric polynomial of degree ``k`` in ``values``."""
    x = np.asarray(values, dtype=float)
    if not 0 <= k <= x.size:
        raise ValueError(f"degree {k} out of range for {x.size} variables")
    return float(elementary_symmetric_all(x.ravel(), k)[k])


@dataclass(frozen=True)
class DriftInputs:
    """Everything the drift of one rate needs at one time.

    ``weights`` and ``loadings`` run over the subsequent rates l = i+1..N.
    ``cumulant`` is the compensated jump cumulant.  ``initial_weights``, when
    set, are used by the frozen mode.
    """

    loading: float
    weights: np.ndarray
    loadings: np.ndarray
    cumulant: Cumulant
    diffusion: float = 0.0
    initial_weights: np.ndarray | None = None
    rate_index: int | None = None
    time: float | None = None

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        lam = np.atleast_1d(np.asarray(self.loadings, dtype=float))
        if w.shape != lam.shape:
            raise ValueError("weights and loadings must have the same length")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "loadings", lam)
        if self.initial_weights is not None:
            w0 = np.atleast_1d(np.asarray(self.initial_weights, dtype=float))
            if w0.shape != w.shape:
                raise ValueError("initial_weights must match weights")
            object.__setattr__(self, "initial_weights", w0)

    @property
    def n_subsequent(self) -> int:
        return self.weights.size

    def frozen(self) -> "DriftInputs":
        w0 = self.weights if self.initial_weights is None else self.initial_weights
        return DriftInputs(self.loading, w0, self.loadings, self.cumulant, self.diffusion, w0, self.rate_index, self.time)


def _subset_table(values: np.ndarray, combine) -> np.ndarray:
    """Reduce ``values`` over every subset; index bit l <-> element l."""
    out = np.array([0.0 if combine is np.add else 1.0])
    for v in values:
        out = np.concatenate([out, combine(out, v)])
    return out


def _moebius(f: np.ndarray, n: int) -> np.ndarray:
    """J(S) = sum_{T subset S} (-1)^{|S-T|} f(T) over bitmask-indexed arrays."""
    j = f.copy()
    for l in range(n):
        step = 1 << l
        v = j.reshape(-1, 2, step)
        v[:, 1, :] -= v[:, 0, :]
    return j


def jump_drift_full(inputs: DriftInputs, *, max_subsequent: int = 25, cost: DriftCost | None = None) -> float:
    """Exact jump drift A by the subset expansion (2^n terms)."""
    n = inputs.n_subsequent
    if n > max_subsequent:
        raise DriftSizeError(
            f"exact drift with {n} subsequent rates needs 2^{n} terms; raise max_subsequent to opt in"
        )
    kappa = inputs.cumulant
    lam_t = _subset_table(inputs.loadings, np.add)
    f = kappa(inputs.loading + lam_t) - kappa(lam_t)
    j = _moebius(f, n)
    w_t = _subset_table(inputs.weights, np.multiply)
    if cost is not None:
        cost += drift_cost(n, DriftMode.FULL)
    return float(np.dot(w_t, j))


def jump_drift_first_order(inputs: DriftInputs, *, cost: DriftCost | None = None) -> float:
    """A' = kappa(l_i) + sum_l w_l (kappa(l_i + l_l) - kappa(l_i) - kappa(l_l))."""
    kappa = inputs.cumulant
    li, lam, w = inputs.loading, inputs.loadings, inputs.weights
    ki = float(kappa(li))
    out = ki
    if w.size:
        out += float(np.dot(w, kappa(li + lam) - ki - kappa(lam)))
    if cost is not None:
        cost += drift_cost(w.size, DriftMode.FIRST_ORDER)
    return out


def jump_drift_second_order(inputs: DriftInputs, *, cost: DriftCost | None = None) -> float:
    """A'' = A' + sum_{k<l} w_k w_l (7-term inclusion-exclusion of kappa)."""
    kappa = inputs.cumulant
    li, lam, w = inputs.loading, inputs.loadings, inputs.weights
    out = jump_drift_first_order(inputs)
    n = w.size
    if n >= 2:
        k_idx, l_idx = np.triu_indices(n, 1)
        lk, ll = lam[k_idx], lam[l_idx]
        coef = (
            kappa(li + lk + ll)
            - kappa(li + ll)
            - kappa(li + lk)
            - kappa(lk + ll)
            + kappa(li)
            + kappa(lk)
            + kappa(ll)
        )
        out += float(np.dot(w[k_idx] * w[l_idx], coef))
    if cost is not None:
        cost += drift_cost(n, DriftMode.SECOND_ORDER)
    return out


def jump_drift(inputs: DriftInputs, mode: DriftMode | str, *, cost: DriftCost | None = None, **kw) -> float:
    mode = DriftMode(mode)
    if mode is DriftMode.FIRST_ORDER:
        return jump_drift_first_order(inputs, cost=cost)
    if mode is DriftMode.SECOND_ORDER:
        return jump_drift_second_order(inputs, cost=cost)
    if mode is DriftMode.FROZEN:
        inputs = inputs.frozen()
    return jump_drift_full(inputs, cost=cost, **kw)


def brownian_drift(inputs: DriftInputs) -> float:
    """-1/2 lambda_i^2 c - c lambda_i sum_l w_l lambda_l."""
    c, li = inputs.diffusion, inputs.loading
    if c < 0.0:
        raise ValueError("diffusion coefficient must be >= 0")
    return -0.5 * li * li * c - c * li * float(np.dot(inputs.weights, inputs.loadings))


def total_drift(inputs: DriftInputs, mode: DriftMode | str, *, cost: DriftCost | None = None, **kw) -> float:
    """Drift b(s, T_i) of the log-rate: Brownian part minus the jump part.

    ``FROZEN`` evaluates the exact formula at ``inputs.initial_weights``.
    """
    mode = DriftMode(mode)
    if mode is DriftMode.FROZEN:
        inputs = inputs.frozen()
    return brownian_drift(inputs) - jump_drift(inputs, mode, cost=cost, **kw)


# --------------------------------------------------------------------------
# vectorised engine


def _forward_difference_matrix(k: int) -> np.ndarray:
    """D[m, j] = C(m, j) (-1)^{m-j}: the m-th forward difference at 0."""
    d = np.zeros((k + 1, k + 1))
    for m in range(k + 1):
        for j in range(m + 1):
            d[m, j] = math.comb(m, j) * (-1) ** (m - j)
    return d


@dataclass
class _RatePlan:
    groups: list[int]  # present groups, in E-tensor order
    caps: list[int]  # per present group: highest power used
    index: np.ndarray | None  # dense mode: flat indices kept after masking
    terms: list[tuple[tuple[int, int], ...]] | None  # sparse mode: ((group, power), ...)
    coef: np.ndarray  # J for each kept multi-index


@dataclass
class _SuffixState:
    e: list[np.ndarray]  # per group: (cap+1, P) elementary symmetric polys of the suffix
    count: list[int]  # rates pushed per group
    wl: np.ndarray  # running sum of w_l lambda_l (Brownian part)


class DriftEvaluator:
    """Vectorised drift for the live rates of one tenor interval.

    ``loadings`` are lambda for the live rates in increasing maturity.  The
    drift of live rate ``p`` depends on the weights of rates ``q > p``;
    callers walk the rates from the last one backwards, calling
    :meth:`drift` for ``p`` and then :meth:`push` with its weights.
    ``order`` truncates the product expansion (None = exact).  ``grouping``
    is ``"value"`` (rates with equal loading share a group) or ``"none"``
    (every rate its own group, i.e. the literal 2^n subset expansion);
    the literal exact expansion is refused beyond ``max_subsequent`` rates.
    """

    def __init__(
        self,
        loadings: np.ndarray,
        cumulant: Cumulant,
        *,
        order: int | None = 2,
        diffusion: float = 0.0,
        grouping: str = "value",
        max_subsequent: int = 25,
    ) -> None:
        lam = np.asarray(loadings, dtype=float)
        if grouping == "none" and order is None and lam.size - 1 > max_subsequent:
            raise DriftSizeError(
                f"literal exact drift with {lam.size - 1} subsequent rates needs 2^{lam.size - 1} terms"
            )
        self.loadings = lam
        self.n = lam.size
        self.order = order
        self.diffusion = float(diffusion)
        if grouping == "value":
            values, gid = np.unique(lam, return_inverse=True)
        elif grouping == "none":
            values, gid = lam.copy(), np.arange(self.n)
        else:
            raise ValueError(f"unknown grouping {grouping!r}")
        self.group_values = values
        self.group_of = gid.astype(int)
        self.n_groups = values.size
        counts = np.bincount(self.group_of, minlength=self.n_groups)
        cap = lambda c: int(c if order is None else min(c, order))  # noqa: E731
        self.group_caps = [cap(c) for c in counts]
        self._kappa = cumulant
        self._plans = [self._plan(p) for p in range(self.n)]

    def _plan(self, p: int) -> _RatePlan:
        counts = np.bincount(self.group_of[p + 1 :], minlength=self.n_groups)
        groups = [g for g in range(self.n_groups) if counts[g] > 0]
        caps = [int(counts[g] if self.order is None else min(counts[g], self.order)) for g in groups]
        li = self.loadings[p]
        kappa = self._kappa
        vals = self.group_values[groups] if groups else np.zeros(0)
        k = self.order
        dense_size = math.prod(c + 1 for c in caps)
        if k is None or dense_size <= 4 * _count_truncated(caps, k):
            grids = np.meshgrid(*[np.arange(c + 1) for c in caps], indexing="ij") if caps else []
            lam_sum = sum((gr * v for gr, v in zip(grids, vals)), np.zeros([c + 1 for c in caps]))
            f = kappa(li + lam_sum) - kappa(lam_sum)
            f = np.asarray(f, dtype=float).reshape([c + 1 for c in caps])
            for axis, c in enumerate(caps):
                f = np.moveaxis(np.tensordot(_forward_difference_matrix(c), f, axes=([1], [axis])), 0, axis)
            if k is None:
                keep = np.ones(f.shape, dtype=bool)
            else:
                tot = sum(grids, np.zeros(f.shape, dtype=int)) if caps else np.zeros((), dtype=int)
                keep = tot <= k
            index = np.flatnonzero(keep)
            return _RatePlan(groups, caps, index, None, f.ravel()[index])
        terms: list[tuple[tuple[int, int], ...]] = []
        coef = []
        cache: dict[tuple[int, ...], float] = {}

        def fval(j: tuple[int, ...]) -> float:
            if j not in cache:
                s = float(np.dot(j, vals))
                cache[j] = float(kappa(li + s) - kappa(s))
            return cache[j]

        for m in _bounded_indices(caps, k):
            acc = 0.0
            for j in itertools.product(*[range(mg + 1) for mg in m]):
                sign = (-1) ** (sum(m) - sum(j))
                acc += sign * math.prod(math.comb(mg, jg) for mg, jg in zip(m, j)) * fval(j)
            terms.append(tuple((gi, mg) for gi, mg in enumerate(m) if mg))
            coef.append(acc)
        return _RatePlan(groups, caps, None, terms, np.asarray(coef))

    def n_terms(self, p: int) -> int:
        return self._plans[p].coef.size

    def start(self, n_paths: int) -> _SuffixState:
        e = []
        for cap in self.group_caps:
            a = np.zeros((cap + 1, n_paths))
            a[0] = 1.0
            e.append(a)
        return _SuffixState(e, [0] * self.n_groups, np.zeros(n_paths))

    def push(self, state: _SuffixState, p: int, w: np.ndarray) -> None:
        """Add rate ``p`` with weights ``w`` (per path) to the suffix."""
        g = self.group_of[p]
        e = state.e[g]
        top = min(state.count[g] + 1, e.shape[0] - 1)  # higher powers are still zero
        if top >= 1:
            e[1 : top + 1] = e[1 : top + 1] + w * e[:top]
        state.count[g] += 1
        if self.diffusion:
            state.wl = state.wl + w * self.loadings[p]

    def jump_drift(self, state: _SuffixState, p: int) -> np.ndarray:
        plan = self._plans[p]
        n_paths = state.wl.shape[0]
        coef = plan.coef
        if plan.index is not None and len(plan.groups) == 1:
            e = state.e[plan.groups[0]]
            acc = e[plan.index[0]] * coef[0]
            for m in range(1, coef.size):
                acc = acc + e[plan.index[m]] * coef[m]
            return acc
        if plan.index is not None:
            t = np.ones((1, n_paths))
            for g, cap in zip(plan.groups, plan.caps):
                t = (t[:, None, :] * state.e[g][None, : cap + 1, :]).reshape(-1, n_paths)
            t = t[plan.index]
        else:
            rows = []
            for term in plan.terms:
                row = np.ones(n_paths)
                for gi, mg in term:
                    row = row * state.e[plan.groups[gi]][mg]
                rows.append(row)
            t = np.stack(rows)
        if coef.size <= 64:
            # elementwise accumulation keeps each path's value independent of the batch shape
            acc = t[0] * coef[0]
            for m in range(1, coef.size):
                acc = acc + t[m] * coef[m]
            return acc
        return coef @ t

    def drift(self, state: _SuffixState, p: int) -> np.ndarray:
        out = -self.jump_drift(state, p)
        if self.diffusion:
            li = self.loadings[p]
            out = out - 0.5 * li * li * self.diffusion - self.diffusion * li * state.wl
        return out

    def all_drifts(self, weights: np.ndarray) -> np.ndarray:
        """Drifts of all live rates from a (P, n) weight matrix."""
        w = np.atleast_2d(weights)
        state = self.start(w.shape[0])
        out = np.empty_like(w)
        for p in range(self.n - 1, -1, -1):
            out[:, p] = self.drift(state, p)
            self.push(state, p, w[:, p])
        return out


def _bounded_indices(caps: list[int], k: int):
    # multi-indices m <= caps with |m| <= k, in lexicographic order
    if not caps:
        yield ()
        return
    for first in range(min(caps[0], k) + 1):
        for rest in _bounded_indices(caps[1:], k - first):
            yield (first, *rest)


def _count_truncated(caps: list[int], k: int) -> int:
    # number of multi-indices m <= caps with |m| <= k
    poly = np.zeros(k + 1)
    poly[0] = 1.0
    for c in caps:
        new = np.zeros(k + 1)
        for j in range(min(c, k) + 1):
            new[j:] += poly[: k + 1 - j]
        poly = new
    return int(poly.sum())
