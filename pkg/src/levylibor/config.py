"""Experiment configuration: a sectioned INI file with a default for every key.

    [model]       n_rates, accrual, flat_rate, vol, alpha, beta, mu, delta_bar, c
    [simulation]  schemes, modes, steps_per_tenor, long_step, paths, seed,
                  antithetic, block_size, grouping
    [products]    caplets, fras, swaptions, rates
    [bench]       scheme, modes, n_values, n_paths, path_values, path_n,
                  max_subsequent
    [output]      precision, price_csv, compare_csv, bench_csv

Product lists are comma separated.  Caplets and FRAs are ``i@K`` or
``i..j@K``; swaptions ``iXm@K`` (or ``ixm@K``); rates are plain indices.
The letter ``N`` stands for the last rate index.
A strike is a number, ``atm`` or ``atm+x`` / ``atm-x``.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .driver import LevyDriverSpec, NigParams
from .drift import DriftMode
from .market import MarketModel, reference_model
from .pricing import Caplet, Fra, Product, RateObservation, Swaption, black_inputs
from .simulation import RngPolicy, Scheme, SimulationGrid

__all__ = [
    "ConfigError",
    "ModelConfig",
    "SimulationConfig",
    "ProductsConfig",
    "BenchConfig",
    "OutputConfig",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Invalid config value, reported with section, key and line."""

    def __init__(self, section: str, key: str, message: str, line: int | None = None) -> None:
        where = f"[{section}] {key}" + (f" (line {line})" if line else "")
        super().__init__(f"{where}: {message}")
        self.section, self.key, self.line = section, key, line


@dataclass(frozen=True)
class ModelConfig:
    n_rates: int = 20
    accrual: float = 0.5
    flat_rate: float = 0.04
    vol: float = 0.18
    alpha: float = 12.0
    beta: float = 0.0
    mu: float = 0.0
    delta_bar: float = 12.0
    c: float = 0.0

    def build(self) -> MarketModel:
        driver = LevyDriverSpec(NigParams(self.alpha, self.beta, self.mu, self.delta_bar), self.c)
        return reference_model(self.n_rates, accrual=self.accrual, flat_rate=self.flat_rate, vol=self.vol, driver=driver)


@dataclass(frozen=True)
class SimulationConfig:
    schemes: tuple[str, ...] = ("euler",)
    modes: tuple[str, ...] = ("full",)
    steps_per_tenor: int = 5
    long_step: bool = False
    paths: int = 50000
    seed: int = 2024
    antithetic: bool = True
    block_size: int = 4096
    grouping: str = "value"

    def grid(self) -> SimulationGrid:
        return SimulationGrid(self.steps_per_tenor, self.long_step)

    def rng(self, seed: int | None = None) -> RngPolicy:
        return RngPolicy(self.seed if seed is None else seed, self.antithetic, self.block_size)


@dataclass(frozen=True)
class ProductsConfig:
    caplets: tuple[str, ...] = ("1..N@atm",)
    fras: tuple[str, ...] = ("1..N@atm",)
    swaptions: tuple[str, ...] = ()
    rates: tuple[str, ...] = ("N",)


@dataclass(frozen=True)
class BenchConfig:
    scheme: str = "euler"
    modes: tuple[str, ...] = ("full", "second_order")
    n_values: tuple[int, ...] = (4, 6, 8, 10)
    n_paths: int = 2000
    path_values: tuple[int, ...] = (10000, 20000, 40000)
    path_n: int = 10
    max_subsequent: int = 25


@dataclass(frozen=True)
class OutputConfig:
    precision: int = 12
    price_csv: str = "price.csv"
    compare_csv: str = "compare.csv"
    bench_csv: str = "bench.csv"


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    products: ProductsConfig = field(default_factory=ProductsConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def build_products(self, model: MarketModel) -> list[Product]:
        return parse_products(self.products, model)

    def to_ini(self) -> str:
        """Full echo of every resolved key; parses back to an equal config."""
        cp = configparser.ConfigParser(interpolation=None)
        for name in ("model", "simulation", "products", "bench", "output"):
            section = getattr(self, name)
            cp[name] = {f.name: _format_value(getattr(section, f.name)) for f in fields(section)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


_SECTIONS = {
    "model": ModelConfig,
    "simulation": SimulationConfig,
    "products": ProductsConfig,
    "bench": BenchConfig,
    "output": OutputConfig,
}


# written into manifests next to the config echo; ignored when re-reading
_MANIFEST_SECTIONS = ("run", "outputs")


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    out: dict[tuple[str, str], int] = {}
    section = ""
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            section = m.group(1).strip()
        elif line and not line.startswith(("#", ";")) and ("=" in line or ":" in line):
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            out[(section, key)] = n
    return out


def _convert(section: str, key: str, raw: str, default, line: int | None):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = tuple(x.strip() for x in raw.split(",") if x.strip())
            if key in ("n_values", "path_values"):
                return tuple(int(x) for x in items)
            return items
        return raw
    except ValueError as exc:
        raise ConfigError(section, key, str(exc), line) from None


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("?", "?", f"malformed config: {exc}", getattr(exc, "lineno", None)) from None
    lines = _line_numbers(text)
    parts = {}
    for name, cls in _SECTIONS.items():
        defaults = cls()
        known = {f.name for f in fields(cls)}
        values = {}
        if cp.has_section(name):
            for key, raw in cp.items(name):
                line = lines.get((name, key))
                if key not in known:
                    raise ConfigError(name, key, "unknown key", line)
                values[key] = _convert(name, key, raw, getattr(defaults, key), line)
        try:
            parts[name] = cls(**values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(name, "?", str(exc)) from None
    for name in cp.sections():
        if name not in _SECTIONS and name not in _MANIFEST_SECTIONS:
            raise ConfigError(name, "-", "unknown section", lines.get((name, "")))
    cfg = ExperimentConfig(**parts)
    _check(cfg, lines)
    return cfg


def _check(cfg: ExperimentConfig, lines: dict) -> None:
    def fail(section, key, message):
        raise ConfigError(section, key, message, lines.get((section, key)))

    m = cfg.model
    if m.n_rates < 0:
        fail("model", "n_rates", "must be >= 0")
    if m.accrual <= 0:
        fail("model", "accrual", "must be positive")
    try:
        NigParams(m.alpha, m.beta, m.mu, m.delta_bar)
    except ValueError as exc:
        fail("model", "alpha", str(exc))
    if m.c < 0:
        fail("model", "c", "must be >= 0")
    s = cfg.simulation
    for key in ("schemes", "modes"):
        enum = Scheme if key == "schemes" else DriftMode
        if not getattr(s, key):
            fail("simulation", key, "needs at least one entry")
        for v in getattr(s, key):
            try:
                enum(v)
            except ValueError:
                fail("simulation", key, f"unknown value {v!r}; choose from {', '.join(e.value for e in enum)}")
    if s.steps_per_tenor < 1:
        fail("simulation", "steps_per_tenor", "must be >= 1")
    if s.paths < 2:
        fail("simulation", "paths", "must be >= 2")
    if s.antithetic and s.paths % 2:
        fail("simulation", "paths", "must be even with antithetic sampling")
    if s.block_size < 2 or s.block_size % 2:
        fail("simulation", "block_size", "must be even and >= 2")
    if not 0 <= s.seed < 2**64:
        fail("simulation", "seed", "must fit in 64 bits")
    if s.grouping not in ("value", "none"):
        fail("simulation", "grouping", "must be 'value' or 'none'")
    b = cfg.bench
    try:
        Scheme(b.scheme)
        for v in b.modes:
            DriftMode(v)
    except ValueError as exc:
        fail("bench", "scheme", str(exc))
    if cfg.output.precision < 1:
        fail("output", "precision", "must be >= 1")


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))


_STRIKE = re.compile(r"^atm(?:\s*([+-])\s*([0-9.eE+-]+))?$")


def _strike(text: str, atm: float, key: str) -> float:
    t = text.strip().lower()
    m = _STRIKE.match(t)
    if m:
        if m.group(1) is None:
            return atm
        off = float(m.group(2))
        return atm + off if m.group(1) == "+" else atm - off
    try:
        return float(t)
    except ValueError:
        raise ConfigError("products", key, f"bad strike {text!r}") from None


def _indices(text: str, key: str, n: int) -> list[int]:
    t = re.sub(r"\bN\b", str(n), text.strip())
    try:
        if ".." in t:
            a, b = t.split("..")
            out = list(range(int(a), int(b) + 1))
        else:
            out = [int(t)]
    except ValueError:
        raise ConfigError("products", key, f"bad index {text!r}") from None
    if not out or min(out) < 1 or max(out) > n:
        raise ConfigError("products", key, f"index {text!r} outside 1..{n}")
    return out


def parse_products(cfg: ProductsConfig, model: MarketModel) -> list[Product]:
    n = model.n_rates
    fwd = model.curve.forwards
    out: list[Product] = []
    for key, cls in (("caplets", Caplet), ("fras", Fra)):
        for entry in getattr(cfg, key):
            if "@" not in entry:
                raise ConfigError("products", key, f"expected i@K, got {entry!r}")
            idx, strike = entry.split("@", 1)
            for i in _indices(idx, key, n):
                try:
                    out.append(cls(_strike(strike, float(fwd[i - 1]), key), i))
                except ValueError as exc:
                    raise ConfigError("products", key, str(exc)) from None
    for entry in cfg.swaptions:
        m = re.match(r"^\s*(\d+)\s*[xX]\s*(\d+|N)\s*@(.+)$", entry)
        if not m:
            raise ConfigError("products", "swaptions", f"expected iXm@K, got {entry!r}")
        start = int(m.group(1))
        end = n if m.group(2) == "N" else int(m.group(2))
        if not 1 <= start < end <= n:
            raise ConfigError("products", "swaptions", f"need 1 <= i < m <= {n}, got {entry!r}")
        atm = black_inputs(Swaption(1.0, start, end), model)[0]
        try:
            out.append(Swaption(_strike(m.group(3), atm, "swaptions"), start, end))
        except ValueError as exc:
            raise ConfigError("products", "swaptions", str(exc)) from None
    for entry in cfg.rates:
        for i in _indices(entry, "rates", n):
            out.append(RateObservation(i))
    return out
