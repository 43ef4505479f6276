"""Declarative experiment configs and the batch runner behind the CLI.

Config files are INI-style (``configparser``)::

    [model]
    dimension = 1              ; 1 or 2
    potential = quadratic      ; quadratic | quartic | custom (1D), quadratic | radial (2D)
    t = 0.0                    ; quartic coupling
    coefficients =             ; custom/radial coefficients, comma separated

    [ladder]
    N = 25, 50, 100, 200

    [thinning]
    regime = critical          ; none | critical | sub | super
    tau = 1.0
    s = 1.0                    ; exponent for sub/super: q_N = tau / N^s

    [scale]
    kind = macro               ; macro | meso
    alpha = 0.25               ; meso exponent, L_N = N^alpha
    x0 = 0.0                   ; meso base point (2D: "re,im")

    [statistics]
    functions = poly:0,0,1     ; see testfunctions.from_spec, separated by ';'
    orders = 2, 3, 4
    engines = exact            ; exact, quadrature, monte-carlo

    [monte-carlo]
    replicas = 10000
    seed = 0

    [verdict]
    tolerance = 0.03           ; relative final-gap tolerance
    rungs = 3
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import combi
from .cumulants import (
    CumulantReport,
    CumulantRow,
    RefinementError,
    ThinningRegime,
    TruncationError,
    exact_cumulant_1d,
    exact_size,
    quadrature_cumulant,
)
from .kernels import EquilibriumMeasure2D, Potential2D, ginibre_finite
from .limits import gaussian_part, poisson_cumulant
from .orthopoly import Potential1D, cd_kernel, equilibrium_1d, jacobi_for
from .sampler import EnvelopeError, linear_statistics, mc_cumulants, sample_replicas, sampling_basis
from .testfunctions import Polynomial, TestFunction, from_spec

log = logging.getLogger(__name__)

ENGINES = ("exact", "quadrature", "monte-carlo")
ENGINE_MAX_ORDER = {"exact": 6, "quadrature": 3, "monte-carlo": 4}
NUMERICAL_ERRORS = (TruncationError, RefinementError, EnvelopeError, np.linalg.LinAlgError, FloatingPointError)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _complex(text: str) -> complex:
    vals = _floats(text)
    if len(vals) == 1:
        return complex(vals[0])
    if len(vals) == 2:
        return complex(vals[0], vals[1])
    raise ValueError(f"cannot read a point from {text!r}")


@dataclass
class ExperimentConfig:
    dimension: int = 1
    potential: str = "quadratic"
    t: float = 0.0
    coefficients: tuple = ()
    ladder: tuple = (25, 50, 100, 200)
    regime: str = "none"
    tau: float = 1.0
    s: float = 1.0
    scale: str = "macro"
    alpha: float = 0.25
    x0: complex = 0.0
    functions: tuple = ("poly:0,0,1",)
    orders: tuple = (2, 3)
    engines: tuple = ("exact",)
    replicas: int = 10_000
    seed: int = 0
    tolerance: float = 0.03
    rungs: int = 3

    # -- parsing --

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser) -> "ExperimentConfig":
        c = cls()
        g = lambda sec, key, default: cp.get(sec, key, fallback=default)
        c.dimension = int(g("model", "dimension", c.dimension))
        c.potential = g("model", "potential", c.potential).strip().lower()
        c.t = float(g("model", "t", c.t))
        c.coefficients = tuple(_floats(g("model", "coefficients", "")))
        c.ladder = tuple(int(v) for v in _floats(g("ladder", "N", ",".join(map(str, c.ladder)))))
        c.regime = g("thinning", "regime", c.regime).strip().lower()
        c.tau = float(g("thinning", "tau", c.tau))
        c.s = float(g("thinning", "s", c.s))
        c.scale = g("scale", "kind", c.scale).strip().lower()
        c.alpha = float(g("scale", "alpha", c.alpha))
        c.x0 = _complex(g("scale", "x0", "0"))
        c.functions = tuple(v.strip() for v in g("statistics", "functions", ";".join(c.functions)).split(";") if v.strip())
        c.orders = tuple(int(v) for v in _floats(g("statistics", "orders", ",".join(map(str, c.orders)))))
        c.engines = tuple(v.strip().lower() for v in g("statistics", "engines", ",".join(c.engines)).split(",") if v.strip())
        c.replicas = int(g("monte-carlo", "replicas", c.replicas))
        c.seed = int(g("monte-carlo", "seed", c.seed))
        c.tolerance = float(g("verdict", "tolerance", c.tolerance))
        c.rungs = int(g("verdict", "rungs", c.rungs))
        return c

    @classmethod
    def from_string(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        cp.read_string(text)
        return cls.from_parser(cp)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_string(Path(path).read_text())

    def to_string(self) -> str:
        cp = configparser.ConfigParser()
        x0 = f"{self.x0.real!r}, {self.x0.imag!r}" if self.dimension == 2 else repr(self.x0.real)
        cp["model"] = {"dimension": str(self.dimension), "potential": self.potential, "t": repr(self.t), "coefficients": ", ".join(map(repr, self.coefficients))}
        cp["ladder"] = {"N": ", ".join(map(str, self.ladder))}
        cp["thinning"] = {"regime": self.regime, "tau": repr(self.tau), "s": repr(self.s)}
        cp["scale"] = {"kind": self.scale, "alpha": repr(self.alpha), "x0": x0}
        cp["statistics"] = {"functions": "; ".join(self.functions), "orders": ", ".join(map(str, self.orders)), "engines": ", ".join(self.engines)}
        cp["monte-carlo"] = {"replicas": str(self.replicas), "seed": str(self.seed)}
        cp["verdict"] = {"tolerance": repr(self.tolerance), "rungs": str(self.rungs)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    # -- derived objects --

    def potential_object(self):
        if self.dimension == 1:
            return Potential1D.from_name(self.potential, t=self.t, coefficients=self.coefficients or None)
        return Potential2D.from_name(self.potential, coefficients=self.coefficients or None)

    def thinning(self) -> ThinningRegime:
        if self.regime == "none":
            return ThinningRegime()
        return ThinningRegime(self.regime, self.tau, self.s)

    @property
    def setting(self) -> str:
        return f"{self.scale}-{self.dimension}D"

    def test_functions(self) -> list[TestFunction]:
        return [from_spec(spec, self.dimension) for spec in self.functions]

    @property
    def model_label(self) -> str:
        return f"{self.dimension}D-{self.potential_object().label}"


# -- validation ----------------------------------------------------------------


def validate_config(config: ExperimentConfig) -> list[str]:
    """Range and consistency violations as ``field: message`` strings; empty when valid."""
    v = []
    if config.dimension not in (1, 2):
        v.append(f"model.dimension: must be 1 or 2, got {config.dimension}")
        return v
    try:
        V = config.potential_object()
    except (ValueError, TypeError) as exc:
        v.append(f"model.potential: {exc}")
        V = None
    if not config.ladder:
        v.append("ladder.N: empty ladder")
    if any(N < 2 for N in config.ladder):
        v.append("ladder.N: every N must be >= 2")
    if list(config.ladder) != sorted(set(config.ladder)):
        v.append("ladder.N: must be strictly increasing")
    if config.scale not in ("macro", "meso"):
        v.append(f"scale.kind: must be macro or meso, got {config.scale!r}")
    if config.scale == "meso":
        upper = 1.0 if config.dimension == 1 else 0.5
        if not 0 < config.alpha < upper:
            v.append(f"scale.alpha: {config.alpha} outside (0, {upper:g}) for dimension {config.dimension}")
        if V is not None:
            try:
                if config.dimension == 1:
                    if config.x0.imag != 0 or not equilibrium_1d(V).in_bulk(config.x0.real):
                        v.append(f"scale.x0: {config.x0} outside the bulk {equilibrium_1d(V).support}")
                else:
                    eq = EquilibriumMeasure2D.of(V)
                    if not eq.in_bulk(config.x0):
                        v.append(f"scale.x0: |x0| = {abs(config.x0):g} outside the droplet radius {eq.radius:g}")
            except (ValueError, RuntimeError) as exc:
                v.append(f"scale.x0: {exc}")
    try:
        regime = config.thinning()
        for N in config.ladder:
            regime.q(N)
    except ValueError as exc:
        v.append(f"thinning: {exc}")
    fs = []
    for spec in config.functions:
        try:
            fs.append(from_spec(spec, config.dimension))
        except (ValueError, IndexError) as exc:
            v.append(f"statistics.functions: {spec!r}: {exc}")
    if not config.functions:
        v.append("statistics.functions: no test function given")
    if not config.orders or any(n < 1 for n in config.orders):
        v.append("statistics.orders: orders must be positive")
    bad = [e for e in config.engines if e not in ENGINES]
    if bad:
        v.append(f"statistics.engines: unknown engine(s) {bad}; expected {ENGINES}")
    if not config.engines:
        v.append("statistics.engines: no engine selected")
    for e in config.engines:
        if e not in ENGINES:
            continue
        top = max(config.orders, default=0)
        if top > ENGINE_MAX_ORDER[e]:
            v.append(f"statistics.orders: engine {e} supports n <= {ENGINE_MAX_ORDER[e]}, requested {top}")
        if e == "exact":
            if config.dimension != 1 or config.scale == "meso" or not all(isinstance(f, Polynomial) for f in fs):
                v.append("statistics.engines: exact engine needs 1D macroscopic polynomial statistics")
            elif any(f.degree > 6 for f in fs):
                v.append("statistics.functions: exact engine needs deg Q <= 6")
        if e == "quadrature" and any(isinstance(f, Polynomial) for f in fs) and config.scale == "meso":
            v.append("statistics.functions: mesoscopic statistics need localized test functions")
        if e == "monte-carlo" and config.replicas < 1000:
            v.append(f"monte-carlo.replicas: need >= 1000 for k-statistics, got {config.replicas}")
    if config.dimension == 2 and any(isinstance(f, Polynomial) for f in fs):
        v.append("statistics.functions: poly: is one-dimensional; use gauss, bump, re or abs2 in 2D")
    if config.dimension == 2 and config.potential not in ("quadratic", "radial"):
        v.append("model.potential: 2D models must be quadratic or radial")
    if config.tolerance <= 0:
        v.append("verdict.tolerance: must be positive")
    if config.rungs < 2 or config.rungs > max(len(config.ladder), 2):
        v.append(f"verdict.rungs: must be between 2 and the ladder length ({len(config.ladder)})")
    return v


# -- running -------------------------------------------------------------------


@dataclass
class CellFailure:
    function: str
    N: int
    n: int
    engine: str
    error: str


@dataclass
class SummaryRow:
    function: str
    n: int
    engine: str
    regime: str
    N: int
    value: float
    target: float
    gap: float
    tolerance: float
    monotone: bool
    converges: bool
    limits: str


@dataclass
class RunResult:
    report: CumulantReport
    summary: list
    failures: list
    identities_ok: bool = True

    @property
    def exit_code(self) -> int:
        return 0 if not self.failures and self.identities_ok else 2

    def write(self, out_dir, stem: str = "cumulants") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{stem}.csv", out / f"{stem}_summary.csv"]
        self.report.to_csv(paths[0])
        with open(paths[1], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = list(SummaryRow.__dataclass_fields__)
            w.writerow(cols)
            for r in self.summary:
                w.writerow([repr(getattr(r, c)) if isinstance(getattr(r, c), float) else getattr(r, c) for c in cols])
        if self.failures:
            paths.append(out / f"{stem}_failures.csv")
            with open(paths[-1], "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["function", "N", "n", "engine", "error"])
                for f in self.failures:
                    w.writerow([f.function, f.N, f.n, f.engine, f.error])
        return paths


class _Targets:
    """Finite-T crossover prediction G_n + T_N (-1)^n P_n and its limit candidates."""

    def __init__(self, config: ExperimentConfig, f: TestFunction):
        self.config = config
        self.setting = config.setting
        V = config.potential_object()
        self.V = V
        self.gauss = {}
        self.poisson = {}
        self.f = f
        if config.scale == "macro":
            self.eta = equilibrium_1d(V) if config.dimension == 1 else EquilibriumMeasure2D.of(V)
        else:
            self.eta = 1.0
        if config.scale == "meso":
            if config.dimension == 1:
                self.density = float(equilibrium_1d(V).density(config.x0.real))
            else:
                self.density = float(EquilibriumMeasure2D.of(V).density(config.x0))
        else:
            self.density = 1.0

    def G(self, n: int) -> float:
        if n not in self.gauss:
            self.gauss[n] = gaussian_part(self.f, self.setting) if n == 2 else 0.0
        return self.gauss[n]

    def P(self, n: int) -> float:
        if n not in self.poisson:
            val = (-1) ** n * poisson_cumulant(self.f, self.eta, n)
            # integrals that vanish by symmetry come back as quadrature rounding
            ref = max(abs(poisson_cumulant(self.f, self.eta, 2)), 1e-300)
            self.poisson[n] = 0.0 if abs(val) < 1e-12 * ref else val
        return self.poisson[n]

    def T(self, N: int) -> float:
        c = self.config
        scale = "macro" if c.scale == "macro" else c.setting
        return c.thinning().T(N, scale, c.alpha, self.density)

    def target(self, n: int, N: int) -> Optional[float]:
        if n < 2:
            return None
        return self.G(n) + self.T(N) * self.P(n)

    def scale(self, n: int) -> float:
        """Magnitude against which gaps are measured when the target vanishes."""
        t = abs(self.G(n) + self.T(self.config.ladder[-1]) * self.P(n)) if n >= 2 else 0.0
        return t if t > 0 else max(abs(self.G(2)), 1e-300)


def _mesoscopic(config: ExperimentConfig, f: TestFunction, N: int) -> TestFunction:
    if config.scale != "meso":
        return f
    x0 = config.x0.real if config.dimension == 1 else config.x0
    return f.rescaled(float(N) ** config.alpha, x0)


def _kernel(config: ExperimentConfig, N: int, nmax: int, polys: Sequence[TestFunction]):
    V = config.potential_object()
    if config.dimension == 1:
        size = max([exact_size(N, f.coefficients, nmax) for f in polys if isinstance(f, Polynomial)] + [N + 2])
        J = jacobi_for(V, N, size)
        return J, cd_kernel(J)
    return None, ginibre_finite(V, N)


def _run_N(config: ExperimentConfig, N: int, fs, targets, workers: int):
    """All rows (and failures) for one rung of the ladder."""
    rows, failures = [], []
    regime = config.thinning()
    q = regime.q(N)
    p = 1.0 - q
    alpha = config.alpha if config.scale == "meso" else None
    J, K = _kernel(config, N, max(config.orders), fs)
    label = config.model_label
    samples = None
    for spec, f, tg in zip(config.functions, fs, targets):
        fN = _mesoscopic(config, f, N)
        T = tg.T(N)
        # the statistic is part of the model column so rows stay distinguishable
        model = f"{label}/{spec}"
        for engine in config.engines:
            if engine == "monte-carlo":
                try:
                    if samples is None:
                        samples = sample_replicas(sampling_basis(K), config.seed + N, config.replicas, p, workers=workers)
                    stats = linear_statistics(samples, fN)
                    mc = mc_cumulants(stats, min(4, max(config.orders)), model, N, p, q, alpha, T, regime=regime.label)
                    for r in mc:
                        if r.n in config.orders:
                            r.target = tg.target(r.n, N)
                            rows.append((spec, r))
                except NUMERICAL_ERRORS as exc:
                    failures.append(CellFailure(spec, N, 0, engine, f"{type(exc).__name__}: {exc}"))
                continue
            for n in config.orders:
                try:
                    if engine == "exact":
                        val = exact_cumulant_1d(J, f.coefficients, N, n, p)
                    else:
                        val = quadrature_cumulant(K, fN, n, p)
                    method = "exact" if engine == "exact" else "quadrature"
                    rows.append((spec, CumulantRow(model, N, n, float(val), method, p, q, alpha, T, None, tg.target(n, N), regime.label)))
                except NUMERICAL_ERRORS as exc:
                    failures.append(CellFailure(spec, N, n, engine, f"{type(exc).__name__}: {exc}"))
    return rows, failures


def _summarize(config: ExperimentConfig, tagged_rows, targets_by_spec) -> list[SummaryRow]:
    out = []
    rungs = config.rungs
    for spec in config.functions:
        tg = targets_by_spec[spec]
        for engine in config.engines:
            method = engine
            for n in config.orders:
                if n < 2:
                    continue
                ladder = sorted((r for s, r in tagged_rows if s == spec and r.method == method and r.n == n), key=lambda r: r.N)
                if not ladder:
                    continue
                scale = tg.scale(n)
                gaps = [abs(r.value - r.target) for r in ladder]
                tail = gaps[-rungs:]
                monotone = len(tail) >= 2 and all(b <= a + 1e-12 * scale for a, b in zip(tail, tail[1:]))
                bound = config.tolerance * scale
                converges = monotone and gaps[-1] < bound
                limits = []
                # candidate limit laws: Gaussian only, Poisson after normalizing by T_N
                g = [abs(r.value - tg.G(n)) for r in ladder][-rungs:]
                if all(b <= a + 1e-12 * scale for a, b in zip(g, g[1:])) and g[-1] < bound:
                    limits.append("gaussian")
                if converges:
                    limits.append("crossover")
                if ladder[-1].T_N and tg.P(n) != 0:
                    pg = [abs(r.value / r.T_N - tg.P(n)) for r in ladder if r.T_N][-rungs:]
                    if len(pg) >= 2 and all(b <= a + 1e-12 for a, b in zip(pg, pg[1:])) and pg[-1] < config.tolerance * abs(tg.P(n)):
                        limits.append("poisson")
                last = ladder[-1]
                out.append(SummaryRow(spec, n, engine, last.regime, last.N, last.value, last.target, gaps[-1], bound, monotone, converges, ";".join(limits) or "none"))
    return out


def run_experiment(config: ExperimentConfig, workers: int = 1) -> RunResult:
    """Evaluate every (function, N, order, engine) cell; failing cells are recorded and skipped."""
    problems = validate_config(config)
    if problems:
        raise ValueError("invalid config: " + "; ".join(problems))
    fs = config.test_functions()
    targets = [_Targets(config, f) for f in fs]
    tagged, failures = [], []
    for N in config.ladder:
        log.info("N = %d", N)
        rows, fails = _run_N(config, N, fs, targets, workers)
        tagged.extend(rows)
        failures.extend(fails)
    report = CumulantReport([r for _, r in tagged])
    summary = _summarize(config, tagged, dict(zip(config.functions, targets)))
    identities_ok = not report.check_mean_scaling()
    return RunResult(report, summary, failures, identities_ok)


# -- presets for the CLI subcommands -------------------------------------------

PRESETS = {
    "exact-cumulants": ExperimentConfig(functions=("poly:0,1", "poly:0,0,1", "poly:0,0,0,1"), orders=(1, 2, 3, 4), engines=("exact",)),
    "quadrature-cumulants": ExperimentConfig(ladder=(10, 20, 40, 60), functions=("poly:0,1", "poly:0,0,1"), orders=(2, 3), engines=("quadrature",)),
    "sample": ExperimentConfig(ladder=(30,), functions=("poly:0,0,1",), orders=(2, 3), engines=("monte-carlo",), replicas=10_000, rungs=2),
    "crossover-scan": ExperimentConfig(ladder=(25, 50, 100, 200, 400, 800, 1600), regime="critical", tau=1.0, functions=("poly:0,0,1",), orders=(2, 3, 4), engines=("exact",)),
    "meso-scan": ExperimentConfig(
        dimension=2, ladder=(40, 80, 160, 320), scale="meso", alpha=0.25, functions=("gauss:2",), orders=(2, 3), engines=("quadrature",), tolerance=0.05
    ),
}


def preset(name: str) -> ExperimentConfig:
    return replace(PRESETS.get(name, ExperimentConfig()))


def combinatorics_rows(nmax: int = 10, gf_nmax: int = 8) -> list[tuple[str, bool]]:
    return combi.identity_report(nmax, gf_nmax)


__all__ = [
    "ENGINES",
    "ExperimentConfig",
    "PRESETS",
    "RunResult",
    "SummaryRow",
    "combinatorics_rows",
    "preset",
    "run_experiment",
    "validate_config",
]
