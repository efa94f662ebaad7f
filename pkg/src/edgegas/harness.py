"""MCMC for the interacting ensemble and end-to-end experiments.

The target density on [-L, L]^N is

    prod_{i<j} |x_i - x_j|^2 exp(-N sum_j Q(x_j) - sum_{i<j} h(x_i - x_j)),

sampled with single-coordinate random-walk Metropolis. Random numbers are
drawn in blocks from a Philox stream keyed by (seed, chain), so every run is
a pure function of the configuration.
"""
from __future__ import annotations

import json
import logging
import math
import platform
import time
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numba
import numpy as np
from scipy import stats
from scipy.interpolate import CubicSpline

from . import __version__
from .airy import tracy_widom_pair
from .cdkernel import WeightSpec, cd_kernel, gap_pair
from .deviations import log_f_nv, regime
from .equilibrium import DeviationProfile, FixedPointResult, default_L, fixed_point
from .errors import InsufficientTailSamples, MixingWarning, NumericalError, ValidationError
from .fields import ConfiningField, InteractionSpec

log = logging.getLogger(__name__)

TARGET_ACCEPTANCE = 0.4
BLOCK = 256
CHECK_EVERY = 10_000


@dataclass(frozen=True)
class MCMCSettings:
    chains: int = 4
    steps: int = 20_000
    burnin: int = 2_000
    thin: int = 5
    scan: str = "systematic"
    initial_scale: float = 0.0  # 0 means 0.5 / N

    def __post_init__(self):
        if self.scan not in ("systematic", "random"):
            raise ValidationError("mcmc.scan must be 'systematic' or 'random'")
        for name in ("chains", "steps", "thin"):
            if getattr(self, name) < 1:
                raise ValidationError(f"mcmc.{name} must be >= 1")
        if not 0 <= self.burnin < self.steps:
            raise ValidationError("mcmc.burnin must satisfy 0 <= burnin < steps")


def _require(cfg: dict, key: str, where: str = ""):
    if key not in cfg:
        raise ValidationError(f"missing field: {where}{key}")
    return cfg[key]


@dataclass(frozen=True)
class EnsembleConfig:
    N: int
    Q: ConfiningField
    h: InteractionSpec = InteractionSpec()
    L: float | None = None
    seed: int = 0
    mcmc: MCMCSettings = MCMCSettings()
    experiment: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 2:
            raise ValidationError(f"N: need an integer >= 2, got {self.N!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed: must be a 64-bit unsigned integer")
        if self.L is not None and not self.L > 0:
            raise ValidationError("L: must be positive")

    @classmethod
    def from_dict(cls, cfg: dict) -> "EnsembleConfig":
        if not isinstance(cfg, dict):
            raise ValidationError("config must be a JSON object")
        N = _require(cfg, "N")
        Q = ConfiningField.from_config(_require(cfg, "Q"))
        h = InteractionSpec.from_config(cfg.get("h"))
        m = cfg.get("mcmc", {})
        try:
            mcmc = MCMCSettings(**{k: (v if k == "scan" else float(v) if k == "initial_scale"
                                       else int(v)) for k, v in m.items()})
        except TypeError as exc:
            raise ValidationError(f"mcmc: {exc}") from None
        L = cfg.get("L")
        return cls(N, Q, h, None if L is None else float(L), int(cfg.get("seed", 0)),
                   mcmc, dict(cfg.get("experiment", {})))

    @classmethod
    def from_json(cls, path) -> "EnsembleConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"N": self.N, "L": self.L, "seed": self.seed,
                "Q": {"coeffs": list(self.Q.coeffs)},
                "h": {"terms": [{"c": c, "sigma": s} for c, s in self.h.terms]},
                "mcmc": asdict(self.mcmc), "experiment": self.experiment}

    def with_seed(self, seed: int) -> "EnsembleConfig":
        return EnsembleConfig(self.N, self.Q, self.h, self.L, seed, self.mcmc, self.experiment)


def solve(config: EnsembleConfig) -> tuple[FixedPointResult, float]:
    """Fixed point of the effective field and the box size (checked against b + 0.5)."""
    L = config.L if config.L is not None else default_L(config.Q)
    fp = fixed_point(config.Q, config.h, L=L)
    if not L > fp.solution.b + 0.5:
        raise ValidationError(f"L: need L > b + 0.5 = {fp.solution.b + 0.5:.4f}")
    return fp, L


# --- Metropolis core -------------------------------------------------------

@numba.njit(cache=True)
def _poly(c, x):
    out = 0.0
    for k in range(c.size - 1, -1, -1):
        out = out * x + c[k]
    return out


@numba.njit(cache=True)
def _h(hc, hs, d):
    out = 0.0
    for k in range(hc.size):
        out += hc[k] * math.exp(-0.5 * (d / hs[k]) ** 2)
    return out


@numba.njit(cache=True)
def _log_density(x, qc, hc, hs, L):
    N = x.size
    out = 0.0
    for i in range(N):
        if abs(x[i]) > L:
            return -np.inf
        out -= N * _poly(qc, x[i])
        for j in range(i + 1, N):
            d = x[i] - x[j]
            if d == 0.0:
                return -np.inf
            out += 2.0 * math.log(abs(d)) - _h(hc, hs, d)
    return out


@numba.njit(cache=True)
def _site_terms(x, i, y, qc, hc, hs):
    N = x.size
    out = -N * _poly(qc, y)
    for j in range(N):
        if j != i:
            d = y - x[j]
            if d == 0.0:
                return -np.inf
            out += 2.0 * math.log(abs(d)) - _h(hc, hs, d)
    return out


@numba.njit(cache=True)
def _run_block(x, ld, scale, accepted, normals, uniforms, sites, qc, hc, hs, L):
    """Sweeps of N single-site updates; sites[k, m] is the m-th coordinate of sweep k."""
    N = x.size
    for k in range(normals.shape[0]):
        for m in range(N):
            i = sites[k, m]
            y = x[i] + scale[i] * normals[k, m]
            if abs(y) > L:
                continue
            new = _site_terms(x, i, y, qc, hc, hs)
            old = _site_terms(x, i, x[i], qc, hc, hs)
            delta = new - old
            if delta >= 0.0 or uniforms[k, m] < math.exp(delta):
                x[i] = y
                ld += delta
                accepted[i] += 1
    return ld


def log_density(x, Q: ConfiningField, h: InteractionSpec, L: float = math.inf) -> float:
    x = np.ascontiguousarray(x, dtype=float)
    return float(_log_density(x, np.asarray(Q.coeffs), h.amplitudes, h.widths, L))


def chain_stream(seed: int, chain: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chain])))


def equilibrium_quantiles(sol, N: int) -> np.ndarray:
    """x_j with mu((-inf, x_j]) = (j - 1/2)/N; a low-energy starting configuration."""
    a, b = sol.a, sol.b
    grid = np.linspace(a, b, 4001)
    dens = sol.density(grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return np.interp((np.arange(N) + 0.5) / N, cdf, grid)


@dataclass(frozen=True)
class ChainOutput:
    x_max: np.ndarray
    configurations: np.ndarray | None
    acceptance: float
    scale: np.ndarray
    final_log_density: float


def _run_chain(config: EnsembleConfig, L: float, x0: np.ndarray, chain: int,
               keep_configurations: bool) -> ChainOutput:
    N = config.N
    qc = np.asarray(config.Q.coeffs, dtype=float)
    hc, hs = config.h.amplitudes, config.h.widths
    m = config.mcmc
    rng = chain_stream(config.seed, chain)
    x = np.array(x0, dtype=float)
    x += rng.uniform(-1e-3, 1e-3, N) / N
    x = np.clip(x, -L, L)
    ld = _log_density(x, qc, hc, hs, L)
    if not np.isfinite(ld):
        raise NumericalError("starting configuration has zero density")
    scale = np.full(N, m.initial_scale if m.initial_scale > 0 else 0.5 / N)
    accepted = np.zeros(N, dtype=np.int64)
    n_keep = (m.steps - m.burnin) // m.thin
    xmax = np.empty(n_keep)
    configs = np.empty((n_keep, N)) if keep_configurations else None
    kept = 0
    step = 0
    since_check = 0
    while step < m.steps:
        if step < m.burnin:
            sweeps = min(50, m.burnin - step)
        else:
            sweeps = min(BLOCK * m.thin, m.steps - step)
        # draw both arrays for the whole block so the stream is block-size independent
        normals = rng.standard_normal((sweeps, N))
        uniforms = rng.random((sweeps, N))
        if m.scan == "random":
            sites = rng.integers(0, N, size=(sweeps, N))
        else:
            sites = np.broadcast_to(np.arange(N), (sweeps, N)).copy()
        if step >= m.burnin:
            for k in range(0, sweeps, m.thin):
                j = min(k + m.thin, sweeps)
                ld = _run_block(x, ld, scale, accepted, normals[k:j], uniforms[k:j],
                                sites[k:j], qc, hc, hs, L)
                step += j - k
                if (step - m.burnin) % m.thin == 0 and kept < n_keep:
                    xmax[kept] = x.max()
                    if configs is not None:
                        configs[kept] = x
                    kept += 1
        else:
            accepted[:] = 0
            ld = _run_block(x, ld, scale, accepted, normals, uniforms, sites, qc, hc, hs, L)
            step += sweeps
            rate = accepted / np.maximum(np.bincount(sites.ravel(), minlength=N), 1)
            scale *= np.exp(np.clip(rate - TARGET_ACCEPTANCE, -0.5, 0.5) * 2.0)
            if step >= m.burnin:
                accepted[:] = 0
        since_check += sweeps
        if since_check >= CHECK_EVERY:
            since_check = 0
            fresh = _log_density(x, qc, hc, hs, L)
            if abs(fresh - ld) > 1e-8 * max(1.0, abs(fresh)):
                raise NumericalError(f"cached log-density drifted by {abs(fresh - ld):.2e}")
            ld = fresh
    n_after = max(m.steps - m.burnin, 1)
    return ChainOutput(xmax[:kept], None if configs is None else configs[:kept],
                       float(accepted.sum() / (n_after * N)), scale.copy(), float(ld))


def integrated_autocorrelation(series: np.ndarray, c: float = 5.0) -> float:
    """Sokal's windowed estimate of tau_int (in units of the series spacing)."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 4:
        return 1.0
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0:
        return 1.0
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    tau = 1.0
    for W in range(1, n):
        tau = 1.0 + 2.0 * float(np.sum(acf[1:W + 1]))
        if W >= c * tau:
            break
    return max(tau, 1.0)


@dataclass(frozen=True)
class MCMCResult:
    config: EnsembleConfig
    L: float
    chains: tuple[ChainOutput, ...]
    tau: tuple[float, ...]

    @property
    def x_max(self) -> np.ndarray:
        return np.concatenate([c.x_max for c in self.chains])

    @property
    def configurations(self) -> np.ndarray:
        return np.concatenate([c.configurations for c in self.chains])

    @property
    def ess(self) -> float:
        return float(sum(c.x_max.size / t for c, t in zip(self.chains, self.tau)))

    @property
    def acceptance(self) -> float:
        return float(np.mean([c.acceptance for c in self.chains]))


def run_mcmc(config: EnsembleConfig, L: float | None = None, start=None,
             keep_configurations: bool = False) -> MCMCResult:
    """Independent chains from equilibrium quantiles; thinned x_max per chain."""
    if L is None or start is None:
        fp, L0 = solve(config)
        L = L0 if L is None else L
        start = equilibrium_quantiles(fp.solution, config.N) if start is None else start
    chains = tuple(_run_chain(config, L, start, c, keep_configurations)
                   for c in range(config.mcmc.chains))
    tau = tuple(integrated_autocorrelation(c.x_max) for c in chains)
    worst = max(tau)
    if worst > 50.0:
        warnings.warn(f"x_max integrated autocorrelation {worst * config.mcmc.thin:.0f} sweeps "
                      f"exceeds 50 x thin", MixingWarning, stacklevel=2)
    return MCMCResult(config, L, chains, tau)


def series_standard_error(values_per_chain) -> float:
    """SE of the pooled mean of correlated chains via per-chain tau_int."""
    num = 0.0
    n_tot = 0
    for v in values_per_chain:
        v = np.asarray(v, dtype=float)
        tau = integrated_autocorrelation(v)
        num += v.size * np.var(v, ddof=1) * tau
        n_tot += v.size
    return math.sqrt(num) / n_tot


# --- reports ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


@dataclass
class ExperimentReport:
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add_table(self, name: str, header: list[str], rows: list[list]):
        self.tables[name] = (list(header), [list(r) for r in rows])

    def csv_text(self, name: str) -> str:
        header, rows = self.tables[name]
        lines = [",".join(header)] + [",".join(_fmt(v) for v in r) for r in rows]
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name in self.tables:
            p = out / f"{name}.csv"
            p.write_text(self.csv_text(name))
            paths.append(p)
        p = out / "meta.json"
        p.write_text(json.dumps(self.meta, indent=2, sort_keys=True, default=_json_default) + "\n")
        paths.append(p)
        return paths


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def base_meta(config: EnsembleConfig | None, **extra) -> dict:
    meta = {"versions": {"edgegas": __version__, "numpy": np.__version__,
                         "numba": numba.__version__, "python": platform.python_version()}}
    if config is not None:
        meta["config"] = config.to_dict()
        meta["seed"] = config.seed
    meta.update(extra)
    return meta


_TW_GRID = (-8.0, 6.0, 281)


@lru_cache(maxsize=1)
def tracy_widom_interpolant() -> CubicSpline:
    """Cubic spline of F_2 on [-8, 6]; F_2 < 1e-17 below and 1 - F_2 < 1e-9 above."""
    s = np.linspace(*_TW_GRID)
    return CubicSpline(s, [tracy_widom_pair(v)[0] for v in s])


def tw_cdf_fast(s):
    s = np.asarray(s, dtype=float)
    spl = tracy_widom_interpolant()
    out = np.clip(spl(np.clip(s, _TW_GRID[0], _TW_GRID[1])), 0.0, 1.0)
    out = np.where(s < _TW_GRID[0], 0.0, out)
    return np.where(s > _TW_GRID[1], 1.0, out)


def ks_distance_to_tw(samples) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = tw_cdf_fast(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def edge_fluctuation_experiment(config: EnsembleConfig, result: MCMCResult | None = None
                                ) -> ExperimentReport:
    t0 = time.perf_counter()
    fp, L = solve(config)
    sol = fp.solution
    prof = DeviationProfile.from_solution(sol)
    if result is None:
        result = run_mcmc(config, L, equilibrium_quantiles(sol, config.N))
    scale = prof.c_star * config.N ** (2.0 / 3.0)
    s = (result.x_max - sol.b) * scale
    ks = ks_distance_to_tw(s)
    grid = np.asarray(config.experiment.get("grid", np.linspace(-5.0, 2.0, 15)), dtype=float)
    xs = np.sort(s)
    rows = []
    for v in grid:
        emp = np.searchsorted(xs, v, side="right") / xs.size
        F = tracy_widom_pair(float(v))[0]
        rows.append([v, emp, F, emp - F])
    rep = ExperimentReport()
    rep.add_table("edge_cdf", ["s", "empirical_cdf", "F2", "difference"], rows)
    rep.add_table("edge_samples", ["chain", "index", "x_max", "s"],
                  [[c, i, xm, (xm - sol.b) * scale]
                   for c, ch in enumerate(result.chains) for i, xm in enumerate(ch.x_max)])
    rep.meta = base_meta(config, L=L, b=sol.b, c_star=prof.c_star, ks_distance=ks,
                         samples=int(s.size), ess=result.ess, tau=list(result.tau),
                         acceptance=result.acceptance, runtime_seconds=time.perf_counter() - t0)
    return rep


def determinantal_edge_ks(Q: ConfiningField, N: int, L: float | None = None,
                          grid=None, use_gamma: bool = False) -> float:
    """sup_s |P_N(x_max <= b + s / (c N^{2/3})) - F_2(s)| for h = 0, from Fredholm determinants."""
    from .equilibrium import SmoothField, equilibrium_measure

    L = default_L(Q) if L is None else L
    sol = equilibrium_measure(SmoothField(Q, L, None))
    K = cd_kernel(WeightSpec(N, Q, L))
    c = sol.gamma if use_gamma else sol.c_star
    grid = np.linspace(-6.0, 4.0, 81) if grid is None else np.asarray(grid, dtype=float)
    scale = c * N ** (2.0 / 3.0)
    return float(max(abs(gap_pair(K, sol.b + s / scale)[0] - tracy_widom_pair(s)[0]) for s in grid))


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return lo, hi


def tail_experiment(config: EnsembleConfig, grid=None, result: MCMCResult | None = None,
                    strict: bool = False) -> ExperimentReport:
    """Empirical P(x_max > t) with Wilson intervals against F_NV (and the Fredholm tail if h = 0)."""
    t0 = time.perf_counter()
    grid = config.experiment.get("grid", []) if grid is None else grid
    grid = [float(v) for v in grid]
    rep = ExperimentReport()
    header = ["t", "count", "n", "frequency", "wilson_lo", "wilson_hi", "F_NV",
              "fredholm_tail", "regime", "censored"]
    if not grid:
        rep.add_table("tail", header, [])
        rep.meta = base_meta(config, runtime_seconds=time.perf_counter() - t0)
        return rep
    fp, L = solve(config)
    sol = fp.solution
    prof = DeviationProfile.from_solution(sol)
    if result is None:
        result = run_mcmc(config, L, equilibrium_quantiles(sol, config.N))
    xm = result.x_max
    n = xm.size
    ess = result.ess
    K = cd_kernel(WeightSpec(config.N, config.Q, L)) if config.h.is_zero else None
    rows = []
    for t in grid:
        if t <= sol.b:
            raise ValidationError(f"experiment.grid: t = {t} is not above b = {sol.b:.6f}")
        k = int(np.count_nonzero(xm > t))
        lo, hi = wilson_interval(k, n)
        lf = log_f_nv(prof, config.N, t)
        expected = ess * math.exp(lf)
        censored = expected < 10
        if censored and strict:
            raise InsufficientTailSamples(f"expected tail count {expected:.2g} < 10 at t = {t}")
        fred = gap_pair(K, t)[1] if K is not None else float("nan")
        rows.append([t, k, n, k / n, lo, hi, math.exp(lf), fred,
                     regime(config.N, t, sol.b), censored])
    rep.add_table("tail", header, rows)
    rep.meta = base_meta(config, L=L, b=sol.b, ess=ess, samples=n,
                         runtime_seconds=time.perf_counter() - t0)
    return rep


def ks_pvalue(a, b) -> float:
    return float(stats.ks_2samp(a, b).pvalue)
