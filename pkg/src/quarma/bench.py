"""Configuration-driven experiments: multi-run averaging, summaries, CSV and SVG output."""

from __future__ import annotations

import csv
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .baselines import BASELINES
from .learners import DecisionSet, HyperParams, Trace, run_learner, select_m, write_traces_csv
from .signal_model import DEFAULT_BURN_IN, NoiseSpec, QarmaSpec, generate_qarma

QUATERNION_ALGOS = ("qogd", "qons")
ALGORITHMS = QUATERNION_ALGOS + tuple(BASELINES)
LABELS = {
    "qogd": "qARMA-QOGD",
    "qons": "qARMA-ONS",
    "cw_ogd": "ARMA-OGD (component-wise)",
    "cw_ons": "ARMA-ONS (component-wise)",
    "mc_ogd": "ARMA-MOGD (multichannel)",
    "mc_ons": "ARMA-MONS (multichannel)",
}


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    spec: QarmaSpec
    noise: NoiseSpec
    m: Union[int, str] = "auto"
    T: int = 10_000
    runs: int = 20
    base_seed: int = 0
    burn_in: int = DEFAULT_BURN_IN
    algorithms: tuple = QUATERNION_ALGOS
    params: HyperParams = field(default_factory=HyperParams)
    output_dir: Optional[str] = None
    name: str = "experiment"

    @property
    def resolved_m(self) -> int:
        if self.m == "auto":
            return select_m(replace(self.params, T=self.T), self.spec.q)
        return int(self.m)

    @property
    def dim(self) -> int:
        return self.spec.p + self.resolved_m

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, base_seed=seed)


_SCHEMA = {
    "model": {"p", "q", "alpha", "beta"},
    "noise": {"law", "sigma", "half_width"},
    "experiment": {"m", "T", "runs", "base_seed", "burn_in", "algorithms", "output_dir", "name"},
    "hyper": {"c", "H", "G", "D", "lambda", "eta", "ogd_eta", "ogd_eta_max", "eps", "lambda_max", "L", "M_max"},
}


def _locate(text: str, section: str, key: Optional[str] = None) -> str:
    """``" (line N)"`` for ``key`` inside ``[section]``, or empty when not found."""
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        head = re.match(r"^\[\s*([^\]]+?)\s*\]", stripped)
        if head:
            current = head.group(1)
            if key is None and current == section:
                return f" (line {lineno})"
            continue
        if current == section and key is not None and re.match(rf"^{re.escape(key)}\s*=", stripped):
            return f" (line {lineno})"
    return ""


def _quats(values, where):
    if not isinstance(values, list):
        raise ConfigError(f"{where}: expected a list of \"a,b,c,d\" strings")
    out = []
    for k, v in enumerate(values):
        if isinstance(v, str):
            parts = v.split(",")
        elif isinstance(v, list):
            parts = v
        else:
            raise ConfigError(f"{where}[{k}]: expected \"a,b,c,d\", got {v!r}")
        try:
            q = [float(s) for s in parts]
        except (TypeError, ValueError):
            raise ConfigError(f"{where}[{k}]: {v!r} is not four reals") from None
        if len(q) != 4:
            raise ConfigError(f"{where}[{k}]: {v!r} needs exactly 4 components")
        out.append(q)
    return np.array(out, dtype=float).reshape(-1, 4)


def parse_config_text(text: str, name: str = "experiment", base_dir: Optional[Path] = None) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{name}: parse error: {exc}") from None

    problems: List[str] = []
    for section, body in raw.items():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]{_locate(text, section)}")
            continue
        if not isinstance(body, dict):
            problems.append(f"[{section}] must be a table")
            continue
        for key in body:
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key {section}.{key}{_locate(text, section, key)}")
    if problems:
        raise ConfigError(f"{name}: " + "; ".join(problems))

    model = raw.get("model", {})
    noise = raw.get("noise", {})
    exp = raw.get("experiment", {})
    hyper = raw.get("hyper", {})

    def field_error(section, key, msg):
        return ConfigError(f"{name}: {section}.{key}{_locate(text, section, key)}: {msg}")

    if "alpha" not in model:
        raise ConfigError(f"{name}: model.alpha is required")
    alpha = _quats(model["alpha"], "model.alpha")
    beta = _quats(model.get("beta", []), "model.beta")
    for key, arr in (("p", alpha), ("q", beta)):
        if key in model and model[key] != arr.shape[0]:
            raise field_error("model", key, f"{model[key]} does not match the {arr.shape[0]} listed coefficients")
    try:
        spec = QarmaSpec(alpha, beta)
    except ValueError as exc:
        raise ConfigError(f"{name}: model: {exc}") from None

    law = noise.get("law", "gaussian")
    scale_key = {"gaussian": "sigma", "uniform": "half_width"}.get(law)
    if scale_key is None:
        raise field_error("noise", "law", f"unknown law {law!r} (gaussian or uniform)")
    other = {"sigma", "half_width"} - {scale_key}
    if other & set(noise):
        raise field_error("noise", other.pop(), f"does not apply to the {law} law (use {scale_key})")
    scale = noise.get(scale_key, 0.3 if law == "gaussian" else 0.5)

    hkw = {}
    for key, val in hyper.items():
        hkw["lam" if key == "lambda" else key] = val
    for key, val in hkw.items():
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise field_error("hyper", "lambda" if key == "lam" else key, f"expected a number, got {val!r}")
    T = exp.get("T", 10_000)
    if isinstance(T, int) and not isinstance(T, bool) and T >= 1:
        hkw["T"] = T

    m = exp.get("m", "auto")
    algorithms = exp.get("algorithms", list(QUATERNION_ALGOS))
    violations = []
    if not (m == "auto" or (isinstance(m, int) and not isinstance(m, bool) and m >= 0)):
        violations.append(f"experiment.m must be a nonnegative integer or \"auto\" (got {m!r})")
    for key, lo in (("T", 1), ("runs", 1), ("burn_in", 0)):
        v = exp.get(key)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < lo):
            violations.append(f"experiment.{key} must be an integer >= {lo} (got {v!r})")
    if not isinstance(algorithms, list) or not algorithms:
        violations.append("experiment.algorithms must be a non-empty list")
    else:
        unknown = [a for a in algorithms if a not in ALGORITHMS]
        if unknown:
            violations.append(f"experiment.algorithms: unknown {unknown} (choose from {list(ALGORITHMS)})")
        if len(set(algorithms)) != len(algorithms):
            violations.append("experiment.algorithms lists an algorithm twice")
    try:
        noise_spec = NoiseSpec(law, float(scale))
    except (TypeError, ValueError) as exc:
        violations.append(f"noise: {exc}")
    try:
        params = HyperParams(**hkw)
    except (TypeError, ValueError) as exc:
        violations.append(f"hyper: {exc}")
    if violations:
        raise ConfigError(f"{name}: invalid configuration: " + "; ".join(violations))
    try:
        spec.check_radius(params.c)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None

    out_dir = exp.get("output_dir")
    if out_dir is not None and base_dir is not None and not Path(out_dir).is_absolute():
        out_dir = str(base_dir / out_dir)
    cfg = ExperimentConfig(
        spec=spec,
        noise=noise_spec,
        m=m,
        T=int(exp.get("T", 10_000)),
        runs=int(exp.get("runs", 20)),
        base_seed=int(exp.get("base_seed", 0)),
        burn_in=int(exp.get("burn_in", DEFAULT_BURN_IN)),
        algorithms=tuple(algorithms),
        params=params,
        output_dir=out_dir,
        name=str(exp.get("name", name)),
    )
    try:
        cfg.resolved_m
    except ValueError as exc:
        raise ConfigError(f"{name}: experiment.m = \"auto\": {exc}") from None
    return cfg


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config_text(path.read_text(), name=path.stem, base_dir=path.resolve().parent)


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``"example1"``."""
    here = Path(__file__).parent / "configs"
    path = here / (name if name.endswith(".toml") else f"{name}.toml")
    if not path.is_file():
        available = sorted(p.stem for p in here.glob("*.toml"))
        raise ConfigError(f"no bundled config {name!r}; available: {available}")
    return path


def theoretical_floor(noise: NoiseSpec) -> float:
    """``E|eps|^2``: the loss of the best predictor when the noise is unpredictable."""
    return noise.second_moment


class RunFailed(RuntimeError):
    pass


@dataclass
class RunResult:
    run: int
    seed: int
    losses: Dict[str, np.ndarray]
    seconds: Dict[str, float]
    diagnostics: Dict[str, dict]


def run_algorithm(algo: str, series, cfg: ExperimentConfig):
    dset = DecisionSet(cfg.params.c, cfg.dim)
    if algo in QUATERNION_ALGOS:
        return run_learner(algo, series, cfg.params, dset)
    return BASELINES[algo](series, cfg.params, cfg.dim)


def run_single(cfg: ExperimentConfig, run: int) -> RunResult:
    seed = cfg.base_seed + run
    try:
        series, _ = generate_qarma(cfg.spec, cfg.noise.with_seed(seed), cfg.T, cfg.burn_in)
        losses, seconds, diags = {}, {}, {}
        for algo in cfg.algorithms:
            t0 = time.perf_counter()
            trace = run_algorithm(algo, series, cfg)
            seconds[algo] = time.perf_counter() - t0
            losses[algo] = trace.loss
            diags[algo] = {k: v for k, v in trace.diagnostics.items() if np.isscalar(v)}
    except Exception as exc:
        raise RunFailed(f"run {run} (seed {seed}): {type(exc).__name__}: {exc}") from exc
    return RunResult(run, seed, losses, seconds, diags)


@dataclass
class BenchmarkReport:
    """Averaged results of one experiment.

    ``run_losses[algo]`` and ``run_curves[algo]`` are ``(runs, T)`` arrays of
    per-step losses and running averages.
    """

    name: str
    floor: float
    algorithms: tuple
    run_losses: Dict[str, np.ndarray]
    run_curves: Dict[str, np.ndarray]
    run_seconds: Dict[str, np.ndarray]
    diagnostics: Dict[str, List[dict]]
    seeds: List[int]

    @property
    def T(self) -> int:
        return next(iter(self.run_curves.values())).shape[1]

    @property
    def runs(self) -> int:
        return len(self.seeds)

    def curve(self, algo: str) -> np.ndarray:
        return self.run_curves[algo].mean(axis=0)

    def per_run_final(self, algo: str) -> np.ndarray:
        return self.run_curves[algo][:, -1].copy()

    def final_avg_mse(self, algo: str) -> float:
        return float(self.curve(algo)[-1])

    def ratio(self, algo: str) -> float:
        f = self.final_avg_mse(algo)
        return f / self.floor if self.floor > 0 else math.inf

    def excess_at(self, algo: str, ts) -> np.ndarray:
        """Average excess loss ``(cumulative loss - t floor) / t`` at 1-based times ``ts``."""
        c = self.curve(algo)
        return np.array([c[t - 1] - self.floor for t in ts])

    def summary_rows(self):
        return [(a, self.final_avg_mse(a), self.floor, self.ratio(a)) for a in self.algorithms]


def run_experiment(cfg: ExperimentConfig, workers: int = 1, on_run=None) -> BenchmarkReport:
    """Run every configured algorithm on ``cfg.runs`` independent series.

    Run ``r`` uses seed ``base_seed + r`` and all algorithms see the same
    series.  Results are reduced in run order whatever the worker count.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    indices = range(cfg.runs)
    if workers == 1 or cfg.runs == 1:
        results = []
        for r in indices:
            results.append(run_single(cfg, r))
            if on_run is not None:
                on_run(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = []
            for res in pool.map(run_single, [cfg] * cfg.runs, indices):
                results.append(res)
                if on_run is not None:
                    on_run(res)
    losses, curves, secs, diags = {}, {}, {}, {}
    t = np.arange(1, cfg.T + 1)
    for algo in cfg.algorithms:
        losses[algo] = np.stack([res.losses[algo] for res in results])
        curves[algo] = np.cumsum(losses[algo], axis=1) / t
        secs[algo] = np.array([res.seconds[algo] for res in results])
        diags[algo] = [res.diagnostics[algo] for res in results]
    return BenchmarkReport(
        name=cfg.name,
        floor=theoretical_floor(cfg.noise),
        algorithms=tuple(cfg.algorithms),
        run_losses=losses,
        run_curves=curves,
        run_seconds=secs,
        diagnostics=diags,
        seeds=[res.seed for res in results],
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def write_curves_csv(report: BenchmarkReport, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algo", "t", "avg_mse"])
        for algo in report.algorithms:
            for t, v in enumerate(report.curve(algo), start=1):
                w.writerow([algo, t, _fmt(v)])
    return path


def write_summary_csv(report: BenchmarkReport, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algo", "final_avg_mse", "floor", "ratio"])
        for algo, final, floor, ratio in report.summary_rows():
            w.writerow([algo, _fmt(final), _fmt(floor), _fmt(ratio)])
    return path


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def render_svg(report: BenchmarkReport, width: int = 860, height: int = 460) -> str:
    """Log-x chart of the averaged running MSE with a dashed line at the floor."""
    left, right, top, bottom = 70, 250, 30, 50
    pw, ph = width - left - right, height - top - bottom
    T = report.T
    xmax = math.log10(T) if T > 1 else 1.0
    # scale y to the settled part of the curves; early transients are clipped
    start = max(1, T // 100)
    tail = np.concatenate([report.curve(a)[start - 1:] for a in report.algorithms])
    tail = tail[np.isfinite(tail)]
    ytop = max(2.0 * report.floor, float(np.quantile(tail, 0.95)) if tail.size else 1.0) * 1.1
    ytop = ytop if ytop > 0 else 1.0

    def px(t):
        return left + pw * (math.log10(t) / xmax)

    def py(v):
        v = min(max(v, 0.0), ytop)
        return top + ph * (1.0 - v / ytop)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
        f'<text x="{left + pw / 2:.1f}" y="{top - 10}" text-anchor="middle">{report.name}</text>',
    ]
    for k in range(int(math.floor(xmax)) + 1):
        x = px(10**k)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle">1e{k}</text>')
    for k in range(6):
        v = ytop * k / 5
        y = py(v)
        out.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="#333"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">t</text>')
    out.append(
        f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph / 2:.1f})">average MSE</text>'
    )
    # thin the polyline to roughly one point per horizontal pixel in log-t
    ts = np.unique(np.round(np.logspace(0, math.log10(T), num=min(T, 4 * pw))).astype(int))
    for idx, algo in enumerate(report.algorithms):
        c = report.curve(algo)
        pts = " ".join(f"{px(t):.2f},{py(c[t - 1]):.2f}" for t in ts)
        color = _COLORS[idx % len(_COLORS)]
        out.append(f'<polyline data-algo="{algo}" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 18 * idx
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}">{LABELS.get(algo, algo)}</text>')
    fy = py(report.floor)
    out.append(
        f'<line class="floor" x1="{left}" y1="{fy:.2f}" x2="{left + pw}" y2="{fy:.2f}" '
        f'stroke="#000" stroke-dasharray="6,4" data-value="{_fmt(report.floor)}"/>'
    )
    ly = top + 14 + 18 * len(report.algorithms)
    out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="#000" stroke-dasharray="6,4"/>')
    out.append(f'<text x="{left + pw + 38}" y="{ly + 4}">floor {report.floor:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report_traces(report: BenchmarkReport, path) -> Path:
    """Per-run traces in the ``run, algo, t, loss, avg_mse`` schema."""
    pairs = []
    for algo in report.algorithms:
        for r in range(report.runs):
            pairs.append((r, Trace(algo, report.run_losses[algo][r])))
    return write_traces_csv(path, sorted(pairs, key=lambda p: p[0]))


def emit_outputs(report: BenchmarkReport, directory) -> Dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "curves": write_curves_csv(report, directory / "curves.csv"),
        "summary": write_summary_csv(report, directory / "summary.csv"),
        "plot": directory / "plot.svg",
    }
    paths["plot"].write_text(render_svg(report))
    return paths
