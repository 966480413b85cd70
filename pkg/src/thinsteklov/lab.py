"""Epsilon sweeps comparing 2D Steklov spectra with the 1D limit problem."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from . import __version__
from .core import Profile, ProblemParams, unit_ball_volume, validate_params
from .errors import (
    ConfigError,
    DegenerateFit,
    NonPositiveDeviation,
    ReportIOError,
    StudyError,
    ThinSteklovError,
)
from .plate2d import (
    BfsField,
    assemble_plate_forms,
    build_mesh_2d,
    solve_steklov_2d,
    trace_on_gamma,
)
from .sturm1d import (
    HermiteField,
    assemble_limit_pencil,
    build_mesh_1d,
    eval_field_1d,
    limit_modes,
    solve_limit_eigs,
)

CSV_COLUMNS = ("epsilon", "k", "lambda_2d", "lambda_1d", "ratio", "trace_error", "Nx", "Ny", "N1d")
TRACE_SAMPLES = 512
# relative gap below which neighbouring limit eigenvalues are treated as one cluster
CLUSTER_RTOL = 1e-3

MODES = ("study", "limit", "steklov")


@dataclass(frozen=True)
class StudyConfig:
    params: ProblemParams
    profile: Profile
    epsilons: tuple = (0.2, 0.1, 0.05)
    k_max: int = 3
    nx: int = 64
    ny: int = 4
    n1d: int = 128
    quad: int = 4
    mode: str = "study"

    def validate(self) -> "StudyConfig":
        validate_params(self.params)
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.k_max < 1:
            raise ConfigError("k_max must be >= 1")
        if self.quad < 1:
            raise ConfigError("quadrature order must be >= 1")
        if self.mode != "limit":
            eps = self.epsilons
            if len(eps) == 0:
                raise ConfigError("epsilon list is empty")
            if any(not e > 0 for e in eps):
                raise ConfigError("epsilons must be positive")
            if any(b >= a for a, b in zip(eps, eps[1:])):
                raise ConfigError("epsilons must be strictly decreasing")
            if self.params.n != 2:
                raise ConfigError("the 2D leg requires n = 2; use the 1D-only mode")
        return self


@dataclass
class ReportRow:
    epsilon: Optional[float]
    k: int
    lambda_2d: Optional[float]
    lambda_1d: Optional[float]
    ratio: Optional[float]
    trace_error: Optional[float]
    Nx: Optional[int]
    Ny: Optional[int]
    N1d: Optional[int]


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


def estimate_rate(pairs) -> float:
    """Least-squares slope of log(deviation) against log(epsilon)."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise DegenerateFit("need at least three (epsilon, deviation) pairs")
    eps = np.array([p[0] for p in pairs], dtype=float)
    dev = np.array([p[1] for p in pairs], dtype=float)
    if np.any(dev <= 0) or np.any(eps <= 0):
        raise NonPositiveDeviation("epsilons and deviations must be positive")
    x = np.log(eps)
    if np.ptp(x) == 0:
        raise DegenerateFit("all epsilons coincide")
    slope, _ = np.polyfit(x, np.log(dev), 1)
    return float(slope)


def _sample_grid(l):
    return np.linspace(-l, l, TRACE_SAMPLES)


def _l2(values, x):
    return math.sqrt(trapezoid(values * values, x))


def _mean_trace(field_2d: BfsField, x):
    return 0.5 * (trace_on_gamma(field_2d, "top", x) + trace_on_gamma(field_2d, "bottom", x))


def _weighted_unit(m, x, params, profile):
    """Rescale sampled ``m`` to unit norm in the ball-weighted space."""
    n = params.n
    rho = profile.evaluate(x)[0]
    wgt = (n - 1) * unit_ball_volume(n - 1) * rho ** (n - 2)
    norm = math.sqrt(trapezoid(wgt * m * m, x))
    return m / norm if norm > 0 else m


def compare_eigenfunction_traces(field_2d: BfsField, v_k: HermiteField, params: ProblemParams,
                                 profile: Profile):
    """Sign-aligned relative L2 distance between the averaged 2D trace and ``v_k``.

    Returns ``(error, sign)`` where ``sign`` in {+1, -1} multiplies the 2D
    trace. Both functions are sampled on a uniform grid of
    ``TRACE_SAMPLES`` points.
    """
    x = _sample_grid(field_2d.mesh.l)
    m = _weighted_unit(_mean_trace(field_2d, x), x, params, profile)
    # same discrete norm on both sides, so an exact match gives zero
    v = _weighted_unit(eval_field_1d(v_k, x)[0], x, params, profile)
    ref = _l2(v, x)
    errs = {s: _l2(s * m - v, x) / ref for s in (1, -1)}
    sign = 1 if errs[1] <= errs[-1] else -1
    return errs[sign], sign


def _subspace_error(fields_2d, v_k, params, profile):
    """Distance of ``v_k`` from the span of several averaged 2D traces."""
    x = _sample_grid(fields_2d[0].mesh.l)
    w = np.sqrt(np.gradient(x))
    basis = np.array([_mean_trace(f, x) * w for f in fields_2d]).T
    q, _ = np.linalg.qr(basis)
    v = eval_field_1d(v_k, x)[0] * w
    resid = v - q @ (q.T @ v)
    return float(np.linalg.norm(resid) / np.linalg.norm(v))


def _clusters(values):
    """Index groups of nearly equal eigenvalues."""
    groups = [[0]]
    for k in range(1, len(values)):
        if values[k] - values[k - 1] < CLUSTER_RTOL * values[k]:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def _solve_2d(config, eps):
    params = config.params.with_epsilon(eps)
    mesh = build_mesh_2d(params.l, config.nx, config.ny)
    try:
        pencil = assemble_plate_forms(params, config.profile, mesh, quad=config.quad)
        sol = solve_steklov_2d(pencil, config.k_max)
    except ThinSteklovError as exc:
        raise StudyError(eps, None, exc) from exc
    fields = [BfsField(mesh, sol.vectors[:, k].copy()) for k in range(config.k_max)]
    return sol.values, fields


def run_convergence_study(config: StudyConfig, threads: int = 1) -> ConvergenceReport:
    """Solve the limit problem once and, unless 1D-only, every 2D problem of the sweep.

    Rows come out sorted by ``k`` and then by descending epsilon. Independent
    epsilon jobs run on ``threads`` worker threads; results are merged in
    config order, so the report does not depend on ``threads``.
    """
    config.validate()
    params, profile = config.params, config.profile
    try:
        pencil1 = assemble_limit_pencil(params, profile, build_mesh_1d(params.l, config.n1d),
                                        quad=config.quad)
        sol1 = solve_limit_eigs(pencil1, config.k_max)
    except ThinSteklovError as exc:
        raise StudyError(None, None, exc) from exc
    lam1 = sol1.values
    modes = limit_modes(pencil1, sol1)

    report = ConvergenceReport()
    report.metadata = {
        "tool": "thinsteklov",
        "version": __version__,
        "mode": config.mode,
        "config": _config_echo(config),
    }

    if config.mode == "limit":
        for k in range(config.k_max):
            report.rows.append(ReportRow(None, k + 1, None, float(lam1[k]), None, None,
                                         None, None, config.n1d))
        return report

    eps_list = list(config.epsilons)
    if config.mode == "steklov":
        eps_list = eps_list[:1]
    if threads > 1 and len(eps_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda e: _solve_2d(config, e), eps_list))
    else:
        results = [_solve_2d(config, e) for e in eps_list]

    if config.mode == "steklov":
        lam2, _ = results[0]
        for k in range(config.k_max):
            report.rows.append(ReportRow(eps_list[0], k + 1, float(lam2[k]), None, None, None,
                                         config.nx, config.ny, None))
        return report

    groups = _clusters(lam1)
    flagged = [[k + 1 for k in g] for g in groups if len(g) > 1]
    report.metadata["clusters"] = flagged
    group_of = {k: g for g in groups for k in g}

    for k in range(config.k_max):
        for eps, (lam2, fields) in zip(eps_list, results):
            ratio = float(lam2[k] / (eps * lam1[k]))
            try:
                g = group_of[k]
                if len(g) > 1:
                    err = _subspace_error([fields[j] for j in g], modes[k], params, profile)
                else:
                    err, _ = compare_eigenfunction_traces(fields[k], modes[k], params, profile)
            except ThinSteklovError as exc:
                raise StudyError(eps, k + 1, exc) from exc
            report.rows.append(ReportRow(float(eps), k + 1, float(lam2[k]), float(lam1[k]), ratio,
                                         float(err), config.nx, config.ny, config.n1d))

    for k in range(1, config.k_max + 1):
        pairs = [(r.epsilon, abs(r.ratio - 1.0)) for r in report.rows if r.k == k]
        try:
            report.rates[k] = estimate_rate(pairs)
        except (DegenerateFit, NonPositiveDeviation):
            report.rates[k] = None
    report.metadata["rates"] = {str(k): v for k, v in report.rates.items()}
    return report


def _config_echo(config: StudyConfig) -> dict:
    return {
        "n": config.params.n,
        "sigma": config.params.sigma,
        "mu": config.params.mu,
        "l": config.params.l,
        "profile.kind": config.profile.kind,
        "profile.coeffs": list(config.profile.coeffs),
        "epsilons": list(config.epsilons),
        "k_max": config.k_max,
        "nx": config.nx,
        "ny": config.ny,
        "n1d": config.n1d,
        "quad": config.quad,
    }


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17e}"


def report_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def report_json(report: ConvergenceReport) -> str:
    doc = {
        "rows": [asdict(r) for r in report.rows],
        "rates": {str(k): v for k, v in report.rates.items()},
        "metadata": report.metadata,
    }
    return json.dumps(doc, indent=2)


def write_report(report: ConvergenceReport, fmt: str, path) -> None:
    """Write ``report`` as ``csv`` or ``json`` to ``path``."""
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "json":
        text = report_json(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportIOError(str(exc)) from exc


# -- config files -----------------------------------------------------------

CONFIG_KEYS = {
    "n": int,
    "sigma": float,
    "mu": float,
    "l": float,
    "profile.kind": str,
    "profile.a": float,
    "profile.b": float,
    "profile.coeffs": lambda s: tuple(float(v) for v in s.split(",") if v.strip()),
    "epsilons": lambda s: tuple(float(v) for v in s.split(",") if v.strip()),
    "k_max": int,
    "nx": int,
    "ny": int,
    "n1d": int,
    "quad": int,
}

CONFIG_DEFAULTS = {
    "n": 2,
    "sigma": 0.3,
    "mu": 1.0,
    "l": 1.0,
    "profile.kind": "constant",
    "profile.a": 1.0,
    "profile.b": 0.0,
    "profile.coeffs": (1.0,),
    "epsilons": (0.2, 0.1, 0.05),
    "k_max": 3,
    "nx": 64,
    "ny": 4,
    "n1d": 128,
    "quad": 4,
}


def parse_config(text: str, mode: str = "study", overrides: Optional[dict] = None) -> StudyConfig:
    """Build a :class:`StudyConfig` from flat ``key = value`` text.

    Blank lines and ``#`` comments are ignored; unknown keys are errors.
    """
    values = dict(CONFIG_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from exc
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    l = values["l"]
    kind = values["profile.kind"]
    try:
        if kind == "constant":
            profile = Profile.constant(values["profile.a"], l)
        elif kind == "polynomial":
            profile = Profile.polynomial(values["profile.coeffs"], l)
        elif kind == "cosine":
            profile = Profile.cosine_bump(values["profile.a"], values["profile.b"], l)
        else:
            raise ConfigError(f"unknown profile kind {kind!r}")
    except ThinSteklovError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    params = ProblemParams(values["n"], values["sigma"], values["mu"], l)
    cfg = StudyConfig(params, profile, values["epsilons"], values["k_max"], values["nx"],
                      values["ny"], values["n1d"], values["quad"], mode)
    try:
        return cfg.validate()
    except ConfigError:
        raise
    except ThinSteklovError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, mode: str = "study", overrides: Optional[dict] = None) -> StudyConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, mode, overrides)
