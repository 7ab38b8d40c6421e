"""Command-line orchestration: ``randsource {sample,forward,sweep,invert,validate}``.

Runs are described by an INI file (see :data:`DEFAULTS` for every key) and
write into ``<out>/<config hash>/``. Exit codes: 0 success, 1 failed
validation, 2 invalid configuration, 3 missing input file, 4 geometry error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import estimator as est
from . import inversion as inv
from .forward import GeometryError, ResolutionWarning, field_table, write_field_csv
from .greens import ElasticParams
from .randfield import (FieldSpec, SmoothBump, SpecError, fit_slope, load_sample, radial_power_spectrum,
                        sample_field, save_sample, unweighted_field)

EXIT_OK, EXIT_FAIL, EXIT_SPEC, EXIT_MISSING, EXIT_GEOMETRY = 0, 1, 2, 3, 4

#: Every configuration key with its default value, as INI text. Empty
#: ``order`` and ``grid_n`` resolve to ``m = d`` and 64 (2D) or 32 (3D) cells.
DEFAULTS = {
    "experiment": {"model": "acoustic2", "seed": "0"},
    "field": {"order": "", "grid_n": "", "padding": "2.0"},
    "elastic": {"lam": "2.0", "mu": "1.0"},
    "forward": {"frequencies": "10, 20, 40"},
    "sweep": {"upper": "150.0", "step": "0.2", "oracle": "false", "fit_frequencies": "4"},
    "inversion": {"grid_n": "32", "half_width": "", "lambdas": "1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1",
                  "nonneg": "false", "constants": "empirical"},
}
DEFAULT_GRID = {2: 64, 3: 32}
DEFAULT_BUMP = {2: ("0.0, 0.0", "1.0"), 3: ("0.0, 0.0, 0.0", "1.0")}
DEFAULT_POINTS = {2: "3.0, 0.0; 0.0, 3.0; -3.0, 0.0; 0.0, -3.0", 3: "3.0, 0.0, 0.0; 0.0, 3.0, 0.0; 0.0, 0.0, 3.0"}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _fmt(values):
    return ", ".join(repr(float(v)) for v in values)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    order: float
    bumps: tuple
    grid_n: int
    padding: float
    points: tuple
    seed: int = 0
    lam: float = 2.0
    mu: float = 1.0
    frequencies: tuple = (10.0, 20.0, 40.0)
    upper: float = 150.0
    step: float = 0.2
    oracle: bool = False
    fit_frequencies: int = 4
    inv_grid_n: int = 32
    inv_half_width: float | None = None
    lambdas: tuple = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    nonneg: bool = False
    constants: str = "empirical"

    def __post_init__(self):
        try:
            d = est.model_dimension(self.model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not d <= self.order < d + 0.5:
            raise ConfigError(f"order m must satisfy {d} <= m < {d + 0.5}")
        if any(b.dimension != d for b in self.bumps) or not self.bumps:
            raise ConfigError(f"bumps must have {d} coordinates")
        if any(len(p) != d for p in self.points) or not self.points:
            raise ConfigError(f"points must have {d} coordinates")
        if self.constants not in ("paper", "empirical"):
            raise ConfigError("constants must be 'paper' or 'empirical'")
        if self.grid_n < 4 or self.inv_grid_n < 2:
            raise ConfigError("grid sizes too small")
        if any(lam < 0 for lam in self.lambdas):
            raise ConfigError("lambdas must be nonnegative")

    @property
    def dimension(self):
        return est.model_dimension(self.model)

    @property
    def elastic(self):
        return est.is_elastic(self.model)

    @property
    def weight_exponent(self):
        return est.weight_exponent(self.model, self.order)

    def params(self, omega=1.0):
        return ElasticParams(omega, self.lam, self.mu) if self.elastic else None

    def field_spec(self):
        comps = self.dimension if self.elastic else 1
        return FieldSpec.around(self.bumps, self.order, self.grid_n, self.padding, comps)

    def sweep(self):
        return est.FrequencySweep(self.upper, self.step, self.weight_exponent)

    # -- INI round trip ----------------------------------------------------
    @classmethod
    def from_ini(cls, text):
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_dict(DEFAULTS)
        try:
            cp.read_string(text)
            model = cp.get("experiment", "model")
            d = est.model_dimension(model)
            bump_sections = sorted((s for s in cp.sections() if s.startswith("bump")),
                                   key=lambda s: int(s.split(".")[1]) if "." in s else 0)
            if not bump_sections:
                cp.read_dict({"bump.0": {"center": DEFAULT_BUMP[d][0], "radius": DEFAULT_BUMP[d][1]}})
                bump_sections = ["bump.0"]
            bumps = tuple(SmoothBump(_floats(cp.get(s, "center")), cp.getfloat(s, "radius"),
                                     cp.getfloat(s, "amplitude", fallback=1.0)) for s in bump_sections)
            pts_text = cp.get("points", "coordinates", fallback=DEFAULT_POINTS[d])
            points = tuple(_floats(p) for p in pts_text.split(";") if p.strip())
            grid_n = cp.get("field", "grid_n")
            order = cp.get("field", "order")
            half = cp.get("inversion", "half_width")
            return cls(
                model=model,
                order=float(order) if order.strip() else float(d),
                bumps=bumps,
                grid_n=int(grid_n) if grid_n.strip() else DEFAULT_GRID[d],
                padding=cp.getfloat("field", "padding"),
                points=points,
                seed=cp.getint("experiment", "seed"),
                lam=cp.getfloat("elastic", "lam"),
                mu=cp.getfloat("elastic", "mu"),
                frequencies=_floats(cp.get("forward", "frequencies")),
                upper=cp.getfloat("sweep", "upper"),
                step=cp.getfloat("sweep", "step"),
                oracle=cp.getboolean("sweep", "oracle"),
                fit_frequencies=cp.getint("sweep", "fit_frequencies"),
                inv_grid_n=cp.getint("inversion", "grid_n"),
                inv_half_width=float(half) if half.strip() else None,
                lambdas=_floats(cp.get("inversion", "lambdas")),
                nonneg=cp.getboolean("inversion", "nonneg"),
                constants=cp.get("inversion", "constants"),
            )
        except (configparser.Error, ValueError, SpecError) as exc:
            raise ConfigError(str(exc)) from None

    def to_ini(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp["experiment"] = {"model": self.model, "seed": str(self.seed)}
        cp["field"] = {"order": repr(self.order), "grid_n": str(self.grid_n), "padding": repr(self.padding)}
        for i, b in enumerate(self.bumps):
            cp[f"bump.{i}"] = {"center": _fmt(b.center), "radius": repr(b.radius), "amplitude": repr(b.amplitude)}
        cp["points"] = {"coordinates": "; ".join(_fmt(p) for p in self.points)}
        cp["elastic"] = {"lam": repr(self.lam), "mu": repr(self.mu)}
        cp["forward"] = {"frequencies": _fmt(self.frequencies)}
        cp["sweep"] = {"upper": repr(self.upper), "step": repr(self.step),
                       "oracle": str(self.oracle).lower(), "fit_frequencies": str(self.fit_frequencies)}
        cp["inversion"] = {"grid_n": str(self.inv_grid_n),
                           "half_width": "" if self.inv_half_width is None else repr(self.inv_half_width),
                           "lambdas": _fmt(self.lambdas), "nonneg": str(self.nonneg).lower(),
                           "constants": self.constants}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def digest(self):
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    command: str
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def write(self, directory):
        path = Path(directory) / f"manifest-{self.command}.json"
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n")
        return path


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _run_dir(cfg, out):
    path = Path(out) / cfg.digest()
    path.mkdir(parents=True, exist_ok=True)
    (path / "config.ini").write_text(cfg.to_ini())
    return path


def cmd_sample(cfg: ExperimentConfig, out):
    run = _run_dir(cfg, out)
    t0 = time.perf_counter()
    spec = cfg.field_spec()
    smp = sample_field(spec, cfg.seed)
    json_path, npy_path = save_sample(smp, run / "sample")
    spectra = {}
    for c in range(spec.components):
        k, p = radial_power_spectrum(unweighted_field(spec, cfg.seed, c), spec.grid.spacing)
        spectra[f"component_{c}"] = {"slope": fit_slope(k, p, spec.grid.spacing)}
    _write_json(run / "spectrum.json", {"expected_slope": -cfg.order, "components": spectra})
    return run, {"sample": [json_path.name, npy_path.name], "spectrum": "spectrum.json"}, time.perf_counter() - t0


def _load_or_sample(cfg, run, allow_seed):
    stem = run / "sample"
    if stem.with_suffix(".json").exists() and stem.with_suffix(".npy").exists():
        return load_sample(stem)
    if allow_seed:
        smp = sample_field(cfg.field_spec(), cfg.seed)
        save_sample(smp, stem)
        return smp
    raise FileNotFoundError(f"no sample in {run}; run 'sample' first or pass --seed")


def cmd_forward(cfg, out, allow_seed=False):
    run = _run_dir(cfg, out)
    t0 = time.perf_counter()
    smp = _load_or_sample(cfg, run, allow_seed)
    vals = field_table(smp, cfg.frequencies, np.array(cfg.points), cfg.params())
    write_field_csv(run / "field.csv", cfg.frequencies, vals)
    return run, {"field": "field.csv"}, time.perf_counter() - t0


def _fit_frequencies(cfg, spec):
    # stay below half the grid Nyquist wavenumber so the fit sees the unaliased regime
    hi = min(cfg.upper, math.pi / (2 * spec.grid.spacing))
    if cfg.elastic:
        hi /= ElasticParams(1.0, cfg.lam, cfg.mu).c_s
    return np.linspace(max(1.0, hi / 3), hi, max(cfg.fit_frequencies, 1))


def cmd_sweep(cfg, out, allow_seed=False):
    run = _run_dir(cfg, out)
    t0 = time.perf_counter()
    smp = _load_or_sample(cfg, run, allow_seed)
    sweep = cfg.sweep()
    pts = np.array(cfg.points)
    prm = cfg.params()
    sq = est.squared_field(smp, sweep.frequencies, pts, cfg.model, prm)
    est.write_sweep_csv(run / "sweep.csv", sweep, sq)
    values = sweep.average(sq, axis=0)
    spec = smp.spec
    riesz = est.riesz_potential(spec.bumps, pts, est.riesz_exponent(cfg.model))
    paper_c = est.strength_constant(cfg.model, cfg.order, cfg.params())
    emp_c, _ = est.fit_constant(spec, cfg.model, pts, _fit_frequencies(cfg, spec), prm)
    extra = {
        "model": cfg.model,
        "weight_exponent": sweep.weight_exponent,
        "riesz": riesz.tolist(),
        "constant_paper": paper_c,
        "constant_empirical": emp_c,
        "constant_sign_mismatch": bool(np.sign(paper_c) != np.sign(emp_c)),
        "analytic_paper": (paper_c * riesz).tolist(),
        "analytic_empirical": (emp_c * riesz).tolist(),
    }
    if cfg.oracle:
        oracle = est.oracle_band_average(spec, sweep, pts, cfg.model, prm)
        extra["oracle_band_average"] = np.atleast_1d(oracle).tolist()
        extra["relative_error"] = (np.abs(values - oracle) / oracle).tolist()
    profile = est.StrengthProfile(pts, values, "band_average")
    est.write_profile_json(run / "profile.json", profile, extra)
    return run, {"sweep": "sweep.csv", "profile": "profile.json"}, time.perf_counter() - t0


def _inversion_grid(cfg):
    from .randfield import Grid
    lo = np.min([np.asarray(b.center) - b.radius for b in cfg.bumps], axis=0)
    hi = np.max([np.asarray(b.center) + b.radius for b in cfg.bumps], axis=0)
    half = cfg.inv_half_width or 0.55 * float(np.max(hi - lo))
    mid = (lo + hi) / 2
    return Grid(tuple(mid - half), cfg.inv_grid_n, 2 * half / cfg.inv_grid_n)


def cmd_invert(cfg, out):
    run = _run_dir(cfg, out)
    t0 = time.perf_counter()
    path = run / "profile.json"
    if not path.exists():
        raise FileNotFoundError(f"no strength profile in {run}; run 'sweep' first")
    prof = est.read_profile_json(path)
    c = prof.meta["constant_paper"] if cfg.constants == "paper" else prof.meta["constant_empirical"]
    grid = _inversion_grid(cfg)
    op = inv.assemble_kernel(prof.points, grid, est.riesz_exponent(cfg.model), c)
    truth = inv.discretized_bump(cfg.bumps, grid)
    sweep = inv.lambda_sweep(op, prof.values, cfg.lambdas, cfg.nonneg, truth)
    chosen = sweep.reconstructions[sweep.corner]
    inv.write_reconstruction(run / "reconstruction", grid, chosen,
                             {"constant": c, "constants": cfg.constants, "selection": "lcurve"})
    with open(run / "lcurve.csv", "w") as fh:
        fh.write("lambda,residual,norm,truth_error\n")
        for r in sweep.reconstructions:
            fh.write(f"{r.lam!r},{r.residual!r},{r.norm!r},{r.truth_error!r}\n")
    outputs = {"reconstruction": ["reconstruction.csv", "reconstruction.json"], "lcurve": "lcurve.csv"}
    return run, outputs, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# validation suites
# ---------------------------------------------------------------------------

def _suite_specialfn():
    from scipy import special

    from .specialfn import bessel, hankel1, hankel1_asym
    t = np.geomspace(1e-3, 1e4, 400)
    out = {}
    for n in (0, 1, 2):
        ref = special.hankel1(n, t)
        err = float(np.max(np.abs(hankel1(n, t) - ref) / np.maximum(1.0, np.abs(ref))))
        out[f"hankel1_{n}"] = {"value": err, "pass": err < 1e-12}
    wr = bessel("J", 1, t) * bessel("Y", 0, t) - bessel("J", 0, t) * bessel("Y", 1, t)
    werr = float(np.max(np.abs(wr - 2 / (np.pi * t)) * t))
    out["wronskian"] = {"value": werr, "pass": werr < 1e-12}
    tt = np.geomspace(10, 1000, 40)
    for N in (0, 1, 2):
        slope = float(np.polyfit(np.log(tt), np.log(np.abs(hankel1(0, tt) - hankel1_asym(0, N, tt))), 1)[0])
        out[f"truncation_slope_N{N}"] = {"value": slope, "pass": abs(slope + N + 1.5) <= 0.1}
    return out


def _suite_greens():
    from .greens import hess_phi, navier_green
    rng = np.random.default_rng(1)
    out = {}
    worst = 0.0
    for d in (2, 3):
        for _ in range(20):
            x, y = rng.normal(size=d), rng.normal(size=d)
            k = rng.uniform(0.5, 20)
            from .greens import phi
            tr = np.trace(hess_phi(d, x, y, k)) + k**2 * phi(d, x, y, k)
            worst = max(worst, abs(tr) / abs(k**2 * phi(d, x, y, k)))
    out["trace_identity"] = {"value": worst, "pass": worst < 1e-10}
    sym = 0.0
    for d in (2, 3):
        x, y = rng.normal(size=d), rng.normal(size=d)
        g = navier_green(d, x, y, ElasticParams(5.0, 2.0, 1.0))
        sym = max(sym, float(np.max(np.abs(g - g.T))),
                  float(np.max(np.abs(g - navier_green(d, y, x, ElasticParams(5.0, 2.0, 1.0))))))
    out["tensor_symmetry"] = {"value": sym, "pass": sym < 1e-12}
    return out


def _suite_ergodic():
    b = SmoothBump((0.0, 0.0), 1.0)
    spec = FieldSpec.around([b], 2.0, 64)
    x = np.array([2.0, 0.0])
    k = 10.0
    mom = float(est.covariance_moment(spec, k, x, "acoustic2"))
    vals = est.ensemble_fields(spec, [k], x, range(200))[:, 0]
    p = np.abs(vals) ** 2
    se = float(np.std(p, ddof=1) / math.sqrt(len(p)))
    z = abs(p.mean() - mom) / se
    return {"second_moment_vs_monte_carlo": {"value": z, "pass": z < 3.5}}


def _suite_inversion():
    b = SmoothBump((0.0, 0.0), 1.0)
    out = {}
    for n in (1, 2):
        dev = inv.laplacian_consistency([b], (3.0, 0.0), 1, n)
        out[f"laplacian_n{n}"] = {"value": dev, "pass": dev <= 1e-3}
    x = np.array([3.0, 0.0])
    lay, direct = inv.layered_riesz([b], x, 1), est.riesz_potential([b], x, 1)
    rel = abs(lay - direct) / direct
    out["layered_riesz"] = {"value": rel, "pass": rel <= 5e-3}
    ang = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    from .randfield import Grid
    grid = Grid((-1.1, -1.1), 16, 2.2 / 16)
    op = inv.assemble_kernel(3 * np.stack([np.cos(ang), np.sin(ang)], 1), grid, 1)
    res = [inv.tikhonov_solve(op, op.apply(inv.discretized_bump([b], grid)), lam).residual
           for lam in (1e-6, 1e-4, 1e-2, 1)]
    out["residual_monotone"] = {"value": res, "pass": bool(np.all(np.diff(res) >= -1e-12))}
    return out


SUITES = {"specialfn": _suite_specialfn, "greens": _suite_greens,
          "ergodic": _suite_ergodic, "inversion": _suite_inversion}


def cmd_validate(suite):
    names = list(SUITES) if suite == "all" else [suite]
    report = {}
    for name in names:
        report[name] = {key: {"value": np.asarray(v["value"], dtype=float).tolist(), "pass": bool(v["pass"])}
                        for key, v in SUITES[name]().items()}
    ok = all(v["pass"] for checks in report.values() for v in checks.values())
    return report, ok


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="randsource", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sample", "forward", "sweep", "invert"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI configuration file (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", type=Path, default=Path("out"), help="output root directory")
        p.add_argument("--threads", type=int, default=1, help="recorded in the manifest; numpy threading is left to the BLAS")
    p = sub.add_parser("validate")
    p.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    p.add_argument("--out", type=Path, help="also write the report as JSON here")
    return parser


def load_config(path, seed=None):
    text = Path(path).read_text() if path is not None else ""
    cfg = ExperimentConfig.from_ini(text)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        report, ok = cmd_validate(args.suite)
        text = json.dumps(report, indent=2, sort_keys=True)
        print(text)
        if args.out is not None:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(text + "\n")
        return EXIT_OK if ok else EXIT_FAIL
    try:
        if args.config is not None and not args.config.exists():
            print(f"error: config file {args.config} not found", file=sys.stderr)
            return EXIT_MISSING
        cfg = load_config(args.config, args.seed)
        cfg.field_spec()
    except (ConfigError, SpecError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_SPEC
    seeded = args.seed is not None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ResolutionWarning)
            if args.command == "sample":
                run, outputs, elapsed = cmd_sample(cfg, args.out)
            elif args.command == "forward":
                run, outputs, elapsed = cmd_forward(cfg, args.out, seeded)
            elif args.command == "sweep":
                run, outputs, elapsed = cmd_sweep(cfg, args.out, seeded)
            else:
                run, outputs, elapsed = cmd_invert(cfg, args.out)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except GeometryError as exc:
        print(f"error: geometry: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (SpecError, est.SweepError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    manifest = RunManifest(cfg.digest(), __version__, args.command,
                           {"seconds": elapsed, "threads": args.threads}, outputs)
    manifest.write(run)
    print(run)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
