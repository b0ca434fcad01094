"""Configuration-driven experiment runner.

Verbs: ``certify``, ``converge``, ``norm``, ``c-n`` and ``report``.
Exit codes: 0 ok, 1 configuration error, 2 assumption violated,
3 inconclusive convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import assumptions as asm
from .bbm import INCONCLUSIVE, ConvergenceReport, c_n, c_n_monte_carlo, c_n_quadrature, eps_min, run_convergence
from .catalog import FunctionEntry, function_from_json
from .errors import OrliczLabError, UnboundedNormError
from .geometry import Shape, shape_from_json
from .grid import GridDomain, GridField
from .kernels import KernelSchedule
from .modular import luxemburg_norm, modular
from .phi import PhiModel, phi_from_json
from .svg import convergence_svg

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_INCONCLUSIVE = 0, 1, 2, 3

CSV_COLUMNS = ("eps", "rho_eps", "eps_norm", "target_modular", "target_norm", "rel_err_modular", "rel_err_norm")

CONFIG_DIR = Path(__file__).with_name("configs")


class ConfigError(Exception):
    """Invalid configuration; ``key`` anchors the message to a line of the file."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line


@dataclass
class CertifySettings:
    beta: float = 0.5
    sigma: float | None = None
    t0: float = 1.0
    ball_samples: int = 200
    n_samples: int = 10_000
    h: float | None = None


@dataclass
class ExperimentConfig:
    name: str
    domain: dict
    grid_h: list
    model: dict
    function: object
    kernel: dict
    tolerance: float = 0.05
    band: float | None = None
    norm_tol: float = 1e-6
    center_stride: int = 1
    certify: CertifySettings = field(default_factory=CertifySettings)
    seed: int = 0
    output_dir: str = "out"

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        required = ("name", "domain", "grid_h", "model", "function", "kernel")
        for key in required:
            if key not in data:
                raise ConfigError(f"missing required field {key!r}", key)
        known = set(cls.__dataclass_fields__)
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown field {key!r}", key)
        kw = dict(data)
        grid_h = kw["grid_h"]
        kw["grid_h"] = [float(grid_h)] if isinstance(grid_h, (int, float)) else [float(h) for h in grid_h]
        cert = kw.get("certify") or {}
        if not isinstance(cert, dict):
            raise ConfigError("'certify' must be an object", "certify")
        try:
            kw["certify"] = CertifySettings(**cert)
        except TypeError as exc:
            raise ConfigError(f"bad 'certify' block: {exc}", "certify") from None
        return cls(**kw)

    # ------------------------------------------------------------ built objects

    def shape(self) -> Shape:
        try:
            return shape_from_json(self.domain)
        except (OrliczLabError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad domain: {exc}", "domain") from None

    def build_model(self) -> PhiModel:
        spec = dict(self.model)
        spec.setdefault("domain", self.domain)
        try:
            return phi_from_json(spec)
        except (OrliczLabError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model: {exc}", "model") from None

    def build_function(self) -> FunctionEntry:
        try:
            return function_from_json(self.function)
        except (OrliczLabError, TypeError) as exc:
            raise ConfigError(f"bad function: {exc}", "function") from None

    def build_kernel(self) -> KernelSchedule:
        try:
            return KernelSchedule.from_json(self.kernel)
        except OrliczLabError as exc:
            raise ConfigError(f"bad kernel: {exc}", "kernel") from None

    def validate(self) -> None:
        """Build every component once; raises :class:`ConfigError` on the first problem."""
        self.shape()
        self.build_model()
        self.build_function()
        kernel = self.build_kernel()
        if not self.grid_h or any(not h > 0 for h in self.grid_h):
            raise ConfigError("grid_h must hold positive spacings", "grid_h")
        for h in self.grid_h:
            if kernel.eps[-1] < eps_min(h):
                raise ConfigError(f"eps={kernel.eps[-1]:g} is below eps_min(h)=8h={eps_min(h):g} "
                                  f"at grid_h={h:g}", "eps")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive", "tolerance")
        if self.band is not None and not self.band > 1:
            raise ConfigError("band must exceed 1", "band")
        if not (isinstance(self.center_stride, int) and self.center_stride >= 1):
            raise ConfigError("center_stride must be a positive integer", "center_stride")
        if not 0 < self.certify.beta <= 1:
            raise ConfigError("certify.beta must lie in (0, 1]", "beta")


def _line_of(text: str, key: str | None) -> int:
    if key:
        needle = f'"{key}"'
        for k, line in enumerate(text.splitlines(), 1):
            if needle in line:
                return k
    return 1


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a config file; errors carry the offending line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", line=1) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", line=exc.lineno) from None
    try:
        cfg = ExperimentConfig.from_json(data)
        cfg.validate()
    except ConfigError as exc:
        if exc.line is None:
            exc.line = _line_of(text, exc.key)
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}", line=1) from None
    return cfg


# ----------------------------------------------------------------- artifacts


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def csv_text(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows():
        writer.writerow([repr(float(row[c])) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_report_artifacts(report: ConvergenceReport, out: Path, stem: str) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.report.json", out / f"{stem}.csv", out / f"{stem}.svg"]
    paths[0].write_text(_dump(report.to_json()))
    paths[1].write_text(csv_text(report))
    title = f"{stem}: {report.classification}"
    paths[2].write_text(convergence_svg(report.eps, report.rho_eps, report.target_modular, title,
                                        extrapolated=report.extrapolated_modular))
    return paths


def _stems(cfg: ExperimentConfig) -> list[str]:
    if len(cfg.grid_h) == 1:
        return [cfg.name]
    return [f"{cfg.name}_h{k}" for k in range(len(cfg.grid_h))]


# --------------------------------------------------------------------- verbs


def certify(cfg: ExperimentConfig, out: Path) -> tuple[int, list[asm.AssumptionReport]]:
    """Run every certifier; exit 2 when (A0), (A1), (A2), (aInc) or (aDec) fails."""
    model = cfg.build_model()
    settings = cfg.certify
    h = settings.h or max(cfg.grid_h)
    domain = GridDomain(cfg.shape(), h)
    seed = cfg.seed
    samples = asm.default_samples(model, domain, seed=seed)
    reports = [asm.check_doubling(model, samples)]
    expo = asm.estimate_exponents(model, samples)
    bounds = model.exponent_bounds(samples.points)
    lo = bounds[0] if bounds else expo["phi_up"]
    hi = bounds[1] if bounds else expo["phi_down"]
    reports.append(asm.check_aInc_aDec(model, max(lo or 1.0, 1.0), "inc", samples))
    if hi is None:
        reports.append(asm.check_aInc_aDec(model, 64.0, "dec", samples))
    else:
        reports.append(asm.check_aInc_aDec(model, max(hi, 1.0 + 1e-9), "dec", samples))
    a0 = asm.check_A0(model, domain)
    reports.append(a0)
    sigma = settings.sigma or a0.constants.get("sigma", 1.0)
    reports.append(asm.check_A1(model, domain, settings.beta, sigma, settings.ball_samples, seed=seed))
    reports.append(asm.check_A2(model, domain, settings.beta, sigma, n_samples=settings.n_samples, seed=seed))
    reports.append(asm.check_loc(model, domain, settings.t0))
    p_field = getattr(model, "p", None)
    if p_field is not None and callable(p_field):
        reports.append(asm.check_log_holder(p_field, domain, seed=seed))
    target = out / "assumptions"
    target.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        (target / f"{cfg.name}.{rep.assumption}.json").write_text(_dump(rep.to_json()))
    required = {"A0", "A1", "A2", "aInc", "aDec"}
    failed = [r for r in reports if r.assumption in required and not r.holds]
    return (EXIT_ASSUMPTION if failed else EXIT_OK), reports


def converge(cfg: ExperimentConfig, out: Path) -> tuple[int, list[ConvergenceReport]]:
    model, entry, kernel = cfg.build_model(), cfg.build_function(), cfg.build_kernel()
    reports = []
    for h, stem in zip(cfg.grid_h, _stems(cfg)):
        domain = GridDomain(cfg.shape(), h)
        rep = run_convergence(model, entry, kernel, domain, tolerance=cfg.tolerance, band=cfg.band,
                              norm_tol=cfg.norm_tol, center_stride=cfg.center_stride, seed=cfg.seed)
        write_report_artifacts(rep, out, stem)
        reports.append(rep)
    code = EXIT_INCONCLUSIVE if any(r.classification == INCONCLUSIVE for r in reports) else EXIT_OK
    return code, reports


def norm(cfg: ExperimentConfig, out: Path) -> dict:
    """Modular and Luxemburg norm of ``c_n |grad f|`` and of ``f`` on each grid."""
    model, entry = cfg.build_model(), cfg.build_function()
    rows = []
    for h in cfg.grid_h:
        domain = GridDomain(cfg.shape(), h)
        with np.errstate(invalid="ignore"):
            g = np.linalg.norm(entry.gradient(domain.points), axis=1)
        cn = c_n(domain.n)
        f = GridField(domain, entry(domain.points))
        row = {"h": h, "c_n": cn}
        grad = GridField(domain, g) if np.all(np.isfinite(g)) else None
        row["modular_c_n_grad"] = modular(model, grad.scaled(cn)) if grad is not None else math.inf
        for key, fld in (("norm_grad", grad), ("norm_f", f)):
            try:
                row[key] = luxemburg_norm(model, fld, cfg.norm_tol) if fld is not None else math.inf
            except UnboundedNormError:
                row[key] = math.inf
        row["c_n_norm_grad"] = cn * row["norm_grad"]
        rows.append(row)
    out.mkdir(parents=True, exist_ok=True)
    result = {"name": cfg.name, "rows": rows}
    (out / f"{cfg.name}.norm.json").write_text(_dump(result))
    return result


def c_n_table(dims, samples: int, seed: int) -> list[dict]:
    rows = []
    for n in dims:
        mean, se = c_n_monte_carlo(n, samples, seed)
        rows.append({"n": n, "closed_form": c_n(n), "quadrature": c_n_quadrature(n),
                     "monte_carlo": mean, "standard_error": se,
                     "z_score": (mean - c_n(n)) / se})
    return rows


def rerender(out: Path) -> list[Path]:
    """Rebuild CSV and SVG files from every report JSON in ``out``."""
    written = []
    for path in sorted(out.glob("*.report.json")):
        rep = ConvergenceReport.from_json(json.loads(path.read_text()))
        stem = path.name[: -len(".report.json")]
        written += write_report_artifacts(rep, out, stem)
    return written


# ---------------------------------------------------------------------- main


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orliczlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("certify", "converge", "norm", "c-n", "report"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--grid-h", type=float, help="grid spacing (overrides the config sweep)")
        if verb == "c-n":
            sp.add_argument("--dim", type=int, action="append", help="dimension (repeatable)")
            sp.add_argument("--samples", type=int, default=10**6)
    return ap


def _config_error(path, exc: ConfigError) -> int:
    print(f"{path}:{exc.line or 1}: config error: {exc}", file=sys.stderr)
    return EXIT_CONFIG


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = None
    if args.config:
        try:
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            if args.grid_h is not None:
                cfg.grid_h = [args.grid_h]
                cfg.validate()
        except ConfigError as exc:
            return _config_error(args.config, exc)
    elif args.verb in ("certify", "converge", "norm"):
        print(f"{args.verb}: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else Path(cfg.output_dir if cfg else "out")

    if args.verb == "c-n":
        dims = args.dim or ([cfg.shape().dim] if cfg else [1, 2])
        seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
        print(_dump(c_n_table(dims, args.samples, seed)), end="")
        return EXIT_OK
    if args.verb == "report":
        written = rerender(out)
        for p in written:
            print(p)
        return EXIT_OK if written else EXIT_CONFIG
    if args.verb == "certify":
        code, reports = certify(cfg, out)
        for r in reports:
            print(f"{r.assumption:10s} {r.verdict}")
        return code
    if args.verb == "converge":
        code, reports = converge(cfg, out)
        for h, r in zip(cfg.grid_h, reports):
            print(f"h={h:g} {r.classification} extrapolated={r.extrapolated_modular:.6g} "
                  f"target={r.target_modular:.6g}")
        return code
    result = norm(cfg, out)
    print(_dump(result), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
