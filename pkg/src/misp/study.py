"""Convergence studies over (t, n) and their CSV / markdown reports."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .assembly import assemble
from .femcore import material_derive
from .mesh import QUADRILATERAL, TRIANGULAR, build_mesh
from .solve import recover_fields, solve
from .verification.helmholtz import helmholtz_witness
from .verification.identities import rh_approximation_error, rh_identity_check
from .verification.infsup import infsup_estimate
from .verification.manufactured import manufactured_case
from .verification.norms import NORM_LABELS, NORM_NAMES, ErrorRow, convergence_rate, error_norms

log = logging.getLogger(__name__)

ELEMENT_FAMILIES = {"misp3": TRIANGULAR, "misp4": QUADRILATERAL}
MESH_FAMILIES = {"uniform-tri": TRIANGULAR, "uniform-quad": QUADRILATERAL,
                 "trapezoid": QUADRILATERAL}
DEFAULT_MESH = {"misp3": "uniform-tri", "misp4": "uniform-quad"}
CHECKS = ("rh", "helmholtz", "infsup")
FORMATS = ("csv", "markdown")

RH_TOL = 1e-11
RH_HALVING_TOL = 0.2
HELMHOLTZ_TOL = 1e-10
HELMHOLTZ_SAMPLES = 100
CHECK_MAX_N = 16
INFSUP_RATIO_TOL = 3.0

CSV_COLUMNS = ("element", "mesh", "t", "n", "h") + NORM_NAMES


class StudyError(ValueError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    element: str = "misp3"
    mesh: str | None = None
    n: tuple[int, ...] = (4, 8, 16, 32, 64)
    t: tuple[float, ...] = (1.0, 0.1, 0.001, 1e-8)
    E: float = 1.0
    nu: float = 0.3
    kappa: float = 5.0 / 6.0
    out: Path = Path("results")
    formats: tuple[str, ...] = FORMATS
    checks: tuple[str, ...] = ()
    quad_degree: int | None = None
    err_degree: int | None = None
    dump_mesh: bool = False

    @property
    def mesh_family(self) -> str:
        return self.mesh or DEFAULT_MESH.get(self.element, "")

    def validate(self) -> "StudyConfig":
        if self.element not in ELEMENT_FAMILIES:
            raise StudyError(f"unknown element {self.element!r}; choose from {sorted(ELEMENT_FAMILIES)}")
        mesh = self.mesh_family
        if mesh not in MESH_FAMILIES:
            raise StudyError(f"unknown mesh {mesh!r}; choose from {sorted(MESH_FAMILIES)}")
        if MESH_FAMILIES[mesh] != ELEMENT_FAMILIES[self.element]:
            raise StudyError(f"element {self.element} cannot be used on mesh {mesh}")
        if not self.n or not self.t:
            raise StudyError("n and t lists must be nonempty")
        if len(set(self.n)) != len(self.n) or len(set(self.t)) != len(self.t):
            raise StudyError("n and t lists must not contain duplicates")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise StudyError(f"unknown output format(s) {bad}")
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise StudyError(f"unknown check(s) {bad}; choose from {list(CHECKS)}")
        material_derive(self.E, self.nu, self.kappa, min(self.t))
        return replace(self, mesh=mesh, n=tuple(sorted(self.n)))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class StudyResult:
    config: StudyConfig
    rows: list[ErrorRow] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)

    @property
    def exit_status(self) -> int:
        return 0 if all(c.passed for c in self.checks) else 1


def _format_float(x: float) -> str:
    return format(float(x), ".17g")


def _groups(rows: Sequence[ErrorRow]):
    """Rows grouped by (element, mesh, t) in first-appearance order, n ascending."""
    keys: list[tuple] = []
    by_key: dict[tuple, list[ErrorRow]] = {}
    for r in rows:
        k = (r.element, r.mesh, r.t)
        if k not in by_key:
            keys.append(k)
            by_key[k] = []
        by_key[k].append(r)
    return [(k, sorted(by_key[k], key=lambda r: r.n)) for k in keys]


def study_rates(rows: Sequence[ErrorRow]) -> dict[tuple, dict[str, float]]:
    """Per (element, mesh, t) endpoint rates of every norm; groups with <2 sizes are omitted."""
    out = {}
    for key, group in _groups(rows):
        if len(group) >= 2:
            out[key] = {name: convergence_rate([getattr(r, name) for r in group])
                        for name in NORM_NAMES}
    return out


def _emit_csv(rows: Sequence[ErrorRow]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for _, group in _groups(rows):
        for r in group:
            d = r.as_dict()
            vals = [d["element"], d["mesh"], _format_float(d["t"]), str(d["n"])]
            vals += [_format_float(d[c]) for c in CSV_COLUMNS[4:]]
            buf.write(",".join(vals) + "\n")
    rates = study_rates(rows)
    if rates:
        buf.write("\n")
        buf.write(",".join(("element", "mesh", "t") + tuple("rate_" + c for c in NORM_NAMES)) + "\n")
        for (element, mesh, t), r in rates.items():
            buf.write(",".join([element, mesh, _format_float(t)]
                               + [_format_float(r[c]) for c in NORM_NAMES]) + "\n")
    return buf.getvalue()


def _emit_markdown(rows: Sequence[ErrorRow]) -> str:
    rates = study_rates(rows)
    parts = []
    for key, group in _groups(rows):
        element, mesh, t = key
        has_rate = key in rates
        header = ["norm"] + [f"{r.n}x{r.n}" for r in group] + (["rate"] if has_rate else [])
        lines = [f"### {element} on {mesh}, t = {t:g}", "",
                 "| " + " | ".join(header) + " |",
                 "|" + "|".join(["---"] * len(header)) + "|"]
        for name in NORM_NAMES:
            cells = [NORM_LABELS[name]] + [f"{getattr(r, name):.4f}" for r in group]
            if has_rate:
                cells.append(f"{rates[key][name]:.4f}")
            lines.append("| " + " | ".join(cells) + " |")
        parts.append("\n".join(lines) + "\n")
    return "\n".join(parts)


def emit_table(rows: Sequence[ErrorRow], fmt: str) -> str:
    """Render error rows as ``csv`` (17 significant digits) or ``markdown`` (4 decimals)."""
    if not rows:
        raise ValueError("cannot emit a table from an empty collection")
    if fmt == "csv":
        return _emit_csv(rows)
    if fmt == "markdown":
        return _emit_markdown(rows)
    raise ValueError(f"unknown table format {fmt!r}")


def compute_rows(config: StudyConfig) -> list[ErrorRow]:
    rows = []
    for t in config.t:
        material = material_derive(config.E, config.nu, config.kappa, t)
        case = manufactured_case(material)
        for n in config.n:
            mesh = build_mesh(config.mesh_family, n)
            glob = assemble(mesh, material, case.load, config.quad_degree)
            sol = recover_fields(solve(glob), glob)
            row = error_norms(sol, case, config.err_degree, config.element)
            log.info("%s %s t=%g n=%d  |w-w_h|_1=%.4e", config.element, mesh.name, t, n,
                     row.err_w_h1)
            rows.append(row)
    return rows


def _check_rh(config: StudyConfig) -> CheckResult:
    devs = []
    for n in config.n:
        rep = rh_identity_check(build_mesh(config.mesh_family, n), trials=50)
        devs.append(max(d for d in (rep.grad_deviation, rep.rot_deviation,
                                    rep.continuity_deviation) if d is not None))
    sizes = [4, 8, 16]
    errs = [rh_approximation_error(build_mesh(config.mesh_family, n)) for n in sizes]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok_id = max(devs) <= RH_TOL
    ok_ratio = all(abs(r - 2.0) <= 2.0 * RH_HALVING_TOL for r in ratios)
    detail = (f"max identity deviation {max(devs):.2e} (tol {RH_TOL:g}); "
              f"||eta - R_h eta|| ratios " + ", ".join(f"{r:.3f}" for r in ratios))
    return CheckResult("rh", ok_id and ok_ratio, detail)


def _check_helmholtz(config: StudyConfig) -> CheckResult:
    if ELEMENT_FAMILIES[config.element] != TRIANGULAR:
        return CheckResult("helmholtz", True, "not applicable to quadrilateral elements")
    rng = np.random.default_rng(0)
    worst = 0.0
    sizes = [n for n in config.n if n <= CHECK_MAX_N] or [min(config.n)]
    for n in sizes:
        mesh = build_mesh(config.mesh_family, n)
        for _ in range(HELMHOLTZ_SAMPLES):
            m = rng.standard_normal((mesh.num_elements, 9))
            worst = max(worst, helmholtz_witness(mesh, m).residual)
    return CheckResult("helmholtz", worst <= HELMHOLTZ_TOL,
                       f"max relative residual {worst:.2e} over n={sizes} (tol {HELMHOLTZ_TOL:g})")


def _check_infsup(config: StudyConfig) -> CheckResult:
    sizes = [n for n in config.n if n <= CHECK_MAX_N] or [min(config.n)]
    betas = []
    for t in config.t:
        material = material_derive(config.E, config.nu, config.kappa, t)
        for n in sizes:
            betas.append(infsup_estimate(build_mesh(config.mesh_family, n), material,
                                         config.element, config.quad_degree).beta)
    lo, hi = min(betas), max(betas)
    ratio = hi / lo if lo > 0 else math.inf
    return CheckResult("infsup", lo > 0 and ratio <= INFSUP_RATIO_TOL,
                       f"beta in [{lo:.4f}, {hi:.4f}], max/min {ratio:.3f} "
                       f"(tol {INFSUP_RATIO_TOL:g}) over n={sizes}")


_CHECK_FUNCS = {"rh": _check_rh, "helmholtz": _check_helmholtz, "infsup": _check_infsup}


def run_study(config: StudyConfig) -> StudyResult:
    """Solve every (t, n) cell, run the enabled checks and write the reports."""
    config = config.validate()
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StudyError(f"cannot create output directory {out}: {exc}") from exc

    result = StudyResult(config, rows=compute_rows(config))
    for name in config.checks:
        result.checks.append(_CHECK_FUNCS[name](config))

    stem = f"{config.element}-{config.mesh_family}"
    outputs = {"csv": (stem + ".csv"), "markdown": (stem + ".md")}
    try:
        for fmt in config.formats:
            path = out / outputs[fmt]
            path.write_text(emit_table(result.rows, fmt))
            result.files.append(path)
        if config.checks:
            path = out / (stem + "-checks.txt")
            path.write_text("".join(f"{c.name}: {'PASS' if c.passed else 'FAIL'}  {c.detail}\n"
                                    for c in result.checks))
            result.files.append(path)
        if config.dump_mesh:
            for n in config.n:
                path = out / f"mesh-{config.mesh_family}-n{n}.txt"
                build_mesh(config.mesh_family, n).dump_to(path)
                result.files.append(path)
    except OSError as exc:
        raise StudyError(f"cannot write reports to {out}: {exc}") from exc
    return result
