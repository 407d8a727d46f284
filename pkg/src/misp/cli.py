"""Command-line driver for the convergence study.

Example::

    misp-study --element misp4 --mesh trapezoid --n 4..64 --t 1e-8 --out results

Settings may also come from a ``key=value`` file given with ``--config``;
command-line flags take precedence. Keys are the long flag names without
the leading dashes (``quad-degree`` and ``quad_degree`` are both accepted).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .study import CHECKS, FORMATS, StudyConfig, StudyError, run_study


def parse_n_list(text: str) -> tuple[int, ...]:
    """``4,8,16`` or a doubling range ``4..64``."""
    text = text.strip()
    if ".." in text:
        lo, hi = (int(p) for p in text.split("..", 1))
        if lo < 1 or hi < lo:
            raise ValueError(f"bad n range {text!r}")
        out = [lo]
        while out[-1] * 2 <= hi:
            out.append(out[-1] * 2)
        return tuple(out)
    return tuple(int(p) for p in text.split(",") if p.strip())


def parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def parse_name_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def read_config_file(path: Path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise StudyError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


_CONVERTERS = {
    "element": str,
    "mesh": str,
    "n": parse_n_list,
    "t": parse_float_list,
    "E": float,
    "nu": float,
    "kappa": float,
    "out": Path,
    "format": parse_name_list,
    "check": parse_name_list,
    "quad_degree": int,
    "err_degree": int,
    "dump_mesh": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}
_FIELD = {"format": "formats", "check": "checks"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="misp-study",
        description="Convergence study of the MiSP3/MiSP4 plate elements on the "
                    "clamped unit square with a manufactured solution.",
    )
    p.add_argument("--config", type=Path, help="key=value settings file (flags override it)")
    p.add_argument("--element", choices=["misp3", "misp4"])
    p.add_argument("--mesh", choices=["uniform-tri", "uniform-quad", "trapezoid"],
                   help="default: uniform-tri for misp3, uniform-quad for misp4")
    p.add_argument("--n", help="comma list or doubling range a..b (default 4..64)")
    p.add_argument("--t", help="comma list of thicknesses (default 1,0.1,0.001,1e-8)")
    p.add_argument("--E", type=str)
    p.add_argument("--nu", type=str)
    p.add_argument("--kappa", type=str)
    p.add_argument("--out", help="output directory (default ./results)")
    p.add_argument("--format", help=f"comma list of {','.join(FORMATS)}")
    p.add_argument("--check", help=f"comma list of {','.join(CHECKS)}")
    p.add_argument("--quad-degree", help="assembly quadrature degree override")
    p.add_argument("--err-degree", help="error quadrature degree override")
    p.add_argument("--dump-mesh", action="store_const", const="true",
                   help="write the text dump of every mesh to the output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> StudyConfig:
    raw = read_config_file(args.config) if args.config else {}
    unknown = set(raw) - set(_CONVERTERS)
    if unknown:
        raise StudyError(f"unknown config keys {sorted(unknown)}")
    for key in _CONVERTERS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    kwargs = {}
    for key, value in raw.items():
        try:
            kwargs[_FIELD.get(key, key)] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise StudyError(f"bad value for {key}: {value!r} ({exc})") from exc
    return StudyConfig(**kwargs)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        result = run_study(config_from_args(args))
    except (StudyError, ValueError) as exc:
        print(f"misp-study: error: {exc}", file=sys.stderr)
        return 2
    for path in result.files:
        print(f"wrote {path}")
    for check in result.checks:
        print(f"{check.name}: {'PASS' if check.passed else 'FAIL'}  {check.detail}")
    return result.exit_status


if __name__ == "__main__":
    sys.exit(main())
