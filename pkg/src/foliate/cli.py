"""Batch driver: generate patterns, evaluate shifts, foliate, verify the
exact identities, estimate statistics, and run the nested-core ladder.

Exit codes: 0 on success (statistical deviations only warn), 1 when an
identity that is a theorem on the analyzed data fails (a software defect,
not noise), 2 on configuration errors.  Identical specs produce
byte-identical output files.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .foliation import foliate, ladder_diagnostic
from .generators import GenSpec, generate, read_config, spec_from_config
from .palm import (
    Realization,
    ShiftIterateKernel,
    StatReport,
    check_mass_transport,
    evaporation_profile,
    relative_intensity_report,
    reports_csv,
    reports_json,
    verify_identities,
)
from .patterns import TORUS, WINDOW, ConfigError, PointPattern
from .shifts import SHIFT_NAMES, ShiftKind, evaluate

EXIT_OK = 0
EXIT_EXACT_FAILURE = 1
EXIT_CONFIG = 2


@dataclass(frozen=True)
class ExperimentSpec:
    """A batch run: generator, shift, realization count, and outputs."""

    gen: GenSpec
    shift: ShiftKind
    n_realizations: int = 1
    n_max: int = 3
    fractions: tuple[float, ...] | None = None
    out: str | None = None
    jobs: int = 1
    save_patterns: bool = False

    def __post_init__(self) -> None:
        if self.n_realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.n_max < 1:
            raise ConfigError("n_max must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.fractions is not None:
            fr = tuple(float(f) for f in self.fractions)
            if any(b <= a for a, b in zip(fr, fr[1:])) or not all(
                0 < f <= 1 for f in fr
            ):
                raise ConfigError("fractions must be strictly increasing in (0, 1]")
            object.__setattr__(self, "fractions", fr)


def seed_for(spec: ExperimentSpec, index: int) -> int:
    return (spec.gen.seed + index) % 2**64


def build_realization(spec: ExperimentSpec, index: int) -> Realization:
    gen = spec.gen.with_seed(seed_for(spec, index))
    return Realization.from_spec(gen, spec.shift)


def _build_indexed(args: tuple[ExperimentSpec, int]) -> Realization:
    return build_realization(*args)


def realizations_for(spec: ExperimentSpec) -> list[Realization]:
    """All realizations, in index order regardless of the worker count."""
    indices = list(range(spec.n_realizations))
    if spec.jobs == 1 or spec.n_realizations == 1:
        return [build_realization(spec, i) for i in indices]
    with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
        return list(pool.map(_build_indexed, [(spec, i) for i in indices]))


def verify_reports(
    reals: list[Realization], n_max: int, transport_orders: tuple[int, ...] = (1, 2, 3)
) -> list[StatReport]:
    reports = verify_identities(reals, n_max)
    for n in transport_orders:
        reports.append(check_mass_transport(ShiftIterateKernel(n), reals))
    return reports


def exact_failures(reports: list[StatReport], expect_exact: bool) -> list[str]:
    if not expect_exact:
        return []
    return [rep.name for rep in reports if rep.target is not None and not rep.exact]


def mark_class_representative(r: Realization, k: int, ball_radius: float = 1.0):
    """First non-censored point with ball count k in the largest component."""
    from .shifts import condenser_marks

    marks, _ = condenser_marks(r.pattern, ball_radius)
    big = max(r.foliation.components, key=lambda c: c.size)
    members = np.flatnonzero(
        (r.foliation.component_id == big.id)
        & (marks == k)
        & ~r.shift_map.censored
    )
    return int(members[0]) if members.size else None


def condenser_intensity_reports(
    reals: list[Realization], ks: tuple[int, ...] = (1, 2, 3), ball_radius: float = 1.0
) -> dict[int, tuple[StatReport, StatReport]]:
    """Per ball-count class k: the walk estimate at the representative foil
    and the plain class-count ratio it cross-checks against."""
    from .palm import make_report, relative_intensity
    from .shifts import condenser_marks

    out: dict[int, tuple[StatReport, StatReport]] = {}
    for k in ks:
        walks = []
        ratios = []
        for r in reals:
            marks, mc = condenser_marks(r.pattern, ball_radius)
            auth = ~mc
            denom = int(((marks == k) & auth).sum())
            if denom:
                ratios.append(float(((marks == k + 1) & auth).sum()) / denom)
            x = mark_class_representative(r, k, ball_radius)
            if x is None:
                continue
            est = relative_intensity(r, x, mode="walk")
            if est is not None:
                walks.append(est)
        out[k] = (
            make_report(f"condenser_intensity_k{k}", walks, n=k),
            make_report(f"condenser_count_ratio_k{k}", ratios, n=k),
        )
    return out


def stats_reports(reals: list[Realization], n_max: int) -> list[StatReport]:
    from .palm import palm_mean

    reports: list[StatReport] = []
    for n in range(1, n_max + 1):
        reports.append(
            palm_mean(
                lambda r, n=n: r.dstats(n).d[n],
                reals,
                name=f"descendants_mean_n{n}",
            )
        )
        reports.append(
            palm_mean(
                lambda r, n=n: np.where(
                    r.dstats(n).defined[n], r.dstats(n).l[n], np.nan
                ),
                reals,
                name=f"cousins_mean_n{n}",
            )
        )
    reports.extend(evaporation_profile(reals, list(range(1, n_max + 1))))
    reports.append(relative_intensity_report(reals))
    return reports


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_report_files(out: Path, stem: str, reports: list[StatReport]) -> None:
    _write(out / f"{stem}.csv", reports_csv(reports))
    _write(out / f"{stem}.json", reports_json(reports))


def _shift_kind(args: argparse.Namespace) -> ShiftKind:
    return ShiftKind(
        args.shift,
        ball_radius=getattr(args, "ball_radius", None) or 1.0,
        condenser_metric=getattr(args, "condenser_metric", None) or "euclidean",
    )


def _resolve_seed(args: argparse.Namespace, conf: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    if "seed" in conf:
        return int(conf["seed"])
    env = os.environ.get("FOLIATE_SEED")
    if env is not None:
        return int(env)
    return 0


def _gen_spec(args: argparse.Namespace) -> GenSpec:
    conf: dict = {}
    if getattr(args, "config", None):
        conf = read_config(args.config)
    if getattr(args, "model", None):
        conf["model"] = args.model
    if getattr(args, "torus", None):
        conf["domain"] = TORUS
        conf["extents"] = args.torus
    if getattr(args, "window", None):
        conf["domain"] = WINDOW
        conf["extents"] = args.window
    if getattr(args, "buffer", None) is not None:
        conf["buffer"] = args.buffer
    for key in ("intensity", "p", "parent_intensity", "mark_intensity"):
        val = getattr(args, key, None)
        if val is not None:
            conf[key] = val
    if getattr(args, "mark_radius", None) is not None:
        conf["mark_circle_radius"] = args.mark_radius
    conf["seed"] = _resolve_seed(args, conf)
    return spec_from_config(conf)


def _experiment_spec(args: argparse.Namespace) -> ExperimentSpec:
    conf: dict = {}
    if getattr(args, "config", None):
        conf = read_config(args.config)
    gen = _gen_spec(args)
    shift = getattr(args, "shift", None) or conf.get("shift")
    if shift is None:
        raise ConfigError("a shift is required (--shift)")
    kind = ShiftKind(
        str(shift),
        ball_radius=float(getattr(args, "ball_radius", None) or conf.get("ball_radius", 1.0)),
        condenser_metric=str(
            getattr(args, "condenser_metric", None)
            or conf.get("condenser_metric", "euclidean")
        ),
    )
    fractions = getattr(args, "fractions", None) or conf.get("fractions")
    if isinstance(fractions, str):
        fractions = tuple(float(f) for f in fractions.split(","))
    return ExperimentSpec(
        gen=gen,
        shift=kind,
        n_realizations=int(
            getattr(args, "realizations", None) or conf.get("realizations", 1)
        ),
        n_max=int(getattr(args, "n_max", None) or conf.get("n_max", 3)),
        fractions=fractions,
        out=getattr(args, "out", None) or conf.get("out"),
        jobs=int(getattr(args, "jobs", None) or conf.get("jobs", 1)),
        save_patterns=bool(getattr(args, "save_patterns", False)),
    )


def cmd_generate(args: argparse.Namespace) -> int:
    pattern = generate(_gen_spec(args))
    text = pattern.to_json()
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text + "\n")
    return EXIT_OK


def cmd_foliate(args: argparse.Namespace) -> int:
    from .stable import build_stable_maps, stable_to_json

    pattern = PointPattern.from_json(Path(args.pattern).read_text())
    kind = _shift_kind(args)
    shift_map = evaluate(pattern, kind)
    fol = foliate(pattern, shift_map)
    out = Path(args.out)
    _write(out / "shiftmap.json", shift_map.to_json())
    _write(out / "foliation.json", fol.to_json())
    _write(out / "components.csv", fol.components_csv())
    stable = build_stable_maps(pattern, shift_map, fol)
    _write(out / "f_perp.json", stable_to_json(stable.f_perp, "f_perp"))
    _write(out / "h_dense.json", stable_to_json(stable.h_dense, "h_dense"))
    return EXIT_OK


def _verify_realizations(args: argparse.Namespace) -> tuple[list[Realization], ExperimentSpec | None]:
    if getattr(args, "pattern", None):
        pattern = PointPattern.from_json(Path(args.pattern).read_text())
        return [Realization.build(pattern, _shift_kind(args))], None
    spec = _experiment_spec(args)
    return realizations_for(spec), spec


def cmd_verify(args: argparse.Namespace) -> int:
    reals, spec = _verify_realizations(args)
    n_max = int(args.n_max or (spec.n_max if spec else 3))
    reports = verify_reports(reals, n_max)
    expect_exact = all(r.is_exact_setting for r in reals)
    failures = exact_failures(reports, expect_exact)
    out = args.out or (spec.out if spec else None)
    if out:
        write_report_files(Path(out), "verify", reports)
    else:
        sys.stdout.write(reports_csv(reports))
    for name in failures:
        sys.stderr.write(f"exact identity failed: {name}\n")
    return EXIT_EXACT_FAILURE if failures else EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    spec = _experiment_spec(args)
    reals = realizations_for(spec)
    reports = stats_reports(reals, spec.n_max)
    if spec.out:
        write_report_files(Path(spec.out), "stats", reports)
    else:
        sys.stdout.write(reports_csv(reports))
    return EXIT_OK


def cmd_ladder(args: argparse.Namespace) -> int:
    spec = _experiment_spec(args)
    if spec.fractions is None:
        raise ConfigError("ladder needs --fractions")
    pattern = generate(spec.gen)
    report = ladder_diagnostic(pattern, spec.shift, spec.fractions)
    text = report.csv()
    if spec.out:
        _write(Path(spec.out) / "ladder.csv", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def run(spec: ExperimentSpec) -> int:
    """Monolithic pipeline: generate, shift, foliate, verify, report.

    Writes the same files the staged subcommands would; returns the exit
    status (0 unless an exact identity fails on exact-setting data)."""
    reals = realizations_for(spec)
    reports = verify_reports(reals, spec.n_max)
    expect_exact = all(r.is_exact_setting for r in reals)
    failures = exact_failures(reports, expect_exact)
    out = Path(spec.out) if spec.out else None
    if out is not None:
        write_report_files(out, "verify", reports)
        write_report_files(out, "stats", stats_reports(reals, spec.n_max))
        _write(out / "components.csv", reals[0].foliation.components_csv())
        if spec.save_patterns:
            for i, r in enumerate(reals):
                _write(out / f"pattern_{i:04d}.json", r.pattern.to_json())
        if spec.fractions:
            pattern = generate(spec.gen)
            _write(
                out / "ladder.csv",
                ladder_diagnostic(pattern, spec.shift, spec.fractions).csv(),
            )
    for name in failures:
        sys.stderr.write(f"exact identity failed: {name}\n")
    return EXIT_EXACT_FAILURE if failures else EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    return run(_experiment_spec(args))


def _add_gen_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--model", choices=("poisson", "bernoulli_grid", "poisson_cluster"))
    p.add_argument("--torus", help="torus extents, e.g. 50x50")
    p.add_argument("--window", help="window extents, e.g. 200x200")
    p.add_argument("--buffer", type=float, help="window censoring margin")
    p.add_argument("--intensity", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--parent-intensity", dest="parent_intensity", type=float)
    p.add_argument("--mark-intensity", dest="mark_intensity", type=float)
    p.add_argument("--mark-radius", dest="mark_radius", type=float)
    p.add_argument("--seed", type=int, help="base seed (FOLIATE_SEED as fallback)")


def _add_shift_flags(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--shift", required=required, choices=list(SHIFT_NAMES))
    p.add_argument("--ball-radius", dest="ball_radius", type=float, default=None)
    p.add_argument(
        "--condenser-metric",
        dest="condenser_metric",
        choices=("euclidean", "first_coordinate"),
        default=None,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foliate",
        description="point patterns, point-shifts, and their discrete foliations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a pattern and write its JSON")
    _add_gen_flags(p)
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("foliate", help="evaluate a shift on a pattern file")
    p.add_argument("--pattern", required=True)
    _add_shift_flags(p, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_foliate)

    p = sub.add_parser("verify", help="exact identity and transport checks")
    _add_gen_flags(p)
    _add_shift_flags(p)
    p.add_argument("--pattern", help="analyze one pattern file instead of generating")
    p.add_argument("--realizations", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("stats", help="palm statistics and intensities")
    _add_gen_flags(p)
    _add_shift_flags(p)
    p.add_argument("--realizations", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("ladder", help="nested-core growth diagnostic")
    _add_gen_flags(p)
    _add_shift_flags(p)
    p.add_argument("--fractions", help="comma list, e.g. 0.25,0.5,0.75,1.0")
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_ladder)

    p = sub.add_parser("run", help="full pipeline with reports")
    _add_gen_flags(p)
    _add_shift_flags(p)
    p.add_argument("--realizations", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--fractions")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--save-patterns", action="store_true")
    p.set_defaults(fn=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.fn(args))
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
