"""Batch command-line interface: inspect spectra, build atlases, verify.

All numerical work lives in the library; the CLI parses arguments, wires
files to library calls, and maps outcomes to exit codes:

    0  success
    1  internal error
    2  input validation error
    3  verification failure

Every output file is deterministic given (input files, flags, seed); no
timestamps or timings are written (timings go to stderr).
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checks as chk
from .engine import EngineError, build_atlas
from .poly import PolyError
from .serialize import (
    ParseError,
    load_atlas,
    load_spectrum,
    load_system,
    orbit_hash,
    save_atlas,
)
from .spectral import (
    NarrowBandError,
    SpectrumError,
    choose_epsilon,
    contraction_margin,
    degree_bound,
    enumerate_relations,
    require_narrow_band,
)
from .systems import SkewProductSystem, SystemValidationError, power_family, sample_skew_orbit

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_VERIFY = 3

SUITES = ("conjugacy", "scaling", "contraction", "flags", "centralizer", "coherence", "classinv")


@dataclass
class RunConfig:
    command: str
    spec: str | None = None
    system: str | None = None
    atlas: str | None = None
    degree: int | None = None
    tail: int | None = None
    policy: str = "auto"
    radii: tuple = (1e-1, 1e-2, 1e-3)
    seed: int = 0
    out: str | None = None
    threads: int = 1
    fmt: str = "text"
    suite: str = "all"


def _parser():
    p = argparse.ArgumentParser(
        prog="subres",
        description="Sub-resonance polynomial normal forms for narrow band contractions",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--format", dest="fmt", choices=("text", "table"), default="text")

    rel = sub.add_parser("relations", help="list sub-resonance relations and constants")
    rel.add_argument("--spec", required=True, help="spectrum file")
    rel.add_argument("--degree", type=int, default=None, help="degree for epsilon and k'")
    common(rel)

    bld = sub.add_parser("build", help="build a normal-form atlas")
    bld.add_argument("--system", required=True)
    bld.add_argument("--degree", type=int, default=None)
    bld.add_argument("--tail", type=int, default=None)
    bld.add_argument("--policy", choices=("auto", "series", "periodic"), default="auto")
    common(bld)

    ver = sub.add_parser("verify", help="run verification suites on an atlas")
    ver.add_argument("--system", required=True)
    ver.add_argument("--atlas", required=True)
    ver.add_argument("--suite", default="all", help="all or one of " + ",".join(SUITES))
    ver.add_argument("--radii", type=str, default="0.1,0.01,0.001")
    common(ver)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        spec=getattr(args, "spec", None),
        system=getattr(args, "system", None),
        atlas=getattr(args, "atlas", None),
        degree=getattr(args, "degree", None),
        tail=getattr(args, "tail", None),
        policy=getattr(args, "policy", "auto"),
        seed=args.seed,
        out=args.out,
        threads=args.threads,
        fmt=args.fmt,
        suite=getattr(args, "suite", "all"),
    )
    if hasattr(args, "radii") and isinstance(args.radii, str):
        try:
            cfg.radii = tuple(float(r) for r in args.radii.split(",") if r)
        except ValueError:
            print(f"error: cannot parse radii {args.radii!r}", file=sys.stderr)
            return EXIT_VALIDATION
    try:
        if cfg.command == "relations":
            return cmd_relations(cfg)
        if cfg.command == "build":
            return cmd_build(cfg)
        if cfg.command == "verify":
            return cmd_verify(cfg)
        print(f"error: unknown command {cfg.command!r}", file=sys.stderr)
        return EXIT_VALIDATION
    except (
        ParseError,
        SpectrumError,
        NarrowBandError,
        SystemValidationError,
        PolyError,
        chk.CheckInputError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EngineError as exc:
        msg = str(exc)
        print(f"error: {msg}", file=sys.stderr)
        # solver precondition problems are input validation from the CLI view
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def _write(out_dir: str | None, name: str, text: str) -> None:
    if out_dir is None:
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / name, "w", newline="\n") as fh:
        fh.write(text)


def cmd_relations(cfg: RunConfig) -> int:
    spec = load_spectrum(cfg.spec)
    try:
        require_narrow_band(spec)
    except NarrowBandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    d = degree_bound(spec)
    n_for_constants = cfg.degree if cfg.degree is not None else d + 1
    if n_for_constants <= d:
        print(f"error: N must exceed d (N={n_for_constants}, d={d})", file=sys.stderr)
        return EXIT_VALIDATION
    eps = choose_epsilon(spec, max(2, n_for_constants))
    kprime = contraction_margin(spec, n_for_constants, eps)
    rels = enumerate_relations(spec)
    lines = []
    lines.append(f"spectrum {spec}")
    lines.append(f"narrow_band true")
    lines.append(f"degree_bound d = {d}")
    lines.append(f"epsilon = {eps.epsilon!r} (valid through degree {eps.max_degree})")
    lines.append(f"contraction_margin k' = {kprime!r} at N = {n_for_constants}")
    if d == 1:
        lines.append("linearizable (d=1): only linear relations survive")
    lines.append(f"relations ({len(rels)}):")
    for r in rels:
        lines.append(f"  {r}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    _write(cfg.out, "relations.txt", text)
    if cfg.fmt == "table":
        rows = ["target_block\ttype_vector\tdegree"]
        for r in rels:
            rows.append(f"{r.target_block}\t{','.join(map(str, r.type_vector))}\t{r.degree}")
        _write(cfg.out, "relations.tsv", "\n".join(rows) + "\n")
    return EXIT_OK


def _orbit_from_system(obj, cfg: RunConfig, n_hint: int | None):
    """Resolve (orbit, N) from a loaded system and CLI overrides."""
    if isinstance(obj, SkewProductSystem):
        n = cfg.degree or n_hint or obj.run.N or (degree_bound(obj.spec) + 2)
        orbit = sample_skew_orbit(obj, obj.run.theta0, obj.run.v0, obj.run.length, n)
        return orbit, n
    orbit = obj
    n = cfg.degree or n_hint or (degree_bound(orbit.spec) + 2)
    return orbit, n


def cmd_build(cfg: RunConfig) -> int:
    obj = load_system(cfg.system)
    orbit, n = _orbit_from_system(obj, cfg, None)
    d = degree_bound(orbit.spec)
    if n <= d:
        print(f"error: N must exceed d (N={n}, d={d})", file=sys.stderr)
        return EXIT_VALIDATION
    digest = orbit_hash(orbit)
    atlas = build_atlas(
        orbit,
        n,
        policy=cfg.policy,
        tail_depth=cfg.tail,
        threads=cfg.threads,
        seed=cfg.seed,
        orbit_digest=digest,
    )
    summary = []
    summary.append(f"system {cfg.system}")
    summary.append(f"orbit_hash {digest}")
    summary.append(f"policy {atlas.policy}")
    summary.append(f"N {atlas.N}")
    summary.append(f"d {atlas.d}")
    summary.append(f"epsilon {atlas.eps.epsilon!r}")
    summary.append(f"K {atlas.K}")
    summary.append(f"points {atlas.n_points}")
    summary.append(f"seed {cfg.seed}")
    summary.append(f"max_tail_bound {max(atlas.tail_bounds)!r}")
    summary.append(
        f"band_margins lo={orbit.margins.band_lo!r} hi={orbit.margins.band_hi!r} "
        f"cross={orbit.margins.cross_max!r}"
    )
    if isinstance(obj, SkewProductSystem):
        summary.append(f"injectivity_margin {obj.injectivity_margin()!r}")
    for diag in atlas.per_degree:
        summary.append(
            f"degree {diag.degree}: sup_q {diag.sup_q_upper!r} "
            f"tail_depth {diag.tail_depth} dropped_non_resonant {diag.dropped_non_resonant!r}"
        )
    text = "\n".join(summary) + "\n"
    print(text, end="")
    if cfg.out:
        _write(cfg.out, "build_summary.txt", text)
        save_atlas(atlas, Path(cfg.out) / "atlas.txt")
    return EXIT_OK


def _coherence_suite(obj, orbit, atlas, cfg: RunConfig):
    if not isinstance(obj, SkewProductSystem):
        rep = chk.VerificationReport("coherence")
        rep.add(
            "coherence_skipped",
            "system",
            0.0,
            0.0,
            True,
            "skipped: coherence needs a skew product (fiber anchors); "
            "stationary and periodic systems model a single marked point per fiber",
        )
        return rep
    d = degree_bound(obj.spec)
    cap = d + 2
    n_co = max(atlas.N, d + 6)
    rng = np.random.default_rng(cfg.seed)
    # offsets stay well inside the fiber ball
    base_v0 = np.asarray(obj.run.v0, dtype=float)
    scale = 0.2 * obj.rho
    offset = rng.uniform(-scale, scale, size=len(base_v0))
    ox = sample_skew_orbit(obj, obj.run.theta0, obj.run.v0, obj.run.length, n_co)
    ax = build_atlas(ox, n_co, threads=cfg.threads, seed=cfg.seed)
    oy = sample_skew_orbit(
        obj, obj.run.theta0, tuple(base_v0 + offset), obj.run.length, n_co
    )
    ay = build_atlas(oy, n_co, threads=cfg.threads, seed=cfg.seed)
    return chk.coherence_check(ox, ax, oy, ay, cap=cap, n_steps=2)


def cmd_verify(cfg: RunConfig) -> int:
    obj = load_system(cfg.system)
    atlas = load_atlas(cfg.atlas)
    orbit, _ = _orbit_from_system(obj, cfg, atlas.N)
    digest = orbit_hash(orbit)
    if atlas.orbit_hash and atlas.orbit_hash != digest:
        print(
            "error: atlas orbit hash does not match the orbit derived from the "
            "system file (check --degree and the [run] section)",
            file=sys.stderr,
        )
        return EXIT_VALIDATION
    suites = SUITES if cfg.suite == "all" else tuple(cfg.suite.split(","))
    for s in suites:
        if s not in SUITES:
            print(f"error: unknown suite {s!r}", file=sys.stderr)
            return EXIT_VALIDATION
    reports = []
    for s in suites:
        if s == "conjugacy":
            reports.append(chk.conjugacy_residual_jet(orbit, atlas))
        elif s == "scaling":
            radii = tuple(r for r in cfg.radii if r <= orbit.domain_radius)
            if not radii:
                rep = chk.VerificationReport("scaling")
                rep.add(
                    "scaling_skipped", "radii", 0.0, 0.0, True,
                    "skipped: all requested radii outside the germ validity ball",
                )
                reports.append(rep)
            else:
                reports.append(chk.residual_scaling(orbit, atlas, radii))
        elif s == "contraction":
            reports.append(chk.twist_contraction_check(orbit, atlas))
        elif s == "flags":
            for level in range(1, orbit.spec.l + 1):
                reports.append(
                    chk.fast_flag_dynamics(orbit, atlas, level, n_pairs=10, seed=cfg.seed)
                )
        elif s == "centralizer":
            n_pts = None if orbit.is_periodic else atlas.n_steps
            fam = power_family(orbit, 2, n_points=n_pts)
            reports.append(chk.centralizer_check(orbit, atlas, fam))
        elif s == "coherence":
            reports.append(_coherence_suite(obj, orbit, atlas, cfg))
        elif s == "classinv":
            rng = np.random.default_rng(cfg.seed)
            space = orbit.space
            merged = chk.VerificationReport("class_invariance")
            for _ in range(10):
                m = _random_flag_matrix(space, rng)
                merged.rows.extend(chk.class_invariance_check(orbit.spec, space, m).rows)
            reports.append(merged)
    merged = chk.merge_reports(reports)
    repro = f"subres verify --system {cfg.system} --atlas {cfg.atlas} --seed {cfg.seed}"
    for rep in reports:
        rep.attach_repro(repro + f" --suite {rep.name}")
    text = "".join(rep.to_text() for rep in reports)
    print(text, end="")
    _write(cfg.out, "report.txt", text)
    _write(cfg.out, "report.tsv", chk.merge_reports(reports).to_tsv())
    return EXIT_OK if merged.passed else EXIT_VERIFY


def _random_flag_matrix(space, rng, scale=0.4):
    dim = space.dim
    while True:
        m = np.zeros((dim, dim))
        for t in range(dim):
            for c in range(dim):
                bt, bc = space.block_of(t), space.block_of(c)
                if bt < bc:
                    m[t, c] = scale * rng.normal()
                elif bt == bc:
                    m[t, c] = (1.0 if t == c else 0.0) + 0.3 * rng.normal()
        if abs(np.linalg.det(m)) > 1e-3:
            return m


if __name__ == "__main__":
    sys.exit(main())
