"""Structured-text file formats: spectra, systems, atlases.

All writers emit canonical bytes: sections in fixed order, rows in the
canonical monomial order, floats as shortest round-trip decimals
(``repr``).  Identical objects therefore serialize to identical bytes,
which is what the build determinism contract checks.
"""
from __future__ import annotations

import hashlib
import io

from .poly import MONOMIAL_ORDER_TAG, GradedSpace, PolyMap
from .spectral import Spectrum
from .systems import (
    GermOrbit,
    RunDefaults,
    SkewProductSystem,
    SystemValidationError,
    TrigCoeff,
    make_periodic,
    make_stationary,
)


class ParseError(ValueError):
    """Malformed structured-text input; message carries line context."""


def _fmt(x: float) -> str:
    x = float(x)
    if x == 0.0:
        return "0.0"
    return repr(x)


def _parse_float(tok: str, lineno: int, field: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"line {lineno}: cannot parse {field} value {tok!r}") from None


def _parse_int(tok: str, lineno: int, field: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"line {lineno}: cannot parse {field} value {tok!r}") from None


def split_sections(text: str) -> list[tuple[str, list[tuple[int, list[str]]]]]:
    """Break a file into [section] blocks of (lineno, tokens) rows."""
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"line {lineno}: unterminated section header {raw!r}")
            current = (line[1:-1].strip(), [])
            sections.append(current)
            continue
        if current is None:
            raise ParseError(f"line {lineno}: content before any [section]")
        current[1].append((lineno, line.split()))
    return sections


def _section_map(sections):
    out = {}
    for name, rows in sections:
        out.setdefault(name, []).extend(rows)
    return out


# -- spectrum ----------------------------------------------------------------


def spectrum_lines(spec: Spectrum) -> list[str]:
    lines = ["[spectrum]"]
    for lam, mu in spec.bands:
        lines.append(f"band {_fmt(lam)} {_fmt(mu)}")
    return lines


def parse_spectrum_rows(rows) -> Spectrum:
    bands = []
    for lineno, toks in rows:
        if toks[0] != "band" or len(toks) != 3:
            raise ParseError(f"line {lineno}: expected 'band <lambda> <mu>'")
        bands.append(
            (
                _parse_float(toks[1], lineno, "lambda"),
                _parse_float(toks[2], lineno, "mu"),
            )
        )
    if not bands:
        raise ParseError("spectrum section is empty")
    try:
        return Spectrum(tuple(bands))
    except ValueError as exc:
        raise ParseError(f"invalid spectrum: {exc}") from None


def save_spectrum(spec: Spectrum, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(["# subres spectrum v1"] + spectrum_lines(spec)) + "\n")


def load_spectrum(path) -> Spectrum:
    with open(path) as fh:
        sections = _section_map(split_sections(fh.read()))
    if "spectrum" not in sections:
        raise ParseError("no [spectrum] section found")
    return parse_spectrum_rows(sections["spectrum"])


# -- spaces and polynomial maps ----------------------------------------------


def space_lines(space: GradedSpace) -> list[str]:
    return ["[space]", "blocks " + " ".join(str(d) for d in space.block_dims)]


def parse_space_rows(rows) -> GradedSpace:
    for lineno, toks in rows:
        if toks[0] == "blocks":
            dims = tuple(_parse_int(t, lineno, "block dim") for t in toks[1:])
            try:
                return GradedSpace(dims)
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
    raise ParseError("space section needs a 'blocks' row")


def polymap_lines(p: PolyMap) -> list[str]:
    lines = []
    for t, alpha, c in p.terms():
        exps = " ".join(str(a) for a in alpha)
        lines.append(f"term {t} {exps} {_fmt(c)}")
    return lines


def parse_polymap_rows(rows, source: GradedSpace, target: GradedSpace, max_degree: int) -> PolyMap:
    coeffs = {}
    dim = source.dim
    for lineno, toks in rows:
        if toks[0] != "term" or len(toks) != dim + 3:
            raise ParseError(
                f"line {lineno}: expected 'term <target> <{dim} exponents> <coeff>'"
            )
        t = _parse_int(toks[1], lineno, "target index")
        alpha = tuple(_parse_int(x, lineno, "exponent") for x in toks[2 : 2 + dim])
        c = _parse_float(toks[-1], lineno, "coefficient")
        coeffs[(t, alpha)] = c
    try:
        return PolyMap(source, target, max_degree, coeffs)
    except ValueError as exc:
        raise ParseError(f"invalid polynomial map: {exc}") from None


def polymap_text(p: PolyMap) -> str:
    """Standalone polynomial-map file: header then canonical term rows."""
    lines = [
        "# subres polymap v1",
        "[polymap]",
        "source_blocks " + " ".join(str(d) for d in p.source.block_dims),
        "target_blocks " + " ".join(str(d) for d in p.target.block_dims),
        f"max_degree {p.max_degree}",
        f"monomial_order {MONOMIAL_ORDER_TAG}",
    ]
    lines.extend(polymap_lines(p))
    return "\n".join(lines) + "\n"


def parse_polymap(text: str) -> PolyMap:
    smap = _section_map(split_sections(text))
    rows = smap.get("polymap")
    if not rows:
        raise ParseError("missing [polymap] section")
    source = target = None
    max_degree = None
    term_rows = []
    for lineno, toks in rows:
        if toks[0] == "source_blocks":
            source = GradedSpace(tuple(_parse_int(t, lineno, "dim") for t in toks[1:]))
        elif toks[0] == "target_blocks":
            target = GradedSpace(tuple(_parse_int(t, lineno, "dim") for t in toks[1:]))
        elif toks[0] == "max_degree":
            max_degree = _parse_int(toks[1], lineno, "max_degree")
        elif toks[0] == "monomial_order":
            if toks[1] != MONOMIAL_ORDER_TAG:
                raise ParseError(f"line {lineno}: unsupported monomial order {toks[1]!r}")
        elif toks[0] == "term":
            term_rows.append((lineno, toks))
        else:
            raise ParseError(f"line {lineno}: unknown polymap field {toks[0]!r}")
    if source is None or target is None or max_degree is None:
        raise ParseError("polymap header incomplete")
    return parse_polymap_rows(term_rows, source, target, max_degree)


# -- systems -----------------------------------------------------------------


def parse_run_rows(rows):
    vals = {"N": None, "length": None, "seed": 0, "theta0": 0.0, "v0": None}
    for lineno, toks in rows:
        key = toks[0]
        if key in ("N", "length", "seed"):
            vals[key] = _parse_int(toks[1], lineno, key)
        elif key == "theta0":
            vals[key] = _parse_float(toks[1], lineno, key)
        elif key == "v0":
            vals[key] = tuple(_parse_float(t, lineno, "v0") for t in toks[1:])
        else:
            raise ParseError(f"line {lineno}: unknown run field {key!r}")
    return vals


def system_text(obj) -> str:
    """Canonical text of a GermOrbit or SkewProductSystem."""
    buf = io.StringIO()
    w = lambda s: buf.write(s + "\n")
    w("# subres system v1")
    w("[meta]")
    if isinstance(obj, SkewProductSystem):
        w("kind skew")
    elif obj.is_periodic and obj.period == 1:
        w("kind stationary")
    else:
        w("kind periodic")
    w(f"monomial_order {MONOMIAL_ORDER_TAG}")
    spec = obj.spec
    space = obj.space
    for line in spectrum_lines(spec):
        w(line)
    for line in space_lines(space):
        w(line)
    if isinstance(obj, SkewProductSystem):
        w("[base]")
        w(f"map {obj.base_kind}")
        if obj.base_kind == "rotation":
            w(f"alpha {_fmt(obj.alpha)}")
        if obj.base_kind == "sequence":
            w("theta " + " ".join(_fmt(t) for t in obj.sequence))
        w(f"theta0 {_fmt(obj.run.theta0)}")
        w("v0 " + " ".join(_fmt(x) for x in obj.run.v0))
        w("[fiber]")
        w(f"rho {_fmt(obj.rho)}")
        w(f"rho_nl {_fmt(obj.rho_nl)}")
        for c, (mid, amp, phase, freq) in enumerate(obj.diag):
            w(f"diag {c} {_fmt(mid)} {_fmt(amp)} {_fmt(phase)} {freq}")
        for t, alpha, trig in obj.coeffs:
            exps = " ".join(str(a) for a in alpha)
            w(
                f"coeff {t} {exps} {_fmt(trig.base)} {_fmt(trig.amp)} "
                f"{_fmt(trig.phase)} {trig.freq}"
            )
        w("[run]")
        w(f"N {obj.run.N}")
        w(f"length {obj.run.length}")
        w(f"seed {obj.run.seed}")
    else:
        for k, germ in enumerate(obj.germs):
            w(f"[germ {k}]")
            w(f"max_degree {germ.max_degree}")
            for line in polymap_lines(germ):
                w(line)
        w("[run]")
        w(f"N {max(2, obj.eps.max_degree)}")
        w(f"length {obj.length}")
        w("seed 0")
    return buf.getvalue()


def save_system(obj, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(system_text(obj))


def load_system(path):
    """Parse and validate a system file.

    Returns a GermOrbit for stationary/periodic kinds and a
    SkewProductSystem for skew; validation errors surface with the
    violated invariant and its margin.
    """
    with open(path) as fh:
        text = fh.read()
    return parse_system(text)


def parse_system(text: str):
    sections = split_sections(text)
    smap = _section_map(sections)
    if "meta" not in smap:
        raise ParseError("missing [meta] section")
    kind = None
    for lineno, toks in smap["meta"]:
        if toks[0] == "kind":
            kind = toks[1]
        elif toks[0] == "monomial_order":
            if toks[1] != MONOMIAL_ORDER_TAG:
                raise ParseError(
                    f"line {lineno}: unsupported monomial order {toks[1]!r}"
                )
    if kind not in ("stationary", "periodic", "skew"):
        raise ParseError(f"unknown system kind {kind!r}")
    if "spectrum" not in smap:
        raise ParseError("missing [spectrum] section")
    spec = parse_spectrum_rows(smap["spectrum"])
    space = parse_space_rows(smap.get("space", []))
    run_vals = parse_run_rows(smap.get("run", []))

    if kind == "skew":
        base_rows = smap.get("base", [])
        fiber_rows = smap.get("fiber", [])
        base_kind = None
        alpha = None
        sequence = None
        theta0 = run_vals["theta0"]
        v0 = run_vals["v0"]
        for lineno, toks in base_rows:
            if toks[0] == "map":
                base_kind = toks[1]
            elif toks[0] == "alpha":
                alpha = _parse_float(toks[1], lineno, "alpha")
            elif toks[0] == "theta":
                sequence = tuple(_parse_float(t, lineno, "theta") for t in toks[1:])
            elif toks[0] == "theta0":
                theta0 = _parse_float(toks[1], lineno, "theta0")
            elif toks[0] == "v0":
                v0 = tuple(_parse_float(t, lineno, "v0") for t in toks[1:])
            else:
                raise ParseError(f"line {lineno}: unknown base field {toks[0]!r}")
        rho = None
        rho_nl = 0.0
        diag = {}
        coeffs = []
        for lineno, toks in fiber_rows:
            if toks[0] == "rho":
                rho = _parse_float(toks[1], lineno, "rho")
            elif toks[0] == "rho_nl":
                rho_nl = _parse_float(toks[1], lineno, "rho_nl")
            elif toks[0] == "diag":
                c = _parse_int(toks[1], lineno, "coordinate")
                diag[c] = (
                    _parse_float(toks[2], lineno, "mid"),
                    _parse_float(toks[3], lineno, "amp"),
                    _parse_float(toks[4], lineno, "phase"),
                    _parse_int(toks[5], lineno, "freq"),
                )
            elif toks[0] == "coeff":
                dim = space.dim
                if len(toks) != dim + 6:
                    raise ParseError(
                        f"line {lineno}: expected 'coeff <t> <{dim} exps> "
                        "<base> <amp> <phase> <freq>'"
                    )
                t = _parse_int(toks[1], lineno, "target")
                alpha_exp = tuple(
                    _parse_int(x, lineno, "exponent") for x in toks[2 : 2 + dim]
                )
                trig = TrigCoeff(
                    _parse_float(toks[2 + dim], lineno, "base"),
                    _parse_float(toks[3 + dim], lineno, "amp"),
                    _parse_float(toks[4 + dim], lineno, "phase"),
                    _parse_int(toks[5 + dim], lineno, "freq"),
                )
                coeffs.append((t, alpha_exp, trig))
            else:
                raise ParseError(f"line {lineno}: unknown fiber field {toks[0]!r}")
        if rho is None:
            raise ParseError("skew system needs a 'rho' row in [fiber]")
        if set(diag) != set(range(space.dim)):
            raise ParseError("need one 'diag' row per fiber coordinate")
        if v0 is None:
            v0 = (0.0,) * space.dim
        run = RunDefaults(
            N=run_vals["N"] or 2,
            length=run_vals["length"] or 1,
            seed=run_vals["seed"],
            theta0=theta0,
            v0=tuple(v0),
        )
        try:
            return SkewProductSystem(
                spec=spec,
                space=space,
                base_kind=base_kind,
                rho=rho,
                rho_nl=rho_nl,
                diag=tuple(diag[c] for c in range(space.dim)),
                coeffs=tuple(coeffs),
                run=run,
                alpha=alpha,
                sequence=sequence,
            )
        except SystemValidationError as exc:
            raise ParseError(str(exc)) from None

    germ_sections = [(name, rows) for name, rows in sections if name.startswith("germ")]
    germ_sections.sort(key=lambda nr: int(nr[0].split()[1]))
    germs = []
    for name, rows in germ_sections:
        max_degree = None
        term_rows = []
        for lineno, toks in rows:
            if toks[0] == "max_degree":
                max_degree = _parse_int(toks[1], lineno, "max_degree")
            else:
                term_rows.append((lineno, toks))
        if max_degree is None:
            max_degree = max(
                (sum(int(x) for x in toks[2:-1]) for _, toks in term_rows), default=1
            )
        germs.append(parse_polymap_rows(term_rows, space, space, max_degree))
    if not germs:
        raise ParseError("no [germ k] sections found")
    if kind == "stationary" and len(germs) != 1:
        raise ParseError("stationary systems carry exactly one germ")
    length = run_vals["length"] or len(germs)
    if kind == "stationary":
        return make_stationary(spec, space, germs[0], length=length)
    return make_periodic(spec, space, germs)


def read_run_defaults(path) -> dict:
    """The [run] section of a system file (empty dict when absent)."""
    with open(path) as fh:
        smap = _section_map(split_sections(fh.read()))
    return parse_run_rows(smap.get("run", []))


# -- orbit hashing and atlas files --------------------------------------------


def orbit_text(orbit: GermOrbit) -> str:
    buf = io.StringIO()
    w = lambda s: buf.write(s + "\n")
    w("# subres orbit v1")
    w("[meta]")
    w(f"monomial_order {MONOMIAL_ORDER_TAG}")
    w(f"period {orbit.period if orbit.period is not None else 0}")
    w(f"length {orbit.length}")
    w(f"domain_radius {_fmt(orbit.domain_radius)}")
    for line in spectrum_lines(orbit.spec):
        w(line)
    for line in space_lines(orbit.space):
        w(line)
    if orbit.base_points is not None:
        w("[base_points]")
        for k, t in enumerate(orbit.base_points):
            w(f"point {k} {_fmt(t)}")
    if orbit.fiber_points is not None:
        w("[fiber_points]")
        for k, v in enumerate(orbit.fiber_points):
            w(f"point {k} " + " ".join(_fmt(x) for x in v))
    for k, germ in enumerate(orbit.germs):
        w(f"[germ {k}]")
        w(f"max_degree {germ.max_degree}")
        for line in polymap_lines(germ):
            w(line)
    return buf.getvalue()


def orbit_hash(orbit: GermOrbit) -> str:
    return hashlib.sha256(orbit_text(orbit).encode()).hexdigest()


def atlas_text(atlas) -> str:
    buf = io.StringIO()
    w = lambda s: buf.write(s + "\n")
    w("# subres atlas v1")
    w("[meta]")
    w(f"orbit_hash {atlas.orbit_hash}")
    w(f"policy {atlas.policy}")
    w(f"N {atlas.N}")
    w(f"d {atlas.d}")
    w(f"epsilon {_fmt(atlas.eps.epsilon)}")
    w(f"K {atlas.K}")
    w(f"seed {atlas.seed}")
    w(f"period {atlas.period if atlas.period is not None else 0}")
    w(f"n_points {atlas.n_points}")
    w(f"monomial_order {MONOMIAL_ORDER_TAG}")
    for line in spectrum_lines(atlas.spec):
        w(line)
    for line in space_lines(atlas.space):
        w(line)
    w("[tail]")
    for k in range(atlas.n_points):
        w(f"point {k} {_fmt(atlas.tail_bounds[k])}")
    for k in range(atlas.n_points):
        w(f"[H {k}]")
        for line in polymap_lines(atlas.H[k]):
            w(line)
    for k in range(len(atlas.P)):
        w(f"[P {k}]")
        for line in polymap_lines(atlas.P[k]):
            w(line)
    return buf.getvalue()


def save_atlas(atlas, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(atlas_text(atlas))


def load_atlas(path):
    from .engine import NormalFormAtlas

    with open(path) as fh:
        sections = split_sections(fh.read())
    smap = _section_map(sections)
    meta = {}
    for lineno, toks in smap.get("meta", []):
        meta[toks[0]] = (lineno, toks[1:])
    try:
        spec = parse_spectrum_rows(smap["spectrum"])
        space = parse_space_rows(smap["space"])
    except KeyError as exc:
        raise ParseError(f"atlas missing section {exc}") from None

    def m_int(key):
        lineno, toks = meta[key]
        return _parse_int(toks[0], lineno, key)

    def m_float(key):
        lineno, toks = meta[key]
        return _parse_float(toks[0], lineno, key)

    from .spectral import EpsilonBudget

    N = m_int("N")
    n_points = m_int("n_points")
    period = m_int("period") or None
    tail = [0.0] * n_points
    for lineno, toks in smap.get("tail", []):
        k = _parse_int(toks[1], lineno, "point")
        tail[k] = _parse_float(toks[2], lineno, "tail bound")
    H = []
    P = []
    for name, rows in sections:
        if name.startswith("H ") or name.startswith("P "):
            target = H if name.startswith("H") else P
            target.append(parse_polymap_rows(rows, space, space, N))
    return NormalFormAtlas(
        spec=spec,
        space=space,
        N=N,
        d=m_int("d"),
        eps=EpsilonBudget(m_float("epsilon"), N),
        policy=meta["policy"][1][0],
        K=m_int("K"),
        seed=m_int("seed"),
        period=period,
        H=tuple(H),
        P=tuple(P),
        tail_bounds=tuple(tail),
        orbit_hash=meta["orbit_hash"][1][0],
        per_degree=(),
    )
