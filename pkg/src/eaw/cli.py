"""Command-line entry point: ``eaw <command> [--config path|name] [--format json|text]``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np
import sympy as sp

from . import __version__
from .algebra import (
    GrassmannElement,
    Parity,
    WeilElement,
    center,
    dense_mul,
    from_dense,
    mask_to_subset,
    parity,
    to_dense,
)
from .config import ConfigError, WorkbenchConfig, catalog, load_catalog_entry, load_config, parse_stage
from .curvature import AxiomError, bianchi_residuals, curvature, einstein_check, einstein_residual, parse_tensor
from .expr import Chart, ExprError, zero_verdict
from .numeric import evaluate_tensor, max_relative_error, numeric_curvature
from .lorentz import signature_at
from .report import Check, Report
from .spectrum import (
    CoordinateAlgebra,
    GrassmannFunctionAlgebra,
    GrassmannPoint,
    QuotientAlgebra,
    WeilAlgebra,
    ghost_ideal,
    real_spectrum,
)
from .stage import (
    hat_iso_check,
    jet_morphism_check,
    parametrized_space,
    random_function,
    restriction_recovers,
    staged_metric_identity,
    theta_iso_check,
)

COMMANDS = ("curvature", "einstein-check", "spectrum", "geometricity", "stage", "loops", "suite")
DEFAULT_CONFIG = {
    "curvature": "schwarzschild",
    "einstein-check": "schwarzschild",
    "spectrum": "weil1",
    "geometricity": "weil1",
    "stage": "schwarzschild",
    "loops": "circle_loops",
}


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _new_report(command: str, cfg: WorkbenchConfig, seed: int, timings: bool) -> Report:
    return Report(command, cfg.name, cfg.digest(), seed, timings=timings)


def _need(cfg: WorkbenchConfig, block: str, command: str):
    if getattr(cfg, block) is None:
        raise ConfigError([f"{block}: required by '{command}' but missing"], cfg.name)


# --------------------------------------------------------------------------
# curvature

def _verdict_check(name: str, v) -> Check:
    return Check(name, v.is_zero, v.kind, v.max_residual, v.samples or None)


def run_curvature(cfg: WorkbenchConfig, seed: int, timings: bool = False, rep: Report | None = None) -> Report:
    _need(cfg, "metric", "curvature")
    rep = rep or _new_report("curvature", cfg, seed, timings)
    g = cfg.build_metric()
    out = cfg.output

    with _Timer() as t:
        lorentz = g.is_lorentz(seed=seed)
        pts, prm = g.chart.sample(1, seed)
        sig = signature_at(g, dict(zip(g.chart.coords, pts[0])), dict(zip(g.chart.param_names, prm[0])))
    sig_text = "(" + ",".join("+" if s > 0 else "-" for s in sig) + ")"
    rep.add(Check("metric.signature", lorentz == cfg.metric.lorentz,
                  f"{sig_text}, lorentz={str(lorentz).lower()}", samples=50,
                  detail={"expected_lorentz": cfg.metric.lorentz}, elapsed=t.elapsed))

    with _Timer() as t:
        data = curvature(g)
    for key, label in (("torsion", "levi-civita.torsion"), ("metric", "levi-civita.compatibility"),
                       ("antisymmetry", "riemann.antisymmetry"), ("ricci-symmetry", "ricci.symmetry"),
                       ("trace-identity", "ricci.trace-identity")):
        c = _verdict_check(label, data.checks[key])
        c.elapsed = t.elapsed if key == "torsion" else None
        rep.add(c)
    rep.add(_verdict_check("riemann.bianchi", zero_verdict(bianchi_residuals(data), g.chart, seed=seed)))

    with _Timer() as t:
        nc = numeric_curvature(g, 64, seed)
        scale = max(1.0, float(np.max(np.abs(nc.riemann))))
        errs = {
            "christoffel": max_relative_error(evaluate_tensor(data.connection.gamma, g, nc.points, nc.params), nc.gamma),
            "riemann": max_relative_error(evaluate_tensor(data.riemann, g, nc.points, nc.params), nc.riemann, scale),
            "ricci": max_relative_error(evaluate_tensor(data.ricci, g, nc.points, nc.params), nc.ricci, scale),
        }
    for name, e in errs.items():
        rep.add(Check(f"oracle.{name}", e < out.numeric_tol, "agrees" if e < out.numeric_tol else "disagrees",
                      e, 64, {"tol": out.numeric_tol}, elapsed=t.elapsed if name == "christoffel" else None))
    rep.add(Check("scalar-curvature", True, str(data.scalar).replace("**", "^")))
    return rep


# --------------------------------------------------------------------------
# einstein-check

def run_einstein(cfg: WorkbenchConfig, seed: int, timings: bool = False, form: str | None = None,
                 lam: str | None = None, numeric_only: bool = False, tol: float | None = None,
                 rep: Report | None = None) -> Report:
    _need(cfg, "metric", "einstein-check")
    rep = rep or _new_report("einstein-check", cfg, seed, timings)
    eq = cfg.equation
    form = form or (eq.form if eq else "ii")
    lam = lam if lam is not None else (eq.cosmological if eq else "0")
    T = eq.T if eq else None
    tol = tol or cfg.output.tol
    g = cfg.build_metric()
    with _Timer() as t:
        data = curvature(g)
        v = einstein_check(g, lam, T if form == "i" else None, form, numeric_only=numeric_only,
                           samples=cfg.output.samples, tol=tol, seed=seed, data=data)
    rep.add(Check(f"einstein.form-{form}", v.holds, v.verdict.kind, v.verdict.max_residual,
                  v.verdict.samples or None,
                  {"lambda": str(v.cosmological), "tol": tol, "witness": v.verdict.witness},
                  elapsed=t.elapsed))

    # independent route: finite-difference curvature, same residual formula
    with _Timer() as t:
        nc = numeric_curvature(g, 64, seed)
        res = einstein_residual(data, lam, T if form == "i" else None, form)
        lam_e = sp.sympify(v.cosmological)
        n = g.dim
        lam_vals = evaluate_tensor(((lam_e,),), g, nc.points, nc.params)[:, 0, 0]
        num = nc.ricci - lam_vals[:, None, None] * nc.g
        if form == "i":
            Tm = parse_tensor(g, T)
            Tv = evaluate_tensor(tuple(tuple(Tm[i, j] for j in range(n)) for i in range(n)), g, nc.points, nc.params)
            num = nc.ricci - 0.5 * nc.scalar[:, None, None] * nc.g + lam_vals[:, None, None] * nc.g - 8 * np.pi * Tv
        scale = max(1.0, float(np.max(np.abs(nc.riemann))))
        worst = float(np.max(np.abs(num))) / scale
        sym = evaluate_tensor(tuple(tuple(res[i, j] for j in range(n)) for i in range(n)), g, nc.points, nc.params)
        agree = float(np.max(np.abs(sym - num))) / scale
    ok = worst < cfg.output.numeric_tol if v.holds else agree < cfg.output.numeric_tol
    rep.add(Check("einstein.numeric-oracle", ok, "zero" if worst < cfg.output.numeric_tol else "nonzero",
                  worst, 64, {"relative_to_riemann_scale": True, "symbolic_vs_numeric": agree}, elapsed=t.elapsed))
    return rep


# --------------------------------------------------------------------------
# spectrum / geometricity

def _generic_element(A):
    if isinstance(A, WeilAlgebra):
        names = "xyzw"[: A.order + 1]
        return WeilElement(tuple(sp.Symbol(c, real=True) for c in names))
    if isinstance(A, QuotientAlgebra):
        coeffs = [sp.Symbol(f"a{i}", real=True) for i in range(len(A.basis))]
        return sp.expand(sum(c * b for c, b in zip(coeffs, A.basis)))
    return None


def grassmann_law_checks(q: int, seed: int, triples: int = 200, pairs: int = 100) -> list[Check]:
    """Supercommutativity on all basis pairs, associativity and chi_{v,a} multiplicativity on random draws."""
    checks = []
    basis = [GrassmannElement.monomial(m, q) for m in range(1 << q)]
    bad = 0
    for a in basis:
        for b in basis:
            sign = (-1) ** (parity(a).alpha * parity(b).alpha)
            if a * b - b * a * sign != GrassmannElement.scalar(0, q):
                bad += 1
    checks.append(Check(f"grassmann.supercommutativity q={q}", bad == 0, "exact" if not bad else f"{bad} failures",
                        samples=len(basis) ** 2))
    rng = np.random.default_rng(seed)

    def rand_el():
        return GrassmannElement.from_components(
            q, {mask_to_subset(m): int(rng.integers(-3, 4)) for m in range(1 << q)})

    bad = 0
    for _ in range(triples):
        x, y, z = rand_el(), rand_el(), rand_el()
        left = (x * y) * z
        # cross-check the sparse product against the dense table kernel
        dense = dense_mul(dense_mul(to_dense(x), to_dense(y), q), to_dense(z), q)
        bad += left != x * (y * z) or left != from_dense(dense, q)
    checks.append(Check(f"grassmann.associativity q={q}", bad == 0, "exact" if not bad else f"{bad} failures",
                        samples=triples))
    chart = Chart(("x",), ((-1, 1),))
    bad = 0
    for _ in range(pairs):
        f, g = random_function(chart, rng), random_function(chart, rng)
        i = int(rng.integers(1, q + 1))
        pt = GrassmannPoint(chart, (sp.Rational(int(rng.integers(-8, 9)), 16),), (int(rng.integers(-3, 4)),),
                            GrassmannElement.generator(i, q))
        lhs, rhs = pt(f * g), pt(f) * pt(g)
        bad += bool((lhs - rhs).simplify().terms)
    checks.append(Check(f"grassmann.point-multiplicativity q={q}", bad == 0,
                        "exact" if not bad else f"{bad} failures", samples=pairs))
    cen = center(q)
    even = [b for b in basis if parity(b) == Parity.EVEN]
    checks.append(Check(f"grassmann.center q={q}", True, f"dim {len(cen)} (even part dim {len(even)})",
                        detail={"center": [str(c) for c in cen]}))
    return checks


def run_spectrum(cfg: WorkbenchConfig, seed: int, timings: bool = False, rep: Report | None = None) -> Report:
    _need(cfg, "algebra", "spectrum")
    rep = rep or _new_report("spectrum", cfg, seed, timings)
    A = cfg.build_algebra()
    with _Timer() as t:
        spec = real_spectrum(A)
    if isinstance(A, (CoordinateAlgebra, GrassmannFunctionAlgebra)):
        rep.add(Check("spectrum.real", True, f"grid of {len(spec)} points",
                      detail={"grid": f"{A.density}^{A.chart.dim}"}, elapsed=t.elapsed))
        if isinstance(A, GrassmannFunctionAlgebra):
            for c in grassmann_law_checks(A.q, seed):
                rep.add(c)
        return rep
    generic = _generic_element(A)
    table = {p.label: str(p(generic)).replace("**", "^") for p in spec}
    labels = ", ".join(p.label for p in spec) or "none"
    rep.add(Check("spectrum.real", True, f"{len(spec)} point(s): {labels}",
                  detail={"algebra": A.describe(), "element": str(generic).replace("**", "^"), "theta": table},
                  elapsed=t.elapsed))
    return rep


def run_geometricity(cfg: WorkbenchConfig, seed: int, timings: bool = False, rep: Report | None = None) -> Report:
    _need(cfg, "algebra", "geometricity")
    rep = rep or _new_report("geometricity", cfg, seed, timings)
    A = cfg.build_algebra()
    for s in cfg.algebra.stages:
        with _Timer() as t:
            r = ghost_ideal(A, parse_stage(s))
        expected = cfg.algebra.expect_geometric.get(s)
        text = "geometric" if r.geometric else f"not geometric, witness {r.witness}"
        if expected is False:
            text += " (expected)"
        d = r.to_dict()
        rep.add(Check(f"geometricity.{r.stage}", expected is None or expected == r.geometric, text,
                      samples=r.points_enumerated,
                      detail={"geometric": r.geometric, "kernel": d["kernel_basis"], "witness": r.witness,
                              "expected": expected, "method": r.method, "notes": d["notes"]},
                      elapsed=t.elapsed))
    return rep


# --------------------------------------------------------------------------
# stage / loops

def run_stage(cfg: WorkbenchConfig, seed: int, timings: bool = False, weil: int | None = None,
              rep: Report | None = None) -> Report:
    rep = rep or _new_report("stage", cfg, seed, timings)
    orders = [weil] if weil else (cfg.stage.weil if cfg.stage else [1, 2, 3])
    for k in orders:
        if cfg.metric is not None:
            g = cfg.build_metric()
            with _Timer() as t:
                r = staged_metric_identity(g, k, 100 if k == 1 else 20, seed)
            rep.add(Check(f"stage.metric-identity W^{k}", r.passed, "exact" if r.passed else "mismatch",
                          r.max_residual, r.draws, elapsed=t.elapsed))
        if cfg.chart is not None:
            with _Timer() as t:
                r = jet_morphism_check(cfg.build_chart(), k, 200 if k == 1 else 50, seed)
            rep.add(Check(f"stage.jet-morphism W^{k}", r.passed, "exact product, slope within tol"
                          if r.passed else "failed", r.max_residual, r.draws, elapsed=t.elapsed))
        if cfg.algebra is not None and cfg.algebra.kind in ("coordinate", "quotient", "weil"):
            A = cfg.build_algebra()
            if isinstance(A, CoordinateAlgebra) and cfg.stage and cfg.stage.density:
                A = CoordinateAlgebra(A.chart, cfg.stage.density)
            with _Timer() as t:
                r = theta_iso_check(A, k, seed=seed)
            expected_real = cfg.algebra.expect_geometric.get("R")
            if r.precondition:
                ok = bool(r.isomorphic_onto_image) and r.kernels_equal and r.morphism_ok is not False
                verdict = "isomorphic onto image" if ok else "not injective"
            else:
                ok = expected_real is False
                verdict = "precondition failure: not geometric at R" + (" (expected)" if ok else "")
            rep.add(Check(f"stage.theta-iso W^{k}", ok, verdict, detail=r.to_dict(), elapsed=t.elapsed))
    return rep


def run_loops(cfg: WorkbenchConfig, seed: int, timings: bool = False, circle: int | None = None,
              rep: Report | None = None) -> Report:
    if cfg.stage is None or cfg.stage.loops is None:
        raise ConfigError(["stage.loops: required by 'loops' but missing"], cfg.name)
    rep = rep or _new_report("loops", cfg, seed, timings)
    lb = cfg.stage.loops
    chart = cfg.build_chart()
    with _Timer() as t:
        space = parametrized_space(chart, circle or lb.samples, lb.maps, lb.density)
        gens = lb.generators or list(chart.coords)
        r = hat_iso_check(space, gens)
    rep.add(Check("loops.hat-injective", r.injective, "injective" if r.injective else "collision",
                  samples=space.constant_points.shape[0], detail={"collisions": r.collisions}, elapsed=t.elapsed))
    rep.add(Check("loops.hat-morphism", r.homomorphism, "within 1e-12" if r.homomorphism else "violated",
                  r.max_hom_residual, len(space.samples) * len(space.loops)))
    rng = np.random.default_rng(seed)
    extra = [random_function(chart, rng) for _ in range(4)]
    recovered = r.diagram_commutes and all(restriction_recovers(space, f) for f in extra)
    rep.add(Check("loops.restriction-diagram", recovered, "exact" if recovered else "mismatch",
                  samples=space.constant_points.shape[0]))
    rep.add(Check("loops.dimension", r.dimension == chart.dim, f"dim M^P generators = {r.dimension}"))
    return rep


# --------------------------------------------------------------------------
# suite

def applicable(cfg: WorkbenchConfig) -> list[str]:
    cmds = []
    if cfg.metric is not None:
        cmds += ["curvature", "einstein-check"]
    if cfg.algebra is not None:
        cmds += ["spectrum", "geometricity"]
    if cfg.chart is not None and (cfg.metric is not None or cfg.stage is not None):
        cmds.append("stage")
    elif cfg.algebra is not None and cfg.algebra.kind in ("quotient", "weil"):
        cmds.append("stage")
    if cfg.stage is not None and cfg.stage.loops is not None:
        cmds.append("loops")
    return cmds


def run_command(command: str, cfg: WorkbenchConfig, seed: int, timings: bool = False, **opts) -> Report:
    rep = _new_report(command, cfg, seed, timings)
    if command == "curvature":
        return run_curvature(cfg, seed, timings, rep=rep)
    if command == "einstein-check":
        return run_einstein(cfg, seed, timings, rep=rep, **opts)
    if command == "spectrum":
        return run_spectrum(cfg, seed, timings, rep=rep)
    if command == "geometricity":
        return run_geometricity(cfg, seed, timings, rep=rep)
    if command == "stage":
        return run_stage(cfg, seed, timings, weil=opts.get("weil"), rep=rep)
    if command == "loops":
        return run_loops(cfg, seed, timings, circle=opts.get("circle"), rep=rep)
    raise ValueError(f"unknown command {command!r}")


def run_suite(configs: list[WorkbenchConfig], seed: int, timings: bool = False) -> Report:
    import hashlib
    digest = hashlib.sha256("".join(c.digest() for c in configs).encode()).hexdigest()[:16]
    top = Report("suite", ",".join(c.name for c in configs) if len(configs) == 1 else "catalog", digest, seed,
                 timings=timings)
    for cfg in configs:
        for cmd in applicable(cfg):
            top.sections.append(run_command(cmd, cfg, seed, timings))
    return top


# --------------------------------------------------------------------------
# argument handling

def _resolve_config(arg: str | None, command: str) -> WorkbenchConfig:
    if arg is None:
        return load_catalog_entry(DEFAULT_CONFIG[command])
    path = Path(arg)
    if path.suffix in (".yaml", ".yml") or path.exists():
        return load_config(path)
    return load_catalog_entry(arg)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config path or bundled catalog name")
    common.add_argument("--format", choices=("json", "text"), default=None)
    common.add_argument("--tol", type=float, default=None, help="numeric zero tolerance")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="sampling seed (default 0xE1A5)")
    common.add_argument("--timings", action="store_true", help="include elapsed times (breaks byte identity)")

    p = argparse.ArgumentParser(prog="eaw", description="Einstein algebra workbench")
    p.add_argument("--version", action="version", version=f"eaw {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("curvature", parents=[common], help="connection, curvature and oracle agreement")
    e = sub.add_parser("einstein-check", parents=[common], help="Einstein equation residuals")
    e.add_argument("--form", choices=("i", "ii"))
    e.add_argument("--lambda", dest="lam", help="cosmological constant expression")
    e.add_argument("--numeric-only", action="store_true")
    sub.add_parser("spectrum", parents=[common], help="real points and the theta map")
    sub.add_parser("geometricity", parents=[common], help="ghost ideals at the configured stages")
    s = sub.add_parser("stage", parents=[common], help="Weil-stage transport checks")
    s.add_argument("--weil", type=int, choices=(1, 2, 3))
    lp = sub.add_parser("loops", parents=[common], help="parametrised points on a circle")
    lp.add_argument("--circle", type=int)
    sub.add_parser("suite", parents=[common], help="run every applicable command on the catalog")
    sub.add_parser("catalog", help="list bundled configs")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "catalog":
        for name in catalog():
            print(name)
        return 0
    try:
        if args.command == "suite":
            configs = [_resolve_config(args.config, "curvature")] if args.config else \
                [load_catalog_entry(n) for n in catalog()]
            fmt = args.format or "text"
            seed = args.seed if args.seed is not None else (configs[0].chart.seed if configs[0].chart else 0xE1A5)
            rep = run_suite(configs, seed, args.timings)
        else:
            cfg = _resolve_config(args.config, args.command)
            if args.tol is not None:
                cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"tol": args.tol})})
            fmt = args.format or cfg.output.format
            seed = args.seed if args.seed is not None else (cfg.chart.seed if cfg.chart else 0xE1A5)
            opts = {}
            if args.command == "einstein-check":
                opts = {"form": args.form, "lam": args.lam, "numeric_only": args.numeric_only, "tol": args.tol}
            elif args.command == "stage":
                opts = {"weil": args.weil}
            elif args.command == "loops":
                opts = {"circle": args.circle}
            rep = run_command(args.command, cfg, seed, args.timings, **opts)
    except ConfigError as exc:
        print(f"eaw: {exc}", file=sys.stderr)
        return 2
    except (ExprError, AxiomError, ValueError, ArithmeticError) as exc:
        origin = type(exc).__module__.split(".")[-1]
        print(f"eaw: {args.command} failed in {origin}: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(rep.render(fmt))
    return rep.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
