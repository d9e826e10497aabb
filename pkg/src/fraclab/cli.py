"""Command-line front end.

    fraclab <subcommand> --config <path> [--out <dir>] [--seed <u64>]

Each subcommand runs a suite of checks, writes ``ledger.csv`` and
``summary.json`` into the output directory and exits 0 when every row
passes.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import convexity as cx
from . import dn
from . import heat
from . import io
from . import manifold as mf
from . import torus as tr
from . import transport as tp
from .report import InequalityReport

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

HELP_EPILOG = """\
ledger.csv columns (after one '# generated <UTC timestamp>' line):
  module         package module that owns the check
  operation      checked operation
  parameters     semicolon-separated key=value list identifying the case
  max_violation  signed worst violation (negative = holds with that margin)
  tolerance      acceptance threshold for max_violation
  verdict        pass iff max_violation <= tolerance

summary.json holds the row counts and the worst row.

exit codes: 0 all rows pass; 1 some row fails; 2 bad or unknown config key
or out-of-range parameter; 3 I/O failure.

config files hold 'key = value' lines; '#' starts a comment. A seed is
required (config key 'seed' or --seed).
"""

# every operation that yields a verdict, with the subcommand that reaches it
COVERAGE = {
    ("spectral_torus", "normalization_constant"): "spectrum",
    ("spectral_torus", "singular_integral_laplacian"): "spectrum",
    ("manifold_spectrum", "bochner_square_check"): "spectrum",
    ("manifold_spectrum", "supnorm_growth_report"): "spectrum",
    ("heat_semigroup", "kernel_positivity_mass_check"): "heat-kernel",
    ("heat_semigroup", "heat_lp_monotonicity"): "heat-kernel",
    ("heat_semigroup", "stable_subordination_weights"): "subordinate",
    ("heat_semigroup", "subordinated_kernel_check"): "subordinate",
    ("heat_semigroup", "complete_monotonicity_check"): "subordinate",
    ("convexity_lab", "verify_pointwise_inequality"): "verify-ineq",
    ("convexity_lab", "derivative_at_zero_check"): "verify-ineq",
    ("dirichlet_neumann", "dn_apply"): "dn",
    ("dirichlet_neumann", "verify_power_inequality"): "dn",
    ("dirichlet_neumann", "hopf_mechanism_diagnostic"): "dn",
    ("transport_sim", "sqg_velocity"): "transport",
    ("transport_sim", "step"): "transport",
    ("transport_sim", "lp_decay_report"): "transport",
    ("transport_sim", "dissipation_sign_check"): "transport",
}

_COMMON = {"seed": (int, None)}

SCHEMAS = {
    "verify-ineq": {
        "operator": (str, "circle"), "N": (int, 256), "alpha": (io.float_list, [0.5, 1.0, 1.5, 2.0]),
        "phi": (io.str_list, ["x2", "x4"]), "fields": (int, 10), "band": (int, 40),
        "amplitude": (float, 1.0), "tolerance": (float, None), "derivative": (io.boolean, False),
        "h": (float, None), "test_hook": (str, "none"),
    },
    "heat-kernel": {
        "manifold": (str, "circle"), "N": (int, 64), "L": (int, 8), "K": (int, 0),
        "alpha": (io.float_list, [0.5, 1.0, 1.5, 2.0]), "t": (io.float_list, [0.1, 0.5, 1.0]),
        "source": (int, 0), "m": (io.int_list, [1, 2, 4]), "fields": (int, 3), "band": (int, 4),
        "dump_kernel": (io.boolean, True),
    },
    "subordinate": {
        "alpha": (io.float_list, [0.5, 1.0, 1.5]), "t": (float, 0.5), "lam_max": (float, 128.0**2),
        "tolerance": (float, 1e-6), "max_nodes": (int, 400), "N": (int, 256), "source": (int, 0),
        "cm_points": (int, 40), "cm_max": (float, 10.0), "dump_measure": (io.boolean, True),
    },
    "dn": {
        "domain": (str, "disk"), "N": (int, 512), "m": (io.int_list, [1, 2, 3]),
        "fields": (int, 10), "band": (int, 32), "boundary_file": (str, None),
    },
    "transport": {
        "N": (int, 128), "alpha": (float, 1.5), "kappa": (float, 0.1), "dt": (float, 2e-3),
        "T": (float, 2.0), "velocity": (str, "sqg"), "p_list": (io.p_list, [2.0, 4.0, 8.0]),
        "band": (int, 8), "scheme": (str, "ifrk4"), "initial_file": (str, None),
        "dump_trajectory": (io.boolean, True),
    },
    "spectrum": {
        "manifold": (str, "circle"), "N": (int, 64), "L": (int, 8), "K": (int, 0),
        "stiffness_file": (str, None), "mass_file": (str, None),
        "bochner_modes": (io.int_list, [1, 2, 3]), "supnorm": (io.boolean, True),
        "torus_checks": (io.boolean, True), "torus_alpha": (io.float_list, [0.5, 1.0, 1.5]),
        "torus_n": (io.int_list, [1, 2]),
    },
}
for _schema in SCHEMAS.values():
    _schema.update(_COMMON)


class ParameterError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


@dataclass
class ReportBundle:
    ledger_path: Path
    summary_path: Path
    rows: list
    exit_code: int


def _require(cond: bool, key: str, message: str):
    if not cond:
        raise ParameterError(key, f"parameter '{key}': {message}")


def _fmt(x) -> str:
    if isinstance(x, float):
        return "inf" if np.isinf(x) else f"{x:g}"
    return str(x)


class _Run:
    def __init__(self, cfg: dict, out: Path):
        self.cfg = cfg
        self.out = out
        self.ledger = io.Ledger()
        self.rng = np.random.default_rng(cfg["seed"])

    def add(self, module, operation, report: InequalityReport, **params):
        self.ledger.add(module, operation, {k: _fmt(v) for k, v in params.items()}, report)


# ----------------------------------------------------------------- suites


def _decomposition(run: _Run) -> mf.SpectrumDecomposition:
    c = run.cfg
    kind = c["manifold"]
    if kind == "circle":
        spec = mf.ManifoldSpec.circle(c["N"])
    elif kind == "torus":
        spec = mf.ManifoldSpec.torus(c["N"])
    elif kind == "sphere":
        spec = mf.ManifoldSpec.sphere(c["L"])
    elif kind == "custom":
        _require(c.get("stiffness_file") is not None, "stiffness_file", "needed for a custom manifold")
        S = io.read_coordinate_matrix(c["stiffness_file"])
        M = io.read_mass(c["mass_file"]) if c.get("mass_file") else None
        spec = mf.ManifoldSpec.custom(S, M)
    else:
        raise ParameterError("manifold", f"unknown manifold '{kind}'")
    nodes = spec.N if kind in ("circle", "custom") else (spec.N**2 if kind == "torus" else None)
    K = c["K"] or (nodes if nodes else 2 * (spec.L + 1) ** 2)
    if kind == "sphere" and not c["K"]:
        K = (spec.L + 1) ** 2
    return mf.build_spectrum(spec, K)


def suite_verify(run: _Run):
    c = run.cfg
    op_kind = c["operator"]
    _require(op_kind in ("circle", "torus2", "path", "cycle"), "operator",
             "must be circle, torus2, path or cycle")
    _require(c["fields"] >= 1, "fields", "must be >= 1")
    _require(c["test_hook"] in ("none", "negate_multiplier"), "test_hook",
             "must be none or negate_multiplier")
    lib = cx.library()
    for name in c["phi"]:
        _require(name in lib, "phi", f"unknown convex function '{name}'")
    sign = -1.0 if c["test_hook"] == "negate_multiplier" else 1.0
    grid = None
    if op_kind in ("circle", "torus2"):
        grid = tr.TorusGrid(1 if op_kind == "circle" else 2, c["N"])
        _require(c["band"] < grid.N // 2, "band", "must stay below N/2")
        fields = [cx.random_band_limited(grid, c["band"], run.rng, c["amplitude"])
                  for _ in range(c["fields"])]
    else:
        fields = []
        for _ in range(c["fields"]):
            v = run.rng.standard_normal(c["N"])
            fields.append(c["amplitude"] * v / np.abs(v).max())
    for alpha in c["alpha"]:
        if grid is not None:
            op = cx.TorusOperator(grid, alpha, sign)
        else:
            M = cx.MatrixOperator(cx.path_laplacian(c["N"], op_kind == "cycle"), alpha)
            op = M
            if sign < 0:
                M.matrix = -M.matrix
        for name in c["phi"]:
            for i, f in enumerate(fields):
                rep = cx.verify_pointwise_inequality(op, f, lib[name], c["tolerance"])
                run.add("convexity_lab", "verify_pointwise_inequality", rep, operator=op_kind,
                        N=c["N"], alpha=alpha, phi=name, field=i,
                        degraded=rep.metadata["degraded"])
    if c["derivative"]:
        _require(op_kind == "circle", "derivative", "derivative check runs on the circle")
        dec = mf.build_spectrum(mf.ManifoldSpec.circle(c["N"]), c["N"])
        for alpha in c["alpha"]:
            for name in c["phi"]:
                # first-order regime needs h * band^alpha small
                h = c["h"] or float(np.clip(0.01 / max(c["band"], 1) ** alpha, 1e-6, 1e-3))
                d = cx.derivative_at_zero_check(dec, alpha, fields[0], lib[name], h=h)
                rep = d.report
                if not d.converged:  # nonconvergence fails the row
                    rep = InequalityReport(float("inf"), rep.location, rep.tolerance, rep.metadata)
                run.add("convexity_lab", "derivative_at_zero_check", rep, alpha=alpha, phi=name,
                        ratio=d.ratio if d.ratio is not None else "roundoff")


def suite_heat(run: _Run):
    c = run.cfg
    dec = _decomposition(run)
    _require(0 <= c["source"] < dec.node_count, "source", "out of range")
    for alpha in c["alpha"]:
        for t in c["t"]:
            _require(t > 0, "t", "times must be positive")
            ker = heat.assemble_heat_kernel(dec, alpha, t, c["source"])
            rep = heat.kernel_positivity_mass_check(ker)
            run.add("heat_semigroup", "kernel_positivity_mass_check", rep,
                    manifold=c["manifold"], alpha=alpha, t=t, K=dec.K)
            if c["dump_kernel"]:
                io.write_kernel_csv(run.out / f"kernel_a{alpha:g}_t{t:g}.csv", ker, alpha, t, dec.K)
    times = np.linspace(0.0, max(c["t"]), 11)
    for i in range(c["fields"]):
        coef = np.zeros(dec.K)
        live = min(dec.K, 2 * c["band"] + 1)
        coef[1:live] = run.rng.standard_normal(live - 1)
        f = dec.synthesize(coef)
        f /= np.abs(f).max()
        for alpha in c["alpha"]:
            for m in c["m"]:
                rep = heat.heat_lp_monotonicity(dec, alpha, f, times, m).as_report()
                run.add("heat_semigroup", "heat_lp_monotonicity", rep,
                        manifold=c["manifold"], alpha=alpha, m=m, field=i)


def suite_subordinate(run: _Run):
    c = run.cfg
    dec = mf.build_spectrum(mf.ManifoldSpec.circle(c["N"]), c["N"])
    _require(c["cm_points"] >= 12, "cm_points", "needs at least 12 grid points")
    lam = np.linspace(0.0, c["cm_max"], c["cm_points"])
    for alpha in c["alpha"]:
        _require(0 < alpha < 2, "alpha", "subordination needs alpha in (0, 2)")
        meas = heat.stable_subordination_weights(alpha, c["t"], c["lam_max"], c["tolerance"],
                                                 c["max_nodes"])
        rep = InequalityReport(meas.residual, None, c["tolerance"],
                               {"check": "stable_subordination_weights"})
        run.add("heat_semigroup", "stable_subordination_weights", rep, alpha=alpha, t=c["t"],
                lam_max=c["lam_max"], nodes=meas.nodes.size)
        if c["dump_measure"]:
            io.write_measure_csv(run.out / f"measure_a{alpha:g}.csv", meas)
        if meas.residual <= 1e-6:
            rep = heat.subordinated_kernel_check(dec, alpha, c["t"], meas, c["source"])
        else:
            rep = InequalityReport(float("inf"), None, 1e-5,
                                   {"check": "subordinated_kernel_check", "note": "measure not converged"})
        run.add("heat_semigroup", "subordinated_kernel_check", rep, alpha=alpha, t=c["t"], N=c["N"])
        rep = heat.complete_monotonicity_check(alpha, c["t"], lam)
        run.add("heat_semigroup", "complete_monotonicity_check", rep, alpha=alpha, t=c["t"])


def rectangle_datum(x, y):
    """Fixed smooth boundary datum for the rectangle runs."""
    return np.exp(x) * np.cos(2 * y) + 0.3 * y


def suite_dn(run: _Run):
    c = run.cfg
    kind = c["domain"]
    _require(kind in ("disk", "halfplane", "rectangle"), "domain", "must be disk, halfplane or rectangle")
    for m in c["m"]:
        _require(m >= 1, "m", "must be positive integers")
    hopf_rows = []
    if kind == "rectangle":
        dom = dn.PlanarDomain.rectangle(c["N"])
        data = [dom.sample(rectangle_datum).values]
        if c["boundary_file"]:
            data = [io.read_boundary_csv(c["boundary_file"])]
    else:
        dom = dn.PlanarDomain.disk(c["N"]) if kind == "disk" else dn.PlanarDomain.halfplane(c["N"])
        _require(c["band"] < c["N"] // 2, "band", "must stay below N/2")
        if c["boundary_file"]:
            data = [io.read_boundary_csv(c["boundary_file"])]
        else:
            data = [cx.random_band_limited(c["N"], c["band"], run.rng, mean_zero=False)
                    for _ in range(c["fields"])]
        # D against the alpha = 1 torus multiplier and the manifold functional calculus
        grid = tr.TorusGrid(1, c["N"])
        dec = mf.build_spectrum(mf.ManifoldSpec.circle(c["N"]), c["N"])
        for i, f in enumerate(data):
            d = dn.dn_apply(dom, f).values
            e1 = float(np.abs(d - tr.apply_fractional_laplacian(grid.field(f), 1.0).values).max())
            e2 = float(np.abs(d - mf.apply_fractional_power(dec, 1.0, f)).max())
            rep = InequalityReport(max(e1, e2), None, 1e-10, {"check": "dn_apply"})
            run.add("dirichlet_neumann", "dn_apply", rep, domain=kind, N=c["N"], field=i,
                    compare="torus+manifold")
    for m in c["m"]:
        for i, f in enumerate(data):
            rep = dn.verify_power_inequality(dom, f, m)
            run.add("dirichlet_neumann", "verify_power_inequality", rep, domain=kind, N=c["N"],
                    m=m, field=i, excluded=len(rep.metadata["excluded"]))
            h = dn.hopf_mechanism_diagnostic(dom, f, m)
            hrep = h.as_report()
            run.add("dirichlet_neumann", "hopf_mechanism_diagnostic", hrep, domain=kind,
                    N=c["N"], m=m, field=i)
            hopf_rows.append({"run": i, "m": m, "max_w": h.max_w,
                              "min_normal_derivative": h.min_normal_derivative,
                              "min_laplacian": h.min_laplacian, "verdict": hrep.verdict})
    if kind == "rectangle" and not c["boundary_file"] and 2 * c["N"] - 1 <= 513:
        for m in c["m"]:
            study = dn.rectangle_refinement_study(rectangle_datum, m, c["N"])
            rep = InequalityReport(1.8 - study["ratio"], None, 0.0,
                                   {"check": "verify_power_inequality", **study})
            run.add("dirichlet_neumann", "verify_power_inequality", rep, domain=kind,
                    N=c["N"], m=m, study="refinement_ratio>=1.8")
    io.write_hopf_csv(run.out / "hopf.csv", hopf_rows)


def suite_transport(run: _Run):
    c = run.cfg
    _require(c["velocity"] in tp.VELOCITY_MODES, "velocity", f"must be one of {tp.VELOCITY_MODES}")
    _require(c["scheme"] in tp.SCHEMES, "scheme", f"must be one of {tp.SCHEMES}")
    grid = tr.TorusGrid(2, c["N"])
    if c["initial_file"]:
        theta0 = io.read_field_csv(c["initial_file"])
        _require(theta0.grid == grid, "initial_file", "grid does not match N")
    else:
        _require(c["band"] < c["N"] // 3, "band", "must stay below N/3 (dealiasing)")
        theta0 = grid.field(cx.random_band_limited(grid, c["band"], run.rng))
    cfg = tp.TransportConfig(grid, c["kappa"], c["alpha"], c["dt"], c["T"], c["velocity"], c["scheme"])
    traj = tp.simulate(theta0, cfg)
    norms = {}
    for p in c["p_list"]:
        mon = tp.lp_decay_report(traj, p, c["alpha"])
        norms[_fmt(p)] = mon.norms
        run.add("transport_sim", "lp_decay_report", mon.as_report(), p=p, alpha=c["alpha"],
                kappa=c["kappa"], velocity=c["velocity"], fitted_exponent=round(mon.fitted_exponent, 6))
        if np.isfinite(p) and int(p) == p and int(p) % 2 == 0:
            if (int(p) - 1) * tp.band_of(theta0.values, grid) <= grid.N // 2:
                rep = tp.dissipation_sign_check(theta0, c["alpha"], int(p))
                run.add("transport_sim", "dissipation_sign_check", rep, p=p, alpha=c["alpha"])
    means = traj.snapshots.reshape(len(traj), -1).mean(axis=1)
    rep = InequalityReport(float(np.abs(means - means[0]).max()), None, 1e-12,
                           {"check": "step", "property": "mean conservation"})
    run.add("transport_sim", "step", rep, property="mean_conservation", velocity=c["velocity"])
    if c["velocity"] == "sqg":
        div = max(tp.spectral_divergence(*tp.sqg_velocity(grid.field(s))) for s in traj.snapshots)
        rep = InequalityReport(div, None, 1e-12, {"check": "sqg_velocity"})
        run.add("transport_sim", "sqg_velocity", rep, property="spectral_divergence")
    if c["dump_trajectory"]:
        io.write_trajectory_csv(run.out / "trajectory.csv", traj.times, norms)


def suite_spectrum(run: _Run):
    c = run.cfg
    dec = _decomposition(run)
    for k in c["bochner_modes"]:
        _require(0 <= k < dec.K, "bochner_modes", f"mode {k} out of range")
        rep = mf.bochner_square_check(dec, k)
        run.add("manifold_spectrum", "bochner_square_check", rep, manifold=c["manifold"], k=k, K=dec.K)
    if c["supnorm"]:
        dim = dec.spec.dimension
        _require(dim is not None, "supnorm", "needs a manifold with known dimension")
        rows = mf.supnorm_growth_report(dec, dim)
        run.add("manifold_spectrum", "supnorm_growth_report", mf.supnorm_growth_check(rows),
                manifold=c["manifold"], K=dec.K)
    if c["torus_checks"]:
        for n in c["torus_n"]:
            _require(n in (1, 2), "torus_n", "dimensions are 1 or 2")
            for alpha in c["torus_alpha"]:
                _require(0 < alpha < 2, "torus_alpha", "must lie in (0, 2)")
                cf = tr.closed_form_constant(n, alpha)
                cal = tr.calibrate_constant(n, alpha)
                rel = abs(cal - cf) / cf
                rep = InequalityReport(rel, None, tr.CALIBRATION_RTOL, {"check": "normalization_constant"})
                run.add("spectral_torus", "normalization_constant", rep, n=n, alpha=alpha)
                errs = []
                for N in ((64, 128) if n == 1 else (32, 64)):
                    grid = tr.TorusGrid(n, N)
                    f = grid.sample(lambda *x: np.cos(x[0]))
                    si = tr.singular_integral_laplacian(f, tr.SingularKernel(alpha, n, cf))
                    errs.append(float(np.abs(si.values - f.values).max()))
                rep = InequalityReport(errs[1] - errs[0], None, 0.0,
                                       {"check": "singular_integral_laplacian", "errors": errs})
                run.add("spectral_torus", "singular_integral_laplacian", rep, n=n, alpha=alpha,
                        property="refinement_reduces_error")


SUITES = {"verify-ineq": suite_verify, "heat-kernel": suite_heat, "subordinate": suite_subordinate,
          "dn": suite_dn, "transport": suite_transport, "spectrum": suite_spectrum}


def run_scenario(subcommand: str, config: dict, out_dir) -> ReportBundle:
    """Run one suite with a parsed config; write ledger and summary."""
    if config.get("seed") is None:
        raise ParameterError("seed", "a seed is required (config key 'seed' or --seed)")
    _require(0 <= config["seed"] < 2**64, "seed", "must be an unsigned 64-bit integer")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(config, out)
    SUITES[subcommand](run)
    ledger_path, summary_path = out / "ledger.csv", out / "summary.json"
    run.ledger.write(ledger_path)
    code = EXIT_OK if run.ledger.all_passed else EXIT_VIOLATION
    run.ledger.write_summary(summary_path, {"subcommand": subcommand, "exit_code": code,
                                            "seed": config["seed"]})
    return ReportBundle(ledger_path, summary_path, run.ledger.rows, code)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraclab", description="Numerical checks of pointwise fractional-Laplacian inequalities.",
        epilog=HELP_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        keys = ", ".join(sorted(schema))
        p = sub.add_parser(name, epilog=f"config keys: {keys}\n\n" + HELP_EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--out", default="fraclab-out", help="output directory")
        p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = io.parse_config(text, SCHEMAS[args.subcommand])
        if args.seed is not None:
            cfg["seed"] = args.seed
        bundle = run_scenario(args.subcommand, cfg, args.out)
    except (io.ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: parameter out of range: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    passed = sum(r["verdict"] == "pass" for r in bundle.rows)
    print(f"{args.subcommand}: {passed}/{len(bundle.rows)} checks passed; ledger {bundle.ledger_path}")
    return bundle.exit_code


if __name__ == "__main__":
    sys.exit(main())
