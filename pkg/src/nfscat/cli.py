"""Command-line front end.

    nfscat <subcommand> --config cfg.json --out outdir
           [--jobs N] [--seed S] [--strict]

Subcommands: generate-potential, forward, identity-check, faddeev-born,
buckhgeim-recon, exterior-check, stability-sweep. Each run writes its
CSV/JSON/SVG artifacts plus ``manifest.json`` (tool version, config
hash, timestamps, per-case status, file inventory, gate results).

Exit codes: 0 all gates pass; 1 gate failure or solver error; 2 config
parse error. ``--strict`` escalates soft warnings (below-noise data,
skipped cases) to failures.

Determinism: CSV bytes are a pure function of the config hash (floats
serialized with shortest round-trip repr; fixed row order).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, buckhgeim, exterior, faddeev, forward, harness, plots
from . import potentials as pot_families
from .errors import DomainError

SUBCOMMANDS = (
    "generate-potential",
    "forward",
    "identity-check",
    "faddeev-born",
    "buckhgeim-recon",
    "exterior-check",
    "stability-sweep",
)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(_canonical(cfg).encode()).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


class Run:
    """Output directory, manifest accumulation, gate bookkeeping."""

    def __init__(self, cfg: dict, out: Path, args):
        self.cfg = cfg
        self.out = out
        self.args = args
        out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.cases: list[dict] = []
        self.gates: dict[str, bool] = {}
        self.warnings: list[str] = []
        self.extra: dict = {}

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def gate(self, name: str, ok: bool) -> None:
        self.gates[name] = bool(ok)

    def finish(self, subcommand: str) -> int:
        manifest = {
            "tool": f"nfscat {__version__}",
            "subcommand": subcommand,
            "config_hash": config_hash(self.cfg),
            "config": self.cfg,
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "seed": self.args.seed,
            "jobs": self.args.jobs,
            "cases": self.cases,
            "files": sorted(set(self.files)),
            "gates": self.gates,
            "warnings": self.warnings,
            **self.extra,
        }
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, default=str)
        failed = [k for k, ok in self.gates.items() if not ok]
        for k, ok in sorted(self.gates.items()):
            print(f"gate {k}: {'PASS' if ok else 'FAIL'}")
        for w in self.warnings:
            print(f"warning: {w}")
        if failed:
            return 1
        if self.args.strict and self.warnings:
            return 1
        return 0


def _potential_from(cfg: dict, key: str, d, r1, r, n) -> forward.GridPotential:
    desc = cfg.get(key)
    if isinstance(desc, str):
        return forward.load_potential(desc)
    if desc is None:
        raise DomainError(f"config is missing {key!r}")
    return pot_families.make_family(desc, d, r1, r, n)


def _geometry(cfg: dict):
    d = int(cfg.get("dimension", 2))
    r1 = float(cfg.get("r1", 0.7))
    r = float(cfg.get("r", 1.0))
    n = int(cfg.get("grid_n", 48 if d == 2 else 12))
    mesh_params = tuple(cfg.get("mesh", (128,) if d == 2 else (16, 32)))
    mesh = (
        forward.circle_mesh(r, *mesh_params)
        if d == 2
        else forward.sphere_mesh(r, *mesh_params)
    )
    return d, r1, r, n, mesh


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------
def run_generate_potential(cfg: dict, run: Run) -> None:
    d, r1, r, n, _ = _geometry(cfg)
    pot = _potential_from(cfg, "potential", d, r1, r, n)
    name = cfg.get("output", "potential.pot")
    forward.save_potential(run.path(name), pot)
    run.cases.append({"case": "generate", "status": "ok", "sup": pot.sup_norm()})
    run.gate("potential-written", True)


def run_forward(cfg: dict, run: Run) -> None:
    d, r1, r, n, mesh = _geometry(cfg)
    energy = float(cfg.get("energy", 2.0))
    pot = _potential_from(cfg, "potential", d, r1, r, n)
    nf = forward.near_field_data(pot, energy, mesh)
    forward.save_near_field(run.path(cfg.get("output", "nearfield.nfd")), nf)
    rec = nf.reciprocity_defect()
    write_csv(
        run.path("forward_summary.csv"),
        ["energy", "nodes", "hs_norm", "reciprocity_defect", "max_abs"],
        [[energy, mesh.n_nodes, nf.hs_norm(), rec, float(np.max(np.abs(nf.values)))]],
    )
    run.cases.append({"case": f"E{energy:g}", "status": "ok"})
    run.gate("reciprocity", rec <= 1e-6)


def run_identity_check(cfg: dict, run: Run) -> None:
    d, r1, r, n, mesh = _geometry(cfg)
    if d != 2:
        raise DomainError("identity-check is configured for dimension 2")
    energy = float(cfg.get("energy", 2.0))
    v1 = _potential_from(cfg, "potential_1", d, r1, r, n)
    v2 = _potential_from(cfg, "potential_2", d, r1, r, n)
    sol1 = forward.ForwardSolver(v1, energy)
    sol2 = forward.ForwardSolver(v2, energy)
    s1, s2 = sol1.near_field(mesh), sol2.near_field(mesh)
    angles = cfg.get("probe_angles_deg", [0.0, 60.0])
    rows = []
    worst = 0.0
    for i, a1 in enumerate(angles):
        for a2 in angles[i:]:
            t1, t2 = np.deg2rad(a1), np.deg2rad(a2)
            phi1 = harness.build_phi(
                v1, sol1.total_plane_wave([np.cos(t1), np.sin(t1)]), energy,
                mesh, residual_tol=None,
            )
            phi2 = harness.build_phi(
                v2, sol2.total_plane_wave([np.cos(t2), np.sin(t2)]), energy,
                mesh, residual_tol=None,
            )
            res = harness.alessandrini_check(v1, v2, phi1, phi2, s1, s2)
            worst = max(worst, res.rel_err)
            rows.append([a1, a2, res.lhs.real, res.lhs.imag,
                         res.rhs.real, res.rhs.imag, res.rel_err])
    write_csv(
        run.path("identity.csv"),
        ["angle1", "angle2", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "rel_err"],
        rows,
    )
    run.cases.append({"case": "identity", "status": "ok", "worst": worst})
    run.gate("identity-relerr", worst <= float(cfg.get("tolerance", 2e-2)))


def run_faddeev_born(cfg: dict, run: Run) -> None:
    d, r1, r, n, _ = _geometry({**cfg, "dimension": 3})
    energy = float(cfg.get("energy", 1.0))
    pot = _potential_from(cfg, "potential", 3, r1, r, n)
    p_list = cfg.get("p_list", [[0.5, 0, 0], [0.0, 1.0, 0.3], [0.8, 0.4, 0.0]])
    rho_list = cfg.get("rho_ladder", [4.0, 6.0, 9.0, 13.0, 20.0, 28.0, 40.0])
    rows = []
    slopes = []
    for p in p_list:
        hat = faddeev.potential_fourier(pot, np.asarray(p, dtype=float))
        gaps, xs = [], []
        for rho in rho_list:
            pair = faddeev.momentum_pair(energy, p, float(rho))
            h_amp = faddeev.scattering_amplitude(pot, pair, mode="series")
            gap = abs(hat - h_amp)
            rows.append([_canonical(p), rho, np.sqrt(energy + rho * rho), gap])
            gaps.append(gap)
            xs.append(np.sqrt(energy + rho * rho))
        slope = float(np.polyfit(np.log(xs), np.log(gaps), 1)[0])
        slopes.append(slope)
    write_csv(
        run.path("born_rate.csv"),
        ["p", "rho", "sqrt_E_rho2", "fourier_gap"],
        rows,
    )
    plots.rate_fit(
        run.out / "born_rate.csv", run.path("born_rate.svg"),
        "sqrt_E_rho2", "fourier_gap", "sqrt(E + rho^2)", "|vhat - h|",
    )
    run.extra["slopes"] = slopes
    run.cases.append({"case": "born-rate", "status": "ok", "slopes": slopes})
    # gates: the limit property (gap -> 0) and the inverse-sqrt envelope with
    # the constant fitted at the smallest rho; the fitted slope is reported.
    by_p = {}
    for row in rows:
        by_p.setdefault(row[0], []).append((row[2], row[3]))
    ok_limit = True
    ok_env = True
    for seq in by_p.values():
        seq.sort()
        xs = [s for s, _ in seq]
        gs = [g for _, g in seq]
        ok_limit &= gs[-1] < gs[0]
        c_fit = gs[0] * xs[0]
        ok_env &= all(g <= c_fit / x * (1 + 1e-9) for x, g in seq)
    run.gate("born-gap-decreasing", ok_limit)
    run.gate("born-gap-envelope", ok_env)


def run_buckhgeim_recon(cfg: dict, run: Run) -> None:
    d, r1, r, n, _ = _geometry(cfg)
    if d != 2:
        raise DomainError("buckhgeim-recon is configured for dimension 2")
    v1 = _potential_from(cfg, "potential_1", d, r1, r, n)
    v2 = _potential_from(cfg, "potential_2", d, r1, r, n)
    lam_ladder = [float(x) for x in cfg.get("lambda_ladder", [8, 16, 32, 64])]
    centers_cfg = cfg.get("centers")
    if centers_cfg is None:
        cc = v1.axis_coords()
        mid = len(cc) // 2
        step = max(1, n // 10)
        idx = [mid, mid + step, mid - step]
        centers = [complex(cc[i], cc[j]) for i in idx for j in idx]
    else:
        centers = [complex(a, b) for a, b in centers_cfg]
    rows = []
    sup_errs = []
    vdiff = v2.values - v1.values
    cc = v1.axis_coords()

    def nearest(z0):
        i = int(np.argmin(np.abs(cc - z0.real)))
        j = int(np.argmin(np.abs(cc - z0.imag)))
        return float(vdiff[i, j])

    for lam in lam_ladder:
        rec = buckhgeim.reconstruct_diff(v1, v2, centers, lam)
        errs = [abs(rec.values[i] - nearest(z)) for i, z in enumerate(centers)]
        sup_errs.append(max(errs))
        for i, z in enumerate(centers):
            rows.append([lam, z.real, z.imag, rec.values[i],
                         rec.imag_residue[i], nearest(z), errs[i]])
    write_csv(
        run.path("reconstruction.csv"),
        ["lam", "z0_re", "z0_im", "estimate", "imag_residue", "reference", "error"],
        rows,
    )
    plots.recon_heatmap(run.out / "reconstruction.csv", run.path("recon_map.svg"))
    monotone = all(a > b for a, b in zip(sup_errs, sup_errs[1:]))
    run.cases.append(
        {"case": "recon-ladder", "status": "ok", "sup_errs": sup_errs}
    )
    run.extra["sup_errs"] = sup_errs
    run.gate("recon-monotone", monotone)


def run_exterior_check(cfg: dict, run: Run) -> None:
    energies = [float(x) for x in cfg.get("energies", [0.01, 0.1, 1.0, 10.0, 100.0])]
    max_degree = int(cfg.get("max_degree", 32))
    r = float(cfg.get("r", 1.0))
    rows = []
    c7 = 0.0
    bound_ok = True
    for d in (2, 3):
        for energy in energies:
            mult = exterior.dtn_multipliers(d, energy, r, max_degree)
            worst, c7_here = exterior.verify_dtn_bound(
                d, energy, r, max_degree, seed=run.args.seed or 0
            )
            c7 = max(c7, c7_here)
            for j in range(1, max_degree + 1):
                bound = j + d - 2 + 2 * energy
                ok = abs(mult[j]) <= bound * (1 + 1e-9)
                bound_ok &= ok
                rows.append([d, energy, j, abs(mult[j]), bound, worst, c7_here])
    write_csv(
        run.path("exterior.csv"),
        ["d", "energy", "degree", "abs_multiplier", "degree_bound",
         "worst_random_ratio", "empirical_constant"],
        rows,
    )
    run.extra["empirical_constant"] = c7
    run.cases.append({"case": "exterior", "status": "ok", "c7": c7})
    run.gate("degree-bound", bound_ok)
    run.gate("single-constant", c7 <= 5.0)


def run_stability_sweep(cfg: dict, run: Run) -> None:
    d, r1, r, n, _ = _geometry(cfg)
    sweep_cfg = harness.SweepConfig(
        d=d, r1=r1, r=r, grid_n=n,
        mesh_params=tuple(cfg.get("mesh", (128,) if d == 2 else (16, 32))),
        energies=tuple(float(x) for x in cfg.get("energies", [2.0])),
        base=cfg.get("base", {"family": "gaussian", "amplitude": 1.0}),
        perturbation=cfg.get(
            "perturbation", {"family": "poly", "amplitude": 1.0, "q": 3.0}
        ),
        amplitudes=tuple(float(x) for x in cfg.get("amplitudes", [0.02, 0.05, 0.1, 0.2])),
        tau=float(cfg.get("tau", 0.5)),
        eps=float(cfg.get("epsilon", 0.5)),
    )
    jobs = max(1, run.args.jobs)
    if jobs > 1 and len(sweep_cfg.energies) > 1:
        def one(energy):
            sub = harness.SweepConfig(**{**sweep_cfg.__dict__, "energies": (energy,)})
            return harness.stability_sweep(sub)

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(one, sweep_cfg.energies))
        records = [rec for part in parts for rec in part["records"]]
        fits = {k: v for part in parts for k, v in part["fits"].items()}
        result = {"records": records, "fits": fits}
    else:
        result = harness.stability_sweep(sweep_cfg)
    records = sorted(result["records"], key=lambda rec: rec.case)
    write_csv(
        run.path("stability.csv"),
        list(harness.StabilityRecord.FIELDS),
        [rec.row() for rec in records],
    )
    with open(run.path("envelope_fits.json"), "w") as fh:
        json.dump(result["fits"], fh, indent=2, sort_keys=True)
    plots.stability_curve(run.out / "stability.csv", run.path("stability.svg"))
    errors = [rec for rec in records if rec.status != "ok"]
    for rec in errors:
        run.warnings.append(f"case {rec.case}: {rec.note}")
    run.cases.extend(
        {"case": rec.case, "status": rec.status} for rec in records
    )
    ok_rows = [rec for rec in records if rec.status == "ok"]
    run.gate("envelope", all(rec.envelope_ok for rec in ok_rows) and bool(ok_rows))


HANDLERS = {
    "generate-potential": run_generate_potential,
    "forward": run_forward,
    "identity-check": run_identity_check,
    "faddeev-born": run_faddeev_born,
    "buckhgeim-recon": run_buckhgeim_recon,
    "exterior-check": run_exterior_check,
    "stability-sweep": run_stability_sweep,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nfscat", description="near-field scattering laboratory"
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--strict", action="store_true",
        help="escalate soft warnings to failures",
    )
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ValueError("config must be a JSON object")
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    run = Run(cfg, Path(args.out), args)
    try:
        HANDLERS[args.subcommand](cfg, run)
    except Exception as exc:  # noqa: BLE001 - report and preserve diagnostics
        run.cases.append({"case": "run", "status": "error", "message": str(exc)})
        run.gate("completed", False)
        run.finish(args.subcommand)
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    return run.finish(args.subcommand)


if __name__ == "__main__":
    sys.exit(main())
