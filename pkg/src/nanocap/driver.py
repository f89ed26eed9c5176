"""Width sweeps, the interaction phase scan, and the command line.

Every number that reaches a CSV file is quantized to 12 significant
digits at record construction, so the in-memory rows, the emitted text
and a re-parsed file are exactly the same data.  Header metadata lists
every control parameter and nothing volatile: the same configuration
always produces a byte-identical file.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import io
import logging
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from nanocap.lattice import build_ribbon, ribbon_width
from nanocap.model import ModelParams, ramp_potential
from nanocap.oracles import (
    ed_ground_energy,
    lr_capacitance,
    quantum_capacitance,
    tube_gap,
)
from nanocap.response import capacitance_fd, classify_phase
from nanocap.scf import ScfControls, ScfError, ground_state

logger = logging.getLogger("nanocap.driver")

CSV_COLUMNS = ("material", "L", "N", "width_angstrom", "U_over_t", "V_over_t",
               "seed_won", "staggered_m", "dipole_eA", "gap_t", "q_edge0_e",
               "C_e2_per_t", "C_aF", "invC_t_per_e2", "linearity_dev",
               "iterations", "converged")

MATERIALS = ("C", "BN", "BCN")

MEAN_FIELD_SCHEME = "neutral-background Hartree"


def _q12(x: float) -> float:
    """Quantize to 12 significant digits; the CSV round-trip identity."""
    return float(f"{x:.12g}")


@dataclass(frozen=True)
class SweepConfig:
    material: str
    length: int
    n_rows: tuple[int, ...]
    u: float = 0.0
    v: float = 0.0
    delta_v: float = 0.01
    t_ev: float = 2.7
    controls: ScfControls = ScfControls()
    out_path: str | None = None
    verify: bool = False
    jobs: int | None = None

    def __post_init__(self):
        if self.material not in MATERIALS:
            raise ValueError(f"material must be one of {MATERIALS}, "
                             f"got {self.material!r}")
        if self.length < 4 or self.length % 2:
            raise ValueError(f"length must be even and at least 4, "
                             f"got {self.length}")
        rows = tuple(int(n) for n in self.n_rows)
        if not rows:
            raise ValueError("n_rows must be a nonempty ascending list")
        if any(b <= a for a, b in zip(rows, rows[1:])):
            raise ValueError(f"n_rows must be strictly ascending, got {rows}")
        if any(n < 2 for n in rows):
            raise ValueError("every width must have at least 2 rows")
        object.__setattr__(self, "n_rows", rows)
        if self.delta_v == 0.0 or not math.isfinite(self.delta_v):
            raise ValueError(f"delta_v must be nonzero, got {self.delta_v}")
        if self.jobs is not None and self.jobs < 1:
            raise ValueError(f"jobs must be positive, got {self.jobs}")


@dataclass(frozen=True)
class SweepRow:
    """One width point; all floats pre-quantized to 12 significant digits."""

    material: str
    length: int
    n_rows: int
    width_angstrom: float
    u: float
    v: float
    seed_won: str
    staggered_m: float
    dipole_ea: float
    gap_t: float
    q_edge0: float
    c_natural: float
    c_si: float
    inv_c_natural: float
    linearity_dev: float
    iterations: int
    converged: bool


def _make_row(config: SweepConfig, n: int, record) -> SweepRow:
    c = _q12(record.c_natural)
    # both factors live on the 12-digit grid, so the product can miss 1
    # by up to a half-ulp of the coarser operand, about 5e-12 relative
    inv_c = _q12(1.0 / c) if c > 0.0 else math.inf
    return SweepRow(
        material=config.material,
        length=config.length,
        n_rows=n,
        width_angstrom=_q12(record.width_angstrom),
        u=_q12(config.u),
        v=_q12(config.v),
        seed_won=record.seed_won,
        staggered_m=_q12(record.staggered_m),
        dipole_ea=_q12(record.dipole_zero_field),
        gap_t=_q12(record.homo_lumo_gap),
        q_edge0=_q12(record.q_edge_zero_field),
        c_natural=c,
        c_si=_q12(record.c_si),
        inv_c_natural=inv_c,
        linearity_dev=_q12(record.linearity_dev),
        iterations=record.iterations_total,
        converged=record.converged,
    )


def _failed_row(config: SweepConfig, n: int) -> SweepRow:
    nan = math.nan
    return SweepRow(material=config.material, length=config.length, n_rows=n,
                    width_angstrom=_q12(ribbon_width(n)), u=_q12(config.u),
                    v=_q12(config.v), seed_won="", staggered_m=nan,
                    dipole_ea=nan, gap_t=nan, q_edge0=nan, c_natural=nan,
                    c_si=nan, inv_c_natural=nan, linearity_dev=nan,
                    iterations=0, converged=False)


def _sweep_one(args: tuple[SweepConfig, int]) -> SweepRow:
    config, n = args
    lattice = build_ribbon(config.material, n, config.length)
    params = ModelParams(u=config.u, v=config.v, t_ev=config.t_ev)
    try:
        record = capacitance_fd(lattice, params, config.delta_v,
                                config.controls)
    except ScfError as exc:
        logger.warning("width point N=%d failed: %s", n, exc)
        return _failed_row(config, n)
    return _make_row(config, n, record)


def _pool_size(config: SweepConfig) -> int:
    env = os.environ.get("NANOCAP_THREADS")
    if env:
        size = int(env)
        if size < 1:
            raise ValueError(f"NANOCAP_THREADS must be positive, got {env}")
        return size
    if config.jobs is not None:
        return config.jobs
    return os.cpu_count() or 1


def run_sweep(config: SweepConfig) -> list[SweepRow]:
    """One capacitance row per ribbon width, in ascending width order.

    Width points are independent and fan out to a process pool unless the
    resolved worker count is 1.  A point whose SCF fails end to end yields
    a converged=False row instead of aborting the sweep.  When the config
    names an output path the rows are also written there as CSV.
    """
    work = [(config, n) for n in config.n_rows]
    size = _pool_size(config)
    if size == 1 or len(work) == 1:
        rows = [_sweep_one(item) for item in work]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=size) as pool:
            rows = list(pool.map(_sweep_one, work))
    rows.sort(key=lambda r: r.n_rows)
    if config.out_path:
        with open(config.out_path, "w", encoding="utf-8") as fh:
            fh.write(sweep_csv(config, rows))
    return rows


def sweep_csv(config: SweepConfig, rows: list[SweepRow]) -> str:
    """Render rows with a '#' metadata header; no volatile content."""
    ctl = config.controls
    buf = io.StringIO()
    buf.write("# nanocap width sweep\n")
    buf.write(f"# material={config.material} length={config.length} "
              f"u_over_t={config.u:.12g} v_over_t={config.v:.12g}\n")
    buf.write(f"# delta_v={config.delta_v:.12g} t_ev={config.t_ev:.12g} "
              f"n_rows={','.join(str(n) for n in config.n_rows)}\n")
    buf.write(f"# scf: tol={ctl.tol:.12g} max_iter={ctl.max_iter} "
              f"mixing={ctl.mixing:.12g} degeneracy_tol={ctl.degeneracy_tol:.12g} "
              f"seed_amplitude={ctl.seed_amplitude:.12g}\n")
    buf.write(f"# scheme: {MEAN_FIELD_SCHEME} mean field; half filling; "
              f"seeds=PARA,SP,CP; electrodes=full outer lines\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join((
            r.material, str(r.length), str(r.n_rows),
            f"{r.width_angstrom:.12g}", f"{r.u:.12g}", f"{r.v:.12g}",
            r.seed_won, f"{r.staggered_m:.12g}", f"{r.dipole_ea:.12g}",
            f"{r.gap_t:.12g}", f"{r.q_edge0:.12g}", f"{r.c_natural:.12g}",
            f"{r.c_si:.12g}", f"{r.inv_c_natural:.12g}",
            f"{r.linearity_dev:.12g}", str(r.iterations), str(r.converged),
        )) + "\n")
    return buf.getvalue()


def parse_sweep_csv(text: str) -> list[SweepRow]:
    """Inverse of sweep_csv for the data rows; header comments are skipped."""
    rows = []
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ValueError("unrecognized sweep CSV header")
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(f"malformed row: {ln!r}")
        rows.append(SweepRow(
            material=parts[0], length=int(parts[1]), n_rows=int(parts[2]),
            width_angstrom=float(parts[3]), u=float(parts[4]),
            v=float(parts[5]), seed_won=parts[6], staggered_m=float(parts[7]),
            dipole_ea=float(parts[8]), gap_t=float(parts[9]),
            q_edge0=float(parts[10]), c_natural=float(parts[11]),
            c_si=float(parts[12]), inv_c_natural=float(parts[13]),
            linearity_dev=float(parts[14]), iterations=int(parts[15]),
            converged=parts[16] == "True"))
    return rows


# ---------------------------------------------------------------------------
# interaction phase scan


@dataclass(frozen=True)
class PhaseScanPoint:
    v: float
    phase: str
    energy: float
    staggered_m: float
    dipole: float
    seed_won: str


@dataclass(frozen=True)
class PhaseScanResult:
    """Ordered scan of the neighbour repulsion at fixed on-site repulsion.

    ``v_star`` is the first scanned V whose winner is charge-ordered while
    the previous point was spin-ordered; ``found`` is False (and the note
    says so) when no such handover happens in range.  ``dipole_jump`` is
    the order-parameter step across the handover and ``within_phase_drift``
    the largest step between same-phase neighbours, so jump/drift measures
    how discontinuous the transition is.
    """

    u: float
    points: tuple[PhaseScanPoint, ...]
    found: bool
    v_star: float | None
    dipole_jump: float
    within_phase_drift: float
    first_order: bool
    note: str


def phase_scan(lattice, u: float, v_range, controls: ScfControls = ScfControls()
               ) -> PhaseScanResult:
    """Ground-state winner at each V of an ascending scan."""
    v_list = [float(v) for v in v_range]
    if any(b <= a for a, b in zip(v_list, v_list[1:])) or not v_list:
        raise ValueError("v_range must be nonempty and ascending")
    points = []
    for v in v_list:
        sol = ground_state(lattice, ModelParams(u=u, v=v), None, controls)
        points.append(PhaseScanPoint(
            v=v, phase=classify_phase(sol), energy=sol.total_energy,
            staggered_m=sol.staggered_m, dipole=sol.dipole,
            seed_won=sol.seed_kind.value))
    v_star, jump = None, 0.0
    for prev, here in zip(points, points[1:]):
        if prev.phase == "SP" and here.phase == "CP":
            v_star = here.v
            jump = abs(abs(here.dipole) - abs(prev.dipole))
            break
    drift = 0.0
    for prev, here in zip(points, points[1:]):
        if prev.phase == here.phase:
            drift = max(drift, abs(abs(here.dipole) - abs(prev.dipole)))
    found = v_star is not None
    return PhaseScanResult(
        u=u, points=tuple(points), found=found, v_star=v_star,
        dipole_jump=jump, within_phase_drift=drift,
        first_order=found and jump > 0.01,
        note="" if found else "spin-to-charge transition not found in range")


# ---------------------------------------------------------------------------
# command line


class _Parser(argparse.ArgumentParser):
    """Usage problems exit with status 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_widths(text: str) -> tuple[int, ...]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(","))


def _add_scf_flags(sub):
    sub.add_argument("--tol", type=float, default=1e-8)
    sub.add_argument("--max-iter", type=int, default=5000)
    sub.add_argument("--mixing", type=float, default=0.3)


def _controls(args) -> ScfControls:
    return ScfControls(tol=args.tol, max_iter=args.max_iter,
                       mixing=args.mixing)


def _build_parser() -> _Parser:
    parser = _Parser(prog="nanocap",
                     description="capacitance of zigzag nanoribbons")
    subs = parser.add_subparsers(dest="command", required=True)

    sweep = subs.add_parser("sweep", help="capacitance vs ribbon width")
    sweep.add_argument("--material", choices=["c", "bn", "bcn"], required=True)
    sweep.add_argument("--length", type=int, default=20)
    sweep.add_argument("--widths", type=_parse_widths, default=None,
                       help="N1..N2 range or comma list (default 3..28)",
                       metavar="N1..N2")
    sweep.add_argument("--u", type=float, default=0.0)
    sweep.add_argument("--v", type=float, default=0.0)
    sweep.add_argument("--delta-v", type=float, default=0.01)
    sweep.add_argument("--t-ev", type=float, default=2.7)
    sweep.add_argument("--out", default=None)
    sweep.add_argument("--jobs", type=int, default=None)
    sweep.add_argument("--verify", action="store_true",
                       help="cross-check noninteracting rows against the "
                            "perturbative oracle")
    sweep.add_argument("--strict", action="store_true",
                       help="fail when any width point does not converge")
    _add_scf_flags(sweep)

    scan = subs.add_parser("phase-scan", help="spin/charge order vs V")
    scan.add_argument("--u", type=float, default=1.0)
    scan.add_argument("--v-start", type=float, default=0.0)
    scan.add_argument("--v-stop", type=float, default=1.0)
    scan.add_argument("--v-step", type=float, default=0.05)
    scan.add_argument("--n-rows", type=int, default=6)
    scan.add_argument("--length", type=int, default=20)
    _add_scf_flags(scan)

    tube = subs.add_parser("tube-gap", help="zigzag tube band gap")
    tube.add_argument("--m", type=int, required=True)

    qcap = subs.add_parser("quantum-cap", help="quantum capacitance per um")
    qcap.add_argument("--vf", type=float, required=True)

    subs.add_parser("ed-check", help="exact-diagonalization bound suite")
    return parser


def _cmd_sweep(args) -> int:
    widths = args.widths if args.widths is not None else tuple(range(3, 29))
    config = SweepConfig(material=args.material.upper(), length=args.length,
                         n_rows=widths, u=args.u, v=args.v,
                         delta_v=args.delta_v, t_ev=args.t_ev,
                         controls=_controls(args), out_path=args.out,
                         verify=args.verify, jobs=args.jobs)
    rows = run_sweep(config)
    if not config.out_path:
        sys.stdout.write(sweep_csv(config, rows))
    else:
        print(f"wrote {len(rows)} rows to {config.out_path}")
    if args.strict and any(not r.converged for r in rows):
        bad = [r.n_rows for r in rows if not r.converged]
        print(f"strict mode: unconverged width points {bad}", file=sys.stderr)
        return 3
    if args.verify:
        return _verify_rows(config, rows)
    return 0


def _verify_rows(config: SweepConfig, rows: list[SweepRow]) -> int:
    if config.u != 0.0 or config.v != 0.0:
        print("verify: no noninteracting rows in this sweep; nothing to check")
        return 0
    worst = 0.0
    for row in rows:
        if not row.converged:
            continue
        lattice = build_ribbon(config.material, row.n_rows, config.length)
        oracle = lr_capacitance(lattice, ramp_potential(lattice, config.delta_v))
        if oracle.c_natural == 0.0 and row.c_natural == 0.0:
            continue
        scale = max(abs(oracle.c_natural), abs(row.c_natural))
        rel = abs(oracle.c_natural - row.c_natural) / scale
        worst = max(worst, rel)
        if rel > 0.01:
            print(f"verify FAILED at N={row.n_rows}: sweep {row.c_natural} "
                  f"vs oracle {oracle.c_natural} ({rel:.2%} apart)",
                  file=sys.stderr)
            return 2
    print(f"verify: all rows within 1% of the perturbative oracle "
          f"(worst {worst:.2%})")
    return 0


def _cmd_phase_scan(args) -> int:
    lattice = build_ribbon("C", args.n_rows, args.length)
    n_steps = int(round((args.v_stop - args.v_start) / args.v_step))
    v_range = [args.v_start + k * args.v_step for k in range(n_steps + 1)]
    result = phase_scan(lattice, args.u, v_range, _controls(args))
    print("v_over_t,phase,energy_t,staggered_m,dipole_eA,seed_won")
    for p in result.points:
        print(f"{p.v:.12g},{p.phase},{p.energy:.12g},{p.staggered_m:.12g},"
              f"{p.dipole:.12g},{p.seed_won}")
    if result.found:
        kind = "first-order" if result.first_order else "continuous"
        print(f"transition at v_star={result.v_star:.12g} "
              f"(dipole jump {result.dipole_jump:.6g}, {kind})")
    else:
        print(result.note)
    return 0


def _cmd_ed_check(args) -> int:
    lattice = build_ribbon("C", 2, 4)
    h0 = np.zeros((8, 8))
    for i, j in lattice.bonds:
        h0[i, j] = h0[j, i] = -1.0
    eps = np.linalg.eigvalsh(h0)
    band = 2.0 * float(np.sort(eps)[:4].sum())
    free = ed_ground_energy(lattice, ModelParams())
    ok = abs(free - band) < 1e-9
    print(f"free fermions: exact {free:.9f} vs band sum {band:.9f} "
          f"{'OK' if ok else 'MISMATCH'}")
    for u, v in ((1.0, 0.0), (0.0, 0.5), (1.0, 0.5)):
        params = ModelParams(u=u, v=v)
        exact = ed_ground_energy(lattice, params)
        sol = ground_state(lattice, params, None)
        bound = sol.total_energy >= exact - 1e-9
        ok = ok and bound
        print(f"(u,v)=({u:g},{v:g}): exact {exact:.6f}  mean-field "
              f"{sol.total_energy:.6f}  bound {'OK' if bound else 'VIOLATED'}"
              f"  gap {sol.total_energy - exact:.4f}")
    return 0 if ok else 2


def cli(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "phase-scan":
            return _cmd_phase_scan(args)
        if args.command == "tube-gap":
            gap = tube_gap(args.m)
            kind = "metallic" if gap < 1e-6 else "semiconducting"
            print(f"({args.m},0) tube: gap {gap:.9g} t ({kind})")
            return 0
        if args.command == "quantum-cap":
            print(f"{quantum_capacitance(args.vf):.6g} aF/um")
            return 0
        if args.command == "ed-check":
            return _cmd_ed_check(args)
        raise AssertionError("unreachable")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raise SystemExit(cli())
    except ScfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(3)


if __name__ == "__main__":
    main()
