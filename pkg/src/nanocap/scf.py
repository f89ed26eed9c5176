"""Self-consistent solution of the Hartree mean-field equations.

Three fixed seeds (paramagnetic, staggered-spin, edge-charge) are iterated
with plain linear density mixing; the ground state is the converged solution
of lowest total energy.  Degenerate orbitals straddling the Fermi level get
equal fractional occupation so iterates are deterministic and the electron
count is exact at zero temperature.
"""
from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from nanocap.lattice import RibbonLattice
from nanocap.model import AppliedField, MeanFieldHamiltonian, ModelParams, total_energy

__all__ = [
    "SeedKind",
    "ScfControls",
    "MeanFieldState",
    "ScfSolution",
    "ScfError",
    "EigensolverError",
    "ScfConvergenceError",
    "fermi_occupations",
    "density_from_orbitals",
    "initial_seed",
    "scf_step",
    "solve_scf",
    "ground_state",
]

logger = logging.getLogger("nanocap.scf")

# Energy window inside which two seeds count as tied; ties resolve in the
# fixed order PARA < SP < CP.
ENERGY_TIE_TOL = 1e-10


class SeedKind(enum.Enum):
    PARA = "PARA"
    SP = "SP"
    CP = "CP"


SEED_ORDER = (SeedKind.PARA, SeedKind.SP, SeedKind.CP)


class ScfError(RuntimeError):
    """Base class for self-consistency failures."""


class EigensolverError(ScfError):
    """Dense eigendecomposition failed."""


class ScfConvergenceError(ScfError):
    """Iteration hit max_iter before the residual dropped below tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class ScfControls:
    """Iteration controls. Defaults are recorded in every output header."""

    tol: float = 1e-8
    max_iter: int = 5000
    mixing: float = 0.3
    degeneracy_tol: float = 1e-9
    seed_amplitude: float = 0.1

    def __post_init__(self):
        if not (0 < self.mixing <= 1):
            raise ValueError("mixing must lie in (0, 1]")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")


@dataclass(eq=False)
class MeanFieldState:
    """Per-site, per-spin occupation vectors, entries in [0, 1]."""

    n_up: np.ndarray
    n_down: np.ndarray

    def __post_init__(self):
        if self.n_up.shape != self.n_down.shape:
            raise ValueError("spin density vectors must have matching shapes")

    @property
    def total(self) -> np.ndarray:
        return self.n_up + self.n_down

    @property
    def spin(self) -> np.ndarray:
        return 0.5 * (self.n_up - self.n_down)

    def copy(self) -> "MeanFieldState":
        return MeanFieldState(self.n_up.copy(), self.n_down.copy())


@dataclass(eq=False)
class ScfSolution:
    """Converged mean-field solution with its basic observables."""

    state: MeanFieldState
    spectra: tuple[np.ndarray, np.ndarray]  # eigenvalues per spin, ascending
    total_energy: float
    homo_lumo_gap: float
    iterations: int
    residual: float
    converged: bool
    seed_kind: SeedKind
    staggered_m: float
    dipole: float  # e * angstrom
    # energy at the first post-mixing iterate; not a bound under mixing,
    # kept for the sanity monitor
    first_iterate_energy: float = float("nan")


def fermi_occupations(eigenvalues: np.ndarray, n_electrons: int,
                      degeneracy_tol: float = 1e-9) -> np.ndarray:
    """Zero-temperature occupations of an ascending spectrum.

    Orbitals are grouped by chaining gaps below ``degeneracy_tol``; groups
    fill bottom-up, and the group straddling the electron count shares the
    remainder equally.  Occupations sum to ``n_electrons`` exactly.
    """
    n = len(eigenvalues)
    if not 0 <= n_electrons <= n:
        raise ValueError("electron count outside [0, n_orbitals]")
    f = np.zeros(n)
    if n_electrons == 0:
        return f
    breaks = np.nonzero(np.diff(eigenvalues) > degeneracy_tol)[0] + 1
    starts = np.concatenate([[0], breaks])
    stops = np.concatenate([breaks, [n]])
    remaining = n_electrons
    for lo, hi in zip(starts, stops):
        size = hi - lo
        if remaining >= size:
            f[lo:hi] = 1.0
            remaining -= size
        else:
            f[lo:hi] = remaining / size
            remaining = 0
        if remaining == 0:
            break
    return f


def density_from_orbitals(orbitals: np.ndarray, occupations: np.ndarray) -> np.ndarray:
    """Site densities sum_k f_k |psi_k(i)|^2 (columns are orbitals)."""
    full = occupations == 1.0
    den = np.einsum("ik,ik->i", orbitals[:, full], orbitals[:, full])
    partial = (occupations > 0.0) & ~full
    if partial.any():
        den = den + (orbitals[:, partial] ** 2) @ occupations[partial]
    return den


def initial_seed(kind: SeedKind, lattice: RibbonLattice,
                 amplitude: float = 0.1) -> MeanFieldState:
    """Starting densities for the three competing orders.

    PARA is featureless; SP staggers spin along the sublattices with uniform
    charge; CP moves charge from the top edge line to the bottom one,
    spin-symmetrically.  Each seed holds exactly half filling per spin.
    """
    if not 0 < amplitude <= 0.25:
        raise ValueError("seed amplitude must lie in (0, 0.25]")
    n_sites = lattice.n_sites
    half = np.full(n_sites, 0.5)
    if kind is SeedKind.PARA:
        return MeanFieldState(half.copy(), half.copy())
    if kind is SeedKind.SP:
        eta = lattice.sublattice.astype(float)
        return MeanFieldState(half + amplitude * eta, half - amplitude * eta)
    if kind is SeedKind.CP:
        n = half.copy()
        n[lattice.electrode_bottom] += 0.5 * amplitude
        n[lattice.electrode_top] -= 0.5 * amplitude
        n += (0.5 * n_sites - n.sum()) / n_sites  # exact half filling per spin
        return MeanFieldState(n, n.copy())
    raise ValueError(f"unknown seed kind {kind!r}")


@dataclass(eq=False)
class _SpinDiag:
    eigenvalues: np.ndarray
    orbitals_density: np.ndarray
    occupations: np.ndarray
    band_energy: float


def _diagonalize_one(h: np.ndarray, n_occ: int, degeneracy_tol: float) -> _SpinDiag:
    try:
        eps, psi = scipy.linalg.eigh(h, driver="evd", check_finite=False,
                                     overwrite_a=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigensolverError(f"dense eigensolver failed: {exc}") from exc
    f = fermi_occupations(eps, n_occ, degeneracy_tol)
    den = density_from_orbitals(psi, f)
    return _SpinDiag(eps, den, f, float(np.dot(f, eps)))


def _diagonalize_pair(ws: MeanFieldHamiltonian, params: ModelParams,
                      state: MeanFieldState, n_occ: int,
                      degeneracy_tol: float) -> tuple[_SpinDiag, _SpinDiag]:
    n_tot = state.n_up + state.n_down
    # With U = 0, or spin-symmetric densities, the two spin blocks coincide.
    if params.u == 0.0 or np.array_equal(state.n_up, state.n_down):
        d = _diagonalize_one(ws.assemble(state.n_down, n_tot), n_occ, degeneracy_tol)
        return d, d
    up = _diagonalize_one(ws.assemble(state.n_down, n_tot), n_occ, degeneracy_tol)
    down = _diagonalize_one(ws.assemble(state.n_up, n_tot), n_occ, degeneracy_tol)
    return up, down


def _energy_at(params: ModelParams, lattice: RibbonLattice, state: MeanFieldState,
               up: _SpinDiag, down: _SpinDiag) -> float:
    occ = (up.eigenvalues * up.occupations, down.eigenvalues * down.occupations)
    return total_energy(params, lattice, state, occ)


def scf_step(state: MeanFieldState, lattice: RibbonLattice, params: ModelParams,
             field: AppliedField | None, mixing: float = 0.3,
             degeneracy_tol: float = 1e-9,
             _workspace: MeanFieldHamiltonian | None = None,
             ) -> tuple[MeanFieldState, float]:
    """One mixed self-consistency update.

    Returns the mixed state and the residual, the infinity norm of the
    density change before mixing.
    """
    ws = _workspace if _workspace is not None else MeanFieldHamiltonian(
        lattice, params, field)
    n_occ = lattice.n_sites // 2
    up, down = _diagonalize_pair(ws, params, state, n_occ, degeneracy_tol)
    residual = max(
        float(np.max(np.abs(up.orbitals_density - state.n_up))),
        float(np.max(np.abs(down.orbitals_density - state.n_down))),
    )
    new_up = np.clip((1 - mixing) * state.n_up + mixing * up.orbitals_density, 0.0, 1.0)
    new_down = np.clip((1 - mixing) * state.n_down + mixing * down.orbitals_density,
                       0.0, 1.0)
    return MeanFieldState(new_up, new_down), residual


def _observables(lattice: RibbonLattice, state: MeanFieldState) -> tuple[float, float]:
    eta = lattice.sublattice.astype(float)
    m_s = float(np.dot(eta, state.spin)) / lattice.n_sites
    dipole = float(np.dot(1.0 - state.total, lattice.positions[:, 0]))
    return m_s, dipole


def solve_scf(lattice: RibbonLattice, params: ModelParams,
              field: AppliedField | None, seed_kind: SeedKind,
              controls: ScfControls = ScfControls(),
              initial_state: MeanFieldState | None = None) -> ScfSolution:
    """Iterate from one seed to self-consistency.

    ``initial_state`` overrides the constructed seed (used to continue from
    an earlier solution); ``seed_kind`` then only records the lineage.
    Raises ScfConvergenceError when max_iter is exhausted, or earlier when
    the iteration is provably cycling: a residual that fails to improve by
    even 0.1% across a 400-iteration window while sitting far above tol is
    a limit cycle, not slow convergence (geometric decay at rate q gives
    q^400 over the window; even q = 0.999 improves 33%).
    """
    ws = MeanFieldHamiltonian(lattice, params, field)
    n_occ = lattice.n_sites // 2
    if initial_state is not None:
        state = initial_state.copy()
    else:
        state = initial_seed(seed_kind, lattice, controls.seed_amplitude)

    converged = False
    residual = float("inf")
    first_energy = None
    iterations = 0
    stall_window = 400
    window_best = float("inf")
    prev_window_best = float("inf")
    for iteration in range(1, controls.max_iter + 1):
        iterations = iteration
        try:
            up, down = _diagonalize_pair(ws, params, state, n_occ,
                                         controls.degeneracy_tol)
        except EigensolverError as exc:
            raise EigensolverError(f"iteration {iteration}: {exc}") from exc
        if iteration == 2:
            first_energy = _energy_at(params, lattice, state, up, down)
        residual = max(
            float(np.max(np.abs(up.orbitals_density - state.n_up))),
            float(np.max(np.abs(down.orbitals_density - state.n_down))),
        )
        mix = controls.mixing
        state = MeanFieldState(
            np.clip((1 - mix) * state.n_up + mix * up.orbitals_density, 0.0, 1.0),
            np.clip((1 - mix) * state.n_down + mix * down.orbitals_density, 0.0, 1.0),
        )
        if residual < controls.tol:
            converged = True
            break
        window_best = min(window_best, residual)
        if iteration % stall_window == 0:
            flat = window_best > prev_window_best * (1.0 - 1e-3)
            if flat and window_best > 100.0 * controls.tol:
                raise ScfConvergenceError(
                    f"limit cycle detected after {iteration} iterations "
                    f"(residual stuck near {window_best:.3e})",
                    residual=residual, iterations=iterations,
                )
            prev_window_best, window_best = window_best, float("inf")

    if not converged:
        raise ScfConvergenceError(
            f"no convergence after {controls.max_iter} iterations "
            f"(last residual {residual:.3e})",
            residual=residual, iterations=iterations,
        )

    # Evaluate energy, spectra and gap consistently at the converged state.
    up, down = _diagonalize_pair(ws, params, state, n_occ, controls.degeneracy_tol)
    energy = _energy_at(params, lattice, state, up, down)
    gap = min(
        float(up.eigenvalues[n_occ] - up.eigenvalues[n_occ - 1]),
        float(down.eigenvalues[n_occ] - down.eigenvalues[n_occ - 1]),
    )
    if first_energy is None:
        first_energy = energy  # converged on the first step
    if energy > first_energy + 1e-8:
        # routine for far-from-consistent seeds; the comparison is a
        # monitor, not a theorem, under linear mixing
        logger.info(
            "energy monitor: converged %.12g above first-iterate %.12g (seed %s)",
            energy, first_energy, seed_kind.value,
        )
    m_s, dipole = _observables(lattice, state)
    return ScfSolution(
        state=state,
        spectra=(up.eigenvalues.copy(), down.eigenvalues.copy()),
        total_energy=energy,
        homo_lumo_gap=gap,
        iterations=iterations,
        residual=residual,
        converged=True,
        seed_kind=seed_kind,
        staggered_m=m_s,
        dipole=dipole,
        first_iterate_energy=first_energy,
    )


RETRY_MIXING_FACTORS = (0.5, 0.25)


def mixing_ladder(controls: ScfControls) -> list[ScfControls]:
    """The controls followed by gentler-mixing retries of the same budget."""
    return [controls] + [
        dataclasses.replace(controls, mixing=factor * controls.mixing)
        for factor in RETRY_MIXING_FACTORS
    ]


def solve_scf_relaxed(lattice: RibbonLattice, params: ModelParams,
                      field: AppliedField | None, seed_kind: SeedKind,
                      controls: ScfControls = ScfControls(),
                      initial_state: MeanFieldState | None = None) -> ScfSolution:
    """solve_scf, retrying down the mixing ladder when iteration stalls."""
    ladder = mixing_ladder(controls)
    for attempt, ctl in enumerate(ladder):
        try:
            return solve_scf(lattice, params, field, seed_kind, ctl,
                             initial_state=initial_state)
        except ScfConvergenceError:
            if attempt + 1 == len(ladder):
                raise
            logger.info("seed %s stalled; retrying with mixing %.3g",
                        seed_kind.value, ladder[attempt + 1].mixing)
    raise AssertionError("unreachable")


def ground_state(lattice: RibbonLattice, params: ModelParams,
                 field: AppliedField | None,
                 controls: ScfControls = ScfControls(),
                 extra_starts: Sequence[tuple[SeedKind, MeanFieldState]] = (),
                 ) -> ScfSolution:
    """Lowest-energy converged solution across the three standard seeds.

    A seed that stalls is retried with the mixing halved, then quartered,
    before it counts as failed.  ``extra_starts`` appends warm starts
    (lineage, state); they lose energy ties against the standard seeds.  If
    only some runs converge, the winner is chosen among survivors and a
    warning is logged; if none converge the last failure propagates.
    """
    solutions: list[ScfSolution] = []
    failures: list[str] = []
    last_error: ScfError | None = None
    runs: list[tuple[SeedKind, MeanFieldState | None]] = [
        (kind, None) for kind in SEED_ORDER
    ]
    runs.extend((kind, state) for kind, state in extra_starts)
    ladder = mixing_ladder(controls)
    for kind, start in runs:
        for attempt, ctl in enumerate(ladder):
            try:
                solutions.append(
                    solve_scf(lattice, params, field, kind, ctl,
                              initial_state=start)
                )
                break
            except EigensolverError as exc:
                failures.append(f"{kind.value}: {exc}")
                last_error = exc
                break
            except ScfConvergenceError as exc:
                last_error = exc
                if attempt + 1 < len(ladder):
                    logger.info("seed %s stalled; retrying with mixing %.3g",
                                kind.value, ladder[attempt + 1].mixing)
                else:
                    failures.append(f"{kind.value}: {exc}")
    if not solutions:
        raise ScfConvergenceError(
            "all seeds failed to converge: " + "; ".join(failures),
            residual=getattr(last_error, "residual", float("inf")),
            iterations=getattr(last_error, "iterations", 0),
        )
    if failures:
        logger.warning("some seeds failed to converge: %s", "; ".join(failures))
    best = solutions[0]
    for sol in solutions[1:]:
        if sol.total_energy < best.total_energy - ENERGY_TIE_TOL:
            best = sol
    return best
