"""Mean-field electric capacitance of zigzag carbon, BN and BCN nanoribbons."""

from nanocap.lattice import (
    BOND_LENGTH_ANGSTROM,
    Material,
    RibbonLattice,
    Species,
    TubeLabel,
    build_ribbon,
    mirror_permutation,
    ribbon_width,
    tube_label,
)
from nanocap.model import (
    AppliedField,
    ModelParams,
    build_mf_hamiltonian,
    ramp_potential,
    step_potential,
    total_energy,
)
from nanocap.driver import (
    PhaseScanResult,
    SweepConfig,
    SweepRow,
    parse_sweep_csv,
    phase_scan,
    run_sweep,
    sweep_csv,
)
from nanocap.oracles import (
    LinearResponseRecord,
    QuantumCapEstimate,
    ed_ground_energy,
    lr_capacitance,
    quantum_cap_estimate,
    quantum_capacitance,
    tube_gap,
)
from nanocap.response import (
    CapacitanceRecord,
    capacitance_fd,
    check_linearity,
    classify_phase,
    electrode_charge,
    si_capacitance,
)
from nanocap.scf import (
    MeanFieldState,
    ScfControls,
    ScfConvergenceError,
    ScfError,
    ScfSolution,
    SeedKind,
    fermi_occupations,
    ground_state,
    initial_seed,
    scf_step,
    solve_scf,
    solve_scf_relaxed,
)

__version__ = "0.1.0"
