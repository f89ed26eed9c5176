"""Extended Hubbard model on the ribbon, Hartree mean-field level.

Natural units throughout: energies in the hopping t, charge in e, so a
potential drop delta_v is in t/e and enters the Hamiltonian diagonal
directly.  The interaction is decoupled in the density channel only
(no Fock exchange for the neighbour term), which is the scheme every
result in this package refers to.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from nanocap.lattice import RibbonLattice

__all__ = [
    "ModelParams",
    "AppliedField",
    "ramp_potential",
    "step_potential",
    "MeanFieldHamiltonian",
    "build_mf_hamiltonian",
    "total_energy",
]


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the extended Hubbard Hamiltonian, in units of t.

    ``t_ev`` is the physical value of the hopping in eV and is used only
    when converting capacitances to SI units.
    """

    u: float = 0.0
    v: float = 0.0
    t: float = 1.0
    t_ev: float = 2.7
    filling: float = 1.0

    def __post_init__(self):
        if self.u < 0 or self.v < 0:
            raise ValueError("repulsive model only: u and v must be >= 0")
        if self.t <= 0:
            raise ValueError("hopping t must be positive")
        if self.t_ev <= 0:
            raise ValueError("t_ev must be positive")
        if self.filling != 1.0:
            raise ValueError("only half filling (one electron per site) is supported")


@dataclass(frozen=True, eq=False)
class AppliedField:
    """Per-site external potential with a fixed electrode-to-electrode drop.

    ``profile`` is in units of t, has zero mean, and spans exactly
    ``|delta_v|`` between its extreme sites.
    """

    delta_v: float
    profile: np.ndarray

    def __post_init__(self):
        prof = np.asarray(self.profile, dtype=float)
        object.__setattr__(self, "profile", prof)
        scale = max(1.0, abs(self.delta_v))
        if abs(float(prof.mean())) > 1e-9 * scale:
            raise ValueError("field profile must have zero mean")
        span = float(prof.max() - prof.min()) if prof.size else 0.0
        if abs(span - abs(self.delta_v)) > 1e-9 * scale:
            raise ValueError("profile span must equal |delta_v|")

    @classmethod
    def zero(cls, lattice: RibbonLattice) -> "AppliedField":
        return cls(delta_v=0.0, profile=np.zeros(lattice.n_sites))


def ramp_potential(lattice: RibbonLattice, delta_v: float) -> AppliedField:
    """Linear ramp across the width: +delta_v/2 on the bottom-edge extreme
    sites, -delta_v/2 on the top-edge ones, zero mean.

    ``delta_v`` may carry either sign; zero gives the zero field.
    """
    x = lattice.positions[:, 0]
    center = 0.5 * (x.max() + x.min())
    profile = -delta_v * (x - center) / lattice.width
    profile -= profile.mean()
    return AppliedField(delta_v=delta_v, profile=profile)


def step_potential(lattice: RibbonLattice, delta_v: float) -> AppliedField:
    """Alternative profile: +-delta_v/2 on the electrode lines only."""
    profile = np.zeros(lattice.n_sites)
    profile[lattice.electrode_bottom] = +0.5 * delta_v
    profile[lattice.electrode_top] = -0.5 * delta_v
    profile -= profile.mean()
    return AppliedField(delta_v=delta_v, profile=profile)


def _as_density_pair(densities) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(densities, "n_up"):
        return densities.n_up, densities.n_down
    n_up, n_down = densities
    return np.asarray(n_up, dtype=float), np.asarray(n_down, dtype=float)


def _validate_density(n: np.ndarray, n_sites: int, label: str) -> None:
    if n.shape != (n_sites,):
        raise ValueError(f"{label} density must have shape ({n_sites},), got {n.shape}")
    if np.any(n < -1e-12) or np.any(n > 1.0 + 1e-12):
        raise ValueError(f"{label} density entries must lie in [0, 1]")


class MeanFieldHamiltonian:
    """Reusable assembler for the single-particle mean-field matrix.

    The hopping, site-energy and field parts are frozen at construction;
    ``assemble`` adds the density-dependent Hartree diagonal for one spin:

        H[i][j] = -t on bonds,
        H[i][i] = E_i + U * (n(i, -sigma) - 1/2) + V * sum_nn (n(j) - 1) + phi_i.

    Interactions act on densities measured from the charge-neutral
    background (one electron per site): each site carries a +1 ionic charge
    that compensates the electrons, so a neutral site exerts no Coulomb
    shift on its neighbors.  Without the compensation, open edges (whose
    sites have fewer neighbors) would self-dope massively at any V > 0.
    """

    def __init__(self, lattice: RibbonLattice, params: ModelParams,
                 field: AppliedField | None = None):
        if field is not None and field.profile.shape != (lattice.n_sites,):
            raise ValueError("field profile length does not match the lattice")
        self.lattice = lattice
        self.params = params
        n = lattice.n_sites
        base = np.zeros((n, n))
        i, j = lattice.bonds[:, 0], lattice.bonds[:, 1]
        base[i, j] = -params.t
        base[j, i] = -params.t
        diag = params.t * lattice.site_energies.copy()
        if field is not None:
            diag = diag + field.profile
        base[np.diag_indices(n)] = diag
        self._base = base
        self._adj = lattice.adjacency()

    def assemble(self, n_opposite: np.ndarray, n_total: np.ndarray) -> np.ndarray:
        h = self._base.copy()
        extra = self.params.u * (n_opposite - 0.5) \
            + self.params.v * (self._adj @ (n_total - 1.0))
        h[np.diag_indices(self.lattice.n_sites)] += extra
        return h


def build_mf_hamiltonian(lattice: RibbonLattice, params: ModelParams, densities,
                         field: AppliedField | None, spin: str) -> np.ndarray:
    """One-spin mean-field Hamiltonian for the given spin densities."""
    if spin not in ("up", "down"):
        raise ValueError("spin must be 'up' or 'down'")
    n_up, n_down = _as_density_pair(densities)
    _validate_density(n_up, lattice.n_sites, "spin-up")
    _validate_density(n_down, lattice.n_sites, "spin-down")
    n_opposite = n_down if spin == "up" else n_up
    return MeanFieldHamiltonian(lattice, params, field).assemble(n_opposite, n_up + n_down)


def total_energy(params: ModelParams, lattice: RibbonLattice, densities,
                 occ_energies: Iterable[np.ndarray]) -> float:
    """Mean-field total energy with the interaction double counting removed.

        E = sum_sigma sum_occ eps
            - U * sum_i (n_up - 1/2)(n_down - 1/2)
            - V * sum_bonds (n_i - 1)(n_j - 1)

    The deviations from neutrality match the Hartree diagonal convention.
    ``occ_energies`` holds, per spin, the occupied orbital energies; a
    fractionally occupied orbital enters pre-weighted by its occupation.
    ``densities`` must be the ones the spectra were computed from.
    """
    n_up, n_down = _as_density_pair(densities)
    _validate_density(n_up, lattice.n_sites, "spin-up")
    _validate_density(n_down, lattice.n_sites, "spin-down")
    band = float(sum(np.sum(e) for e in occ_energies))
    dn = n_up + n_down - 1.0
    i, j = lattice.bonds[:, 0], lattice.bonds[:, 1]
    double_count = params.u * float(np.dot(n_up - 0.5, n_down - 0.5)) \
        + params.v * float(np.dot(dn[i], dn[j]))
    return band - double_count
