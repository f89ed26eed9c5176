"""Zigzag-edged honeycomb ribbon geometry.

The ribbon is a strip of ``n_rows`` zigzag lines, each holding ``length``
sites, periodic along the line direction (y).  Sites are indexed
``i = r * length + m`` for row ``r`` and column ``m``.  Rolling the strip
along y turns it into a (length/2, 0) zigzag nanotube, which is what the
width-independent labels below refer to.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

__all__ = [
    "BOND_LENGTH_ANGSTROM",
    "Material",
    "Species",
    "RibbonLattice",
    "TubeLabel",
    "build_ribbon",
    "ribbon_width",
    "tube_label",
    "mirror_permutation",
]

# Carbon-carbon bond length used for every species pair, in angstrom.
BOND_LENGTH_ANGSTROM = 1.45

_SQRT3_HALF = math.sqrt(3.0) / 2.0


class Species(enum.Enum):
    """Atomic species occupying a site, with its on-site energy in units of t."""

    C = 0.0
    B = +1.0
    N = -1.0

    @property
    def site_energy(self) -> float:
        return self.value


class Material(str, enum.Enum):
    """Chemical decoration of the ribbon."""

    C = "C"
    BN = "BN"
    BCN = "BCN"

    @classmethod
    def coerce(cls, value: "Material | str") -> "Material":
        if isinstance(value, Material):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown material {value!r}; expected C, BN or BCN") from None


@dataclass(eq=False)
class RibbonLattice:
    """Geometry, connectivity and decoration of one ribbon (or torus variant).

    Arrays are aligned with the site index ``i = r * length + m``.
    ``sublattice`` holds +1 for the A sublattice ((r + m) even) and -1 for B.
    ``bonds`` lists each nearest-neighbour pair once as ``(i, j)`` with i < j.
    """

    material: Material
    n_rows: int
    length: int
    n_sites: int
    positions: np.ndarray        # (n_sites, 2) in angstrom
    sublattice: np.ndarray       # (n_sites,) values +1 / -1
    species: np.ndarray          # (n_sites,) of Species
    site_energies: np.ndarray    # (n_sites,) in units of t
    bonds: np.ndarray            # (n_bonds, 2) int
    electrode_bottom: np.ndarray  # site indices of row 0
    electrode_top: np.ndarray     # site indices of row n_rows - 1
    torus: bool = False
    a0: float = BOND_LENGTH_ANGSTROM
    _adjacency: csr_matrix | None = field(default=None, repr=False)

    def site_index(self, r: int, m: int) -> int:
        return r * self.length + m

    def row_of(self, i: int) -> int:
        return i // self.length

    def column_of(self, i: int) -> int:
        return i % self.length

    @property
    def width(self) -> float:
        """Strip width max(x) - min(x) in angstrom."""
        return ribbon_width(self.n_rows, self.a0)

    @property
    def y_extent(self) -> float:
        """Period of the strip along y in angstrom."""
        return self.length * _SQRT3_HALF * self.a0

    def adjacency(self) -> csr_matrix:
        """Symmetric 0/1 adjacency matrix (cached)."""
        if self._adjacency is None:
            i, j = self.bonds[:, 0], self.bonds[:, 1]
            ones = np.ones(len(self.bonds))
            rows = np.concatenate([i, j])
            cols = np.concatenate([j, i])
            vals = np.concatenate([ones, ones])
            self._adjacency = csr_matrix(
                (vals, (rows, cols)), shape=(self.n_sites, self.n_sites)
            )
        return self._adjacency

    def degrees(self) -> np.ndarray:
        return np.bincount(self.bonds.ravel(), minlength=self.n_sites)

    def electrodes(self, mode: str = "full") -> tuple[np.ndarray, np.ndarray]:
        """Electrode site sets (bottom, top).

        ``full`` takes the whole outermost zigzag line on each side (default);
        ``outer`` restricts to the degree-2 sites of those lines, i.e. the
        atoms without a bond toward the interior.
        """
        if mode == "full":
            return self.electrode_bottom, self.electrode_top
        if mode == "outer":
            deg = self.degrees()
            bottom = self.electrode_bottom[deg[self.electrode_bottom] == 2]
            top = self.electrode_top[deg[self.electrode_top] == 2]
            return bottom, top
        raise ValueError(f"unknown electrode mode {mode!r}; expected 'full' or 'outer'")

    def debug_listing(self) -> str:
        """Plain-text site/bond listing, one record per line."""
        lines = []
        for i in range(self.n_sites):
            r, m = divmod(i, self.length)
            sub = "A" if self.sublattice[i] > 0 else "B"
            x, y = self.positions[i]
            lines.append(
                f"site {i} r={r} m={m} sublattice={sub} "
                f"species={self.species[i].name} x={x:.6f} y={y:.6f}"
            )
        for i, j in self.bonds:
            lines.append(f"bond {i} {j}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TubeLabel:
    """(m, 0) zigzag tube corresponding to a ribbon of the same length."""

    m: int
    metallic: bool


def ribbon_width(n_rows: int, a0: float = BOND_LENGTH_ANGSTROM) -> float:
    """Width (1.5 * n_rows - 1) * a0 of a ribbon with ``n_rows`` zigzag lines."""
    if n_rows < 2:
        raise ValueError("n_rows must be at least 2")
    return (1.5 * n_rows - 1.0) * a0


def tube_label(lattice_or_length: "RibbonLattice | int") -> TubeLabel:
    """Label of the (length/2, 0) tube obtained by rolling the strip along y."""
    if isinstance(lattice_or_length, RibbonLattice):
        length = lattice_or_length.length
    else:
        length = int(lattice_or_length)
    _check_length(length)
    m = length // 2
    return TubeLabel(m=m, metallic=(m % 3 == 0))


def _check_length(length: int) -> None:
    if length < 4 or length % 2 != 0:
        raise ValueError("length must be an even integer >= 4")


def _assign_species(material: Material, n_rows: int, length: int,
                    sublattice: np.ndarray) -> np.ndarray:
    n_sites = n_rows * length
    species = np.empty(n_sites, dtype=object)
    if material is Material.C:
        species[:] = Species.C
    elif material is Material.BN:
        species[sublattice > 0] = Species.B
        species[sublattice < 0] = Species.N
    else:  # BCN: boron on the first zigzag line, nitrogen on the last
        species[:] = Species.C
        species[:length] = Species.B
        species[(n_rows - 1) * length:] = Species.N
    return species


def build_ribbon(material: "Material | str", n_rows: int, length: int,
                 torus: bool = False) -> RibbonLattice:
    """Construct the periodic zigzag strip.

    ``torus=True`` additionally wraps the width direction (diagnostic variant
    for gap checks; connectivity only, the wrap bonds have no geometric
    length).  That wrap keeps the lattice bipartite only for even ``n_rows``.
    """
    material = Material.coerce(material)
    if n_rows < 2:
        raise ValueError("n_rows must be at least 2")
    _check_length(length)
    if torus and n_rows % 2 != 0:
        raise ValueError("torus variant requires an even n_rows")

    n_sites = n_rows * length
    r = np.repeat(np.arange(n_rows), length)
    m = np.tile(np.arange(length), n_rows)
    parity = (r + m) % 2
    sublattice = np.where(parity == 0, 1, -1).astype(np.int8)

    a0 = BOND_LENGTH_ANGSTROM
    positions = np.empty((n_sites, 2))
    positions[:, 0] = 1.5 * r * a0 + 0.5 * a0 * (1 - parity)
    positions[:, 1] = m * _SQRT3_HALF * a0

    bonds: list[tuple[int, int]] = []
    for rr in range(n_rows):
        base = rr * length
        for mm in range(length):
            bonds.append((base + mm, base + (mm + 1) % length))
    for rr in range(n_rows - 1):
        for mm in range(length):
            if (rr + mm) % 2 == 0:
                bonds.append((rr * length + mm, (rr + 1) * length + mm))
    if torus:
        for mm in range(length):
            if (n_rows - 1 + mm) % 2 == 0:
                bonds.append(((n_rows - 1) * length + mm, mm))
    bond_array = np.sort(np.asarray(bonds, dtype=np.int64), axis=1)

    species = _assign_species(material, n_rows, length, sublattice)
    site_energies = np.array([s.site_energy for s in species])

    return RibbonLattice(
        material=material,
        n_rows=n_rows,
        length=length,
        n_sites=n_sites,
        positions=positions,
        sublattice=sublattice,
        species=species,
        site_energies=site_energies,
        bonds=bond_array,
        electrode_bottom=np.arange(length),
        electrode_top=np.arange((n_rows - 1) * length, n_rows * length),
        torus=torus,
    )


def mirror_permutation(lattice: RibbonLattice) -> np.ndarray:
    """Site permutation of the reflection swapping the two edges.

    Maps (r, m) to (n_rows - 1 - r, m) for even ``n_rows``; odd ``n_rows``
    needs a one-column shift to land back on the lattice.  The permutation is
    a bond automorphism of the ribbon.
    """
    n, length = lattice.n_rows, lattice.length
    shift = 0 if n % 2 == 0 else 1
    perm = np.empty(lattice.n_sites, dtype=np.int64)
    for i in range(lattice.n_sites):
        r, m = divmod(i, length)
        perm[i] = (n - 1 - r) * length + (m + shift) % length
    return perm
