"""Lattice geometry, spin-dependent potentials and the discretized Hamiltonian.

Internally everything is dimensionless: lengths in units of the lattice
constant lambda/2, energies in recoil energies E_R = (2*pi*hbar)^2/(2*m*lambda^2),
hbar = 1 and time in hbar/E_R.  In these units the kinetic prefactor
hbar^2/(2*m*(lambda/2)^2) equals 1/pi^2 exactly, so the only physical inputs
left are the trap depth (in E_R) and the polarization angle.  SI conversions
happen at the I/O boundary through :class:`LatticeModel`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConstructionError, ParameterError

# kinetic prefactor hbar^2/(2 m (lambda/2)^2) in units of E_R (lambda/2)^2
KAPPA = 1.0 / np.pi**2

# CODATA-2018 constants; atom mass is cesium-133
HBAR_SI = 1.054571817e-34       # J s
BOLTZMANN_SI = 1.380649e-23     # J/K
ATOMIC_MASS_SI = 1.66053906892e-27  # kg
CS133_MASS_U = 132.905451961
CS133_MASS_SI = CS133_MASS_U * ATOMIC_MASS_SI


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar, k_B and the atom mass, all in SI units."""

    hbar: float = HBAR_SI
    boltzmann: float = BOLTZMANN_SI
    atom_mass: float = CS133_MASS_SI

    def __post_init__(self):
        if self.hbar <= 0 or self.boltzmann <= 0 or self.atom_mass <= 0:
            raise ParameterError("physical constants must be strictly positive")


@dataclass(frozen=True)
class RecoilEnergy:
    """Recoil energy of the atom in the lattice light field."""

    joules: float
    hertz: float  # E_R / h

    @property
    def time_us_per_unit(self) -> float:
        """Microseconds per dimensionless time unit hbar/E_R."""
        return 1e6 / (2.0 * np.pi * self.hertz)


def recoil_energy(constants: PhysicalConstants, wavelength: float) -> RecoilEnergy:
    """E_R = (2 pi hbar)^2 / (2 m lambda^2), returned in J and as E_R/h in Hz.

    Parameters
    ----------
    constants : PhysicalConstants
    wavelength : float
        Lattice light wavelength in meters.
    """
    if wavelength <= 0:
        raise ParameterError(f"wavelength must be positive, got {wavelength}")
    e_r = (2.0 * np.pi * constants.hbar) ** 2 / (2.0 * constants.atom_mass * wavelength**2)
    return RecoilEnergy(joules=e_r, hertz=e_r / (2.0 * np.pi * constants.hbar))


def displacement_from_angle(theta: float) -> float:
    """Relative displacement of the two spin lattices, in lambda/2 units.

    Dx(theta) = arctan((3/4) tan(theta)) / pi, monotone on [0, pi/2] with
    Dx(0) = 0 and Dx(pi/2) = 0.5.  Both circular standing-wave components
    contribute to each spin potential, which makes the dependence slightly
    nonlinear in theta.
    """
    if not 0.0 <= theta <= np.pi / 2.0 + 1e-15:
        raise ParameterError(f"polarization angle must lie in [0, pi/2], got {theta}")
    if theta >= np.pi / 2.0:
        return 0.5
    return float(np.arctan(0.75 * np.tan(theta)) / np.pi)


def angle_from_displacement(dx: float) -> float:
    """Inverse of :func:`displacement_from_angle`: theta = arctan((4/3) tan(pi Dx))."""
    if not 0.0 <= dx <= 0.5 + 1e-15:
        raise ParameterError(f"displacement must lie in [0, 0.5] lambda/2, got {dx}")
    if dx >= 0.5:
        return float(np.pi / 2.0)
    return float(np.arctan(4.0 / 3.0 * np.tan(np.pi * dx)))


def trap_depth(theta: float, depth_at_zero: float) -> float:
    """Polarization-angle dependent trap depth, in E_R.

    U0(theta) = U0(0) * sqrt((25 + 7 cos 2 theta)/32); equal for both spin
    states, decreasing from U0(0) at theta=0 to (3/4) U0(0) at theta=pi/2.
    """
    if not 0.0 <= theta <= np.pi / 2.0 + 1e-15:
        raise ParameterError(f"polarization angle must lie in [0, pi/2], got {theta}")
    if depth_at_zero <= 0:
        raise ParameterError("trap depth must be positive")
    return float(depth_at_zero * np.sqrt((25.0 + 7.0 * np.cos(2.0 * theta)) / 32.0))


def trap_frequency(theta: float, depth_at_zero: float) -> float:
    """Harmonic trap frequency at the well bottom, as hbar*omega_HO in E_R.

    Expanding -U0 cos^2(2 pi x / lambda) about a minimum gives
    (1/2) m omega^2 x^2 with omega = (2 pi / lambda) sqrt(2 U0 / m), i.e.
    hbar*omega_HO = 2 sqrt(U0 E_R).  The dimensionally equivalent form
    sqrt(2 U0/(m lambda^2)) misses the 2 pi wavenumber factor and does not
    reproduce the ~66 kHz frequency of a 270 E_R cesium lattice; the
    expansion above does, so it is the one used throughout.
    """
    return 2.0 * np.sqrt(trap_depth(theta, depth_at_zero))


@dataclass(frozen=True)
class LatticeParams:
    """Static lattice inputs.

    wavelength in meters, depth_at_zero in E_R, polarization_angle in rad;
    sites must be odd and points_per_site a power of two so the grid both
    centers a well at the origin and FFT-shifts cheaply.
    """

    wavelength: float = 866e-9
    depth_at_zero: float = 270.0
    polarization_angle: float = 0.0
    vibrational_index: int = 0
    sites: int = 33
    points_per_site: int = 64

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ParameterError("wavelength must be positive")
        if self.depth_at_zero <= 0:
            raise ParameterError("lattice depth must be positive")
        if not 0.0 <= self.polarization_angle <= np.pi / 2.0 + 1e-15:
            raise ParameterError("polarization angle must lie in [0, pi/2]")
        if self.vibrational_index < 0:
            raise ParameterError("vibrational index must be non-negative")
        if self.sites < 1 or self.sites % 2 == 0:
            raise ParameterError("sites must be a positive odd integer")
        p = self.points_per_site
        if p < 2 or (p & (p - 1)) != 0:
            raise ParameterError("points_per_site must be a power of two")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic position grid in lambda/2 units, centered on a site."""

    positions: np.ndarray
    spacing: float
    sites: int
    points_per_site: int

    @classmethod
    def for_params(cls, params: LatticeParams) -> "Grid":
        n = params.sites * params.points_per_site
        u = (np.arange(n) - n // 2) / params.points_per_site
        u.flags.writeable = False
        return cls(positions=u, spacing=1.0 / params.points_per_site,
                   sites=params.sites, points_per_site=params.points_per_site)

    @property
    def size(self) -> int:
        return self.positions.size

    @property
    def length(self) -> float:
        return float(self.sites)


@dataclass(frozen=True)
class Potential:
    """Sampled spin-dependent lattice potential, E_R units."""

    spin: str                 # "up" or "down"
    values: np.ndarray
    displacement: float       # well offset from integer site coordinates
    depth: float

    def __post_init__(self):
        self.values.flags.writeable = False


def build_potential(params: LatticeParams, spin: str, grid: Grid | None = None) -> Potential:
    """Sample U_spin(u) = -U0(theta) cos^2(pi (u - u0)) on the grid.

    The spin-down lattice has minima at integer site coordinates; the
    spin-up lattice is the same profile displaced by +Dx(theta).
    """
    if spin not in ("up", "down"):
        raise ParameterError(f"spin must be 'up' or 'down', got {spin!r}")
    grid = grid or Grid.for_params(params)
    theta = params.polarization_angle
    u0 = displacement_from_angle(theta) if spin == "up" else 0.0
    depth = trap_depth(theta, params.depth_at_zero)
    values = -depth * np.cos(np.pi * (grid.positions - u0)) ** 2
    return Potential(spin=spin, values=values, displacement=u0, depth=depth)


def _kinetic_spectral(n: int, length: float) -> np.ndarray:
    # circulant matrix of the Fourier-grid operator kappa k^2; irfft of the
    # real even multiplier gives its first row, symmetrized to kill rounding
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    row = np.fft.irfft(KAPPA * k**2, n=n)
    mat = sla.circulant(row)
    return (mat + mat.T) / 2.0


def _kinetic_fd3(n: int, spacing: float) -> np.ndarray:
    # three-point periodic Laplacian: diagonal 2 kappa/h^2, off-diagonal
    # -kappa/h^2 plus the two corner entries
    c = KAPPA / spacing**2
    mat = np.zeros((n, n))
    idx = np.arange(n)
    mat[idx, idx] = 2.0 * c
    mat[idx, (idx + 1) % n] = -c
    mat[idx, (idx - 1) % n] = -c
    return mat


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Real symmetric single-particle Hamiltonian on the periodic grid.

    kinetic="spectral" uses the Fourier-grid kinetic operator (dense circulant,
    exponentially convergent for the smooth lattice states); kinetic="fd3"
    keeps the banded three-point form (tridiagonal plus periodic corners),
    whose truncation error scales as h^2.
    """

    matrix: np.ndarray
    grid: Grid
    potential: Potential
    kinetic: str = "spectral"

    def __post_init__(self):
        self.matrix.flags.writeable = False

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Apply H to a state without forming the dense product.

        Uses an FFT for the spectral kinetic term and rolls for fd3, so the
        result is an independent code path from the stored matrix.
        """
        if self.kinetic == "spectral":
            n = self.size
            k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.grid.length / n)
            kin = np.fft.ifft(KAPPA * k**2 * np.fft.fft(psi))
            if np.isrealobj(psi):
                kin = kin.real
        else:
            c = KAPPA / self.grid.spacing**2
            kin = c * (2.0 * psi - np.roll(psi, 1) - np.roll(psi, -1))
        return kin + self.potential.values * psi


def build_hamiltonian(potential: Potential, grid: Grid, kinetic: str = "spectral") -> HamiltonianMatrix:
    """Assemble H = T + diag(V) for one spin state."""
    if potential.values.shape != grid.positions.shape:
        raise ConstructionError(
            f"potential ({potential.values.size}) and grid ({grid.size}) sizes differ")
    if kinetic == "spectral":
        mat = _kinetic_spectral(grid.size, grid.length)
    elif kinetic == "fd3":
        mat = _kinetic_fd3(grid.size, grid.spacing)
    else:
        raise ParameterError(f"unknown kinetic discretization {kinetic!r}")
    mat = mat + np.diag(potential.values)
    mat = (mat + mat.T) / 2.0
    return HamiltonianMatrix(matrix=mat, grid=grid, potential=potential, kinetic=kinetic)


@dataclass(frozen=True)
class LatticeModel:
    """All derived quantities for one lattice configuration.

    Bundles constants, parameters, the grid and the unit conversions used
    by the rest of the pipeline.  Immutable; safe to share across workers.
    """

    params: LatticeParams
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    @classmethod
    def from_displacement(cls, dx: float, params: LatticeParams | None = None,
                          constants: PhysicalConstants | None = None) -> "LatticeModel":
        """Configure the lattice so the spin-up wells sit at dx (lambda/2 units)."""
        base = params or LatticeParams()
        theta = angle_from_displacement(dx)
        p = LatticeParams(wavelength=base.wavelength, depth_at_zero=base.depth_at_zero,
                          polarization_angle=theta, vibrational_index=base.vibrational_index,
                          sites=base.sites, points_per_site=base.points_per_site)
        return cls(params=p, constants=constants or PhysicalConstants())

    @property
    def recoil(self) -> RecoilEnergy:
        return recoil_energy(self.constants, self.params.wavelength)

    @property
    def theta(self) -> float:
        return self.params.polarization_angle

    @property
    def displacement(self) -> float:
        return displacement_from_angle(self.theta)

    @property
    def depth(self) -> float:
        """U0(theta) in E_R."""
        return trap_depth(self.theta, self.params.depth_at_zero)

    @property
    def homega(self) -> float:
        """hbar*omega_HO(theta) in E_R."""
        return trap_frequency(self.theta, self.params.depth_at_zero)

    @property
    def trap_frequency_rad_s(self) -> float:
        return self.homega * 2.0 * np.pi * self.recoil.hertz

    @property
    def grid(self) -> Grid:
        return Grid.for_params(self.params)

    def potential(self, spin: str) -> Potential:
        return build_potential(self.params, spin, self.grid)

    def hamiltonian(self, spin: str, kinetic: str = "spectral") -> HamiltonianMatrix:
        return build_hamiltonian(self.potential(spin), self.grid, kinetic=kinetic)

    def coherent_alpha(self, dx: float) -> float:
        """Coherent-state amplitude |alpha| = sqrt(m omega/(2 hbar)) * dx.

        In lattice units the effective mass is pi^2/2, so
        |alpha| = pi * U0(theta)^(1/4) * dx / sqrt(2).
        """
        m_eff = np.pi**2 / 2.0
        return float(np.sqrt(m_eff * self.homega / 2.0) * dx)

    def energy_hz(self, e_er: float) -> float:
        return e_er * self.recoil.hertz

    def energy_er(self, e_hz: float) -> float:
        return e_hz / self.recoil.hertz

    def time_us(self, t: float) -> float:
        """Dimensionless time (hbar/E_R) to microseconds."""
        return t * self.recoil.time_us_per_unit
