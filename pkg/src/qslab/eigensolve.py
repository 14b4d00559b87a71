"""Eigendecomposition of the lattice Hamiltonian and band structure.

The full-lattice problem is a dense real-symmetric eigenproblem solved with
LAPACK through numpy (deterministic for a fixed input).  Band energies use
the plane-wave reduction of a single site, where the cos^2 potential couples
only neighboring momentum components and the Bloch operator is tridiagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericError, ParameterError
from .model import KAPPA, HamiltonianMatrix, LatticeModel

ORTHO_TOL = 1e-10
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class EigenDecomposition:
    """Sorted eigenpairs of a real symmetric operator.

    energies are raw (E_R); ground_offset = energies[0] is the shift that
    downstream consumers subtract so the trap ground state sits at zero.
    """

    energies: np.ndarray
    modes: np.ndarray        # column k is the k-th eigenvector
    ground_offset: float

    def __post_init__(self):
        self.energies.flags.writeable = False
        self.modes.flags.writeable = False

    @property
    def size(self) -> int:
        return self.energies.size

    @property
    def referenced_energies(self) -> np.ndarray:
        """Energies with the ground state at zero."""
        return self.energies - self.ground_offset

    def validate(self, h) -> dict:
        """Residual and orthonormality errors, for assertion in tests."""
        matrix = h.matrix if isinstance(h, HamiltonianMatrix) else np.asarray(h, dtype=float)
        gram = self.modes.T @ self.modes
        ortho = float(np.abs(gram - np.eye(self.size)).max())
        resid = matrix @ self.modes - self.modes * self.energies
        scale = float(np.abs(self.energies).max())
        residual = float(np.linalg.norm(resid, axis=0).max()) / max(scale, 1.0)
        return {"orthonormality": ortho, "residual": residual, "norm_scale": scale}


def decompose(h) -> EigenDecomposition:
    """Full eigendecomposition, ascending energies.

    Accepts a HamiltonianMatrix or a plain real symmetric array.  LAPACK's
    symmetric solvers use no randomized pivoting, so repeated calls on the
    same matrix are bit-identical.
    """
    matrix = h.matrix if isinstance(h, HamiltonianMatrix) else np.asarray(h, dtype=float)
    try:
        energies, modes = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"symmetric eigensolver did not converge: {exc}") from exc
    return EigenDecomposition(energies=energies, modes=modes,
                              ground_offset=float(energies[0]))


def bound_level_count(model: LatticeModel) -> int:
    """Approximate number of bound levels, U0/(hbar omega_HO)."""
    return int(model.depth / model.homega)


def single_site_eigenstates(model: LatticeModel, count: int):
    """First `count` eigenpairs of one isolated site with periodic closure.

    The site spans one lattice period sampled on points_per_site points; the
    returned states are the initial wave packets for n = 0, 1, 2.

    Returns
    -------
    energies : (count,) array, E_R
    states : (P, count) array, orthonormal columns
    positions : (P,) site-local coordinates in lambda/2 units
    """
    if count < 1:
        raise ParameterError("count must be at least 1")
    if count > bound_level_count(model):
        raise ParameterError(
            f"count={count} exceeds the ~{bound_level_count(model)} bound levels "
            f"at depth {model.depth:.1f} E_R")
    p = model.params.points_per_site
    u = (np.arange(p) - p // 2) / p
    values = -model.depth * np.cos(np.pi * u) ** 2
    k = 2.0 * np.pi * np.fft.rfftfreq(p, d=1.0 / p)
    row = np.fft.irfft(KAPPA * k**2, n=p)
    mat = sla.circulant(row)
    mat = (mat + mat.T) / 2.0 + np.diag(values)
    energies, states = np.linalg.eigh(mat)
    return energies[:count], states[:, :count], u


@dataclass(frozen=True)
class BandStructure:
    """One Bloch band: E_n(q) over quasimomenta in (-pi, pi] per lattice constant."""

    band_index: int
    quasimomenta: np.ndarray
    energies: np.ndarray
    bandwidth: float

    def tunneling_time_s(self, recoil_hertz: float) -> float:
        """tau = 2 pi hbar / bandwidth, converted to seconds.

        The bandwidth-to-time map is a definition; the resulting magnitudes
        are only meaningful at order-of-magnitude level and are tested as such.
        """
        return 1.0 / (self.bandwidth * recoil_hertz)


def band_structure(model: LatticeModel, n_bands: int, q_points: int,
                   momentum_cutoff: int | None = None) -> list[BandStructure]:
    """Band energies from the plane-wave Bloch operator of a single site.

    In the basis exp(i (q + 2 pi m) u) the kinetic term is diagonal,
    kappa (q + 2 pi m)^2, and -U0 cos^2(pi u) = -U0/2 - (U0/4) (e^{2 i pi u} + c.c.)
    couples m to m +/- 1, so each q gives a real symmetric tridiagonal matrix.
    """
    if n_bands < 1:
        raise ParameterError("n_bands must be at least 1")
    if q_points < 2:
        raise ParameterError("q_points must be at least 2")
    m_cut = momentum_cutoff or max(model.params.points_per_site // 2, n_bands + 8)
    m = np.arange(-m_cut, m_cut + 1)
    off = -model.depth / 4.0 * np.ones(2 * m_cut)
    # include q = 0 and the zone edge q = pi exactly so cosine-like bands
    # report their full width
    q_grid = np.linspace(-np.pi, np.pi, q_points + 1)[1:]
    energies = np.empty((q_points, n_bands))
    for i, q in enumerate(q_grid):
        diag = KAPPA * (q + 2.0 * np.pi * m) ** 2 - model.depth / 2.0
        w = sla.eigvalsh_tridiagonal(diag, off)
        energies[i] = w[:n_bands]
    bands = []
    for b in range(n_bands):
        e_b = energies[:, b].copy()
        e_b.flags.writeable = False
        bands.append(BandStructure(band_index=b, quasimomenta=q_grid, energies=e_b,
                                   bandwidth=float(e_b.max() - e_b.min())))
    return bands
