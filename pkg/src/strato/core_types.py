"""Grid geometry, scaling parameters, field containers, and checkpoint I/O.

Spatial representation on the slab T^2 x (0,1): Fourier modes in x1, x2 on
the periodic unit torus, a cosine series in z for scalar fields and the
horizontal velocity components, and a sine series in z for the vertical
component. Complete-slip walls at z = 0 and z = 1 (u3 = 0, zero tangential
stress) are then satisfied by the basis parity, with no penalty terms.

Fields are stored as node values of shape (nx, ny, nz + 1); vertical nodes
include both walls. All integrals are trapezoid collocation sums, exact for
products of two resolved basis functions, which is what makes the discrete
integration-by-parts identities (and hence the conservation monitors) hold
to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatch

DEFAULT_VACUUM_FLOOR = 1e-12

_CHECKPOINT_MAGIC = "STRATO1"


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless knobs of the scaling regime.

    epsilon is the common Mach = Froude number, nu the inverse Reynolds
    number; both may be swept independently. gamma is the adiabatic
    exponent of the pressure law p = (rho*Theta)^gamma, mu and lambda_bulk
    the shear/bulk viscosity coefficients inside the stress law, g the
    gravity magnitude in F = -g*z.
    """

    epsilon: float
    nu: float = 0.0
    gamma: float = 2.0
    mu: float = 1.0
    lambda_bulk: float = 0.0
    g: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.lambda_bulk < 0:
            raise ValueError(f"lambda_bulk must be >= 0, got {self.lambda_bulk}")
        if self.nu < 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")

    def satisfies_rate_hypothesis(self) -> bool:
        """gamma > 3/2, required by the quantitative convergence preset."""
        return self.gamma > 1.5

    def in_ill_prepared_regime(self) -> bool:
        """gamma > 3, the regime of the qualitative ill-prepared study."""
        return self.gamma > 3.0


class SlabGrid:
    """Collocation grid and transform machinery for the slab domain.

    nx, ny count horizontal collocation points (and Fourier modes) on the
    unit torus; nz counts vertical cells on (0,1), so fields carry nz + 1
    vertical nodes including both walls. All spectral derivatives zero the
    Nyquist mode, which makes them exactly skew-adjoint under the trapezoid
    quadrature.
    """

    def __init__(self, nx: int, ny: int, nz: int):
        for name, n in (("nx", nx), ("ny", ny), ("nz", nz)):
            if n < 4 or n % 2 != 0:
                raise ValueError(f"{name} must be even and >= 4, got {n}")
        self.nx, self.ny, self.nz = int(nx), int(ny), int(nz)
        self.shape = (self.nx, self.ny, self.nz + 1)
        self.x = (np.arange(self.nx) / self.nx).reshape(-1, 1, 1)
        self.y = (np.arange(self.ny) / self.ny).reshape(1, -1, 1)
        self.z = (np.arange(self.nz + 1) / self.nz).reshape(1, 1, -1)
        self.spacing = (1.0 / self.nx, 1.0 / self.ny, 1.0 / self.nz)

        kx = np.fft.fftfreq(self.nx, d=1.0 / self.nx)
        ky = np.fft.fftfreq(self.ny, d=1.0 / self.ny)
        # Derivative factors; Nyquist columns are zeroed for exact skewness.
        dkx = 2j * np.pi * kx
        dky = 2j * np.pi * ky
        dkx[self.nx // 2] = 0.0
        dky[self.ny // 2] = 0.0
        self.kx_int = kx
        self.ky_int = ky
        self._dkx = dkx.reshape(-1, 1, 1)
        self._dky = dky.reshape(1, -1, 1)
        # |k|^2 with the 2*pi scaling, used by Laplacians and mode solves.
        self.k2h = ((2 * np.pi * kx) ** 2).reshape(-1, 1, 1) + (
            (2 * np.pi * ky) ** 2
        ).reshape(1, -1, 1)
        # Effective |k|^2 of the composed first-derivative operators, whose
        # Nyquist columns vanish; per-mode solves must use this one so that
        # they invert exactly the collocation div/grad compositions.
        self.k2h_mode = (-(self._dkx**2 + self._dky**2)).real
        # real-transform (rfft) variants: half-width in ky
        nyr = self.ny // 2 + 1
        self._rdky = self._dky.reshape(-1)[:nyr].reshape(1, -1, 1)
        self.rk2h = self.k2h[:, :nyr, :].copy()
        self.rk2h_mode = (-(self._dkx**2 + self._rdky**2)).real

        wz = np.full(self.nz + 1, 1.0 / self.nz)
        wz[0] *= 0.5
        wz[-1] *= 0.5
        self.wz = wz
        self._wvol = wz.reshape(1, 1, -1) / (self.nx * self.ny)
        m = np.arange(self.nz + 1)
        self.mz = m  # vertical cosine mode numbers 0..nz

    # -- bookkeeping -------------------------------------------------------

    def same_as(self, other: "SlabGrid") -> bool:
        return (self.nx, self.ny, self.nz) == (other.nx, other.ny, other.nz)

    def check_field(self, f: np.ndarray, name: str = "field") -> None:
        if f.shape[-3:] != self.shape:
            raise GridMismatch(f"{name} has shape {f.shape}, expected {self.shape}")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def vector_zeros(self) -> np.ndarray:
        return np.zeros((3,) + self.shape)

    # -- quadrature --------------------------------------------------------

    def integral(self, f: np.ndarray) -> float:
        """Trapezoid collocation integral over the slab."""
        return float(np.sum(f * self._wvol))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return self.integral(f * g)

    # -- horizontal spectral operations -------------------------------------

    def hfft(self, f: np.ndarray) -> np.ndarray:
        """Real-input horizontal transform (rfft: half-width in ky)."""
        return sfft.rfft2(f, axes=(-3, -2))

    def hifft(self, fh: np.ndarray) -> np.ndarray:
        return sfft.irfft2(fh, s=(self.nx, self.ny), axes=(-3, -2))

    def dx(self, f: np.ndarray) -> np.ndarray:
        return self.hifft(self.hfft(f) * self._dkx)

    def dy(self, f: np.ndarray) -> np.ndarray:
        return self.hifft(self.hfft(f) * self._rdky)

    def grad_h(self, f: np.ndarray) -> np.ndarray:
        """Both horizontal derivatives from one forward transform."""
        fh = self.hfft(f)
        return self.hifft(np.stack([fh * self._dkx, fh * self._rdky]))

    def laplacian_h(self, f: np.ndarray) -> np.ndarray:
        return self.hifft(self.hfft(f) * (-self.rk2h))

    # -- vertical spectral operations ---------------------------------------

    def cos_coeffs(self, f: np.ndarray) -> np.ndarray:
        """Node values -> coefficients a_m of sum a_m cos(m*pi*z)."""
        c = sfft.dct(f, type=1, axis=-1) / (2 * self.nz)
        c[..., 1:-1] *= 2.0
        return c

    def cos_values(self, a: np.ndarray) -> np.ndarray:
        c = a.copy()
        c[..., 1:-1] *= 0.5
        return sfft.dct(c, type=1, axis=-1)

    def sin_coeffs(self, f: np.ndarray) -> np.ndarray:
        """Node values (walls ignored) -> b_k of sum b_k sin(k*pi*z)."""
        return sfft.dst(f[..., 1:-1], type=1, axis=-1) / self.nz

    def sin_values(self, b: np.ndarray) -> np.ndarray:
        out = np.zeros(b.shape[:-1] + (self.nz + 1,))
        out[..., 1:-1] = sfft.dst(b, type=1, axis=-1) / 2.0
        return out

    def dz_cos(self, f: np.ndarray) -> np.ndarray:
        """d/dz of a cosine-parity field; result has sine parity."""
        a = self.cos_coeffs(f)
        k = np.arange(1, self.nz)
        b = -(k * np.pi) * a[..., 1:-1]
        return self.sin_values(b)

    def dz_sin(self, f: np.ndarray) -> np.ndarray:
        """d/dz of a sine-parity field; result has cosine parity."""
        b = self.sin_coeffs(f)
        k = np.arange(1, self.nz)
        a = np.zeros(f.shape[:-1] + (self.nz + 1,))
        a[..., 1:-1] = (k * np.pi) * b
        return self.cos_values(a)

    def sine_restrict(self, f: np.ndarray) -> np.ndarray:
        """Restrict a vertical-component forcing to the sine subspace.

        Collocation in sine space is defined by the interior nodes, so the
        restriction just drops the wall values.
        """
        out = f.copy()
        out[..., 0] = 0.0
        out[..., -1] = 0.0
        return out

    # -- composite operators -------------------------------------------------

    def div(self, vec: np.ndarray) -> np.ndarray:
        """Divergence of an admissible vector (v3 in sine parity)."""
        fh = self.hfft(vec[:2])
        horiz = self.hifft(fh[0] * self._dkx + fh[1] * self._rdky)
        return horiz + self.dz_sin(vec[2])

    def grad_cos(self, f: np.ndarray) -> np.ndarray:
        """Gradient of a cosine-parity scalar; third component sine parity."""
        hor = self.grad_h(f)
        return np.stack([hor[0], hor[1], self.dz_cos(f)])


def is_boundary_admissible(vec: np.ndarray, tol: float = 0.0) -> bool:
    """True when the vertical component vanishes on both walls."""
    worst = max(np.abs(vec[2][..., 0]).max(), np.abs(vec[2][..., -1]).max())
    return worst <= tol


@dataclass
class PrimitiveState:
    """Conservative fields (rho, rho*u, rho*Theta) on the slab grid."""

    rho: np.ndarray
    mom: np.ndarray  # shape (3, nx, ny, nz+1); mom[2] has sine parity
    rho_theta: np.ndarray
    time: float = 0.0

    def copy(self) -> "PrimitiveState":
        return PrimitiveState(
            self.rho.copy(), self.mom.copy(), self.rho_theta.copy(), self.time
        )

    def velocity(self, floor: float = DEFAULT_VACUUM_FLOOR) -> np.ndarray:
        return self.mom / np.maximum(self.rho, floor)


@dataclass
class AnelasticState:
    """Constrained velocity, transported temperature variation, pressure."""

    v: np.ndarray  # shape (3, nx, ny, nz+1); v[2] has sine parity
    t_pert: np.ndarray
    pi: np.ndarray
    time: float = 0.0

    def copy(self) -> "AnelasticState":
        return AnelasticState(self.v.copy(), self.t_pert.copy(), self.pi.copy(), self.time)


def reconstruct_theta(
    state: PrimitiveState, floor: float = DEFAULT_VACUUM_FLOOR
) -> np.ndarray:
    """Potential temperature rho_theta/rho, set to 1 where rho < floor.

    Total by the vacuum convention: on the (hypothetical) vacuum set the
    value 1 is returned instead of dividing.
    """
    if not floor > 0:
        raise ValueError("vacuum floor must be positive")
    safe = np.maximum(state.rho, floor)
    return np.where(state.rho >= floor, state.rho_theta / safe, 1.0)


def theta_perturbation(
    state: PrimitiveState, epsilon: float, floor: float = DEFAULT_VACUUM_FLOOR
) -> np.ndarray:
    """(Theta - 1)/epsilon^2 with the vacuum convention (0 on vacuum)."""
    return (reconstruct_theta(state, floor) - 1.0) / epsilon**2


def weighted_inner_product(u, w, profile) -> float:
    """<u, w>_H = integral of u * w * rho_tilde / c(rho_tilde)."""
    grid = profile.grid
    grid.check_field(np.asarray(u), "u")
    grid.check_field(np.asarray(w), "w")
    return grid.integral(u * w * profile.h_weight)


# -- checkpoint format ------------------------------------------------------
#
# One ASCII header line `STRATO1 nx ny nz nfields time`, then nfields blocks
# of little-endian float64 in z-major order (z slowest, then y, then x).
# Values round-trip bit exactly; the header's time uses repr.


def write_checkpoint(path, grid: SlabGrid, fields, time: float) -> None:
    """Write named fields (an ordered mapping name -> array) to disk."""
    arrays = list(fields.values())
    with open(path, "wb") as fh:
        header = f"{_CHECKPOINT_MAGIC} {grid.nx} {grid.ny} {grid.nz} {len(arrays)} {time!r}\n"
        fh.write(header.encode("ascii"))
        for arr in arrays:
            grid.check_field(arr, "checkpoint field")
            fh.write(np.ascontiguousarray(arr.transpose(2, 1, 0)).astype("<f8").tobytes())


def read_checkpoint(path):
    """Read a checkpoint; returns (grid, time, list of arrays)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if not header or header[0] != _CHECKPOINT_MAGIC:
            raise ValueError(f"not a {_CHECKPOINT_MAGIC} checkpoint: {path}")
        nx, ny, nz, nfields = (int(t) for t in header[1:5])
        time = float(header[5])
        grid = SlabGrid(nx, ny, nz)
        count = nx * ny * (nz + 1)
        arrays = []
        for _ in range(nfields):
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"truncated checkpoint: {path}")
            flat = np.frombuffer(raw, dtype="<f8")
            arrays.append(flat.reshape(nz + 1, ny, nx).transpose(2, 1, 0).copy())
    return grid, time, arrays
