"""Uniform cubic velocity grid: quadrature, differences, kernel convolutions.

Every other module works on fields sampled at the cell centers of this grid.
Two structural choices matter downstream:

* The derivative stencil ``D`` (second-order central in the interior,
  second-order one-sided at the two boundary layers) is exact on quadratic
  polynomials, and the divergence is defined as its exact negative adjoint
  under the midpoint inner product.  Rows of ``D`` sum to zero, so the
  discrete integral of any divergence vanishes identically; quadratic
  exactness makes the gradients of ``v_k`` and ``|v|^2`` node-exact.  The
  conservative flux construction in the collision module leans on both.
* Convolutions against the interaction kernels are whole-space sums, not
  periodic ones.  The fast path embeds the grid in a zero-padded cube of
  twice the side length, where circular convolution reproduces the direct
  double sum exactly (offsets ``i - j`` never wrap).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from . import _fastfft
from .errors import AliasingRisk, InvalidGrid, PauliViolation

_FFT_WORKERS = -1  # let pocketfft use all cores


def stencil_matrix(n: int, h: float) -> np.ndarray:
    """One-dimensional first-derivative matrix, exact on quadratics."""
    D = np.zeros((n, n))
    D[0, :3] = (-1.5, 2.0, -0.5)
    D[-1, -3:] = (0.5, -2.0, 1.5)
    rows = np.arange(1, n - 1)
    D[rows, rows - 1] = -0.5
    D[rows, rows + 1] = 0.5
    return D / h


def _apply_matrix(M: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(M, np.moveaxis(values, axis, 0), axes=(1, 0))
    return np.moveaxis(out, 0, axis)


class VelocityGrid:
    """Cell-centered cubic lattice on [-v_max, v_max)^3.

    Nodes per axis sit at v_k = -v_max + (k + 1/2) h with h = 2 v_max / n.
    """

    def __init__(self, n_per_axis: int, v_max: float):
        if n_per_axis < 8 or n_per_axis % 2 != 0:
            raise InvalidGrid(
                f"n_per_axis must be even and >= 8, got {n_per_axis}")
        if not np.isfinite(v_max) or v_max <= 0:
            raise InvalidGrid(f"v_max must be positive, got {v_max}")
        self.n = int(n_per_axis)
        self.v_max = float(v_max)
        self.h = 2.0 * self.v_max / self.n
        self.axis = -self.v_max + (np.arange(self.n) + 0.5) * self.h
        self.vx, self.vy, self.vz = np.meshgrid(
            self.axis, self.axis, self.axis, indexing="ij")
        self.v2 = self.vx**2 + self.vy**2 + self.vz**2
        self.vnorm = np.sqrt(self.v2)
        self.bracket2 = 1.0 + self.v2          # <v>^2
        self._D = stencil_matrix(self.n, self.h)
        self._DT = self._D.T.copy()
        # nodes within 2h of the cube boundary, for the aliasing check
        edge = self.v_max - 2.0 * self.h
        self.boundary_mask = (
            (np.abs(self.vx) > edge)
            | (np.abs(self.vy) > edge)
            | (np.abs(self.vz) > edge))
        self._convolvers: dict = {}

    # -- quadrature ---------------------------------------------------------

    @property
    def cell_volume(self) -> float:
        return self.h**3

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def n_nodes(self) -> int:
        return self.n**3

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape (n^3, 3)."""
        return np.stack(
            [self.vx.ravel(), self.vy.ravel(), self.vz.ravel()], axis=1)

    def integrate(self, values: np.ndarray, weight=None) -> float:
        """Midpoint quadrature h^3 sum_i weight(v_i) values_i."""
        integrand = values if weight is None else values * weight
        total = float(np.sum(integrand)) * self.cell_volume
        if not np.isfinite(total):
            raise ValueError("non-finite quadrature value")
        return total

    def invariant_basis(self) -> np.ndarray:
        """Rows (1, vx, vy, vz, |v|^2) as flat vectors, cached."""
        basis = getattr(self, "_inv_basis", None)
        if basis is None:
            basis = np.stack([
                np.ones(self.vx.size), self.vx.ravel(), self.vy.ravel(),
                self.vz.ravel(), self.v2.ravel()])
            self._inv_basis = basis
        return basis

    def moments5(self, values: np.ndarray) -> np.ndarray:
        """Integrals against the collision invariants (1, v, |v|^2)."""
        return self.invariant_basis() @ values.ravel() * self.cell_volume

    # -- differences --------------------------------------------------------

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Discrete gradient, shape (3, n, n, n)."""
        return np.stack(
            [_apply_matrix(self._D, values, k) for k in range(3)])

    def divergence(self, flux: np.ndarray) -> np.ndarray:
        """Exact negative adjoint of :meth:`gradient`.

        Satisfies <grad u, F> + <u, div F> = 0 identically, and
        integrate(div F) = 0 for any flux F.
        """
        out = -_apply_matrix(self._DT, flux[0], 0)
        out -= _apply_matrix(self._DT, flux[1], 1)
        out -= _apply_matrix(self._DT, flux[2], 2)
        return out

    # -- convolution --------------------------------------------------------

    def convolver(self, gamma: float) -> "Convolver":
        key = float(gamma)
        if key not in self._convolvers:
            self._convolvers[key] = Convolver(self, key)
        return self._convolvers[key]

    def check_aliasing(self, values: np.ndarray) -> None:
        total = float(np.sum(np.abs(values)))
        if total == 0.0:
            return
        near = float(np.sum(np.abs(values[self.boundary_mask])))
        if near > 1e-6 * total:
            warnings.warn(
                f"mass fraction {near / total:.2e} within 2h of the grid "
                "boundary; convolution tails may be truncated",
                AliasingRisk, stacklevel=3)

    def __repr__(self):
        return f"VelocityGrid(n={self.n}, v_max={self.v_max})"


def build_grid(n_per_axis: int, v_max: float) -> VelocityGrid:
    """Validate and build a cell-centered velocity grid."""
    return VelocityGrid(n_per_axis, v_max)


class DistributionField:
    """Grid-sampled density with the ceiling 1/eps it must respect."""

    def __init__(self, grid: VelocityGrid, values: np.ndarray, eps: float):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        vmin = float(values.min())
        if vmin < -1e-12 * max(1.0, float(values.max())):
            raise ValueError(f"field has negative values (min {vmin:.3e})")
        if eps > 0:
            ceiling = 1.0 / eps
            if float(values.max()) > ceiling + 1e-12:
                raise PauliViolation(
                    f"max f = {values.max():.6e} exceeds 1/eps = {ceiling:.6e}")
        self.grid = grid
        self.values = np.clip(values, 0.0, None)
        self.eps = float(eps)

    @classmethod
    def _wrap(cls, grid: VelocityGrid, values: np.ndarray, eps: float):
        # internal fast path: caller guarantees values are already admissible
        # (just clipped into [0, 1/eps]); skips validation and the copy
        obj = cls.__new__(cls)
        obj.grid = grid
        obj.values = values
        obj.eps = float(eps)
        return obj

    @property
    def ceiling(self) -> float:
        return np.inf if self.eps == 0 else 1.0 / self.eps

    def saturation(self) -> np.ndarray:
        """Pauli factor 1 - eps f, clipped to [0, 1]."""
        return np.clip(1.0 - self.eps * self.values, 0.0, 1.0)

    def mass(self) -> float:
        return self.grid.integrate(self.values)

    def __repr__(self):
        return (f"DistributionField(n={self.grid.n}, eps={self.eps}, "
                f"mass={self.mass():.6g})")


# -- interaction kernels ----------------------------------------------------

def kernel_tensor(z: np.ndarray, gamma: float) -> np.ndarray:
    """Matrix kernel |z|^(gamma+2) (Id - z z^T / |z|^2), zero at z = 0.

    Written as |z|^gamma (|z|^2 Id - z z^T) so the origin needs no special
    case for gamma > 0; numpy's 0^0 = 1 gives the documented gamma = 0
    convention for free.
    """
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    rg = r2 ** (gamma / 2.0)
    eye = np.eye(3)
    a = rg[..., None, None] * (
        r2[..., None, None] * eye - z[..., :, None] * z[..., None, :])
    return a


def kernel_drift(z: np.ndarray, gamma: float) -> np.ndarray:
    """Vector kernel -2 z |z|^gamma (the divergence of the matrix kernel)."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    return -2.0 * z * (r2 ** (gamma / 2.0))[..., None]

def kernel_scalar(z: np.ndarray, gamma: float) -> np.ndarray:
    """Scalar kernel -2 (gamma + 3) |z|^gamma; equals -6 at z = 0 if gamma = 0."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    return -2.0 * (gamma + 3.0) * r2 ** (gamma / 2.0)


_SYM = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]


class Convolver:
    """Whole-space convolutions against the interaction kernels.

    Fast path: zero-pad to 2n per axis and multiply in Fourier space; for
    fields supported on the original cube this reproduces the direct double
    sum exactly because offsets i - j lie strictly inside (-n, n).  Direct
    path: chunked O(N^2) summation, kept as the reference implementation.
    """

    def __init__(self, grid: VelocityGrid, gamma: float):
        self.grid = grid
        self.gamma = float(gamma)
        n = grid.n
        self.npad = 2 * n
        k = np.arange(self.npad)
        off = grid.h * (((k + n) % self.npad) - n)
        self._ox = off[:, None, None]
        self._oy = off[None, :, None]
        self._oz = off[None, None, :]
        self._r2 = self._ox**2 + self._oy**2 + self._oz**2
        self._hats: dict = {}

    # kernel blocks on the padded offset cube, Fourier transformed once

    def _hat(self, key):
        if key in self._hats:
            return self._hats[key]
        g = self.gamma
        rg = self._r2 ** (g / 2.0)
        ox, oy, oz = self._ox, self._oy, self._oz
        if key == "a":
            comps = []
            zs = (ox, oy, oz)
            for i, j in _SYM:
                if i == j:
                    block = rg * (self._r2 - zs[i] * zs[i])
                else:
                    block = rg * (-zs[i] * zs[j])
                comps.append(block)
            block = np.stack(comps)
        elif key == "b":
            block = np.stack([-2.0 * ox * rg, -2.0 * oy * rg, -2.0 * oz * rg])
        elif key == "c":
            block = (-2.0 * (g + 3.0) * rg)[None]
        elif isinstance(key, tuple) and key[0] == "pow":
            block = (self._r2 ** (key[1] / 2.0))[None]
        else:
            raise KeyError(key)
        hat = scipy.fft.rfftn(block, axes=(-3, -2, -1), workers=_FFT_WORKERS)
        if key != "b":
            # even kernels have real spectra; drop the roundoff imaginary
            # part (halves the traffic of the spectral products)
            hat = np.ascontiguousarray(hat.real)
        self._hats[key] = hat
        return hat

    def forward(self, fields: np.ndarray) -> np.ndarray:
        """Transform of the zero-padded fields; fields shape (..., n, n, n).

        Axis-by-axis with the pad applied per axis, so the empty half of the
        cube is never transformed (the input occupies one octant of the
        padded cube and only that octant of the output survives the crop).
        """
        P = self.npad
        h = scipy.fft.rfft(fields, n=P, axis=-1, workers=_FFT_WORKERS)
        h = scipy.fft.fft(h, n=P, axis=-2, workers=_FFT_WORKERS)
        return scipy.fft.fft(h, n=P, axis=-3, workers=_FFT_WORKERS)

    def inverse(self, hats: np.ndarray) -> np.ndarray:
        n = self.grid.n
        P = self.npad
        g = scipy.fft.ifft(hats, axis=-3, workers=_FFT_WORKERS)[..., :n, :, :]
        g = scipy.fft.ifft(g, axis=-2, workers=_FFT_WORKERS)[..., :, :n, :]
        g = scipy.fft.irfft(g, n=P, axis=-1, workers=_FFT_WORKERS)[..., :n]
        return g * self.grid.cell_volume

    def pair_blocks(self, w: np.ndarray, u: np.ndarray) -> tuple:
        """T = a * w (sym-6) and G = a * (w u) in one fused spectral pass.

        Hot path for the collision flux: one batched forward transform of
        the four input fields and one batched inverse of the nine outputs,
        through FFTW when the system library is present.
        """
        n = self.grid.n
        P = self.npad
        if not hasattr(self, "_stack4"):
            self._stack4 = np.empty((4, n, n, n))
            self._spec1 = np.empty((P, P, P // 2 + 1), dtype=complex)
            self._plans = _fastfft.get_plans(n, P)
            if self._plans is None:
                self._spec9 = np.empty((9, P, P, P // 2 + 1), dtype=complex)
        self._stack4[0] = w
        np.multiply(w, u, out=self._stack4[1:])
        plans = self._plans
        if plans is not None:
            hat = plans.forward4(self._stack4)
            out = plans.iin
        else:
            hat = self.forward(self._stack4)
            out = self._spec9
        ah = self._hat("a")
        tmp = self._spec1
        np.multiply(ah, hat[0], out=out[:6])
        # drift rows contract the symmetric kernel against the vector field
        for k, (i, j, l) in enumerate(((0, 3, 4), (3, 1, 5), (4, 5, 2))):
            np.multiply(ah[i], hat[1], out=out[6 + k])
            np.multiply(ah[j], hat[2], out=tmp)
            out[6 + k] += tmp
            np.multiply(ah[l], hat[3], out=tmp)
            out[6 + k] += tmp
        if plans is not None:
            phys = plans.inverse9(self.grid.cell_volume / P ** 3)
        else:
            phys = self.inverse(out)
        return phys[:6], phys[6:]

    @staticmethod
    def expand_sym(six: np.ndarray) -> np.ndarray:
        """(6, ...) symmetric components to a full (3, 3, ...) tensor."""
        full = np.empty((3, 3) + six.shape[1:])
        for k, (i, j) in enumerate(_SYM):
            full[i, j] = six[k]
            full[j, i] = six[k]
        return full

    # -- public operations --------------------------------------------------

    def tensor(self, g: np.ndarray, method: str = "fft") -> np.ndarray:
        """a * g in symmetric 6-row form (xx, yy, zz, xy, xz, yz).

        Use expand_sym for the full (3, 3, n, n, n) layout.
        """
        self.grid.check_aliasing(g)
        if method == "fft":
            ghat = self.forward(g)
            return self.inverse(self._hat("a") * ghat)
        return self._direct(g, "a")

    def tensor_dot(self, w: np.ndarray, method: str = "fft") -> np.ndarray:
        """sum_l a_kl * w_l for a vector field w, shape (3, n, n, n).

        This is the convolution form of the drift term: a * grad f equals
        b * f for fields vanishing at infinity.
        """
        self.grid.check_aliasing(np.abs(w).sum(axis=0))
        if method == "fft":
            what = self.forward(w)
            ahat = self._hat("a")
            # symmetric component order: xx yy zz xy xz yz
            out = np.stack([
                ahat[0] * what[0] + ahat[3] * what[1] + ahat[4] * what[2],
                ahat[3] * what[0] + ahat[1] * what[1] + ahat[5] * what[2],
                ahat[4] * what[0] + ahat[5] * what[1] + ahat[2] * what[2],
            ])
            return self.inverse(out)
        full = np.zeros((3,) + self.grid.shape)
        for k, (i, j) in enumerate(_SYM):
            full[i] += self._direct(w[j], "a", comp_index=k)[0]
            if i != j:
                full[j] += self._direct(w[i], "a", comp_index=k)[0]
        return full

    def drift(self, f: np.ndarray, method: str = "fft") -> np.ndarray:
        """b * f, shape (3, n, n, n)."""
        self.grid.check_aliasing(f)
        if method == "fft":
            return self.inverse(self._hat("b") * self.forward(f))
        return self._direct(f, "b")

    def cfield(self, f: np.ndarray, method: str = "fft") -> np.ndarray:
        """c * f, scalar field."""
        self.grid.check_aliasing(f)
        if method == "fft":
            return self.inverse(self._hat("c") * self.forward(f))[0]
        return self._direct(f, "c")[0]

    def power(self, f: np.ndarray, p: float, method: str = "fft") -> np.ndarray:
        """|z|^p * f, scalar field."""
        self.grid.check_aliasing(f)
        if method == "fft":
            return self.inverse(self._hat(("pow", float(p))) * self.forward(f))[0]
        return self._direct(f, ("pow", float(p)))[0]

    # -- reference path -----------------------------------------------------

    def _direct(self, g: np.ndarray, kind, comp_index=None,
                chunk: int = 256) -> np.ndarray:
        """Plain double sum (k * g)(v_i) = h^3 sum_j k(v_i - v_j) g_j."""
        grid = self.grid
        nodes = grid.nodes()
        gflat = np.asarray(g).ravel()
        N = nodes.shape[0]
        gamma = self.gamma
        if kind == "a" and comp_index is None:
            out = np.zeros((6, N))
        elif kind == "b":
            out = np.zeros((3, N))
        else:
            out = np.zeros((1, N))
        for start in range(0, N, chunk):
            sl = slice(start, min(start + chunk, N))
            z = nodes[sl, None, :] - nodes[None, :, :]
            r2 = np.einsum("ijk,ijk->ij", z, z)
            rg = r2 ** (gamma / 2.0)
            if kind == "a":
                for k, (i, j) in enumerate(_SYM):
                    if comp_index is not None and k != comp_index:
                        continue
                    if i == j:
                        ker = rg * (r2 - z[..., i] * z[..., i])
                    else:
                        ker = rg * (-z[..., i] * z[..., j])
                    row = ker @ gflat
                    if comp_index is not None:
                        out[0, sl] = row
                    else:
                        out[k, sl] = row
            elif kind == "b":
                for i in range(3):
                    out[i, sl] = (-2.0 * z[..., i] * rg) @ gflat
            elif kind == "c":
                out[0, sl] = (-2.0 * (gamma + 3.0) * rg) @ gflat
            else:
                p = kind[1]
                out[0, sl] = (r2 ** (p / 2.0)) @ gflat
        return out.reshape(out.shape[0], *grid.shape) * grid.cell_volume

def convolve(grid: VelocityGrid, kernel: str, values: np.ndarray,
             gamma: float = 1.0, p: float = 1.0,
             method: str = "fft") -> np.ndarray:
    """Convolve a field against one of the named interaction kernels.

    kernel is one of "a" (matrix), "b" (vector), "c" (scalar) or "power"
    (|z|^p).  Both evaluation paths agree to 1e-10 relative.
    """
    conv = grid.convolver(gamma)
    if kernel == "a":
        return Convolver.expand_sym(conv.tensor(values, method=method))
    if kernel == "b":
        return conv.drift(values, method=method)
    if kernel == "c":
        return conv.cfield(values, method=method)
    if kernel == "power":
        return conv.power(values, p, method=method)
    raise ValueError(f"unknown kernel {kernel!r}")
