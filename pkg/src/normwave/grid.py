"""Periodic Fourier collocation grids in one and two dimensions.

Fields are plain real ``numpy`` arrays of shape ``grid.shape``.  Derivatives
use the ``exp(i k x)`` convention with ``k = 2*pi*m/L``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridMismatch(ValueError):
    """A field does not live on the grid it is used with."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid on ``[-L/2, L/2)^d``.

    :param dim: spatial dimension, 1 or 2
    :param n: points per axis (power of two, at least 64)
    :param length: box length per axis
    :param dealias: apply the 2/3 rule to the pointwise nonlinearity
    """

    dim: int
    n: int
    length: float
    dealias: bool = False
    _k: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not _is_power_of_two(self.n) or self.n < 64:
            raise ValueError(f"n must be a power of two >= 64, got {self.n}")
        if not self.length > 0:
            raise ValueError("box length must be positive")
        k1 = 2 * np.pi * np.fft.fftfreq(self.n, d=self.length / self.n)
        if self.dim == 1:
            ks = (k1,)
        else:
            ks = (k1[:, None] * np.ones((1, self.n)), np.ones((self.n, 1)) * k1[None, :])
        for k in ks:
            k.setflags(write=False)
        object.__setattr__(self, "_k", ks)

    @classmethod
    def default(cls, dim: int = 1, n: int | None = None) -> "SpectralGrid":
        if dim == 1:
            return cls(1, n or 512, 80.0)
        return cls(2, n or 64, 40.0)

    # geometry ----------------------------------------------------------
    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n ** self.dim

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def quad_weight(self) -> float:
        return self.h ** self.dim

    @property
    def x1(self) -> np.ndarray:
        """1D coordinate array, ``-L/2 + j*h``."""
        return -0.5 * self.length + self.h * np.arange(self.n)

    def coords(self) -> tuple:
        """Coordinate arrays broadcast to ``shape`` (``indexing='ij'``)."""
        if self.dim == 1:
            return (self.x1,)
        return tuple(np.meshgrid(self.x1, self.x1, indexing="ij"))

    @property
    def wavenumbers(self) -> tuple:
        """Per-axis wavenumber arrays, each of shape ``shape``, FFT ordering."""
        return self._k

    @property
    def k_squared(self) -> np.ndarray:
        return sum(k * k for k in self._k)

    @property
    def k_max(self) -> float:
        return np.pi * self.n / self.length

    def nyquist_mask(self, axis: int) -> np.ndarray:
        """True on the Nyquist plane of ``axis``."""
        idx = np.zeros(self.shape, dtype=bool)
        sl = [slice(None)] * self.dim
        sl[axis] = self.n // 2
        idx[tuple(sl)] = True
        return idx

    def dealias_mask(self) -> np.ndarray:
        keep = np.ones(self.shape, dtype=bool)
        cut = self.k_max * 2.0 / 3.0
        for k in self._k:
            keep &= np.abs(k) < cut
        return keep

    # transforms --------------------------------------------------------
    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridMismatch(f"field shape {f.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("field contains non-finite samples")
        return f

    def fft(self, f: np.ndarray) -> np.ndarray:
        return np.fft.fftn(f)

    def ifft(self, fh: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(fh).real

    def apply_symbol(self, symbol: np.ndarray, f: np.ndarray) -> np.ndarray:
        """Multiply by a real, even Fourier symbol."""
        return self.ifft(symbol * self.fft(f))

    def derivative_symbol(self, order) -> np.ndarray:
        order = (order,) if np.isscalar(order) else tuple(order)
        if len(order) != self.dim:
            raise ValueError(f"multi-index {order} does not match dim={self.dim}")
        if any(o < 0 for o in order) or sum(order) > 4:
            raise ValueError("derivative order components must be >= 0 with total <= 4")
        sym = np.ones(self.shape, dtype=complex)
        for axis, (o, k) in enumerate(zip(order, self._k)):
            if o == 0:
                continue
            factor = (1j * k) ** o
            if o % 2 == 1:
                factor = np.where(self.nyquist_mask(axis), 0.0, factor)
            sym = sym * factor
        return sym

    def derivative(self, f: np.ndarray, order) -> np.ndarray:
        f = self.check(f)
        return self.ifft(self.derivative_symbol(order) * self.fft(f))

    def gradient(self, f: np.ndarray) -> list:
        f = self.check(f)
        return [self.derivative(f, tuple(int(i == a) for i in range(self.dim)))
                for a in range(self.dim)]

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.apply_symbol(-self.k_squared, self.check(f))

    # quadrature --------------------------------------------------------
    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        f, g = self.check(f), self.check(g)
        return float(self.quad_weight * np.sum(f * g))

    def lp_norm(self, f: np.ndarray, q: float) -> float:
        if q < 1:
            raise ValueError(f"lp_norm needs q >= 1, got {q}")
        f = self.check(f)
        return float((self.quad_weight * np.sum(np.abs(f) ** q)) ** (1.0 / q))

    def mass(self, f: np.ndarray) -> float:
        """Squared L2 norm."""
        return self.inner(f, f)

    def spectral_mass(self, f: np.ndarray) -> float:
        """Squared L2 norm computed from Fourier coefficients (Parseval)."""
        fh = self.fft(self.check(f))
        return float(self.quad_weight * np.sum(np.abs(fh) ** 2) / self.size)

    def quadratic_form(self, symbol: np.ndarray, f: np.ndarray) -> float:
        """``<S f, f>`` evaluated on Fourier coefficients."""
        fh = self.fft(self.check(f))
        return float(self.quad_weight * np.sum(symbol * np.abs(fh) ** 2) / self.size)
