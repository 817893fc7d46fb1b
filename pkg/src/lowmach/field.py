"""Periodic-torus grids, Fourier differentiation, dealiasing, Sobolev norms,
and the binary checkpoint container.

Fields live in physical space as float64 samples; spectra are transient.
Transform convention: forward unscaled, inverse divides by n**dim (numpy's
default), asserted by the round-trip test.  Grids and fields are immutable
after construction, and every operator here is a pure function, so
concurrent evaluation over disjoint fields is safe.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import AxisOutOfRange, CorruptCheckpoint, FormatVersionMismatch

TWO_PI = 2.0 * np.pi


class SpectralGrid:
    """Uniform periodic grid on [0, length)**dim with FFT machinery.

    n must be even and >= 8 (powers of two give the fastest transforms).
    The dealias mask zeroes every mode with any |k_i| > n/3 (2/3 rule).
    """

    def __init__(self, dim: int, n: int, length: float = TWO_PI):
        if dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
        if n < 8 or n % 2 != 0:
            raise ValueError(f"n must be even and >= 8, got {n}")
        if length <= 0:
            raise ValueError("length must be positive")
        self.dim = dim
        self.n = n
        self.length = float(length)
        self.shape = (n,) * dim
        self.dx = self.length / n
        self.volume = self.length**dim

        # Integer frequency tables, one broadcastable array per axis.
        freq = np.fft.fftfreq(n, d=1.0 / n)
        self.freq = []
        scale = TWO_PI / self.length
        self.wavenumbers = []
        for ax in range(dim):
            sh = [1] * dim
            sh[ax] = n
            f = freq.reshape(sh)
            self.freq.append(f)
            self.wavenumbers.append(scale * f)
        self.k2 = sum(k * k for k in self.wavenumbers)
        mask = np.ones(self.shape, dtype=bool)
        for f in self.freq:
            mask &= np.abs(f) <= n / 3.0
        self.dealias_mask = mask
        with np.errstate(divide="ignore"):
            inv_k2 = np.where(self.k2 > 0, 1.0 / np.where(self.k2 > 0, self.k2, 1.0), 0.0)
        self.inv_k2 = inv_k2

    # -- array-level spectral kernels (used by the solvers) -----------------

    def _axes(self):
        return tuple(range(-self.dim, 0))

    def fft(self, a):
        return np.fft.fftn(a, axes=self._axes())

    def ifft(self, ah):
        return np.fft.ifftn(ah, axes=self._axes()).real

    def deriv(self, a, axis: int):
        if not 0 <= axis < self.dim:
            raise AxisOutOfRange(f"axis {axis} on a {self.dim}-D grid")
        return self.ifft(1j * self.wavenumbers[axis] * self.fft(a))

    def grad(self, a):
        ah = self.fft(a)
        return np.stack([self.ifft(1j * k * ah) for k in self.wavenumbers])

    def div(self, vec):
        out = 0.0
        for ax in range(self.dim):
            out = out + self.ifft(1j * self.wavenumbers[ax] * self.fft(vec[ax]))
        return out

    def lap(self, a):
        return self.ifft(-self.k2 * self.fft(a))

    def inv_lap(self, a):
        """Mean-zero solution of lap(phi) = a (the k = 0 mode is dropped)."""
        return self.ifft(-self.inv_k2 * self.fft(a))

    def dealias(self, a):
        return self.ifft(self.dealias_mask * self.fft(a))

    def integrate(self, a):
        """Volume integral over the torus (trapezoid == exact for the
        trigonometric interpolant)."""
        return float(np.sum(a)) * self.dx**self.dim

    def l2_norm_sq(self, a):
        """Integral of |a|^2; leading axes (vector components) are summed."""
        return float(np.sum(np.asarray(a) ** 2)) * self.dx**self.dim

    def hs_norm_sq(self, a, s: int):
        """Squared H^s norm with multiplier sum_{j<=s} |k|^(2j).

        Equivalent to sum_{j<=s} of the squared Frobenius norms of the
        iterated gradient tensors; monotone in s.  Leading axes are summed.
        """
        if s < 0:
            raise ValueError("s must be >= 0")
        ah = self.fft(np.asarray(a, dtype=float))
        mult = np.ones(self.shape)
        if s > 0:
            k2j = np.ones(self.shape)
            for _ in range(s):
                k2j = k2j * self.k2
                mult = mult + k2j
        total = np.sum(mult * np.abs(ah) ** 2)
        # Parseval: sum |a|^2 dx^dim == sum |a_hat|^2 * volume / n^(2 dim)
        return float(total) * self.volume / self.n ** (2 * self.dim)

    def coordinates(self):
        x = np.arange(self.n) * self.dx
        return np.meshgrid(*([x] * self.dim), indexing="ij")

    def __eq__(self, other):
        return (isinstance(other, SpectralGrid)
                and self.dim == other.dim and self.n == other.n
                and self.length == other.length)

    def __hash__(self):
        return hash((self.dim, self.n, self.length))

    def __repr__(self):
        return f"SpectralGrid(dim={self.dim}, n={self.n}, length={self.length!r})"


@dataclass(frozen=True)
class ScalarField:
    grid: SpectralGrid
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"scalar samples {self.data.shape} do not match grid "
                f"{self.grid.shape}")


@dataclass(frozen=True)
class VectorField:
    grid: SpectralGrid
    data: np.ndarray  # shape (dim, n, ..., n)

    def __post_init__(self):
        if self.data.shape != (self.grid.dim,) + self.grid.shape:
            raise ValueError(
                f"vector samples {self.data.shape} do not match grid "
                f"(dim, {self.grid.shape})")


def ddx(f: ScalarField, axis: int) -> ScalarField:
    return ScalarField(f.grid, f.grid.deriv(f.data, axis))


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, f.grid.grad(f.data))


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, v.grid.div(v.data))


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.lap(f.data))


def inverse_laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.inv_lap(f.data))


def dealias(f):
    return type(f)(f.grid, f.grid.dealias(f.data))


def sobolev_norm(f, s: int) -> float:
    """H^s norm of a scalar or vector field (component norms summed in
    quadrature); s = 0 is the volume-normalised L^2 norm."""
    return float(np.sqrt(f.grid.hs_norm_sq(f.data, s)))


def integrate(f) -> float:
    return f.grid.integrate(f.data)


# ---------------------------------------------------------------------------
# Checkpoint container: structured-text header + raw little-endian float64
# arrays in a fixed field order (R, Q, u1..udim for flow states).

_MAGIC = "lowmach-checkpoint"
FORMAT_VERSION = 1
_END_HEADER = b"end_header\n"


def write_checkpoint(path, header: dict, fields: list):
    """Write named float64 arrays after a key = value text header.

    `header` values are written as canonical strings (floats at 17
    significant digits); `fields` is an ordered list of (name, array).
    Round-tripping through read_checkpoint reproduces the bytes exactly.
    """
    buf = io.BytesIO()
    buf.write(f"{_MAGIC} {FORMAT_VERSION}\n".encode())
    for key, value in header.items():
        buf.write(f"{key} = {format_value(value)}\n".encode())
    names = ",".join(name for name, _ in fields)
    count = fields[0][1].size if fields else 0
    buf.write(f"fields = {names}\n".encode())
    buf.write(f"points = {count}\n".encode())
    buf.write(_END_HEADER)
    for _, arr in fields:
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    data = buf.getvalue()
    with open(path, "wb") as fh:
        fh.write(data)


def read_checkpoint(path):
    """Inverse of write_checkpoint -> (header dict of strings, dict of
    1-D float64 arrays keyed by field name, in file order)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = raw.find(_END_HEADER)
    if sep < 0:
        raise CorruptCheckpoint(f"{path}: missing header terminator")
    head_lines = raw[:sep].decode(errors="replace").splitlines()
    if not head_lines:
        raise CorruptCheckpoint(f"{path}: empty header")
    magic = head_lines[0].split()
    if len(magic) != 2 or magic[0] != _MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic line {head_lines[0]!r}")
    if int(magic[1]) != FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"{path}: format version {magic[1]} (supported: {FORMAT_VERSION})")
    header = {}
    for line in head_lines[1:]:
        key, _, value = line.partition(" = ")
        if not _:
            raise CorruptCheckpoint(f"{path}: malformed header line {line!r}")
        header[key] = value
    if "fields" not in header or "points" not in header:
        raise CorruptCheckpoint(f"{path}: header lacks fields/points entries")
    # structural entries are consumed here, not returned, so that a
    # read -> write cycle reproduces the file bytes exactly
    names = [s for s in header.pop("fields").split(",") if s]
    count = int(header.pop("points"))
    body = raw[sep + len(_END_HEADER):]
    expected = 8 * count * len(names)
    if len(body) != expected:
        raise CorruptCheckpoint(
            f"{path}: payload is {len(body)} bytes, expected {expected}")
    arrays = {}
    for i, name in enumerate(names):
        arrays[name] = np.frombuffer(
            body, dtype="<f8", count=count, offset=8 * count * i).copy()
    return header, arrays


def format_value(value) -> str:
    """Canonical text form used in headers, reports and CSV output:
    decimal with 17 significant digits for floats."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)
