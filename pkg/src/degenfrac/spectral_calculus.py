"""Fourier multipliers on periodic grids.

The generators ``A_j = i d/dx_j`` act through their frequency-side symbols.
Signs are pinned so that ``d/dx_j`` has symbol ``i xi_j`` and the Laplacian
``-|xi|**2``; transforms are unitary (``norm="ortho"``).
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .errors import SymbolEvaluationError, UnresolvedSymbol, WrongSpace

PHYSICAL = "physical"
FREQUENCY = "frequency"
MAGIC = b"DFRC1"

SymbolFn = Callable[[np.ndarray], np.ndarray]


def thread_count() -> int:
    """Worker cap for transforms, from ``DEGENFRAC_THREADS`` (default 1)."""
    raw = os.environ.get("DEGENFRAC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _is_pow2(k: int) -> bool:
    return k >= 1 and k & (k - 1) == 0


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid; ``sizes`` are powers of two, ``extent`` the periods."""

    sizes: tuple[int, ...]
    extent: tuple[float, ...]

    def __init__(self, sizes, extent=None):
        sizes = tuple(int(s) for s in sizes)
        if extent is None:
            extent = (2 * np.pi,) * len(sizes)
        elif np.isscalar(extent):
            extent = (float(extent),) * len(sizes)
        extent = tuple(float(e) for e in extent)
        if not sizes:
            raise ValueError("a grid needs at least one axis")
        if len(extent) != len(sizes):
            raise ValueError("extent must have one entry per axis")
        for s in sizes:
            if s < 4 or not _is_pow2(s):
                raise ValueError(f"axis size {s} must be a power of two >= 4")
        if any(e <= 0 for e in extent):
            raise ValueError("extent must be positive")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "extent", extent)

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    def axis_frequencies(self, axis: int) -> np.ndarray:
        """Angular frequencies along one axis, in FFT order (Nyquist included, negative)."""
        size = self.sizes[axis]
        return 2 * np.pi / self.extent[axis] * np.fft.fftfreq(size, d=1.0 / size)

    def axis_coordinates(self, axis: int) -> np.ndarray:
        return self.extent[axis] / self.sizes[axis] * np.arange(self.sizes[axis])

    @property
    def freq_lattice(self) -> np.ndarray:
        """Frequency vectors, shape ``(*sizes, n)``, FFT ordering."""
        axes = np.meshgrid(*[self.axis_frequencies(k) for k in range(self.n)], indexing="ij")
        return np.stack(axes, axis=-1)

    @property
    def coordinates(self) -> np.ndarray:
        axes = np.meshgrid(*[self.axis_coordinates(k) for k in range(self.n)], indexing="ij")
        return np.stack(axes, axis=-1)

    def lattice_index(self, xi) -> tuple[int, ...]:
        """Index of the lattice frequency closest to ``xi``."""
        idx = []
        for k, v in enumerate(np.asarray(xi, dtype=float).reshape(self.n)):
            step = 2 * np.pi / self.extent[k]
            idx.append(int(round(v / step)) % self.sizes[k])
        return tuple(idx)


@dataclass(frozen=True)
class SpectralField:
    """``m`` complex components on a grid; ``data`` has shape ``(m, *grid.sizes)``."""

    grid: SpectralGrid
    data: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        if self.space not in (PHYSICAL, FREQUENCY):
            raise ValueError(f"unknown space {self.space!r}")
        data = np.asarray(self.data, dtype=complex)
        if data.shape == self.grid.sizes:
            data = data[None]
        if data.ndim != self.grid.n + 1 or data.shape[1:] != self.grid.sizes:
            raise ValueError(f"data shape {data.shape} does not fit grid {self.grid.sizes}")
        object.__setattr__(self, "data", data)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @classmethod
    def zeros(cls, grid: SpectralGrid, m: int = 1, space: str = PHYSICAL) -> "SpectralField":
        return cls(grid, np.zeros((m, *grid.sizes), dtype=complex), space)

    @classmethod
    def random(cls, grid: SpectralGrid, m: int, rng: np.random.Generator,
               space: str = PHYSICAL) -> "SpectralField":
        shape = (m, *grid.sizes)
        return cls(grid, rng.standard_normal(shape) + 1j * rng.standard_normal(shape), space)

    @classmethod
    def plane_wave(cls, grid: SpectralGrid, xi, amplitude=(1.0,)) -> "SpectralField":
        """``amplitude * exp(i xi . x)`` in physical space."""
        phase = np.exp(1j * grid.coordinates @ np.asarray(xi, dtype=float))
        amp = np.asarray(amplitude, dtype=complex).reshape((-1,) + (1,) * grid.n)
        return cls(grid, amp * phase[None], PHYSICAL)

    def norm(self, p: float = 2) -> float:
        return float(np.sum(np.abs(self.data) ** p) ** (1.0 / p))

    def with_data(self, data: np.ndarray, space: str | None = None) -> "SpectralField":
        return SpectralField(self.grid, data, self.space if space is None else space)


def _axes(grid: SpectralGrid) -> tuple[int, ...]:
    return tuple(range(1, grid.n + 1))


def transform(f: SpectralField, direction: str = "forward") -> SpectralField:
    """Unitary DFT (``forward``: physical to frequency) or its inverse."""
    if direction == "forward":
        if f.space != PHYSICAL:
            raise WrongSpace("forward transform expects a physical-space field")
        data = sfft.fftn(f.data, axes=_axes(f.grid), norm="ortho", workers=thread_count())
        return SpectralField(f.grid, data, FREQUENCY)
    if direction == "inverse":
        if f.space != FREQUENCY:
            raise WrongSpace("inverse transform expects a frequency-space field")
        data = sfft.ifftn(f.data, axes=_axes(f.grid), norm="ortho", workers=thread_count())
        return SpectralField(f.grid, data, PHYSICAL)
    raise ValueError(f"unknown direction {direction!r}")


def pointwise(fn: Callable[[np.ndarray], object]) -> SymbolFn:
    """Lift a per-frequency symbol ``fn(xi)`` to the batched calling convention."""

    def batched(xis: np.ndarray) -> np.ndarray:
        out = []
        for xi in xis:
            try:
                out.append(np.asarray(fn(xi), dtype=complex))
            except SymbolEvaluationError as exc:
                if exc.xi is None:
                    raise SymbolEvaluationError(str(exc), xi) from exc
                raise
        return np.stack(out)

    return batched


def evaluate_symbol(symbol: SymbolFn, grid: SpectralGrid, m: int) -> np.ndarray:
    """Symbol on the whole lattice as an array of shape ``(npoints, m, m)``.

    ``symbol`` receives every lattice frequency at once, shape ``(K, n)``, and
    returns ``(K,)`` (scalar multiple of the identity) or ``(K, m, m)``.
    """
    xis = grid.freq_lattice.reshape(-1, grid.n)
    vals = np.asarray(symbol(xis), dtype=complex)
    if vals.shape == (xis.shape[0],):
        with np.errstate(invalid="ignore"):
            vals = vals[:, None, None] * np.eye(m)
    if vals.shape != (xis.shape[0], m, m):
        raise ValueError(f"symbol returned shape {vals.shape}, expected {(xis.shape[0], m, m)}")
    bad = ~np.isfinite(vals).all(axis=(1, 2))
    if bad.any():
        k = int(np.argmax(bad))
        raise SymbolEvaluationError("symbol is not finite", xis[k])
    return vals


def apply_symbol_values(values: np.ndarray, f: SpectralField) -> SpectralField:
    """Multiply a frequency-space field by precomputed symbol values ``(npoints, m, m)``."""
    if f.space != FREQUENCY:
        raise WrongSpace("symbol values apply to frequency-space fields")
    flat = f.data.reshape(f.m, -1).T  # (npoints, m)
    out = np.einsum("kij,kj->ki", values, flat)
    return f.with_data(out.T.reshape(f.data.shape))


def apply_multiplier(symbol: SymbolFn, f: SpectralField) -> SpectralField:
    """``symbol(A) f``; physical inputs are transformed there and back."""
    if f.space == PHYSICAL:
        return transform(apply_multiplier(symbol, transform(f, "forward")), "inverse")
    return apply_symbol_values(evaluate_symbol(symbol, f.grid, f.m), f)


@dataclass(frozen=True)
class NormBoundReport:
    operator_norm: float
    kernel_l1: float
    ratio: float
    tail_mass: float
    p: float
    trials: int


def _outer_mask(grid: SpectralGrid) -> np.ndarray:
    """Grid points in the outer half of the periodic box (by each axis)."""
    masks = []
    for k in range(grid.n):
        idx = np.arange(grid.sizes[k])
        dist = np.minimum(idx, grid.sizes[k] - idx)
        masks.append(dist > grid.sizes[k] // 4)
    grids = np.meshgrid(*masks, indexing="ij")
    return np.logical_or.reduce(grids)


def l1_norm_bound_check(symbol: SymbolFn, grid: SpectralGrid, trials: int = 20,
                        p: float = 2, rng: np.random.Generator | None = None,
                        iterations: int = 30, tail_tol: float = 1e-6) -> NormBoundReport:
    """Compare the grid operator norm of a scalar multiplier with ``||F^{-1} s||_1``.

    The kernel is the discrete inverse transform of the symbol in the
    convolution normalisation, so ``||K * f||_p <= ||K||_1 ||f||_p`` on the
    grid.  For ``p = 2`` the norm is estimated by power iteration on
    ``T^* T`` from ``trials`` random starts; otherwise by the largest
    amplification over ``trials`` random fields.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    s = evaluate_symbol(symbol, grid, 1)[:, 0, 0].reshape(grid.sizes)
    kernel = sfft.ifftn(s, workers=thread_count())
    abs_k = np.abs(kernel)
    l1 = float(abs_k.sum())
    tail = float(abs_k[_outer_mask(grid)].sum() / l1) if l1 > 0 else 0.0
    if tail >= tail_tol:
        raise UnresolvedSymbol(f"kernel tail mass {tail:.3e} is not resolved by the grid")

    def apply(x):
        return sfft.ifftn(s * sfft.fftn(x, workers=thread_count()), workers=thread_count())

    best = 0.0
    for _ in range(trials):
        x = rng.standard_normal(grid.sizes) + 1j * rng.standard_normal(grid.sizes)
        if p == 2:
            x /= np.linalg.norm(x)
            for _ in range(iterations):
                y = sfft.ifftn(np.conj(s) * s * sfft.fftn(x))
                ny = np.linalg.norm(y)
                if ny == 0:
                    break
                x = y / ny
            amp = float(np.linalg.norm(apply(x)) / np.linalg.norm(x))
        else:
            amp = float(np.sum(np.abs(apply(x)) ** p) ** (1 / p) / np.sum(np.abs(x) ** p) ** (1 / p))
        best = max(best, amp)
    ratio = best / l1 if l1 > 0 else 0.0
    return NormBoundReport(best, l1, ratio, tail, p, trials)


def write_snapshot(f: SpectralField, target) -> None:
    """Binary snapshot: ``DFRC1``, n, sizes, m, space flag, then little-endian
    float64 ``(re, im)`` pairs in row-major ``(component, gridpoint)`` order."""
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", f.grid.n))
    buf.write(struct.pack(f"<{f.grid.n}I", *f.grid.sizes))
    buf.write(struct.pack("<I", f.m))
    buf.write(struct.pack("<B", 1 if f.space == FREQUENCY else 0))
    pairs = np.empty(f.data.size * 2, dtype="<f8")
    flat = np.ascontiguousarray(f.data).reshape(-1)
    pairs[0::2] = flat.real
    pairs[1::2] = flat.imag
    buf.write(pairs.tobytes())
    _emit(target, buf.getvalue(), binary=True)


def read_snapshot(source, extent=None) -> SpectralField:
    """Inverse of :func:`write_snapshot`; the format does not store the extent."""
    raw = source if isinstance(source, (bytes, bytearray)) else open(source, "rb").read()
    if raw[:5] != MAGIC:
        raise ValueError("not a DFRC1 snapshot")
    pos = 5
    (n,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    sizes = struct.unpack_from(f"<{n}I", raw, pos)
    pos += 4 * n
    (m,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    (flag,) = struct.unpack_from("<B", raw, pos)
    pos += 1
    count = m * int(np.prod(sizes))
    pairs = np.frombuffer(raw, dtype="<f8", count=2 * count, offset=pos)
    data = (pairs[0::2] + 1j * pairs[1::2]).reshape(m, *sizes)
    return SpectralField(SpectralGrid(sizes, extent), data, FREQUENCY if flag else PHYSICAL)


def snapshot_csv(f: SpectralField) -> str:
    """One row per grid point: coordinates (frequencies in frequency space),
    then ``re, im`` per component."""
    n = f.grid.n
    coords = (f.grid.freq_lattice if f.space == FREQUENCY else f.grid.coordinates).reshape(-1, n)
    flat = f.data.reshape(f.m, -1)
    head = [f"x{k}" for k in range(n)] + [c for j in range(f.m) for c in (f"re{j}", f"im{j}")]
    lines = [",".join(head)]
    for k in range(coords.shape[0]):
        cells = [repr(float(v)) for v in coords[k]]
        for j in range(f.m):
            cells += [repr(float(flat[j, k].real)), repr(float(flat[j, k].imag))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_csv(f: SpectralField, target) -> None:
    _emit(target, snapshot_csv(f).encode(), binary=True)


def _emit(target, payload: bytes, binary: bool) -> None:
    if hasattr(target, "write"):
        target.write(payload)
    else:
        with open(target, "wb") as fh:
            fh.write(payload)
