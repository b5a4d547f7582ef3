"""Exact-covariance fractional Brownian motion sampling on uniform grids.

Two generators are provided and cross-validate each other:

* `sample_cholesky` — triangular factorization of the increment covariance;
  O(N^3), used as the exact reference.
* `sample_wood_chan` — circulant embedding of the stationary increment process
  (fractional Gaussian noise) diagonalized by the FFT; exact in distribution
  and O(N log N). See Wood & Chan (1994) and Dietrich & Newsam (1997).

Both are deterministic functions of (N, T, H, seed). Bit-identical output
across platforms is not promised for the FFT-backed generator; statistical
properties are.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "FbmPath",
    "MultiFbmPath",
    "FactorizationError",
    "CirculantEmbeddingError",
    "GENERATOR_CHOLESKY",
    "GENERATOR_WOOD_CHAN",
    "GENERATORS",
    "fbm_covariance",
    "fgn_autocovariance",
    "sample_cholesky",
    "sample_wood_chan",
    "sample_driver",
    "cholesky_increment_ensemble",
    "wood_chan_increment_ensemble",
    "write_driver_csv",
]

GENERATOR_CHOLESKY = "cholesky"
GENERATOR_WOOD_CHAN = "wood_chan"
GENERATORS = (GENERATOR_CHOLESKY, GENERATOR_WOOD_CHAN)

# Relative tolerance for circulant eigenvalues that are negative only through
# floating-point rounding; anything more negative triggers re-embedding.
_EIG_CLIP_REL = 1e-9
# Give up doubling the embedding once it exceeds 2^6 * N.
_MAX_EMBED_FACTOR = 64


class FactorizationError(RuntimeError):
    """Increment covariance was not numerically positive definite."""

    def __init__(self, message: str, pivot_index: int):
        super().__init__(message)
        self.pivot_index = pivot_index


class CirculantEmbeddingError(RuntimeError):
    """Circulant embedding stayed indefinite up to the maximum padding."""

    def __init__(self, message: str, min_eigenvalue: float, embedding_size: int):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.embedding_size = embedding_size


def _check_hurst(H: float) -> float:
    H = float(H)
    if not (0.0 < H < 1.0):
        raise ValueError(f"Hurst parameter must lie in ]0,1[, got {H!r}")
    return H


def fbm_covariance(s: float, t: float, H: float) -> float:
    """cov(B(s), B(t)) = (|s|^2H + |t|^2H - |t-s|^2H) / 2."""
    _check_hurst(H)
    two_h = 2.0 * H
    return 0.5 * (abs(s) ** two_h + abs(t) ** two_h - abs(t - s) ** two_h)


def fgn_autocovariance(k, H: float):
    """Autocovariance gamma(k) = (|k+1|^2H - 2|k|^2H + |k-1|^2H) / 2 of
    unit-grid fBm increments; vectorized over `k`."""
    _check_hurst(H)
    k = np.abs(np.asarray(k, dtype=float))
    two_h = 2.0 * H
    return 0.5 * ((k + 1.0) ** two_h - 2.0 * k ** two_h + np.abs(k - 1.0) ** two_h)


# ---------------------------------------------------------------------------
# Path containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FbmPath:
    """One sampled fBm path on a uniform grid starting at (0, 0)."""

    hurst_H: float
    grid: np.ndarray
    values: np.ndarray
    seed: int
    generator_tag: str

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("grid and values must be 1-d arrays of equal length >= 2")
        if grid[0] != 0.0 or values[0] != 0.0:
            raise ValueError("paths start at t = 0 with value 0")
        steps = np.diff(grid)
        if steps.min() <= 0.0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("grid must be strictly increasing and uniform")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def n_steps(self) -> int:
        return self.grid.size - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


@dataclass(frozen=True, eq=False)
class MultiFbmPath:
    """Three independent fBm components on a shared grid, for the gate driver."""

    b1: FbmPath
    b2: FbmPath
    b3: FbmPath
    master_seed: int

    def __post_init__(self) -> None:
        ref = self.b1
        for comp in (self.b2, self.b3):
            if comp.hurst_H != ref.hurst_H or comp.grid.shape != ref.grid.shape:
                raise ValueError("driver components must share H and grid")
            if not np.array_equal(comp.grid, ref.grid):
                raise ValueError("driver components must share the grid")

    @property
    def components(self) -> tuple[FbmPath, FbmPath, FbmPath]:
        return (self.b1, self.b2, self.b3)

    @property
    def hurst_H(self) -> float:
        return self.b1.hurst_H

    @property
    def grid(self) -> np.ndarray:
        return self.b1.grid

    def increments(self) -> np.ndarray:
        """Component increments stacked as an (N, 3) array."""
        return np.column_stack([c.increments for c in self.components])


# ---------------------------------------------------------------------------
# Cholesky reference generator
# ---------------------------------------------------------------------------


def _check_grid_args(N: int, T: float) -> tuple[int, float]:
    N = int(N)
    if N < 1:
        raise ValueError(f"grid size N must be >= 1, got {N}")
    T = float(T)
    if not (T > 0.0) or not math.isfinite(T):
        raise ValueError(f"horizon T must be positive and finite, got {T!r}")
    return N, T


def _increment_covariance(N: int, T: float, H: float) -> np.ndarray:
    delta = T / N
    gamma = fgn_autocovariance(np.arange(N), H)
    return delta ** (2.0 * H) * scipy.linalg.toeplitz(gamma)


def _cholesky_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(cov, lower=True)
    except scipy.linalg.LinAlgError as exc:
        match = re.search(r"(\d+)-th leading minor", str(exc))
        pivot = int(match.group(1)) - 1 if match else -1
        raise FactorizationError(
            f"increment covariance is not numerically positive definite "
            f"(offending pivot index {pivot})",
            pivot_index=pivot,
        ) from exc


def sample_cholesky(N: int, T: float, H: float, seed) -> FbmPath:
    """Exact fBm path on N+1 uniform points of [0, T] via a lower-triangular
    factorization of the increment covariance. Deterministic given `seed`."""
    N, T = _check_grid_args(N, T)
    _check_hurst(H)
    L = _cholesky_factor(_increment_covariance(N, T, H))
    z = np.random.default_rng(seed).standard_normal(N)
    values = np.concatenate([[0.0], np.cumsum(L @ z)])
    return FbmPath(
        hurst_H=float(H),
        grid=np.arange(N + 1) * (T / N),
        values=values,
        seed=_seed_as_int(seed),
        generator_tag=GENERATOR_CHOLESKY,
    )


def cholesky_increment_ensemble(N: int, T: float, H: float, seed, n_paths: int) -> np.ndarray:
    """(n_paths, N) array of independent increment vectors, factored once.

    Monte Carlo helper for generator validation; a loop over `sample_cholesky`
    would refactor the covariance per path.
    """
    N, T = _check_grid_args(N, T)
    _check_hurst(H)
    L = _cholesky_factor(_increment_covariance(N, T, H))
    z = np.random.default_rng(seed).standard_normal((N, int(n_paths)))
    return (L @ z).T


# ---------------------------------------------------------------------------
# Wood-Chan circulant embedding generator
# ---------------------------------------------------------------------------


def _circulant_eigenvalues(M: int, H: float) -> np.ndarray:
    """Eigenvalues of the 2M circulant embedding of the fGn covariance: the FFT
    of the symmetric first row [gamma(0..M), gamma(M-1..1)]."""
    gamma = fgn_autocovariance(np.arange(M + 1), H)
    row = np.concatenate([gamma, gamma[M - 1:0:-1]])
    return np.fft.fft(row).real


def _find_embedding(N: int, H: float) -> tuple[int, np.ndarray]:
    """Smallest power-of-two embedding half-size M >= N whose circulant
    eigenvalues are nonnegative up to rounding; negatives within
    -_EIG_CLIP_REL * max are clipped to zero."""
    M = 1 << max(0, N - 1).bit_length()
    while True:
        lam = _circulant_eigenvalues(M, H)
        lam_min = float(lam.min())
        if lam_min >= -_EIG_CLIP_REL * float(lam.max()):
            return M, np.clip(lam, 0.0, None)
        if M >= _MAX_EMBED_FACTOR * N:
            raise CirculantEmbeddingError(
                f"circulant embedding stayed indefinite up to size {2 * M} "
                f"(most negative eigenvalue {lam_min:.3e})",
                min_eigenvalue=lam_min,
                embedding_size=2 * M,
            )
        M *= 2


def _wood_chan_complex_sample(lam: np.ndarray, rng: np.random.Generator, n_paths: int) -> np.ndarray:
    """(n_paths, 2M) complex samples whose real and imaginary parts are each
    exact unit-grid fGn of length 2M (first N entries are used by callers)."""
    two_m = lam.size
    z = rng.standard_normal((n_paths, two_m)) + 1j * rng.standard_normal((n_paths, two_m))
    return np.fft.fft(z * np.sqrt(lam), axis=-1) / math.sqrt(two_m)


def sample_wood_chan(N: int, T: float, H: float, seed) -> FbmPath:
    """fBm path via circulant embedding of the increment process, cumulatively
    summed and scaled to the [0, T] grid. Deterministic given `seed`."""
    N, T = _check_grid_args(N, T)
    _check_hurst(H)
    _, lam = _find_embedding(N, H)
    rng = np.random.default_rng(seed)
    fgn = _wood_chan_complex_sample(lam, rng, 1)[0, :N].real
    delta = T / N
    values = np.concatenate([[0.0], np.cumsum(fgn) * delta ** float(H)])
    return FbmPath(
        hurst_H=float(H),
        grid=np.arange(N + 1) * delta,
        values=values,
        seed=_seed_as_int(seed),
        generator_tag=GENERATOR_WOOD_CHAN,
    )


def wood_chan_increment_ensemble(
    N: int, T: float, H: float, seed, n_paths: int, batch: int = 20_000
) -> np.ndarray:
    """(n_paths, N) independent increment vectors via batched circulant
    embedding; real and imaginary parts both count (they are independent)."""
    N, T = _check_grid_args(N, T)
    _check_hurst(H)
    n_paths = int(n_paths)
    _, lam = _find_embedding(N, H)
    rng = np.random.default_rng(seed)
    scale = (T / N) ** float(H)
    out = np.empty((n_paths, N))
    filled = 0
    while filled < n_paths:
        n_complex = min((n_paths - filled + 1) // 2, batch)
        y = _wood_chan_complex_sample(lam, rng, n_complex)[:, :N]
        block = np.concatenate([y.real, y.imag])[: n_paths - filled]
        out[filled : filled + block.shape[0]] = block * scale
        filled += block.shape[0]
    return out


# ---------------------------------------------------------------------------
# Three-component driver
# ---------------------------------------------------------------------------

_SAMPLERS = {
    GENERATOR_CHOLESKY: sample_cholesky,
    GENERATOR_WOOD_CHAN: sample_wood_chan,
}


def _seed_as_int(seed) -> int:
    return int(seed) if isinstance(seed, (int, np.integer)) else -1


def component_seeds(master_seed: int, n: int = 3) -> list[int]:
    """Disjoint per-component seeds spawned from one master seed."""
    children = np.random.SeedSequence(master_seed).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def sample_driver(
    N: int, T: float, H: float, master_seed: int, generator: str = GENERATOR_WOOD_CHAN
) -> MultiFbmPath:
    """Three mutually independent fBm components on a shared grid.

    Component seeds are spawned disjointly from `master_seed`, so the triple is
    reproducible as a whole while the components stay independent.
    """
    if generator not in _SAMPLERS:
        raise ValueError(f"unknown generator {generator!r}, expected one of {GENERATORS}")
    sampler = _SAMPLERS[generator]
    seeds = component_seeds(master_seed)
    b1, b2, b3 = (sampler(N, T, H, s) for s in seeds)
    return MultiFbmPath(b1=b1, b2=b2, b3=b3, master_seed=int(master_seed))


def write_driver_csv(driver: MultiFbmPath, path) -> None:
    """Dump a driver as CSV rows `t,B1,B2,B3` with 17 significant digits."""
    b1, b2, b3 = driver.components
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,B1,B2,B3\n")
        for t, x1, x2, x3 in zip(driver.grid, b1.values, b2.values, b3.values):
            fh.write(f"{t:.17g},{x1:.17g},{x2:.17g},{x3:.17g}\n")
