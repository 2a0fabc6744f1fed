"""Frame geometry, grid containers, and QPSK symbol mapping.

Layout conventions used throughout the package:

* A delay-Doppler grid is an ``(n_doppler_bins, n_subcarriers)`` array:
  rows index Doppler, columns index delay.
* A time-frequency grid is an ``(n_subcarriers, n_doppler_bins)`` array:
  rows index subcarriers, columns index OFDM symbols.
* Grids are vectorized column-major.  A delay-Doppler vector is therefore
  ``n_subcarriers`` consecutive blocks of ``n_doppler_bins`` Doppler entries
  (one block per delay bin); a time-frequency vector is ``n_doppler_bins``
  blocks of ``n_subcarriers`` entries (one block per OFDM symbol).
* A time signal is one dimensional, sequential sample order, with or
  without per-symbol cyclic prefixes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BITS_PER_QPSK_SYMBOL = 2


@dataclass(frozen=True)
class FrameConfig:
    """Static description of one transmission frame.

    Parameters
    ----------
    n_subcarriers : int
        Number of subcarriers per OFDM symbol (equals delay bins).
    n_doppler_bins : int
        Number of OFDM symbols per frame (equals Doppler bins).
    max_delay_taps : int
        Channel length in samples; tap delays run from 0 to
        ``max_delay_taps - 1``.
    cp_len : int
        Cyclic prefix length in samples, prepended to every OFDM symbol.
    sample_rate : float
        Baseband sample rate in Hz.
    carrier_freq : float
        Carrier frequency in Hz.  Informational; used only to convert
        vehicle speed to Doppler shift.
    """

    n_subcarriers: int
    n_doppler_bins: int
    max_delay_taps: int = 1
    cp_len: int = 0
    sample_rate: float = 1.024e6
    carrier_freq: float = 5.8e9

    def __post_init__(self) -> None:
        if self.n_subcarriers < 1 or self.n_doppler_bins < 1:
            raise ValueError("grid dimensions must be positive")
        if not 1 <= self.max_delay_taps <= self.n_subcarriers:
            raise ValueError(
                f"max_delay_taps must be in [1, {self.n_subcarriers}], "
                f"got {self.max_delay_taps}"
            )
        if self.cp_len < self.max_delay_taps - 1:
            raise ValueError(
                "cp_len must cover the channel memory "
                f"(need >= {self.max_delay_taps - 1}, got {self.cp_len})"
            )
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.carrier_freq < 0:
            raise ValueError("carrier_freq must be non-negative")

    @property
    def frame_size(self) -> int:
        """Samples per frame without cyclic prefixes."""
        return self.n_subcarriers * self.n_doppler_bins

    @property
    def frame_size_with_cp(self) -> int:
        return self.n_doppler_bins * (self.n_subcarriers + self.cp_len)

    @property
    def symbol_duration(self) -> float:
        """Useful OFDM symbol duration in seconds (CP excluded)."""
        return self.n_subcarriers / self.sample_rate

    @property
    def frame_duration(self) -> float:
        """Physical frame duration in seconds, CP included."""
        return self.frame_size_with_cp / self.sample_rate

    @property
    def bits_per_frame(self) -> int:
        return BITS_PER_QPSK_SYMBOL * self.frame_size

    def doppler_from_speed(self, speed_kmh: float) -> float:
        """Maximum Doppler shift in Hz for a given vehicle speed in km/h."""
        return speed_kmh / 3.6 * self.carrier_freq / 299_792_458.0


def _as_complex_2d(data: np.ndarray, shape: tuple[int, int], what: str) -> np.ndarray:
    out = np.asarray(data, dtype=np.complex128)
    if out.shape != shape:
        raise ValueError(f"{what} must have shape {shape}, got {out.shape}")
    return out


@dataclass(frozen=True)
class DelayDopplerGrid:
    """Data symbols on the delay-Doppler plane; rows Doppler, columns delay."""

    data: np.ndarray

    @classmethod
    def zeros(cls, config: FrameConfig) -> "DelayDopplerGrid":
        return cls(np.zeros((config.n_doppler_bins, config.n_subcarriers), complex))

    @classmethod
    def from_vector(cls, vec: np.ndarray, config: FrameConfig) -> "DelayDopplerGrid":
        vec = np.asarray(vec, dtype=np.complex128)
        if vec.shape != (config.frame_size,):
            raise ValueError(
                f"expected vector of length {config.frame_size}, got {vec.shape}"
            )
        shape = (config.n_doppler_bins, config.n_subcarriers)
        return cls(vec.reshape(shape, order="F"))

    def validate(self, config: FrameConfig) -> np.ndarray:
        return _as_complex_2d(
            self.data,
            (config.n_doppler_bins, config.n_subcarriers),
            "delay-Doppler grid",
        )

    def to_vector(self) -> np.ndarray:
        """Column-major vector: one block of Doppler entries per delay bin."""
        return np.asarray(self.data, dtype=np.complex128).ravel(order="F")


@dataclass(frozen=True)
class TimeFrequencyGrid:
    """Subcarrier values per OFDM symbol; rows subcarrier, columns symbol."""

    data: np.ndarray

    @classmethod
    def from_vector(cls, vec: np.ndarray, config: FrameConfig) -> "TimeFrequencyGrid":
        vec = np.asarray(vec, dtype=np.complex128)
        if vec.shape != (config.frame_size,):
            raise ValueError(
                f"expected vector of length {config.frame_size}, got {vec.shape}"
            )
        shape = (config.n_subcarriers, config.n_doppler_bins)
        return cls(vec.reshape(shape, order="F"))

    def validate(self, config: FrameConfig) -> np.ndarray:
        return _as_complex_2d(
            self.data,
            (config.n_subcarriers, config.n_doppler_bins),
            "time-frequency grid",
        )

    def to_vector(self) -> np.ndarray:
        """Column-major vector: one block of subcarrier entries per symbol."""
        return np.asarray(self.data, dtype=np.complex128).ravel(order="F")


@dataclass(frozen=True)
class TimeSignal:
    """Sequential baseband samples, with or without cyclic prefixes."""

    data: np.ndarray
    has_cp: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "data", np.asarray(self.data, dtype=np.complex128).ravel()
        )

    def expected_length(self, config: FrameConfig) -> int:
        return config.frame_size_with_cp if self.has_cp else config.frame_size

    def validate(self, config: FrameConfig) -> np.ndarray:
        n = self.expected_length(config)
        if self.data.shape != (n,):
            raise ValueError(
                f"time signal (has_cp={self.has_cp}) must have length {n}, "
                f"got {self.data.shape}"
            )
        return self.data


def qpsk_map(bits: np.ndarray, config: FrameConfig) -> DelayDopplerGrid:
    """Map a Gray-coded bit stream onto the delay-Doppler grid.

    Bit pair ``(b0, b1)`` becomes ``((1 - 2*b0) + 1j*(1 - 2*b1)) / sqrt(2)``,
    so every constellation point has unit energy.  Symbols fill the grid in
    its vectorization order.
    """
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.size != config.bits_per_frame:
        raise ValueError(
            f"expected {config.bits_per_frame} bits, got shape {bits.shape}"
        )
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    symbols = ((1.0 - 2.0 * bits[0::2]) + 1j * (1.0 - 2.0 * bits[1::2])) / np.sqrt(2.0)
    return DelayDopplerGrid.from_vector(symbols, config)


def qpsk_slice(symbols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hard-decide noisy QPSK symbols.

    Returns ``(bits, decided)`` where ``bits`` interleaves the in-phase and
    quadrature decisions and ``decided`` holds the corresponding unit-energy
    constellation points.  A coordinate exactly on the boundary is decided
    as positive.
    """
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    bits = np.empty(2 * symbols.size, dtype=np.int64)
    bits[0::2] = symbols.real < 0
    bits[1::2] = symbols.imag < 0
    decided = ((1.0 - 2.0 * bits[0::2]) + 1j * (1.0 - 2.0 * bits[1::2])) / np.sqrt(2.0)
    return bits, decided


def random_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform i.i.d. payload bits."""
    return rng.integers(0, 2, size=n, dtype=np.int64)
