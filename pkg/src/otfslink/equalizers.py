"""Two-stage equalization and the reference equalizers it is compared against.

Stage one is a per-subcarrier frequency-domain equalizer (FDE) on the
time-frequency grid.  Stage two re-enters the delay-Doppler domain and
cancels the residual inter-symbol coupling: a matched filter through the
equivalent channel minus a clipped cancellation matrix applied to the hard
decisions from stage one.

Baselines: the same single-tap equalizer on a plain OFDM link, and full
linear MMSE on either link.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .frame import FrameConfig, TimeFrequencyGrid, qpsk_slice
from .transforms import dsft_inverse

FDE_MODES = ("magnitude", "mmse")


@dataclass(frozen=True)
class FdeCoefficients:
    """Per-subcarrier, per-symbol single-tap gains."""

    gains: np.ndarray
    gamma: float
    mode: str


def fde_build(
    cfr: np.ndarray,
    noise_var: float,
    mode: str = "magnitude",
    gamma: "float | None" = None,
) -> FdeCoefficients:
    """Single-tap gains from the channel frequency response.

    ``mode="magnitude"`` regularizes by the response magnitude,
    ``g = conj(H) / (|H| + gamma)``; ``mode="mmse"`` uses the conventional
    ``g = conj(H) / (|H|^2 + gamma)``.  ``gamma`` defaults to the noise
    variance; with ``gamma = 0`` the mmse form inverts the channel exactly
    while the magnitude form only aligns its phase.
    """
    if mode not in FDE_MODES:
        raise ValueError(f"mode must be one of {FDE_MODES}, got {mode!r}")
    if gamma is None:
        gamma = noise_var
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    cfr = np.asarray(cfr, dtype=np.complex128)
    mag = np.abs(cfr)
    denom = mag + gamma if mode == "magnitude" else mag**2 + gamma
    gains = np.zeros_like(cfr)
    np.divide(cfr.conj(), denom, out=gains, where=denom > 0)
    return FdeCoefficients(gains=gains, gamma=float(gamma), mode=mode)


def fde_apply(coeffs: FdeCoefficients, grid: TimeFrequencyGrid) -> TimeFrequencyGrid:
    data = np.asarray(grid.data)
    if coeffs.gains.shape != data.shape:
        raise ValueError(
            f"coefficient grid {coeffs.gains.shape} does not match "
            f"signal grid {data.shape}"
        )
    return TimeFrequencyGrid(coeffs.gains * data)


def fde_to_dd(grid: TimeFrequencyGrid, config: FrameConfig):
    """Return the equalized frame to the delay-Doppler domain.

    This is the plain inverse spreading transform; it exists as a named
    stage so the equalizer chain reads as transmit order reversed.
    """
    return dsft_inverse(grid, config)


@dataclass(frozen=True)
class CancellationMatrix:
    """Off-diagonal interference coupling of the equivalent channel.

    ``r_bar`` is ``h_eq^H h_eq`` with the diagonal removed and entries below
    ``clip_threshold`` times the largest off-diagonal magnitude zeroed;
    ``diag`` keeps the removed diagonal (real and non-negative) for the
    final per-symbol scaling.
    """

    r_bar: np.ndarray
    diag: np.ndarray
    clip_threshold: float


def dde_build(
    h_eq: np.ndarray,
    clip_threshold: float = 0.02,
    gram: "np.ndarray | None" = None,
) -> CancellationMatrix:
    """Build the decision-feedback cancellation matrix.

    ``gram`` may pass a precomputed ``h_eq.conj().T @ h_eq`` to share work
    with the full-MMSE equalizer.  ``clip_threshold = 0`` keeps every
    off-diagonal entry; ``1`` keeps only the strongest.
    """
    if not 0.0 <= clip_threshold <= 1.0:
        raise ValueError("clip_threshold must lie in [0, 1]")
    h_eq = np.asarray(h_eq, dtype=np.complex128)
    if gram is None:
        gram = h_eq.conj().T @ h_eq
    diag = np.real(np.diag(gram)).copy()
    r_bar = gram - np.diag(np.diag(gram))
    if clip_threshold > 0.0:
        mags = np.abs(r_bar)
        peak = mags.max()
        if peak > 0.0:
            r_bar = np.where(mags < clip_threshold * peak, 0.0, r_bar)
    return CancellationMatrix(r_bar=r_bar, diag=diag, clip_threshold=float(clip_threshold))


def dde_equalize(
    y_dd: np.ndarray,
    stage_one_symbols: np.ndarray,
    h_eq: np.ndarray,
    cancel: CancellationMatrix,
    scale_by_diag: bool = True,
) -> np.ndarray:
    """One decision-feedback pass in the delay-Doppler domain.

    ``y_dd`` is the raw demodulated frame (vectorized, before any
    equalization); ``stage_one_symbols`` seed the hard decisions whose
    regenerated interference is subtracted from the matched-filter output.
    With ``scale_by_diag`` each entry is divided by its matched-filter
    gain, restoring the constellation scale.
    """
    y_dd = np.asarray(y_dd, dtype=np.complex128).ravel()
    n = y_dd.size
    if h_eq.shape != (n, n) or cancel.r_bar.shape != (n, n):
        raise ValueError("matrix sizes do not match the received vector")
    _, decided = qpsk_slice(np.asarray(stage_one_symbols).ravel())
    estimate = h_eq.conj().T @ y_dd - cancel.r_bar @ decided
    if scale_by_diag:
        estimate = estimate / np.where(cancel.diag > 0.0, cancel.diag, 1.0)
    return estimate


def ofdm_single_tap(
    y_tf: TimeFrequencyGrid,
    cfr: np.ndarray,
    noise_var: float,
    mode: str = "magnitude",
) -> np.ndarray:
    """Single-tap equalized hard bits for the plain OFDM link."""
    coeffs = fde_build(cfr, noise_var, mode=mode)
    equalized = fde_apply(coeffs, y_tf)
    bits, _ = qpsk_slice(equalized.to_vector())
    return bits


def full_mmse(
    h: np.ndarray,
    y: np.ndarray,
    noise_var: float,
    gram: "np.ndarray | None" = None,
) -> np.ndarray:
    """Linear MMSE estimate ``(h^H h + noise_var I)^-1 h^H y``.

    Raises a singularity error when the regularized normal matrix cannot be
    factorized (for example ``noise_var = 0`` with a rank-deficient ``h``).
    """
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128).ravel()
    if h.ndim != 2 or h.shape[0] != y.size:
        raise ValueError("h and y dimensions do not match")
    if noise_var < 0:
        raise ValueError("noise_var must be non-negative")
    if gram is None:
        gram = h.conj().T @ h
    normal = gram + noise_var * np.eye(h.shape[1])
    try:
        factor = scipy.linalg.cho_factor(normal)
    except scipy.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            f"normal matrix is singular (noise_var={noise_var})"
        ) from err
    return scipy.linalg.cho_solve(factor, h.conj().T @ y)
