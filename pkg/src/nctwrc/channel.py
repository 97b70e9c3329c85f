"""Finite-state Markov channel (FSMC) models for flat Rayleigh fading.

The SNR range of each downlink is cut into ``K`` regions of equal stationary
probability. Transitions between adjacent regions follow from the level
crossing rate of the Rayleigh envelope; per-state symbol error probabilities
are evaluated at the lower SNR boundary of each region.

All SNR values are linear; :meth:`ChannelConfig.from_db` converts once.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

__all__ = [
    "ChannelConfig",
    "ChannelModel",
    "ChannelError",
    "MODULATIONS",
    "db_to_linear",
    "equiprobable_boundaries",
    "level_crossing_rate",
    "lcr_transition_matrix",
    "symbol_error_prob",
    "build_channel",
]

MODULATIONS = ("BPSK",)
DEFAULT_DOPPLER = 0.01
ROW_SUM_TOL = 1e-12


class ChannelError(ValueError):
    """Raised for invalid channel configurations or FSMC constructions."""


def db_to_linear(snr_db: float) -> float:
    return float(10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class ChannelConfig:
    """Configuration of one downlink FSMC.

    Parameters
    ----------
    K : int
        Number of channel states.
    mean_snr : float
        Average SNR, linear scale.
    doppler_symbol_product : float
        Maximum Doppler frequency times symbol duration, ``f_d * T``.
    modulation : str
        Only ``"BPSK"`` is supported.
    """

    K: int
    mean_snr: float
    doppler_symbol_product: float = DEFAULT_DOPPLER
    modulation: str = "BPSK"

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ChannelError(f"K must be a positive integer, got {self.K!r}")
        if not self.mean_snr > 0 or not np.isfinite(self.mean_snr):
            raise ChannelError(f"mean_snr must be positive and finite, got {self.mean_snr!r}")
        if not self.doppler_symbol_product > 0:
            raise ChannelError(
                f"doppler_symbol_product must be positive, got {self.doppler_symbol_product!r}"
            )
        if self.modulation.upper() not in MODULATIONS:
            raise ChannelError(f"unsupported modulation {self.modulation!r}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "modulation", self.modulation.upper())

    @classmethod
    def from_db(cls, K, mean_snr_db, doppler_symbol_product=DEFAULT_DOPPLER, modulation="BPSK"):
        return cls(K, db_to_linear(mean_snr_db), doppler_symbol_product, modulation)

    @property
    def mean_snr_db(self) -> float:
        return float(10.0 * np.log10(self.mean_snr))


def equiprobable_boundaries(K: int, mean_snr: float) -> np.ndarray:
    """SNR thresholds ``Gamma_1..Gamma_{K+1}`` giving each region mass ``1/K``.

    The instantaneous SNR of a Rayleigh channel is exponential with mean
    ``mean_snr``; inverting its CDF at ``k/K`` gives the boundaries.
    ``Gamma_1 = 0`` and ``Gamma_{K+1} = inf``.
    """
    if K < 1:
        raise ChannelError("K must be >= 1")
    k = np.arange(K)
    bounds = np.empty(K + 1)
    bounds[:K] = -mean_snr * np.log1p(-k / K)
    bounds[K] = np.inf
    return bounds


def region_probabilities(boundaries: np.ndarray, mean_snr: float) -> np.ndarray:
    """Stationary probability of each SNR region under the exponential law."""
    tail = np.exp(-np.asarray(boundaries, dtype=float) / mean_snr)
    return tail[:-1] - tail[1:]


def level_crossing_rate(snr: np.ndarray, mean_snr: float, doppler: float) -> np.ndarray:
    """Rayleigh level crossing rate at SNR threshold(s), per unit time.

    ``N(G) = sqrt(2*pi*G/mean_snr) * f_d * exp(-G/mean_snr)``. With ``doppler``
    given as ``f_d*T`` the result is already crossings per symbol.
    """
    snr = np.asarray(snr, dtype=float)
    out = np.zeros_like(snr)
    finite = np.isfinite(snr)
    s = snr[finite]
    out[finite] = np.sqrt(2.0 * np.pi * s / mean_snr) * doppler * np.exp(-s / mean_snr)
    return out


def lcr_transition_matrix(boundaries, mean_snr: float, doppler_symbol_product: float) -> np.ndarray:
    """Tridiagonal FSMC transition matrix from level crossing rates.

    ``P[k, k+1] = N(Gamma_{k+1}) T / pi_k`` and ``P[k, k-1] = N(Gamma_k) T / pi_k``;
    the diagonal takes the remaining mass.

    Raises
    ------
    ChannelError
        If an adjacent-state probability reaches 0.5 (fading not slow enough)
        or a diagonal entry would be negative.
    """
    boundaries = np.asarray(boundaries, dtype=float)
    K = boundaries.size - 1
    pi = region_probabilities(boundaries, mean_snr)
    # equiprobable partitions use the exact 1/K so that P is exactly symmetric
    if np.allclose(pi, 1.0 / K, rtol=1e-12, atol=0):
        pi = np.full(K, 1.0 / K)
    crossings = level_crossing_rate(boundaries, mean_snr, doppler_symbol_product)
    P = np.zeros((K, K))
    for k in range(K):
        if k + 1 < K:
            P[k, k + 1] = crossings[k + 1] / pi[k]
        if k > 0:
            P[k, k - 1] = crossings[k] / pi[k]
    off = P.sum(axis=1)
    if K > 1 and (P.max() >= 0.5):
        k, j = np.unravel_index(np.argmax(P), P.shape)
        raise ChannelError(
            f"adjacent-state probability P[{k + 1},{j + 1}]={P[k, j]:.4f} >= 0.5; "
            "doppler_symbol_product too large for the slow-fading model"
        )
    diag = 1.0 - off
    if np.any(diag < 0):
        raise ChannelError("negative self-transition probability; fading too fast")
    P[np.diag_indices(K)] = diag
    return P


def symbol_error_prob(snr, modulation: str = "BPSK"):
    """Symbol error probability at the given SNR (scalar or array).

    BPSK: ``0.5 * erfc(sqrt(snr))``; an infinite SNR gives 0.
    """
    if modulation.upper() != "BPSK":
        raise ChannelError(f"unsupported modulation {modulation!r}")
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ChannelError("SNR must be nonnegative")
    out = 0.5 * erfc(np.sqrt(snr))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ChannelModel:
    """A built FSMC.

    ``error_prob`` has length ``K``; ``error_prob_ext`` appends
    ``P_e(K+1) = 0`` for expressions that difference adjacent states.
    States are 1-based in the public API; arrays here are 0-based.
    """

    config: ChannelConfig
    boundaries: np.ndarray
    transition: np.ndarray
    stationary: np.ndarray
    error_prob: np.ndarray
    error_prob_ext: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.config.K

    def to_csv(self, path_or_buf) -> None:
        """Write boundaries, P_e and the transition matrix, one row per state."""
        K = self.K
        header = ["g", "lower_snr", "upper_snr", "stationary", "Pe"] + [f"P_to_{j + 1}" for j in range(K)]
        rows = [",".join(header)]
        for k in range(K):
            vals = [str(k + 1), repr(float(self.boundaries[k])), repr(float(self.boundaries[k + 1])),
                    repr(float(self.stationary[k])), repr(float(self.error_prob[k]))]
            vals += [repr(float(p)) for p in self.transition[k]]
            rows.append(",".join(vals))
        _write_text(path_or_buf, "\n".join(rows) + "\n")


def build_channel(config: ChannelConfig) -> ChannelModel:
    """Construct the equiprobable Rayleigh FSMC described by ``config``."""
    bounds = equiprobable_boundaries(config.K, config.mean_snr)
    P = lcr_transition_matrix(bounds, config.mean_snr, config.doppler_symbol_product)
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
        raise ChannelError("FSMC rows do not sum to one")
    pe = symbol_error_prob(bounds[:-1], config.modulation)
    pe = np.atleast_1d(pe)
    pe_ext = np.append(pe, 0.0)
    for arr in (bounds, P, pe, pe_ext):
        arr.setflags(write=False)
    stationary = np.full(config.K, 1.0 / config.K)
    stationary.setflags(write=False)
    return ChannelModel(config, bounds, P, stationary, pe, pe_ext)


def _write_text(path_or_buf, text: str) -> None:
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", newline="") as fh:
            fh.write(text)
