"""Scenario configuration shared by every module."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


def ris_grid(n: int) -> tuple[int, int]:
    """Most-square (n_h, n_v) factorization of an element count n."""
    if n < 1:
        raise ValueError("RIS element count must be >= 1")
    n_h = int(np.sqrt(n))
    while n % n_h:
        n_h -= 1
    return n_h, n // n_h


@dataclass(frozen=True)
class SystemConfig:
    """All scenario constants for one simulated deployment.

    Powers are linear and noise-normalized (sigma2 = 1 means SNR dB sweeps
    set P_s = 10**(snr/10)). R_th is the per-user minimum rate in bits/s/Hz;
    the equivalent SINR floor is eta = 2**R_th - 1.
    """

    M: int = 16                 # BS antennas (single RF chain)
    N_H: int = 8                # RIS horizontal elements
    N_V: int = 8                # RIS vertical elements
    K: int = 4                  # users
    S1: int = 3                 # paths BS -> RIS
    S2: int = 3                 # paths RIS -> user
    sigma2: float = 1.0         # noise power
    sigma_eps2: float = 0.0     # CSI error variance per entry
    P_s: float = 1e4            # transmit power budget (40 dB default)
    R_th: tuple[float, ...] = ()  # per-user min rates; () = 0.3 each
    P_BS_prime: float = 100.0   # residual BS circuit power
    P_RF: float = 40.0          # power per RF chain
    P_RIS: float = 0.5          # power per RIS element
    seed: int = 0               # master seed for channel draws

    def __post_init__(self):
        if not self.R_th:
            object.__setattr__(self, "R_th", (0.3,) * self.K)
        if min(self.M, self.N_H, self.N_V, self.K, self.S1, self.S2) < 1:
            raise ValueError("all counts must be >= 1")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be > 0")
        if self.sigma_eps2 < 0:
            raise ValueError("sigma_eps2 must be >= 0")
        if self.P_s <= 0:
            raise ValueError("P_s must be > 0")
        if len(self.R_th) != self.K:
            raise ValueError("R_th must have one entry per user")
        if any(r < 0 for r in self.R_th):
            raise ValueError("R_th entries must be >= 0")
        if min(self.P_BS_prime, self.P_RF, self.P_RIS) < 0:
            raise ValueError("power model constants must be >= 0")

    @property
    def N(self) -> int:
        return self.N_H * self.N_V

    @property
    def eta(self) -> np.ndarray:
        """Per-user minimum SINR thresholds 2**R_th - 1."""
        return np.exp2(np.asarray(self.R_th, dtype=float)) - 1.0

    def with_(self, **kw) -> "SystemConfig":
        return replace(self, **kw)
