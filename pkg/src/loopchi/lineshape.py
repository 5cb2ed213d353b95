"""Line-broadening functions, the cumulant exponent and the four-point dipole correlator."""
from __future__ import annotations

import numpy as np

from .model import BathSpec, ModelError, SystemSpec, derive_fast_rates


class LineshapeKernel:
    """Evaluates g_{nu nu'}(t) for one bath in brownian, fast or slow form.

    The closed forms are used for t >= 0; negative times follow from
    g_{nu nu'}(t) = conj(g_{nu' nu}(-t)).
    """

    def __init__(self, bath: BathSpec, mode: str | None = None):
        self.bath = bath
        self.mode = mode or bath.mode
        if self.mode not in ("brownian", "fast", "slow"):
            raise ModelError(f"unknown lineshape mode {self.mode!r}")
        lam, big, kT = bath.lam, bath.big_lambda, bath.kT
        safe = np.where(lam != 0, big, 1.0)
        self.lam = lam
        self.big = safe
        self.re_coef = np.where(lam != 0, 2 * lam * kT / safe**2, 0.0)
        self.im_coef = np.where(lam != 0, lam / safe, 0.0)
        self.gamma = derive_fast_rates(bath)
        self.coupled = lam != 0

    @property
    def n(self) -> int:
        return self.bath.n

    def _g_pos(self, i, j, t):
        # t >= 0
        if self.mode == "fast":
            return self.gamma[i, j] * t + 0j
        if self.mode == "slow":
            lam = self.lam[i, j]
            return lam * self.bath.kT * t * t - 1j * lam * t
        x = self.big[i, j] * t
        return (self.re_coef[i, j] - 1j * self.im_coef[i, j]) * (np.expm1(-x) + x)

    def g(self, i: int, j: int, t):
        t = np.asarray(t, dtype=float)
        if not self.coupled[i, j]:
            return np.zeros(t.shape, dtype=complex) if t.shape else 0j
        at = np.abs(t)
        val = self._g_pos(i, j, at)
        if self.lam[i, j] == self.lam[j, i]:
            # symmetric pair constants: g_ji(|t|) == g_ij(|t|)
            val = np.where(t < 0, np.conj(val), val)
        else:  # pragma: no cover - BathSpec enforces symmetry
            val = np.where(t < 0, np.conj(self._g_pos(j, i, at)), val)
        return val if t.shape else complex(val)

    def envelope_rate(self) -> float:
        """Smallest nonzero asymptotic decay rate of Re g over coupled pairs (0 if none)."""
        if not np.any(self.coupled):
            return 0.0
        if self.mode == "slow":
            return np.inf
        d = self.gamma[self.coupled]
        return float(d[d > 0].min()) if np.any(d > 0) else 0.0


def cumulant_exponent(kernel, d, c, b, a, t4, t3, t2, t1):
    """Second-order cumulant exponent f_dcba for the V(t4)V(t3)V(t2)V(t1) product.

    Three segments (b on [t1, t2], c on [t2, t3], d on [t3, t4]) measured from
    the initial state ``a``, which must be bath-free.
    """
    g = kernel.g
    t43, t32, t21 = t4 - t3, t3 - t2, t2 - t1
    t42, t41, t31 = t4 - t2, t4 - t1, t3 - t1
    return (-g(d, d, t43) - g(c, c, t32) - g(b, b, t21)
            - g(d, c, t42) + g(d, c, t43) + g(d, c, t32)
            - g(d, b, t41) + g(d, b, t42) + g(d, b, t31) - g(d, b, t32)
            - g(c, b, t31) + g(c, b, t32) + g(c, b, t21))


def dipole_paths(system: SystemSpec, tol: float = 0.0):
    """Index quadruples (d, c, b, a) with nonzero P(a) V_ad V_dc V_cb V_ba."""
    V, P = system.dipole, system.populations
    out = []
    for a in np.nonzero(P > 0)[0]:
        for b in np.nonzero(V[:, a])[0]:
            for c in np.nonzero(V[:, b])[0]:
                for d in np.nonzero(V[:, c])[0]:
                    w = P[a] * V[a, d] * V[d, c] * V[c, b] * V[b, a]
                    if abs(w) > tol:
                        out.append((int(d), int(c), int(b), int(a), complex(w)))
    return out


def check_reference_state(system: SystemSpec, kernel) -> None:
    bath = getattr(kernel, "bath", None)
    if bath is None:
        return
    hot = system.populations > 0
    if np.any(hot & bath.coupled_levels()):
        raise ModelError("populated levels must be bath-free (fluctuations are "
                         "measured relative to the initial state)")


def four_point_F(system: SystemSpec, kernel, t4, t3, t2, t1, paths=None):
    """F = i^3 <V(t4) V(t3) V(t2) V(t1)> with the cumulant bath average.

    Broadcasts over array time arguments.
    """
    check_reference_state(system, kernel)
    if paths is None:
        paths = dipole_paths(system)
    w = system.transition()
    t4, t3, t2, t1 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (t4, t3, t2, t1)))
    acc = np.zeros(t4.shape, dtype=complex)
    for d, c, b, a, wt in paths:
        ph = w[d, a] * (t4 - t3) + w[c, a] * (t3 - t2) + w[b, a] * (t2 - t1)
        f = cumulant_exponent(kernel, d, c, b, a, t4, t3, t2, t1)
        acc += wt * np.exp(-1j * ph + f)
    acc *= -1j  # i^3
    return acc if acc.shape else complex(acc)
