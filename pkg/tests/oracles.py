"""Independent reference computations used by the tests.

Nothing here imports the evaluators under test: the oracles work directly
with Hilbert-space matrices.
"""
import numpy as np
from scipy.linalg import expm


def heisenberg(H, V, t):
    U = expm(1j * H * t)
    return U @ V @ U.conj().T


def four_operator_F(energies, V, rho, t4, t3, t2, t1):
    """i^3 Tr[rho V(t4) V(t3) V(t2) V(t1)] for a bare system."""
    H = np.diag(np.asarray(energies, dtype=float))
    ops = [heisenberg(H, V, t) for t in (t4, t3, t2, t1)]
    return -1j * np.trace(ops[0] @ ops[1] @ ops[2] @ ops[3] @ rho)


def nested_commutator_S3(energies, V, rho, t3, t2, t1):
    """i^3 Tr(rho [[[V(t1+t2+t3), V(t1+t2)], V(t1)], V(0)]); t1 is the first interval."""
    if min(t1, t2, t3) < 0:
        return 0.0
    H = np.diag(np.asarray(energies, dtype=float))
    A = heisenberg(H, V, t1 + t2 + t3)
    B = heisenberg(H, V, t1 + t2)
    C = heisenberg(H, V, t1)
    D = V

    def comm(x, y):
        return x @ y - y @ x

    val = -1j * np.trace(rho @ comm(comm(comm(A, B), C), D))
    return val


class DisplacedOscillatorBath:
    """Exact g-functions of a single harmonic mode linearly coupled to each level.

    Level n shifts the mode coordinate by c[n]; g_ij(t) is the textbook
    single-mode form with frequency Omega at temperature kT.
    """

    def __init__(self, c, omega, kT):
        self.c = np.asarray(c, dtype=float)
        self.omega = omega
        self.coth = 1 / np.tanh(omega / (2 * kT))

    def g(self, i, j, t):
        t = np.asarray(t, dtype=float)
        w = self.omega
        return (self.c[i] * self.c[j] * 0.5
                * (self.coth * (1 - np.cos(w * t)) - 1j * (w * t - np.sin(w * t))) / w ** 2)


def oscillator_F(energies, V, c, omega, kT, t4, t3, t2, t1, nb=40):
    """i^3 <V(t4)V(t3)V(t2)V(t1)> with the mode kept explicitly in a Fock basis.

    The system starts in level 0 (bath-free) with the mode thermal.
    """
    n = len(energies)
    a = np.diag(np.sqrt(np.arange(1, nb)), 1)
    x = (a + a.T) / np.sqrt(2)
    hb = omega * np.diag(np.arange(nb))
    H = sum(np.kron(np.outer(np.eye(n)[k], np.eye(n)[k]),
                    energies[k] * np.eye(nb) + hb + c[k] * x) for k in range(n))
    Vt = np.kron(V, np.eye(nb))
    rb = expm(-hb / kT)
    rb /= np.trace(rb)
    p0 = np.zeros((n, n))
    p0[0, 0] = 1
    rho = np.kron(p0, rb)
    ops = [heisenberg(H, Vt, t) for t in (t4, t3, t2, t1)]
    return -1j * np.trace(ops[0] @ ops[1] @ ops[2] @ ops[3] @ rho)
