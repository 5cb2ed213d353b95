"""chi^(3) in the eigenstate basis with factorized (Lorentzian) Green's functions.

Both evaluators walk the symbolic terms from :mod:`loopchi.termgen`: every
term is expanded into index paths through the density matrix, and each
bath-averaged product of propagators is replaced by a product of single
Lorentzians. Frequencies may be complex (``w + i eps`` models adiabatic
switching) and may be numpy arrays; results broadcast.
"""
from __future__ import annotations

import itertools
import warnings
import weakref

import numpy as np

from .model import BathSpec, SystemSpec, dephasing_matrix
from .termgen import (ADVANCED, LOOP, ExpansionTerm, expand_permutations,
                      gen_loop_terms, gen_timeordered_terms)

ETA_REG = 1e-6
PREFACTOR = -1.0 / (2 * np.pi) ** 2


class OffResonanceWarning(UserWarning):
    """The off-resonant symmetric form was used too close to a resonance."""


class LorentzianGreens:
    """Single-coherence propagators G_{nu nu'}(w) = 1/(w - w_{nu nu'} + i(W + eta_reg))."""

    def __init__(self, system: SystemSpec, widths=None, eta_reg: float = ETA_REG,
                 real: bool = False):
        if eta_reg <= 0 and not real:
            raise ValueError("eta_reg must be > 0")
        n = system.n
        widths = np.zeros((n, n)) if widths is None else np.asarray(widths, dtype=float)
        if np.any(widths < 0):
            raise ValueError("dephasing widths must be >= 0")
        self.system = system
        self.widths = widths
        self.eta_reg = eta_reg
        self.real = real  # principal-value propagators, no imaginary part
        self.w = system.transition()

    @classmethod
    def from_bath(cls, system: SystemSpec, bath: BathSpec, eta_reg: float = ETA_REG):
        return cls(system, dephasing_matrix(bath), eta_reg)

    def width(self, nu, nup):
        return self.widths[nu, nup] + self.eta_reg

    def green(self, omega, nu: int, nup: int, kind: str = "retarded"):
        omega = np.asarray(omega)
        if self.real:
            return 1.0 / (omega - self.w[nu, nup])
        s = -1.0 if kind == ADVANCED else 1.0
        return 1.0 / (omega - self.w[nu, nup] + s * 1j * self.width(nu, nup))


# ---------------------------------------------------------------------------
# index paths


def _tag_paths(V, P, tags):
    """(weight, ((k1, l1), ..., (kn, ln))) for one interaction-side pattern.

    ``tags`` are the early interactions in chronological order; the signal
    vertex closes the trace from the left.
    """
    out = []
    n = len(V)

    def walk(k, l, j, w, pairs):
        if j == len(tags):
            wf = w * V[l, k]
            if wf != 0:
                out.append((wf, tuple(pairs)))
            return
        for m in range(n):
            if tags[j] == "L":
                v = V[m, k]
                if v != 0:
                    walk(m, l, j + 1, w * v, pairs + [(m, l)])
            else:
                v = V[l, m]
                if v != 0:
                    walk(k, m, j + 1, w * v, pairs + [(k, m)])

    for a in np.nonzero(P > 0)[0]:
        walk(int(a), int(a), 0, complex(P[a]), [])
    return out


_PATH_CACHE: "weakref.WeakKeyDictionary[SystemSpec, dict]" = weakref.WeakKeyDictionary()


def _paths(system: SystemSpec, tags):
    per = _PATH_CACHE.setdefault(system, {})
    if tags not in per:
        per[tags] = _tag_paths(system.dipole, system.populations, tags)
    return per[tags]


def _term_value(system, greens, term: ExpansionTerm, omegas, omega_s):
    paths = _paths(system, term.vertex_tags[:-1])
    args = [p.arg.evaluate(omegas, omega_s) for p in term.chain]
    # backward (advanced) segments of the loop carry -1 relative to the resolvent
    sign = term.sign * (-1) ** term.n_advanced()
    acc = 0
    for wt, pairs in paths:
        prod = wt
        for (k, l), p, x in zip(pairs, term.chain, args):
            prod = prod * greens.green(x, k, l, p.kind)
        acc = acc + prod
    return sign * acc


def _chi3(system, greens, terms, w1, w2, w3):
    omegas = np.broadcast_arrays(*(np.asarray(w) for w in (w1, w2, w3)))
    omega_s = omegas[0] + omegas[1] + omegas[2]
    acc = np.zeros(omega_s.shape, dtype=complex)
    for t in terms:
        acc = acc + _term_value(system, greens, t, omegas, omega_s)
    acc = PREFACTOR * acc
    return acc if acc.shape else complex(acc)


LOOP_TERMS = tuple(expand_permutations(gen_loop_terms(3), 3))
TIMEORDERED_TERMS = tuple(expand_permutations(gen_timeordered_terms(3), 3))


def chi3_loop(system: SystemSpec, greens: LorentzianGreens, w1, w2, w3):
    """Loop expansion (4 base terms x 3! permutations), factorized propagators."""
    return _chi3(system, greens, LOOP_TERMS, w1, w2, w3)


def chi3_timeordered(system: SystemSpec, greens: LorentzianGreens, w1, w2, w3):
    """Time-ordered expansion (8 Liouville pathways x 3! permutations)."""
    return _chi3(system, greens, TIMEORDERED_TERMS, w1, w2, w3)


def chi3_offresonant_symmetric(system: SystemSpec, greens: LorentzianGreens, w1, w2, w3,
                               check: bool = True):
    """Single forward-only term summed over all 4! orderings of (w1, w2, w3, -ws).

    Uses real (principal-value) propagators; warns with
    :class:`OffResonanceWarning` when a cumulative frequency comes within
    10x the largest width of a resonance.
    """
    ws = w1 + w2 + w3
    fields = (w1, w2, w3, -ws)
    w = system.transition()
    paths = _paths(system, ("L", "L", "L"))
    gmax = float(np.max(greens.widths, initial=0.0)) + greens.eta_reg
    acc = 0j
    near = False
    for om in itertools.permutations(fields):
        cum = (om[0], om[0] + om[1], om[0] + om[1] + om[2])
        for wt, pairs in paths:
            prod = wt
            for (k, l), x in zip(pairs, cum):
                det = x - w[k, l]
                if check and abs(det) < 10 * gmax:
                    near = True
                prod *= 1.0 / det
            acc += prod
    if near:
        warnings.warn("off-resonant symmetric form used within 10x width of a resonance",
                      OffResonanceWarning, stacklevel=2)
    return PREFACTOR * acc


# ---------------------------------------------------------------------------
# closed forms for the correlated-vee model


def resonance_closed_form(v_ab, v_ad, w_ba, w_da, g_bb, g_dd, eta, w1, w2, ws):
    """Combined two-diagram contribution with its correlation-induced resonance.

    ``w1 - w2 = w_bd`` resonance with amplitude proportional to eta and width
    (g_bb + g_dd)(1 - eta).
    """
    w_bd = w_ba - w_da
    g_sum = g_bb + g_dd
    pre = (abs(v_ab) ** 2 * abs(v_ad) ** 2
           / (-ws - w_ba + 1j * g_bb)
           / (w1 - w_ba + 1j * g_bb)
           / (-w2 + w_da + 1j * g_dd))
    return pre * (1 + 1j * eta * g_sum / (w1 - w2 - w_bd + 1j * g_sum * (1 - eta)))


def resonance_diagram_sum(v_ab, v_ad, w_ba, w_da, g_bb, g_dd, eta, w1, w2, ws):
    """The same contribution written as the two uncombined diagrams."""
    w_bd = w_ba - w_da
    g_bd = (g_bb + g_dd) * (1 - eta)
    left = 1 / (w1 - w_ba + 1j * g_bb)
    right = 1 / (-w2 + w_da + 1j * g_dd)
    return (abs(v_ab) ** 2 * abs(v_ad) ** 2 / (-ws - w_ba + 1j * g_bb)
            / (w1 - w2 - w_bd + 1j * g_bd) * (left + right))
