"""Exact chi^(3) by triple time integration of the cumulant four-point function.

The integrands never depend on the field frequencies, so each one is
tabulated once on a tensor-product composite Gauss-Legendre grid and every
frequency triple (and every permutation) costs one separable phase
contraction.

Damping for intervals that the bath leaves undamped (populations, isolated
systems) comes from adiabatic switching: every input frequency is shifted
to ``w + i*eps`` and the signal frequency to ``ws + 3i*eps``. Both
expansions are evaluated at the same complex frequencies, so they stay
exact rearrangements of each other, and the Lorentzian evaluators give the
matching factorized result when called with the same shifted frequencies.
"""
from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass

import numpy as np

from .lineshape import check_reference_state, dipole_paths, four_point_F
from .model import SystemSpec

LOOP = "loop"
TIMEORDERED = "time-ordered"
PREFACTOR = 1.0 / (2 * np.pi) ** 2
NODES_PER_PANEL = 16


class QuadratureError(ArithmeticError):
    pass


class NonConvergent(QuadratureError):
    """The damping envelope at t_max is above eps_cut, so truncation is unjustified."""


class ToleranceNotMet(QuadratureError):
    def __init__(self, coarse: complex, fine: complex, rel_change: float, rel_tol: float):
        self.coarse = coarse
        self.fine = fine
        self.rel_change = rel_change
        super().__init__(f"tolerance not met: relative change {rel_change:.3g} > {rel_tol:.3g} "
                         f"(coarse {coarse!r}, fine {fine!r})")


@dataclass(frozen=True)
class QuadratureConfig:
    t_max: float | None = None       # None picks it from the damping envelope
    points_per_axis: int = 64
    refinement_factor: int = 2
    rel_tol: float = 1e-4
    eps_cut: float = 1e-8
    switching: float = 1.5           # adiabatic switching rate eps

    def __post_init__(self):
        if self.t_max is not None and not self.t_max > 0:
            raise ValueError("t_max must be > 0")
        if self.points_per_axis < NODES_PER_PANEL or self.points_per_axis % NODES_PER_PANEL:
            raise ValueError(f"points_per_axis must be a positive multiple of {NODES_PER_PANEL}")
        if self.refinement_factor < 2:
            raise ValueError("refinement_factor must be >= 2")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if not 0 < self.eps_cut < 1:
            raise ValueError("eps_cut must lie in (0, 1)")
        if self.switching < 0:
            raise ValueError("switching rate must be >= 0")


@dataclass
class IntegralResult:
    value: complex
    coarse: complex
    rel_change: float
    t_max: float
    points: int


def composite_gauss_legendre(t_max: float, points: int):
    """Nodes and weights on [0, t_max] from equal panels of NODES_PER_PANEL nodes."""
    x, w = np.polynomial.legendre.leggauss(NODES_PER_PANEL)
    panels = points // NODES_PER_PANEL
    h = t_max / panels
    left = np.arange(panels)[:, None] * h
    nodes = (left + (x + 1) * h / 2).ravel()
    weights = np.tile(w * h / 2, panels)
    return nodes, weights


# F arguments (t4, t3, t2, t1) as functions of the three integration variables
def _to_args(t1, t2, t3):
    a, b, c = t1, t1 + t2, t1 + t2 + t3
    z = 0 * a
    return [(a, b, c, z), (z, b, c, a), (z, a, c, b), (c, b, a, z)]


def _loop_args(s1, s2, s3):
    z = 0 * s1
    return [
        (s1 + s2 + s3, s1 + s2, s1, z),
        (s1 + s2 - s3, s1 + s2, s1, z),
        (s1 - s2 - s3, s1 - s2, s1, z),
        (z, s3, s3 + s2, s3 + s2 + s1),
    ]


LOOP_SIGNS = (1, -1, 1, -1)


def _loop_phases(w1, w2, w3, ws):
    """Per-term exponent coefficients (a1, a2, a3) in exp(i a1 s1 + i a2 s2 + i a3 s3)."""
    return [
        (w1, w1 + w2, w1 + w2 + w3),
        (w1, w1 + w2, -(w1 + w2 - ws)),
        (w1, -(w1 - ws), -(w1 - ws + w2)),
        (ws, -(-ws + w1), -(-ws + w1 + w2)),
    ]


def _to_phases(w1, w2, w3, ws):
    return [(w1, w1 + w2, w1 + w2 + w3)]


class CumulantIntegrator:
    """Tabulated integrands for one (system, kernel, quadrature) combination."""

    def __init__(self, system: SystemSpec, kernel, quad: QuadratureConfig | None = None):
        self.system = system
        self.kernel = kernel
        self.quad = quad or QuadratureConfig()
        check_reference_state(system, kernel)
        self.paths = dipole_paths(system)
        self.t_max = self._choose_t_max() if self.paths else 1.0
        self._tables: dict = {}

    # -- truncation -------------------------------------------------------

    def envelope(self, T: float, samples: int = 9) -> float:
        """Max of |integrand| * switching decay over the faces where one variable equals T."""
        eps = self.quad.switching
        u = np.linspace(0.0, T, samples)
        best = 0.0
        for axis in range(3):
            grids = [u[:, None], u[None, :]]
            coords = grids[:axis] + [np.full((1, 1), T)] + grids[axis:]
            s1, s2, s3 = np.broadcast_arrays(*coords)
            decay = np.exp(-eps * (s1 + s2 + s3))
            for args in _to_args(s1, s2, s3) + _loop_args(s1, s2, s3):
                f = np.abs(four_point_F(self.system, self.kernel, *args, paths=self.paths))
                best = max(best, float(np.max(f * decay)))
        return best

    def _choose_t_max(self) -> float:
        q = self.quad
        scale = self.envelope(0.0) or 1.0
        cut = q.eps_cut * scale
        if q.t_max is not None:
            env = self.envelope(q.t_max)
            if env > cut:
                raise NonConvergent(f"non-convergent: damping envelope {env / scale:.3g} at "
                                    f"t_max={q.t_max:g} exceeds eps_cut={q.eps_cut:g}")
            return float(q.t_max)
        hi = 1.0
        while self.envelope(hi) > cut:
            hi *= 2
            if hi > 1e5:
                raise NonConvergent("non-convergent: integrand is not damped; enable "
                                    "switching or add bath damping")
        lo = hi / 2 if hi > 1.0 else 0.0
        for _ in range(30):
            mid = (lo + hi) / 2
            if self.envelope(mid) > cut:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-3 * hi:
                break
        return hi

    # -- tabulation -------------------------------------------------------

    def table(self, expansion: str, points: int):
        key = (expansion, points)
        if key in self._tables:
            return self._tables[key]
        x, w = composite_gauss_legendre(self.t_max, points)
        s1, s2, s3 = x[:, None, None], x[None, :, None], x[None, None, :]
        weight = w[:, None, None] * w[None, :, None] * w[None, None, :]
        grids = []
        if expansion == TIMEORDERED:
            total = 0
            for args in _to_args(s1, s2, s3):
                total = total + four_point_F(self.system, self.kernel, *args, paths=self.paths)
            grids.append((total + np.conj(total)) * weight)
        elif expansion == LOOP:
            for sign, args in zip(LOOP_SIGNS, _loop_args(s1, s2, s3)):
                grids.append(sign * four_point_F(self.system, self.kernel, *args,
                                                 paths=self.paths) * weight)
        else:
            raise ValueError(f"unknown expansion {expansion!r}")
        self._tables[key] = (x, grids)
        return x, grids

    # -- contraction ------------------------------------------------------

    def evaluate(self, expansion: str, w1, w2, w3, points: int) -> np.ndarray:
        """chi^(3) at broadcast frequency arrays, fixed resolution."""
        if not self.paths:
            return np.zeros(np.broadcast(w1, w2, w3).size, dtype=complex)
        w1, w2, w3 = (np.asarray(v, dtype=complex).ravel()
                      for v in np.broadcast_arrays(w1, w2, w3))
        eps = 1j * self.quad.switching
        x, grids = self.table(expansion, points)
        phases_of = _to_phases if expansion == TIMEORDERED else _loop_phases
        # all permutations of all triples in one batch, fixed order
        cols = [[], [], [], []]
        fields = (w1 + eps, w2 + eps, w3 + eps)
        ws = w1 + w2 + w3 + 3 * eps
        for perm in itertools.permutations(range(3)):
            a, b, c = (fields[p] for p in perm)
            for t, coeffs in enumerate(phases_of(a, b, c, ws)):
                cols[t].append(coeffs)
        total = np.zeros(len(w1), dtype=complex)
        n = len(x)
        for grid, coeff_list in zip(grids, cols):
            a1 = np.concatenate([c[0] for c in coeff_list])
            a2 = np.concatenate([c[1] for c in coeff_list])
            a3 = np.concatenate([c[2] for c in coeff_list])
            e1 = np.exp(1j * np.outer(x, a1))
            e2 = np.exp(1j * np.outer(x, a2))
            e3 = np.exp(1j * np.outer(x, a3))
            tmp = (grid.reshape(n * n, n) @ e3).reshape(n, n, -1)
            tmp = np.einsum("ijb,jb->ib", tmp, e2)
            vals = np.einsum("ib,ib->b", tmp, e1)
            total += vals.reshape(6, len(w1)).sum(axis=0)
        return PREFACTOR * total

    def integrate(self, expansion: str, w1, w2, w3, *, strict: bool = True) -> IntegralResult:
        q = self.quad
        coarse = complex(self.evaluate(expansion, w1, w2, w3, q.points_per_axis)[0])
        fine_n = q.points_per_axis * q.refinement_factor
        fine = complex(self.evaluate(expansion, w1, w2, w3, fine_n)[0])
        scale = max(abs(fine), 1e-300)
        change = abs(fine - coarse) / scale if fine != coarse else 0.0
        if strict and change > q.rel_tol:
            raise ToleranceNotMet(coarse, fine, change, q.rel_tol)
        return IntegralResult(fine, coarse, change, self.t_max, fine_n)


_CACHE: "weakref.WeakKeyDictionary[SystemSpec, list]" = weakref.WeakKeyDictionary()


def integrator_for(system: SystemSpec, kernel, quad: QuadratureConfig) -> CumulantIntegrator:
    entries = _CACHE.setdefault(system, [])
    for k, q, integ in entries:
        if k is kernel and q == quad:
            return integ
    integ = CumulantIntegrator(system, kernel, quad)
    entries.append((kernel, quad, integ))
    return integ


def chi3_integral(system: SystemSpec, kernel, expansion: str, w1: float, w2: float, w3: float,
                  quad: QuadratureConfig | None = None) -> complex:
    """1/(2 pi)^2 sum over permutations of the triple integral of the chosen expansion.

    Raises :class:`ToleranceNotMet` when the refined grid changes the value
    by more than ``quad.rel_tol`` and :class:`NonConvergent` when the
    integrand is not damped at ``t_max``.
    """
    quad = quad or QuadratureConfig()
    return integrator_for(system, kernel, quad).integrate(expansion, w1, w2, w3).value


# ---------------------------------------------------------------------------
# time domain


def response_S3(system: SystemSpec, kernel, t3, t2, t1):
    """Third-order response S(t3, t2, t1); t1 is the first interval, t3 the last.

    Zero wherever any interval is negative.
    """
    t1, t2, t3 = np.broadcast_arrays(*(np.asarray(t, dtype=float) for t in (t1, t2, t3)))
    ok = (t1 >= 0) & (t2 >= 0) & (t3 >= 0)
    c1, c2, c3 = (np.where(ok, t, 0.0) for t in (t1, t2, t3))
    paths = dipole_paths(system)
    total = 0
    for args in _to_args(c1, c2, c3):
        total = total + four_point_F(system, kernel, *args, paths=paths)
    out = np.where(ok, 2 * np.real(total) if paths else 0.0, 0.0)
    return out if out.shape else float(out)


class BandwidthError(ValueError):
    pass


def s3_from_chi3(chi3_sampler, t1, t2, t3, *, omega_max: float, points: int = 128,
                 resonances=(), widths=0.0, taper: float = 0.1):
    """Invert chi^(3) to S(t3, t2, t1) on the tensor grid of the given time axes.

    ``chi3_sampler(w1, w2, w3)`` must accept broadcast arrays. The transform
    runs over a uniform cube [-omega_max, omega_max)^3 with ``points`` samples
    per axis and a Tukey taper of fraction ``taper`` on each axis. Returns an
    array of shape (len(t1), len(t2), len(t3)).
    """
    from scipy.signal.windows import tukey

    widths = np.broadcast_to(np.asarray(widths, dtype=float), np.shape(resonances))
    for r, g in zip(np.atleast_1d(resonances), np.atleast_1d(widths)):
        if 2 * omega_max < 4 * (abs(r) + g):
            raise BandwidthError(f"frequency grid of width {2 * omega_max:g} is narrower than "
                                 f"4x the resonance at {r:g} (width {g:g})")
    t1, t2, t3 = (np.atleast_1d(np.asarray(t, dtype=float)) for t in (t1, t2, t3))
    dw = 2 * omega_max / points
    w = -omega_max + dw * np.arange(points)
    values = np.asarray(chi3_sampler(w[:, None, None], w[None, :, None], w[None, None, :]),
                        dtype=complex)
    if taper > 0:
        win = tukey(points, taper)
        values = values * win[:, None, None] * win[None, :, None] * win[None, None, :]
    out = np.empty((len(t1), len(t2), len(t3)))
    for k, c in enumerate(t3):
        # contract w3 with T3 = t3
        a = values @ np.exp(-1j * w * c)
        for j, b in enumerate(t2):
            bb = a @ np.exp(-1j * w * (b + c))
            T1 = t1 + b + c
            col = np.exp(-1j * np.outer(T1, w)) @ bb
            out[:, j, k] = (col * dw ** 3 / (2 * np.pi)).real
    return out


_QUAD_KEYS = {"t_max", "points_per_axis", "refinement_factor", "rel_tol", "eps_cut", "switching"}


def quadrature_from_dict(section: dict | None) -> QuadratureConfig:
    """QuadratureConfig from a ``[quadrature]`` config table (unknown keys rejected)."""
    from .model import ModelError

    section = dict(section or {})
    unknown = set(section) - _QUAD_KEYS
    if unknown:
        raise ModelError(f"[quadrature] unknown key(s): {sorted(unknown)}")
    try:
        return QuadratureConfig(**section)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"[quadrature] {exc}") from None
