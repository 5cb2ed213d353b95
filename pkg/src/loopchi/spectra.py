"""Frequency-map scans, complex Lorentzian fits and the resonance-width study."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .model import SystemSpec, BathSpec, derive_fast_rates, model_hash, vee_model


class FitError(RuntimeError):
    pass


class NoPeak(FitError):
    pass


class FitNonConvergent(FitError):
    pass


@dataclass
class SpectrumGrid:
    omega1: np.ndarray
    omega2: np.ndarray
    omega3: float
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega1 = np.asarray(self.omega1, dtype=float)
        self.omega2 = np.asarray(self.omega2, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.omega1), len(self.omega2)):
            raise ValueError("values shape does not match axes")
        for ax in (self.omega1, self.omega2):
            if len(ax) > 1 and not np.all(np.diff(ax) > 0):
                raise ValueError("axes must be strictly increasing")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["omega1", "omega2", "re_chi", "im_chi"])
        for i, x in enumerate(self.omega1):
            for j, y in enumerate(self.omega2):
                v = self.values[i, j]
                w.writerow([repr(float(x)), repr(float(y)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "omega1": self.omega1.tolist(),
            "omega2": self.omega2.tolist(),
            "omega3": self.omega3,
            "values": [[v.real, v.imag] for v in self.values.ravel()],
            "metadata": self.metadata,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SpectrumGrid":
        d = json.loads(text)
        n1, n2 = len(d["omega1"]), len(d["omega2"])
        vals = np.array([complex(a, b) for a, b in d["values"]]).reshape(n1, n2)
        return cls(d["omega1"], d["omega2"], d["omega3"], vals, d["metadata"])


def axis(lo: float, hi: float, count: int) -> np.ndarray:
    return np.linspace(lo, hi, count)


def scan2d(evaluator, omega1, omega2, omega3: float, *, sign2: int = 1,
           workers: int = 1, evaluator_id: str = "", model_id: str = "") -> SpectrumGrid:
    """chi^(3) at every (omega1[i], omega2[j]) with field 2 entering as ``sign2 * omega2``.

    Rows are independent and assembled by index; a failing cell is recorded
    in ``metadata["failed"]`` as NaN instead of aborting the scan.
    """
    omega1 = np.asarray(omega1, dtype=float)
    omega2 = np.asarray(omega2, dtype=float)
    failed = []

    def row(i):
        x = omega1[i]
        try:
            return np.asarray(evaluator(np.full(omega2.shape, x), sign2 * omega2, omega3),
                              dtype=complex), None
        except Exception:
            out = np.empty(omega2.shape, dtype=complex)
            errs = []
            for j, y in enumerate(omega2):
                try:
                    out[j] = evaluator(x, sign2 * y, omega3)
                except Exception as exc:  # recorded per cell
                    out[j] = np.nan
                    errs.append((i, j, f"{type(exc).__name__}: {exc}"))
            return out, errs

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(row, range(len(omega1))))
    else:
        rows = [row(i) for i in range(len(omega1))]
    values = np.empty((len(omega1), len(omega2)), dtype=complex)
    for i, (r, errs) in enumerate(rows):
        values[i] = r
        if errs:
            failed.extend(errs)
    meta = {"evaluator": evaluator_id, "model_hash": model_id, "sign2": sign2,
            "failed": failed}
    return SpectrumGrid(omega1, omega2, omega3, values, meta)


def diagonal_enhancement(grid: SpectrumGrid, offset: float, k: int) -> float:
    """Max over rows of |chi| on the omega1 - omega2 = offset diagonal over its background.

    The background at a diagonal cell is the cubic interpolation of the
    off-diagonal cells k and 2k steps away along omega2.
    """
    best = 0.0
    w2 = grid.omega2
    for i, x in enumerate(grid.omega1):
        j = int(np.argmin(np.abs(x - w2 - offset)))
        if abs(x - w2[j] - offset) > 1e-9 * max(1.0, abs(offset)) + 0.5 * np.min(np.diff(w2)):
            continue
        if j - 2 * k < 0 or j + 2 * k >= len(w2):
            continue
        v = grid.values[i]
        bg = (-v[j - 2 * k] + 4 * v[j - k] + 4 * v[j + k] - v[j + 2 * k]) / 6
        best = max(best, abs(v[j]) / abs(bg))
    return best


# ---------------------------------------------------------------------------
# fitting


@dataclass
class PeakFit:
    center: float
    width: float
    amplitude: complex
    baseline: complex
    residual: float
    flag: str = ""

    @property
    def contrast(self) -> float:
        return abs(self.amplitude) / (abs(self.baseline) * self.width)


def _model(p, x):
    x0, g, ar, ai, br, bi = p
    return (ar + 1j * ai) / (x - x0 + 1j * g) + (br + 1j * bi)


def _linear_ab(x, y, x0, g):
    M = np.stack([1 / (x - x0 + 1j * g), np.ones_like(x, dtype=complex)], axis=1)
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    return coef, np.linalg.norm(M @ coef - y)


def fit_lorentzian_peak(x, y, window=None, *, min_contrast: float = 0.05,
                        max_iter: int = 200) -> PeakFit:
    """Least-squares fit of ``A / (x - x0 + i gamma) + B`` to complex samples.

    Initialised by a grid search over (x0, gamma) with A, B solved linearly,
    then refined by damped Gauss-Newton (Levenberg-Marquardt). ``window`` is
    an optional (lo, hi) range for the initial center search.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=complex)
    if len(x) < 15:
        raise ValueError("need at least 15 samples")
    lo, hi = window if window is not None else (x.min(), x.max())
    span = x.max() - x.min()
    h = np.min(np.diff(np.sort(x)))
    best = None
    for x0 in np.linspace(lo, hi, 41):
        for g in np.geomspace(h / 4, span, 40):
            coef, r = _linear_ab(x, y, x0, g)
            if best is None or r < best[0]:
                best = (r, x0, g, coef)
    _, x0, g, (a, b) = best
    p0 = np.array([x0, g, a.real, a.imag, b.real, b.imag])
    scale = max(np.abs(y).max(), 1e-300)

    def resid(p):
        d = (_model(p, x) - y) / scale
        return np.concatenate([d.real, d.imag])

    res = least_squares(resid, p0, method="lm", xtol=1e-10, ftol=1e-15, gtol=1e-15,
                        max_nfev=max_iter * (len(p0) + 1))
    if res.status == 0:
        raise FitNonConvergent(f"fit did not converge after {res.nfev} evaluations")
    x0, g, ar, ai, br, bi = res.x
    fit = PeakFit(float(x0), float(abs(g)), complex(ar, ai), complex(br, bi),
                  float(np.linalg.norm(res.fun) * scale))
    if fit.width > span or not (x.min() <= fit.center <= x.max()) or fit.contrast < min_contrast:
        raise NoPeak(f"no resolvable peak (contrast {fit.contrast:.3g}, width {fit.width:.3g})")
    if fit.width < h:
        fit.flag = "unresolved"
    return fit


# ---------------------------------------------------------------------------
# resonance-width study


@dataclass
class StudyRow:
    eta: float
    width: float | None
    amplitude: float | None
    center: float | None
    status: str


@dataclass
class StudyResult:
    rows: list[StudyRow]
    slope: float
    intercept: float
    r2: float
    gamma_sum: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eta", "width", "abs_amplitude", "center", "status"])
        for r in self.rows:
            w.writerow([repr(r.eta), "" if r.width is None else repr(r.width),
                        "" if r.amplitude is None else repr(r.amplitude),
                        "" if r.center is None else repr(r.center), r.status])
        return buf.getvalue()


@dataclass(frozen=True)
class VeeScan:
    """Correlated-vee model and the diagonal slice through its bd resonance."""

    w_ba: float = 10.0
    w_da: float = 9.0
    gamma: float = 0.1          # Gamma_bb = Gamma_dd
    big_lambda: float = 5.0
    kT: float = 2.5
    detuning: float = 2.0       # single-photon detuning at the resonance
    omega3: float = 12.0
    half_span: float = 0.3      # delta range around w_bd
    points: int = 321

    def model(self, eta: float):
        lam = self.gamma * self.big_lambda / (2 * self.kT)
        return vee_model(eta, w_ba=self.w_ba, w_da=self.w_da, lam=lam,
                         big_lambda=self.big_lambda, kT=self.kT, mode="fast")

    @property
    def w_bd(self) -> float:
        return self.w_ba - self.w_da

    def delta_axis(self):
        return np.linspace(self.w_bd - self.half_span, self.w_bd + self.half_span, self.points)

    def fields(self, delta):
        # omega1 + omega2 fixed so that both single-photon factors sit `detuning`
        # away from resonance on the diagonal
        total = self.w_ba + self.w_da - 2 * self.detuning
        return (total + delta) / 2, (total - delta) / 2


def resonance_width_study(etas, scan: VeeScan | None = None) -> StudyResult:
    """Fit the correlation-induced bd resonance for each eta and regress width on 1 - eta.

    Each time-ordered Lorentzian slice is divided by the eta = 0 slice of the
    same model. That reference has identical single-photon prefactors and
    no bd resonance (the two diagrams cancel it), so the quotient is the
    resonant bracket on a flat background.
    """
    from .lorentzian import LorentzianGreens, chi3_timeordered

    scan = scan or VeeScan()
    delta = scan.delta_axis()
    w1, w2 = scan.fields(delta)

    def slice_at(eta):
        system, bath = scan.model(eta)
        greens = LorentzianGreens.from_bath(system, bath)
        return chi3_timeordered(system, greens, w1, -w2, scan.omega3), bath

    reference, _ = slice_at(0.0)
    rows = []
    gamma_sum = None
    for eta in etas:
        values, bath = slice_at(eta)
        gam = derive_fast_rates(bath)
        gamma_sum = gam[1, 1] + gam[2, 2]
        try:
            f = fit_lorentzian_peak(delta, values / reference)
        except NoPeak:
            rows.append(StudyRow(eta, None, None, None, "no peak"))
            continue
        except FitNonConvergent:
            rows.append(StudyRow(eta, None, None, None, "non-convergent"))
            continue
        rows.append(StudyRow(eta, f.width, abs(f.amplitude), f.center, f.flag or "ok"))
    ok = [r for r in rows if r.status == "ok"]
    if len(ok) >= 2:
        xs = np.array([1 - r.eta for r in ok])
        ys = np.array([r.width for r in ok])
        slope, intercept = np.polyfit(xs, ys, 1)
        pred = slope * xs + intercept
        ss = np.sum((ys - ys.mean()) ** 2)
        r2 = 1 - np.sum((ys - pred) ** 2) / ss if ss > 0 else 1.0
    else:
        slope = intercept = r2 = float("nan")
    return StudyResult(rows, float(slope), float(intercept), float(r2), float(gamma_sum))
