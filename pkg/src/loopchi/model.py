"""Physical model: multilevel system, Brownian-oscillator bath, field signature.

Units: hbar = 1, k_B absorbed into ``kT``; energies, rates and temperature
share one angular-frequency unit.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

try:  # py3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

MODES = ("brownian", "fast", "slow")
POP_TOL = 1e-12


class ModelError(ValueError):
    """Invalid or unparsable model configuration."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemSpec:
    labels: tuple[str, ...]
    energies: np.ndarray
    dipole: np.ndarray
    populations: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "energies", _frozen(np.asarray(self.energies, dtype=float)))
        object.__setattr__(self, "dipole", _frozen(np.asarray(self.dipole, dtype=complex)))
        object.__setattr__(self, "populations", _frozen(np.asarray(self.populations, dtype=float)))
        if len(set(self.labels)) != n:
            raise ModelError("level labels are not unique")
        if self.energies.shape != (n,):
            raise ModelError(f"expected {n} energies, got shape {self.energies.shape}")
        if self.dipole.shape != (n, n):
            raise ModelError(f"dipole must be {n}x{n}, got {self.dipole.shape}")
        bad = np.argwhere(np.abs(self.dipole - self.dipole.conj().T) > 1e-12)
        if len(bad):
            i, j = bad[0]
            raise ModelError(f"dipole not Hermitian at ({self.labels[i]},{self.labels[j]})")
        if self.populations.shape != (n,):
            raise ModelError(f"expected {n} populations, got {self.populations.shape[0]}")
        if np.any(self.populations < 0):
            raise ModelError("populations must be nonnegative")
        if abs(self.populations.sum() - 1.0) > POP_TOL:
            raise ModelError(f"populations sum ≠ 1 (sum = {self.populations.sum():.15g})")

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ModelError(f"unknown level {label!r}") from None

    def transition(self) -> np.ndarray:
        """Matrix of transition frequencies w[i, j] = e_i - e_j."""
        return self.energies[:, None] - self.energies[None, :]


@dataclass(frozen=True, eq=False)
class BathSpec:
    lam: np.ndarray
    big_lambda: np.ndarray
    kT: float
    mode: str = "brownian"

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        big = np.asarray(self.big_lambda, dtype=float)
        if big.ndim == 0:
            big = np.full(lam.shape, float(big))
        object.__setattr__(self, "lam", _frozen(lam))
        object.__setattr__(self, "big_lambda", _frozen(big))
        object.__setattr__(self, "kT", float(self.kT))
        if self.mode not in MODES:
            raise ModelError(f"bath mode must be one of {MODES}, got {self.mode!r}")
        n = lam.shape[0]
        if lam.shape != (n, n) or big.shape != (n, n):
            raise ModelError("lambda and big_lambda must be square matrices of equal size")
        if not np.allclose(lam, lam.T, atol=0, rtol=0):
            raise ModelError("lambda is not symmetric")
        if not np.allclose(big, big.T, atol=0, rtol=0):
            raise ModelError("big_lambda is not symmetric")
        if self.kT < 0:
            raise ModelError("kT must be >= 0")
        d = np.diag(lam)
        if np.any(d < 0):
            raise ModelError("diagonal lambda entries must be >= 0")
        bound = np.outer(np.sqrt(d), np.sqrt(d))   # avoids underflow of d_i * d_j
        i, j = np.nonzero(np.abs(lam) > bound * (1 + 1e-12) + 1e-300)
        if len(i):
            raise ModelError(
                f"correlation coefficient > 1 for pair ({i[0]},{j[0]}): "
                f"|lambda| = {abs(lam[i[0], j[0]]):g} > {bound[i[0], j[0]]:g}")
        need = lam != 0
        if np.any(~(big[need] > 0)):
            raise ModelError("big_lambda must be > 0 for every coupled pair")

    @classmethod
    def uncoupled(cls, n: int, mode: str = "fast") -> "BathSpec":
        return cls(np.zeros((n, n)), np.ones((n, n)), 0.0, mode)

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    def correlation(self) -> np.ndarray:
        """Correlation coefficients eta = lam_ij / sqrt(lam_ii lam_jj) (0 if undefined)."""
        d = np.diag(self.lam)
        den = np.outer(np.sqrt(d), np.sqrt(d))
        with np.errstate(divide="ignore", invalid="ignore"):
            eta = np.where(den > 0, self.lam / np.where(den > 0, den, 1.0), 0.0)
        return eta

    def coupled_levels(self) -> np.ndarray:
        return np.any(self.lam != 0, axis=1)


@dataclass(frozen=True)
class FieldSignature:
    input_frequencies: tuple[float, ...]

    def __post_init__(self):
        if len(self.input_frequencies) < 1:
            raise ModelError("need at least one input frequency")

    @property
    def order(self) -> int:
        return len(self.input_frequencies)

    @property
    def signal_frequency(self) -> float:
        return sum(self.input_frequencies)


# ---------------------------------------------------------------------------
# rates


def derive_fast_rates(bath: BathSpec) -> np.ndarray:
    """Fast-modulation dephasing rates Gamma = 2 lam kT / Lambda, elementwise."""
    lam, big = bath.lam, bath.big_lambda
    coupled = lam != 0
    if np.any(coupled & (big == 0)):
        raise ZeroDivisionError("big_lambda = 0 for a coupled pair")
    out = np.zeros_like(lam)
    out[coupled] = 2.0 * lam[coupled] * bath.kT / big[coupled]
    return out


def coherence_dephasing(gamma: np.ndarray, nu: int, nup: int,
                        eta: np.ndarray | None = None) -> float:
    """Pure-dephasing width of the (nu, nup) coherence.

    ``Gamma_nn + Gamma_mm - 2 X`` with cross term ``X = eta (Gamma_nn + Gamma_mm) / 2``,
    i.e. ``(Gamma_nn + Gamma_mm)(1 - eta)``. Without an explicit ``eta`` the
    coefficient is read off ``gamma`` itself, which equals the coupling-based one
    when the pair shares its bath timescale.
    """
    gn, gm = gamma[nu, nu], gamma[nup, nup]
    if eta is None:
        den = np.sqrt(gn) * np.sqrt(gm)
        e = gamma[nu, nup] / den if den > 0 else 0.0
    else:
        e = eta[nu, nup] if gn > 0 and gm > 0 else 0.0
    if nu == nup:
        e = 1.0 if gn > 0 else 0.0
    cross = e * (gn + gm) / 2.0
    return float(gn + gm - 2.0 * cross)


def dephasing_matrix(bath: BathSpec) -> np.ndarray:
    """All coherence widths W[i, j] from the fast-limit rates of ``bath``."""
    gamma = derive_fast_rates(bath)
    eta = bath.correlation()
    n = bath.n
    return np.array([[coherence_dephasing(gamma, i, j, eta) for j in range(n)]
                     for i in range(n)])


# ---------------------------------------------------------------------------
# config parsing

_SYSTEM_KEYS = {"levels", "dipole", "populations"}
_BATH_KEYS = {"mode", "kT", "lambda", "big_lambda"}
_TOP_KEYS = {"system", "bath", "quadrature"}


def _pairs(entries, labels, name, width):
    n = len(labels)
    out = np.zeros((n, n), dtype=complex if width == 4 else float)
    if not isinstance(entries, list):
        raise ModelError(f"[bath] {name}: expected a list of pairs")
    for k, e in enumerate(entries):
        if not isinstance(e, list) or len(e) != width:
            raise ModelError(f"{name}[{k}]: expected {width} fields, got {e!r}")
        try:
            i, j = labels.index(e[0]), labels.index(e[1])
        except ValueError:
            raise ModelError(f"{name}[{k}]: unknown level in {e[:2]!r}") from None
        v = complex(e[2], e[3]) if width == 4 else float(e[2])
        if width == 4:
            out[i, j] = v
            out[j, i] = np.conj(v)
        else:
            out[i, j] = out[j, i] = v
    return out


def load_model(config_text: str) -> tuple[SystemSpec, BathSpec]:
    """Parse a TOML model description into validated specs."""
    try:
        doc = tomllib.loads(config_text)
    except tomllib.TOMLDecodeError as exc:
        raise ModelError(f"parse error: {exc}") from None
    return model_from_dict(doc)


def model_from_dict(doc: dict) -> tuple[SystemSpec, BathSpec]:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ModelError(f"unknown top-level key(s): {sorted(unknown)}")
    if "system" not in doc:
        raise ModelError("missing [system] section")
    sysd = doc["system"]
    unknown = set(sysd) - _SYSTEM_KEYS
    if unknown:
        raise ModelError(f"[system] unknown key(s): {sorted(unknown)}")
    for k in _SYSTEM_KEYS:
        if k not in sysd:
            raise ModelError(f"[system] missing key {k!r}")
    levels = sysd["levels"]
    if not isinstance(levels, dict) or not levels:
        raise ModelError("[system] levels: expected a table of label = energy")
    labels = list(levels)
    try:
        energies = [float(levels[k]) for k in labels]
    except (TypeError, ValueError):
        raise ModelError("[system] levels: energies must be numbers") from None
    dipole = _pairs(sysd["dipole"], labels, "dipole", 4)
    system = SystemSpec(tuple(labels), energies, dipole, sysd["populations"])

    bathd = doc.get("bath", {})
    unknown = set(bathd) - _BATH_KEYS
    if unknown:
        raise ModelError(f"[bath] unknown key(s): {sorted(unknown)}")
    lam = _pairs(bathd.get("lambda", []), labels, "lambda", 3)
    big_raw = bathd.get("big_lambda", 1.0)
    if isinstance(big_raw, (int, float)):
        big = np.full(lam.shape, float(big_raw))
    else:
        big = _pairs(big_raw, labels, "big_lambda", 3)
    bath = BathSpec(lam, big, bathd.get("kT", 0.0), bathd.get("mode", "brownian"))
    return system, bath


def model_hash(system: SystemSpec, bath: BathSpec) -> str:
    payload = json.dumps({
        "labels": system.labels,
        "energies": system.energies.tolist(),
        "dipole": [[repr(complex(z)) for z in row] for row in system.dipole],
        "populations": system.populations.tolist(),
        "lam": bath.lam.tolist(), "big": bath.big_lambda.tolist(),
        "kT": bath.kT, "mode": bath.mode,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# canned models


def vee_model(eta: float, *, w_ba: float = 10.0, w_da: float = 9.0,
              lam: float = 0.2, big_lambda: float = 5.0, kT: float = 2.5,
              mode: str = "brownian", v_ab: complex = 1.0, v_ad: complex = 1.0,
              ) -> tuple[SystemSpec, BathSpec]:
    """Ground state a and two close excited states b, d with correlated fluctuations.

    Only a-b and a-d are dipole coupled; b and d share coupling ``lam`` and
    correlation coefficient ``eta``; the ground state is bath-free.
    """
    dip = np.zeros((3, 3), dtype=complex)
    dip[0, 1], dip[0, 2] = v_ab, v_ad
    dip = dip + dip.conj().T
    system = SystemSpec(("a", "b", "d"), [0.0, w_ba, w_da], dip, [1.0, 0.0, 0.0])
    lm = np.zeros((3, 3))
    lm[1, 1] = lm[2, 2] = lam
    lm[1, 2] = lm[2, 1] = eta * lam
    return system, BathSpec(lm, np.full((3, 3), big_lambda), kT, mode)


def two_level_model(w_ba: float = 1.0, v: complex = 1.0) -> tuple[SystemSpec, BathSpec]:
    dip = np.array([[0, v], [np.conj(v), 0]], dtype=complex)
    system = SystemSpec(("g", "e"), [0.0, w_ba], dip, [1.0, 0.0])
    return system, BathSpec.uncoupled(2)
