"""Command-line interface: ``loopchi <subcommand>``.

Every subcommand that writes files also writes ``<name>.manifest.json`` next
to them; ``loopchi verify <manifest>`` reruns the recorded command and
byte-compares the outputs.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .model import ModelError, load_model, model_hash, tomllib

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4
THREADS_ENV = "LOOPCHI_THREADS"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def fmt_complex(z: complex) -> str:
    z = complex(z)
    sign = "-" if z.imag < 0 or (z.imag == 0 and np.signbit(z.imag)) else "+"
    return f"{fmt(z.real)}{sign}{fmt(abs(z.imag))}j"


@dataclasses.dataclass
class RunManifest:
    command: list
    config: str | None
    seed: int | None
    evaluator: str
    outputs: dict          # file name -> sha256
    wall_clock: float
    version: str
    threads: int

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(dataclasses.asdict(self), indent=1, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path: Path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _threads(args) -> int:
    if args.threads:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class Run:
    """Collects output files for one invocation and writes its manifest."""

    def __init__(self, args, argv, name):
        self.args = args
        self.argv = argv
        self.name = name
        self.out = Path(args.out) if args.out else None
        self.files: list[Path] = []
        self.t0 = time.perf_counter()
        self.config_text = None
        self.evaluator = ""

    def write(self, filename: str, text: str) -> Path | None:
        if self.out is None:
            return None
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / filename
        path.write_text(text)
        self.files.append(path)
        return path

    def finish(self) -> None:
        if self.out is None or not self.files:
            return
        man = RunManifest(
            command=list(self.argv), config=self.config_text, seed=None,
            evaluator=self.evaluator, outputs={p.name: _sha(p) for p in self.files},
            wall_clock=time.perf_counter() - self.t0, version=__version__,
            threads=_threads(self.args))
        man.write(self.out / f"{self.name}.manifest.json")


def _load(args, run: Run):
    if not args.config:
        raise ModelError("--config is required")
    text = Path(args.config).read_text()
    run.config_text = text
    system, bath = load_model(text)
    doc = tomllib.loads(text)
    return system, bath, doc


def _quad(args, doc):
    from .cumulant import quadrature_from_dict

    section = dict(doc.get("quadrature", {}))
    for key in ("t_max", "points_per_axis", "rel_tol", "switching"):
        v = getattr(args, key, None)
        if v is not None:
            section[key] = v
    return quadrature_from_dict(section)


# ---------------------------------------------------------------------------
# subcommands


def cmd_terms(args, run: Run) -> int:
    from .termgen import (LOOP, TIMEORDERED, PermutedTerms, count_summary,
                          gen_loop_terms, gen_timeordered_terms, render_term)

    n = args.order
    if not 1 <= n <= 8:
        raise ModelError(f"order must lie in [1, 8], got {n}")
    expansion = LOOP if args.expansion == "loop" else TIMEORDERED
    terms = gen_loop_terms(n) if expansion == LOOP else gen_timeordered_terms(n)
    if args.permutations:
        terms = PermutedTerms(terms, n)
    run.evaluator = f"termgen/{expansion}"
    if args.format == "json":
        text = json.dumps({"order": n, "expansion": expansion,
                           "terms": [t.to_dict() for t in terms],
                           "rendered": [render_term(t) for t in terms]}, indent=1) + "\n"
    else:
        text = "".join(render_term(t) + "\n" for t in terms) + count_summary(n, expansion) + "\n"
    sys.stdout.write(text)
    run.write(f"terms.{'json' if args.format == 'json' else 'txt'}", text)
    return EXIT_OK


def _evaluator(method, expansion, system, bath, args, doc):
    """(callable(w1, w2, w3) -> (value, error or None), id string)."""
    if method == "lorentzian":
        from .lorentzian import LorentzianGreens, chi3_loop, chi3_timeordered

        greens = LorentzianGreens.from_bath(system, bath, eta_reg=args.eta_reg)
        fn = chi3_loop if expansion == "loop" else chi3_timeordered
        return (lambda a, b, c: (fn(system, greens, a, b, c), None)), f"lorentzian/{expansion}"
    if method == "symmetric":
        from .lorentzian import LorentzianGreens, chi3_offresonant_symmetric

        greens = LorentzianGreens.from_bath(system, bath, eta_reg=args.eta_reg)
        return ((lambda a, b, c: (chi3_offresonant_symmetric(system, greens, a, b, c), None)),
                "lorentzian/symmetric")
    from .cumulant import TIMEORDERED, LOOP, integrator_for
    from .lineshape import LineshapeKernel

    quad = _quad(args, doc)
    kernel = LineshapeKernel(bath)
    integ = integrator_for(system, kernel, quad)
    exp = LOOP if expansion == "loop" else TIMEORDERED

    def f(a, b, c):
        r = integ.integrate(exp, a, b, c)
        return r.value, r.rel_change

    return f, f"cumulant/{exp}"


def cmd_chi3(args, run: Run) -> int:
    system, bath, doc = _load(args, run)
    expansions = args.compare or [args.expansion]
    result = {"omega": [args.w1, args.w2, args.w3], "values": {}}
    ids = []
    values = []
    for exp in expansions:
        fn, ident = _evaluator(args.method, exp, system, bath, args, doc)
        value, err = fn(args.w1, args.w2, args.w3)
        ids.append(ident)
        values.append(value)
        line = f"{ident}: {fmt_complex(value)}"
        if err is not None:
            line += f"  (relative error estimate {fmt(err)})"
        print(line)
        result["values"][ident] = {"re": float(np.real(value)), "im": float(np.imag(value)),
                                   "error": err}
    if len(values) == 2:
        scale = max(abs(values[0]), abs(values[1]))
        rel = abs(values[0] - values[1]) / scale if scale > 0 else 0.0
        print(f"relative difference: {fmt(rel)}")
        result["relative_difference"] = rel
    run.evaluator = ",".join(ids)
    run.write("chi3.json", json.dumps(result, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_scan(args, run: Run) -> int:
    from .spectra import axis, scan2d

    system, bath, doc = _load(args, run)
    fn, ident = _evaluator(args.method, args.expansion, system, bath, args, doc)
    if args.method == "cumulant":
        vec = np.vectorize(lambda a, b, c: fn(a, b, c)[0], otypes=[complex])
    else:
        def vec(a, b, c):
            return fn(a, b, c)[0]
    w1 = axis(*args.w1_range[:2], int(args.w1_range[2]))
    w2 = axis(*args.w2_range[:2], int(args.w2_range[2]))
    grid = scan2d(vec, w1, w2, args.w3, sign2=args.sign2, workers=_threads(args),
                  evaluator_id=ident, model_id=model_hash(system, bath))
    run.evaluator = ident
    run.write("scan.csv", grid.to_csv())
    run.write("scan.json", grid.to_json())
    print(f"scan: {len(w1)} x {len(w2)} cells, {len(grid.metadata['failed'])} failed")
    return EXIT_OK


def cmd_resonance_study(args, run: Run) -> int:
    from .spectra import VeeScan, resonance_width_study

    fields = {f.name: getattr(args, f.name) for f in dataclasses.fields(VeeScan)
              if getattr(args, f.name, None) is not None}
    scan = VeeScan(**fields)
    res = resonance_width_study(args.etas, scan)
    run.evaluator = "lorentzian/time-ordered"
    for r in res.rows:
        cells = [fmt(r.eta)] + ["-" if v is None else fmt(v)
                                for v in (r.width, r.amplitude, r.center)] + [r.status]
        print("  ".join(cells))
    print(f"width = {fmt(res.slope)} * (1 - eta) + {fmt(res.intercept)}   R^2 = {fmt(res.r2)}   "
          f"Gamma_bb + Gamma_dd = {fmt(res.gamma_sum)}")
    run.write("resonance.csv", res.to_csv())
    return EXIT_OK


def _time_axis(spec):
    lo, hi, n = spec
    return np.linspace(lo, hi, int(n))


def cmd_response(args, run: Run) -> int:
    from .cumulant import response_S3, s3_from_chi3
    from .lineshape import LineshapeKernel

    system, bath, doc = _load(args, run)
    t1, t2, t3 = (_time_axis(a) for a in (args.t1, args.t2, args.t3))
    if args.method == "direct":
        T1, T2, T3 = np.meshgrid(t1, t2, t3, indexing="ij")
        values = response_S3(system, LineshapeKernel(bath), T3, T2, T1)
        run.evaluator = "cumulant/response"
    else:
        from .lorentzian import LorentzianGreens, chi3_timeordered
        from .model import dephasing_matrix

        greens = LorentzianGreens.from_bath(system, bath, eta_reg=args.eta_reg)
        w = system.transition()
        widths = dephasing_matrix(bath) + args.eta_reg
        omega_max = args.omega_max or 4 * float(np.max(np.abs(w) + widths))
        values = s3_from_chi3(lambda a, b, c: chi3_timeordered(system, greens, a, b, c),
                              t1, t2, t3, omega_max=omega_max, points=args.points,
                              resonances=np.abs(w).ravel(), widths=widths.ravel())
        run.evaluator = "transform/lorentzian-time-ordered"
    lines = ["t1,t2,t3,S"]
    for i, a in enumerate(t1):
        for j, b in enumerate(t2):
            for k, c in enumerate(t3):
                lines.append(f"{fmt(a)},{fmt(b)},{fmt(c)},{fmt(values[i, j, k])}")
    text = "\n".join(lines) + "\n"
    if run.write("response.csv", text) is None:
        sys.stdout.write(text)
    else:
        print(f"response: {values.size} samples, max |S| = {fmt(np.max(np.abs(values)))}")
    return EXIT_OK


def cmd_verify(args, run: Run) -> int:
    mpath = Path(args.manifest)
    man = RunManifest.read(mpath)
    base = mpath.parent
    tmp = Path(tempfile.mkdtemp(prefix="loopchi-verify-"))
    try:
        argv = list(man.command)
        if man.config is not None:
            cfg = tmp / "config.toml"
            cfg.write_text(man.config)
            argv = _replace_opt(argv, "--config", str(cfg))
        outdir = tmp / "out"
        argv = _replace_opt(argv, "--out", str(outdir))
        argv = _replace_opt(argv, "--threads", str(man.threads))
        code = main(argv, _quiet=True)
        if code != EXIT_OK:
            print(f"verify: rerun exited with code {code}")
            return code
        bad = []
        for name, digest in sorted(man.outputs.items()):
            fresh = outdir / name
            stored = base / name
            if not fresh.exists() or _sha(fresh) != digest:
                bad.append(f"{name}: recomputed output differs from manifest")
            elif stored.exists() and stored.read_bytes() != fresh.read_bytes():
                bad.append(f"{name}: stored file differs from recomputed output")
        for line in bad:
            print("verify: " + line)
        if bad:
            return EXIT_MISMATCH
        print(f"verify: {len(man.outputs)} output(s) reproduced byte-for-byte")
        return EXIT_OK
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _replace_opt(argv, flag, value):
    out = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == flag:
            skip = True
            continue
        if a.startswith(flag + "="):
            continue
        out.append(a)
    return out + [flag, value]


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    def common_opts(suppress):
        # subcommands use SUPPRESS so their defaults never overwrite values
        # given before the subcommand name
        d = argparse.SUPPRESS if suppress else None
        c = argparse.ArgumentParser(add_help=False)
        c.add_argument("--config", default=d, help="TOML model file")
        c.add_argument("--out", default=d, help="output directory (files + manifest)")
        c.add_argument("--threads", type=int, default=d,
                       help=f"worker count (default: ${THREADS_ENV} or CPU count)")
        return c

    common = common_opts(True)
    p = argparse.ArgumentParser(prog="loopchi", parents=[common_opts(False)],
                                description="Loop and time-ordered expansions of chi^(n) "
                                            "and chi^(3) evaluation for multilevel systems.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("terms", parents=[common], help="list expansion terms")
    t.add_argument("--order", type=int, required=True)
    t.add_argument("--expansion", choices=["loop", "timeordered", "time-ordered"], required=True)
    t.add_argument("--permutations", action="store_true",
                   help="expand over all permutations of the field frequencies")
    t.add_argument("--format", choices=["text", "json"], default="text")

    def evaluator_opts(q):
        q.add_argument("--method", choices=["lorentzian", "cumulant", "symmetric"],
                       default="lorentzian")
        q.add_argument("--expansion", choices=["loop", "timeordered"], default="timeordered")
        q.add_argument("--eta-reg", type=float, default=1e-6, dest="eta_reg")
        q.add_argument("--points", type=int, dest="points_per_axis", default=None,
                       help="base quadrature points per axis (cumulant)")
        q.add_argument("--t-max", type=float, dest="t_max", default=None)
        q.add_argument("--rel-tol", type=float, dest="rel_tol", default=None)
        q.add_argument("--switching", type=float, default=None,
                       help="adiabatic switching rate (cumulant)")

    c = sub.add_parser("chi3", parents=[common], help="evaluate chi^(3) at one frequency triple")
    evaluator_opts(c)
    c.add_argument("w1", type=float)
    c.add_argument("w2", type=float)
    c.add_argument("w3", type=float)
    c.add_argument("--compare", nargs=2, choices=["loop", "timeordered"],
                   help="evaluate two expansions side by side")

    s = sub.add_parser("scan", parents=[common], help="2D (w1, w2) map at fixed w3")
    evaluator_opts(s)
    s.add_argument("--w1-range", nargs=3, type=float, required=True, metavar=("LO", "HI", "N"))
    s.add_argument("--w2-range", nargs=3, type=float, required=True, metavar=("LO", "HI", "N"))
    s.add_argument("--w3", type=float, required=True)
    s.add_argument("--sign2", type=int, choices=[1, -1], default=1,
                   help="field 2 enters as sign2 * w2")

    r = sub.add_parser("resonance-study", parents=[common],
                       help="width of the correlation-induced resonance versus eta")
    r.add_argument("--etas", type=float, nargs="+", default=[0, 0.25, 0.5, 0.75, 1])
    for name, typ in (("w_ba", float), ("w_da", float), ("gamma", float),
                      ("big_lambda", float), ("kT", float), ("detuning", float),
                      ("omega3", float), ("half_span", float), ("points", int)):
        r.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)

    e = sub.add_parser("response", parents=[common], help="time-domain response S(t3, t2, t1)")
    for name in ("t1", "t2", "t3"):
        e.add_argument("--" + name, nargs=3, type=float, required=True, metavar=("LO", "HI", "N"))
    e.add_argument("--method", choices=["direct", "transform"], default="direct")
    e.add_argument("--eta-reg", type=float, default=0.3, dest="eta_reg",
                   help="Lorentzian width added for the transform method")
    e.add_argument("--omega-max", type=float, default=None, dest="omega_max")
    e.add_argument("--points", type=int, default=128)

    v = sub.add_parser("verify", parents=[common], help="rerun a manifest and byte-compare")
    v.add_argument("manifest")
    return p


COMMANDS = {"terms": cmd_terms, "chi3": cmd_chi3, "scan": cmd_scan,
            "resonance-study": cmd_resonance_study, "response": cmd_response,
            "verify": cmd_verify}


def main(argv=None, _quiet: bool = False) -> int:
    from .cumulant import QuadratureError
    from .spectra import FitError

    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    run = Run(args, argv, args.command.replace("-", "_"))
    try:
        if _quiet:
            import contextlib
            import io
            with contextlib.redirect_stdout(io.StringIO()):
                code = COMMANDS[args.command](args, run)
        else:
            code = COMMANDS[args.command](args, run)
        if args.command != "verify":
            run.finish()
        return code
    except (ModelError, tomllib.TOMLDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, FitError, ZeroDivisionError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
