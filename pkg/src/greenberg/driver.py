"""Per-field pipeline, range scans with a resumable journal, tables and golden checks."""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Optional

from . import __version__
from .annihilator import SearchHorizonExceeded, upper_bound
from .gras import REFUTED, VERIFIED, verify_ideal
from .iwasawa import (
    FinitenessWitness,
    LambdaContext,
    TruncatedLambdaIdeal,
    finiteness_lemma,
    format_poly,
    ideal_from_generators,
    omega,
    parse_poly,
    stabilization_check,
    stabilization_level,
    tk_invariant,
)
from .quadfield import FundamentalDiscriminant, class_group_3part, fundamental_discriminants

log = logging.getLogger(__name__)

CERTIFIED = "CERTIFIED"
UNRESOLVED = "UNRESOLVED"

GAMMA = "gamma"
GAMMA_INV = "gamma-inv"
# the involuted (gamma^-1) ideal reproduces the published signs of (T - a, b)
DEFAULT_ORIENTATION = GAMMA_INV

CFG_PREFIX = "#cfg "


@dataclass
class RunConfig:
    f_min: int = 0
    f_max: int = 0
    level_max: int = 7
    exp_start: Optional[int] = None
    primes: int = 64
    window: int = 5
    bits: int = 512
    jobs: int = 1
    out: Optional[str] = None
    resume: bool = False
    verify_lower: str = "auto"  # auto | gras | none
    orientation: str = "auto"  # auto | gamma | gamma-inv
    gras_level_cap: int = 2
    refute_retries: int = 3

    def __post_init__(self):
        if self.f_min < 0 or self.f_max < self.f_min:
            raise ValueError("need 0 <= min <= max")
        if self.level_max < 1:
            raise ValueError("level cap must be at least 1")
        if self.primes < 1 or self.window < 1 or self.bits < 64 or self.jobs < 1:
            raise ValueError("primes, window and jobs must be positive, bits at least 64")
        if self.exp_start is not None and self.exp_start < 1:
            raise ValueError("exponent start must be positive")
        if self.verify_lower not in ("auto", "gras", "none"):
            raise ValueError(f"unknown lower-bound mode {self.verify_lower!r}")
        if self.orientation not in ("auto", GAMMA, GAMMA_INV):
            raise ValueError(f"unknown orientation {self.orientation!r}")

    @property
    def reported_orientation(self) -> str:
        return DEFAULT_ORIENTATION if self.orientation == "auto" else self.orientation

    def header(self) -> dict:
        """Everything that determines the journal content."""
        d = asdict(self)
        for k in ("out", "resume", "jobs"):
            d.pop(k)
        d["orientation"] = self.reported_orientation
        d["version"] = __version__
        return d


@dataclass
class FieldResult:
    f: int
    residue3: int
    variant: str
    status: str
    J: list  # canonical generators, coefficient lists lowest degree first
    e: int  # J lives in Lambda/(3^e, w_level)
    level: int
    n_stab: Optional[int]
    tk: Optional[int]
    order_log3: Optional[int]
    certification: dict
    orientation: str
    diagnostics: str = ""
    timings: dict = field(default_factory=dict)

    def ideal(self) -> TruncatedLambdaIdeal:
        ctx = LambdaContext(self.e, self.level, self.variant)
        return ideal_from_generators(self.J, ctx)

    @property
    def is_zero(self) -> bool:
        return self.order_log3 == 0

    @property
    def is_maximal(self) -> bool:
        """J = (3, T)."""
        return self.status == CERTIFIED and self.J == [[0, 1], [3]]

    def describe(self) -> str:
        if not self.J:
            return "(0)"
        return "(" + ", ".join(format_poly(g) for g in self.J) + ")"

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("timings")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "FieldResult":
        return cls(**json.loads(line))


# -- per-field pipeline ------------------------------------------------------

class _Levels:
    """Upper bounds per level with refinement on refutation."""

    def __init__(self, fd: FundamentalDiscriminant, cfg: RunConfig):
        self.fd = fd
        self.cfg = cfg
        self.ub: dict = {}
        self.window: dict = {}
        self.targets: dict = {}
        self.seconds: dict = {}

    def get(self, n: int):
        if n not in self.ub:
            self._compute(n, self.cfg.window)
        return self.ub[n]

    def _compute(self, n: int, window: int):
        t = time.time()
        self.ub[n] = upper_bound(self.fd, n, e=self.cfg.exp_start, window=window,
                                 max_primes=max(self.cfg.primes, window + 1),
                                 target=self.targets.get(n))
        self.window[n] = window
        self.seconds[f"upper_{n}"] = round(time.time() - t, 3)
        log.info("f=%d n=%d: %s (3^%d)", self.fd.f, n, self.ub[n].ideal.describe(), self.ub[n].ideal.log3_index)

    def refine(self, n: int) -> bool:
        """Recompute level n with a doubled window; True if the ideal grew."""
        old = self.ub[n].ideal
        self._compute(n, 2 * self.window[n])
        new = self.ub[n].ideal
        return new.log3_index < old.log3_index or new.e != old.e

    def index(self, n: int) -> int:
        return self.get(n).ideal.log3_index

    def stable(self, n: int) -> bool:
        """U_n and U_{n+1} describe the same ideal."""
        lo, hi = self.get(n).ideal, self.get(n + 1).ideal
        e = max(lo.e, hi.e)
        return stabilization_check(lo.with_exponent(e), hi.with_exponent(e))

    def inconsistent_below(self, s: int, n0: int):
        """Lowest m < s with U_m not inside U_s + (omega_m), or None.

        Every U_m lies in J + (omega_m), so such an m shows U_s is not saturated.
        """
        hi = self.get(s).ideal
        for m in range(n0, s):
            lo = self.get(m).ideal
            e = max(lo.e, hi.e)
            if not lo.with_exponent(e).issubset(hi.with_exponent(e).reduce_to_level(m)):
                return m
        return None

    def forget_from(self, n: int):
        for k in [k for k in self.ub if k >= n]:
            del self.ub[k]


def _first_level(fd: FundamentalDiscriminant) -> int:
    # omega'_0 = 1, so C_0 = 0 when f = 1 (mod 3)
    return 1 if fd.residue3 == 1 else 0


def _find_witness(lower: dict, levels: _Levels, computed: Iterable[int]):
    for m in sorted(lower, reverse=True):
        a = lower[m]["a"]
        for N in sorted(computed):
            if N < m:
                continue
            b = levels.index(N)
            if b < a:
                raise ArithmeticError(f"upper bound 3^{b} at level {N} below lower bound 3^{a} at level {m}")
            w = FinitenessWitness(m, N, a, b)
            if finiteness_lemma(w):
                return w
    return None


def compute_field(fd: FundamentalDiscriminant, cfg: RunConfig) -> FieldResult:
    """Stabilize the upper-bound ideals, then certify finiteness by a lower bound and the lemma."""
    start = time.time()
    if not isinstance(fd, FundamentalDiscriminant):
        fd = FundamentalDiscriminant(int(fd))
    levels = _Levels(fd, cfg)
    n0 = _first_level(fd)
    lower: dict = {}
    if fd.residue3 == 1:
        lower[0] = {"a": 0, "method": "trivial"}
    else:
        h3 = class_group_3part(fd.f).h3
        lower[0] = {"a": h3, "method": "class-number"}
        levels.targets[0] = h3
    notes = []
    try:
        result = _run_levels(fd, cfg, levels, n0, lower, notes)
    except (ArithmeticError, SearchHorizonExceeded) as exc:
        notes.append(f"{type(exc).__name__}: {exc}")
        result = None
    levels.seconds["total"] = round(time.time() - start, 3)
    if result is None:
        return _unresolved(fd, cfg, levels, lower, notes)
    s, witness = result
    return _certified(fd, cfg, levels, s, lower, witness, notes)


def _run_levels(fd, cfg, levels: _Levels, n0: int, lower: dict, notes: list):
    use_gras = cfg.verify_lower != "none"
    restarts = 0
    while True:
        s = None
        # level_max caps the stabilization level; confirming it needs one level more
        for n in range(n0, cfg.level_max + 1):
            if n >= 1 and levels.index(n) == 0:
                # C_n = 0 forces C = 0; the lemma holds with a = b = 0
                return n, FinitenessWitness(0, n, 0, 0)
            if levels.stable(n):
                s = n
                break
        if s is None:
            notes.append(f"no stabilization up to level cap {cfg.level_max}")
            return None
        m = levels.inconsistent_below(s, n0)
        if m is not None:
            notes.append(f"U_{m} not inside U_{s} + (omega_{m}); adding primes at level {s}")
            restarts += 1
            if restarts > cfg.refute_retries:
                notes.append("upper bounds stayed inconsistent across levels")
                return None
            levels.refine(s)
            levels.forget_from(s + 1)
            continue
        computed = range(n0, s + 2)
        witness = None
        if cfg.verify_lower != "gras":
            witness = _find_witness(lower, levels, computed)
        if witness is None and use_gras:
            m = min(s, cfg.gras_level_cap)
            status = _gras_lower(fd, cfg, levels, m, lower, notes)
            if status == "changed":
                restarts += 1
                if restarts > cfg.refute_retries:
                    notes.append("upper bound kept changing after refutations")
                    return None
                levels.forget_from(m + 1)
                continue
            witness = _find_witness(lower, levels, computed)
        N = s + 2
        while witness is None and N <= cfg.level_max + 1:
            witness = _find_witness(lower, levels, [N])
            N += 1
        if witness is None:
            notes.append("finiteness lemma not satisfied within the level cap")
            return None
        return s, witness


def _gras_lower(fd, cfg, levels: _Levels, m: int, lower: dict, notes: list) -> str:
    """Certify a lower bound at level m; 'changed' if a refutation enlarged U_m."""
    U = levels.get(m).ideal
    t = time.time()
    res = verify_ideal(fd, m, U, bits=cfg.bits, max_level=cfg.gras_level_cap)
    levels.seconds[f"gras_{m}"] = round(time.time() - t, 3)
    best = lower.get(m, {"a": -1})["a"]
    if res.lower_log3 is not None and res.lower_log3 > best:
        lower[m] = {"a": res.lower_log3, "method": "gras"}
    if res.status == VERIFIED:
        return "verified"
    if res.status != REFUTED:
        notes.append(f"gras at level {m}: {res.status} {res.note}")
        return "inconclusive"
    notes.append(f"gras refuted U_{m} = {U.describe()}; adding primes")
    if not levels.refine(m):
        notes.append(f"more primes did not change U_{m}")
        return "inconclusive"
    return "changed"


def _oriented(ideal: TruncatedLambdaIdeal, cfg: RunConfig) -> TruncatedLambdaIdeal:
    return ideal.involuted() if cfg.reported_orientation == GAMMA_INV else ideal


def _certified(fd, cfg, levels: _Levels, s: int, lower: dict, w: FinitenessWitness, notes) -> FieldResult:
    ub = levels.get(s)
    J = _oriented(ub.ideal, cfg)
    n_stab = stabilization_level(J)
    if n_stab != s and not J.is_unit():
        notes.append(f"first equal pair of levels at {s}, omega_{n_stab} already in J")
    cert = {
        "upper": {"level": s, "primes_used": ub.report.primes_used,
                  "stability_window_met": ub.report.saturated, "window": levels.window[s]},
        "lower": {"level": w.m, "a": w.a, "method": lower[w.m]["method"], "verified": True},
        "lemma": {"m": w.m, "n": w.n, "a": w.a, "b": w.b},
        # a lower bound meeting the upper bound pins down J itself, not just finiteness
        "exact": w.a == J.log3_index,
    }
    return FieldResult(
        f=fd.f, residue3=fd.residue3, variant=fd.variant, status=CERTIFIED,
        J=[list(g) for g in J.generators()], e=J.e, level=s,
        n_stab=n_stab, tk=_tk(J), order_log3=J.log3_index,
        certification=cert, orientation=cfg.reported_orientation,
        diagnostics="; ".join(notes), timings=dict(levels.seconds),
    )


def _tk(J: TruncatedLambdaIdeal):
    k = tk_invariant(J)
    return None if k == float("inf") else int(k)


def _unresolved(fd, cfg, levels: _Levels, lower: dict, notes) -> FieldResult:
    ups = {str(n): ub.ideal.log3_index for n, ub in sorted(levels.ub.items())}
    return FieldResult(
        f=fd.f, residue3=fd.residue3, variant=fd.variant, status=UNRESOLVED,
        J=[], e=0, level=0, n_stab=None, tk=None, order_log3=None,
        certification={"upper_log3_by_level": ups,
                       "lower": {str(m): v for m, v in sorted(lower.items())}},
        orientation=cfg.reported_orientation,
        diagnostics="; ".join(notes), timings=dict(levels.seconds),
    )


# -- range scans -------------------------------------------------------------

def _work(args):
    f, cfg = args
    return compute_field(FundamentalDiscriminant(f), cfg)


def _read_journal(path: str):
    """Header dict and the records of a journal, dropping a torn last line."""
    header = None
    records = []
    with open(path, "rb") as fh:
        data = fh.read()
    complete = data[: data.rfind(b"\n") + 1] if b"\n" in data else b""
    if len(complete) != len(data):
        with open(path, "r+b") as fh:
            fh.truncate(len(complete))
    for line in complete.decode().splitlines():
        if line.startswith(CFG_PREFIX):
            header = json.loads(line[len(CFG_PREFIX):])
        elif line.strip():
            records.append(FieldResult.from_json(line))
    return header, records


def read_results(path: str) -> list:
    return _read_journal(path)[1]


def scan_range(cfg: RunConfig) -> Iterator[FieldResult]:
    """Process every fundamental discriminant in [f_min, f_max) in ascending order.

    With ``cfg.out`` set, records are appended to a journal as they complete,
    and ``cfg.resume`` skips discriminants already recorded there.
    """
    done: set = set()
    fh = None
    if cfg.out:
        if cfg.resume and os.path.exists(cfg.out):
            header, records = _read_journal(cfg.out)
            if header is not None and header != cfg.header():
                raise ValueError("journal was written with a different configuration")
            done = {r.f for r in records}
            fh = open(cfg.out, "a")
            if header is None:
                _write(fh, CFG_PREFIX + json.dumps(cfg.header(), sort_keys=True))
        else:
            fh = open(cfg.out, "w")
            _write(fh, CFG_PREFIX + json.dumps(cfg.header(), sort_keys=True))
    todo = [f for f in fundamental_discriminants(cfg.f_min, cfg.f_max) if f not in done]
    try:
        if cfg.jobs == 1:
            results = (compute_field(FundamentalDiscriminant(f), cfg) for f in todo)
            for r in results:
                if fh:
                    _write(fh, r.to_json())
                yield r
        else:
            with ProcessPoolExecutor(cfg.jobs) as pool:
                # map yields in submission order, which serializes the journal by f
                for r in pool.map(_work, [(f, cfg) for f in todo], chunksize=1):
                    if fh:
                        _write(fh, r.to_json())
                    yield r
    finally:
        if fh:
            fh.close()


def _write(fh, line: str):
    fh.write(line + "\n")
    fh.flush()
    os.fsync(fh.fileno())


# -- tables ------------------------------------------------------------------

@dataclass
class ClassTable:
    residue3: int
    counts: dict  # (n_stab, k) -> count
    zero: int = 0
    maximal: int = 0
    unresolved: int = 0

    def rows(self) -> list:
        lo = 1 if self.residue3 == 1 else 0
        top = max([n for n, _ in self.counts] + [lo])
        return list(range(lo, top + 1))

    def columns(self) -> list:
        return list(range(1, max([k for _, k in self.counts] + [1]) + 1))

    def row_total(self, n: int) -> int:
        return sum(c for (r, _), c in self.counts.items() if r == n)

    def column_total(self, k: int) -> int:
        return sum(c for (_, col), c in self.counts.items() if col == k)

    @property
    def nonzero(self) -> int:
        return sum(self.counts.values())

    def render(self) -> str:
        cols = self.columns()
        name = lambda k: "T" if k == 1 else f"T^{k}"
        out = [f"# f = {self.residue3} mod 3", ",".join(["n"] + [name(k) for k in cols] + ["Total"])]
        for n in self.rows():
            out.append(",".join([str(n)] + [str(self.counts.get((n, k), 0)) for k in cols]
                                + [str(self.row_total(n))]))
        out.append(",".join(["Total"] + [str(self.column_total(k)) for k in cols] + [str(self.nonzero)]))
        out.append(f"zero,{self.zero}")
        out.append(f"maximal,{self.maximal}")
        out.append(f"unresolved,{self.unresolved}")
        return "\n".join(out)


def aggregate_tables(results: Iterable[FieldResult]) -> dict:
    """Counts by (level of stabilization, T^k) for each residue class of f mod 3."""
    tables = {r: ClassTable(r, {}) for r in (0, 2, 1)}
    for res in results:
        t = tables[res.residue3]
        if res.status != CERTIFIED:
            t.unresolved += 1
            continue
        if res.is_zero:
            t.zero += 1
            continue
        if res.is_maximal:
            t.maximal += 1
        key = (res.n_stab, res.tk)
        t.counts[key] = t.counts.get(key, 0) + 1
    return tables


def render_tables(tables: dict) -> str:
    return "\n\n".join(tables[r].render() for r in (0, 2, 1)) + "\n"


# -- golden checks -----------------------------------------------------------

@dataclass(frozen=True)
class Expectation:
    f: int
    generators: tuple
    n: int
    k: int

    def describe(self) -> str:
        return "(" + ", ".join(format_poly(g) for g in self.generators) + ")"


def parse_golden(text: str) -> list:
    """Lines ``f; gen1, gen2, ...; n; k`` (k may be written ``T^k``); '#' starts a comment."""
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(";")]
        if len(parts) != 4:
            raise ValueError(f"bad golden line {raw!r}")
        f = int(parts[0])
        gens = tuple(tuple(parse_poly(g)) for g in parts[1].split(",") if g.strip())
        n = int(parts[2])
        k = parts[3].replace(" ", "")
        k = 1 if k == "T" else int(k[2:]) if k.startswith("T^") else int(k)
        out.append(Expectation(f, gens, n, k))
    return out


def load_golden(path: Optional[str] = None) -> list:
    if path is None:
        from importlib.resources import files

        return parse_golden(files("greenberg").joinpath("data/golden.txt").read_text())
    with open(path) as fh:
        return parse_golden(fh.read())


@dataclass
class GoldenVerdict:
    f: int
    passed: bool
    orientation: Optional[str]
    detail: str


def _same_ideal(res: FieldResult, exp: Expectation):
    """Which orientation of the result's J equals the expected ideal, if any."""
    level = max(res.level, exp.n)
    ctx = LambdaContext(res.e, level, res.variant)
    mine = ideal_from_generators(list(res.J) + [list(omega(res.level, res.variant))], ctx)
    theirs = ideal_from_generators([list(g) for g in exp.generators], ctx)
    other = GAMMA if res.orientation == GAMMA_INV else GAMMA_INV
    for name, cand in ((res.orientation, mine), (other, mine.involuted())):
        if cand == theirs:
            return name
    return None


def golden_check(results: Iterable[FieldResult], expectations: Iterable[Expectation]) -> list:
    """Compare ideal equality, level of stabilization and T^k with published entries."""
    by_f = {r.f: r for r in results}
    out = []
    for exp in expectations:
        res = by_f.get(exp.f)
        if res is None:
            out.append(GoldenVerdict(exp.f, False, None, "no result"))
            continue
        if res.status != CERTIFIED:
            out.append(GoldenVerdict(exp.f, False, None, "unresolved"))
            continue
        orient = _same_ideal(res, exp)
        problems = []
        if orient is None:
            problems.append(f"J {res.describe()} != {exp.describe()}")
        if res.n_stab != exp.n:
            problems.append(f"n {res.n_stab} != {exp.n}")
        if res.tk != exp.k:
            problems.append(f"k {res.tk} != {exp.k}")
        detail = "; ".join(problems) if problems else f"J {exp.describe()} n={exp.n} T^{exp.k}"
        out.append(GoldenVerdict(exp.f, not problems, orient, detail))
    return out
