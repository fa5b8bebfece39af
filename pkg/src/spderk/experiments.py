"""Monte-Carlo convergence studies.

A study fixes a built-in problem and a list of schemes, samples R
independent driving paths at the finest time resolution, computes a
truth per path (the exact solution where available, otherwise the
Wagner-Platen scheme on the fine path), reruns every scheme on coarsened
versions of the *same* path, and reduces squared terminal H-norm errors
to an ErrorTable of RMS errors with delta-method standard errors.

Coupling truth and approximations through one path per realization is
what makes desk-scale runs (R of order 100) resolve the convergence
orders cleanly; the per-realization work is embarrassingly parallel and
results are reduced in realization-index order so the output is
bit-identical for any worker count.
"""

import math
import multiprocessing
import os
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DimensionError, DivergenceError, StudyError
from .nemytskii import BUILTIN_PROBLEMS, builtin_problem
from .qwiener import coarsen, sample_path
from .schemes import StepContext, resolve_scheme, solve
from .spectral import LinearOperatorSpec, SineBasisGrid

__all__ = [
    "ReferenceSpec",
    "StudyConfig",
    "ErrorRow",
    "ErrorTable",
    "CSV_HEADER",
    "default_config",
    "exact_solution_example1",
    "rms_error",
    "fit_order",
    "order_summary",
    "run_study",
]

CSV_HEADER = "scheme,M,h,rms_error,std_error,flagged"

DEFAULT_SCHEMES = ("lie", "exe", "dfmm", "ewp", "erkm15")
DESK_M_LIST = (8, 16, 32, 64, 128, 256, 512)
DESK_M_REF = 4096


@dataclass(frozen=True)
class ReferenceSpec:
    """Truth provider: mode 'exact' (closed-form solution fed the fine
    path's terminal Brownian value) or 'ewp' at M steps."""

    mode: str
    M: int = None


@dataclass(frozen=True)
class StudyConfig:
    problem: str
    N: int = 64
    K: int = None             # None: problem default (1 for example1, else N)
    T: float = 1.0
    M_list: tuple = DESK_M_LIST
    realizations: int = 200
    schemes: tuple = DEFAULT_SCHEMES
    reference: ReferenceSpec = None
    seed: int = 0
    out_dir: str = None
    strict_table: bool = False

    def validated(self):
        """Canonical copy with defaults resolved; raises ConfigError."""
        if self.problem not in BUILTIN_PROBLEMS:
            raise ConfigError(
                "unknown problem %r (have: %s)"
                % (self.problem, ", ".join(sorted(BUILTIN_PROBLEMS)))
            )
        if self.N < 1 or not float(self.T) > 0:
            raise ConfigError("need N >= 1 and T > 0")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

        M_list = tuple(int(M) for M in self.M_list)
        if not M_list or any(M < 1 for M in M_list):
            raise ConfigError("M_list must be nonempty positive integers")
        if len(set(M_list)) != len(M_list):
            raise ConfigError("M_list has duplicates")
        M_list = tuple(sorted(M_list))
        fine = M_list[-1]
        for M in M_list:
            if fine % M:
                raise ConfigError("every M in M_list must divide max(M_list)"
                                  " (got %d vs %d)" % (M, fine))

        try:
            probe = builtin_problem(self.problem, self.N, self.K)
        except ValueError as e:
            raise ConfigError(str(e)) from e

        ref = self.reference
        if ref is None:
            ref = (ReferenceSpec("exact") if probe.exact is not None
                   else ReferenceSpec("ewp", DESK_M_REF))
        elif isinstance(ref, dict):
            ref = ReferenceSpec(ref.get("mode"), ref.get("M"))
        if ref.mode == "exact":
            if probe.exact is None:
                raise ConfigError("problem %r has no exact solution" % self.problem)
            if probe.qspec.K != 1:
                raise ConfigError("exact reference needs a single noise mode")
            ref = ReferenceSpec("exact", None)
        elif ref.mode == "ewp":
            M_ref = DESK_M_REF if ref.M is None else int(ref.M)
            if M_ref < fine or M_ref % fine:
                raise ConfigError(
                    "reference M=%d must be a multiple of max(M_list)=%d"
                    % (M_ref, fine)
                )
            ref = ReferenceSpec("ewp", M_ref)
        else:
            raise ConfigError("reference mode must be 'exact' or 'ewp'")

        schemes = tuple(self.schemes)
        if not schemes:
            raise ConfigError("schemes list is empty")
        labels = []
        for sel in schemes:
            try:
                labels.append(resolve_scheme(sel, self.strict_table)[0])
            except (ValueError, KeyError, TypeError, DimensionError) as e:
                raise ConfigError("bad scheme entry %r: %s" % (sel, e)) from e
        if len(set(labels)) != len(labels):
            raise ConfigError("scheme labels must be unique: %s" % (labels,))
        for lab in labels:
            if "," in lab:
                raise ConfigError("scheme label %r may not contain a comma" % lab)

        return replace(self, M_list=M_list, reference=ref, schemes=schemes,
                       T=float(self.T))


def default_config(problem, **overrides):
    """Desk-scale StudyConfig for a built-in problem (validated)."""
    base = dict(problem=problem, N=64, T=1.0, M_list=DESK_M_LIST,
                realizations=200, schemes=DEFAULT_SCHEMES, seed=0)
    base.update(overrides)
    return StudyConfig(**base).validated()


@dataclass(frozen=True)
class ErrorRow:
    scheme: str
    M: int
    h: float
    rms_error: float
    std_error: float
    flagged: int


@dataclass(frozen=True)
class ErrorTable:
    rows: tuple

    def __post_init__(self):
        keys = [(r.scheme, r.M) for r in self.rows]
        if len(set(keys)) != len(keys):
            raise ValueError("rows must be uniquely keyed by (scheme, M)")
        for r in self.rows:
            if r.rms_error < 0:
                raise ValueError("rms_error must be nonnegative")

    def schemes(self):
        seen = []
        for r in self.rows:
            if r.scheme not in seen:
                seen.append(r.scheme)
        return seen

    def rows_for(self, scheme):
        return [r for r in self.rows if r.scheme == scheme]

    def write_csv(self, fh):
        fh.write(CSV_HEADER + "\n")
        for r in self.rows:
            fh.write("%s,%d,%r,%r,%r,%d\n"
                     % (r.scheme, r.M, r.h, r.rms_error, r.std_error, r.flagged))

    @classmethod
    def read_csv(cls, fh):
        lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError("expected header %r" % CSV_HEADER)
        rows = []
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != 6:
                raise ValueError("malformed row: %r" % ln)
            rows.append(ErrorRow(parts[0], int(parts[1]), float(parts[2]),
                                 float(parts[3]), float(parts[4]), int(parts[5])))
        return cls(tuple(rows))


def exact_solution_example1(t, beta_t, grid):
    """Coefficients n^{-4} exp(-(n^2 pi^2 + 1/2) t + beta_t), n = 1..N.

    grid may be a SineBasisGrid or a plain mode count.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    N = grid if isinstance(grid, int) else grid.N
    n = np.arange(1, N + 1, dtype=float)
    return n**-4.0 * np.exp(-(n**2 * math.pi**2 + 0.5) * t + beta_t)


def _reduce_squared(sq, R_total):
    """(rms, standard error, flagged count) from squared errors with NaN
    marking flagged realizations."""
    sq = np.asarray(sq, dtype=float)
    valid = sq[~np.isnan(sq)]
    flagged = R_total - valid.size
    if valid.size == 0:
        return float("nan"), float("nan"), flagged
    rms = math.sqrt(float(valid.mean()))
    if rms == 0.0 or valid.size < 2:
        return rms, 0.0, flagged
    se = float(valid.std(ddof=1)) / (2.0 * rms * math.sqrt(valid.size))
    return rms, se, flagged


def rms_error(terminal_pairs):
    """RMS of H-norm terminal errors over realizations.

    Returns (rms, standard_error); the standard error of the RMS comes
    from the delta method: std(squared errors) / (2 rms sqrt(R)).
    """
    pairs = list(terminal_pairs)
    if not pairs:
        raise ValueError("need at least one (approx, truth) pair")
    sq = []
    for approx, truth in pairs:
        d = np.asarray(approx, dtype=float) - np.asarray(truth, dtype=float)
        if d.ndim != 1:
            raise ValueError("terminal fields must be coefficient vectors")
        sq.append(float(d @ d))
    rms, se, _ = _reduce_squared(sq, len(sq))
    return rms, se


def fit_order(table, scheme):
    """Least-squares slope of log(rms error) against log(h).

    Returns (slope, residual).  Rows with nonpositive or non-finite
    errors are dropped with a warning; fewer than 3 usable rows is an
    error.
    """
    rows = table.rows_for(scheme)
    if not rows:
        raise ValueError("no rows for scheme %r" % scheme)
    usable = [r for r in rows if r.rms_error > 0 and math.isfinite(r.rms_error)]
    if len(usable) < len(rows):
        warnings.warn("%s: dropped %d rows with nonpositive errors"
                      % (scheme, len(rows) - len(usable)))
    if len(usable) < 3:
        raise ValueError("need at least 3 usable rows to fit an order")
    x = np.log([r.h for r in usable])
    y = np.log([r.rms_error for r in usable])
    coeffs, res, _, _, _ = np.polyfit(x, y, 1, full=True)
    residual = float(res[0]) if res.size else 0.0
    return float(coeffs[0]), residual


def order_summary(table):
    """[(scheme, slope, residual)] for every scheme with a fittable set
    of rows; schemes without one are silently skipped."""
    out = []
    for scheme in table.schemes():
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                slope, residual = fit_order(table, scheme)
        except ValueError:
            continue
        out.append((scheme, slope, residual))
    return out


class _StudyState:
    """Per-worker immutable study machinery (problem, contexts)."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.problem = builtin_problem(cfg.problem, cfg.N, cfg.K)
        self.grid = SineBasisGrid(cfg.N)
        self.opspec = LinearOperatorSpec(self.problem.kappa, cfg.N)
        ref = cfg.reference
        self.fine_M = ref.M if ref.mode == "ewp" else max(cfg.M_list)
        self.h_fine = cfg.T / self.fine_M
        step_Ms = set(cfg.M_list)
        if ref.mode == "ewp":
            step_Ms.add(self.fine_M)
        self.ctxs = {
            M: StepContext(self.problem, self.grid, self.opspec, cfg.T / M)
            for M in step_Ms
        }

    def realization(self, r):
        """Squared terminal errors, shape (schemes, M_list); NaN = flagged."""
        cfg = self.cfg
        fine = sample_path(self.problem.qspec, self.fine_M, self.h_fine,
                           cfg.seed, r)
        out = np.full((len(cfg.schemes), len(cfg.M_list)), np.nan)
        try:
            if cfg.reference.mode == "exact":
                beta_T = float(fine.dB.sum())
                truth = self.problem.exact(cfg.T, beta_T)
            else:
                with np.errstate(over="ignore", invalid="ignore"):
                    truth = solve(self.problem, "ewp", fine, cfg.N,
                                  ctx=self.ctxs[self.fine_M])[-1]
        except DivergenceError:
            return out
        for jM, M in enumerate(cfg.M_list):
            path = coarsen(fine, self.fine_M // M)
            assert path.lineage == fine.lineage, "coarsening broke path lineage"
            for iS, sel in enumerate(cfg.schemes):
                try:
                    with np.errstate(over="ignore", invalid="ignore"):
                        approx = solve(self.problem, sel, path, cfg.N,
                                       strict_table=cfg.strict_table,
                                       ctx=self.ctxs[M])[-1]
                except DivergenceError:
                    continue
                d = approx - truth
                out[iS, jM] = float(d @ d)
        return out


_POOL_STATE = None


def _pool_init(cfg):
    global _POOL_STATE
    _POOL_STATE = _StudyState(cfg)


def _pool_task(r):
    return _POOL_STATE.realization(r)


def run_study(cfg, workers=1):
    """Run the configured study; returns an ErrorTable.

    Results are reduced in realization-index order and are bit-identical
    for any worker count.  Raises StudyError if more than 1% of the
    realizations of any (scheme, M) cell were flagged (reference or
    scheme divergence).
    """
    cfg = cfg.validated()
    R = cfg.realizations
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(int(workers), R))

    sq = np.empty((R, len(cfg.schemes), len(cfg.M_list)))
    if workers == 1:
        state = _StudyState(cfg)
        for r in range(R):
            sq[r] = state.realization(r)
    else:
        with multiprocessing.get_context().Pool(
            workers, initializer=_pool_init, initargs=(cfg,)
        ) as pool:
            chunk = max(1, R // (workers * 8))
            for r, res in enumerate(pool.imap(_pool_task, range(R), chunk)):
                sq[r] = res

    labels = [resolve_scheme(s, cfg.strict_table)[0] for s in cfg.schemes]
    rows = []
    bad = []
    for iS, label in enumerate(labels):
        for jM, M in enumerate(cfg.M_list):
            rms, se, flagged = _reduce_squared(sq[:, iS, jM], R)
            rows.append(ErrorRow(label, M, cfg.T / M, rms, se, flagged))
            if flagged > 0.01 * R:
                bad.append((label, M, flagged))
    if bad:
        detail = "; ".join("%s at M=%d: %d of %d" % (l, M, n, R) for l, M, n in bad)
        raise StudyError("flagged realizations exceed 1%%: %s" % detail)
    return ErrorTable(tuple(rows))
