"""Fast invariant checks, one per load-bearing property, runnable from
the command line (`spderk selftest`).  Each check raises on failure and
finishes in well under a second."""

import math

import numpy as np

from .experiments import (
    ErrorRow,
    ErrorTable,
    ReferenceSpec,
    StudyConfig,
    fit_order,
    run_study,
)
from .nemytskii import builtin_problem, check_commutativity
from .qwiener import QSpec, coarsen, sample_path, theta_weights
from .schemes import (
    StepContext,
    erkm15_closed_form_step,
    erkm15_tableau,
    erkm_step,
    hatted_coefficients,
    solve,
)
from .spectral import (
    LinearOperatorSpec,
    SineBasisGrid,
    apply_diagonal,
    h_r_norm,
    to_physical,
    to_spectral,
)


def _round_trip():
    grid = SineBasisGrid(32)
    rng = np.random.default_rng(0)
    a = rng.standard_normal(32)
    back = to_spectral(to_physical(a, grid), grid)
    assert np.abs(back - a).max() <= 1e-12 * max(1.0, np.abs(a).max())


def _parseval():
    op = LinearOperatorSpec(1.0, 16)
    rng = np.random.default_rng(1)
    a = rng.standard_normal(16)
    assert h_r_norm(op, 0.0, a) == float(np.sqrt(np.sum(a * a)))


def _semigroup():
    op = LinearOperatorSpec(0.1, 12)
    a = np.ones(12)
    one = apply_diagonal("semigroup", op, apply_diagonal("semigroup", op, a, t=0.3), t=0.7)
    two = apply_diagonal("semigroup", op, a, t=1.0)
    np.testing.assert_allclose(one, two, rtol=1e-13)


def _joint_covariance():
    q = QSpec(2, np.array([1.0, 0.25]))
    h = 0.37
    path = sample_path(q, 20_000, h, 99)
    for j in range(2):
        cov = np.cov(path.dB[:, j], path.I[:, j])
        np.testing.assert_allclose(
            cov, [[h, h * h / 2], [h * h / 2, h**3 / 3]], rtol=0.05
        )


def _coarsen_composition():
    q = QSpec(3, np.array([1.0, 0.5, 0.25]))
    path = sample_path(q, 16, 0.0625, 4)
    two_step = coarsen(coarsen(path, 2), 2)
    one_step = coarsen(path, 4)
    assert np.abs(two_step.dB - one_step.dB).max() <= 1e-14
    assert np.abs(two_step.I - one_step.I).max() <= 1e-14


def _derivative_maps():
    p = builtin_problem("example3", 8)
    grid = SineBasisGrid(8)
    v = np.linspace(-1.0, 1.0, grid.n_nodes)
    eps = 1e-6
    from .nemytskii import eval_coeff

    fd = (eval_coeff("b", p, v + eps, grid) - eval_coeff("b", p, v - eps, grid)) / (2 * eps)
    assert np.abs(fd - eval_coeff("b_y", p, v, grid)).max() <= 1e-6


def _commutativity():
    p = builtin_problem("example3", 8)
    grid = SineBasisGrid(8)
    rng = np.random.default_rng(5)
    v, vt, u, ut = rng.standard_normal((4, grid.n_nodes))
    assert check_commutativity(p, v, vt, u, ut, grid)


def _scheme_equivalence():
    p = builtin_problem("example3", 16)
    grid = SineBasisGrid(16)
    opspec = LinearOperatorSpec(p.kappa, 16)
    rng = np.random.default_rng(21)
    for h in (0.1, 0.01):
        ctx = StepContext(p, grid, opspec, h)
        path = sample_path(p.qspec, 1, h, 13)
        w = theta_weights(path.step(0), p.qspec, grid, gsq=ctx.gsq, G=ctx.G)
        y = rng.standard_normal(16) / (1 + np.arange(16.0)) ** 2
        c = rng.uniform(0.2, 2.0, 7)
        ctx.set_state(y, w)
        a = erkm_step(erkm15_tableau(c), ctx)
        ctx.set_state(y, w)
        b = erkm15_closed_form_step(hatted_coefficients(c, h), ctx)
        assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(a).max())


def _eval_counts():
    p = builtin_problem("example3", 8)
    grid = SineBasisGrid(8)
    ctx = StepContext(p, grid, LinearOperatorSpec(p.kappa, 8), 0.1)
    path = sample_path(p.qspec, 1, 0.1, 2)
    w = theta_weights(path.step(0), p.qspec, grid, gsq=ctx.gsq, G=ctx.G)
    ctx.set_state(np.zeros(8), w)
    erkm_step(erkm15_tableau(np.ones(7)), ctx)
    assert (ctx.counters.f, ctx.counters.b) == (5, 6)


def _semigroup_decay():
    from .nemytskii import ProblemSpec

    def zero(x, y):
        return np.zeros_like(y)

    q = QSpec(1, np.array([0.0]), "scalar_constant")
    p = ProblemSpec(0.05, zero, zero, np.ones(8) / (1 + np.arange(8.0)) ** 2, q,
                    f_y=zero, f_yy=zero, b_y=zero, b_yy=zero)
    path = sample_path(q, 16, 1.0 / 16, 0)
    traj = solve(p, "erkm15", path, 8)
    lam = LinearOperatorSpec(0.05, 8).eigenvalues
    expected = np.exp(-lam) * p.initial_coeffs
    np.testing.assert_allclose(traj[-1], expected, rtol=1e-12)


def _study_self_consistency():
    cfg = StudyConfig("example2", N=6, M_list=(8,), realizations=2,
                      schemes=("ewp",), reference=ReferenceSpec("ewp", 8), seed=1)
    table = run_study(cfg)
    assert table.rows[0].rms_error == 0.0


def _order_fit():
    rows = tuple(
        ErrorRow("x", M, 1.0 / M, 2.0 * (1.0 / M) ** 1.5, 0.0, 0)
        for M in (8, 16, 32, 64)
    )
    slope, _ = fit_order(ErrorTable(rows), "x")
    assert abs(slope - 1.5) <= 1e-12


SELFTESTS = (
    ("spectral.round_trip", _round_trip),
    ("spectral.parseval", _parseval),
    ("spectral.semigroup", _semigroup),
    ("qwiener.joint_covariance", _joint_covariance),
    ("qwiener.coarsen_composition", _coarsen_composition),
    ("nemytskii.derivative_maps", _derivative_maps),
    ("nemytskii.commutativity", _commutativity),
    ("schemes.tableau_equivalence", _scheme_equivalence),
    ("schemes.eval_counts", _eval_counts),
    ("schemes.semigroup_decay", _semigroup_decay),
    ("experiments.reference_self_consistency", _study_self_consistency),
    ("experiments.order_fit", _order_fit),
)


def run_selftests(write=None):
    """Run every check; returns the number of failures."""
    failed = 0
    for name, fn in SELFTESTS:
        try:
            fn()
        except Exception as e:  # noqa: BLE001 - report, do not mask siblings
            failed += 1
            line = "%s: FAIL (%s)" % (name, e)
        else:
            line = "%s: ok" % name
        if write is not None:
            write(line)
    return failed
