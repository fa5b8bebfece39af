"""Problem definitions and pointwise Nemytskii evaluation.

A problem is the semilinear SPDE

    dX_t(x) = (A X_t(x) + f(x, X_t(x))) dt + b(x, X_t(x)) dW_t(x)

on (0, 1) with A = kappa * Laplace (Dirichlet).  Drift and diffusion act
as composition operators F(v)(x) = f(x, v(x)) and (B(v)u)(x) =
b(x, v(x)) u(x), so on the collocation grid every operator application is
a pointwise product.  The state dimension is d = 1 throughout.

Pointwise maps receive (x, y) as arrays of node coordinates and state
values and must be pure, reentrant and vectorized; derivative maps f_y,
f_yy, b_y, b_yy (with respect to y) are optional and only required by the
Wagner-Platen stepper.
"""

import numpy as np

from .errors import CapabilityError
from .qwiener import QSpec

__all__ = [
    "ProblemSpec",
    "eval_coeff",
    "check_commutativity",
    "builtin_problem",
    "BUILTIN_PROBLEMS",
]

_WHICH = ("f", "b", "f_y", "f_yy", "b_y", "b_yy")


class ProblemSpec:
    """One SPDE instance.

    Parameters
    ----------
    kappa : diffusion constant of the linear part.
    f, b : pointwise drift / diffusion maps (x, y) -> real.
    initial_coeffs : spectral coefficients of the projected initial value.
    qspec : QSpec of the driving noise.
    f_y, f_yy, b_y, b_yy : optional pointwise derivative maps.
    exact : optional closed-form solution, called as exact(t, beta_t) and
        returning spectral coefficients; beta_t is the driving scalar
        Brownian value (only meaningful for single-mode noise).
    expected_order : optional strong temporal order metadata (no runtime
        role; echoed into study outputs).
    name : label used in error messages and tables.
    """

    def __init__(
        self,
        kappa,
        f,
        b,
        initial_coeffs,
        qspec,
        f_y=None,
        f_yy=None,
        b_y=None,
        b_yy=None,
        exact=None,
        expected_order=None,
        name="custom",
    ):
        if not kappa > 0:
            raise ValueError("kappa must be positive")
        self.kappa = float(kappa)
        self.f = f
        self.b = b
        self.f_y = f_y
        self.f_yy = f_yy
        self.b_y = b_y
        self.b_yy = b_yy
        self.initial_coeffs = np.asarray(initial_coeffs, dtype=float)
        if not np.all(np.isfinite(self.initial_coeffs)):
            raise ValueError("initial coefficients must be finite")
        if not isinstance(qspec, QSpec):
            raise TypeError("qspec must be a QSpec")
        self.qspec = qspec
        self.exact = exact
        self.expected_order = expected_order
        self.name = name
        if exact is not None:
            at_zero = np.asarray(exact(0.0, 0.0), dtype=float)
            if not np.allclose(at_zero, self.initial_coeffs, rtol=1e-12, atol=1e-12):
                raise ValueError("exact(0, .) does not reproduce initial_coeffs")

    @property
    def N(self):
        return len(self.initial_coeffs)

    def has(self, which):
        return getattr(self, which) is not None

    def __repr__(self):
        return "ProblemSpec(%r, kappa=%g, N=%d)" % (self.name, self.kappa, self.N)


def eval_coeff(which, p, v, grid, needed_by=None):
    """Pointwise composition field, e.g. which='f' gives f(x_p, v(x_p)).

    Derivative selectors require the corresponding optional map; if it is
    missing a CapabilityError names the caller that needed it.
    """
    if which not in _WHICH:
        raise ValueError("unknown selector %r" % (which,))
    fn = getattr(p, which)
    if fn is None:
        who = " (required by %s)" % needed_by if needed_by else ""
        raise CapabilityError(
            "problem %r does not provide the %s map%s" % (p.name, which, who)
        )
    x = grid.nodes
    out = np.asarray(fn(x, np.asarray(v, dtype=float)), dtype=float)
    if out.shape != x.shape:
        out = np.broadcast_to(out, x.shape).astype(float)
    return out


def _commutativity_residual(p, v, vt, u, ut, grid):
    # both sides of (B'(v)(B(vt) u)) ut = (B'(v)(B(vt) ut)) u collapse to
    # b_y(v) b(vt) u ut pointwise; evaluate them in a shared canonical
    # order so the residual is exactly zero (float multiplication is
    # commutative, association is kept fixed)
    core = eval_coeff("b_y", p, v, grid) * eval_coeff("b", p, vt, grid)
    lhs = core * (np.asarray(u) * np.asarray(ut))
    rhs = core * (np.asarray(ut) * np.asarray(u))
    return float(np.max(np.abs(lhs - rhs)))


def check_commutativity(p, v, vt, u, ut, grid):
    """Structural self-test of the commutativity condition; True for any
    Nemytskii diffusion, with residual exactly 0."""
    return _commutativity_residual(p, v, vt, u, ut, grid) == 0.0


def _zero(x, y):
    return np.zeros_like(y)


def _one(x, y):
    return np.ones_like(y)


def _identity(x, y):
    return y


def _neg_sin(x, y):
    return -np.sin(y)


def _neg_cos(x, y):
    return -np.cos(y)


def _sin(x, y):
    return np.sin(y)


def _cos(x, y):
    return np.cos(y)


def _example1(N, K):
    if K not in (None, 1):
        raise ValueError("example1 uses scalar noise, K must be 1")
    n = np.arange(1, N + 1, dtype=float)
    init = n**-4.0

    def exact(t, beta_t):
        # per mode: a_n(t) = n^-4 exp(-(n^2 pi^2 + 1/2) t + beta_t)
        return init * np.exp(-(n**2 * np.pi**2 + 0.5) * t + beta_t)

    return ProblemSpec(
        kappa=1.0,
        f=_zero,
        b=_identity,
        f_y=_zero,
        f_yy=_zero,
        b_y=_one,
        b_yy=_zero,
        initial_coeffs=init,
        qspec=QSpec(1, [1.0], mode_kind="scalar_constant"),
        exact=exact,
        expected_order=1.5,
        name="example1",
    )


def _example2(N, K):
    K = N if K is None else K
    kappa = 0.1
    j = np.arange(1, K + 1, dtype=float)
    eta = (kappa * np.pi**2 * j**2) ** -3.0
    init = np.zeros(N)
    init[0] = 1.0 / np.sqrt(2.0)  # X_0 = sin(pi x) = e_1 / sqrt(2)
    return ProblemSpec(
        kappa=kappa,
        f=_zero,
        b=_identity,
        f_y=_zero,
        f_yy=_zero,
        b_y=_one,
        b_yy=_zero,
        initial_coeffs=init,
        qspec=QSpec(K, eta),
        expected_order=1.5,
        name="example2",
    )


def _example3(N, K):
    K = N if K is None else K
    j = np.arange(1, K + 1, dtype=float)
    init = np.zeros(N)
    if N < 2:
        raise ValueError("example3 needs N >= 2 for its initial value")
    init[1] = 1.0 / (2.0 * np.sqrt(2.0))  # X_0 = sin(2 pi x)/2 = e_2/(2 sqrt(2))
    return ProblemSpec(
        kappa=0.01,
        f=_sin,
        b=_cos,
        f_y=_cos,
        f_yy=_neg_sin,
        b_y=_neg_sin,
        b_yy=_neg_cos,
        initial_coeffs=init,
        qspec=QSpec(K, j**-3.0),
        expected_order=1.5,
        name="example3",
    )


BUILTIN_PROBLEMS = {
    "example1": _example1,
    "example2": _example2,
    "example3": _example3,
}


def builtin_problem(name, N, K=None):
    """Build a named example at N modes and (where applicable) K noise modes.

    example1: kappa=1, f=0, b(x,y)=y, scalar constant noise, a_n(0)=n^-4,
              closed-form solution available.
    example2: kappa=1/10, f=0, b(x,y)=y, eta_j=(kappa pi^2 j^2)^-3,
              X_0 = sin(pi x).
    example3: kappa=1/100, f=sin(y), b=cos(y), eta_j=j^-3,
              X_0 = sin(2 pi x)/2.
    """
    try:
        factory = BUILTIN_PROBLEMS[name]
    except KeyError:
        raise ValueError(
            "unknown problem %r (have: %s)" % (name, ", ".join(sorted(BUILTIN_PROBLEMS)))
        ) from None
    return factory(N, K)
