"""Sine eigenbasis of the Dirichlet Laplacian on (0, 1).

Solver states live in two equivalent representations:

* spectral -- a length-N coefficient vector a_k = <v, e_k> against the
  eigenbasis e_k(x) = sqrt(2) sin(k pi x), k = 1..N;
* physical -- the values v(x_p) on interior collocation nodes
  x_p = p/(n+1), p = 1..n.

Pointwise (Nemytskii) operations act in physical space; the linear
operator A = kappa*Laplace and every function of it are diagonal in
spectral space.  With these nodes the discrete sine transform of type I
is exactly invertible for N modes, so switching representations adds no
quadrature error.  Transforms are dense O(N^2) matrix products, which is
plenty for the mode counts used here (N <= 256).

Both representations are plain 1-d float arrays; nothing is wrapped.
"""

import numpy as np

from .errors import DimensionError

__all__ = [
    "SineBasisGrid",
    "LinearOperatorSpec",
    "to_physical",
    "to_spectral",
    "apply_diagonal",
    "diagonal_factor",
    "h_r_norm",
]


class SineBasisGrid:
    """Collocation grid paired with the first N sine modes.

    Parameters
    ----------
    N : int
        Number of retained modes.
    oversample : int, optional
        Integer refinement of the evaluation grid.  The default 1 puts
        exactly N interior nodes x_p = p/(N+1); oversample=q uses
        q*(N+1)-1 nodes.  Round trips stay exact either way because the
        fine transform is truncated back to N modes.

    Attributes
    ----------
    N : number of modes; ``mode_count`` is an alias.
    nodes : strictly increasing interior nodes in (0, 1).
    n_nodes : number of collocation nodes (== N for oversample=1).
    """

    def __init__(self, N, oversample=1):
        if not isinstance(N, (int, np.integer)) or N < 1:
            raise ValueError("N must be a positive integer, got %r" % (N,))
        if not isinstance(oversample, (int, np.integer)) or oversample < 1:
            raise ValueError("oversample must be a positive integer")
        self.N = int(N)
        self.oversample = int(oversample)
        self.n_nodes = self.oversample * (self.N + 1) - 1
        self.nodes = np.arange(1, self.n_nodes + 1) / (self.n_nodes + 1.0)
        # synthesis matrix S[p, k-1] = sqrt(2) sin(k pi x_p) and its exact
        # inverse T = sqrt(2)/(n+1) * sin(k pi x_p); orthogonality of the
        # type-I sine transform gives T @ S == I_N.
        karg = np.outer(self.nodes, np.arange(1, self.N + 1)) * np.pi
        self._synth = np.sqrt(2.0) * np.sin(karg)
        self._anal = (np.sqrt(2.0) / (self.n_nodes + 1.0)) * np.sin(karg).T

    @property
    def mode_count(self):
        return self.N

    def __repr__(self):
        return "SineBasisGrid(N=%d, oversample=%d)" % (self.N, self.oversample)


class LinearOperatorSpec:
    """The diagonal model of A = kappa * Laplacian with Dirichlet conditions.

    Eigenpairs are -A e_k = lambda_k e_k with lambda_k = kappa pi^2 k^2,
    so the spectrum is strictly positive and increasing.  ``eta`` is the
    shift used by fractional powers and the H_r norms; it defaults to 0,
    which is safe because no lambda_k vanishes.
    """

    def __init__(self, kappa, N, eta=0.0):
        if not kappa > 0:
            raise ValueError("kappa must be positive")
        if eta < 0:
            raise ValueError("eta must be nonnegative")
        self.kappa = float(kappa)
        self.eta = float(eta)
        self.N = int(N)
        k = np.arange(1, self.N + 1, dtype=float)
        self.eigenvalues = self.kappa * np.pi**2 * k**2

    def __repr__(self):
        return "LinearOperatorSpec(kappa=%g, N=%d, eta=%g)" % (
            self.kappa,
            self.N,
            self.eta,
        )


def _check_len(field, expect, what):
    field = np.asarray(field, dtype=float)
    if field.shape != (expect,):
        raise DimensionError(
            "%s: expected shape (%d,), got %r" % (what, expect, field.shape)
        )
    return field


def to_physical(field, grid):
    """Evaluate a coefficient vector on the collocation nodes.

    values(x_p) = sum_k a_k sqrt(2) sin(k pi x_p).
    """
    field = _check_len(field, grid.N, "to_physical")
    return grid._synth @ field


def to_spectral(field, grid):
    """Recover coefficients from node values; exact inverse of to_physical.

    For data that is not band-limited to N modes this is the Galerkin
    projection onto span(e_1..e_N) in the discrete inner product, which
    is how the pseudo-spectral nonlinearity handling is meant to work.
    """
    field = _check_len(field, grid.n_nodes, "to_spectral")
    return grid._anal @ field


def diagonal_factor(kind, op, t=None, h=None, r=None):
    """Per-mode multiplier array for a diagonal function of A.

    kind is one of 'semigroup' (needs t >= 0), 'generator',
    'resolvent' (needs h > 0), 'phi1' (needs h > 0) or
    'fractional_power' (needs r).  Factors:

        semigroup        exp(-lambda_k t)
        generator        -lambda_k
        resolvent        (1 + h lambda_k)^(-1)      i.e. (I - hA)^(-1)
        phi1             (1 - exp(-h lambda_k)) / (h lambda_k)
        fractional_power (eta + lambda_k)^r
    """
    lam = op.eigenvalues
    if kind == "semigroup":
        if t is None or t < 0:
            raise ValueError("semigroup needs t >= 0")
        return np.exp(-lam * t)
    if kind == "generator":
        return -lam
    if kind == "resolvent":
        if h is None or h <= 0:
            raise ValueError("resolvent needs h > 0")
        return 1.0 / (1.0 + h * lam)
    if kind == "phi1":
        if h is None or h <= 0:
            raise ValueError("phi1 needs h > 0")
        z = h * lam
        # -expm1(-z)/z is accurate down to z -> 0 (limit 1)
        return -np.expm1(-z) / z
    if kind == "fractional_power":
        if r is None:
            raise ValueError("fractional_power needs r")
        return (op.eta + lam) ** float(r)
    raise ValueError("unknown diagonal kind %r" % (kind,))


def apply_diagonal(kind, op, field, t=None, h=None, r=None):
    """Apply a diagonal function of A to a spectral field (see diagonal_factor)."""
    field = _check_len(field, op.N, "apply_diagonal")
    return diagonal_factor(kind, op, t=t, h=h, r=r) * field


def h_r_norm(op, r, field):
    """Interpolation-space norm ||(eta - A)^r v|| = (sum (eta+lambda_k)^(2r) a_k^2)^(1/2).

    r = 0 reduces to the H norm, which by Parseval is the plain l2 norm
    of the coefficients (identical arithmetic, not just close).
    """
    field = _check_len(field, op.N, "h_r_norm")
    w = (op.eta + op.eigenvalues) ** float(r)
    return float(np.sqrt(np.sum((w * field) ** 2)))
