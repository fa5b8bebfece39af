"""Sampling of the truncated Q-Wiener process.

The noise is W^K_t = sum_{j<=K} sqrt(eta_j) beta^j_t e~_j with independent
scalar Brownian motions beta^j.  Every scheme in this package needs, per
step and per mode, the joint pair

    dB_j = beta^j_{t+h} - beta^j_t,
    I_j  = int_t^{t+h} (beta^j_s - beta^j_t) ds,

which is Gaussian with covariance [[h, h^2/2], [h^2/2, h^3/3]].  Sampling
uses the triangular factor of that matrix directly:

    dB = sqrt(h) z1,   I = h^{3/2}/2 z1 + h^{3/2}/(2 sqrt(3)) z2.

Paths are sampled once at the finest resolution of a study and coarsened
exactly (additivity of the mixed integral), so all step sizes see the
same underlying Brownian data.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

__all__ = [
    "QSpec",
    "WienerStep",
    "NoisePath",
    "RandomWeights",
    "sample_step",
    "sample_path",
    "coarsen",
    "gsq_field",
    "noise_matrix",
    "theta_weights",
    "dump_path",
]


class QSpec:
    """Covariance model of the driving noise.

    mode_kind is 'sine_basis' (eigenfunctions e~_j(x) = sqrt(2) sin(j pi x))
    or 'scalar_constant' (K = 1 and g_1 = sqrt(eta_1) * 1, i.e. space-constant
    scalar noise).  mode_eigenvalues are the eta_j >= 0; their sum must be
    finite, which for a concrete K-vector just means all entries finite.
    """

    def __init__(self, K, mode_eigenvalues, mode_kind="sine_basis"):
        if mode_kind not in ("sine_basis", "scalar_constant"):
            raise ValueError("unknown mode_kind %r" % (mode_kind,))
        eta = np.asarray(mode_eigenvalues, dtype=float)
        if eta.shape != (K,):
            raise DimensionError(
                "mode_eigenvalues: expected shape (%d,), got %r" % (K, eta.shape)
            )
        if K < 1:
            raise ValueError("K must be >= 1")
        if mode_kind == "scalar_constant" and K != 1:
            raise ValueError("scalar_constant noise implies K = 1")
        if np.any(eta < 0) or not np.all(np.isfinite(eta)):
            raise ValueError("mode eigenvalues must be finite and nonnegative")
        self.K = int(K)
        self.mode_eigenvalues = eta
        self.mode_kind = mode_kind

    def __repr__(self):
        return "QSpec(K=%d, mode_kind=%r)" % (self.K, self.mode_kind)


@dataclass(frozen=True)
class WienerStep:
    """Per-mode joint sample (dB, I) over one step of size h."""

    dB: np.ndarray
    I: np.ndarray
    h: float


class NoisePath:
    """M WienerSteps of uniform h and K, stored as (M, K) arrays.

    lineage identifies the finest-resolution sample a path descends from
    (a digest of the raw arrays); coarsen() preserves it, which lets the
    study driver assert that truth and approximations share randomness.
    """

    def __init__(self, dB, I, h, base_seed, realization=0, lineage=None):
        dB = np.asarray(dB, dtype=float)
        I = np.asarray(I, dtype=float)
        if dB.ndim != 2 or dB.shape != I.shape:
            raise DimensionError("dB and I must be equal-shape (M, K) arrays")
        if h <= 0:
            raise ValueError("h must be positive")
        self.dB = dB
        self.I = I
        self.h = float(h)
        self.base_seed = base_seed
        self.realization = realization
        if lineage is None:
            dig = hashlib.blake2b(digest_size=16)
            dig.update(dB.tobytes())
            dig.update(I.tobytes())
            lineage = dig.hexdigest()
        self.lineage = lineage

    @property
    def M(self):
        return self.dB.shape[0]

    @property
    def K(self):
        return self.dB.shape[1]

    def __len__(self):
        return self.M

    def step(self, m):
        return WienerStep(dB=self.dB[m], I=self.I[m], h=self.h)

    def steps(self):
        for m in range(self.M):
            yield self.step(m)


def _joint_pair(z, h):
    # triangular factor of [[h, h^2/2], [h^2/2, h^3/3]]
    root = h**1.5
    dB = np.sqrt(h) * z[..., 0]
    I = (root / 2.0) * z[..., 0] + (root / (2.0 * np.sqrt(3.0))) * z[..., 1]
    return dB, I


def sample_step(rng_stream, q, h):
    """Draw one WienerStep from an externally managed generator stream."""
    if h <= 0:
        raise ValueError("h must be positive")
    z = rng_stream.standard_normal((q.K, 2))
    dB, I = _joint_pair(z, h)
    return WienerStep(dB=dB, I=I, h=float(h))


def sample_path(q, M, h, base_seed, realization=0):
    """Sample a full path of M steps.

    Randomness is keyed by (base_seed, realization) into a counter-based
    Philox stream, and all (step, mode) normals are drawn in one fixed
    C-order layout, so the result is bit-identical no matter how many
    workers run or in which order realizations complete.  Chunked draws
    from the same stream produce the same numbers (see sample_step).
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if h <= 0:
        raise ValueError("h must be positive")
    if base_seed < 0 or realization < 0:
        raise ValueError("base_seed and realization must be nonnegative")
    seq = np.random.SeedSequence([int(base_seed), int(realization)])
    rng = np.random.Generator(np.random.Philox(seq))
    z = rng.standard_normal((M, q.K, 2))
    dB, I = _joint_pair(z, h)
    return NoisePath(dB, I, h, base_seed=base_seed, realization=realization)


def coarsen(path, factor):
    """Aggregate groups of `factor` consecutive steps into one.

    Over a coarse interval [t_a, t_b] built from substeps i = 0..n-1,
    Brownian increments add, and the mixed integral decomposes as

        I_coarse = sum_i [ I_i + (t_b - t_{i+1}) dB_i ],

    because the substep-i increment enters int(W_s - W_{t_a}) ds over the
    whole remaining time t_b - t_{i+1}.  Exact in the sense that no new
    randomness is introduced.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError("factor must be a positive integer")
    if factor == 1:
        return path
    if path.M % factor:
        raise ValueError(
            "factor %d does not divide step count %d" % (factor, path.M)
        )
    Mc = path.M // factor
    dBg = path.dB.reshape(Mc, factor, path.K)
    Ig = path.I.reshape(Mc, factor, path.K)
    tail = path.h * (factor - 1.0 - np.arange(factor))
    dBc = dBg.sum(axis=1)
    Ic = Ig.sum(axis=1) + np.tensordot(dBg, tail, axes=([1], [0]))
    return NoisePath(
        dBc,
        Ic,
        path.h * factor,
        base_seed=path.base_seed,
        realization=path.realization,
        lineage=path.lineage,
    )


def gsq_field(q, grid):
    """The field sum_j g_j(x_p)^2 on the collocation nodes.

    For sine_basis modes this is sum_j eta_j * 2 sin^2(j pi x_p); for
    scalar_constant it is the constant eta_1.  Precompute once per study.
    """
    if q.mode_kind == "scalar_constant":
        return np.full(grid.n_nodes, q.mode_eigenvalues[0])
    basis = np.sqrt(2.0) * np.sin(
        np.outer(grid.nodes, np.arange(1, q.K + 1)) * np.pi
    )
    return basis**2 @ q.mode_eigenvalues


def noise_matrix(q, grid):
    """Matrix G with G[p, j] = g_j(x_p) = sqrt(eta_j) e~_j(x_p).

    G @ dB and G @ I assemble the noise fields on the grid.
    """
    if q.mode_kind == "scalar_constant":
        return np.full((grid.n_nodes, 1), np.sqrt(q.mode_eigenvalues[0]))
    basis = np.sqrt(2.0) * np.sin(
        np.outer(grid.nodes, np.arange(1, q.K + 1)) * np.pi
    )
    return basis * np.sqrt(q.mode_eigenvalues)


@dataclass(frozen=True)
class RandomWeights:
    """The scheme's random weight fields for one step, all on the grid.

    theta0_* weight drift contributions, theta1_* diffusion contributions
    and theta2_1 the generator term; theta0_1 is the scalar h.
    """

    theta0_1: float
    theta0_2: np.ndarray
    theta0_3: np.ndarray
    theta1_1: np.ndarray
    theta1_2: np.ndarray
    theta1_3: np.ndarray
    theta1_4: np.ndarray
    theta1_5: np.ndarray
    theta2_1: np.ndarray


def theta_weights(step, q, grid, gsq=None, G=None):
    """Assemble the random weight fields from one WienerStep.

    With dW(x) = sum_j sqrt(eta_j) dB_j e~_j(x) and Iw(x) the same sum over
    the mixed integrals:

        theta0_1 = h                 theta1_1 = dW
        theta0_2 = Iw / h            theta1_2 = Iw / h
        theta0_3 = h * gsq           theta1_3 = gsq - dW^2 / h
        theta2_1 = Iw - (h/2) dW     theta1_4 = (Iw * gsq - dW^3 / 3) / h
                                     theta1_5 = dW * gsq - dW^3 / (3h)

    gsq and G may be passed in to avoid rebuilding them per step.
    """
    if gsq is None:
        gsq = gsq_field(q, grid)
    if G is None:
        G = noise_matrix(q, grid)
    if step.dB.shape != (q.K,):
        raise DimensionError("step has %d modes, QSpec has %d" % (len(step.dB), q.K))
    h = step.h
    dW = G @ step.dB
    Iw = G @ step.I
    w = RandomWeights(
        theta0_1=h,
        theta0_2=Iw / h,
        theta0_3=h * gsq,
        theta1_1=dW,
        theta1_2=Iw / h,
        theta1_3=gsq - dW**2 / h,
        theta1_4=(Iw * gsq - dW**3 / 3.0) / h,
        theta1_5=dW * gsq - dW**3 / (3.0 * h),
        theta2_1=Iw - (h / 2.0) * dW,
    )
    # defining identities (cheap; stripped under python -O)
    assert np.allclose(w.theta1_3, gsq - w.theta1_1**2 / h, rtol=1e-12, atol=1e-12)
    assert np.allclose(
        w.theta2_1, w.theta0_2 * h - (h / 2.0) * w.theta1_1, rtol=1e-12, atol=1e-12
    )
    return w


def dump_path(path, fh):
    """Write a path as delimited text, one record per step per mode."""
    fh.write("step,mode,dB,I\n")
    for m in range(path.M):
        for j in range(path.K):
            fh.write(
                "%d,%d,%r,%r\n"
                % (m, j, float(path.dB[m, j]), float(path.I[m, j]))
            )
