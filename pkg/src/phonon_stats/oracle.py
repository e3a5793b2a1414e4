"""Brute-force Lindblad reference on the dressed-qubit x Fock space.

Basis ordering is qubit-major: index ``q * (n_max + 1) + n`` with q = 0 for
|+> and q = 1 for |->.  Superoperators act on column-stacked density
matrices, vec(rho) = rho.reshape(-1, order="F"), so that
vec(A rho B) = (B^T kron A) vec(rho).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .hierarchy import HierarchyState
from .model import DressedFrame, SystemParams

DEFAULT_MAX_DIM = 64


class OracleError(RuntimeError):
    pass


class DimensionOverflow(OracleError):
    pass


class DegenerateKernel(OracleError):
    pass


class IntegratorFailure(OracleError):
    pass


class Label(enum.Enum):
    R_PLUS = "R+"
    R_MINUS = "R-"
    R_PP = "R++"
    R_MM = "R--"
    R_Z = "Rz"
    B = "b"
    B_DAGGER = "b+"
    HAMILTONIAN = "H"


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    label: Label


@dataclass(frozen=True)
class DensityMatrix:
    rho: np.ndarray
    n_max: int

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.rho))

    def phonon_number(self) -> float:
        ops = operators(self.n_max)
        return self.expect(ops[Label.B_DAGGER].matrix @ ops[Label.B].matrix).real


@dataclass(frozen=True)
class Superoperator:
    matrix: np.ndarray
    n_max: int

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)


def vec(rho: np.ndarray) -> np.ndarray:
    return rho.reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape((dim, dim), order="F")


def _qubit(op: str) -> np.ndarray:
    plus, minus = np.eye(2)
    table = {
        "R+": np.outer(plus, minus),
        "R-": np.outer(minus, plus),
        "R++": np.outer(plus, plus),
        "R--": np.outer(minus, minus),
        "Rz": np.diag([1.0, -1.0]),
    }
    return table[op].astype(complex)


def operators(n_max: int) -> dict[Label, OperatorMatrix]:
    """Qubit and phonon operators embedded in the joint space."""
    nf = n_max + 1
    b = np.diag(np.sqrt(np.arange(1, nf)), k=1).astype(complex)
    eye_f = np.eye(nf, dtype=complex)
    eye_q = np.eye(2, dtype=complex)
    ops = {Label.B: np.kron(eye_q, b), Label.B_DAGGER: np.kron(eye_q, b.conj().T)}
    for label in (Label.R_PLUS, Label.R_MINUS, Label.R_PP, Label.R_MM, Label.R_Z):
        ops[label] = np.kron(_qubit(label.value), eye_f)
    return {k: OperatorMatrix(v, k) for k, v in ops.items()}


def hamiltonian(frame: DressedFrame, params: SystemParams, n_max: int) -> OperatorMatrix:
    """(omega_ph - 2 Omega_bar) b+b - Delta_bar Rz + beta b+b Rz - (g sin2theta/2)(b+ R- + R+ b)."""
    ops = {k: v.matrix for k, v in operators(n_max).items()}
    b, bd, rz = ops[Label.B], ops[Label.B_DAGGER], ops[Label.R_Z]
    num = bd @ b
    h = (
        (params.omega_ph - 2.0 * frame.omega_bar) * num
        - frame.delta_bar * rz
        + frame.beta * num @ rz
        - frame.coupling * (bd @ ops[Label.R_MINUS] + ops[Label.R_PLUS] @ b)
    )
    return OperatorMatrix(h, Label.HAMILTONIAN)


def _left(a: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(a.shape[0]), a)


def _right(a: np.ndarray) -> np.ndarray:
    return np.kron(a.T, np.eye(a.shape[0]))


def _pair_term(rate: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Superoperator of -rate [x, y rho] + H.c. with x = y^dagger."""
    # -rate (x y rho - y rho x) - rate (rho y^+ x^+ - x^+ rho y^+)
    xd, yd = x.conj().T, y.conj().T
    return -rate * (_left(x @ y) - _left(y) @ _right(x) + _right(yd @ xd) - _left(xd) @ _right(yd))


def build_liouvillian(
    frame: DressedFrame, params: SystemParams, n_max: int, max_dim: int = DEFAULT_MAX_DIM
) -> Superoperator:
    """Dense matrix of rho -> -i[H, rho] + L_qd rho + L_ph rho."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    dim = 2 * (n_max + 1)
    if dim > max_dim:
        raise DimensionOverflow(f"joint dimension {dim} exceeds cap {max_dim} (n_max <= {max_dim // 2 - 1})")
    ops = {k: v.matrix for k, v in operators(n_max).items()}
    h = hamiltonian(frame, params, n_max).matrix
    rp, rm, rz = ops[Label.R_PLUS], ops[Label.R_MINUS], ops[Label.R_Z]
    b, bd = ops[Label.B], ops[Label.B_DAGGER]

    lv = -1j * (_left(h) - _right(h))
    lv += _pair_term(frame.gamma_plus, rp, rm)
    lv += _pair_term(frame.gamma_minus, rm, rp)
    lv += _pair_term(frame.gamma_zero, rz, rz)
    lv += _pair_term(params.kappa * (1.0 + params.nbar), bd, b)
    lv += _pair_term(params.kappa * params.nbar, b, bd)
    return Superoperator(lv, n_max)


def _finish(rho: np.ndarray, n_max: int) -> DensityMatrix:
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(rho, n_max)


def steady_state_density(lv: Superoperator, gap_threshold: float = 1e-6) -> DensityMatrix:
    """Null vector of the Liouvillian via SVD, normalized to unit trace.

    Raises DegenerateKernel when the second-smallest singular value is not
    separated from zero by ``gap_threshold * ||L||``.
    """
    _, s, vh = scipy.linalg.svd(lv.matrix)
    scale = s[0]
    if s[-2] < gap_threshold * scale:
        raise DegenerateKernel(
            f"kernel not unique: two smallest singular values {s[-1]:.3e}, {s[-2]:.3e} "
            f"(norm {scale:.3e})"
        )
    rho = unvec(vh[-1].conj(), lv.dim)
    return _finish(rho, lv.n_max)


def kernel_singular_values(lv: Superoperator, k: int = 3) -> np.ndarray:
    s = scipy.linalg.svd(lv.matrix, compute_uv=False)
    return s[-k:][::-1]


def evolve(
    lv: Superoperator,
    rho0: DensityMatrix,
    t_final: float,
    dt: float | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> DensityMatrix:
    """Integrate d vec(rho)/dt = L vec(rho) with an adaptive Runge-Kutta method.

    ``dt`` caps the step size when given.
    """
    if t_final == 0:
        return rho0
    mat = lv.matrix
    y0 = vec(rho0.rho).astype(complex)
    kwargs = {"max_step": dt} if dt else {}
    sol = solve_ivp(
        lambda _t, y: mat @ y,
        (0.0, t_final),
        y0,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        **kwargs,
    )
    if not sol.success:
        raise IntegratorFailure(sol.message)
    return DensityMatrix(unvec(sol.y[:, -1], lv.dim), lv.n_max)


def project_to_hierarchy(rho: DensityMatrix) -> HierarchyState:
    """Diagonal Fock elements of the six qubit-projected phonon operators."""
    nf = rho.n_max + 1
    r = rho.rho
    rpp, rmm = r[:nf, :nf], r[nf:, nf:]
    rpm, rmp = r[:nf, nf:], r[nf:, :nf]
    b = np.diag(np.sqrt(np.arange(1, nf)), k=1).astype(complex)
    bd = b.conj().T
    blocks = (
        rpp + rmm,
        rpp - rmm,
        bd @ rpm - rmp @ b,
        bd @ rpm + rmp @ b,
        rpm @ bd - b @ rmp,
        rpm @ bd + b @ rmp,
    )
    p = np.array([np.diag(blk) for blk in blocks])
    return HierarchyState(rho.n_max, p)


def product_state(qubit: np.ndarray, fock: np.ndarray) -> DensityMatrix:
    """rho_qd kron rho_ph; fock is an (n_max+1)-square matrix."""
    return DensityMatrix(np.kron(qubit, fock).astype(complex), fock.shape[0] - 1)
