"""Truncated six-family Fock hierarchy: assembly, steady state, observables.

Unknowns P_n^(i) are stored family-major: flat index (i - 1) * (n_max + 1) + n.
Family 1 holds the phonon populations, family 2 the dressed inversion per
Fock level; families 3-6 are the Fock-diagonal coherences that link them.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import DressedFrame, SystemParams

log = logging.getLogger(__name__)

N_FAMILIES = 6
DEFAULT_TOL = 1e-8
DEFAULT_N_START = 8
DEFAULT_N_CAP = 4096
ZERO_MEAN_THRESHOLD = 1e-12

CLOSURES = ("fock", "hard")


class HierarchyError(RuntimeError):
    pass


class SingularSystem(HierarchyError):
    pass


class ZeroMeanPhonon(HierarchyError):
    pass


class TruncationDiverged(HierarchyError):
    pass


@dataclass(frozen=True)
class HierarchyState:
    n_max: int
    p: np.ndarray  # shape (6, n_max + 1), complex

    def family(self, i: int) -> np.ndarray:
        """P_n^(i) for i in 1..6."""
        return self.p[i - 1]

    @property
    def populations(self) -> np.ndarray:
        return self.p[0].real

    def flat(self) -> np.ndarray:
        return self.p.reshape(-1)

    @classmethod
    def from_flat(cls, n_max: int, v: np.ndarray) -> "HierarchyState":
        return cls(n_max, np.asarray(v, dtype=complex).reshape(N_FAMILIES, n_max + 1))


@dataclass(frozen=True)
class SparseGenerator:
    n_max: int
    matrix: sp.csr_matrix
    closure: str = "fock"

    @property
    def dim(self) -> int:
        return N_FAMILIES * (self.n_max + 1)

    def apply(self, state: HierarchyState) -> np.ndarray:
        return self.matrix @ state.flat()

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data


@dataclass(frozen=True)
class Observables:
    n_mean: float
    g2: float
    n_max_used: int
    residual: float


@dataclass
class _Builder:
    n_max: int
    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    vals: list = field(default_factory=list)

    def idx(self, family: int, n: int) -> int | None:
        if n < 0 or n > self.n_max:
            return None
        return (family - 1) * (self.n_max + 1) + n

    def add(self, fam_row: int, n_row: int, fam_col: int, n_col: int, value: complex) -> None:
        if value == 0:
            return
        col = self.idx(fam_col, n_col)
        if col is None:
            return
        self.rows.append(self.idx(fam_row, n_row))
        self.cols.append(col)
        self.vals.append(value)

    def matrix(self) -> sp.csr_matrix:
        dim = N_FAMILIES * (self.n_max + 1)
        return sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(dim, dim), dtype=complex).tocsr()


def assemble_generator(
    frame: DressedFrame, params: SystemParams, n_max: int, closure: str = "fock"
) -> SparseGenerator:
    """Sparse G with dP/dt = G P for the hierarchy truncated at n_max.

    Coefficients for 0 <= n < n_max are the bulk equations.  ``closure``
    fixes the top level:

    * ``"hard"`` keeps the bulk coefficients at n = n_max and drops every
      P_{n_max+1} reference.  This leaks probability through the thermal
      pumping term, so G has no exact kernel.
    * ``"fock"`` (default) is what the truncated Fock space implies: b b^+
      vanishes on |n_max>, so the pumping loss out of n_max is removed, and
      P^(5), P^(6) at n_max are identically zero.  G is then exactly
      trace-preserving and its kernel equals the truncated Lindblad
      steady state.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if closure not in CLOSURES:
        raise ValueError(f"closure must be one of {CLOSURES}, got {closure!r}")
    fock = closure == "fock"
    top = n_max

    cpl = frame.coupling
    beta, delta = frame.beta, frame.delta_eff
    gp, gm = frame.gamma_plus, frame.gamma_minus
    gcoh = frame.coherence_decay
    ka = params.kappa * (1.0 + params.nbar)
    kn = params.kappa * params.nbar

    def pump_loss(n: int) -> float:
        # eigenvalue of b b^+ on |n>
        return 0.0 if (fock and n == top) else n + 1.0

    bld = _Builder(n_max)
    add = bld.add
    for n in range(n_max + 1):
        # families 1, 2: populations and inversion
        for fam in (1, 2):
            add(fam, n, fam, n, -2 * ka * n - 2 * kn * pump_loss(n))
            add(fam, n, fam, n + 1, 2 * ka * (n + 1))
            add(fam, n, fam, n - 1, 2 * kn * n)
        add(1, n, 3, n, 1j * cpl)
        add(1, n, 5, n, -1j * cpl)
        add(2, n, 3, n, -1j * cpl)
        add(2, n, 5, n, -1j * cpl)
        add(2, n, 1, n, -2 * (gp - gm))
        add(2, n, 2, n, -2 * (gp + gm))

        # families 3, 4: coherences b^+ rho_{+-} -/+ rho_{-+} b
        diag34 = 2 * n + 1 if not (fock and n == top) else float(n)
        det34 = beta * (2 * n - 1) - delta
        add(3, n, 1, n, 1j * cpl * n)
        add(3, n, 2, n, -1j * cpl * n)
        add(3, n, 1, n - 1, -1j * cpl * n)
        add(3, n, 2, n - 1, -1j * cpl * n)
        for fam, partner, shifted in ((3, 4, 5), (4, 3, 6)):
            add(fam, n, partner, n, -1j * det34)
            add(fam, n, fam, n, -gcoh - ka * (2 * n - 1) - kn * diag34)
            add(fam, n, fam, n + 1, 2 * ka * (n + 1))
            add(fam, n, shifted, n, -2 * ka)
            add(fam, n, fam, n - 1, 2 * kn * n)

        # families 5, 6: coherences rho_{+-} b^+ -/+ b rho_{-+}
        if fock and n == top:
            add(5, n, 5, n, -gcoh)
            add(6, n, 6, n, -gcoh)
            continue
        diag56 = 2 * n + 3 if not (fock and n == top - 1) else float(n + 1)
        det56 = beta * (2 * n + 1) - delta
        c5 = -1j * cpl * (n + 1)
        add(5, n, 1, n, c5)
        add(5, n, 2, n, c5)
        add(5, n, 1, n + 1, -c5)
        add(5, n, 2, n + 1, c5)
        for fam, partner, shifted in ((5, 6, 3), (6, 5, 4)):
            add(fam, n, partner, n, -1j * det56)
            add(fam, n, fam, n, -gcoh - ka * (2 * n + 1) - kn * diag56)
            add(fam, n, fam, n + 1, 2 * ka * (n + 1))
            add(fam, n, fam, n - 1, 2 * kn * n)
            add(fam, n, shifted, n, 2 * kn)

    return SparseGenerator(n_max, bld.matrix(), closure)


def _trace_constrained(gen: SparseGenerator) -> tuple[sp.csc_matrix, np.ndarray]:
    """Swap the family-1, n = 0 row of G for the trace row sum_n P_n^(1)."""
    n1 = gen.n_max + 1
    a = gen.matrix.tolil(copy=True)
    a[0, :] = 0
    a[0, :n1] = 1.0
    rhs = np.zeros(gen.dim, dtype=complex)
    rhs[0] = 1.0
    return a.tocsc(), rhs


def _condition_estimate(lu: spla.SuperLU, a: sp.csc_matrix) -> float:
    inv = spla.LinearOperator(a.shape, matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="H"), dtype=complex)
    return float(spla.norm(a, 1) * spla.onenormest(inv))


def solve_steady_state(
    gen: SparseGenerator, solver: str = "direct", cond_limit: float = 1e14
) -> tuple[HierarchyState, float]:
    """Kernel of G normalized to sum_n P_n^(1) = 1.

    Returns the state and the residual max|G P|.  ``solver="iterative"``
    uses ILU-preconditioned GMRES instead of a sparse LU factorization.
    """
    a, rhs = _trace_constrained(gen)
    if solver == "direct":
        try:
            lu = spla.splu(a)
        except RuntimeError as exc:
            raise SingularSystem(f"constrained system is exactly singular ({exc})") from exc
        x = lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SingularSystem("non-finite steady state from LU solve")
    elif solver == "iterative":
        ilu = spla.spilu(a, drop_tol=1e-6, fill_factor=20)
        m = spla.LinearOperator(a.shape, ilu.solve, dtype=complex)
        x, info = spla.gmres(a, rhs, M=m, rtol=1e-13, atol=0.0, restart=200, maxiter=2000)
        if info != 0:
            raise SingularSystem(f"GMRES did not converge (info={info})")
        lu = None
    else:
        raise ValueError(f"unknown solver {solver!r}")

    state = HierarchyState.from_flat(gen.n_max, x)
    residual = float(np.abs(gen.apply(state)).max())
    scale = float(np.abs(x).max())
    if residual > 1e-6 * max(scale, 1.0):
        cond = _condition_estimate(lu, a) if lu is not None else float("nan")
        if lu is None or cond > cond_limit:
            raise SingularSystem(f"steady state residual {residual:.3e}, condition estimate {cond:.3e}")
    return state, residual


def observables(state: HierarchyState, residual: float = 0.0) -> Observables:
    """Mean phonon number and g2(0) from the family-1 populations."""
    pops = state.populations
    n = np.arange(state.n_max + 1, dtype=float)
    n_mean = float(np.dot(n, pops))
    if n_mean < ZERO_MEAN_THRESHOLD:
        raise ZeroMeanPhonon(f"mean phonon number {n_mean:.3e} too small for g2")
    g2 = float(np.dot(n * (n - 1.0), pops) / n_mean**2)
    return Observables(n_mean=n_mean, g2=g2, n_max_used=state.n_max, residual=residual)


def tail_mass(state: HierarchyState) -> float:
    """Population weight above n_max / 2."""
    return float(state.populations[state.n_max // 2 + 1 :].sum())


def solve_point(
    frame: DressedFrame, params: SystemParams, n_max: int, closure: str = "fock", solver: str = "direct"
) -> tuple[HierarchyState, Observables]:
    gen = assemble_generator(frame, params, n_max, closure)
    state, residual = solve_steady_state(gen, solver)
    return state, observables(state, residual)


def auto_truncate(
    frame: DressedFrame,
    params: SystemParams,
    tol: float = DEFAULT_TOL,
    n_start: int = DEFAULT_N_START,
    n_cap: int = DEFAULT_N_CAP,
    closure: str = "fock",
    solver: str = "direct",
) -> tuple[HierarchyState, Observables]:
    """Double n_max from n_start until n_mean, g2 and the tail mass settle below tol."""
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    n_max = max(int(n_start), 1)
    prev: Observables | None = None
    while True:
        t0 = time.perf_counter()
        state, obs = solve_point(frame, params, n_max, closure, solver)
        log.debug("n_max=%d n_mean=%.10g g2=%.10g (%.3fs)", n_max, obs.n_mean, obs.g2, time.perf_counter() - t0)
        if prev is not None:
            dn = abs(obs.n_mean - prev.n_mean) / obs.n_mean
            dg = abs(obs.g2 - prev.g2) / max(obs.g2, ZERO_MEAN_THRESHOLD)
            if dn < tol and dg < tol and tail_mass(state) < tol:
                return state, obs
        prev = obs
        if 2 * n_max > n_cap:
            raise TruncationDiverged(
                f"no convergence to tol={tol:g} up to n_max={n_max} (cap {n_cap}); "
                f"last n_mean={obs.n_mean:.6g}, g2={obs.g2:.6g}"
            )
        n_max *= 2
