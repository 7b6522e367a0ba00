"""Dense numerical kernel: realification, Gram factorisation and an SDP solver.

The solver handles one PSD block with free scalar variables,

    maximize    c·y (+ t)
    subject to  M0 + Σ_i y_i M_i (- t·I)  ⪰ 0,

through the standard primal/dual pair

    (P)  min <C, X>  s.t. <A_i, X> = b_i,  X ⪰ 0
    (D)  max b·y     s.t. Z = C - Σ_i y_i A_i ⪰ 0

with C = M0, A_i = -M_i and A_t = I.  Iterates follow an infeasible-start
Mehrotra predictor-corrector scheme with the HKM search direction.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from .errors import InvalidInputError, NotPSDError

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# small linear-algebra helpers

def embed_hermitian(h, tol: float = 1e-8) -> np.ndarray:
    """Real symmetric image ``[[Re H, -Im H], [Im H, Re H]]`` of a Hermitian matrix."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {h.shape}")
    if h.size and np.max(np.abs(h - h.conj().T)) > tol:
        raise InvalidInputError("embed_hermitian: input is not Hermitian")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def unembed_hermitian(r: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_hermitian`."""
    r = np.asarray(r, dtype=float)
    n = r.shape[0] // 2
    return r[:n, :n] + 1j * r[n:, :n]


def jacobi_eigh(a, tol: float = 1e-14, max_sweeps: int = 100):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` sorted ascending, like ``numpy.linalg.eigh``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:      # theta² would overflow; t ≈ 1/(2θ)
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def gram_vectors(g, clip_tol: float = 1e-10) -> np.ndarray:
    """Matrix ``V`` with ``V† V = G`` for a PSD ``G``.

    Eigenvalues in ``[-clip_tol, clip_tol]`` are set to zero and the matching
    rows dropped, so ``V`` has one row per retained eigenvalue.
    """
    g = np.asarray(g)
    g = (g + g.conj().T) / 2
    w, q = np.linalg.eigh(g)
    if w.size and w[0] < -clip_tol:
        raise NotPSDError(f"gram_vectors: eigenvalue {w[0]:.3e} below -{clip_tol:.1e}")
    keep = w > clip_tol
    return np.sqrt(w[keep])[:, None] * q[:, keep].conj().T


# ---------------------------------------------------------------------------
# problem / solution containers

@dataclass
class SolverOptions:
    tol: float = 1e-8            # residual and relative-gap threshold
    feas_tol: float = 1e-7       # membership: feasible iff t_star >= -feas_tol
    max_iters: int = 200
    step_factor: float = 0.98    # fraction-to-boundary
    dim_cap: int = 400
    regularization: float = 1e-12
    refinement_steps: int = 2
    log_callback: Optional[Callable[[dict], None]] = None

    def tightened(self, factor: float = 0.01) -> "SolverOptions":
        return dataclasses.replace(self, tol=self.tol * factor, max_iters=self.max_iters * 2)


@dataclass
class SdpProblem:
    """``maximize objective·y + constant (+ t)`` s.t. ``base + Σ y_i directions[i] (- t I) ⪰ 0``.

    ``directions`` are symmetric matrices (dense or scipy.sparse).  ``layout``
    lets the moment compiler map a solution back to a moment matrix.
    """

    base: np.ndarray
    directions: list
    objective: Optional[np.ndarray] = None
    objective_constant: float = 0.0
    maximize_min_eig: bool = True
    layout: object = None

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        n = self.base.shape[0]
        if self.base.shape != (n, n):
            raise InvalidInputError("base must be square")
        dirs = []
        for d in self.directions:
            d = sp.csr_matrix(d, dtype=float)
            if d.shape != (n, n):
                raise InvalidInputError(f"direction of shape {d.shape} does not match base {n}x{n}")
            dirs.append(d)
        self.directions = dirs
        if self.objective is not None:
            self.objective = np.asarray(self.objective, dtype=float)
            if self.objective.shape != (len(dirs),):
                raise InvalidInputError("objective needs one coefficient per direction")

    @property
    def dim(self) -> int:
        return self.base.shape[0]

    @property
    def n_vars(self) -> int:
        return len(self.directions)

    def matrix(self, y, t: float = 0.0) -> np.ndarray:
        m = self.base.copy()
        for yi, d in zip(y, self.directions):
            if yi:
                m += yi * d.toarray()
        if self.maximize_min_eig:
            m -= t * np.eye(self.dim)
        return m

    def objective_value(self, y, t: float = 0.0) -> float:
        val = self.objective_constant
        if self.objective is not None:
            val += float(self.objective @ np.asarray(y))
        if self.maximize_min_eig:
            val += t
        return val


@dataclass
class SdpSolution:
    y: np.ndarray
    t_star: Optional[float]
    value: float
    X: np.ndarray
    Z: np.ndarray
    gap: float
    primal_residual: float
    dual_residual: float
    iters: int
    status: str                     # optimal | max-iters | numerical-failure
    history: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# solver

def _to_standard_form(problem: SdpProblem):
    n = problem.dim
    m = problem.n_vars
    rows = [(-d).tocsr() for d in problem.directions]
    b = np.zeros(m) if problem.objective is None else problem.objective.copy()
    if problem.maximize_min_eig:
        rows.append(sp.identity(n, format="csr"))
        b = np.concatenate([b, [1.0]])
    amat = sp.vstack([r.reshape(1, n * n) for r in rows], format="csr") if rows else sp.csr_matrix((0, n * n))
    return problem.base, amat, b


def _max_step(x_chol: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with X + alpha dX ⪰ 0, given the Cholesky factor of X."""
    w = scipy.linalg.solve_triangular(x_chol, dx, lower=True)
    w = scipy.linalg.solve_triangular(x_chol, w.T, lower=True)
    lam = np.linalg.eigvalsh((w + w.T) / 2)[0]
    return math.inf if lam >= 0 else -1.0 / lam


class _Schur:
    """Builds ``M_ij = tr(A_i X A_j Z^-1)`` exploiting the sparsity of each A_j."""

    def __init__(self, amat: sp.csr_matrix, n: int):
        self.amat = amat
        self.n = n
        self.parts = []
        dense_threshold = n  # beyond ~n nonzeros a dense product is cheaper
        for j in range(amat.shape[0]):
            row = amat.getrow(j)
            idx, vals = row.indices, row.data
            if idx.size > dense_threshold:
                self.parts.append(("dense", row.toarray().reshape(n, n)))
            else:
                r, s = np.divmod(idx, n)
                self.parts.append(("sparse", (r, s, vals)))

    def build(self, x: np.ndarray, zinv: np.ndarray) -> np.ndarray:
        m = len(self.parts)
        out = np.empty((m, m))
        for j, (kind, data) in enumerate(self.parts):
            if kind == "dense":
                y = x @ data @ zinv
            else:
                r, s, vals = data
                y = x[:, r] @ (vals[:, None] * zinv[s, :])
            out[:, j] = self.amat @ y.ravel()
        return (out + out.T) / 2


def _constraint_projector(amat: sp.csr_matrix):
    """Solver for ``(A A^T) u = r``; None when the constraint rows are dependent.

    ``A A^T`` does not change between iterations and stays well conditioned,
    unlike the Schur matrix, so it is used to restore ``A(dX) = r_p`` exactly.
    """
    if amat.shape[0] == 0:
        return None
    gram = (amat @ amat.T).tocsc()
    try:
        return scipy.sparse.linalg.factorized(gram)
    except RuntimeError:
        return None


def solve(problem: SdpProblem, opts: Optional[SolverOptions] = None) -> SdpSolution:
    """Primal-dual interior-point solve of ``problem``; deterministic for fixed input."""
    opts = opts or SolverOptions()
    n = problem.dim
    if n > opts.dim_cap:
        raise InvalidInputError(f"problem dimension {n} exceeds the cap {opts.dim_cap}")
    c, amat, b = _to_standard_form(problem)
    m = amat.shape[0]
    schur = _Schur(amat, n)
    project = _constraint_projector(amat)
    eye = np.eye(n)

    tau = 1.0 + float(np.max(np.abs(c), initial=0.0))
    x = tau * eye
    z = tau * eye
    y = np.zeros(m)
    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.linalg.norm(c)

    def a_op(mat):
        return amat @ mat.ravel()

    def a_adj(vec):
        return (amat.T @ vec).reshape(n, n)

    history = []
    status = "max-iters"
    stalls = 0
    it = 0
    gap = pinf = dinf = math.inf
    for it in range(opts.max_iters + 1):
        rp = b - a_op(x)
        rd = c - z - a_adj(y)
        rd = (rd + rd.T) / 2
        pobj = float(np.sum(c * x))
        dobj = float(b @ y)
        xz = float(np.sum(x * z))
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = float(np.linalg.norm(rp) / norm_b)
        dinf = float(np.linalg.norm(rd) / norm_c)
        record = {"iter": it, "pobj": pobj, "dobj": dobj, "xz": xz, "gap": gap,
                  "pinf": pinf, "dinf": dinf}
        history.append(record)
        if opts.log_callback is not None:
            opts.log_callback(record)
        log.debug("iter %3d  pobj % .10e  dobj % .10e  gap %.2e  pinf %.2e  dinf %.2e",
                  it, pobj, dobj, gap, pinf, dinf)
        if max(gap, pinf, dinf) <= opts.tol and xz / (1.0 + abs(pobj) + abs(dobj)) <= opts.tol:
            status = "optimal"
            break
        if it == opts.max_iters:
            break

        mu = xz / n
        try:
            z_chol = np.linalg.cholesky(z)
            x_chol = np.linalg.cholesky(x)
        except np.linalg.LinAlgError:
            status = "numerical-failure"
            break
        z_chol_inv = scipy.linalg.solve_triangular(z_chol, eye, lower=True)
        zinv = z_chol_inv.T @ z_chol_inv

        schur_m = schur.build(x, zinv)
        try:
            factor = scipy.linalg.cho_factor(schur_m, lower=True)
        except np.linalg.LinAlgError:
            reg = opts.regularization * max(1.0, float(np.max(np.diag(schur_m))))
            try:
                factor = scipy.linalg.cho_factor(schur_m + reg * np.eye(m), lower=True)
            except np.linalg.LinAlgError:
                status = "numerical-failure"
                break

        x_rd_zinv = x @ rd @ zinv

        def direction(target, second_order):
            g = target * zinv - x
            if second_order is not None:
                g = g - second_order @ zinv
            dy = scipy.linalg.cho_solve(factor, rp - a_op(g - x_rd_zinv))
            # the Schur matrix loses accuracy near the boundary; refine against the true residual
            for _ in range(opts.refinement_steps + 1):
                dz = rd - a_adj(dy)
                dx = g - x @ dz @ zinv
                dx = (dx + dx.T) / 2
                resid = rp - a_op(dx)
                if _ == opts.refinement_steps or np.linalg.norm(resid) <= 1e-14 * norm_b:
                    break
                dy = dy + scipy.linalg.cho_solve(factor, resid)
            if project is not None:
                # the remaining residual is Schur round-off; remove it along the row space of A
                dx = dx + a_adj(project(rp - a_op(dx)))
                dx = (dx + dx.T) / 2
            dz = (dz + dz.T) / 2
            return dx, dy, dz

        dx_a, dy_a, dz_a = direction(0.0, None)
        ap = min(1.0, _max_step(x_chol, dx_a))
        ad = min(1.0, _max_step(z_chol, dz_a))
        mu_aff = float(np.sum((x + ap * dx_a) * (z + ad * dz_a))) / n
        # squared (not cubed) ratio: the cube centres too little on degenerate infeasible instances
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 2)) if mu > 0 else 0.0

        dx, dy, dz = direction(sigma * mu, dx_a @ dz_a)
        ap = min(1.0, opts.step_factor * _max_step(x_chol, dx))
        ad = min(1.0, opts.step_factor * _max_step(z_chol, dz))
        x = x + ap * dx
        y = y + ad * dy
        z = z + ad * dz
        x = (x + x.T) / 2
        z = (z + z.T) / 2
        record["alpha_p"], record["alpha_d"], record["sigma"] = ap, ad, sigma
        stalls = stalls + 1 if max(ap, ad) < 1e-8 else 0
        if stalls >= 3:
            status = "numerical-failure"
            break

    n_free = problem.n_vars
    y_free = y[:n_free].copy()
    t_star = float(y[n_free]) if problem.maximize_min_eig else None
    value = problem.objective_value(y_free, t_star or 0.0)
    return SdpSolution(y=y_free, t_star=t_star, value=value, X=x, Z=z, gap=gap,
                       primal_residual=pinf, dual_residual=dinf, iters=it, status=status,
                       history=history)


def random_feasible_problem(n: int, m: int, rng: np.random.Generator) -> SdpProblem:
    """Random strictly feasible max-min-eigenvalue problem with traceless directions."""
    a = rng.normal(size=(n, n))
    base = a @ a.T / n + 0.1 * np.eye(n)
    dirs = []
    for _ in range(m):
        d = rng.normal(size=(n, n))
        d = (d + d.T) / 2
        d -= np.trace(d) / n * np.eye(n)
        dirs.append(d)
    return SdpProblem(base, dirs)
