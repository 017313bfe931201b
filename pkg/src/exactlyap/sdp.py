"""Dense semidefinite feasibility solver and factorization helpers.

Problems are stated over symmetric matrix blocks ``G_b`` plus scalar free
variables, subject to linear equalities.  ``sdp_solve`` eliminates the
equalities with a null-space parametrisation and then maximises a uniform
slack ``lam`` with every block ``G_b - lam*I`` positive semidefinite.  The
resulting linear matrix inequality is handled by a primal-dual interior
point method (Nesterov-Todd scaling, Mehrotra predictor-corrector).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
MAX_ITER = 200
STEP_FRACTION = 0.98
# below the requested tolerance we still accept a stalled iterate this accurate
ACCEPT_ERR = 1e-6
STALL_ITERS = 8


class SdpError(Exception):
    pass


class SdpInfeasible(SdpError):
    def __init__(self, message: str, slack: float | None = None):
        super().__init__(message)
        self.slack = slack


class SdpNumericalFailure(SdpError):
    pass


class NotPSD(ValueError):
    def __init__(self, index: int, pivot: float):
        super().__init__(f"matrix is not positive semidefinite: pivot {index} is {pivot:.3e}")
        self.index = index
        self.pivot = pivot


@dataclass
class Constraint:
    """``sum coeff*G[b][i][j] + sum coeff*free[k] == rhs``.

    Matrix keys are ``(block, i, j)``; ``(b, i, j)`` and ``(b, j, i)`` name the
    same symmetric entry and their coefficients add up.
    """

    matrix: dict[tuple[int, int, int], float] = field(default_factory=dict)
    free: dict[int, float] = field(default_factory=dict)
    rhs: float = 0.0


@dataclass
class SdpProblem:
    blocks: list[int]
    free_vars: int
    constraints: list[Constraint]
    objective: Constraint | None = None

    def __post_init__(self):
        if not self.constraints:
            raise ValueError("an SDP needs at least one constraint")
        if any(d < 1 for d in self.blocks):
            raise ValueError("block dimensions must be positive")
        for con in self.constraints + ([self.objective] if self.objective else []):
            for b, i, j in con.matrix:
                if not (0 <= b < len(self.blocks) and 0 <= i < self.blocks[b] and 0 <= j < self.blocks[b]):
                    raise ValueError(f"constraint references invalid entry {(b, i, j)}")
            for k in con.free:
                if not 0 <= k < self.free_vars:
                    raise ValueError(f"constraint references invalid free variable {k}")


@dataclass
class SdpSolution:
    blocks: list[np.ndarray]
    free_values: np.ndarray
    max_residual: float
    min_eig_lower: list[float]
    slack: float
    iterations: int = 0


# ---------------------------------------------------------------------------
# small dense helpers


def _triu_index(blocks: list[int]) -> list[dict[tuple[int, int], int]]:
    out, k = [], 0
    for d in blocks:
        idx = {}
        for i in range(d):
            for j in range(i, d):
                idx[(i, j)] = k
                k += 1
        out.append(idx)
    return out


def _to_blocks(vec: np.ndarray, blocks: list[int], index) -> list[np.ndarray]:
    mats = []
    for d, idx in zip(blocks, index):
        m = np.zeros((d, d))
        for (i, j), k in idx.items():
            m[i, j] = m[j, i] = vec[k]
        mats.append(m)
    return mats


def _assemble(prob: SdpProblem):
    index = _triu_index(prob.blocks)
    n_mat = sum(len(ix) for ix in index)
    n = n_mat + prob.free_vars

    def row(con: Constraint) -> np.ndarray:
        r = np.zeros(n)
        for (b, i, j), c in con.matrix.items():
            key = (i, j) if i <= j else (j, i)
            r[index[b][key]] += c
        for k, c in con.free.items():
            r[n_mat + k] += c
        return r

    A = np.array([row(c) for c in prob.constraints])
    rhs = np.array([c.rhs for c in prob.constraints], dtype=float)
    obj = row(prob.objective) if prob.objective is not None else None
    return index, n_mat, A, rhs, obj


def ldl_decompose(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unpivoted ``G = L diag(D) L^T`` with L unit lower triangular.

    Pivots in ``(-thr, 0]`` (thr = 10*eps*max|G|) are clamped to zero and the
    corresponding column of L below the diagonal is zeroed; a pivot below
    ``-thr`` raises ``NotPSD``.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if G.shape != (n, n):
        raise ValueError("ldl_decompose needs a square matrix")
    if not np.allclose(G, G.T, rtol=0, atol=1e-12 * max(1.0, np.abs(G).max(initial=0.0))):
        raise ValueError("ldl_decompose needs a symmetric matrix")
    thr = 10 * EPS * max(np.abs(G).max(initial=0.0), 1e-300)
    L = np.eye(n)
    D = np.zeros(n)
    S = G.copy()
    for j in range(n):
        piv = S[j, j]
        if piv < -thr:
            raise NotPSD(j, piv)
        if piv <= 0:
            D[j] = 0.0
            continue
        D[j] = piv
        col = S[j + 1 :, j] / piv
        L[j + 1 :, j] = col
        S[j + 1 :, j + 1 :] -= piv * np.outer(col, col)
    return L, D


def min_eig_estimate(G: np.ndarray, rel_tol: float = 1e-10) -> float:
    """Lower bound on the smallest eigenvalue by bisection on Cholesky of ``G - t I``."""
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    scale = max(np.abs(G).max(initial=0.0), 1e-300)
    radii = np.abs(G).sum(axis=1) - np.abs(np.diag(G))
    lo = float(np.min(np.diag(G) - radii)) - scale * 1e-12  # Gershgorin lower bound
    hi = float(np.min(np.diag(G))) + scale * 1e-12
    eye = np.eye(n)

    def pd(t: float) -> bool:
        try:
            np.linalg.cholesky(G - t * eye)
            return True
        except np.linalg.LinAlgError:
            return False

    if pd(hi):  # can only happen for 1x1 rounding corner cases
        return hi
    while not pd(lo):
        lo -= max(abs(lo), scale)
    while hi - lo > rel_tol * scale:
        mid = 0.5 * (lo + hi)
        if pd(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# LMI interior point method
#
#   max  b^T z   s.t.  Z = C - sum_i z_i A_i  >= 0            (dual)
#   min  <C, X>  s.t.  <A_i, X> = b_i,  X >= 0                (primal)
#
# Every matrix is a list of dense symmetric blocks.


def _inner(U, V) -> float:
    return float(sum(np.vdot(u, v) for u, v in zip(U, V)))


def _max_step(Lfac: np.ndarray, dM: np.ndarray) -> float:
    """Largest alpha with Lfac Lfac^T + alpha dM >= 0."""
    Linv_dM = sla.solve_triangular(Lfac, dM, lower=True)
    S = sla.solve_triangular(Lfac, Linv_dM.T, lower=True)
    lam_min = np.linalg.eigvalsh(0.5 * (S + S.T))[0]
    return np.inf if lam_min >= 0 else -1.0 / lam_min


def _lmi_solve(C, As, b, tol: float):
    """Return (z, X, Z, iterations). ``As`` has one array (m, d, d) per block."""
    m = len(b)
    dims = [c.shape[0] for c in C]
    N = sum(dims)
    normC = np.sqrt(sum(np.sum(c * c) for c in C))
    normA = [np.sqrt(sum(np.sum(a[i] ** 2) for a in As)) for i in range(m)]
    xi = max(1.0, np.sqrt(N) * max((1 + abs(bi)) / (1 + na) for bi, na in zip(b, normA)))
    eta = max(1.0, (max([normC] + normA)) / np.sqrt(N))
    X = [xi * np.eye(d) for d in dims]
    Z = [eta * np.eye(d) for d in dims]
    z = np.zeros(m)
    nb = np.linalg.norm(b)
    best = (np.inf, 0, None)

    def AX(Ms):
        return np.array([sum(np.vdot(a[i], M) for a, M in zip(As, Ms)) for i in range(m)])

    def ATz(v):
        return [np.tensordot(v, a, axes=1) for a in As]

    for it in range(1, MAX_ITER + 1):
        Rp = b - AX(X)
        Rd = [c - zz - t for c, zz, t in zip(C, Z, ATz(z))]
        gap = _inner(X, Z)
        mu = gap / N
        pobj = _inner(C, X)
        dobj = float(b @ z)
        perr = np.linalg.norm(Rp) / (1 + nb)
        derr = np.sqrt(sum(np.sum(r * r) for r in Rd)) / (1 + normC)
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        err = max(perr, derr, relgap, gap / (1 + abs(pobj) + abs(dobj)))
        if err < tol:
            return z, X, Z, it
        if not np.isfinite(pobj) or not np.isfinite(dobj) or abs(dobj) > 1e12:
            raise SdpNumericalFailure(f"iterates diverged at iteration {it} (dual objective {dobj:.3e})")
        # Z stays positive definite along the way, so any iterate is a usable
        # dual point; remember the most accurate one in case progress stalls
        if err < best[0]:
            best = (err, it, (z.copy(), [x.copy() for x in X], [s.copy() for s in Z]))
        elif it - best[1] >= STALL_ITERS and best[0] < ACCEPT_ERR:
            return (*best[2], it)

        # Nesterov-Todd scaling W = G G^T with G^T Z G = G^{-1} X G^{-T} = diag(d)
        Gs, Ginv, dvec, W, LX, LZ = [], [], [], [], [], []
        try:
            for Xb, Zb in zip(X, Z):
                Lx = np.linalg.cholesky(Xb)
                Lz = np.linalg.cholesky(Zb)
                T = Lx.T @ Zb @ Lx
                lam, Q = np.linalg.eigh(0.5 * (T + T.T))
                lam = np.maximum(lam, 1e-300)
                Gb = Lx @ Q * lam ** -0.25
                Gib = (lam**0.25)[:, None] * (Q.T @ sla.solve_triangular(Lx, np.eye(len(lam)), lower=True))
                Gs.append(Gb)
                Ginv.append(Gib)
                dvec.append(np.sqrt(lam))
                W.append(Gb @ Gb.T)
                LX.append(Lx)
                LZ.append(Lz)
        except np.linalg.LinAlgError as exc:
            if best[0] < ACCEPT_ERR:
                return (*best[2], it)
            raise SdpNumericalFailure(f"lost positive definiteness at iteration {it}") from exc

        # Schur complement M_ij = <A_i, W A_j W>
        M = np.zeros((m, m))
        WAW = []
        for a, Wb in zip(As, W):
            P = np.einsum("ab,ibc,cd->iad", Wb, a, Wb, optimize=True)
            WAW.append(P)
            M += np.einsum("iab,jab->ij", a, P, optimize=True)
        M = 0.5 * (M + M.T)
        try:
            cho = sla.cho_factor(M + 1e-14 * np.trace(M) / m * np.eye(m))
            solveM = lambda r: sla.cho_solve(cho, r)  # noqa: E731
        except (np.linalg.LinAlgError, ValueError):
            pinv = np.linalg.pinv(M)
            solveM = lambda r: pinv @ r  # noqa: E731

        def direction(Rc_scaled):
            Rc = [Gb @ R @ Gb.T for Gb, R in zip(Gs, Rc_scaled)]
            WRdW = [Wb @ r @ Wb for Wb, r in zip(W, Rd)]
            rhs = Rp - AX([rc - w for rc, w in zip(Rc, WRdW)])
            dz = solveM(rhs)
            dZ = [r - t for r, t in zip(Rd, ATz(dz))]
            dX = [rc - Wb @ dZb @ Wb for rc, Wb, dZb in zip(Rc, W, dZ)]
            dX = [0.5 * (d + d.T) for d in dX]
            dZ = [0.5 * (d + d.T) for d in dZ]
            return dX, dz, dZ

        def lyap(R):
            return [2.0 * r / (d[:, None] + d[None, :]) for r, d in zip(R, dvec)]

        def steps(dX, dZ):
            ap = min([1.0] + [STEP_FRACTION * _max_step(L, d) for L, d in zip(LX, dX)])
            ad = min([1.0] + [STEP_FRACTION * _max_step(L, d) for L, d in zip(LZ, dZ)])
            return ap, ad

        # predictor
        R_aff = [-np.diag(d * d) for d in dvec]
        dXa, dza, dZa = direction(lyap(R_aff))
        ap, ad = steps(dXa, dZa)
        gap_aff = _inner([x + ap * d for x, d in zip(X, dXa)], [s + ad * d for s, d in zip(Z, dZa)])
        sigma = min(1.0, max(0.0, (gap_aff / gap) ** 3)) if gap > 0 else 0.0

        # corrector
        R_cor = []
        for Gb, Gib, d, dx, dzm in zip(Gs, Ginv, dvec, dXa, dZa):
            sx = Gib @ dx @ Gib.T
            sz = Gb.T @ dzm @ Gb
            R_cor.append(sigma * mu * np.eye(len(d)) - np.diag(d * d) - 0.5 * (sx @ sz + sz @ sx))
        dX, dz, dZ = direction(lyap(R_cor))
        ap, ad = steps(dX, dZ)
        X = [x + ap * d for x, d in zip(X, dX)]
        Z = [s + ad * d for s, d in zip(Z, dZ)]
        z = z + ad * dz
    if best[0] < ACCEPT_ERR:
        return (*best[2], MAX_ITER)
    raise SdpNumericalFailure(f"no convergence within {MAX_ITER} iterations")


def sdp_solve(prob: SdpProblem, tol: float = 1e-9) -> SdpSolution:
    """Find a feasible point maximising the uniform eigenvalue slack.

    Returns the solution when the optimal slack is at least ``-tol``; raises
    ``SdpInfeasible`` otherwise (or when the equalities are inconsistent) and
    ``SdpNumericalFailure`` when the interior point method breaks down.
    Strictness (slack clearly positive) is for the caller to judge.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    index, n_mat, A, rhs, obj = _assemble(prob)
    n = A.shape[1]
    u0, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    res0 = np.abs(A @ u0 - rhs).max()
    scale = 1 + np.abs(rhs).max() + np.abs(A).max()
    if res0 > 1e-9 * scale:
        raise SdpInfeasible(f"linear equalities are inconsistent (residual {res0:.3e})")

    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > max(A.shape) * EPS * (s[0] if len(s) else 1.0) * 10))
    Nsp = Vt[rank:].T  # columns span ker A
    NG, NF = Nsp[:n_mat], Nsp[n_mat:]
    if NG.shape[1]:
        U, sg, Vg = np.linalg.svd(NG, full_matrices=False)
        keep = sg > 1e-10 * max(sg[0], 1e-300)
        dirs_G = U[:, keep]
        dirs_F = NF @ (Vg[keep].T / sg[keep])
    else:
        dirs_G = np.zeros((n_mat, 0))
        dirs_F = np.zeros((n - n_mat, 0))

    G0 = _to_blocks(u0[:n_mat], prob.blocks, index)
    basis = [_to_blocks(dirs_G[:, k], prob.blocks, index) for k in range(dirs_G.shape[1])]
    k_dirs = len(basis)

    if obj is not None and np.any(obj):
        # minimise the objective over the feasible set; no slack variable
        As = [np.array([-B[b] for B in basis]).reshape(k_dirs, d, d) for b, d in enumerate(prob.blocks)]
        bvec = np.array([-(obj[:n_mat] @ dirs_G[:, k] + obj[n_mat:] @ dirs_F[:, k]) for k in range(k_dirs)])
        with_slack = False
    else:
        As = []
        for bidx, d in enumerate(prob.blocks):
            stack = [-B[bidx] for B in basis] + [np.eye(d)]
            As.append(np.array(stack).reshape(k_dirs + 1, d, d))
        bvec = np.zeros(k_dirs + 1)
        bvec[-1] = 1.0
        with_slack = True

    if len(bvec) == 0:
        zvec, iters = np.zeros(0), 0
    else:
        zvec, _, _, iters = _lmi_solve(G0, As, bvec, tol)
    y = zvec[:k_dirs]
    u = u0 + np.concatenate([dirs_G @ y, dirs_F @ y])
    blocks = [0.5 * (g + g.T) for g in _to_blocks(u[:n_mat], prob.blocks, index)]
    eigs = [min_eig_estimate(g) for g in blocks]
    slack = float(zvec[-1]) if with_slack else min(eigs)
    residual = float(np.abs(A @ u - rhs).max())
    log.debug("sdp: %d dirs, %d iterations, slack %.3e, residual %.3e", k_dirs, iters, slack, residual)
    if (slack if with_slack else min(eigs)) < -tol:
        raise SdpInfeasible(f"no positive semidefinite point (best slack {slack:.3e})", slack)
    return SdpSolution(blocks, u[n_mat:].copy(), residual, eigs, slack, iters)


# ---------------------------------------------------------------------------
# SDPA sparse format (debug dumps)
#
# The problem maps onto SDPA's dual form  max <F0, Y>  s.t.  <Fi, Y> = ci,
# Y >= 0: constraint i gives Fi and ci, the objective gives -F0.  Free
# variables become a diagonal block of split pairs (x+, x-).


def write_sdpa(prob: SdpProblem, path: str | Path) -> None:
    f = prob.free_vars
    blocks = list(prob.blocks) + ([-2 * f] if f else [])
    lines = [f"* dense SDP dump: {len(prob.constraints)} constraints", str(len(prob.constraints)), str(len(blocks))]
    lines.append(" ".join(str(b) for b in blocks))
    lines.append(" ".join(repr(float(c.rhs)) for c in prob.constraints))

    def entries(con: Constraint, matno: int, sign: float):
        merged: dict[tuple[int, int, int], float] = {}
        for (b, i, j), c in con.matrix.items():
            key = (b, min(i, j), max(i, j))
            merged[key] = merged.get(key, 0.0) + c
        for (b, i, j), c in sorted(merged.items()):
            val = c if i == j else c / 2.0
            if val:
                yield f"{matno} {b + 1} {i + 1} {j + 1} {sign * val!r}"
        for k, c in sorted(con.free.items()):
            if c:
                lb = len(prob.blocks) + 1
                yield f"{matno} {lb} {2 * k + 1} {2 * k + 1} {sign * c!r}"
                yield f"{matno} {lb} {2 * k + 2} {2 * k + 2} {-sign * c!r}"

    if prob.objective is not None:
        lines.extend(entries(prob.objective, 0, -1.0))
    for i, con in enumerate(prob.constraints, start=1):
        lines.extend(entries(con, i, 1.0))
    Path(path).write_text("\n".join(lines) + "\n")


def read_sdpa(path: str | Path) -> SdpProblem:
    """Inverse of ``write_sdpa`` (only for files it produced)."""
    raw = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.lstrip().startswith(("*", '"'))]
    m = int(raw[0].split()[0])
    nblocks = int(raw[1].split()[0])
    sizes = [int(t) for t in raw[2].replace(",", " ").replace("{", " ").replace("}", " ").split()][:nblocks]
    rhs = [float(t) for t in raw[3].replace(",", " ").replace("{", " ").replace("}", " ").split()][:m]
    sdp_blocks = [s for s in sizes if s > 0]
    free = -sizes[-1] // 2 if sizes[-1] < 0 else 0
    cons = [Constraint(rhs=r) for r in rhs]
    objective = Constraint()
    for ln in raw[4:]:
        matno, blk, i, j, val = ln.split()
        matno, blk, i, j, v = int(matno), int(blk) - 1, int(i) - 1, int(j) - 1, float(val)
        target = objective if matno == 0 else cons[matno - 1]
        sign = -1.0 if matno == 0 else 1.0
        if blk < len(sdp_blocks):
            target.matrix[(blk, i, j)] = target.matrix.get((blk, i, j), 0.0) + sign * (v if i == j else 2 * v)
        elif i % 2 == 0:
            target.free[i // 2] = target.free.get(i // 2, 0.0) + sign * v
    has_obj = bool(objective.matrix or objective.free)
    return SdpProblem(sdp_blocks, free, cons, objective if has_obj else None)
