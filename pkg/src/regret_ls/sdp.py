"""Small dense semidefinite programming via a primal-dual interior-point method.

Problems are linear matrix inequalities in canonical form

    minimize    c' z
    subject to  F0 + z[0]*F1 + ... + z[k-1]*Fk  is PSD   (one or more blocks)

with Hermitian complex blocks.  Every block larger than 1x1 is embedded into
a real symmetric matrix of twice the dimension (``embed_hermitian``), which
preserves positive semidefiniteness and doubles eigenvalue multiplicities;
1x1 real blocks bypass the embedding.  The interior-point core then runs
entirely in real arithmetic.

The core is an infeasible-start path-following method with Nesterov-Todd
scaling.  Each iteration solves the Newton system of

    <F_i, X> = c_i,      S = F0 + sum z_i F_i,      X S = mu I

by eliminating dX and dS against the Schur complement in dz, takes separate
primal and dual step lengths capped by a fraction-to-boundary rule, and
chooses the centering parameter from an affine-scaling probe.  A Mehrotra
second-order corrector is available behind ``SolverOptions.use_corrector``
(off by default).  The method is deterministic: identical inputs and options
produce identical iterates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .linalg import matrix_from_json, matrix_to_json

_HERMITIAN_TOL = 1e-12


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverOptions:
    """Tunables for ``solve``; defaults match the documented contract."""

    max_iterations: int = 200
    feasibility_tol: float = 1e-8
    gap_tol: float = 1e-7
    fraction_to_boundary: float = 0.99
    use_corrector: bool = False


@dataclass(frozen=True)
class LmiBlock:
    """One PSD block: ``f0`` plus one coefficient matrix per variable."""

    f0: np.ndarray
    coeffs: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.f0.shape[0]


def _check_hermitian(f: np.ndarray, what: str) -> np.ndarray:
    f = np.asarray(f, dtype=np.complex128)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError(f"{what} must be square, got shape {f.shape}")
    dev = np.linalg.norm(f - f.conj().T)
    if dev > _HERMITIAN_TOL * max(1.0, np.linalg.norm(f)):
        raise ValueError(f"{what} is not Hermitian (deviation {dev:.3e})")
    return f


@dataclass(frozen=True)
class LmiSystem:
    """Linear objective plus affine Hermitian matrix-inequality constraints.

    Attributes
    ----------
    num_vars : int
        Number of real decision variables.
    objective : numpy.ndarray
        Real cost vector c of length ``num_vars``.
    blocks : tuple[LmiBlock, ...]
        PSD constraints; every block carries exactly ``num_vars``
        coefficient matrices.  Scalar constraints are 1x1 blocks.
    initial_point : numpy.ndarray or None
        Optional strictly feasible starting point for the solver.
    tau_indices : tuple[int, ...]
        Positions of multiplier variables inside z, echoed into
        ``SdpSolution.tau``.
    variable_names : tuple[str, ...] or None
        Optional labels, for diagnostics and serialization only.
    """

    num_vars: int
    objective: np.ndarray
    blocks: tuple[LmiBlock, ...]
    initial_point: np.ndarray | None = None
    tau_indices: tuple[int, ...] = ()
    variable_names: tuple[str, ...] | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=np.float64).reshape(-1)
        if c.shape[0] != self.num_vars:
            raise ValueError("objective length does not match num_vars")
        object.__setattr__(self, "objective", c)
        if not self.blocks:
            raise ValueError("at least one block is required")
        for bi, blk in enumerate(self.blocks):
            _check_hermitian(blk.f0, f"block {bi} F0")
            if len(blk.coeffs) != self.num_vars:
                raise ValueError(
                    f"block {bi} has {len(blk.coeffs)} coefficient matrices, "
                    f"expected {self.num_vars}"
                )
            for vi, fmat in enumerate(blk.coeffs):
                fm = _check_hermitian(fmat, f"block {bi} F{vi + 1}")
                if fm.shape != blk.f0.shape:
                    raise ValueError(f"block {bi} F{vi + 1} shape mismatch")

    def evaluate_block(self, index: int, z) -> np.ndarray:
        """Value of block ``index`` at the point z (complex Hermitian)."""
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        blk = self.blocks[index]
        out = blk.f0.astype(np.complex128).copy()
        for zi, fmat in zip(z, blk.coeffs):
            if zi != 0.0:
                out += zi * fmat
        return out

    def min_eigenvalues(self, z) -> list[float]:
        """Smallest eigenvalue of each block at z."""
        return [
            float(np.linalg.eigvalsh(self.evaluate_block(i, z))[0])
            for i in range(len(self.blocks))
        ]

    def to_json(self) -> dict:
        return {
            "num_vars": self.num_vars,
            "objective": [float(v) for v in self.objective],
            "tau_indices": list(self.tau_indices),
            "variable_names": list(self.variable_names) if self.variable_names else None,
            "blocks": [
                {
                    "f0": matrix_to_json(blk.f0),
                    "coeffs": [matrix_to_json(f) for f in blk.coeffs],
                }
                for blk in self.blocks
            ],
        }

    @staticmethod
    def from_json(obj: dict) -> "LmiSystem":
        blocks = tuple(
            LmiBlock(
                f0=matrix_from_json(b["f0"]),
                coeffs=tuple(matrix_from_json(f) for f in b["coeffs"]),
            )
            for b in obj["blocks"]
        )
        names = obj.get("variable_names")
        return LmiSystem(
            num_vars=int(obj["num_vars"]),
            objective=np.asarray(obj["objective"], dtype=np.float64),
            blocks=blocks,
            tau_indices=tuple(obj.get("tau_indices", ())),
            variable_names=tuple(names) if names else None,
        )


@dataclass(frozen=True)
class SdpSolution:
    z_star: np.ndarray
    objective_value: float
    tau: np.ndarray
    status: SolveStatus
    duality_gap: float
    iterations: int
    merit_history: tuple[float, ...] = field(default=())
    message: str = ""


def embed_hermitian(f, tol: float = _HERMITIAN_TOL) -> np.ndarray:
    """Real symmetric embedding [[Re F, -Im F], [Im F, Re F]] of Hermitian F.

    PSD is preserved in both directions and each eigenvalue of F appears
    twice in the embedding.  Raises ``ValueError`` when F is not Hermitian
    within ``tol`` (relative to max(1, ||F||)).
    """
    f = np.asarray(f, dtype=np.complex128)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {f.shape}")
    dev = np.linalg.norm(f - f.conj().T)
    if dev > tol * max(1.0, np.linalg.norm(f)):
        raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
    re, im = f.real, f.imag
    top = np.hstack([re, -im])
    bot = np.hstack([im, re])
    out = np.vstack([top, bot])
    return 0.5 * (out + out.T)


def _embed_block(blk: LmiBlock) -> tuple[np.ndarray, np.ndarray]:
    """Embedded (f0, coeff stack); 1x1 real blocks bypass the embedding."""
    if blk.dim == 1 and abs(blk.f0[0, 0].imag) < _HERMITIAN_TOL:
        f0 = np.array([[blk.f0[0, 0].real]])
        coeffs = np.stack([np.array([[f[0, 0].real]]) for f in blk.coeffs])
        return f0, coeffs
    f0 = embed_hermitian(blk.f0)
    coeffs = np.stack([embed_hermitian(f) for f in blk.coeffs])
    return f0, coeffs


def _chol(a: np.ndarray) -> np.ndarray:
    """Cholesky factor with a scalar fast path for 1x1 blocks."""
    if a.shape[0] == 1:
        v = float(a[0, 0])
        if v <= 0.0:
            raise np.linalg.LinAlgError("1x1 block not positive definite")
        return np.array([[np.sqrt(v)]])
    return np.linalg.cholesky(a)


def _max_step(lo: np.ndarray, d: np.ndarray) -> float:
    """Largest alpha keeping P + alpha*D PSD, from P's Cholesky factor lo."""
    if lo.shape[0] == 1:
        lam = float(d[0, 0]) / float(lo[0, 0]) ** 2
    else:
        y = sla.solve_triangular(lo, d, lower=True, check_finite=False)
        a = sla.solve_triangular(lo, y.T, lower=True, check_finite=False).T
        lam = float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])
    if lam >= -1e-13:
        return np.inf
    return 1.0 / (-lam)


def _nt_scaling_factors(lx: np.ndarray, ls: np.ndarray) -> np.ndarray:
    """NT scaling W with W S W = X, from the Cholesky factors of X and S."""
    if lx.shape[0] == 1:
        return np.array([[float(lx[0, 0]) / float(ls[0, 0])]])
    _, sig, vt = np.linalg.svd(ls.T @ lx)
    g = lx @ vt.T / np.sqrt(sig)
    w = g @ g.T
    return 0.5 * (w + w.T)


def _nt_scaling(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Nesterov-Todd scaling point W with W S W = X, both arguments PD."""
    return _nt_scaling_factors(_chol(x), _chol(s))


class _Workspace:
    """Per-solve mutable state: embedded data plus (X, z, S) iterates."""

    def __init__(self, problem: LmiSystem):
        self.c = problem.objective.copy()
        self.k = problem.num_vars
        self.f0 = []
        self.fc = []  # coefficient stacks, one (k, d, d) array per block
        for blk in problem.blocks:
            f0, coeffs = _embed_block(blk)
            self.f0.append(f0)
            self.fc.append(coeffs)
        self.dims = [f.shape[0] for f in self.f0]
        # (k, d*d) views of the stacks; inner products become BLAS products
        self.fc_flat = [coeffs.reshape(coeffs.shape[0], -1) for coeffs in self.fc]
        self.nu = float(sum(self.dims))
        self.f0_scale = max(1.0, max(np.linalg.norm(f) for f in self.f0))
        self.c_scale = max(1.0, float(np.linalg.norm(self.c)))

    def constraint_value(self, z: np.ndarray, bi: int) -> np.ndarray:
        d = self.dims[bi]
        v = self.f0[bi] + (z @ self.fc_flat[bi]).reshape(d, d)
        return 0.5 * (v + v.T)

    def lin_residual(self, xs: list[np.ndarray]) -> np.ndarray:
        r = self.c.copy()
        for x, flat in zip(xs, self.fc_flat):
            r -= flat @ x.ravel()
        return r

    def gap(self, xs, ss) -> float:
        return float(sum(np.vdot(x.ravel(), s.ravel()) for x, s in zip(xs, ss)))


def _initial_iterates(ws: _Workspace, z0: np.ndarray):
    """Start from z0 with S = F(z0) shifted PD if necessary and X = I."""
    xs, ss = [], []
    for bi, d in enumerate(ws.dims):
        e = ws.constraint_value(z0, bi)
        lam = float(np.linalg.eigvalsh(e)[0])
        floor = 1e-6 * (1.0 + np.linalg.norm(e))
        if lam < floor:
            e = e + (floor - lam) * np.eye(d)
        ss.append(e)
        xs.append(np.eye(d))
    return xs, ss


def solve(problem: LmiSystem, opts: SolverOptions | None = None) -> SdpSolution:
    """Minimize the objective subject to the LMI blocks being PSD.

    Returns only status ``OPTIMAL`` when the relative duality gap is within
    ``opts.gap_tol`` and the linear and matrix residuals are within
    ``opts.feasibility_tol`` (scaled).  ``INFEASIBLE`` is reported when the
    iterates produce an improving-ray certificate; ``NUMERICAL_FAILURE``
    on factorization breakdown.
    """
    if opts is None:
        opts = SolverOptions()
    ws = _Workspace(problem)
    k = ws.k
    z = (
        np.asarray(problem.initial_point, dtype=np.float64).reshape(-1).copy()
        if problem.initial_point is not None
        else np.zeros(k)
    )
    if z.shape[0] != k:
        raise ValueError("initial_point length does not match num_vars")
    xs, ss = _initial_iterates(ws, z)

    def merit(xs, ss, z):
        lin = np.linalg.norm(ws.lin_residual(xs))
        mat = sum(
            np.linalg.norm(ws.constraint_value(z, bi) - ss[bi])
            for bi in range(len(ws.dims))
        )
        return ws.gap(xs, ss) + lin + mat

    history = [merit(xs, ss, z)]
    status = SolveStatus.MAX_ITERATIONS
    message = ""
    iterations = 0
    rel_gap = np.inf

    for iterations in range(1, opts.max_iterations + 1):
        r_lin = ws.lin_residual(xs)
        r_mats = [ws.constraint_value(z, bi) - ss[bi] for bi in range(len(ws.dims))]
        gap = ws.gap(xs, ss)
        obj = float(ws.c @ z)
        dual_obj = -float(sum(np.vdot(f0.ravel(), x.ravel()) for f0, x in zip(ws.f0, xs)))
        rel_gap = gap / (1.0 + abs(obj) + abs(dual_obj))
        xtrace = sum(abs(float(np.trace(x))) for x in xs)
        lin_scale = max(ws.c_scale, ws.f0_scale * (1.0 + xtrace))
        lin_ok = np.linalg.norm(r_lin) <= opts.feasibility_tol * lin_scale
        mat_ok = all(
            np.linalg.norm(r) <= opts.feasibility_tol * ws.f0_scale for r in r_mats
        )
        if rel_gap <= opts.gap_tol and lin_ok and mat_ok:
            status = SolveStatus.OPTIMAL
            iterations -= 1
            break

        # improving-ray infeasibility certificate: X PSD with <F_i, X> ~ 0
        # and <F0, X> < 0 rules out any feasible z
        xnorm = xtrace
        if xnorm > 1e8:
            lin_ray = np.linalg.norm(ws.lin_residual(xs) - ws.c) / xnorm
            f0_ray = sum(np.vdot(f0.ravel(), x.ravel()) for f0, x in zip(ws.f0, xs)) / xnorm
            if lin_ray < 1e-9 and f0_ray < -1e-9:
                status = SolveStatus.INFEASIBLE
                message = "improving-ray certificate found"
                break

        mu = gap / ws.nu
        try:
            lxs = [_chol(x) for x in xs]
            lss = [_chol(s) for s in ss]
            wmats = [_nt_scaling_factors(lx, ls) for lx, ls in zip(lxs, lss)]
            sinvs = []
            for ls in lss:
                if ls.shape[0] == 1:
                    sinvs.append(np.array([[1.0 / float(ls[0, 0]) ** 2]]))
                    continue
                inv_ls = sla.solve_triangular(
                    ls, np.eye(ls.shape[0]), lower=True, check_finite=False
                )
                sinvs.append(inv_ls.T @ inv_ls)

            m = np.zeros((k, k))
            for flat, coeffs, w in zip(ws.fc_flat, ws.fc, wmats):
                t = w @ coeffs @ w
                m += flat @ t.reshape(t.shape[0], -1).T
            m = 0.5 * (m + m.T)
            try:
                m_fac = sla.cho_factor(m)
            except np.linalg.LinAlgError:
                m_fac = None
            if m_fac is None:
                m = m + (1e-12 * max(1.0, float(np.trace(m)))) * np.eye(k)
                m_fac = sla.cho_factor(m)

            def newton(sigma_mu: float, corr: list[np.ndarray] | None):
                rhs = -ws.c.copy()
                targets = []
                for bi, (flat, w) in enumerate(zip(ws.fc_flat, wmats)):
                    tgt = sigma_mu * sinvs[bi] - w @ r_mats[bi] @ w
                    if corr is not None:
                        tgt = tgt - corr[bi]
                    targets.append(tgt)
                    rhs += flat @ tgt.ravel()
                dz = sla.cho_solve(m_fac, rhs)
                dss, dxs = [], []
                for bi, (flat, w) in enumerate(zip(ws.fc_flat, wmats)):
                    d = ws.dims[bi]
                    ds = (dz @ flat).reshape(d, d) + r_mats[bi]
                    ds = 0.5 * (ds + ds.T)
                    # complementarity target uses the bare sigma*mu*S^-1;
                    # the W R W term lives only in the reduced rhs
                    dx = targets[bi] + w @ r_mats[bi] @ w - xs[bi] - w @ ds @ w
                    dx = 0.5 * (dx + dx.T)
                    dss.append(ds)
                    dxs.append(dx)
                return dz, dxs, dss

            def step_limits(dxs, dss):
                ap = min((_max_step(lo, dx) for lo, dx in zip(lxs, dxs)), default=np.inf)
                ad = min((_max_step(lo, ds) for lo, ds in zip(lss, dss)), default=np.inf)
                return ap, ad

            def gap_terms(dxs, dss):
                g_ps = sum(float(np.vdot(dx.ravel(), s.ravel())) for dx, s in zip(dxs, ss))
                g_sd = sum(float(np.vdot(x.ravel(), ds.ravel())) for x, ds in zip(xs, dss))
                g_pd = sum(float(np.vdot(dx.ravel(), ds.ravel())) for dx, ds in zip(dxs, dss))
                return g_ps, g_sd, g_pd

            # affine-scaling probe fixes the centering parameter
            dz_a, dxs_a, dss_a = newton(0.0, None)
            ap_a, ad_a = step_limits(dxs_a, dss_a)
            ap_a, ad_a = min(1.0, ap_a), min(1.0, ad_a)
            g_ps, g_sd, g_pd = gap_terms(dxs_a, dss_a)
            gap_aff = gap + ap_a * g_ps + ad_a * g_sd + ap_a * ad_a * g_pd
            mu_aff = max(float(gap_aff), 0.0) / ws.nu
            # sigma < 1 keeps the equal-step merit derivative negative
            sigma = min(0.99, max((mu_aff / mu) ** 3, 0.0)) if mu > 0 else 0.0

            corr = None
            if opts.use_corrector:
                corr = []
                for bi in range(len(ws.dims)):
                    t = dxs_a[bi] @ dss_a[bi] @ sinvs[bi]
                    corr.append(0.5 * (t + t.T))

            dz, dxs, dss = newton(sigma * mu, corr)

            # all merit ingredients are linear in the step, so the search
            # evaluates a quadratic plus two norms instead of fresh residuals
            ap0, ad0 = step_limits(dxs, dss)
            g_ps, g_sd, g_pd = gap_terms(dxs, dss)
            lin_step = np.zeros(k)
            for flat, dx in zip(ws.fc_flat, dxs):
                lin_step += flat @ dx.ravel()
            emats = [
                (dz @ flat).reshape(ws.dims[bi], ws.dims[bi]) - dss[bi]
                for bi, flat in enumerate(ws.fc_flat)
            ]

            ftb = opts.fraction_to_boundary
            accepted = False
            for halving in range(25):
                scale = 0.5**halving
                ap = min(1.0, ftb * scale * ap0)
                ad = min(1.0, ftb * scale * ad0)
                if halving > 0:
                    # unequal steps can raise the gap; equal steps descend
                    ap = ad = min(ap, ad)
                merit_new = (
                    gap + ap * g_ps + ad * g_sd + ap * ad * g_pd
                    + float(np.linalg.norm(r_lin - ap * lin_step))
                    + sum(float(np.linalg.norm(r + ad * e)) for r, e in zip(r_mats, emats))
                )
                if merit_new < history[-1]:
                    accepted = True
                    break
        except np.linalg.LinAlgError as exc:
            status = SolveStatus.NUMERICAL_FAILURE
            message = f"factorization breakdown: {exc}"
            break

        if not accepted:
            # no decreasing step along this direction; numerical floor
            if rel_gap <= 10 * opts.gap_tol and lin_ok and mat_ok:
                status = SolveStatus.OPTIMAL
                message = "stopped at numerical floor near tolerance"
            else:
                status = SolveStatus.NUMERICAL_FAILURE
                message = "no merit decrease available"
            break
        xs = [x + ap * dx for x, dx in zip(xs, dxs)]
        ss = [s + ad * ds for s, ds in zip(ss, dss)]
        z = z + ad * dz
        history.append(merit_new)

    tau = np.array([z[i] for i in problem.tau_indices], dtype=np.float64)
    return SdpSolution(
        z_star=z,
        objective_value=float(ws.c @ z),
        tau=tau,
        status=status,
        duality_gap=float(rel_gap),
        iterations=iterations,
        merit_history=tuple(history),
        message=message,
    )
