"""Minimax-regret estimator formulations.

The regret of using an estimate x on perturbed data is the excess squared
residual over the best least-squares fit to that perturbed data.  Replacing
the (nonconvex) optimal-cost term by its first-order expansion around the
nominal data gives an approximated regret that is quadratic in the
perturbations, and minimizing its worst case over norm balls is equivalent
to a small SDP.  This module computes the expansion coefficients
(``taylor_*``), assembles the corresponding LMIs (``assemble_lmi``) and
solves them (``solve_regret_*``).

Variants
--------
``full``         matrix and vector uncertainty, bounds (delta_h, delta_y)
``matrix-only``  only the data matrix is uncertain
``vector-only``  only the data vector is uncertain
``regularized``  full uncertainty plus an mu*||x||^2 penalty term
``structured``   perturbations confined to given basis expansions with
                 coefficient vectors alpha, beta bounded in Euclidean norm

Coefficient storage convention: the expansion of the optimal cost reads

    f(H + dH, y + dy)  ~=  kappa + 2 Re(d^H col_stack(dH)) + 2 Re(b^H dy)

and for the structured variant, with dH = sum_i alpha_i H_i and
dy = sum_i beta_i y_i,

    f  ~=  kappa + 2 Re(d^H alpha) + 2 Re(b^H beta).

Matrix perturbations enter the LMIs through their column-stacked vector, so
the matrix uncertainty set is the Frobenius-norm ball of radius delta_h.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linalg import (
    col_stack,
    complex_matrix,
    complex_vector,
    kron,
    matrix_from_json,
    matrix_to_json,
    pseudo_inverse,
    projection_perp,
    svd,
    vector_from_json,
)
from .sdp import LmiBlock, LmiSystem, SdpSolution, SolverOptions, SolveStatus, solve

VARIANT_FULL = "full"
VARIANT_MATRIX_ONLY = "matrix-only"
VARIANT_VECTOR_ONLY = "vector-only"
VARIANT_REGULARIZED = "regularized"
VARIANT_STRUCTURED = "structured"

_UNSTRUCTURED_VARIANTS = (VARIANT_FULL, VARIANT_MATRIX_ONLY, VARIANT_VECTOR_ONLY)
ALL_VARIANTS = _UNSTRUCTURED_VARIANTS + (VARIANT_REGULARIZED, VARIANT_STRUCTURED)

# full-column-rank requirement: sigma_n > RANK_RTOL * sigma_1
RANK_RTOL = 1e-8


class RankDeficiencyError(ValueError):
    """Data matrix fails the full-column-rank precondition."""


class SolverContractError(RuntimeError):
    """The SDP reported a status that violates the formulation contract."""

    def __init__(self, message: str, report: SdpSolution):
        super().__init__(message)
        self.report = report


def _check_full_rank(h: np.ndarray, what: str = "H") -> None:
    s = svd(h).singular_values
    if s.size == 0 or s[-1] <= RANK_RTOL * s[0]:
        smin = float(s[-1]) if s.size else 0.0
        smax = float(s[0]) if s.size else 0.0
        raise RankDeficiencyError(
            f"{what} must have full column rank: sigma_min={smin:.3e} "
            f"<= {RANK_RTOL:g} * sigma_max={smax:.3e}"
        )


@dataclass(frozen=True)
class StructureSpec:
    """Perturbation bases: dH = sum alpha_i * h_basis[i], dy = sum beta_i * y_basis[i]."""

    h_basis: tuple[np.ndarray, ...]
    y_basis: tuple[np.ndarray, ...]
    delta_alpha: float
    delta_beta: float

    def __post_init__(self):
        if not self.h_basis or not self.y_basis:
            raise ValueError("structure bases must be nonempty")
        if len(self.h_basis) != len(self.y_basis):
            raise ValueError("h_basis and y_basis must have the same length")
        hb = tuple(complex_matrix(b) for b in self.h_basis)
        shape = hb[0].shape
        if any(b.shape != shape for b in hb):
            raise ValueError("all h_basis matrices must share one shape")
        yb = tuple(complex_vector(v, length=shape[0]) for v in self.y_basis)
        object.__setattr__(self, "h_basis", hb)
        object.__setattr__(self, "y_basis", yb)
        if self.delta_alpha < 0 or self.delta_beta < 0:
            raise ValueError("structured bounds must be nonnegative")

    @property
    def p(self) -> int:
        return len(self.h_basis)


@dataclass(frozen=True)
class ProblemSpec:
    """One estimation instance: nominal data, uncertainty bounds, options.

    ``h`` is m x n with m >= n and full column rank; ``y`` has length m.
    ``delta_h`` bounds the matrix perturbation (Frobenius norm as used by
    the formulations), ``delta_y`` the vector perturbation (Euclidean).
    ``mu`` > 0 selects the regularized variant; ``structure`` the
    structured one.
    """

    h: np.ndarray
    y: np.ndarray
    delta_h: float = 0.0
    delta_y: float = 0.0
    mu: float = 0.0
    structure: StructureSpec | None = None

    def __post_init__(self):
        h = complex_matrix(self.h)
        m, n = h.shape
        if m < n:
            raise ValueError(f"require m >= n, got shape {h.shape}")
        _check_full_rank(h)
        y = complex_vector(self.y, length=m)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "y", y)
        if self.delta_h < 0 or self.delta_y < 0 or self.mu < 0:
            raise ValueError("bounds and mu must be nonnegative")
        if self.structure is not None and self.structure.h_basis[0].shape != (m, n):
            raise ValueError("structure basis shape does not match H")

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def n(self) -> int:
        return self.h.shape[1]

    def to_json(self) -> dict:
        obj = {
            "h": matrix_to_json(self.h),
            "y": matrix_to_json(self.y),
            "delta_h": float(self.delta_h),
            "delta_y": float(self.delta_y),
            "mu": float(self.mu),
        }
        if self.structure is not None:
            obj["structure"] = {
                "h_basis": [matrix_to_json(b) for b in self.structure.h_basis],
                "y_basis": [matrix_to_json(v) for v in self.structure.y_basis],
                "delta_alpha": float(self.structure.delta_alpha),
                "delta_beta": float(self.structure.delta_beta),
            }
        return obj

    @staticmethod
    def from_json(obj: dict) -> "ProblemSpec":
        structure = None
        if obj.get("structure") is not None:
            s = obj["structure"]
            structure = StructureSpec(
                h_basis=tuple(matrix_from_json(b) for b in s["h_basis"]),
                y_basis=tuple(vector_from_json(v) for v in s["y_basis"]),
                delta_alpha=float(s["delta_alpha"]),
                delta_beta=float(s["delta_beta"]),
            )
        return ProblemSpec(
            h=matrix_from_json(obj["h"]),
            y=vector_from_json(obj["y"]),
            delta_h=float(obj.get("delta_h", 0.0)),
            delta_y=float(obj.get("delta_y", 0.0)),
            mu=float(obj.get("mu", 0.0)),
            structure=structure,
        )


@dataclass(frozen=True)
class TaylorCoefficients:
    """First-order expansion of the optimal cost around the nominal data.

    ``d`` has length m*n for the unstructured and regularized variants
    (column-stacked matrix gradient) and length p for the structured one;
    ``b`` has length m, or p when structured.
    """

    kappa: float
    d: np.ndarray
    b: np.ndarray
    variant: str
    mu: float = 0.0

    def __post_init__(self):
        if self.variant not in ("unstructured", "regularized", "structured"):
            raise ValueError(f"unknown coefficient variant {self.variant!r}")
        object.__setattr__(self, "d", complex_vector(self.d))
        object.__setattr__(self, "b", complex_vector(self.b))
        object.__setattr__(self, "kappa", float(max(self.kappa, 0.0)))


def taylor_unstructured(h, y) -> TaylorCoefficients:
    """Expansion coefficients of min_w ||y - H w||^2 in (dH, dy).

    kappa is the optimal cost itself, b the gradient in dy, and d the
    column-stacked gradient in dH.
    """
    h = complex_matrix(h)
    y = complex_vector(y, length=h.shape[0])
    if h.shape[0] < h.shape[1]:
        raise ValueError("require m >= n")
    _check_full_rank(h)
    p = projection_perp(h)
    w = pseudo_inverse(h) @ y
    b = p @ y
    kappa = float(np.real(y.conj() @ b))
    dmat = -np.outer(b, w.conj())
    return TaylorCoefficients(kappa=kappa, d=col_stack(dmat), b=b, variant="unstructured")


def taylor_regularized(h, y, mu: float) -> TaylorCoefficients:
    """Expansion coefficients of min_w ||y - H w||^2 + mu ||w||^2.

    Writing P = I + (1/mu) H H^H, the optimal cost is kappa = y^H P^{-1} y,
    its dy-gradient is b = P^{-1} y and the dH-gradient is
    D = -(1/mu) P^{-1} y y^H P^{-1} H, column-stacked into d.  mu = 0 falls
    back to the unregularized coefficients.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if mu == 0:
        return taylor_unstructured(h, y)
    h = complex_matrix(h)
    m = h.shape[0]
    y = complex_vector(y, length=m)
    pmat = np.eye(m, dtype=np.complex128) + (h @ h.conj().T) / mu
    b = np.linalg.solve(pmat, y)
    kappa = float(np.real(y.conj() @ b))
    dmat = -(1.0 / mu) * np.outer(b, b.conj()) @ h
    return TaylorCoefficients(
        kappa=kappa, d=col_stack(dmat), b=b, variant="regularized", mu=mu
    )


def taylor_structured(h, y, h_basis, y_basis) -> TaylorCoefficients:
    """Expansion coefficients in the basis weights (alpha, beta).

    With P the residual-space projector and w the least-squares solution,
    d[i] = -(H_i w)^H P y and b[i] = y_i^H P y, so that the optimal cost
    expands as kappa + 2 Re(d^H alpha) + 2 Re(b^H beta).
    """
    h = complex_matrix(h)
    y = complex_vector(y, length=h.shape[0])
    if not len(h_basis) or not len(y_basis):
        raise ValueError("structure bases must be nonempty")
    _check_full_rank(h)
    p = projection_perp(h)
    w = pseudo_inverse(h) @ y
    py = p @ y
    d = np.array([-(complex_matrix(hb) @ w).conj() @ py for hb in h_basis])
    b = np.array([complex_vector(v).conj() @ py for v in y_basis])
    kappa = float(np.real(y.conj() @ py))
    return TaylorCoefficients(kappa=kappa, d=d, b=b, variant="structured")


def default_variant(spec: ProblemSpec) -> str:
    """Variant implied by the problem data when none is requested."""
    if spec.structure is not None:
        return VARIANT_STRUCTURED
    if spec.mu > 0:
        return VARIANT_REGULARIZED
    if spec.delta_h > 0 and spec.delta_y > 0:
        return VARIANT_FULL
    if spec.delta_h > 0:
        return VARIANT_MATRIX_ONLY
    return VARIANT_VECTOR_ONLY


def coefficients_for(spec: ProblemSpec, variant: str) -> TaylorCoefficients:
    """Taylor coefficients matching an LMI variant."""
    if variant == VARIANT_REGULARIZED:
        return taylor_regularized(spec.h, spec.y, spec.mu)
    if variant == VARIANT_STRUCTURED:
        if spec.structure is None:
            raise ValueError("structured variant requires spec.structure")
        return taylor_structured(
            spec.h, spec.y, spec.structure.h_basis, spec.structure.y_basis
        )
    return taylor_unstructured(spec.h, spec.y)


def zero_coefficients(spec: ProblemSpec, variant: str) -> TaylorCoefficients:
    """All-zero coefficients; turns the regret LMIs into worst-case-residual LMIs."""
    m, n = spec.m, spec.n
    if variant == VARIANT_STRUCTURED:
        p = spec.structure.p
        return TaylorCoefficients(0.0, np.zeros(p, complex), np.zeros(p, complex), "structured")
    cvar = "regularized" if variant == VARIANT_REGULARIZED else "unstructured"
    return TaylorCoefficients(
        0.0, np.zeros(m * n, complex), np.zeros(m, complex), cvar, mu=spec.mu
    )


def _x_operator(x: np.ndarray, m: int) -> np.ndarray:
    """The m x mn map with (x^T kron I) col_stack(dH) = dH @ x."""
    return kron(x.reshape(1, -1), np.eye(m))


def _build_block(spec, variant, coeffs, gamma, tau1, tau2, x) -> np.ndarray:
    """Numeric value of the variant's main LMI block; affine in (gamma, taus, x)."""
    h, y = spec.h, spec.y
    m, n = h.shape
    r = y - h @ x
    b, d = coeffs.b, coeffs.d
    if variant == VARIANT_VECTOR_ONLY:
        dy = spec.delta_y
        dim = 1 + 2 * m
        blk = np.zeros((dim, dim), dtype=np.complex128)
        s1, s2 = slice(1, 1 + m), slice(1 + m, 1 + 2 * m)
        blk[0, 0] = gamma + coeffs.kappa - tau1
        blk[0, s1], blk[s1, 0] = r.conj(), r
        blk[0, s2], blk[s2, 0] = dy * b.conj(), dy * b
        blk[s1, s1] = np.eye(m)
        blk[s1, s2] = dy * np.eye(m)
        blk[s2, s1] = dy * np.eye(m)
        blk[s2, s2] = tau1 * np.eye(m)
        return blk
    if variant == VARIANT_MATRIX_ONLY:
        dh = spec.delta_h
        xop = _x_operator(x, m)
        dim = 1 + m + m * n
        blk = np.zeros((dim, dim), dtype=np.complex128)
        s1, s2 = slice(1, 1 + m), slice(1 + m, dim)
        blk[0, 0] = gamma + coeffs.kappa - tau1
        blk[0, s1], blk[s1, 0] = r.conj(), r
        blk[0, s2], blk[s2, 0] = dh * d.conj(), dh * d
        blk[s1, s1] = np.eye(m)
        blk[s1, s2] = -dh * xop
        blk[s2, s1] = -dh * xop.conj().T
        blk[s2, s2] = tau1 * np.eye(m * n)
        return blk
    if variant == VARIANT_FULL:
        dh, dy = spec.delta_h, spec.delta_y
        xop = _x_operator(x, m)
        dim = 1 + m + m + m * n
        blk = np.zeros((dim, dim), dtype=np.complex128)
        s1 = slice(1, 1 + m)
        s2 = slice(1 + m, 1 + 2 * m)
        s3 = slice(1 + 2 * m, dim)
        blk[0, 0] = gamma + coeffs.kappa - tau1 - tau2
        blk[0, s1], blk[s1, 0] = r.conj(), r
        blk[0, s2], blk[s2, 0] = dy * b.conj(), dy * b
        blk[0, s3], blk[s3, 0] = dh * d.conj(), dh * d
        blk[s1, s1] = np.eye(m)
        blk[s1, s2] = dy * np.eye(m)
        blk[s2, s1] = dy * np.eye(m)
        blk[s1, s3] = -dh * xop
        blk[s3, s1] = -dh * xop.conj().T
        blk[s2, s2] = tau1 * np.eye(m)
        blk[s3, s3] = tau2 * np.eye(m * n)
        return blk
    if variant == VARIANT_REGULARIZED:
        dh, dy, mu = spec.delta_h, spec.delta_y, spec.mu
        xop = _x_operator(x, m)
        dim = 1 + m + n + m + m * n
        blk = np.zeros((dim, dim), dtype=np.complex128)
        s1 = slice(1, 1 + m)
        sx = slice(1 + m, 1 + m + n)
        s2 = slice(1 + m + n, 1 + 2 * m + n)
        s3 = slice(1 + 2 * m + n, dim)
        blk[0, 0] = gamma + coeffs.kappa - tau1 - tau2
        blk[0, s1], blk[s1, 0] = r.conj(), r
        blk[0, sx], blk[sx, 0] = mu * x.conj(), mu * x
        blk[0, s2], blk[s2, 0] = dy * b.conj(), dy * b
        blk[0, s3], blk[s3, 0] = dh * d.conj(), dh * d
        blk[s1, s1] = np.eye(m)
        blk[sx, sx] = mu * np.eye(n)
        blk[s1, s2] = dy * np.eye(m)
        blk[s2, s1] = dy * np.eye(m)
        blk[s1, s3] = -dh * xop
        blk[s3, s1] = -dh * xop.conj().T
        blk[s2, s2] = tau1 * np.eye(m)
        blk[s3, s3] = tau2 * np.eye(m * n)
        return blk
    if variant == VARIANT_STRUCTURED:
        st = spec.structure
        da, db_ = st.delta_alpha, st.delta_beta
        p = st.p
        g = np.column_stack([hb @ x for hb in st.h_basis])
        q = np.column_stack(list(st.y_basis))
        dim = 1 + m + 2 * p
        blk = np.zeros((dim, dim), dtype=np.complex128)
        s1 = slice(1, 1 + m)
        s2 = slice(1 + m, 1 + m + p)
        s3 = slice(1 + m + p, dim)
        blk[0, 0] = gamma + coeffs.kappa - tau1 - tau2
        blk[0, s1], blk[s1, 0] = r.conj(), r
        blk[0, s2], blk[s2, 0] = da * d.conj(), da * d
        blk[0, s3], blk[s3, 0] = db_ * b.conj(), db_ * b
        blk[s1, s1] = np.eye(m)
        blk[s1, s2] = -da * g
        blk[s2, s1] = -da * g.conj().T
        blk[s1, s3] = db_ * q
        blk[s3, s1] = db_ * q.conj().T
        blk[s2, s2] = tau1 * np.eye(p)
        blk[s3, s3] = tau2 * np.eye(p)
        return blk
    raise ValueError(f"unknown variant {variant!r}")


def variable_layout(variant: str, n: int, x_fixed: bool) -> dict:
    """Positions of gamma, the multipliers, and Re/Im x in the decision vector."""
    num_taus = 1 if variant in (VARIANT_MATRIX_ONLY, VARIANT_VECTOR_ONLY) else 2
    layout = {"gamma": 0, "taus": tuple(range(1, 1 + num_taus))}
    if x_fixed:
        layout["num_vars"] = 1 + num_taus
    else:
        base = 1 + num_taus
        layout["re"] = slice(base, base + n)
        layout["im"] = slice(base + n, base + 2 * n)
        layout["num_vars"] = base + 2 * n
    return layout


def _big_gamma_start(f0: np.ndarray, coeffs: tuple, layout: dict) -> np.ndarray:
    """Strictly feasible start: multipliers inflated, then gamma via a Schur bound.

    gamma enters only the (0, 0) entry of the main block, so once the
    trailing principal submatrix is PD a large enough gamma makes the whole
    block PD.
    """
    k = layout["num_vars"]
    gi = layout["gamma"]
    taus = layout["taus"]

    def value_at(z):
        v = f0.copy()
        for zi, fm in zip(z, coeffs):
            if zi:
                v = v + zi * fm
        return v

    t = 1.0
    for _ in range(60):
        z = np.zeros(k)
        for ti in taus:
            z[ti] = t
        blk = value_at(z)
        sub = blk[1:, 1:]
        lam = float(np.linalg.eigvalsh(sub)[0]) if sub.size else 1.0
        if lam > 1e-8 * (1.0 + np.linalg.norm(sub)):
            border = blk[1:, 0]
            s = float(np.real(border.conj() @ np.linalg.solve(sub, border)))
            z[gi] = s - float(np.real(blk[0, 0])) + 1.0 + 0.1 * abs(s)
            full = value_at(z)
            if float(np.linalg.eigvalsh(full)[0]) > 0:
                return z
        t *= 2.0
    raise RuntimeError("failed to construct a strictly feasible starting point")


def assemble_lmi(
    spec: ProblemSpec,
    variant: str | None = None,
    coeffs: TaylorCoefficients | None = None,
    fix_x: np.ndarray | None = None,
) -> LmiSystem:
    """Build the variant's LMI system over (gamma, multipliers, Re x, Im x).

    The objective is gamma alone.  When ``fix_x`` is given, x is substituted
    into the block and only (gamma, multipliers) remain as variables, which
    turns the system into a worst-case certificate problem for that point.
    Multiplier nonnegativity is carried as extra 1x1 blocks.
    """
    if variant is None:
        variant = default_variant(spec)
    if variant not in ALL_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == VARIANT_STRUCTURED and spec.structure is None:
        raise ValueError("structured variant requires spec.structure")
    if variant == VARIANT_REGULARIZED and spec.mu <= 0:
        raise ValueError("regularized variant requires mu > 0")
    if coeffs is None:
        coeffs = coefficients_for(spec, variant)
    expected = "structured" if variant == VARIANT_STRUCTURED else (
        "regularized" if variant == VARIANT_REGULARIZED else "unstructured"
    )
    if coeffs.variant != expected:
        raise ValueError(
            f"coefficient variant {coeffs.variant!r} does not match LMI variant {variant!r}"
        )

    n = spec.n
    fixed = fix_x is not None
    x0 = complex_vector(fix_x, length=n) if fixed else np.zeros(n, dtype=np.complex128)
    layout = variable_layout(variant, n, fixed)
    k = layout["num_vars"]
    num_taus = len(layout["taus"])

    def block_at(z: np.ndarray) -> np.ndarray:
        gamma = z[0]
        tau1 = z[1]
        tau2 = z[2] if num_taus == 2 else 0.0
        if fixed:
            x = x0
        else:
            x = z[layout["re"]] + 1j * z[layout["im"]]
        blk = _build_block(spec, variant, coeffs, gamma, tau1, tau2, x)
        return 0.5 * (blk + blk.conj().T)

    f0 = block_at(np.zeros(k))
    main_coeffs = []
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        main_coeffs.append(block_at(e) - f0)

    blocks = [LmiBlock(f0=f0, coeffs=tuple(main_coeffs))]
    for ti in layout["taus"]:
        cs = [np.zeros((1, 1), dtype=np.complex128) for _ in range(k)]
        cs[ti] = np.ones((1, 1), dtype=np.complex128)
        blocks.append(LmiBlock(f0=np.zeros((1, 1), dtype=np.complex128), coeffs=tuple(cs)))

    c = np.zeros(k)
    c[layout["gamma"]] = 1.0
    names = ["gamma"] + [f"tau{i + 1}" for i in range(num_taus)]
    if not fixed:
        names += [f"re_x{j}" for j in range(n)] + [f"im_x{j}" for j in range(n)]

    system = LmiSystem(
        num_vars=k,
        objective=c,
        blocks=tuple(blocks),
        tau_indices=layout["taus"],
        variable_names=tuple(names),
    )
    z0 = _big_gamma_start(f0, tuple(main_coeffs), layout)
    return dataclasses.replace(system, initial_point=z0)


@dataclass(frozen=True)
class RegretEstimate:
    """Estimator output: point, its minimax approximated regret, diagnostics."""

    x_hat: np.ndarray
    gamma_star: float
    tau: np.ndarray
    report: SdpSolution
    variant: str


def _polish_x(
    spec: ProblemSpec,
    variant: str,
    coeffs: TaylorCoefficients,
    tau: np.ndarray,
    x0: np.ndarray,
    gamma0: float,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Newton crossover from the interior-point iterate to the true optimum.

    Whenever the trailing principal block D of the main LMI is positive
    definite, feasibility is equivalent to gamma >= b^H D^-1 b - m00, a
    smooth convex function of (Re x, Im x, multipliers) because the block is
    affine in all of them.  The interior-point solve only locates the
    minimizer to about the square root of the duality gap, so a few damped
    Newton steps on this Schur value sharpen both the point and the
    certificate by several digits at negligible cost.  Multipliers pinned at
    the tau >= 0 boundary (their Schur gradient is +1 there) stay frozen;
    any numerical failure falls back to the raw iterate.
    """
    n = spec.n
    num_taus = len(tau)
    nx = 2 * n
    k = nx + num_taus

    def block(z: np.ndarray) -> np.ndarray:
        x = z[:n] + 1j * z[n:nx]
        tau1 = z[nx]
        tau2 = z[nx + 1] if num_taus == 2 else 0.0
        blk = _build_block(spec, variant, coeffs, 0.0, tau1, tau2, x)
        return 0.5 * (blk + blk.conj().T)

    m_full = block(np.zeros(k))
    b_full = []
    t_full = []
    c_full = []
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        diff = block(e) - m_full
        b_full.append(diff[1:, 0])
        t_full.append(diff[1:, 1:])
        c_full.append(float(np.real(diff[0, 0])))

    # a zero uncertainty bound leaves its S-procedure section structurally
    # decoupled (zero border and coupling); fix that multiplier at exactly
    # zero and drop the dead rows, which would otherwise bias the optimal
    # value by +tau and wreck the conditioning of the trailing block
    dim = m_full.shape[0] - 1
    keep = np.ones(dim, dtype=bool)
    tau_fixed = np.zeros(num_taus, dtype=bool)
    for j in range(num_taus):
        ti = nx + j
        rows = np.where(np.real(np.diag(t_full[ti])) > 0.5)[0]
        if rows.size == 0:
            continue
        others = np.setdiff1d(np.arange(dim), rows)
        dead = not np.any(m_full[1 + rows, 0]) and not np.any(
            m_full[np.ix_(1 + rows, 1 + others)]
        )
        if dead:
            for i in range(k):
                if i == ti:
                    continue
                if np.any(b_full[i][rows]) or np.any(
                    t_full[i][np.ix_(rows, others)]
                ):
                    dead = False
                    break
        if dead:
            keep[rows] = False
            tau_fixed[j] = True

    live_taus = [j for j in range(num_taus) if not tau_fixed[j]]
    vars_idx = list(range(nx)) + [nx + j for j in live_taus]
    num_live = len(live_taus)
    kk = nx + num_live
    sel = np.concatenate([[True], keep])
    m_const = m_full[np.ix_(sel, sel)]
    d_border = [b_full[i][keep] for i in vars_idx]
    d_trail = [t_full[i][np.ix_(keep, keep)] for i in vars_idx]
    d_corner = [c_full[i] for i in vars_idx]

    def evaluate(z: np.ndarray):
        border = m_const[1:, 0].copy()
        trail = m_const[1:, 1:].copy()
        c0 = float(np.real(m_const[0, 0]))
        for zi, db, dd, dc in zip(z, d_border, d_trail, d_corner):
            if zi:
                border += zi * db
                trail += zi * dd
                c0 += zi * dc
        try:
            factor = scipy.linalg.cho_factor(trail, check_finite=False)
        except (scipy.linalg.LinAlgError, ValueError):
            return None
        s = scipy.linalg.cho_solve(factor, border, check_finite=False)
        val = float(np.real(border.conj() @ s)) - c0
        return val, s, factor

    def tau_out(z: np.ndarray) -> np.ndarray:
        out = np.zeros(num_taus)
        for pos, j in enumerate(live_taus):
            out[j] = z[nx + pos]
        return out

    z = np.concatenate(
        [x0.real, x0.imag, np.asarray(tau, dtype=float)[live_taus]]
    )
    state = evaluate(z)
    if state is None:
        return x0, gamma0, np.asarray(tau, dtype=float)
    val, s, factor = state
    for _ in range(40):
        grad = np.empty(kk)
        u = np.empty((m_const.shape[0] - 1, kk), dtype=np.complex128)
        for i in range(kk):
            ds = d_trail[i] @ s
            grad[i] = (
                2.0 * float(np.real(d_border[i].conj() @ s))
                - float(np.real(s.conj() @ ds))
                - d_corner[i]
            )
            u[:, i] = d_border[i] - ds
        # active-set pass: multipliers whose Newton step crosses zero while
        # their gradient pushes down belong on the tau = 0 boundary
        free = np.ones(kk, dtype=bool)
        step = np.zeros(kk)
        failed = False
        for _pass in range(num_live + 1):
            g_free = grad[free]
            if g_free.size == 0 or float(np.linalg.norm(g_free)) <= 1e-12 * max(
                1.0, abs(val)
            ):
                step[:] = 0.0
                break
            uf = u[:, free]
            w = scipy.linalg.cho_solve(factor, uf, check_finite=False)
            hess = 2.0 * np.real(uf.conj().T @ w)
            kf = hess.shape[0]
            ridge = 1e-12 * max(1.0, float(np.trace(hess)) / kf)
            try:
                step_free = np.linalg.solve(hess + ridge * np.eye(kf), -g_free)
            except np.linalg.LinAlgError:
                failed = True
                break
            step[:] = 0.0
            step[free] = step_free
            violators = [
                j
                for j in range(num_live)
                if free[nx + j]
                and z[nx + j] + step[nx + j] <= 0.0
                and grad[nx + j] > 0.0
            ]
            if not violators:
                break
            for j in violators:
                free[nx + j] = False
        if failed:
            break
        # frozen boundary multipliers still inflate the value by their current
        # magnitude, so drift them toward zero alongside the Newton move
        for j in range(num_live):
            if not free[nx + j] and grad[nx + j] > 0.0:
                step[nx + j] = -z[nx + j]
        if float(np.max(np.abs(step) / (1.0 + np.abs(z)))) <= 1e-16:
            break
        t = 1.0
        for j in range(num_live):
            if step[nx + j] < 0.0 and z[nx + j] > 0.0:
                t = min(t, -0.99 * z[nx + j] / step[nx + j])
        improved = False
        for _ in range(30):
            trial = evaluate(z + t * step)
            if trial is not None and trial[0] < val - 1e-15 * max(1.0, abs(val)):
                z = z + t * step
                val, s, factor = trial
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return z[:n] + 1j * z[n:nx], val, tau_out(z)


def _solve_variant(
    spec: ProblemSpec,
    variant: str,
    opts: SolverOptions | None,
    fix_x: np.ndarray | None = None,
    coeffs: TaylorCoefficients | None = None,
) -> RegretEstimate:
    if coeffs is None:
        coeffs = coefficients_for(spec, variant)
    system = assemble_lmi(spec, variant, coeffs=coeffs, fix_x=fix_x)
    report = solve(system, opts)
    if report.status == SolveStatus.INFEASIBLE:
        raise SolverContractError(
            f"LMI for variant {variant!r} reported infeasible, which violates "
            f"the formulation contract (iterations={report.iterations})",
            report,
        )
    layout = variable_layout(variant, spec.n, fix_x is not None)
    if fix_x is not None:
        x_hat = complex_vector(fix_x, length=spec.n)
        gamma_star = float(report.objective_value)
        tau_star = report.tau.copy()
    else:
        x_raw = report.z_star[layout["re"]] + 1j * report.z_star[layout["im"]]
        x_hat, gamma_star, tau_star = _polish_x(
            spec, variant, coeffs, report.tau, x_raw, float(report.objective_value)
        )
    return RegretEstimate(
        x_hat=x_hat,
        gamma_star=gamma_star,
        tau=tau_star,
        report=report,
        variant=variant,
    )


def solve_regret_ls(
    spec: ProblemSpec,
    variant: str | None = None,
    opts: SolverOptions | None = None,
) -> RegretEstimate:
    """Minimax-regret estimator for unregularized, unstructured uncertainty.

    Dispatches to the single-uncertainty variants when one bound is zero.
    """
    if variant is None:
        if spec.delta_h > 0 and spec.delta_y > 0:
            variant = VARIANT_FULL
        elif spec.delta_h > 0:
            variant = VARIANT_MATRIX_ONLY
        else:
            variant = VARIANT_VECTOR_ONLY
    if variant not in _UNSTRUCTURED_VARIANTS:
        raise ValueError(f"variant {variant!r} is not an unstructured variant")
    return _solve_variant(spec, variant, opts)


def solve_regret_reg_ls(spec: ProblemSpec, opts: SolverOptions | None = None) -> RegretEstimate:
    """Minimax-regret estimator with an mu*||x||^2 penalty; mu = 0 falls back."""
    if spec.mu == 0:
        return solve_regret_ls(spec, opts=opts)
    return _solve_variant(spec, VARIANT_REGULARIZED, opts)


def solve_regret_structured(spec: ProblemSpec, opts: SolverOptions | None = None) -> RegretEstimate:
    """Minimax-regret estimator for basis-structured perturbations."""
    if spec.structure is None:
        raise ValueError("spec.structure is required")
    return _solve_variant(spec, VARIANT_STRUCTURED, opts)


def worst_case_regret(
    x,
    spec: ProblemSpec,
    variant: str | None = None,
    opts: SolverOptions | None = None,
    coeffs: TaylorCoefficients | None = None,
) -> RegretEstimate:
    """Worst-case approximated regret of an arbitrary point x.

    Solves the variant's LMI with x fixed, so only gamma and the
    multipliers are decision variables; the optimum is the exact maximum of
    the approximated regret over the uncertainty set at that point.
    Passing all-zero ``coeffs`` turns this into the worst-case squared
    residual of x instead.
    """
    if variant is None:
        variant = default_variant(spec)
    return _solve_variant(spec, variant, opts, fix_x=np.asarray(x), coeffs=coeffs)
