"""Classical comparison estimators.

All of them take nominal data (H, y) and return a point estimate:

* ``solve_ls``             pseudo-inverse least squares
* ``solve_tls``            total least squares via the SVD of [H y]
* ``solve_robust_ls``      minimizes the worst-case residual over norm balls
* ``solve_reg_ls``         ridge solution
* ``solve_robust_reg_ls``  worst-case residual plus ridge penalty
* ``solve_structured_robust_ls``  worst-case residual over structured
  perturbations, solved as an SDP with the shared LMI machinery

The worst-case residual over ||dH|| <= delta_h, ||dy|| <= delta_y satisfies

    max ||(y + dy) - (H + dH) x|| = ||y - H x|| + delta_h ||x|| + delta_y

(the maximizing dH is rank one, so the identity holds for both the spectral
and the Frobenius matrix ball).  The robust estimators therefore reduce to
one-dimensional secular equations in the regularization parameter lambda of
x(lambda) = (H^H H + lambda I)^{-1} H^H y, solved on the SVD coordinates.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .formulations import (
    ProblemSpec,
    RegretEstimate,
    VARIANT_STRUCTURED,
    assemble_lmi,
    variable_layout,
    zero_coefficients,
)
from .linalg import complex_matrix, complex_vector, pseudo_inverse, svd
from .sdp import SolverOptions, SolveStatus, solve


class NongenericTlsError(RuntimeError):
    """Total least squares has no generic solution for this data."""


def solve_ls(h, y) -> np.ndarray:
    """Least squares x = pinv(H) y."""
    h = complex_matrix(h)
    y = complex_vector(y, length=h.shape[0])
    return pseudo_inverse(h) @ y


def solve_tls(h, y) -> np.ndarray:
    """Total least squares from the right singular vector of [H y].

    Raises ``NongenericTlsError`` when the smallest singular value of
    [H y] ties the smallest of H, or when the solution direction has a
    vanishing last component.
    """
    h = complex_matrix(h)
    y = complex_vector(y, length=h.shape[0])
    m, n = h.shape
    if m < n:
        raise ValueError("require m >= n")
    aug = np.hstack([h, y.reshape(-1, 1)])
    f = svd(aug)
    s_aug = f.singular_values
    s_h = svd(h).singular_values
    scale = float(s_aug[0]) if s_aug.size else 0.0
    if s_h[-1] - s_aug[-1] <= 1e-12 * max(scale, 1e-300):
        raise NongenericTlsError(
            f"smallest singular value of [H y] ({s_aug[-1]:.6e}) is not strictly "
            f"below sigma_min(H) ({s_h[-1]:.6e})"
        )
    v = f.V[:, -1]
    if abs(v[n]) <= 1e-12:
        raise NongenericTlsError("solution direction has zero last component")
    return -v[:n] / v[n]


def solve_reg_ls(h, y, mu: float) -> np.ndarray:
    """Ridge solution (H^H H + mu I)^{-1} H^H y, mu > 0."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    h = complex_matrix(h)
    y = complex_vector(y, length=h.shape[0])
    n = h.shape[1]
    return np.linalg.solve(h.conj().T @ h + mu * np.eye(n), h.conj().T @ y)


def worst_case_residual_norm(h, y, x, delta_h: float, delta_y: float) -> float:
    """max over the uncertainty balls of ||(y + dy) - (H + dH) x||."""
    h = complex_matrix(h)
    y = complex_vector(y, length=h.shape[0])
    x = complex_vector(x, length=h.shape[1])
    return float(
        np.linalg.norm(y - h @ x) + delta_h * np.linalg.norm(x) + delta_y
    )


class _SvdCoordinates:
    """Scalars of the regularization path x(lambda) on SVD coordinates."""

    def __init__(self, h: np.ndarray, y: np.ndarray):
        f = svd(h)
        n = h.shape[1]
        self.sigma = f.singular_values
        self.v = f.V
        c = f.U.conj().T @ y
        self.c1 = c[:n]
        self.res_perp_sq = max(float(np.linalg.norm(y) ** 2 - np.linalg.norm(self.c1) ** 2), 0.0)
        self.weights = np.abs(self.c1) ** 2

    def x_at(self, lam: float) -> np.ndarray:
        gains = self.sigma / (self.sigma**2 + lam)
        return self.v @ (gains * self.c1)

    def eta(self, lam: float) -> float:
        return float(np.sqrt(np.sum(self.weights * (self.sigma / (self.sigma**2 + lam)) ** 2)))

    def rho(self, lam: float) -> float:
        fit = np.sum(self.weights * (lam / (self.sigma**2 + lam)) ** 2)
        return float(np.sqrt(fit + self.res_perp_sq))


def _solve_secular(coords: _SvdCoordinates, equation, sigma1: float) -> float:
    """Root of a secular function psi with psi(0+) <= 0 on an expanding bracket."""
    lo = 1e-14 * max(sigma1**2, 1e-30)
    while equation(lo) > 0 and lo > 1e-290:
        lo *= 1e-2
    hi = max(sigma1**2, 1.0)
    for _ in range(300):
        if equation(hi) > 0:
            break
        hi *= 2.0
    else:
        raise RuntimeError("secular equation bracket expansion failed")
    if equation(lo) > 0:
        return lo
    return float(brentq(equation, lo, hi, xtol=1e-300, rtol=1e-14, maxiter=300))


def solve_robust_ls(h, y, delta_h: float, delta_y: float) -> np.ndarray:
    """Minimize the worst-case residual (||y - Hx|| + delta_h ||x|| + delta_y)^2.

    delta_y shifts the objective but not the minimizer.  The solution is
    x = 0 when delta_h >= ||H^H y|| / ||y||, and otherwise lies on the
    regularization path at the lambda solving
    lambda * ||x(lambda)|| = delta_h * ||y - H x(lambda)||.
    """
    if delta_h < 0 or delta_y < 0:
        raise ValueError("bounds must be nonnegative")
    h = complex_matrix(h)
    y = complex_vector(y, length=h.shape[0])
    n = h.shape[1]
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0 or delta_h * ynorm >= float(np.linalg.norm(h.conj().T @ y)):
        return np.zeros(n, dtype=np.complex128)
    if delta_h == 0.0:
        return solve_ls(h, y)
    coords = _SvdCoordinates(h, y)
    sigma1 = float(coords.sigma[0])
    rho_ls = coords.rho(0.0)
    if rho_ls <= 1e-13 * ynorm:
        # consistent system: the residual grows like lambda, cancel it out
        def reduced(lam):
            a = float(np.sqrt(np.sum(coords.weights / (coords.sigma**2 + lam) ** 2)))
            return coords.eta(lam) - delta_h * a

        if reduced(0.0) >= 0:
            return coords.x_at(0.0)
        lam = _solve_secular(coords, reduced, sigma1)
        return coords.x_at(lam)

    def secular(lam):
        return lam * coords.eta(lam) - delta_h * coords.rho(lam)

    lam = _solve_secular(coords, secular, sigma1)
    return coords.x_at(lam)


def solve_robust_reg_ls(h, y, delta_h: float, delta_y: float, mu: float) -> np.ndarray:
    """Minimize (||y - Hx|| + delta_h ||x|| + delta_y)^2 + mu ||x||^2.

    Exact worst-case cost of the ridge objective.  Reduces to ``solve_reg_ls``
    when both bounds are zero.  The stationarity condition places the
    minimizer on the regularization path at lambda satisfying
    lambda = delta_h * rho / eta + mu * rho / s with s the worst-case norm.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if delta_h < 0 or delta_y < 0:
        raise ValueError("bounds must be nonnegative")
    h = complex_matrix(h)
    y = complex_vector(y, length=h.shape[0])
    n = h.shape[1]
    if delta_h == 0.0 and delta_y == 0.0:
        return solve_reg_ls(h, y, mu)
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0 or delta_h * ynorm >= float(np.linalg.norm(h.conj().T @ y)):
        return np.zeros(n, dtype=np.complex128)
    coords = _SvdCoordinates(h, y)
    sigma1 = float(coords.sigma[0])
    rho_ls = coords.rho(0.0)
    if rho_ls <= 1e-13 * ynorm:
        def reduced(lam):
            a = float(np.sqrt(np.sum(coords.weights / (coords.sigma**2 + lam) ** 2)))
            eta = coords.eta(lam)
            s = lam * a + delta_h * eta + delta_y
            return eta - delta_h * a - mu * a * eta / max(s, 1e-300)

        if reduced(0.0) >= 0:
            return coords.x_at(0.0)
        lam = _solve_secular(coords, reduced, sigma1)
        return coords.x_at(lam)

    def secular(lam):
        rho, eta = coords.rho(lam), coords.eta(lam)
        s = rho + delta_h * eta + delta_y
        return lam - delta_h * rho / max(eta, 1e-300) - mu * rho / s

    lam = _solve_secular(coords, secular, sigma1)
    return coords.x_at(lam)


def structured_robust_estimate(
    spec: ProblemSpec, opts: SolverOptions | None = None
) -> RegretEstimate:
    """Worst-case-residual SDP over structured perturbations, full output.

    gamma_star is the minimized worst-case squared residual; assembled from
    the structured LMI with the regret expansion terms zeroed out.
    """
    if spec.structure is None:
        raise ValueError("spec.structure is required")
    # reuse the regret machinery with kappa = d = b = 0
    coeffs = zero_coefficients(spec, VARIANT_STRUCTURED)
    system = assemble_lmi(spec, VARIANT_STRUCTURED, coeffs=coeffs)
    report = solve(system, opts)
    if report.status == SolveStatus.INFEASIBLE:
        raise RuntimeError("structured worst-case LMI unexpectedly infeasible")
    layout = variable_layout(VARIANT_STRUCTURED, spec.n, x_fixed=False)
    x_hat = report.z_star[layout["re"]] + 1j * report.z_star[layout["im"]]
    return RegretEstimate(
        x_hat=x_hat,
        gamma_star=float(report.objective_value),
        tau=report.tau.copy(),
        report=report,
        variant=VARIANT_STRUCTURED,
    )


def solve_structured_robust_ls(spec: ProblemSpec, opts: SolverOptions | None = None) -> np.ndarray:
    """Point estimate minimizing the worst-case residual over the structure."""
    return structured_robust_estimate(spec, opts).x_hat
