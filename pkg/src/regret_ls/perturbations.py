"""Perturbation sampling, worst-case extraction, and regret oracles.

``sample_perturbation`` draws feasible random perturbations (Gaussian
direction, uniform radius fraction; deterministic per seed).
``worst_case_perturbation`` turns an optimal LMI certificate into the
boundary perturbation attaining the worst case, via the rank-one
construction from the binding eigenvector of the main LMI block.
``exact_regret`` and ``approx_regret`` evaluate the pre-expansion and the
linearized regret; ``finite_difference_gradients`` is the independent
oracle used to validate every analytic coefficient formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .formulations import (
    ProblemSpec,
    RegretEstimate,
    TaylorCoefficients,
    VARIANT_REGULARIZED,
    VARIANT_STRUCTURED,
    coefficients_for,
    default_variant,
)
from .linalg import (
    col_stack,
    col_unstack,
    complex_matrix,
    complex_vector,
    projection_perp,
    pseudo_inverse,
    spectral_norm,
    svd,
)

MODE_UNSTRUCTURED = "unstructured"
MODE_STRUCTURED = "structured"

_DEGENERATE_TOL = 1e-12


class PerturbedRankError(RuntimeError):
    """Perturbed matrix lost full column rank; caller may resample."""


@dataclass(frozen=True)
class PerturbationSample:
    """One feasible perturbation, either (dh, dy) or basis weights (alpha, beta)."""

    mode: str
    dh: np.ndarray | None = None
    dy: np.ndarray | None = None
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None
    norms: dict = field(default_factory=dict)
    matrix_norm: str | None = None
    fallback: bool = False

    def apply(self, spec: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
        """Perturbed data (H + dH, y + dy) for this sample."""
        h = spec.h.copy()
        y = spec.y.copy()
        if self.mode == MODE_STRUCTURED:
            st = spec.structure
            if st is None:
                raise ValueError("structured sample needs spec.structure")
            for ai, hb in zip(self.alpha, st.h_basis):
                h = h + ai * hb
            for bi, yb in zip(self.beta, st.y_basis):
                y = y + bi * yb
            return h, y
        if self.dh is not None:
            h = h + self.dh
        if self.dy is not None:
            y = y + self.dy
        return h, y


def _scaled_draw(rng: np.random.Generator, shape, bound: float, norm: str):
    """Gaussian direction rescaled to a uniform fraction of the bound."""
    if bound == 0.0:
        return np.zeros(shape, dtype=np.complex128), 0.0
    direction = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    radius = float(rng.uniform(0.0, 1.0)) * bound
    size = spectral_norm(direction) if norm == "spectral" else float(np.linalg.norm(direction))
    if size == 0.0:  # pragma: no cover - probability zero
        return np.zeros(shape, dtype=np.complex128), 0.0
    return direction * (radius / size), radius


def sample_perturbation(
    spec: ProblemSpec,
    seed,
    mode: str | None = None,
    matrix_norm: str = "spectral",
) -> PerturbationSample:
    """Draw one feasible random perturbation for the spec's uncertainty set.

    Unstructured mode rescales a complex Gaussian matrix so its
    ``matrix_norm`` ("spectral" or "frobenius") equals r * delta_h with r
    uniform on [0, 1], and a Gaussian vector likewise in Euclidean norm.
    Structured mode draws the weight vectors (alpha, beta) on scaled
    Euclidean balls.  ``mode`` defaults to structured exactly when the spec
    carries structure.  Identical seeds give identical samples.
    """
    if matrix_norm not in ("spectral", "frobenius"):
        raise ValueError(f"unknown matrix norm {matrix_norm!r}")
    if mode is None:
        mode = MODE_STRUCTURED if spec.structure is not None else MODE_UNSTRUCTURED
    if mode not in (MODE_UNSTRUCTURED, MODE_STRUCTURED):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    if mode == MODE_STRUCTURED:
        if spec.structure is None:
            raise ValueError("structured mode needs spec.structure")
        p = spec.structure.p
        alpha, na = _scaled_draw(rng, p, spec.structure.delta_alpha, "frobenius")
        beta, nb = _scaled_draw(rng, p, spec.structure.delta_beta, "frobenius")
        return PerturbationSample(
            mode=MODE_STRUCTURED,
            alpha=alpha,
            beta=beta,
            norms={"alpha": na, "beta": nb},
        )
    m, n = spec.m, spec.n
    dh, nh = _scaled_draw(rng, (m, n), spec.delta_h, matrix_norm)
    dy, ny = _scaled_draw(rng, m, spec.delta_y, "frobenius")
    return PerturbationSample(
        mode=MODE_UNSTRUCTURED,
        dh=dh,
        dy=dy,
        norms={"dh": nh, "dy": ny},
        matrix_norm=matrix_norm,
    )


def exact_regret(x, sample: PerturbationSample, spec: ProblemSpec, variant: str | None = None) -> float:
    """Excess cost of x over the optimal estimate on the perturbed data.

    Unregularized variants require the perturbed matrix to keep full column
    rank (``PerturbedRankError`` otherwise); the regularized variant is
    always well posed.
    """
    if variant is None:
        variant = (
            VARIANT_STRUCTURED
            if sample.mode == MODE_STRUCTURED
            else (VARIANT_REGULARIZED if spec.mu > 0 else default_variant(spec))
        )
    x = complex_vector(x, length=spec.n)
    ht, yt = sample.apply(spec)
    res = float(np.linalg.norm(yt - ht @ x) ** 2)
    if variant == VARIANT_REGULARIZED:
        mu = spec.mu
        n = spec.n
        w = np.linalg.solve(ht.conj().T @ ht + mu * np.eye(n), ht.conj().T @ yt)
        fopt = float(np.linalg.norm(yt - ht @ w) ** 2 + mu * np.linalg.norm(w) ** 2)
        return res + mu * float(np.linalg.norm(x) ** 2) - fopt
    s = svd(ht).singular_values
    if s[-1] <= 1e-8 * s[0]:
        raise PerturbedRankError(
            f"perturbed matrix is rank deficient (sigma_min={s[-1]:.3e})"
        )
    w = pseudo_inverse(ht) @ yt
    fopt = float(np.linalg.norm(yt - ht @ w) ** 2)
    return res - fopt


def approx_regret(
    x,
    sample: PerturbationSample,
    spec: ProblemSpec,
    coeffs: TaylorCoefficients,
) -> float:
    """Linearized regret: perturbed cost of x minus the expanded optimal cost."""
    x = complex_vector(x, length=spec.n)
    ht, yt = sample.apply(spec)
    res = float(np.linalg.norm(yt - ht @ x) ** 2)
    if coeffs.variant == "regularized":
        res += float(spec.mu * np.linalg.norm(x) ** 2)
    if sample.mode == MODE_STRUCTURED:
        if coeffs.variant != "structured":
            raise ValueError("structured sample requires structured coefficients")
        lin = 2.0 * float(np.real(coeffs.d.conj() @ sample.alpha))
        lin += 2.0 * float(np.real(coeffs.b.conj() @ sample.beta))
    else:
        if coeffs.variant == "structured":
            raise ValueError("unstructured sample requires unstructured coefficients")
        lin = 0.0
        if sample.dh is not None:
            lin += 2.0 * float(np.real(coeffs.d.conj() @ col_stack(sample.dh)))
        if sample.dy is not None:
            lin += 2.0 * float(np.real(coeffs.b.conj() @ sample.dy))
    return res - (coeffs.kappa + lin)


def _rank_one_component(g: np.ndarray, t: complex, bound: float):
    """Boundary vector -bound * g * conj(t) / (||g|| |t|), or None if degenerate."""
    gn = float(np.linalg.norm(g))
    if bound == 0.0:
        return np.zeros_like(g), False
    if gn < _DEGENERATE_TOL or abs(t) < _DEGENERATE_TOL:
        return None, True
    return -bound * g * np.conj(t) / (gn * abs(t)), False


def _structured_operators(x: np.ndarray, spec: ProblemSpec):
    """Residual maps for basis weights: columns H_i x, columns y_i, and y - H x."""
    st = spec.structure
    g = np.column_stack([hb @ x for hb in st.h_basis])
    q = np.column_stack(list(st.y_basis))
    r = spec.y - spec.h @ x
    return g, q, r


def _polish_structured_batch(x, spec: ProblemSpec, coeffs: TaylorCoefficients, a0, b0, max_iters: int = 2000):
    """Columnwise monotone boundary ascent of the linearized regret.

    ``a0``/``b0`` stack K starting points as p x K columns.  The linearized
    regret is convex in (alpha, beta), so jumping to the boundary maximizer
    of its tangent plane never decreases it; each column iterates until its
    own value stalls.  Needed when the binding eigenvalue of the LMI block
    is nearly multiple and no single eigenvector is tight.  Returns the
    final stacks and the per-column values.
    """
    st = spec.structure
    g, q, r = _structured_operators(x, spec)
    d, b = coeffs.d, coeffs.b
    a = np.array(a0, dtype=np.complex128)
    bb = np.array(b0, dtype=np.complex128)

    def values(a_, b_):
        res = r[:, None] - g @ a_ + q @ b_
        lin = 2.0 * np.real(d.conj() @ a_) + 2.0 * np.real(b.conj() @ b_)
        return np.sum(np.abs(res) ** 2, axis=0) - coeffs.kappa - lin

    cur = values(a, bb)
    for _ in range(max_iters):
        res = r[:, None] - g @ a + q @ bb
        grad_a = -(g.conj().T @ res) - d[:, None]
        grad_b = q.conj().T @ res - b[:, None]
        na = np.linalg.norm(grad_a, axis=0)
        nb = np.linalg.norm(grad_b, axis=0)
        a_next = a
        b_next = bb
        if st.delta_alpha > 0:
            safe = na > _DEGENERATE_TOL
            a_next = np.where(safe, st.delta_alpha * grad_a / np.where(safe, na, 1.0), a)
        if st.delta_beta > 0:
            safe = nb > _DEGENERATE_TOL
            b_next = np.where(safe, st.delta_beta * grad_b / np.where(safe, nb, 1.0), bb)
        nxt = values(a_next, b_next)
        improved = nxt > cur + 1e-14 * np.maximum(1.0, np.abs(cur))
        if not improved.any():
            break
        a[:, improved] = a_next[:, improved]
        bb[:, improved] = b_next[:, improved]
        cur[improved] = nxt[improved]
    return a, bb, cur


def _polish_structured(x, spec: ProblemSpec, coeffs: TaylorCoefficients, alpha, beta, max_iters: int = 2000):
    """Single-point wrapper around the columnwise ascent."""
    a, b, val = _polish_structured_batch(
        x, spec, coeffs, np.asarray(alpha)[:, None], np.asarray(beta)[:, None], max_iters
    )
    return a[:, 0], b[:, 0], float(val[0])


def _sphere_fallback(x, spec: ProblemSpec, coeffs: TaylorCoefficients, trials: int = 4096):
    """Best boundary sample by direct search; used when extraction degenerates."""
    best, best_val = None, -np.inf
    for i in range(trials):
        rng = np.random.default_rng((0xFA11BACC, i))
        if spec.structure is not None:
            p = spec.structure.p
            a = rng.standard_normal(p) + 1j * rng.standard_normal(p)
            bvec = rng.standard_normal(p) + 1j * rng.standard_normal(p)
            a = a / max(np.linalg.norm(a), 1e-300) * spec.structure.delta_alpha
            bvec = bvec / max(np.linalg.norm(bvec), 1e-300) * spec.structure.delta_beta
            cand = PerturbationSample(
                mode=MODE_STRUCTURED,
                alpha=a,
                beta=bvec,
                norms={"alpha": float(np.linalg.norm(a)), "beta": float(np.linalg.norm(bvec))},
                fallback=True,
            )
        else:
            dh = rng.standard_normal((spec.m, spec.n)) + 1j * rng.standard_normal((spec.m, spec.n))
            dy = rng.standard_normal(spec.m) + 1j * rng.standard_normal(spec.m)
            dh = dh / max(float(np.linalg.norm(dh)), 1e-300) * spec.delta_h
            dy = dy / max(float(np.linalg.norm(dy)), 1e-300) * spec.delta_y
            cand = PerturbationSample(
                mode=MODE_UNSTRUCTURED,
                dh=dh,
                dy=dy,
                norms={"dh": float(np.linalg.norm(dh)), "dy": float(np.linalg.norm(dy))},
                matrix_norm="frobenius",
                fallback=True,
            )
        val = approx_regret(x, cand, spec, coeffs)
        if val > best_val:
            best, best_val = cand, val
    return best


def worst_case_perturbation(
    x,
    spec: ProblemSpec,
    certificate: RegretEstimate,
    coeffs: TaylorCoefficients | None = None,
) -> PerturbationSample:
    """Boundary perturbation attaining the worst approximated regret at x.

    ``certificate`` must hold (gamma, multipliers) feasible for the
    variant's LMI at x; when it is the SDP optimum the returned perturbation
    achieves the optimal value up to solver tolerance.  Built from the
    binding eigenvectors of the main LMI block: with top component t and
    residual-block component v, each perturbation is the rank-one boundary
    point aligned against its coupling vector.  The binding eigenvalue can
    be multiple, so every eigenvector in the bottom cluster is tried and the
    best candidate wins.  Structured extraction additionally scans mixtures
    of the cluster and polishes every start by a monotone boundary ascent,
    escalating to seeded random restarts if the certificate value is still
    out of reach; the mixture is needed because no single eigenvector of a
    multiple binding eigenvalue has to be tight.  Degenerate directions fall
    back to a sampled-sphere search and set ``fallback``.
    """
    from .formulations import _build_block  # avoid cycle at import time

    x = complex_vector(x, length=spec.n)
    variant = certificate.variant
    if coeffs is None:
        coeffs = coefficients_for(spec, variant)
    tau = certificate.tau
    tau1 = float(tau[0]) if tau.size else 0.0
    tau2 = float(tau[1]) if tau.size > 1 else 0.0
    blk = _build_block(spec, variant, coeffs, certificate.gamma_star, tau1, tau2, x)
    blk = 0.5 * (blk + blk.conj().T)
    vals, vecs = np.linalg.eigh(blk)
    scale = max(1.0, float(np.abs(vals).max()))
    cluster = np.flatnonzero(vals <= vals[0] + 1e-6 * scale)[:6]
    m = spec.m

    if spec.structure is not None:
        st = spec.structure
        g, q, _ = _structured_operators(x, spec)

        def extract(w):
            t = w[0]
            v = w[1 : 1 + m]
            alpha, bad_a = _rank_one_component(coeffs.d * t - g.conj().T @ v, t, st.delta_alpha)
            beta, bad_b = _rank_one_component(coeffs.b * t + q.conj().T @ v, t, st.delta_beta)
            return None if (bad_a or bad_b) else (alpha, beta)

        starts = []
        for idx in cluster:
            ab = extract(vecs[:, idx])
            if ab is not None:
                starts.append(ab)
        for k in cluster[1:]:
            for th in np.linspace(0.0, np.pi / 2, 13)[1:-1]:
                for ph in np.linspace(0.0, 2.0 * np.pi, 25, endpoint=False):
                    w = np.cos(th) * vecs[:, cluster[0]] + np.sin(th) * np.exp(1j * ph) * vecs[:, k]
                    ab = extract(w)
                    if ab is not None:
                        starts.append(ab)
        if starts:
            a0 = np.stack([ab[0] for ab in starts], axis=1)
            b0 = np.stack([ab[1] for ab in starts], axis=1)
            aa, bs, fv = _polish_structured_batch(x, spec, coeffs, a0, b0)
            k = int(np.argmax(fv))
            alpha, beta, best_val = aa[:, k], bs[:, k], float(fv[k])
            if certificate.gamma_star - best_val > 1e-5 * max(1.0, abs(certificate.gamma_star)):
                rng = np.random.default_rng(0x57A65EED)
                a0 = rng.standard_normal((st.p, 128)) + 1j * rng.standard_normal((st.p, 128))
                b0 = rng.standard_normal((st.p, 128)) + 1j * rng.standard_normal((st.p, 128))
                a0 = a0 / np.linalg.norm(a0, axis=0) * st.delta_alpha
                b0 = b0 / np.linalg.norm(b0, axis=0) * st.delta_beta
                aa, bs, fv = _polish_structured_batch(x, spec, coeffs, a0, b0)
                k = int(np.argmax(fv))
                if float(fv[k]) > best_val:
                    alpha, beta = aa[:, k], bs[:, k]
            return PerturbationSample(
                mode=MODE_STRUCTURED,
                alpha=alpha,
                beta=beta,
                norms={"alpha": float(np.linalg.norm(alpha)), "beta": float(np.linalg.norm(beta))},
            )
        cand = _sphere_fallback(x, spec, coeffs)
        alpha, beta, _ = _polish_structured(x, spec, coeffs, cand.alpha, cand.beta)
        return PerturbationSample(
            mode=MODE_STRUCTURED,
            alpha=alpha,
            beta=beta,
            norms={"alpha": float(np.linalg.norm(alpha)), "beta": float(np.linalg.norm(beta))},
            fallback=True,
        )

    xop = np.kron(x.reshape(1, -1), np.eye(m)) if spec.delta_h > 0 else None
    best: PerturbationSample | None = None
    best_val = -np.inf
    for idx in cluster:
        w = vecs[:, idx]
        t = w[0]
        v = w[1 : 1 + m]
        dh = np.zeros((spec.m, spec.n), dtype=np.complex128)
        dy = np.zeros(spec.m, dtype=np.complex128)
        bad_h = bad_y = False
        if spec.delta_h > 0:
            gvec, bad_h = _rank_one_component(coeffs.d * t - xop.conj().T @ v, t, spec.delta_h)
            if not bad_h:
                dh = col_unstack(gvec, spec.m, spec.n)
        if spec.delta_y > 0:
            gy, bad_y = _rank_one_component(coeffs.b * t + v, t, spec.delta_y)
            if not bad_y:
                dy = gy
        if bad_h or bad_y:
            continue
        cand = PerturbationSample(
            mode=MODE_UNSTRUCTURED,
            dh=dh,
            dy=dy,
            norms={"dh": float(np.linalg.norm(dh)), "dy": float(np.linalg.norm(dy))},
            matrix_norm="frobenius",
        )
        val = approx_regret(x, cand, spec, coeffs)
        if val > best_val:
            best, best_val = cand, val
    return best if best is not None else _sphere_fallback(x, spec, coeffs)


def finite_difference_gradients(
    h,
    y,
    variant: str = "unstructured",
    step: float = 1e-5,
    mu: float = 0.0,
    h_basis=None,
    y_basis=None,
):
    """Central-difference gradients of the optimal cost, Wirtinger convention.

    Validates the analytic coefficients: for an expansion
    f ~= f0 + 2 Re(sum conj(g_jk) * delta_jk), the recovered coefficient is
    g = (df/dRe + i df/dIm) / 2 entrywise, so a linear test function
    2 Re(trace(C^H dH)) reproduces C exactly.  Returns (matrix gradient,
    vector gradient); for the structured variant both are length-p vectors
    over the basis weights.
    """
    if not (1e-7 <= step <= 1e-3):
        raise ValueError("step must lie in [1e-7, 1e-3]")
    h = complex_matrix(h)
    y = complex_vector(y, length=h.shape[0])

    if variant == "structured":
        if h_basis is None or y_basis is None:
            raise ValueError("structured variant needs both bases")
        hb = [complex_matrix(b) for b in h_basis]
        yb = [complex_vector(u, length=h.shape[0]) for u in y_basis]

        def f(alpha, beta):
            ht = h.copy()
            yt = y.copy()
            for ai, bmat in zip(alpha, hb):
                ht = ht + ai * bmat
            for bi, bvec in zip(beta, yb):
                yt = yt + bi * bvec
            return _optimal_cost(ht, yt, 0.0)

        p = len(hb)
        d_fd = np.zeros(p, dtype=np.complex128)
        b_fd = np.zeros(p, dtype=np.complex128)
        zer = np.zeros(p, dtype=np.complex128)
        for i in range(p):
            for which, out in ((0, d_fd), (1, b_fd)):
                re = np.zeros(p, dtype=np.complex128)
                re[i] = step
                im = np.zeros(p, dtype=np.complex128)
                im[i] = 1j * step
                if which == 0:
                    dre = (f(re, zer) - f(-re, zer)) / (2 * step)
                    dim = (f(im, zer) - f(-im, zer)) / (2 * step)
                else:
                    dre = (f(zer, re) - f(zer, -re)) / (2 * step)
                    dim = (f(zer, im) - f(zer, -im)) / (2 * step)
                out[i] = 0.5 * (dre + 1j * dim)
        return d_fd, b_fd

    if variant == "regularized" and mu <= 0:
        raise ValueError("regularized variant needs mu > 0")
    mu_eff = mu if variant == "regularized" else 0.0

    m, n = h.shape
    d_fd = np.zeros((m, n), dtype=np.complex128)
    b_fd = np.zeros(m, dtype=np.complex128)
    for j in range(m):
        for k in range(n):
            e = np.zeros((m, n), dtype=np.complex128)
            e[j, k] = step
            dre = (_optimal_cost(h + e, y, mu_eff) - _optimal_cost(h - e, y, mu_eff)) / (2 * step)
            e[j, k] = 1j * step
            dim = (_optimal_cost(h + e, y, mu_eff) - _optimal_cost(h - e, y, mu_eff)) / (2 * step)
            d_fd[j, k] = 0.5 * (dre + 1j * dim)
    for j in range(m):
        e = np.zeros(m, dtype=np.complex128)
        e[j] = step
        dre = (_optimal_cost(h, y + e, mu_eff) - _optimal_cost(h, y - e, mu_eff)) / (2 * step)
        e[j] = 1j * step
        dim = (_optimal_cost(h, y + e, mu_eff) - _optimal_cost(h, y - e, mu_eff)) / (2 * step)
        b_fd[j] = 0.5 * (dre + 1j * dim)
    return d_fd, b_fd


def _optimal_cost(h: np.ndarray, y: np.ndarray, mu: float) -> float:
    """min over w of ||y - H w||^2 (+ mu ||w||^2), evaluated fresh."""
    if mu > 0:
        n = h.shape[1]
        w = np.linalg.solve(h.conj().T @ h + mu * np.eye(n), h.conj().T @ y)
        return float(np.linalg.norm(y - h @ w) ** 2 + mu * np.linalg.norm(w) ** 2)
    p = projection_perp(h)
    return float(np.real(y.conj() @ (p @ y)))
