"""Perron-style monotone solvers for Dirichlet and obstacle problems.

The discrete scheme: at every interior node, solve the scalar equation
G(x, r, p(u), A(u)) = 0 for the node value r by bisection (G is monotone
in the node value through (N) and the negative center coefficient of the
second difference; the gradient entry is lagged), sweeping nodes in
lexicographic order alternating with its reverse.  Iterates started from
a verified discrete subsolution increase monotonically, mirroring the
Perron supremum.  Obstacle problems clamp each node update at the
obstacle value.

Initialization: the constant min(boundary) - slack subsolution always
applies; for linear members (laplace / infinity-Laplacian with linear f)
a direct tridiagonal presolve is admitted as a warm start after an honest
verification that it is a discrete subsolution.  The pointwise max of all
verified candidates is used when it verifies itself.

Engines: numba-jitted Gauss-Seidel sweeps on line (radial / 1-D) grids
with a lowered program; a vectorized red-black numpy twin (env flag
SUBEQ_NUMBA=0); and a generic Jacobi engine driven by the subequation
tree for box grids and non-catalog members.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._ir import lower
from .certificates import Certificate
from .errors import (
    ConvergenceError,
    InitializationError,
    InputError,
    PreconditionError,
)
from .jets import Jet, SymMatrix
from .manifolds import (
    FlatBox,
    GridFunction,
    ModelManifold,
    _RadialBase,
    batch_jets,
    _ls_pinv,
    _line_directions,
)
from .policy import DEFAULT_POLICY, NumericPolicy
from .subequations import Subequation, distance_to_boundary, dual as dual_of
from .subequations import (  # structural presolve detection
    _Hessian,
    _InfLaplacian,
    _Laplace,
    _PlurisubBottom,
    _PlurisubTop,
    _Sigma,
)


@dataclass(frozen=True)
class SchemeParams:
    stencil: str = "centered"          # or "monotone-wide" (FlatBox only)
    stencil_radius: int = 2
    directions: int | None = None
    sweep: str = "lex-alternating"
    damping: float = 1.0
    max_sweeps: int = 2_000_000
    conv_tol: float | None = None      # defaults to policy.convergence_tol
    membership_tol: float | None = None
    init: object = "auto"              # "auto" | "constant" | ndarray (strict)
    warm_starts: tuple = ()            # extra candidate arrays, verified non-strictly
    residual_every: int = 64
    force_engine: str | None = None    # "numba" | "numpy" | "generic"


@dataclass
class ProblemSpec:
    F: Subequation
    M: ModelManifold
    boundary: dict                      # tag -> scalar | callable(coords) | array
    obstacle: GridFunction | None = None
    scheme: SchemeParams = field(default_factory=SchemeParams)
    policy: NumericPolicy = DEFAULT_POLICY

    def conv_tol(self):
        return self.scheme.conv_tol if self.scheme.conv_tol is not None else self.policy.convergence_tol

    def membership_tol(self):
        return (self.scheme.membership_tol if self.scheme.membership_tol is not None
                else self.policy.membership_tol)


# ---------------------------------------------------------------------------
# boundary data and line topology
# ---------------------------------------------------------------------------


def boundary_values(M: ModelManifold, boundary: dict) -> np.ndarray:
    """Full-length array holding boundary data on boundary nodes, NaN inside."""
    out = np.full(M.n_nodes, np.nan)
    for tag, spec in boundary.items():
        ids = M.boundary_ids(tag)
        if callable(spec):
            c = M.coords[ids]
            vals = spec(c[:, 0]) if c.shape[1] == 1 else spec(c)
        else:
            vals = np.asarray(spec, dtype=float)
            if vals.ndim == 0:
                vals = np.full(ids.size, float(vals))
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (ids.size,))
        if not np.all(np.isfinite(vals)):
            raise InputError(f"boundary data on '{tag}' must be finite")
        out[ids] = vals
    missing = ~np.isfinite(out) & ~M.interior_mask
    if np.any(missing):
        raise InputError("boundary data missing on some boundary nodes "
                         f"(tags given: {sorted(boundary)})")
    return out


def _is_line(M: ModelManifold) -> bool:
    return isinstance(M, _RadialBase) or (isinstance(M, FlatBox) and M.m == 1)


def _line_ctx(M: ModelManifold):
    if isinstance(M, _RadialBase):
        return M.hL, M.hR, M.ang_ratio, M.m
    x = M.coords[:, 0]
    h = np.empty_like(x)
    hL = np.empty_like(x)
    hR = np.empty_like(x)
    hL[1:] = np.diff(x)
    hR[:-1] = np.diff(x)
    hL[0] = hL[1]
    hR[-1] = hR[-2]
    return hL, hR, np.zeros_like(x), 1


# ---------------------------------------------------------------------------
# initialization: verified discrete subsolutions
# ---------------------------------------------------------------------------


def _interior_residual(F, M, u_vals, scheme: SchemeParams):
    gf = GridFunction(M, u_vals)
    ids, r, p, A = batch_jets(gf, scheme=_jet_scheme(M, scheme),
                              stencil_radius=scheme.stencil_radius,
                              directions=scheme.directions)
    return ids, F.value(ids, r, p, A)


def _jet_scheme(M, scheme: SchemeParams):
    if isinstance(M, FlatBox) and M.m > 1 and scheme.stencil == "monotone-wide":
        return "monotone-wide"
    return "centered"


def _try_presolve(F, M, bvals):
    """Direct tridiagonal solve for linear line members; None when inapplicable."""
    if not _is_line(M):
        return None
    core = F
    f = getattr(core, "f", None)
    linear_f = f is not None and f.kind in ("linear", "constant")
    if isinstance(core, _Laplace) and linear_f:
        use_angular = True
    elif isinstance(core, _InfLaplacian) and linear_f:
        use_angular = False
    elif M.m == 1 and linear_f and isinstance(
            core, (_Hessian, _PlurisubBottom, _PlurisubTop, _Sigma)):
        use_angular = False  # every eigenvalue member is u'' >= f in 1-D
    else:
        return None
    lam = core.f.slope if core.f.kind == "linear" else 0.0
    rhs_c = core.f.value if core.f.kind == "constant" else 0.0
    hL, hR, ang, m = _line_ctx(M)
    n = M.n_nodes
    lo = np.zeros(n)
    di = np.ones(n)
    up = np.zeros(n)
    rhs = np.zeros(n)
    rhs[0], rhs[-1] = bvals[0], bvals[-1]
    i = np.arange(1, n - 1)
    den = hL[i] * hR[i] * (hL[i] + hR[i])
    aL = 2 * hR[i] / den
    aR = 2 * hL[i] / den
    aC = 2 * (hL[i] + hR[i]) / den
    dL = -hR[i] ** 2 / den
    dR = hL[i] ** 2 / den
    dC = (hR[i] ** 2 - hL[i] ** 2) / den
    w = (m - 1) * ang[i] if use_angular else np.zeros_like(den)
    lo[i] = aL + w * dL
    di[i] = -aC + w * dC - lam
    up[i] = aR + w * dR
    rhs[i] = rhs_c
    return _thomas(lo, di, up, rhs)


def _thomas(lo, di, up, rhs):
    n = di.size
    c = np.zeros(n)
    d = np.zeros(n)
    c[0] = up[0] / di[0]
    d[0] = rhs[0] / di[0]
    for i in range(1, n):
        denom = di[i] - lo[i] * c[i - 1]
        c[i] = up[i] / denom
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / denom
    x = np.zeros(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _initial_subsolution(spec: ProblemSpec, bvals, caps):
    """Pointwise max of verified discrete-subsolution candidates.

    Verification tolerates the roundoff floor of the assembled operator
    (~eps * 2/h_min^2 * scale): a candidate is a subsolution up to solver
    roundoff, which the monotone iteration absorbs.
    """
    M, F = spec.M, spec.F
    interior = M.interior_mask
    scale = 1.0 + float(np.nanmax(np.abs(bvals)))
    verify_band = max(100 * spec.policy.root_value_tol,
                      100 * 2.2e-16 * scale * 2.0 / M.min_spacing() ** 2)
    candidates = []

    def admissible(vals, label):
        if np.any(vals[interior] > caps[interior] + 1e-14):
            return None
        _, res = _interior_residual(F, M, vals, spec.scheme)
        if res.size and res.min() < -verify_band:
            return None
        return label

    if isinstance(spec.scheme.init, np.ndarray):
        vals = spec.scheme.init.astype(float).copy()
        vals[~interior] = bvals[~interior]
        if admissible(vals, "user") is None:
            raise InitializationError("user initialization is not a discrete subsolution")
        return vals, "user"

    bmin = np.nanmin(bvals)
    slack = 1e-2 * (1.0 + abs(bmin))
    for k in range(8):
        c = min(bmin - slack * 2.0**k, np.min(caps[interior], initial=np.inf))
        vals = np.full(M.n_nodes, c)
        vals[~interior] = bvals[~interior]
        if admissible(vals, "constant") is not None:
            candidates.append(("constant", vals))
            break
    if spec.scheme.init == "auto":
        pre = _try_presolve(F, M, bvals)
        if pre is not None:
            vals = pre.copy()
            vals[~interior] = bvals[~interior]
            if admissible(vals, "presolve") is not None:
                candidates.append(("presolve", vals))
        if spec.obstacle is not None:
            hmin = M.min_spacing()
            vals = spec.obstacle.values - 0.45 * hmin**2
            vals = np.minimum(vals, caps)
            vals[~interior] = bvals[~interior]
            if admissible(vals, "obstacle-slack") is not None:
                candidates.append(("obstacle-slack", vals))
    for wi, warm in enumerate(spec.scheme.warm_starts):
        vals = np.asarray(warm, dtype=float).copy()
        vals = np.minimum(vals, caps)
        vals[~interior] = bvals[~interior]
        if admissible(vals, f"warm{wi}") is not None:
            candidates.append((f"warm{wi}", vals))
    if not candidates:
        raise InitializationError(
            "no verified discrete subsolution found (boundary data infeasible for F?)")
    if len(candidates) > 1:
        merged = np.maximum.reduce([v for _, v in candidates])
        if admissible(merged, "max") is not None:
            return merged, "max(" + ",".join(lbl for lbl, _ in candidates) + ")"
    # prefer the warmest single verified candidate
    order = ["presolve"] + [f"warm{i}" for i in range(len(spec.scheme.warm_starts))]
    order += ["obstacle-slack", "constant", "user"]
    for label in order:
        for lbl, vals in candidates:
            if lbl == label:
                return vals, lbl
    return candidates[0][1], candidates[0][0]


# ---------------------------------------------------------------------------
# iteration engines
# ---------------------------------------------------------------------------


def _pick_engine(spec: ProblemSpec, program):
    forced = spec.scheme.force_engine
    if forced is not None:
        return forced
    if _is_line(spec.M) and program is not None:
        return "numba" if K.NUMBA_ENABLED else "numpy"
    return "generic"


def _iterate(spec: ProblemSpec, u, caps, engine, program):
    M = spec.M
    conv_tol = spec.conv_tol()
    band = 0.45 * spec.membership_tol()
    gtol = min(band, 1e-9)
    veps = spec.policy.root_value_tol
    damping = spec.scheme.damping
    order = M.interior_ids.astype(np.int64)
    steps = np.full(M.n_nodes, 1e-3 * (1.0 + float(np.abs(u).max())))
    trace = []
    min_signed = 0.0
    res_worst = np.inf
    sweeps = 0
    check_every = max(1, spec.scheme.residual_every)

    if engine in ("numba", "numpy") and program is None:
        raise InputError("line engines need a lowerable subequation")

    if engine == "generic":
        return _iterate_generic(spec, u, caps, trace)

    hL, hR, ang, m = _line_ctx(M)
    P = program
    args = (P.ops, P.ipar, P.fpar, P.pk, P.pa, P.toff, P.tlen, P.tx, P.ty,
            P.apk, P.app, P.gstack)
    colors = [order[0::2], order[1::2]]
    free_band = 10 * conv_tol
    zero_streak = 0
    while sweeps < spec.scheme.max_sweeps:
        if engine == "numba":
            cur_order = order if sweeps % 2 == 0 else order[::-1]
            max_ch, min_ch = K.sweep_line(u, cur_order, hL, hR, ang, caps, steps,
                                          damping, *args, m, gtol, veps)
        else:
            max_ch, min_ch = K.sweep_line_numpy(u, colors, hL, hR, ang, caps, steps,
                                                damping, P.as_tuple(), m, gtol, veps)
        sweeps += 1
        min_signed = min(min_signed, min_ch)
        zero_streak = zero_streak + 1 if max_ch == 0.0 else 0
        if sweeps % check_every == 0 or (max_ch <= conv_tol and zero_streak >= 3):
            if engine == "numba":
                res = np.empty(order.size)
                K.residual_line(u, order, hL, hR, ang, *args, m, res)
            else:
                res = K.residual_line_numpy(u, order, hL, hR, ang, P.as_tuple(), m)
            free = u[order] < caps[order] - free_band
            res_worst = float(np.abs(res[free]).max(initial=0.0))
            res_worst = max(res_worst, float(np.maximum(-res[~free], 0.0).max(initial=0.0)))
            trace.append({"sweep": sweeps, "max_change": max_ch, "residual": res_worst})
            if max_ch <= conv_tol and res_worst <= band:
                return u, {"sweeps": sweeps, "engine": engine, "trace": trace,
                           "min_signed_change": min_signed, "residual_worst": res_worst,
                           "scheme_residuals": (order, res)}
            if zero_streak >= 3:
                # exact sweep-invariance: the discrete fixed point at the
                # root-resolution floor; accept within the full band
                if res_worst <= spec.membership_tol():
                    trace.append({"sweep": sweeps, "note": "fixed point at roundoff floor"})
                    return u, {"sweeps": sweeps, "engine": engine, "trace": trace,
                               "min_signed_change": min_signed, "residual_worst": res_worst,
                               "scheme_residuals": (order, res)}
                break
    raise ConvergenceError(
        f"no convergence in {sweeps} sweeps "
        f"(last max_change={max_ch:.3e}, residual={res_worst:.3e})",
        diagnostics={"trace": trace[-20:]},
    )


def _iterate_generic(spec: ProblemSpec, u, caps, trace):
    M, F = spec.M, spec.F
    conv_tol = spec.conv_tol()
    band = 0.45 * spec.membership_tol()
    gtol = min(band, 1e-9)
    veps = spec.policy.root_value_tol
    damping = spec.scheme.damping
    scheme = _jet_scheme(M, spec.scheme)
    if isinstance(M, FlatBox) and scheme == "monotone-wide":
        ids = M.interior_ids_depth(spec.scheme.stencil_radius)
    else:
        ids = M.interior_ids
    dA = _center_sensitivity(M, ids, scheme, spec.scheme)
    gf = GridFunction(M, u)  # shares the array; jets follow in-place updates
    steps = np.full(ids.size, 1e-3 * (1.0 + float(np.abs(u).max())))
    min_signed = 0.0
    sweeps = 0
    check_every = max(1, spec.scheme.residual_every)
    free_band = 10 * conv_tol
    zero_streak = 0
    res_worst = np.inf
    while sweeps < spec.scheme.max_sweeps:
        _, r0, p0, A0 = batch_jets(gf, ids, scheme, spec.scheme.stencil_radius,
                                   spec.scheme.directions)

        def G(v):
            return F.value(ids, v, p0, A0 + (v - r0)[:, None, None] * dA)

        v = K.vector_node_solve(G, r0, caps[ids], steps, gtol, veps)
        if damping != 1.0:
            v = np.minimum(r0 + damping * (v - r0), caps[ids])
        ch = v - r0
        steps = np.maximum(4.0 * np.abs(ch), 1e-9)
        min_signed = min(min_signed, float(ch.min(initial=0.0)))
        u[ids] = v
        sweeps += 1
        max_ch = float(np.abs(ch).max(initial=0.0))
        zero_streak = zero_streak + 1 if max_ch == 0.0 else 0
        if sweeps % check_every == 0 or (max_ch <= conv_tol and zero_streak >= 3):
            _, r1, p1, A1 = batch_jets(gf, ids, scheme, spec.scheme.stencil_radius,
                                       spec.scheme.directions)
            res = F.value(ids, r1, p1, A1)
            free = u[ids] < caps[ids] - free_band
            res_worst = float(np.abs(res[free]).max(initial=0.0))
            res_worst = max(res_worst, float(np.maximum(-res[~free], 0.0).max(initial=0.0)))
            trace.append({"sweep": sweeps, "max_change": max_ch, "residual": res_worst})
            if max_ch <= conv_tol and res_worst <= band:
                return u, {"sweeps": sweeps, "engine": "generic", "trace": trace,
                           "min_signed_change": min_signed, "residual_worst": res_worst,
                           "scheme_residuals": (ids, res)}
            if zero_streak >= 3:
                if res_worst <= spec.membership_tol():
                    return u, {"sweeps": sweeps, "engine": "generic", "trace": trace,
                               "min_signed_change": min_signed, "residual_worst": res_worst,
                               "scheme_residuals": (ids, res)}
                break
    raise ConvergenceError(
        f"no convergence in {sweeps} sweeps (generic engine)",
        diagnostics={"trace": trace[-20:]},
    )


def _center_sensitivity(M, ids, scheme, sp: SchemeParams):
    """dA/dv: derivative of the assembled Hessian in the center value."""
    m = M.m
    if isinstance(M, _RadialBase) or (isinstance(M, FlatBox) and m == 1):
        hL, hR, ang, mm = _line_ctx(M)
        n = ids.size
        dA = np.zeros((n, mm, mm))
        den = hL[ids] * hR[ids] * (hL[ids] + hR[ids])
        dA[:, 0, 0] = -2.0 * (hL[ids] + hR[ids]) / den
        if mm > 1:
            dctr = (hR[ids] ** 2 - hL[ids] ** 2) / den
            for k in range(1, mm):
                dA[:, k, k] = ang[ids] * dctr
        return dA
    if scheme == "centered":
        out = np.zeros((m, m))
        for k in range(m):
            out[k, k] = -2.0 / M.h[k] ** 2
        return out[None, :, :]
    dirs = _line_directions(m, sp.stencil_radius, sp.directions or (8 if m == 2 else 16))
    L2 = np.array([float(np.dot(e * M.h, e * M.h)) for e in dirs])
    units = np.array([e * M.h / np.sqrt(l2) for e, l2 in zip(dirs, L2)])
    pinv = _ls_pinv(units, m)
    coef = pinv @ (-2.0 / L2)
    out = np.zeros((m, m))
    iu = np.triu_indices(m)
    for row, (i, j) in enumerate(zip(*iu)):
        out[i, j] = coef[row]
        out[j, i] = coef[row]
    return out[None, :, :]


# ---------------------------------------------------------------------------
# public solver operations
# ---------------------------------------------------------------------------


def _comparison_regime(F: Subequation) -> str:
    f = F.meta.f
    if F.meta.tag.startswith("inf_laplacian"):
        return "inf_laplacian"
    if f is not None:
        if f.kind == "linear" and f.slope > 0:
            return "strict-f"
        if f.kind == "table" and np.all(np.diff(f.ys) > 0):
            return "strict-f"
    return "weak"


def perron_dirichlet(spec: ProblemSpec):
    """Solve the Dirichlet problem for F on M; returns (u, certificate).

    The certificate carries per-node membership residuals (the defining
    value at discrete jets, in [-tol, tol] for discrete F-harmonicity),
    the equal-and-opposite dual residuals, the iteration trace, and the
    comparison-regime note.
    """
    t0 = time.perf_counter()
    bvals = boundary_values(spec.M, spec.boundary)
    caps = np.full(spec.M.n_nodes, np.inf)
    if spec.obstacle is not None:
        return solve_obstacle(spec)
    u0, init_label = _initial_subsolution(spec, bvals, caps)
    program = lower(spec.F, spec.M.n_nodes)
    engine = _pick_engine(spec, program)
    if engine in ("numba", "numpy") and program is None:
        engine = "generic"
    u, info = _iterate(spec, u0.copy(), caps, engine, program)
    gf = GridFunction(spec.M, u)
    ids, res = _interior_residual(spec.F, spec.M, u, spec.scheme)
    tol = spec.membership_tol()
    _, sres = info["scheme_residuals"]
    worst = float(np.abs(sres).max(initial=0.0))
    cert = Certificate(
        name="perron_dirichlet",
        passed=bool(worst <= tol and -res.min(initial=0.0) <= tol),
        tolerance=tol,
        worst={"harmonicity": worst,
               "membership": float(-res.min(initial=0.0)),
               "dual_membership": float(np.maximum(sres, 0.0).max(initial=0.0))},
        counts={"interior_nodes": ids.size, "sweeps": info["sweeps"]},
        params={"engine": info["engine"], "init": init_label,
                "comparison_regime": _comparison_regime(spec.F),
                "monotone_iterates": bool(info["min_signed_change"] >= -1e-12),
                "conv_tol": spec.conv_tol()},
        residuals={"membership": res, "dual": -res},
        trace=info["trace"][-50:],
        wall_time=time.perf_counter() - t0,
    )
    if _comparison_regime(spec.F) == "weak":
        cert.notes.append("comparison regime 'weak': uniqueness not guaranteed for this profile")
    return gf, cert


def solve_obstacle(spec: ProblemSpec):
    """Obstacle problem: Dirichlet sweeps with node updates clamped at g.

    Certificate: u <= g, F^g-harmonicity residual min(G, g-u) within the
    band, and the dual residual at strictly uncontacted nodes (one stencil
    width away from the contact set is exempt: discrete jets straddle the
    free boundary).
    """
    t0 = time.perf_counter()
    if spec.obstacle is None:
        raise InputError("solve_obstacle needs spec.obstacle")
    g = spec.obstacle.values
    bvals = boundary_values(spec.M, spec.boundary)
    bd = ~spec.M.interior_mask
    if np.any(bvals[bd] > g[bd] + 1e-12):
        raise PreconditionError("boundary data must satisfy phi <= g on the boundary")
    caps = g.copy()
    u0, init_label = _initial_subsolution(spec, bvals, caps)
    program = lower(spec.F, spec.M.n_nodes)
    engine = _pick_engine(spec, program)
    if engine in ("numba", "numpy") and program is None:
        engine = "generic"
    u, info = _iterate(spec, u0.copy(), caps, engine, program)
    gf = GridFunction(spec.M, u)
    ids, res = _interior_residual(spec.F, spec.M, u, spec.scheme)
    tol = spec.membership_tol()
    gap = g[ids] - u[ids]
    _, sres = info["scheme_residuals"]
    harmonic = np.minimum(sres, gap)     # defining value of F^g at scheme jets
    dual_res = -harmonic                 # dual(F^g) value at jets of -u
    contact = gap <= tol
    exempt = _dilate(spec.M, ids, contact)
    free = ~exempt
    comp = np.minimum(gap, dual_res)
    comp_worst = float(comp.max(initial=0.0))
    worst_harm = float(np.abs(harmonic[free]).max(initial=0.0))
    worst_harm = max(worst_harm, float(np.maximum(-harmonic, 0.0).max(initial=0.0)))
    cert = Certificate(
        name="solve_obstacle",
        passed=bool(
            np.all(u <= g + 1e-12)
            and worst_harm <= tol
            and comp_worst <= tol
        ),
        tolerance=tol,
        worst={
            "harmonicity_off_contact": worst_harm,
            "membership": float(-np.minimum(res, gap).min(initial=0.0)),
            "dual_off_contact": float(max(0.0, -dual_res[free].min(initial=0.0))) if free.any() else 0.0,
            "complementarity": comp_worst,
            "max_over_obstacle": float((u - g).max(initial=0.0)),
        },
        counts={"interior_nodes": ids.size, "contact_nodes": int(contact.sum()),
                "sweeps": info["sweeps"]},
        params={"engine": info["engine"], "init": init_label,
                "comparison_regime": _comparison_regime(spec.F),
                "monotone_iterates": bool(info["min_signed_change"] >= -1e-12)},
        residuals={"membership": res, "obstacle_gap": gap, "complementarity": comp},
        trace=info["trace"][-50:],
        wall_time=time.perf_counter() - t0,
    )
    return gf, cert


def _dilate(M: ModelManifold, ids, mask):
    """Grow a node mask by one stencil width along the grid graph."""
    full = np.zeros(M.n_nodes, dtype=bool)
    full[ids[mask]] = True
    out = full.copy()
    if _is_line(M):
        out[:-1] |= full[1:]
        out[1:] |= full[:-1]
    elif isinstance(M, FlatBox):
        for s in M.strides:
            out[:-s] |= full[s:]
            out[s:] |= full[:-s]
    return out[ids]


def verify_subharmonic(F: Subequation, u: GridFunction, M: ModelManifold | None = None,
                       tol: float | None = None, region=None,
                       scheme: SchemeParams = SchemeParams(),
                       policy: NumericPolicy = DEFAULT_POLICY) -> Certificate:
    """Discrete F-subharmonicity: jets at interior nodes classify inside F.

    Nodes flagged -inf are skipped (USC convention); ``region`` restricts
    to a node mask.
    """
    t0 = time.perf_counter()
    M = M or u.manifold
    tol = policy.membership_tol if tol is None else tol
    ids = None
    if region is not None:
        region = np.asarray(region, dtype=bool)
        ids = np.where(region & M.interior_mask)[0]
    ids, r, p, A = batch_jets(u, ids, _jet_scheme(M, scheme),
                              scheme.stencil_radius, scheme.directions)
    res = F.value(ids, r, p, A)
    worst = float(-res.min(initial=0.0))
    return Certificate(
        name=f"verify_subharmonic[{F.meta.tag}]",
        passed=bool(worst <= tol),
        tolerance=tol,
        worst={"membership_violation": worst},
        counts={"nodes": ids.size, "violations": int((res < -tol).sum())},
        residuals={"membership": res},
        params={"node_ids": ids},
        wall_time=time.perf_counter() - t0,
    )


def comparison_check(F: Subequation, u: GridFunction, v: GridFunction,
                     K=None, tol: float | None = None,
                     precheck_tol: float | None = None,
                     policy: NumericPolicy = DEFAULT_POLICY) -> Certificate:
    """Zero maximum principle on K: max_K (u+v) <= max_{boundary K} (u+v)^+ + tol,
    for u F-subharmonic and v dual-F-subharmonic (verified first).

    On failure the certificate carries the interior max node and a
    doubled-variable diagnostic: the penalized pair maxima of
    u(x)+v(y) - alpha ϱ(x,y)^2 for a ladder of alphas.
    """
    t0 = time.perf_counter()
    M = u.manifold
    tol = policy.comparison_tol if tol is None else tol
    precheck_tol = (100 * policy.membership_tol if precheck_tol is None else precheck_tol)
    K = np.ones(M.n_nodes, dtype=bool) if K is None else np.asarray(K, dtype=bool)
    cu = verify_subharmonic(F, u, M, tol=precheck_tol, region=K & M.interior_mask)
    cv = verify_subharmonic(dual_of(F), v, M, tol=precheck_tol, region=K & M.interior_mask)
    if not (cu.passed and cv.passed):
        return Certificate(
            name="comparison_check", passed=False, tolerance=tol,
            worst={"precondition_u": cu.worst["membership_violation"],
                   "precondition_v": cv.worst["membership_violation"]},
            params={"kind": "precondition-fail"},
            notes=["precondition-fail: membership check failed, not a comparison failure"],
            wall_time=time.perf_counter() - t0,
        )
    w = u.values + v.values
    inner = K & M.interior_mask
    edge = K & ~M.interior_mask
    if _is_line(M):
        shift = np.zeros_like(K)
        shift[:-1] |= ~K[1:]
        shift[1:] |= ~K[:-1]
        edge |= K & shift
    elif isinstance(M, FlatBox):
        for s in M.strides:
            sh = np.zeros_like(K)
            sh[:-s] |= ~K[s:]
            sh[s:] |= ~K[:-s]
            edge |= K & sh
    interior_max = float(w[inner & ~edge].max(initial=-np.inf))
    boundary_plus = float(np.maximum(w[edge], 0.0).max(initial=0.0))
    violation = interior_max - boundary_plus
    passed = bool(violation <= tol)
    cert = Certificate(
        name="comparison_check", passed=passed, tolerance=tol,
        worst={"violation": max(violation, 0.0),
               "interior_max": interior_max, "boundary_max_plus": boundary_plus},
        counts={"K_nodes": int(K.sum())},
        params={"kind": "comparison"},
        wall_time=time.perf_counter() - t0,
    )
    if not passed:
        node = int(np.where(inner & ~edge)[0][np.argmax(w[inner & ~edge])])
        cert.params["max_node"] = node
        cert.trace = _doubled_variable_diag(M, u.values, v.values, K)
    return cert


def _doubled_variable_diag(M, uv, vv, K, max_nodes=256):
    ids = np.where(K)[0]
    if ids.size > max_nodes:
        ids = ids[:: ids.size // max_nodes + 1]
    c = M.coords[ids]
    d2 = ((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
    out = []
    for alpha in (1.0, 10.0, 100.0, 1000.0):
        val = uv[ids][:, None] + vv[ids][None, :] - alpha * d2
        k = np.unravel_index(np.argmax(val), val.shape)
        out.append({
            "alpha": alpha,
            "pair_max": float(val[k]),
            "penalty": float(alpha * d2[k]),
            "x": int(ids[k[0]]),
            "y": int(ids[k[1]]),
        })
    return out


@dataclass
class BarrierResult:
    ok: bool
    beta: GridFunction | None
    s: float
    t: float
    margin: float
    certificate: Certificate


def make_barrier(F: Subequation, M: ModelManifold, omega_mask, boundary_ids,
                 rho: GridFunction, s_grid=(0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0),
                 t_grid=(1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0),
                 collar_width: float | None = None,
                 margin: float | None = None,
                 policy: NumericPolicy = DEFAULT_POLICY) -> BarrierResult:
    """Search beta = t (rho + s rho^2) for a strictly F-subharmonic barrier.

    rho must be a defining function: zero on the boundary piece, negative on
    the omega side near it, with non-vanishing discrete gradient there.
    Certification asks the fiber distance from each collar jet to the
    boundary of F to stay above ``margin`` -- not only at t but along an
    escalating t-ladder (t, 4t, 16t, 64t), the desk-scale rendering of the
    barrier family {t rho_s : t >= t_0}: members with empty asymptotic
    interior (the eikonal) correctly fail.  The smallest certified (s, t)
    pair (s first, then t) is returned.
    """
    t0 = time.perf_counter()
    margin = policy.barrier_margin if margin is None else margin
    omega_mask = np.asarray(omega_mask, dtype=bool)
    boundary_ids = np.asarray(boundary_ids, dtype=int)
    rv = rho.values
    scale = 1.0 + float(np.abs(rv).max())
    if np.any(np.abs(rv[boundary_ids]) > 1e-9 * scale):
        raise PreconditionError("rho must vanish on the boundary piece")
    bc = M.coords[boundary_ids]
    dist = np.min(np.linalg.norm(M.coords[:, None, :] - bc[None, :, :], axis=2), axis=1)
    if collar_width is None:
        collar_width = 4.0 * M.min_spacing()
    collar = omega_mask & M.interior_mask & (dist <= collar_width)
    if not np.any(collar):
        raise PreconditionError("empty collar: enlarge collar_width")
    if np.any(rv[collar] >= 0):
        raise PreconditionError("rho must be negative inside omega near the boundary")
    ids = np.where(collar)[0]
    best_margin = -np.inf

    def certify(vals):
        beta = GridFunction(M, vals)
        _, r, p, A = batch_jets(beta, ids)
        if np.any(np.linalg.norm(p, axis=1) < 1e-12):
            return False, 0.0
        worst = np.inf
        for i in range(ids.size):
            jet = Jet(float(r[i]), p[i], SymMatrix.from_full(A[i]))
            if F.value_jet(int(ids[i]), jet) <= 0:
                return False, min(worst, 0.0)
            d = distance_to_boundary(F, int(ids[i]), jet, policy)
            worst = min(worst, d.value)
            if d.value < margin:
                return False, worst
        return True, worst

    for s in s_grid:
        rs = rv + s * rv**2
        for t in t_grid:
            ok = True
            worst = np.inf
            for scale in (1.0, 4.0, 16.0, 64.0):
                ok_t, w_t = certify(t * scale * rs)
                worst = min(worst, w_t)
                if not ok_t:
                    ok = False
                    break
            best_margin = max(best_margin, worst if np.isfinite(worst) else margin)
            if ok:
                cert = Certificate(
                    name="make_barrier", passed=True, tolerance=margin,
                    worst={"min_fiber_distance": worst},
                    counts={"collar_nodes": ids.size},
                    params={"s": s, "t": t, "collar_width": collar_width,
                            "t_ladder": [t, 4 * t, 16 * t, 64 * t]},
                    wall_time=time.perf_counter() - t0,
                )
                return BarrierResult(True, GridFunction(M, t * rs), s, t, worst, cert)
    cert = Certificate(
        name="make_barrier", passed=False, tolerance=margin,
        worst={"best_margin": best_margin},
        counts={"collar_nodes": ids.size},
        params={"s_grid": list(s_grid), "t_grid": list(t_grid)},
        notes=["barrier search exhausted: boundary may not be F-convex at these heights"],
        wall_time=time.perf_counter() - t0,
    )
    return BarrierResult(False, None, np.nan, np.nan, best_margin, cert)
