"""Transfer of certified splittings to nearby operator sequences.

Given a sequence with a certified stable/unstable splitting and a second
sequence within ``eps`` of it, rebuild the splitting for the perturbed
sequence.  The new stable space at time k is the graph of a small linear
map H_k over the old one; H is found as the fixed point of a contracting
update built from a geometric correction series, and the unstable side is
obtained symmetrically by running the same construction on the
time-reversed inverse sequence.  The rebuilt splitting is certified at a
relaxed decay rate ``lam1 > lam`` with constant ``((R + 1) / lam1) ** N``,
where N is the block length at which the original decay beats ``lam1``.

``perturbed_cl_for_diffeo`` lifts the construction to diffeomorphisms: an
orbit of the perturbed map is shadowed by an exact trajectory of the base
map, the base splitting is read off along the shadow, and the transfer
runs on the differentials along both orbits.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .seqcore import (ConvergenceError, OperatorSeq, PreconditionError,
                      TruncationError, compose, dense, norm as vec_norm,
                      op_apply, op_norm)
from .clstruct import CLCertificate, ProjPair, _directions
from .shadow import (Pseudotrajectory, recompute_step_error, shadow,
                     shadow_periodic)

__all__ = [
    "GraphMaps",
    "PerturbedCert",
    "series_gain",
    "perturbation_budget",
    "rate_upgrade_steps",
    "upgraded_constant",
    "graph_transform_seq",
    "graph_transform_periodic",
    "perturbed_cl_for_diffeo",
]

#: fixed-point iteration stops when successive iterates differ by at most this
STOP_TOL = 1e-12
#: dropped tail allowance for the periodic correction series
SERIES_TAIL_TOL = 1e-13
#: one-step leakage allowance for the rebuilt splitting
INCLUSION_TOL = 1e-9
#: dimensionless slack on the N-step decay inequality
DECAY_SLACK = 1e-6
#: dimensionless slack on the contraction-ratio and norm-ball gates
CONTRACTION_SLACK = 1e-9
#: fixed-point iteration cap
MAX_FP_ITERATIONS = 80
#: allowance on the residual of the converged fixed point
FP_RESIDUAL_TOL = 1e-11

_NORM_ORDS = {1.0: 1, 2.0: 2, math.inf: np.inf}


def series_gain(C, lam):
    """Norm bound ``1 + C^2 lam^2 / (1 - lam^2)`` of the correction series."""
    return 1.0 + C * C * lam * lam / (1.0 - lam * lam)


def perturbation_budget(C, lam, R):
    """Largest perturbation size the graph update provably contracts at.

    The update is 1/2-Lipschitz on the ball of radius ``e2 = 2*L*C*eps``
    (L the series gain) as long as ``R*(2*e1 + 4*(R + e1)*e2) <= 1/(2*L)``
    with ``e1 = C*eps``; that condition is quadratic in eps and this is
    its positive root.
    """
    L = series_gain(C, lam)
    a = 8.0 * R * L * C * C
    b = 2.0 * R * C * (1.0 + 4.0 * R * L)
    t = 1.0 / (2.0 * L)
    return (-b + math.sqrt(b * b + 4.0 * a * t)) / (2.0 * a)


def rate_upgrade_steps(C, lam, lam1):
    """Smallest N with ``2 C lam^N <= lam1^N``.

    After N steps the original decay beats the relaxed rate with a factor
    2 to spare, which is what absorbs the perturbation terms.
    """
    if not lam < lam1 < 1.0:
        raise PreconditionError(
            f"target rate lam1={lam1} must lie strictly between lam={lam} and 1")
    N = 1
    while 2.0 * C * lam ** N > lam1 ** N:
        N += 1
    return N


def upgraded_constant(C, lam, R, lam1):
    """Certified constant ``((R + 1) / lam1) ** N`` for the relaxed rate."""
    return ((R + 1.0) / lam1) ** rate_upgrade_steps(C, lam, lam1)


@dataclass
class GraphMaps:
    """Per-time tilt maps defining a rebuilt splitting.

    ``H[k]`` maps the old stable space at time k into the old unstable one
    (its graph is the new stable space); ``H_u[k]`` tilts the unstable side
    symmetrically.  ``eps2`` is the norm ball both families are confined
    to and ``attained`` the largest norm actually realized.
    """

    H: dict
    H_u: dict
    eps2: float
    iterations: int
    attained: float = 0.0
    fp_residual: float = 0.0
    meta: dict = field(default_factory=dict)


@dataclass
class PerturbedCert:
    """Record of a splitting transfer.

    ``result.proj_at`` serves the tilted projections (index-keyed for
    sequences, point-keyed when built for a diffeomorphism);
    ``inclusion_residuals[k]`` is the one-step leakage |Q~_{k+1} B_k P~_k|.
    """

    base: CLCertificate
    result: CLCertificate
    graph: GraphMaps
    inclusion_residuals: dict
    meta: dict = field(default_factory=dict)

    def residual_rows(self):
        """``(k, |H_k|, inclusion residual)`` rows, ascending in k."""
        p = self.meta.get("p", 2.0)
        return [(k, op_norm(self.graph.H[k], p), self.inclusion_residuals[k])
                for k in sorted(self.inclusion_residuals)]

    def to_json(self):
        def blob(c):
            return {"C": c.C, "lam": c.lam, "R": c.R}

        return {
            "base": blob(self.base),
            "result": blob(self.result),
            "eps2": self.graph.eps2,
            "iterations": self.graph.iterations,
            "attained": self.graph.attained,
            "fp_residual": self.graph.fp_residual,
            "H": {str(k): op.to_dense_matrix().tolist()
                  for k, op in sorted(self.graph.H.items())},
            "H_u": {str(k): op.to_dense_matrix().tolist()
                    for k, op in sorted(self.graph.H_u.items())},
            "inclusion_residuals": {str(k): v for k, v
                                    in sorted(self.inclusion_residuals.items())},
            "meta": self.meta,
        }


def _mat_norm(mat, p):
    return float(np.linalg.norm(mat, _NORM_ORDS[p]))


def _diff_norm(b_op, a_op, p):
    """|B - A| without densifying structured pairs of matching shape.

    For two diag or two equally-shifted shift_diag operators the
    difference has the same structure, so its norm is the largest scalar
    gap -- including the entry the dense zero-extended view drops at the
    window edge.
    """
    if (a_op.kind == b_op.kind != "dense" and a_op.shift == b_op.shift
            and a_op.domain == b_op.domain):
        return float(np.max(np.abs(b_op.scalars - a_op.scalars)))
    return _mat_norm(b_op.to_dense_matrix() - a_op.to_dense_matrix(), p)


def _blocks(Am, Ai, Bm, P, Q, wrap):
    """Split each step into stable/unstable components against (P, Q)."""
    n_times = len(P)
    out = {name: [] for name in ("Z", "Ass", "Aus", "Bsu", "Dss", "Dus", "Duu")}
    for j in range(len(Am)):
        nj = (j + 1) % n_times if wrap else j + 1
        Pj, Qj, Pn, Qn = P[j], Q[j], P[nj], Q[nj]
        D = Bm[j] - Am[j]
        out["Z"].append(Ai[j] @ Qn)
        out["Ass"].append(Pn @ Am[j] @ Pj)
        out["Aus"].append(Pn @ Am[j] @ Qj)
        out["Bsu"].append(Qn @ Bm[j] @ Pj)
        out["Dss"].append(Pn @ D @ Pj)
        out["Dus"].append(Pn @ D @ Qj)
        out["Duu"].append(Qn @ D @ Qj)
    return out


def _series_terms(C, lam, s_norm):
    """Term count keeping the dropped tail of the series below tolerance."""
    if s_norm == 0.0:
        return 1
    tail = C * C * lam * lam / (1.0 - lam * lam) * s_norm
    T = 1
    while tail > SERIES_TAIL_TOL:
        tail *= lam * lam
        T += 1
        if T > 100_000:
            raise ConvergenceError(
                "correction series does not reach the truncation target")
    return T


def _fixed_point(blk, C, lam, p, period, label):
    """Iterate H -> series(Q-update(H)) from H = 0 until it stabilizes.

    Returns ``(H, iterations, fp_residual, worst_ratio)``; raises
    ConvergenceError when a successive-difference ratio exceeds
    1/2 + slack, when the iteration fails to stabilize, or when the
    converged point does not reproduce itself to FP_RESIDUAL_TOL.
    """
    n_ops = len(blk["Z"])
    dim = blk["Z"][0].shape[0]
    n_times = n_ops if period else n_ops + 1
    zero = np.zeros((dim, dim))

    def q_step(H):
        S = []
        for j in range(n_ops):
            Hn = H[(j + 1) % n_times] if period else H[j + 1]
            rhs = (-blk["Bsu"][j] - blk["Duu"][j] @ H[j]
                   + Hn @ (blk["Aus"][j] @ H[j])
                   + Hn @ blk["Dss"][j]
                   + Hn @ (blk["Dus"][j] @ H[j]))
            S.append(blk["Z"][j] @ rhs)
        return S

    def apply_series(S):
        new = [None] * n_times
        if period is None:
            # the finite backward sweep sums the whole series exactly;
            # at the last time there are no later terms to pick up
            new[n_ops] = zero.copy()
            for j in range(n_ops - 1, -1, -1):
                new[j] = S[j] + blk["Z"][j] @ new[j + 1] @ blk["Ass"][j]
            return new
        T = _series_terms(C, lam, max(_mat_norm(s, p) for s in S))
        for j in range(n_times):
            acc = S[j].copy()
            left = None
            right = None
            for l in range(1, T):
                zi = (j + l - 1) % n_ops
                left = blk["Z"][zi] if left is None else left @ blk["Z"][zi]
                right = blk["Ass"][zi] if right is None else blk["Ass"][zi] @ right
                acc += left @ S[(j + l) % n_ops] @ right
            new[j] = acc
        return new

    H = [zero] * n_times
    prev_diff = None
    worst_ratio = 0.0
    for iterations in range(1, MAX_FP_ITERATIONS + 1):
        new = apply_series(q_step(H))
        diff = max(_mat_norm(new[j] - H[j], p) for j in range(n_times))
        if prev_diff is not None and prev_diff > 1e-13:
            ratio = diff / prev_diff
            worst_ratio = max(worst_ratio, ratio)
            if ratio > 0.5 * (1.0 + CONTRACTION_SLACK):
                raise ConvergenceError(
                    f"{label} graph iteration contracted at ratio {ratio:.6f}, "
                    "above the certified 1/2")
        H = new
        if diff <= STOP_TOL:
            break
        prev_diff = diff
    else:
        raise ConvergenceError(
            f"{label} graph iteration still moving by {diff:.3g} after "
            f"{MAX_FP_ITERATIONS} steps")
    res = apply_series(q_step(H))
    fp_residual = max(_mat_norm(res[j] - H[j], p) for j in range(n_times))
    if fp_residual > FP_RESIDUAL_TOL:
        raise ConvergenceError(
            f"{label} fixed-point residual {fp_residual:.3g} exceeds "
            f"{FP_RESIDUAL_TOL}")
    return H, iterations, fp_residual, worst_ratio


def _transfer(seq, cert, pert, lam1, eps, p, period):
    if p not in _NORM_ORDS:
        raise PreconditionError("splitting transfer supports p in {1, 2, inf}")
    if seq.lo != pert.lo or seq.hi != pert.hi:
        raise PreconditionError("sequences must share their time interval")
    if not cert.lam < lam1 < 1.0:
        raise PreconditionError(
            f"target rate lam1={lam1} must lie strictly in (lam={cert.lam}, 1)")
    lo, hi = seq.lo, seq.hi
    n_ops = hi - lo
    if n_ops < 1:
        raise PreconditionError("sequence holds no operators")
    C, lam, R = cert.C, cert.lam, cert.R
    n_times = n_ops if period else n_ops + 1
    ks = [lo + j for j in range(n_times)]
    W = seq.op_at(lo).domain

    a_ops = [seq.op_at(lo + j) for j in range(n_ops)]
    b_ops = [pert.op_at(lo + j) for j in range(n_ops)]
    a_inv = [op.inverse() for op in a_ops]
    b_inv = [op.inverse() for op in b_ops]
    Am = [op.to_dense_matrix() for op in a_ops]
    Bm = [op.to_dense_matrix() for op in b_ops]
    Ai = [op.to_dense_matrix() for op in a_inv]
    Bi = [op.to_dense_matrix() for op in b_inv]
    base_pairs = [cert.proj_at(k) for k in ks]
    Pm = [pr.P.to_dense_matrix() for pr in base_pairs]
    Qm = [pr.Q.to_dense_matrix() for pr in base_pairs]

    eps_meas = max(_diff_norm(b_ops[j], a_ops[j], p) for j in range(n_ops))
    if eps is None:
        eps_use = eps_meas
    else:
        if eps_meas > eps * (1.0 + CONTRACTION_SLACK):
            raise PreconditionError(
                f"declared perturbation bound {eps:.3g} is below the measured "
                f"difference {eps_meas:.3g}")
        eps_use = eps
    budget = perturbation_budget(C, lam, R)
    if eps_use > budget * (1.0 + 1e-12):
        raise PreconditionError(
            f"perturbation {eps_use:.3g} exceeds the admissible budget "
            f"{budget:.3g} for (C={C}, lam={lam}, R={R})")
    eps_rev = max(_diff_norm(b_inv[j], a_inv[j], p) for j in range(n_ops))

    # stable side, then the unstable side on the time-reversed inverse
    # sequence: reversed time j sits at original time hi-j (period: index
    # (m-j) mod m), and its step applies the inverse of the original step
    # into that time point
    fwd = _blocks(Am, Ai, Bm, Pm, Qm, wrap=period is not None)
    if period is None:
        rAm = [Ai[n_ops - 1 - j] for j in range(n_ops)]
        rAi = [Am[n_ops - 1 - j] for j in range(n_ops)]
        rBm = [Bi[n_ops - 1 - j] for j in range(n_ops)]
        rP = [Qm[n_ops - j] for j in range(n_times)]
        rQ = [Pm[n_ops - j] for j in range(n_times)]
    else:
        rAm = [Ai[period - 1 - j] for j in range(n_ops)]
        rAi = [Am[period - 1 - j] for j in range(n_ops)]
        rBm = [Bi[period - 1 - j] for j in range(n_ops)]
        rP = [Qm[(period - j) % period] for j in range(n_times)]
        rQ = [Pm[(period - j) % period] for j in range(n_times)]
    rev = _blocks(rAm, rAi, rBm, rP, rQ, wrap=period is not None)

    Hs, it_s, fpres_s, ratio_s = _fixed_point(fwd, C, lam, p, period, "stable")
    Hr, it_u, fpres_u, ratio_u = _fixed_point(rev, C, lam, p, period, "unstable")
    if period is None:
        Hu = [Hr[n_ops - j] for j in range(n_times)]
    else:
        Hu = [Hr[(period - j) % period] for j in range(n_times)]

    Lp = series_gain(C, lam)
    eps2_fwd = 2.0 * Lp * C * eps_use
    eps2_rev = 2.0 * Lp * C * eps_rev
    h_norms = [_mat_norm(Hs[j], p) for j in range(n_times)]
    hu_norms = [_mat_norm(Hu[j], p) for j in range(n_times)]
    for attained, ball, label in ((max(h_norms), eps2_fwd, "stable"),
                                  (max(hu_norms), eps2_rev, "unstable")):
        if attained > ball * (1.0 + CONTRACTION_SLACK):
            raise ConvergenceError(
                f"{label} tilt norm {attained:.3g} left its ball {ball:.3g}")

    eye = np.eye(W.length)
    pairs = []
    for j in range(n_times):
        if not Hs[j].any() and not Hu[j].any():
            # zero tilt on both sides: the splitting is unchanged, so keep
            # the original pair (bit-exact, and structured if it was)
            pairs.append(base_pairs[j])
            continue
        tilt = np.linalg.inv(eye - Hu[j] @ Hs[j])
        Pt = (eye + Hs[j]) @ tilt @ (Pm[j] - Hu[j] @ Qm[j])
        pair = ProjPair(dense(Pt, W), dense(eye - Pt, W))
        try:
            pair.validate(p=p)
        except PreconditionError as exc:
            raise ConvergenceError(
                f"tilted pair at k={ks[j]} is not a projection: {exc}") from exc
        pairs.append(pair)
    proj_sup = max(max(op_norm(pr.P, p), op_norm(pr.Q, p)) for pr in pairs)
    if proj_sup > 2.0 * C * (1.0 + CONTRACTION_SLACK):
        raise ConvergenceError(
            f"tilted projection norm {proj_sup:.3g} exceeds 2C = {2 * C}")

    incl = {}
    incl_rev_max = 0.0
    for j in range(n_ops):
        nj = (j + 1) % n_times if period else j + 1
        r_f = float(op_norm(compose(pairs[nj].Q, compose(b_ops[j], pairs[j].P)), p))
        r_b = float(op_norm(compose(pairs[j].P, compose(b_inv[j], pairs[nj].Q)), p))
        incl[lo + j] = r_f
        incl_rev_max = max(incl_rev_max, r_b)
        if max(r_f, r_b) > INCLUSION_TOL:
            raise ConvergenceError(
                f"rebuilt splitting leaks at k={lo + j}: forward {r_f:.3g}, "
                f"backward {r_b:.3g}")

    N = rate_upgrade_steps(C, lam, lam1)
    C1 = ((R + 1.0) / lam1) ** N
    bound = lam1 ** N * (1.0 + DECAY_SLACK)
    rng = np.random.default_rng(0)
    worst_n_step = 0.0
    c1_emp = 0.0
    skipped = 0
    checked = 0

    def scan(side_P, ops_at):
        nonlocal worst_n_step, c1_emp, skipped, checked
        for v in _directions(side_P, W, p, 6, rng):
            cur = v
            ratios = []
            try:
                for l in range(N):
                    cur = op_apply(ops_at(l), cur)
                    ratios.append(vec_norm(cur) / vec_norm(v))
            except TruncationError:
                skipped += 1
                continue
            for n_steps, r in enumerate(ratios, start=1):
                c1_emp = max(c1_emp, r / lam1 ** n_steps)
            worst_n_step = max(worst_n_step, ratios[-1])
            checked += 1

    if period is None:
        fwd_js = [j for j in range(n_times) if j + N <= n_ops]
        bwd_js = [j for j in range(n_times) if j - N >= 0]
    else:
        fwd_js = bwd_js = list(range(n_times))
    stride = max(1, len(fwd_js) // 12)
    for j in fwd_js[::stride]:
        scan(pairs[j].P,
             lambda l, j=j: b_ops[(j + l) % n_ops if period else j + l])
    stride = max(1, len(bwd_js) // 12)
    for j in bwd_js[::stride]:
        scan(pairs[j].Q,
             lambda l, j=j: b_inv[(j - 1 - l) % n_ops if period else j - 1 - l])
    if worst_n_step > bound:
        raise ConvergenceError(
            f"{N}-step decay {worst_n_step:.6f} exceeds lam1^{N} = "
            f"{lam1 ** N:.6f}")

    R_res = max(max(op_norm(op, p) for op in b_ops),
                max(op_norm(op, p) for op in b_inv))
    pair_by_time = dict(zip(ks, pairs))
    if period is None:
        proj_fn = pair_by_time.__getitem__
    else:
        def proj_fn(k, _m=period, _lo=lo):
            return pair_by_time[_lo + (k - _lo) % _m]
    result = CLCertificate(C1, lam1, R_res, proj_fn)

    graph = GraphMaps(
        H={ks[j]: dense(Hs[j], W) for j in range(n_times)},
        H_u={ks[j]: dense(Hu[j], W) for j in range(n_times)},
        eps2=float(max(eps2_fwd, eps2_rev)),
        iterations=it_s + it_u,
        attained=float(max(max(h_norms), max(hu_norms))),
        fp_residual=float(max(fpres_s, fpres_u)),
        meta={"iterations_stable": it_s, "iterations_unstable": it_u},
    )
    meta = {
        "p": p,
        "eps": float(eps_use),
        "eps_measured": float(eps_meas),
        "eps_reverse": float(eps_rev),
        "budget": float(budget),
        "reverse_within_budget": bool(eps_rev <= budget * (1.0 + 1e-12)),
        "eps2_forward": float(eps2_fwd),
        "eps2_reverse": float(eps2_rev),
        "rate_steps": int(N),
        "C1_formula": float(C1),
        "C1_empirical": float(c1_emp),
        "n_step_worst": float(worst_n_step),
        "n_step_bound": float(bound),
        "decay_checked": int(checked),
        "decay_skipped": int(skipped),
        "contraction_ratio": float(max(ratio_s, ratio_u)),
        "proj_norm_sup": float(proj_sup),
        "reverse_inclusion_max": float(incl_rev_max),
        "period": period,
    }
    return PerturbedCert(base=cert, result=result, graph=graph,
                         inclusion_residuals=incl, meta=meta)


def graph_transform_seq(seq, cert, pert, lam1, *, eps=None, p=2.0):
    """Rebuild ``cert``'s splitting for ``pert`` at the relaxed rate lam1.

    Parameters
    ----------
    seq, cert : the certified sequence and its splitting certificate
        (index-keyed projections).
    pert : OperatorSeq over the same interval with ``|B_k - A_k| <= eps``.
    lam1 : target decay rate, strictly between ``cert.lam`` and 1.
    eps : declared perturbation bound; measured from the data if None.
        Declaring less than the measured difference is an error, as is a
        perturbation beyond :func:`perturbation_budget`.
    p : norm exponent, one of 1, 2, inf.

    Returns a :class:`PerturbedCert` whose ``result`` certifies the tilted
    splitting at ``(((R+1)/lam1)**N, lam1)``.
    """
    if seq.period is not None or pert.period is not None:
        raise PreconditionError(
            "use graph_transform_periodic for periodic sequences")
    return _transfer(seq, cert, pert, lam1, eps, p, None)


def graph_transform_periodic(seq, cert, pert, lam1, *, eps=None, p=2.0):
    """Periodic variant: tilted projections repeat exactly with the period.

    Both sequences must carry the same period m and the certificate's
    projections must be m-periodic; the result stores one period of pairs
    and serves ``proj_at(k + m)`` as the identical object to ``proj_at(k)``.
    """
    if seq.period is None or pert.period != seq.period:
        raise PreconditionError(
            "both sequences must be periodic with the same period")
    m = seq.period
    first, wrapped = cert.proj_at(seq.lo), cert.proj_at(seq.lo + m)
    drift = max(
        np.max(np.abs(wrapped.P.to_dense_matrix() - first.P.to_dense_matrix())),
        np.max(np.abs(wrapped.Q.to_dense_matrix() - first.Q.to_dense_matrix())))
    if drift > 1e-12:
        raise PreconditionError(
            f"certificate projections drift by {drift:.3g} over one period")
    return _transfer(seq, cert, pert, lam1, eps, p, m)


def perturbed_cl_for_diffeo(f, g, orbit, lam1, *, eps=None):
    """Splitting certificate for g along one of its orbits, built from f's.

    ``orbit`` must be a genuine g-orbit (consecutive points with
    ``y_{i+1} = g(y_i)``).  It is a pseudotrajectory of f, so it is
    shadowed by an exact f-trajectory; f's certified splitting read off
    along the shadow is then transferred to the differentials of g along
    the orbit.  A closed orbit (last point equal to the first) routes
    through the periodic solver and yields exactly periodic projections.

    The returned certificate's ``proj_at`` is point-keyed: it accepts any
    point of the orbit (located by nearest match, to absorb round-off in
    forward/inverse round trips) and rejects points off the orbit.
    """
    if f.cert is None:
        raise PreconditionError("base system carries no splitting certificate")
    pts = list(orbit)
    if len(pts) < 2:
        raise PreconditionError("orbit must contain at least two points")
    p = pts[0].p
    scale = 1.0 + max(vec_norm(pt) for pt in pts)
    for i in range(len(pts) - 1):
        fy = g.forward(pts[i])
        gap = vec_norm(pts[i + 1].with_coeffs(pts[i + 1].coeffs - fy.coeffs))
        if gap > 1e-11 * scale:
            raise PreconditionError(
                f"orbit breaks between entries {i} and {i + 1}: "
                f"|y_{{i+1}} - g(y_i)| = {gap:.3g}")

    closed = vec_norm(pts[0].with_coeffs(
        pts[0].coeffs - pts[-1].coeffs)) <= 1e-12 * scale
    n_ops = len(pts) - 1
    if closed:
        period = n_ops
        points = {i: pts[i] for i in range(period)}
        ptraj = Pseudotrajectory(
            points, recompute_step_error(f, points, period=period),
            period=period)
        sres = shadow_periodic(f, ptraj, f.cert)
    else:
        period = None
        points = {i: pts[i] for i in range(len(pts))}
        ptraj = Pseudotrajectory(points, recompute_step_error(f, points))
        sres = shadow(f, ptraj, f.cert)

    xs = {k: sres.point_at(k) for k in range(n_ops + 1)}
    y_at = (lambda k: pts[k % period]) if closed else (lambda k: pts[k])
    aseq = OperatorSeq(0, [f.dforward(xs[k]) for k in range(n_ops)],
                       period=period)
    bseq = OperatorSeq(0, [g.dforward(y_at(k)) for k in range(n_ops)],
                       period=period)
    base_idx = CLCertificate(f.cert.C, f.cert.lam, f.cert.R,
                             lambda k: f.cert.proj_at(xs[k]),
                             meta=dict(f.cert.meta))
    route = graph_transform_periodic if closed else graph_transform_seq
    pc = route(aseq, base_idx, bseq, lam1, eps=eps, p=p)

    anchors = pts[:period] if closed else pts

    def proj_at_point(y):
        best, dist = None, math.inf
        for i, yi in enumerate(anchors):
            gap = vec_norm(y.with_coeffs(y.coeffs - yi.coeffs))
            if gap < dist:
                best, dist = i, gap
        if dist > 1e-8 * (1.0 + vec_norm(y)):
            raise PreconditionError("point is not on the certified orbit")
        return pc.result.proj_at(best)

    result = CLCertificate(pc.result.C, pc.result.lam, pc.result.R,
                           proj_at_point)
    meta = dict(pc.meta)
    meta.update({
        "route": "periodic" if closed else "aperiodic",
        "pseudo_step_error": float(ptraj.d),
        "shadow_distance": float(sres.sup_distance),
        "shadow_iterations": int(sres.iterations),
    })
    return PerturbedCert(base=f.cert, result=result, graph=pc.graph,
                         inclusion_residuals=pc.inclusion_residuals, meta=meta)
