"""Bounded solutions of the difference equation v_{k+1} = A_k v_k + w_{k+1}.

Under a hyperbolic splitting certificate (C, lam) the equation has a
distinguished bounded solution given by causal/anticausal sums: the stable
projections of the forcing are propagated forward, the unstable ones
backward, and ``sup_k |v_k| <= L sup_k |w_k|`` with

    L = C^2 (1 + lam) / (1 - lam).

Four routes are provided and kept deliberately independent:

* ``perron_solve``            -- the two-recursion evaluation of the sums
  on a finite interval, with the convention that w vanishes outside it;
* ``periodic_green_solve``    -- the same sums for periodic data, truncated
  once the certificate's tail bound drops below 1e-12;
* ``neumann_perturbed_solve`` -- the bounded solution for a perturbed
  sequence B_k = A_k + Delta_k, by fixed-point iteration against the
  unperturbed solver (geometric rate L*eps < 1/2);
* ``banded_direct_solve``     -- a test oracle that assembles the
  difference equation as one dense least-squares system and never touches
  the sums.

Every solver recomputes its residual max_k |v_{k+1} - A_k v_k - w_{k+1}|
and stores it in the result.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .seqcore import (
    SeqVec, OperatorSeq, norm, op_apply, op_norm, dense, diag, shift_diag,
    PreconditionError, ConvergenceError,
)
from .clstruct import verify_cl_opseq

__all__ = [
    "InhomProblem", "BoundedSolution", "perron_constant",
    "perron_solve", "periodic_green_solve", "neumann_perturbed_solve",
    "banded_direct_solve", "random_hyperbolic_instance",
]

#: relative residual every solver output must satisfy
RESIDUAL_TOL = 1e-10


def perron_constant(C, lam):
    """The bounded-solution constant L = C^2 (1+lam)/(1-lam)."""
    return C * C * (1.0 + lam) / (1.0 - lam)


@dataclass
class InhomProblem:
    """The data (A_k, w_k) of the difference equation on an interval.

    ``seq`` supplies operators for k in [lo, hi-1]; ``w`` maps time points
    (normally lo+1 .. hi) to forcing vectors, with absent keys meaning
    zero.  For a periodic ``seq`` the forcing keys cover one period and
    are looked up modulo it.
    """

    seq: OperatorSeq
    w: dict
    w_bound: float = None

    def __post_init__(self):
        win = self.window
        for k, wk in self.w.items():
            if wk.window != win:
                raise PreconditionError(
                    f"forcing at {k} lives on {wk.window}, operators on {win}")
        if self.w_bound is None:
            self.w_bound = max((norm(wk) for wk in self.w.values()), default=0.0)

    @property
    def window(self):
        return self.seq.ops[0].domain

    @property
    def p(self):
        for wk in self.w.values():
            return wk.p
        return 2.0

    def w_at(self, k):
        if self.seq.period is not None and k not in self.w:
            base = self.seq.lo + (k - self.seq.lo) % self.seq.period
            for cand in (base, base + self.seq.period):
                if cand in self.w:
                    return self.w[cand]
        if k in self.w:
            return self.w[k]
        return SeqVec.zero(self.window, self.p)


@dataclass
class BoundedSolution:
    """A solution map k -> v_k with its sup-norm and recomputed residual."""

    v: dict
    sup_norm: float
    max_residual: float
    period: int = None
    meta: dict = field(default_factory=dict)

    def v_at(self, k):
        if self.period is not None and k not in self.v:
            lo = min(self.v)
            return self.v[lo + (k - lo) % self.period]
        return self.v[k]


def _vec_add(x, y, cx=1.0, cy=1.0):
    return x.with_coeffs(cx * x.coeffs + cy * y.coeffs)


def _solution(prob, v, period=None, meta=None):
    """Package a solution map, recomputing its residual from scratch."""
    a = min(v)
    ks = sorted(v)
    sup = max(norm(v[k]) for k in ks)
    res = 0.0
    last = ks[-1] if period is None else ks[-1] + 1
    for k in range(a, last):
        A = prob.seq.op_at(k)
        nxt = v[a + (k + 1 - a) % period] if period is not None else v[k + 1]
        defect = nxt.coeffs - op_apply(A, v[k], check_loss=False).coeffs \
            - prob.w_at(k + 1).coeffs
        res = max(res, norm(v[k].with_coeffs(defect)))
    return BoundedSolution(v, sup, res, period=period, meta=meta or {})


def perron_solve(prob, cert, verify_cert=False):
    """Distinguished bounded solution on the sequence's interval.

    Evaluates the causal sum over stable projections by the forward
    recursion u_k = P_k(A_{k-1} u_{k-1} + P_k w_k) and the anticausal sum
    over unstable projections by the backward recursion
    s_k = Q_k(A_k^{-1}(s_{k+1} + Q_{k+1} w_{k+1})); the solution is u - s.
    The exact running sums already lie in the stable/unstable family, so
    the outer projections change nothing algebraically; numerically they
    stop round-off from seeding content in the opposite space, which the
    recursion would otherwise amplify exponentially along the interval.
    Pass ``verify_cert=True`` to run the splitting verifier first (callers
    in an inner loop check their certificate once, outside).
    """
    if verify_cert:
        rep = verify_cl_opseq(prob.seq, cert)
        if not rep.passed:
            raise PreconditionError(
                f"splitting certificate fails on the sequence: {rep.to_json()}")
    a, b = prob.seq.lo, prob.seq.hi
    u = op_apply(cert.proj_at(a).P, prob.w_at(a))
    us = {a: u}
    for k in range(a + 1, b + 1):
        u = _vec_add(op_apply(prob.seq.op_at(k - 1), u, check_loss=False),
                     op_apply(cert.proj_at(k).P, prob.w_at(k)))
        u = op_apply(cert.proj_at(k).P, u, check_loss=False)
        us[k] = u
    s = SeqVec.zero(prob.window, prob.p)
    v = {b: _vec_add(us[b], s, cy=-1.0)}
    for k in range(b - 1, a - 1, -1):
        drive = _vec_add(s, op_apply(cert.proj_at(k + 1).Q, prob.w_at(k + 1)))
        s = op_apply(prob.seq.op_at(k).inverse(), drive, check_loss=False)
        s = op_apply(cert.proj_at(k).Q, s, check_loss=False)
        v[k] = _vec_add(us[k], s, cy=-1.0)
    return _solution(prob, v)


def periodic_green_solve(prob, cert, m=None):
    """Periodic bounded solution by tail-truncated two-sided sums.

    Both sums are cut T steps out, where T is the first depth at which the
    certificate bound C^2 lam^T/(1-lam) * sup|w| falls below 1e-12; the
    result is exactly periodic because one period is computed and reused.
    """
    if prob.seq.period is None:
        raise PreconditionError("periodic_green_solve needs a periodic sequence")
    if m is None:
        m = prob.seq.period
    if m != prob.seq.period:
        raise PreconditionError(
            f"declared period {m} differs from the sequence period {prob.seq.period}")
    W = prob.w_bound
    T = 1
    while perron_constant(cert.C, cert.lam) * cert.lam ** T * W >= 1e-12:
        T += 1
    lo = prob.seq.lo
    v = {}
    for k in range(lo, lo + m):
        u = op_apply(cert.proj_at(k - T).P, prob.w_at(k - T))
        for i in range(k - T + 1, k + 1):
            u = _vec_add(op_apply(prob.seq.op_at(i - 1), u, check_loss=False),
                         op_apply(cert.proj_at(i).P, prob.w_at(i)))
            u = op_apply(cert.proj_at(i).P, u, check_loss=False)
        s = SeqVec.zero(prob.window, prob.p)
        for j in range(k + T - 1, k - 1, -1):
            drive = _vec_add(s, op_apply(cert.proj_at(j + 1).Q, prob.w_at(j + 1)))
            s = op_apply(prob.seq.op_at(j).inverse(), drive, check_loss=False)
            s = op_apply(cert.proj_at(j).Q, s, check_loss=False)
        v[k] = _vec_add(u, s, cy=-1.0)
    return _solution(prob, v, period=m, meta={"tail_depth": T})


def _op_sub(B, A):
    if B.kind == A.kind == "diag":
        return diag(B.domain, B.scalars - A.scalars)
    if B.kind == A.kind == "shift_diag" and B.shift == A.shift:
        return shift_diag(B.domain, B.scalars - A.scalars, B.shift)
    return dense(B.to_dense_matrix() - A.to_dense_matrix(), B.domain, B.codomain)


def neumann_perturbed_solve(prob_b, base_seq, base_cert, eps,
                            max_iter=200, tol=1e-13):
    """Bounded solution for B_k = A_k + Delta_k via the unperturbed solver.

    Iterates v <- S_A(w + Delta v), where S_A is the distinguished solver
    for the base sequence; successive differences contract by L*eps, so
    eps must stay below 1/(2L).  The difference norms are recorded in
    ``meta['diff_norms']`` and the final residual is taken against B.
    """
    L = perron_constant(base_cert.C, base_cert.lam)
    if not eps < 0.5 / L:
        raise PreconditionError(
            f"perturbation bound {eps:.3g} is not below 1/(2L) = {0.5 / L:.3g}")
    if (base_seq.lo, base_seq.hi) != (prob_b.seq.lo, prob_b.seq.hi):
        raise PreconditionError("base and perturbed sequences cover different intervals")
    a, b = base_seq.lo, base_seq.hi
    deltas = {}
    for k in range(a, b):
        d = _op_sub(prob_b.seq.op_at(k), base_seq.op_at(k))
        dn = op_norm(d, prob_b.p)
        if dn > eps * (1.0 + 1e-9) + 1e-15:
            raise PreconditionError(
                f"|Delta_{k}| = {dn:.3g} exceeds the declared bound {eps:.3g}")
        deltas[k] = d

    base = perron_solve(InhomProblem(base_seq, prob_b.w, prob_b.w_bound), base_cert)
    v = base.v
    diff_norms = []
    for _ in range(max_iter):
        forced = dict(prob_b.w)
        for k in range(a + 1, b + 1):
            dv = op_apply(deltas[k - 1], v[k - 1], check_loss=False)
            forced[k] = _vec_add(prob_b.w_at(k), dv)
        vn = perron_solve(InhomProblem(base_seq, forced), base_cert).v
        diff = max(norm(_vec_add(vn[k], v[k], cy=-1.0)) for k in vn)
        diff_norms.append(diff)
        v = vn
        if diff <= tol * (1.0 + max(norm(x) for x in v.values())):
            break
    else:
        raise ConvergenceError(
            f"perturbed solve did not converge in {max_iter} iterations "
            f"(last difference {diff_norms[-1]:.3g}); the perturbation "
            f"likely violates its bound")
    return _solution(prob_b, v, meta={"iterations": len(diff_norms),
                                      "diff_norms": diff_norms})


def banded_direct_solve(prob, cert, max_unknowns=20_000):
    """Independent oracle: one dense least-squares solve, no sums.

    Stacks the difference-equation blocks v_{k+1} - A_k v_k = w_{k+1} with
    two boundary blocks P_a v_a = 0 and Q_b v_b = 0 -- the conditions that
    single out the distinguished bounded solution (no stable content
    enters at the left end, no unstable content at the right end) -- and
    hands the whole thing to numpy's lstsq.
    """
    a, b = prob.seq.lo, prob.seq.hi
    n = prob.window.length
    steps = b - a
    if n * (steps + 1) > max_unknowns:
        raise PreconditionError(
            f"{n * (steps + 1)} unknowns exceed the dense-assembly cap {max_unknowns}")
    N = n * (steps + 1)
    rows = n * steps + 2 * n
    M = np.zeros((rows, N))
    rhs = np.zeros(rows)
    for k in range(a, b):
        r = n * (k - a)
        c = n * (k - a)
        M[r:r + n, c:c + n] = -prob.seq.op_at(k).to_dense_matrix()
        M[r:r + n, c + n:c + 2 * n] = np.eye(n)
        rhs[r:r + n] = prob.w_at(k + 1).coeffs
    M[n * steps:n * steps + n, :n] = cert.proj_at(a).P.to_dense_matrix()
    M[n * steps + n:, N - n:] = cert.proj_at(b).Q.to_dense_matrix()
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    v = {k: SeqVec(prob.window, sol[n * (k - a):n * (k - a + 1)], prob.p)
         for k in range(a, b + 1)}
    out = _solution(prob, v)
    if out.max_residual > 1e-8 * (1.0 + out.sup_norm):
        raise ConvergenceError(
            f"direct solve left residual {out.max_residual:.3g}; "
            f"the assembled system was not solved consistently")
    return out


def random_hyperbolic_instance(dim, length, rng, lam=0.5, lo=0, p=2.0):
    """A random dense hyperbolic sequence with unit-C splitting, plus forcing.

    Orthonormal frames U_k are drawn per time point and the operators are
    A_k = U_{k+1} D_k U_k^T with |D| in [lam/2, lam] on the stable block
    and [2, 3] on the unstable one, so the frame splitting is exactly
    invariant and decays at rate lam with C = 1.  Returns the problem and
    its certificate.
    """
    from .clstruct import ProjPair, CLCertificate
    from .seqcore import Window

    win = Window(lo, lo + dim - 1)
    s_dim = int(rng.integers(1, dim))
    frames = []
    for _ in range(length + 1):
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
        frames.append(q * np.sign(np.diag(r)))
    ops = []
    for k in range(length):
        mags = np.concatenate([rng.uniform(0.5 * lam, lam, s_dim),
                               rng.uniform(2.0, 3.0, dim - s_dim)])
        d = mags * rng.choice([-1.0, 1.0], dim)
        ops.append(dense(frames[k + 1] @ np.diag(d) @ frames[k].T, win))
    pairs = {}
    for k, U in enumerate(frames):
        Us = U[:, :s_dim]
        Ps = dense(Us @ Us.T, win)
        pairs[lo + k] = ProjPair(Ps, dense(np.eye(dim) - Us @ Us.T, win))
    cert = CLCertificate(1.0, lam, 3.5, lambda k: pairs[k],
                         meta={"stable_dim": s_dim})
    w = {}
    for k in range(lo + 1, lo + length + 1):
        raw = rng.standard_normal(dim)
        w[k] = SeqVec(win, rng.uniform(0.2, 1.0) * raw / np.linalg.norm(raw), p)
    return InhomProblem(OperatorSeq(lo, ops), w), cert
