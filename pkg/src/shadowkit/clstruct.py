"""Projection families and verifiers for hyperbolic splitting structures.

Three graded notions are checked numerically, all phrased through a pair of
complementary projections (P, Q) supplied per point or per index:

* the splitting structure for a diffeomorphism: bounded projections,
  forward-invariant stable images and backward-invariant unstable images
  (inclusions only), and two-sided exponential decay at rate (C, lam);
* the same for a sequence of invertible operators;
* exponential dichotomy, which upgrades the inclusions to equalities --
  checked through both "reverse" residuals Q_{k+1} A_k P_k and
  P_{k+1} A_k Q_k;
* the cocycle variant along orbits of a base map alpha.

Membership of a subspace image is always tested by composing projections
(e.g. stable-to-unstable leakage is the norm of Q_next . A . P), never by
computing bases; this keeps structured operators structured.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .seqcore import (
    SeqVec, norm, op_apply, op_norm, compose, identity_op,
    PreconditionError, TruncationError,
)

__all__ = [
    "ProjPair", "CLCertificate", "VerificationReport",
    "verify_cl_diffeo", "verify_cl_opseq", "verify_dichotomy",
    "verify_cocycle_cl", "constant_cert",
]

ALGEBRAIC_TOL = 1e-9
DECAY_TOL = 1e-6


@dataclass(frozen=True)
class ProjPair:
    """Complementary projections P + Q = Id encoding a splitting."""

    P: object
    Q: object

    def validate(self, p=2.0, tol=1e-10):
        """Check complementarity (to 1e-12) and idempotence (to tol)."""
        mp = self.P.to_dense_matrix()
        mq = self.Q.to_dense_matrix()
        eye = np.eye(mp.shape[0])
        if np.max(np.abs(mp + mq - eye)) > 1e-12:
            raise PreconditionError("P + Q differs from the identity")
        for m, label in ((mp, "P"), (mq, "Q")):
            if np.max(np.abs(m @ m - m)) > tol:
                raise PreconditionError(f"{label} is not idempotent")
        return True


@dataclass(frozen=True)
class CLCertificate:
    """Machine form of a splitting structure: constants plus projections.

    ``proj_at`` maps a point (SeqVec) or an index (int) -- depending on
    whether the certificate accompanies a diffeomorphism or an operator
    sequence -- to a ProjPair.
    """

    C: float
    lam: float
    R: float
    proj_at: object
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.C < 1.0:
            raise PreconditionError(f"certificate needs C >= 1, got {self.C}")
        if not 0.0 < self.lam < 1.0:
            raise PreconditionError(f"certificate needs lam in (0,1), got {self.lam}")


def constant_cert(C, lam, R, P, Q, **meta):
    """Certificate whose projections do not depend on the point/index."""
    pair = ProjPair(P, Q)
    return CLCertificate(C, lam, R, lambda _x: pair, meta=dict(meta))


@dataclass
class VerificationReport:
    max_proj_norm: float
    max_inclusion_residual: float
    worst_decay_ratio: float
    samples: int
    passed: bool
    C: float = math.nan
    lam: float = math.nan
    tol: float = ALGEBRAIC_TOL
    decay_tol: float = DECAY_TOL
    witnesses: dict = field(default_factory=dict)
    proj_lipschitz: float = math.nan
    notes: str = ""

    def to_json(self):
        d = {
            "max_proj_norm": self.max_proj_norm,
            "max_inclusion_residual": self.max_inclusion_residual,
            "worst_decay_ratio": self.worst_decay_ratio,
            "samples": self.samples,
            "pass": self.passed,
            "C": self.C, "lam": self.lam,
            "tol": self.tol, "decay_tol": self.decay_tol,
            "witnesses": self.witnesses,
            "notes": self.notes,
        }
        if not math.isnan(self.proj_lipschitz):
            d["proj_lipschitz"] = self.proj_lipschitz
        return json.dumps(d)


def _merge_pass(report):
    report.passed = (
        report.max_proj_norm <= report.C * (1 + report.decay_tol)
        and report.max_inclusion_residual <= report.tol
        and report.worst_decay_ratio <= 1 + report.decay_tol
    )
    return report


def _directions(pair_side, window, p, n_dirs, rng):
    """Unit directions spanning the image of a projection: every nonzero
    projected coordinate vector plus n_dirs random projected vectors."""
    dirs = []
    for j in window.indices():
        v = op_apply(pair_side, SeqVec.basis(window, j, p))
        nv = norm(v)
        if nv > 1e-14:
            dirs.append(v.with_coeffs(v.coeffs / nv))
    for _ in range(n_dirs):
        v = op_apply(pair_side, SeqVec(window, rng.standard_normal(window.length), p))
        nv = norm(v)
        if nv > 1e-12:
            dirs.append(v.with_coeffs(v.coeffs / nv))
    return dirs


def _decay_scan(dirs, ops, C, lam, witnesses, label):
    """Worst ratio |transport_n v| / (C lam^n) over unit dirs and n <= len(ops).

    ``ops`` is the list of operators applied in order (already the right
    direction: forward differentials for stable, backward inverses for
    unstable).  A direction whose transport reaches the window edge is
    scanned up to that step only -- dropping boundary mass silently could
    fake decay.
    """
    worst = 0.0
    for i, v in enumerate(dirs):
        u = v
        for n, A in enumerate(ops, start=1):
            try:
                u = op_apply(A, u)
            except TruncationError:
                break
            ratio = norm(u) / (C * lam ** n)
            if ratio > worst:
                worst = ratio
                witnesses[label] = {"direction": i, "n": n, "ratio": ratio}
    return worst


def _orbit_ops(op_at, step, x, horizon):
    """Differentials along an orbit, stopping early at the window guard."""
    ops, y = [], x
    for _ in range(horizon):
        try:
            A = op_at(y)
            y = step(y)
        except TruncationError:
            break
        ops.append(A)
    return ops


def _proj_lipschitz(pairs_pts, p):
    """Crude Lipschitz estimate of x -> P_x over consecutive sampled pairs.

    Recorded for diagnostics only (the continuity hypothesis has no finite
    certificate); never asserted.
    """
    worst = 0.0
    for (x1, P1), (x2, P2) in zip(pairs_pts, pairs_pts[1:]):
        dx = norm(SeqVec(x1.window, x1.coeffs - x2.coeffs, p))
        if dx < 1e-12:
            continue
        dP = np.max(np.abs(P1.to_dense_matrix() - P2.to_dense_matrix()))
        worst = max(worst, dP / dx)
    return worst


def verify_cl_diffeo(sys, cert, points, horizon=12, n_dirs=16,
                     tol=ALGEBRAIC_TOL, decay_tol=DECAY_TOL, seed=0):
    """Check the splitting structure of a diffeomorphism at sampled points.

    Per point x: projection norms <= C; one-step leakage residuals
    |Q_{f(x)} Df(x) P_x| and |P_{f^{-1}(x)} Df^{-1}(x) Q_x| <= tol; decay of
    stable directions under forward differentials and of unstable
    directions under backward differentials for n <= horizon, against
    C lam^n, over all window coordinate directions plus n_dirs random ones.
    """
    rng = np.random.default_rng(seed)
    rep = VerificationReport(0.0, 0.0, 0.0, 0, False, C=cert.C, lam=cert.lam,
                             tol=tol, decay_tol=decay_tol)
    sampled_pairs = []
    for pt_idx, x in enumerate(points):
        pair = cert.proj_at(x)
        pair.validate(p=x.p)
        sampled_pairs.append((x, pair.P))
        pn = max(op_norm(pair.P, x.p), op_norm(pair.Q, x.p))
        if pn > rep.max_proj_norm:
            rep.max_proj_norm = pn
            rep.witnesses["proj_norm"] = {"point": pt_idx, "norm": pn}

        fx = sys.forward(x)
        fix = sys.inverse(x)
        pair_f = cert.proj_at(fx)
        pair_b = cert.proj_at(fix)
        res_s = op_norm(compose(pair_f.Q, compose(sys.dforward(x), pair.P)), x.p)
        res_u = op_norm(compose(pair_b.P, compose(sys.dinverse(x), pair.Q)), x.p)
        res = max(res_s, res_u)
        if res > rep.max_inclusion_residual:
            rep.max_inclusion_residual = res
            rep.witnesses["inclusion"] = {"point": pt_idx, "residual": res}

        # forward orbit differentials / backward orbit inverse differentials,
        # shortened when the orbit reaches the window guard
        fwd_ops = _orbit_ops(sys.dforward, sys.forward, x, horizon)
        bwd_ops = _orbit_ops(sys.dinverse, sys.inverse, x, horizon)

        sdirs = _directions(pair.P, x.window, x.p, n_dirs, rng)
        udirs = _directions(pair.Q, x.window, x.p, n_dirs, rng)
        ws = _decay_scan(sdirs, fwd_ops, cert.C, cert.lam,
                         rep.witnesses, f"decay_stable@{pt_idx}")
        wu = _decay_scan(udirs, bwd_ops, cert.C, cert.lam,
                         rep.witnesses, f"decay_unstable@{pt_idx}")
        rep.worst_decay_ratio = max(rep.worst_decay_ratio, ws, wu)
        rep.samples += 1 + len(sdirs) + len(udirs)
    rep.proj_lipschitz = _proj_lipschitz(sampled_pairs, points[0].p if points else 2.0)
    return _merge_pass(rep)


def _opseq_window_p(seq):
    dom = seq.ops[0].domain
    return dom, 2.0


def verify_cl_opseq(seq, cert, horizon=12, n_dirs=16,
                    tol=ALGEBRAIC_TOL, decay_tol=DECAY_TOL, seed=0,
                    p=2.0, indices=None, dichotomy=False):
    """Check the splitting structure of an operator sequence.

    Indices run over the sequence interval (one period when the sequence is
    periodic).  Stable decay is checked through forward products, unstable
    decay through inverse products; horizons truncate at the interval ends
    for aperiodic sequences and wrap for periodic ones.  With
    ``dichotomy=True`` the reverse leakage residual |P_{k+1} A_k Q_k| is
    included, turning the invariance inclusions into equalities.
    """
    rng = np.random.default_rng(seed)
    window, _ = _opseq_window_p(seq)
    rep = VerificationReport(0.0, 0.0, 0.0, 0, False, C=cert.C, lam=cert.lam,
                             tol=tol, decay_tol=decay_tol)
    if indices is None:
        if seq.period is not None:
            indices = range(seq.lo, seq.lo + seq.period)
        else:
            indices = range(seq.lo, seq.hi + 1)
    indices = list(indices)

    for k in indices:
        pair = cert.proj_at(k)
        pair.validate(p=p)
        pn = max(op_norm(pair.P, p), op_norm(pair.Q, p))
        if pn > rep.max_proj_norm:
            rep.max_proj_norm = pn
            rep.witnesses["proj_norm"] = {"index": k, "norm": pn}

        has_next = seq.period is not None or k < seq.hi
        if has_next:
            A = seq.op_at(k)
            pair_n = cert.proj_at(k + 1)
            res = op_norm(compose(pair_n.Q, compose(A, pair.P)), p)
            if dichotomy:
                res = max(res, op_norm(compose(pair_n.P, compose(A, pair.Q)), p))
            if res > rep.max_inclusion_residual:
                rep.max_inclusion_residual = res
                rep.witnesses["inclusion"] = {"index": k, "residual": res}

        if seq.period is not None:
            n_fwd = n_bwd = horizon
        else:
            n_fwd = min(horizon, seq.hi - k)
            n_bwd = min(horizon, k - seq.lo)
        fwd_ops = [seq.op_at(k + j) for j in range(n_fwd)]
        bwd_ops = [seq.op_at(k - 1 - j).inverse() for j in range(n_bwd)]

        sdirs = _directions(pair.P, window, p, n_dirs, rng)
        udirs = _directions(pair.Q, window, p, n_dirs, rng)
        ws = _decay_scan(sdirs, fwd_ops, cert.C, cert.lam,
                         rep.witnesses, f"decay_stable@{k}")
        wu = _decay_scan(udirs, bwd_ops, cert.C, cert.lam,
                         rep.witnesses, f"decay_unstable@{k}")
        rep.worst_decay_ratio = max(rep.worst_decay_ratio, ws, wu)
        rep.samples += 1 + len(sdirs) + len(udirs)
    return _merge_pass(rep)


def verify_dichotomy(seq, cert, side="Z", horizon=12, n_dirs=16,
                     tol=ALGEBRAIC_TOL, decay_tol=DECAY_TOL, seed=0, p=2.0):
    """Exponential dichotomy check on Z+, Z- or Z (within the interval).

    Same checks as verify_cl_opseq plus the reverse leakage residual, so a
    merely-included (not equal) invariant family fails here while passing
    the plain splitting check.
    """
    if side not in ("Z", "Z+", "Z-"):
        raise PreconditionError(f"side must be 'Z', 'Z+' or 'Z-', got {side!r}")
    if seq.period is not None:
        indices = range(seq.lo, seq.lo + seq.period)
    else:
        lo, hi = seq.lo, seq.hi
        if side == "Z+":
            lo = max(lo, 0)
        elif side == "Z-":
            hi = min(hi, 0)
        if lo > hi:
            raise PreconditionError(f"interval does not meet {side}")
        indices = range(lo, hi + 1)
    rep = verify_cl_opseq(seq, cert, horizon=horizon, n_dirs=n_dirs, tol=tol,
                          decay_tol=decay_tol, seed=seed, p=p,
                          indices=indices, dichotomy=True)
    rep.notes = f"dichotomy check on {side}"
    return rep


def verify_cocycle_cl(sys, A, cert, points, horizon=12, n_dirs=16,
                      tol=ALGEBRAIC_TOL, decay_tol=DECAY_TOL, seed=0):
    """Check the cocycle splitting property of a pair (alpha, A).

    ``sys`` supplies the base map alpha (forward/inverse); ``A`` maps a
    point to the LinOp above it.  The inverse cocycle factor at x is
    (A(alpha^{-1} x))^{-1}, so unstable decay multiplies those along the
    backward orbit.  Horizon counts orbit steps.
    """
    rng = np.random.default_rng(seed)
    rep = VerificationReport(0.0, 0.0, 0.0, 0, False, C=cert.C, lam=cert.lam,
                             tol=tol, decay_tol=decay_tol)
    for pt_idx, x in enumerate(points):
        pair = cert.proj_at(x)
        pair.validate(p=x.p)
        pn = max(op_norm(pair.P, x.p), op_norm(pair.Q, x.p))
        if pn > rep.max_proj_norm:
            rep.max_proj_norm = pn
            rep.witnesses["proj_norm"] = {"point": pt_idx, "norm": pn}

        ax = sys.forward(x)
        bx = sys.inverse(x)
        res_s = op_norm(compose(cert.proj_at(ax).Q, compose(A(x), pair.P)), x.p)
        res_u = op_norm(compose(cert.proj_at(bx).P,
                                compose(A(bx).inverse(), pair.Q)), x.p)
        res = max(res_s, res_u)
        if res > rep.max_inclusion_residual:
            rep.max_inclusion_residual = res
            rep.witnesses["inclusion"] = {"point": pt_idx, "residual": res}

        fwd_ops = _orbit_ops(A, sys.forward, x, horizon)
        bwd_ops, y = [], x
        for _ in range(horizon):
            try:
                y = sys.inverse(y)
            except TruncationError:
                break
            bwd_ops.append(A(y).inverse())

        sdirs = _directions(pair.P, x.window, x.p, n_dirs, rng)
        udirs = _directions(pair.Q, x.window, x.p, n_dirs, rng)
        ws = _decay_scan(sdirs, fwd_ops, cert.C, cert.lam,
                         rep.witnesses, f"decay_stable@{pt_idx}")
        wu = _decay_scan(udirs, bwd_ops, cert.C, cert.lam,
                         rep.witnesses, f"decay_unstable@{pt_idx}")
        rep.worst_decay_ratio = max(rep.worst_decay_ratio, ws, wu)
        rep.samples += 1 + len(sdirs) + len(udirs)
    return _merge_pass(rep)
