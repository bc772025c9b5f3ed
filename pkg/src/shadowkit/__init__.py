"""shadowkit: shadowing, hyperbolic splittings and bounded-solution solvers
for sequence dynamics on windowed l^p(Z)."""

__version__ = "0.1.0"

from .seqcore import (  # noqa: F401
    Window, SeqVec, LinOp, OperatorSeq,
    norm, op_apply, op_norm, cocycle,
    dense, diag, shift_diag, identity_op,
    PreconditionError, TruncationError,
)
from .semiconj import (  # noqa: F401
    ConjugacyJob, make_conjugacy_job, h1_at, h2_at,
    orbit_perron_apply, required_truncation,
    semiconjugacy_report, continuity_probe, translate_system,
)
