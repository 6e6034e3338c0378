"""Transfer operators, Q-operators and their functional relations for U_q(L(sl_2)) and U_q(L(sl_3))."""

__version__ = "0.1.0"

from .core import LaurentOp, LaurentPoly, QError, QParams, op_eval, op_shift
from .affine import AffineRep, GradationS, TwistPhi, eval_rep, fundamental_rep
from .chain import ChainSpec, ConvergenceError, IntegrabilityOp, build_Q, build_T, q_limit_check
from .relations import OperatorSet, RelationConstants, ResidualReport, verify
