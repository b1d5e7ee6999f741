r"""
An evaluator for a fixpoint logic over fields of values living on the nodes of a graph,
together with a small imperative language of label assignments built on it.

Terminology
===========
- a *field* is a directed graph whose nodes carry *node labels* (a value per node,
    all drawn from one domain) and whose edges carry *edge labels* (capabilities).
- a *domain* is a complete lattice of values; fixpoints are computed by iteration
    over domains without infinite chains.
- a *capability* transforms the value read across an edge before a modal formula
    aggregates the values of a node's neighbours.
- a *program* assigns formulas to labels, branches and loops on Boolean guards
    which must hold at every node.
- a program in *simple assignment form* has fixpoint-free guards and assignments
    computable by one local step per node, which is what the distributed simulator runs.
"""
# importing these registers the case-study functions alongside the built-in ones
import smuc.rescue  # noqa: F401  # pylint:disable=unused-import
from smuc.config import SmucSettings
from smuc.domains import parse_domain
from smuc.evaluation import Environment, Evaluator, eval_formula, eval_trace
from smuc.field import Field, load_field, load_field_file
from smuc.formula import parse_formula
from smuc.program import parse_program, run
from smuc.version import version as __version__  # noqa

__all__ = [
    "Environment",
    "Evaluator",
    "Field",
    "SmucSettings",
    "eval_formula",
    "eval_trace",
    "load_field",
    "load_field_file",
    "parse_domain",
    "parse_formula",
    "parse_program",
    "run",
]
