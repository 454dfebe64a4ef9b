"""Loss minimization at fixed shift and search over the shift."""
from .model import (ConstraintViolation, EmptyBlockInfeasible, IlpModel, MalformedSolution,
                    ObjectiveMismatch, build_model, export_lp, import_solution, lp_text,
                    read_solution, write_solution)
from .search import SearchTrace, Step, evaluate_n, search_over_n
from .solver import Budget, BudgetExceeded, SolveResult, solve_exact

__all__ = [
    "Budget", "BudgetExceeded", "ConstraintViolation", "EmptyBlockInfeasible", "IlpModel",
    "MalformedSolution", "ObjectiveMismatch", "SearchTrace", "SolveResult", "Step", "build_model",
    "evaluate_n", "export_lp", "import_solution", "lp_text", "read_solution", "search_over_n",
    "solve_exact", "write_solution",
]
