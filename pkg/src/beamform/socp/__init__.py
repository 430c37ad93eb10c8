from .solver import (
    Cone, ConeProgram, ConeSolution, KktReport, SolverSettings, SOC, Zero,
    check_kkt, cone_violation, solve,
)
from .io import dump_program, load_program

__all__ = [
    "Cone", "ConeProgram", "ConeSolution", "KktReport", "SolverSettings", "SOC", "Zero",
    "check_kkt", "cone_violation", "solve", "dump_program", "load_program",
]
