from .problem import ConicProblem, ConicSolution, Settings, solve

__all__ = ["ConicProblem", "ConicSolution", "Settings", "solve"]
