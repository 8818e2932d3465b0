# Solver package initialization