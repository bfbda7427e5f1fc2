"""Classical Metropolis walks on local Ising models, their Szegedy quantization,
and time-to-solution benchmarks of annealing heuristics built on both."""

__version__ = "0.1.0"
