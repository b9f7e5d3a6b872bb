"""Pass-ordering autotuner, dataset builder, and evaluation harness.

The package is organized around one artifact: given a corpus of IR
functions and a compiler backend, find short pass lists that minimize
instruction count, serialize the results as training data for sequence
models, and score model predictions against the tuned baselines.
"""

__version__ = "0.1.0"
