"""Graph random features: unbiased random-walk estimators of graph node kernels."""
