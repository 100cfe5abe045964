"""Test functions, estimating equations, fitting and covariance."""
