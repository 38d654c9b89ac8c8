"""Monotone-inclusion solvers and the SVM benchmark harness."""
