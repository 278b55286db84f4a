"""Top-k linear-TV recommendation: behavior-first candidate selection with
preference-based re-ranking, plus behavior-only / preference-only / RRF
baselines, an evaluation harness, and a seeded synthetic data generator."""

__version__ = "0.1.0"
