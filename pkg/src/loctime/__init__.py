"""Local times of continuous-time simple random walk on the torus Z_N^2.

Simulation of walks to hitting, cover, fixed and inverse-local-time
horizons; exact Green's function oracles; nested-annulus excursion
bookkeeping; the pinned Gaussian free field and its couplings with the
local-time field; and a seeded experiment harness.
"""
from .excursion import (ExcursionBudget, ExcursionRecord, LabRadii, MultiscaleConfig,
                        PaperRadii, TargetCounts, excursion_trace, lab_radii, multiscale_radii,
                        qn_exact, qn_log, target_counts)
from .gff import (GffCovariance, clt_drift_check, domination_check, gff_covariance,
                  gff_level_census, gff_sample, ray_knight_check)
from .green import (green_exact, green_log_residual, green_matrix, hitting_prob_exact,
                    kac_moment, laplace_excursion_transform)
from .kernels import BACKEND
from .torus import ORIGIN, PointSet, TorusPoint, ball, ball_boundary, boundary
from .walker import (CoverTime, FixedTime, HitSet, InverseLocalTime, LocalTimeField,
                     WalkConfig, cover_time_theory, inverse_local_time, run_until, t_theta)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ORIGIN", "PointSet", "TorusPoint", "ball", "ball_boundary", "boundary",
    "CoverTime", "FixedTime", "HitSet", "InverseLocalTime", "LocalTimeField", "WalkConfig",
    "cover_time_theory", "inverse_local_time", "run_until", "t_theta",
    "green_exact", "green_log_residual", "green_matrix", "hitting_prob_exact", "kac_moment",
    "laplace_excursion_transform",
    "ExcursionBudget", "ExcursionRecord", "LabRadii", "MultiscaleConfig", "PaperRadii",
    "TargetCounts", "excursion_trace", "lab_radii", "multiscale_radii", "qn_exact", "qn_log",
    "target_counts",
    "GffCovariance", "clt_drift_check", "domination_check", "gff_covariance",
    "gff_level_census", "gff_sample", "ray_knight_check",
]
