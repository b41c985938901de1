"""Density curves built from level-set intervals, with their energy slopes,
transport costs and analytic bounds."""

from .hs import (CONVEXITY_CONSTANT, ConvexityProfile, HsLinearAnalysis, default_M,
                 generalized_hs_linear_analysis, hs_linear_curve_analysis)
from .kinds import (CSS1, CSS2, RCSS, CurveKind, GeneralizedHsLinear, HsLinear, LocalCompression,
                    build_curve, curve_cost, evaluate_curve)
from .layers import LayerCurve, LayerData, flux_cost
from .lemmas import (MomentCheck, clustering_constant, clustering_inequality, clustering_radius,
                     dissipation_lower_bound, dissipation_shape, interval_pair_check,
                     mu_moment_inequalities, point_mass_check)
from .reports import (CurveReport, css1_bound, css2_bound, css2_bracket, energy_slopes,
                      local_compression_bound, rcss_bound)

__all__ = [name for name in dir() if not name.startswith("_")]
