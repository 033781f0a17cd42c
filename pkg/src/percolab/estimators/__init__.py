"""Monte Carlo estimators, exponent fits and empirical inequality checks."""
from .core import *  # noqa: F401,F403
from .mc import mc_estimate, mc_indicators, two_point_sum  # noqa: F401
from .bernoulli import (check_lbb, check_two_arm_square, check_ubb1, check_ubb2,  # noqa: F401
                        correlation_length_estimate, decay_points, finite_difference_derivative,
                        fit_one_arm_exponent, one_arm_sweep, russo_derivative_estimate, theta_curve)
from .gaussian import (check_gaussian_russo, check_lbderiv, check_lbgf, check_square_symmetry,  # noqa: F401
                       check_truncation, check_two_arm_square_gaussian, check_ubgf, check_ubgf1,
                       check_ubgf2, gaussian_correlation_rate, gaussian_decay_points,
                       gaussian_theta_curve)
from .revealment import (check_annulus_bound, check_gaussian_line_bound, check_hyperplane_bound,  # noqa: F401
                         check_interface_bound, check_oracle_agreement, check_origin_cluster_bound,
                         determination_check, estimate_revealments)
