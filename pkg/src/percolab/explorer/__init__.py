"""Randomised exploration algorithms with revealment accounting."""
from .base import (AlgorithmError, AlgorithmSpec, AlgorithmTrace, InvalidGeometry,
                   RevealmentTable, merge_tables, run_algorithm)
from .bond import (FullReveal, HyperplaneSweep, Interface, OriginCluster, alg_hyperplane_sweep,
                   alg_interface, alg_origin_cluster)
from .field import (AnnulusSeed, FieldAlgorithm, FieldBoxGeometry, GaussianLevelLine, GaussianLine,
                    GaussianOneArm, alg_annulus_seed, alg_gaussian_left_line, alg_gaussian_levelline,
                    alg_gaussian_line, alg_gaussian_one_arm)
