"""Thermal light through a polarization grating and free space.

Analytic second-order coherence, joint photon-number statistics at two
detectors, and a Monte Carlo oracle that checks both.
"""

__version__ = "0.1.0"

from .source import (ConfigError, DerivedParams, PhysicalConfig, SourceModel, TransverseField,
                     default_config, derive_params, load_config, nu_from_z, sample_thermal_field,
                     sample_unpolarized, z_from_nu)
from .optics import (GratingMatrix, PropagatedField, apply_grating, fresnel_kernel, grating_matrix,
                     propagate)
from .correlators import (CoherenceCurve, PolSelector, UnsupportedSelector, g1_closed_form,
                          g2_closed_form, g2_quadrature, scan_curve, second_moment)
from .photonstats import (AmplitudeCovariance, JointPhotonDistribution, build_covariance,
                          g2_self_from_distribution, joint_photon_distribution,
                          multiphoton_g2_tilde)
from .oracle import McEstimate, McRunConfig, mc_g2, mc_photon_distribution

__all__ = [
    "ConfigError", "DerivedParams", "PhysicalConfig", "SourceModel", "TransverseField",
    "default_config", "derive_params", "load_config", "nu_from_z", "sample_thermal_field",
    "sample_unpolarized", "z_from_nu", "GratingMatrix", "PropagatedField", "apply_grating",
    "fresnel_kernel", "grating_matrix", "propagate", "CoherenceCurve", "PolSelector",
    "UnsupportedSelector", "g1_closed_form", "g2_closed_form", "g2_quadrature", "scan_curve",
    "second_moment", "AmplitudeCovariance", "JointPhotonDistribution", "build_covariance",
    "g2_self_from_distribution", "joint_photon_distribution", "multiphoton_g2_tilde",
    "McEstimate", "McRunConfig", "mc_g2", "mc_photon_distribution",
]
