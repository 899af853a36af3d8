import pytest

from qvcz.source import PhysicalConfig, default_config


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture(scope="session")
def small_config():
    """A small grating so that full 2-D field samples are cheap."""
    return PhysicalConfig(wavelength=780e-9, grating_width=2e-4, pixel_size=2e-5,
                          coherence_area=1e-10, alpha_mag=1.0, detector_separation=1e-4,
                          propagation_distance=1.0, seed=7)
