"""Certified López-Ros deformations of minimal surfaces on annuli."""

from .deform import DeformParams, DistanceIncreaser, increase_distance, lopez_ros_step
from .domain import AnnularDomain, ParameterGrid, annulus, build_exhaustion, urysohn_weights
from .errors import MSDLError
from .fluxctl import FluxHomotopy, FluxPrescriber, prescribe_flux
from .funspace import LaurentFunction
from .weierstrass import Immersion, WeierstrassData, catenoid, flux, preset

__version__ = "0.1.0"

__all__ = [
    "AnnularDomain",
    "DeformParams",
    "DistanceIncreaser",
    "FluxHomotopy",
    "FluxPrescriber",
    "Immersion",
    "LaurentFunction",
    "MSDLError",
    "ParameterGrid",
    "WeierstrassData",
    "annulus",
    "build_exhaustion",
    "catenoid",
    "flux",
    "increase_distance",
    "lopez_ros_step",
    "prescribe_flux",
    "preset",
    "urysohn_weights",
]
