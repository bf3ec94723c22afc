"""Directional emission from collective atomic excitations."""

from ._core import (
    AtomGeometry,
    EmissionConfig,
    angular_width,
    bond_dimension_bound,
    build_chain,
    build_lattice,
    build_ring,
    collective_rate,
    collective_state,
    error_probability,
    f_box,
    f_direct,
    f_lattice,
    f_thermal,
    fit_power_law,
    gamma_kernel,
    mps_bond_dims,
    schmidt_ranks,
    simulate_preparation,
    solve_coulomb_chain,
    trajectory,
)

__all__ = [
    "AtomGeometry",
    "EmissionConfig",
    "angular_width",
    "bond_dimension_bound",
    "build_chain",
    "build_lattice",
    "build_ring",
    "collective_rate",
    "collective_state",
    "error_probability",
    "f_box",
    "f_direct",
    "f_lattice",
    "f_thermal",
    "fit_power_law",
    "gamma_kernel",
    "mps_bond_dims",
    "schmidt_ranks",
    "simulate_preparation",
    "solve_coulomb_chain",
    "trajectory",
]
