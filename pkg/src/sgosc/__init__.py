"""Speed-gradient energy control of a damped quantum harmonic oscillator.

Averaged (E, Q, P) model, the control laws, closed-loop simulation,
stability and positivity certificates, and a master-equation oracle.
"""

from .analysis import (
    cooling_floor,
    exponential_rate_fit,
    finite_form_solution,
    lyapunov_matrix,
    lyapunov_v1,
    positivity_bound,
    positivity_verdict,
    stability_condition_dr,
)
from .config import load_config, resolve
from .controllers import (
    Controller,
    ControllerConfig,
    ControllerMemory,
    Law,
    SgaGains,
    goal_speed,
    incoherent_exponential,
    incoherent_finite,
    sga_d_rhs,
    sga_dr_rhs,
    sga_f,
)
from .integrator import Scenario, Trajectory, rk4_step, simulate, simulate_continuous, simulate_sampled
from .model import (
    ControlInput,
    MeanState,
    OscillatorParams,
    Target,
    mean_field_rhs,
    n_from_temperature,
    objective,
)

__version__ = "0.1.0"

__all__ = [
    "ControlInput",
    "Controller",
    "ControllerConfig",
    "ControllerMemory",
    "Law",
    "MeanState",
    "OscillatorParams",
    "Scenario",
    "SgaGains",
    "Target",
    "Trajectory",
    "cooling_floor",
    "exponential_rate_fit",
    "finite_form_solution",
    "goal_speed",
    "incoherent_exponential",
    "incoherent_finite",
    "load_config",
    "lyapunov_matrix",
    "lyapunov_v1",
    "mean_field_rhs",
    "n_from_temperature",
    "objective",
    "positivity_bound",
    "positivity_verdict",
    "resolve",
    "rk4_step",
    "sga_d_rhs",
    "sga_dr_rhs",
    "sga_f",
    "simulate",
    "simulate_continuous",
    "simulate_sampled",
    "stability_condition_dr",
]
