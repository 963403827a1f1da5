"""Built-in benchmark: planar UAV double integrator with gusty input noise.

The vehicle model is a sampled double integrator per axis (dt = 0.5); the
disturbance enters through the input channel, with a skewed two-component
Gaussian mixture gust along the first axis and a mild Gaussian gust along
the second.  Internally the input-channel noise is folded into the state
equation (effective disturbance Bw) with statistics transformed
accordingly.
"""

import numpy as np

from . import noise as noise_mod
from .problem import ProblemSpec

UAV_A = np.array([
    [1.0, 0.5, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.5],
    [0.0, 0.0, 0.0, 1.0],
])
UAV_B = np.array([
    [0.125, 0.0],
    [0.5, 0.0],
    [0.0, 0.125],
    [0.0, 0.5],
])
UAV_Q = np.diag([1.0, 0.1, 2.0, 0.2])
UAV_R = np.eye(2)


def uav_input_noise():
    """Input-channel gust model: w1 ~ 0.8 N(3, 30) + 0.2 N(8, 60), w2 ~ N(0, 0.01).

    The strong gust N(8, 60) is the rare component.  With the weights the
    other way around the benchmark's risk budgets fall below the
    attainable floor 4 tr{(WQ)^2} of the constraint and the whole
    experiment is infeasible, so this assignment is the only one the
    benchmark can run under.
    """
    return noise_mod.GaussianMixture(
        weights=[0.8, 0.2],
        means=[[3.0, 0.0], [8.0, 0.0]],
        covs=[np.diag([30.0, 0.01]), np.diag([60.0, 0.01])],
    )


def uav_problem(rho=None, rho_bar=15.0, m4_draws=noise_mod.MIXTURE_M4_DRAWS,
                m4_seed=noise_mod.MIXTURE_M4_SEED):
    """UAV problem instance with the gust noise folded into state form.

    Default budget is the reformulated ``rho_bar = 15``; pass ``rho``
    (e.g. 8) to specify the original predictive-variance budget instead.
    """
    effective = noise_mod.transform(uav_input_noise(), UAV_B)
    if rho is not None:
        rho_bar = None
    return ProblemSpec.create(
        UAV_A, UAV_B, UAV_Q, UAV_R, effective, rho=rho, rho_bar=rho_bar,
        m4_draws=m4_draws, m4_seed=m4_seed,
    )
