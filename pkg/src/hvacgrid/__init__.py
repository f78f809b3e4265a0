"""Building-HVAC differentiable predictive control and feeder co-simulation.

Subpackages:

* ``nn`` -- dense networks, exact gradients, Adam
* ``building`` -- RC thermal plant, deadband thermostat, training data
* ``node`` -- neural-ODE thermal model and its training
* ``dpc`` -- classifier, control policy, end-to-end policy training
* ``feeder`` -- radial power flow, regulators, capacitor banks, PV
* ``cosim`` -- minute-stepped controller/building/grid orchestration
* ``metrics`` -- voltage fluctuation, violations, tap wear, energy, comfort
* ``cli`` -- gen-data / train / simulate / report entry points
"""

__version__ = "0.1.0"
