"""Incompressible Euler flow as a velocity trajectory.

Taylor-Green and shear flows are steady; a random band-limited field
evolves, but keeps its kinetic energy.  The normalized Euler residual of
the sampled trajectory shrinks like the square of the sampling stride.
"""
from mixflow import Grid, euler_residual, integrate_euler
from mixflow.initial import random_velocity, shear, taylor_green

g = Grid(64, 64)
for name, v0 in [("taylor-green", taylor_green(g)), ("shear", shear(g))]:
    tr = integrate_euler(v0, 1.0, 1e-2, stride=100)
    print(f"{name:12s} drift from initial state {(tr.velocities[-1] - v0).norm() / v0.norm():.1e}")

v0 = random_velocity(g, seed=1, kmax=3, amplitude=0.5)
for stride in (20, 10, 5):
    tr = integrate_euler(v0, 1.0, 1e-2, stride=stride)
    print(f"random, stride {stride:2d}: energy drift {tr.energy_drift:.1e}  "
          f"max residual {euler_residual(tr).max():.2e}")
