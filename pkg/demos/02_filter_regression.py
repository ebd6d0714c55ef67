"""Show the measurable regression produced by the filter bank.

Six stable filters driven only by (u, y) generate a scalar signal qbar and
a 27-entry regressor whose product with the stacked true parameters equals
qbar once the zero-initial-condition transients die.  Two regressor entries
coincide identically, which is what licenses the reduction to a 5-entry
regressor.  A shortened run (engagement at t = 6 s) makes the transient
decay visible.
"""

import numpy as np

from adobs.example_system import ExampleConfig
from adobs.scenario import Scenario, simulate

cfg = ExampleConfig(t_end=20.0, t_eps=6.0, dt=5e-4, drem_window=4.0)
sim = simulate(Scenario(params=cfg, observer="proposed", decimation=20))
d = sim["data"]
t = d["t"]

gap = np.abs(d["qbar"] - d["phibar_eta_true"])
print("identity gap |qbar - phibar . eta| at selected times:")
for tt in (1.0, 3.0, 6.0, 10.0, 15.0, 20.0):
    i = int(np.argmin(np.abs(t - tt)))
    print(f"  t = {tt:5.1f} s   gap = {gap[i]:.3e}   (qbar = {d['qbar'][i]:+.3f})")
print("the gap decays with the slowest filter pole; after engagement it is "
      "pure integration noise")

print("\nstructural regressor coincidences (exact for any input):")
print(f"  max |entry2 - entry8|  = {d['eq39_gap_1'].max():.3e}")
print(f"  max |entry6 - entry20| = {d['eq39_gap_2'].max():.3e}")

print("\nreduced regressor components at t = 10 s:")
i = int(np.argmin(np.abs(t - 10.0)))
print(" ", [f"{d[f'phibar_{j + 1}'][i]:+.4f}" for j in range(5)])
print("true reduced parameters:", sim["realization"].eta.tolist())
