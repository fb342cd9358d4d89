"""socsim: a society-centric microkernel for multi-agent social simulation.

A stable core (Agent, Environment, Action, Controller, System) hosts
hot-swappable plugins with database-per-plugin persistence, whole-simulation
snapshot/rollback, and a pod-based runtime whose event logs are deterministic
for a given seed and configuration, independent of how agents are partitioned
across pods.
"""

__version__ = "0.1.0"
