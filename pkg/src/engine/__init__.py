# Simulation and analysis engine for eeesim
