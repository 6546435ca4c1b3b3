"""Unit conversions. Energies are carried internally in GHz."""

GHZ_PER_CM = 29.9792458
MU_B_GHZ_PER_T = 13.9962449
K_B_GHZ_PER_K = 20.8366122
# Tesla per Kelvin: converts an exchange energy J/k_B into a field acting on one Bohr magneton
K_B_OVER_MU_B = K_B_GHZ_PER_K / MU_B_GHZ_PER_T
