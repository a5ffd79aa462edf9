"""Physical constants and default experimental parameters.

All frequencies are stored as angular frequencies (rad/s) unless a name says
otherwise.  Rates quoted from spectroscopy (gamma, kappa) follow the
half-width convention: populations decay at twice the quoted rate.  Loss and
transmission values are dimensionless fractions internally; ppm appears only
at I/O boundaries.
"""

import math

# fundamental
C_LIGHT = 299_792_458.0          # vacuum speed of light, m/s
MU_B_OVER_H = 1.39962e6          # Bohr magneton / h, Hz per gauss
HBAR = 1.0545718e-34             # J s
ATOMIC_MASS = 1.66053907e-27     # kg

TWO_PI = 2.0 * math.pi

# 40Ca+ defaults
CA40_MASS = 39.9626 * ATOMIC_MASS
GAMMA_P32 = TWO_PI * 11.49e6     # total P3/2 decay rate (half width), rad/s
BRANCHING_S12 = 0.9347           # P3/2 -> S1/2
BRANCHING_D32 = 0.00661          # P3/2 -> D3/2
BRANCHING_D52 = 0.0587           # P3/2 -> D5/2
B_FIELD_GAUSS = 4.23

# cavity defaults (near-concentric 854 nm cavity)
CAVITY_LENGTH = 19.906e-3        # m
MIRROR_ROC = 9.984e-3            # m
WAVELENGTH = 854e-9              # m
T1 = 2.9e-6                      # back-mirror transmission
T2 = 90e-6                       # output-mirror transmission
SCATTER_ABSORB = 23e-6           # other round-trip loss
ALPHA_LOSS = T1 + SCATTER_ABSORB

# drive defaults
DETUNING = -TWO_PI * 403e6       # common drive/cavity detuning from P3/2, rad/s
DRIVE_WAVELENGTH = 393e-9        # m
LOCK_JITTER_RATE = TWO_PI * 10e3  # cavity-lock dephasing rate, rad/s

# detection path defaults
P_EL = 0.97                      # optical elements
P_FC = 0.81                      # fiber coupling
P_DET = 0.87                     # detector efficiency

# motional defaults (axial mode of the linear trap)
ETA_AXIAL = 0.13                 # Lamb-Dicke parameter of the drive on the axial mode
NBAR_DEFAULT = 0.5               # mean phonon number after sideband cooling
TRAP_FREQS = (TWO_PI * 0.92e6, TWO_PI * 2.40e6, TWO_PI * 2.44e6)
