"""Physical constants shared across the package (SI units)."""

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23
T_REF = 290.0
NOISE_DENSITY_REF = BOLTZMANN * T_REF  # W/Hz at 290 K, before noise figure

# Target closer than this to any radar is rejected as degenerate.
MIN_RANGE_M = 1.0


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)
