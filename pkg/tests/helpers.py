"""Random valid scenarios shared by property and acceptance tests."""

import numpy as np

from hybridcov.network import Band, Blockage, NetworkConfig, Tier, db_to_linear, dbm_to_watts

BANDS = (Band.SUB6, Band.MMWAVE, Band.THZ)


def random_config(rng: np.random.Generator, bands=None) -> NetworkConfig:
    """A valid 1-4 tier scenario with log-uniform densities, powers and biases."""
    if bands is None:
        n = int(rng.integers(1, 5))
        bands = sorted(rng.choice(3, size=n), key=int)
        bands = [BANDS[int(b)] for b in bands]
    tiers = []
    for band in bands:
        common = dict(
            power_dl=float(dbm_to_watts(rng.uniform(15, 46))),
            power_ul=float(dbm_to_watts(rng.uniform(15, 30))),
            bias_dl=float(db_to_linear(rng.uniform(-10, 20))),
            bias_ul=float(db_to_linear(rng.uniform(-10, 20))),
        )
        if band is Band.SUB6:
            tiers.append(Tier(band, 10 ** rng.uniform(-6.5, -5), path_loss_exp=rng.uniform(3, 4.5),
                              bandwidth=1e7, intercept=float(db_to_linear(-38.5)), **common))
        elif band is Band.MMWAVE:
            tiers.append(Tier(band, 10 ** rng.uniform(-5.5, -4), path_loss_exp=rng.uniform(2, 3),
                              bandwidth=1e9, antennas=int(rng.choice([16, 32, 64])),
                              nakagami_shape=int(rng.integers(1, 5)), carrier=28e9, **common))
        else:
            tiers.append(Tier(band, 10 ** rng.uniform(-4.5, -3), path_loss_exp=2.0,
                              bandwidth=1e10, antennas=int(rng.choice([64, 100, 256])),
                              carrier=340e9, **common))
    return NetworkConfig(tiers=tuple(tiers),
                         blockage=Blockage(10 ** rng.uniform(-3.5, -2.7), rng.uniform(5, 20),
                                           rng.uniform(5, 20)),
                         ue_density=2e-3, absorption=10 ** rng.uniform(-3, -1.3),
                         thz_shape=int(rng.integers(1, 11)))


def random_configs(n: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    return [random_config(rng) for _ in range(n)]


# criterion -> (passed, detail), filled by the acceptance suite
ACCEPTANCE = {}


def report(criterion: str, passed: bool, detail: str):
    """Record and print one pass/fail line, then fail the test if needed."""
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    assert passed, line
