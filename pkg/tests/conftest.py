import pytest

from junctionfab.features.dataset import JunctionDataset, JunctionRecord
from junctionfab.features.geometry import Regime


def record(chip_id="C1", x=5.0, y=5.0, group="0.025", area=0.0255, r=None,
           regime=Regime.FULL, lw_top=150.0, lw_bot=170.0):
    if r is None and regime is not Regime.NONE:
        r = 250.0 / area
    return JunctionRecord(
        chip_id=chip_id, x_mm=x, y_mm=y, group=group, nom_w_nm=170.0, nom_l_nm=150.0,
        lw_top_nm=lw_top, lw_bot_nm=lw_bot, regime=regime,
        area_um2=area if regime is not Regime.NONE else 0.0, r_ohm=r,
    )


@pytest.fixture
def make_record():
    return record


@pytest.fixture
def small_dataset():
    """Two groups on two chips, one junction without overlap."""
    records = []
    for chip, x0 in (("C1", 2.0), ("C2", 12.0)):
        for k in range(6):
            records.append(record(chip_id=chip, x=x0 + k, y=3.0 + k, group="0.025",
                                  area=0.0255 * (1 + 0.01 * (k - 2.5))))
            records.append(record(chip_id=chip, x=x0 + k, y=14.0 - k, group="0.120",
                                  area=0.12 * (1 + 0.02 * (k - 2.5))))
    records.append(record(chip_id="C2", x=20.0, y=20.0, group="0.025", regime=Regime.NONE))
    return JunctionDataset(records=records)
