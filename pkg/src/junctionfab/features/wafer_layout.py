"""Substrate, chip and junction-site layout."""
from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Chip(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str
    origin: tuple[float, float]  # mm, lower-left corner
    size: tuple[float, float] = (5.0, 10.0)  # mm

    def contains(self, x: float, y: float) -> bool:
        return (self.origin[0] <= x <= self.origin[0] + self.size[0]
                and self.origin[1] <= y <= self.origin[1] + self.size[1])


class AreaGroup(BaseModel):
    """Nominal mask dimensions of one junction family.

    ``tilt_nm`` is the bottom-electrode window along the tilt axis (the
    overlapped dimension), ``transverse_nm`` the top-electrode linewidth.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    tilt_nm: float = Field(gt=0)
    transverse_nm: float = Field(gt=0)

    @property
    def nominal_area(self) -> float:
        return self.tilt_nm * self.transverse_nm / 1.0e6


class Site(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    chip_id: str
    x: float  # mm
    y: float  # mm
    nom_w: float = Field(gt=0)  # nm, tilt axis
    nom_l: float = Field(gt=0)  # nm, transverse
    group: str


class WaferLayout(BaseModel):
    """Chips on a square substrate with junction sites.

    When ``sites`` is left empty it is filled with a regular grid of
    ``site_pitch`` on every chip, cycling through ``groups`` so that every
    chip carries every group.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    substrate_size: tuple[float, float] = (22.0, 22.0)
    chips: list[Chip] = Field(default_factory=list)
    groups: list[AreaGroup] = Field(default_factory=list)
    site_pitch: float = Field(default=0.25, gt=0)  # mm
    sites: list[Site] = Field(default_factory=list)

    @model_validator(mode="after")
    def _fill_and_check(self) -> "WaferLayout":
        w, h = self.substrate_size
        for chip in self.chips:
            x0, y0 = chip.origin
            if x0 < 0 or y0 < 0 or x0 + chip.size[0] > w or y0 + chip.size[1] > h:
                raise ValueError(f"chip {chip.id} extends beyond the substrate")
        if not self.sites and self.groups:
            object.__setattr__(self, "sites", self._grid_sites())
        by_id = {c.id: c for c in self.chips}
        for site in self.sites:
            chip = by_id.get(site.chip_id)
            if chip is None:
                raise ValueError(f"site refers to unknown chip {site.chip_id}")
            if not chip.contains(site.x, site.y):
                raise ValueError(f"site ({site.x}, {site.y}) outside chip {site.chip_id}")
        return self

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * self.substrate_size[0], 0.5 * self.substrate_size[1])

    def _grid_sites(self) -> list[Site]:
        sites: list[Site] = []
        for chip in self.chips:
            nx = max(1, int(round(chip.size[0] / self.site_pitch)))
            ny = max(1, int(round(chip.size[1] / self.site_pitch)))
            for iy in range(ny):
                for ix in range(nx):
                    group = self.groups[(ix + iy) % len(self.groups)]
                    sites.append(Site(
                        chip_id=chip.id,
                        x=chip.origin[0] + (ix + 0.5) * chip.size[0] / nx,
                        y=chip.origin[1] + (iy + 0.5) * chip.size[1] / ny,
                        nom_w=group.tilt_nm,
                        nom_l=group.transverse_nm,
                        group=group.name,
                    ))
        return sites


def six_chip_frame() -> list[Chip]:
    """Six 5×10 mm² chips in two rows of three on the 22×22 mm² substrate."""
    chips = []
    for row, y0 in enumerate((1.0, 11.0)):
        for col, x0 in enumerate((1.0, 8.5, 16.0)):
            chips.append(Chip(id=f"C{row * 3 + col + 1}", origin=(x0, y0)))
    return chips


REFERENCE_GROUPS = [
    AreaGroup(name="0.008", tilt_nm=80.0, transverse_nm=100.0),
    AreaGroup(name="0.010", tilt_nm=100.0, transverse_nm=100.0),
    AreaGroup(name="0.012", tilt_nm=110.0, transverse_nm=110.0),
    AreaGroup(name="0.025", tilt_nm=150.0, transverse_nm=170.0),
    AreaGroup(name="0.120", tilt_nm=200.0, transverse_nm=600.0),
]

CORRELATION_GROUPS = [REFERENCE_GROUPS[0], REFERENCE_GROUPS[3], REFERENCE_GROUPS[4]]

OVERLAY_GROUPS = [
    AreaGroup(name="0.036", tilt_nm=240.0, transverse_nm=150.0),
    AreaGroup(name="0.110", tilt_nm=240.0, transverse_nm=460.0),
]


def reference_wafer_layout(site_pitch: float = 0.25) -> WaferLayout:
    """Five area groups on six chips, 4800 sites at the default pitch."""
    return WaferLayout(chips=six_chip_frame(), groups=REFERENCE_GROUPS, site_pitch=site_pitch)


def correlation_layout(site_pitch: float = 0.25) -> WaferLayout:
    """Three well separated area groups for the resistance-area fit."""
    return WaferLayout(chips=six_chip_frame(), groups=CORRELATION_GROUPS, site_pitch=site_pitch)


def overlay_layout(site_pitch: float = 0.16) -> WaferLayout:
    """Junctions with a 240 nm tilt-axis window for the overlay-regime
    comparison; more than 10⁴ sites at the default pitch."""
    return WaferLayout(chips=six_chip_frame(), groups=OVERLAY_GROUPS, site_pitch=site_pitch)
