import json

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import dblquad

from junctionfab.errors import ConfigError, FeatureNotDevelopedError, JunctionFabError
from junctionfab.features import litho_dose
from junctionfab.features.litho_dose import (
    LayoutRect, PsfParams, ResistPreset, backscatter_increase, dose_at_point, dose_map,
    get_preset, linewidth_bias, psf_value,
)

WIDE_PSF = PsfParams(alpha_fwd=0.5, beta_back=3.0, eta=0.6)


@pytest.fixture(scope="module")
def pmma():
    return get_preset("mma-pmma-a4")


@pytest.fixture(scope="module")
def csar():
    return get_preset("MMA-CSAR62")


def test_dose_matches_quadrature():
    rect = LayoutRect(x0=-1.0, y0=-0.5, x1=1.0, y1=0.5)
    point = (0.3, 0.2)

    oracle, _ = dblquad(
        lambda y, x: float(psf_value(WIDE_PSF, np.hypot(x - point[0], y - point[1]))),
        rect.x0, rect.x1, rect.y0, rect.y1, epsabs=1e-10, epsrel=1e-10)

    assert dose_at_point([rect], WIDE_PSF, point) == pytest.approx(oracle, abs=1e-4)


def test_large_area_interior_receives_unit_dose():
    big = LayoutRect(x0=-100.0, y0=-100.0, x1=100.0, y1=100.0)
    assert dose_at_point([big], WIDE_PSF, (0.0, 0.0)) == pytest.approx(1.0, abs=1e-9)


def test_dose_map_rows_follow_y():
    rect = LayoutRect(x0=0.0, y0=0.0, x1=0.2, y1=2.0)
    xs = np.linspace(-1, 1, 5)
    ys = np.linspace(-1, 3, 9)

    grid = dose_map([rect], WIDE_PSF, xs, ys)

    assert grid.shape == (9, 5)
    assert grid[4, 2] == pytest.approx(dose_at_point([rect], WIDE_PSF, (xs[2], ys[4])))


def test_backscatter_increase_reference_presets(pmma, csar):
    layout, region = litho_dose.reference_layout(), litho_dose.reference_region()

    inc_pmma = backscatter_increase(layout, pmma.psf, region)
    inc_csar = backscatter_increase(layout, csar.psf, region)

    assert inc_pmma == pytest.approx(30.0, abs=3.0)
    assert inc_csar == pytest.approx(inc_pmma / 3.0, rel=0.2)


def test_linewidth_bias_reference_presets(pmma, csar):
    layout, at = litho_dose.reference_layout(), litho_dose.reference_cut()
    nominal = litho_dose.REFERENCE_FEATURE_WIDTH

    bias_pmma = linewidth_bias(nominal, layout, pmma, at)
    bias_csar = linewidth_bias(nominal, layout, csar, at)

    assert bias_pmma == pytest.approx(50.0, abs=5.0)
    assert bias_csar < bias_pmma


def test_increase_is_zero_without_other_shapes(pmma):
    region = litho_dose.reference_region()
    finger = [litho_dose.reference_layout()[0]]

    assert backscatter_increase(finger, pmma.psf, region) == 0.0


def test_increase_needs_feature_in_region(pmma):
    far = LayoutRect(x0=50.0, y0=50.0, x1=51.0, y1=51.0)
    with pytest.raises(JunctionFabError):
        backscatter_increase([far], pmma.psf, litho_dose.reference_region())


def test_underexposed_feature_not_developed():
    psf = PsfParams(alpha_fwd=0.05, beta_back=10.0, eta=0.2)
    preset = ResistPreset(name="hard", psf=psf, threshold_fraction=1.1)
    layout = [LayoutRect(x0=-0.01, y0=-1.0, x1=0.01, y1=1.0)]

    with pytest.raises(FeatureNotDevelopedError):
        linewidth_bias(20.0, layout, preset)


def test_psf_ranges_must_be_ordered():
    with pytest.raises(ValueError):
        PsfParams(alpha_fwd=2.0, beta_back=1.0, eta=0.5)


def test_degenerate_rectangle_rejected():
    with pytest.raises(ValueError):
        LayoutRect(x0=1.0, y0=0.0, x1=1.0, y1=1.0)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        get_preset("hsq")


def test_layout_files(tmp_path):
    rects = [{"x0": 0, "y0": 0, "x1": 1, "y1": 2}, {"x0": 2, "y0": 0, "x1": 3, "y1": 1, "relative_dose": 1.5}]
    as_json = tmp_path / "layout.json"
    as_json.write_text(json.dumps(rects))
    as_csv = tmp_path / "layout.csv"
    pd.DataFrame(rects).fillna(1.0).to_csv(as_csv, index=False)

    assert litho_dose.load_layout(as_json) == litho_dose.load_layout(as_csv)
    assert litho_dose.load_layout(as_json)[1].relative_dose == 1.5


def test_write_dose_map(tmp_path):
    xs, ys = np.linspace(-1, 1, 3), np.linspace(0, 1, 2)
    dose = dose_map(litho_dose.reference_layout(), WIDE_PSF, xs, ys)
    path = tmp_path / "dose.csv"

    litho_dose.write_dose_map(path, xs, ys, dose)

    frame = pd.read_csv(path, index_col=0)
    assert frame.shape == (2, 3)
    assert frame.to_numpy() == pytest.approx(dose, rel=1e-8)


def test_splitting_a_rectangle_keeps_the_dose(pmma):
    whole = [LayoutRect(x0=-0.3, y0=-1.0, x1=0.3, y1=2.0)]
    halves = [LayoutRect(x0=-0.3, y0=-1.0, x1=0.1, y1=2.0), LayoutRect(x0=0.1, y0=-1.0, x1=0.3, y1=2.0)]

    for point in [(0.0, 0.0), (0.1, 1.9), (0.35, -1.2), (4.0, 7.0)]:
        assert dose_at_point(halves, pmma.psf, point) == pytest.approx(
            dose_at_point(whole, pmma.psf, point), abs=1e-12)


def test_dose_falls_moving_away_from_a_rectangle(pmma):
    rect = [LayoutRect(x0=-0.1, y0=-0.5, x1=0.1, y1=0.5)]
    xs = np.linspace(0.0, 30.0, 301)

    dose = dose_map(rect, pmma.psf, xs, [0.0])[0]

    assert np.all(np.diff(dose) <= 1e-15)


def test_bias_grows_with_backscatter_fraction(pmma, csar):
    layout, at = litho_dose.reference_layout(), litho_dose.reference_cut()
    nominal = litho_dose.REFERENCE_FEATURE_WIDTH
    etas = np.linspace(csar.psf.eta, 1.5 * pmma.psf.eta, 5)

    biases = [linewidth_bias(nominal, layout, pmma.model_copy(update={
        "psf": PsfParams(alpha_fwd=pmma.psf.alpha_fwd, beta_back=pmma.psf.beta_back, eta=eta)}), at)
        for eta in etas]

    assert np.all(np.diff(biases) >= 0.0)


def test_isolated_feature_at_edge_threshold_has_no_bias(pmma):
    line = [LayoutRect(x0=-0.075, y0=-10.0, x1=0.075, y1=10.0)]
    edge_dose = dose_at_point(line, pmma.psf, (0.075, 0.0))
    preset = ResistPreset(name="edge", psf=pmma.psf, threshold_fraction=edge_dose)

    assert linewidth_bias(150.0, line, preset, at=0.0) == pytest.approx(0.0, abs=0.2)


def test_fitted_psf_replaces_preset_psf(tmp_path, pmma):
    fitted = PsfParams(alpha_fwd=0.02, beta_back=7.8, eta=0.16)
    path = tmp_path / "psf_fit.json"
    path.write_text(fitted.model_dump_json(indent=2) + "\n")

    preset = litho_dose.preset_with_psf(pmma, litho_dose.load_psf(path))

    assert preset.psf == fitted
    assert preset.threshold_fraction == pmma.threshold_fraction


def test_invalid_psf_file(tmp_path):
    path = tmp_path / "psf_fit.json"
    path.write_text('{"alpha_fwd": 2.0, "beta_back": 1.0, "eta": 0.1}')

    with pytest.raises(ConfigError):
        litho_dose.load_psf(path)
