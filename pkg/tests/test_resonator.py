import numpy as np
import pytest

from diskspdc.material import refractive_index
from diskspdc.resonator import (
    CalibrationError,
    DiskGeometry,
    ModeFamily,
    ResonatorMode,
    anchor_family,
    calibrate_family,
    effective_index,
    fsr,
    fsr_ghz,
    group_index,
    resonance_comb,
)

GEO = DiskGeometry()

# 2 pi * 46.5 um in nm, frozen independently
L_NM = 292168.11678385077
# f/Q linewidths from c = 2.99792458e8 nm GHz
KAPPA_PUMP = 1.3341340326661901      # 774.86 nm, Q = 2.9e5
KAPPA_SIGNAL = 1.9310054492051631    # 1552.52 nm, Q = 1e5

TM = ModeFamily(family_id="tm", polarization="TM")
TE = ModeFamily(family_id="te", polarization="TE", azimuthal_contrast=0.4)


def test_circumference():
    assert GEO.circumference_um * 1e3 == pytest.approx(L_NM, rel=1e-14)


def test_resonance_identity_over_band():
    modes = resonance_comb(TM, GEO, (1540.0, 1560.0))
    assert len(modes) > 3
    for md in modes:
        n = effective_index(TM, md.wavelength_nm)
        assert n * L_NM / md.wavelength_nm == pytest.approx(md.m, rel=1e-9)


def test_comb_ordering_and_spacing():
    modes = resonance_comb(TM, GEO, (1545.0, 1560.0))
    wl = np.array([md.wavelength_nm for md in modes])
    ms = np.array([md.m for md in modes])
    assert np.all(np.diff(wl) > 0)
    assert np.all(np.diff(ms) == -1)
    # neighbour spacing agrees with the local FSR to first order
    mid = 0.5 * (wl[0] + wl[1])
    assert wl[1] - wl[0] == pytest.approx(fsr(TM, GEO, mid), rel=1e-3)


def test_comb_band_validation():
    with pytest.raises(ValueError):
        resonance_comb(TM, GEO, (1560.0, 1540.0))


def test_anchor_family():
    fam = anchor_family(TM, GEO, 1552.52, 408)
    n = effective_index(fam, 1552.52)
    assert n * L_NM / 1552.52 == pytest.approx(408, rel=1e-12)
    assert fam.ref_wavelength_um == pytest.approx(1.55252)
    modes = resonance_comb(fam, GEO, (1550.0, 1555.0))
    anchored = [md for md in modes if md.m == 408]
    assert len(anchored) == 1
    assert anchored[0].wavelength_nm == pytest.approx(1552.52, abs=1e-6)


def test_calibrate_family_hits_target():
    fam = anchor_family(TM, GEO, 1552.52, 408)
    cal = calibrate_family(fam, GEO, 3.89, 1552.52)
    assert fsr(cal, GEO, 1552.52) == pytest.approx(3.89, rel=1e-6)
    # the anchored resonance must not move when the slope changes
    n = effective_index(cal, 1552.52)
    assert n * L_NM / 1552.52 == pytest.approx(408, rel=1e-12)
    # implied group index equals the closed form lambda^2 / (L * FSR)
    assert group_index(cal, 1552.52) == pytest.approx(
        1552.52 ** 2 / (L_NM * 3.89), rel=1e-6)


def test_calibrate_family_rejects_bad_target():
    fam = anchor_family(TM, GEO, 1552.52, 408)
    with pytest.raises(ValueError):
        calibrate_family(fam, GEO, -1.0, 1552.52)
    # a family whose reference wavelength degenerates cannot be solved
    broken = ModeFamily(family_id="z", polarization="TM",
                        ref_wavelength_um=0.0)
    with pytest.raises(CalibrationError):
        calibrate_family(broken, GEO, 3.89, 1552.52)


def test_group_index_linear_in_slope():
    # n_g = n - lambda dn/dlambda turns the linear correction
    # slope * (lambda - ref) into a constant shift of -slope * ref
    base = ModeFamily(family_id="a", polarization="TM",
                      ref_wavelength_um=1.55)
    tilted = ModeFamily(family_id="b", polarization="TM",
                        index_slope_per_um=0.05, ref_wavelength_um=1.55)
    for wl in (1540.0, 1552.0, 1561.0):
        delta = group_index(tilted, wl) - group_index(base, wl)
        assert delta == pytest.approx(-0.05 * 1.55, rel=1e-9)


def test_effective_index_offset_is_additive():
    fam = ModeFamily(family_id="x", polarization="TE",
                     index_offset=-0.0731, azimuthal_contrast=0.4)
    plain = ModeFamily(family_id="y", polarization="TE",
                       azimuthal_contrast=0.4)
    assert effective_index(fam, 1552.0) == pytest.approx(
        effective_index(plain, 1552.0) - 0.0731, rel=1e-12)


def test_linewidths():
    pump_fam = ModeFamily(family_id="p", polarization="TM", q_loaded=2.9e5)
    pump = ResonatorMode(family=pump_fam, m=824, wavelength_nm=774.86)
    assert pump.linewidth_ghz == pytest.approx(KAPPA_PUMP, rel=1e-12)
    sig = ResonatorMode(family=TE, m=408, wavelength_nm=1552.52)
    assert sig.linewidth_ghz == pytest.approx(KAPPA_SIGNAL, rel=1e-12)


def test_fsr_unit_consistency():
    # fsr_ghz = fsr_nm * c / lambda^2 by construction
    for wl in (1540.0, 1552.52, 1565.0):
        ratio = fsr_ghz(TE, GEO, wl) / fsr(TE, GEO, wl)
        assert ratio == pytest.approx(2.99792458e8 / wl ** 2, rel=1e-12)


def test_family_validation():
    with pytest.raises(ValueError):
        ModeFamily(family_id="bad", polarization="TEM")
    with pytest.raises(ValueError):
        ModeFamily(family_id="bad", polarization="TE", q_loaded=0.0)
    with pytest.raises(ValueError):
        ModeFamily(family_id="bad", polarization="TE",
                   azimuthal_contrast=1.2)
    with pytest.raises(ValueError):
        ModeFamily(family_id="bad", polarization="TE", radial_number=-1)


def test_te_effective_index_below_ordinary_bulk():
    # the averaged TE index sits strictly between the principal indices
    for wl in (1540.0, 1552.0, 1565.0):
        n = effective_index(TE, wl)
        assert n < refractive_index(wl * 1e-3, "o")
        assert n > refractive_index(wl * 1e-3, "e")
