use talbot_core::beamline::{
    effusive_flux_spectrum, selected_distribution, tune_source_offset, DEFAULT_EMISSION_SAMPLES,
};
use talbot_core::*;

fn tuned(src: &SourceSpectrum, slits: SlitSystem, target: f64) -> VelocityDistribution {
    let grid = src.grid(0.1, 3.5, 681);
    let slits = tune_source_offset(src, &slits, &grid, DEFAULT_EMISSION_SAMPLES, target).unwrap();
    selected_distribution(src, &slits, &grid, DEFAULT_EMISSION_SAMPLES).unwrap()
}

#[test]
fn effusive_width_is_fixed_by_the_spectrum_shape() {
    for (t, sp) in [
        (690.0, MoleculeSpecies::tpp()),
        (560.0, MoleculeSpecies::c60f48()),
        (300.0, MoleculeSpecies::c70()),
    ] {
        let src = SourceSpectrum::new(t, sp).unwrap();
        let d = effusive_flux_spectrum(&src, &src.grid(0.1, 3.5, 2001)).unwrap();
        assert!(
            (d.fwhm_fraction - 0.8744).abs() < 2e-3,
            "{}",
            d.fwhm_fraction
        );
        // mean of v³ e^{−v²/v_th²} is (3√π/4) v_th
        let mean = 0.75 * std::f64::consts::PI.sqrt() * src.thermal_speed();
        assert!((d.mean / mean - 1.0).abs() < 1e-4);
    }
}

#[test]
fn narrow_grid_is_rejected() {
    let src = SourceSpectrum::new(690.0, MoleculeSpecies::tpp()).unwrap();
    assert!(matches!(
        effusive_flux_spectrum(&src, &src.grid(0.2, 3.0, 200)),
        Err(Error::Coverage { .. })
    ));
    assert!(effusive_flux_spectrum(&src, &src.grid(0.1, 3.2, 200)).is_ok());
}

#[test]
fn tpp_slits_select_thirty_percent() {
    let src = SourceSpectrum::new(690.0, MoleculeSpecies::tpp()).unwrap();
    let d = tuned(&src, SlitSystem::tpp(2.1, 160.0).unwrap(), 160.0);
    assert!((d.mean - 160.0).abs() < 0.5, "{}", d.mean);
    assert!((d.fwhm_fraction - 0.30).abs() < 0.10, "{}", d.fwhm_fraction);
}

#[test]
fn c60f48_slits_select_twenty_percent() {
    let src = SourceSpectrum::new(560.0, MoleculeSpecies::c60f48()).unwrap();
    let d = tuned(&src, SlitSystem::c60f48(2.1, 105.0).unwrap(), 105.0);
    assert!((d.mean - 105.0).abs() < 5.0, "{}", d.mean);
    assert!((d.fwhm_fraction - 0.20).abs() < 0.10, "{}", d.fwhm_fraction);
}

#[test]
fn longer_flight_narrows_selection() {
    let src = SourceSpectrum::new(560.0, MoleculeSpecies::c60f48()).unwrap();
    let widths: Vec<f64> = [1.8, 2.1]
        .iter()
        .map(|&z3| tuned(&src, SlitSystem::c60f48(z3, 105.0).unwrap(), 105.0).fwhm_fraction)
        .collect();
    assert!(widths[1] < widths[0], "{widths:?}");
}

#[test]
fn selected_beam_feeds_the_pattern_average() {
    let src = SourceSpectrum::new(690.0, MoleculeSpecies::tpp()).unwrap();
    let d = tuned(&src, SlitSystem::tpp(2.1, 160.0).unwrap(), 160.0);
    let cfg = InterferometerConfig::tpp();
    let v = averaged_visibility(&cfg, 17.6547, &d, &Settings::default()).unwrap();
    assert!(v > 0.2 && v < 0.5, "{v}");
}
