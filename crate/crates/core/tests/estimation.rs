use e2i2::estimation::{fit, fit_model, FitOptions, FitProblem, ForwardModel, ParamSpec};
use e2i2::scene::PropagatorModel;

fn two_point() -> ForwardModel {
    ForwardModel::HbtTwoPoint { wavelength: 5e-7, distance: 1.0, model: PropagatorModel::Spherical }
}

fn baselines(n: usize, to: f64) -> Vec<f64> {
    (0..n).map(|k| to * (k as f64 + 0.5) / n as f64).collect()
}

fn bounds() -> Vec<ParamSpec> {
    vec![ParamSpec::new("separation_ratio", 5e-4, 2e-3)]
}

#[test]
fn noiseless_two_point_recovers_separation() {
    let m = two_point();
    let obs = m.simulate(&[1e-3], 1.0, &baselines(100, 2e-3), 0.0, 0).unwrap();
    let problem = FitProblem { observations: obs, model: m, parameter_bounds: bounds(), noise_sigma: 0.0 };
    let r = fit(&problem, 3).unwrap();
    let rel = (r.parameters["separation_ratio"] / 1e-3 - 1.0).abs();
    assert!(rel < 1e-3, "relative error {rel}");
    assert!(r.residual_rms < 1e-6, "{r:?}");
}

#[test]
fn one_percent_noise_stays_within_two_percent() {
    let m = two_point();
    let controls = baselines(100, 2e-3);
    for seed in 0..20 {
        let obs = m.simulate(&[1e-3], 1.0, &controls, 0.01, 100 + seed).unwrap();
        let d = fit_model(&m, &obs, &bounds(), &FitOptions::default(), seed).unwrap();
        let rel = (d.raw[0] / 1e-3 - 1.0).abs();
        assert!(rel < 0.02, "seed {seed}: relative error {rel}");
    }
}

#[test]
fn more_starts_never_worsen_the_residual() {
    let m = two_point();
    let obs = m.simulate(&[1.3e-3], 2.0, &baselines(60, 2e-3), 0.02, 5).unwrap();
    let wide = vec![ParamSpec::new("separation_ratio", 1e-4, 1e-2)];
    let mut last = f64::INFINITY;
    for starts in [1, 2, 4, 8, 16, 32] {
        let options = FitOptions { starts, ..FitOptions::default() };
        let d = fit_model(&m, &obs, &wide, &options, 11).unwrap();
        assert!(d.relative_rms <= last * (1.0 + 1e-12), "{starts} starts: {} after {last}", d.relative_rms);
        last = d.relative_rms;
    }
}

#[test]
fn rescaled_observations_give_the_same_shape() {
    let m = two_point();
    let obs = m.simulate(&[1.1e-3], 1.0, &baselines(80, 2e-3), 0.01, 9).unwrap();
    let scaled: Vec<(f64, f64)> = obs.iter().map(|(x, y)| (*x, 1e6 * y)).collect();
    let a = fit_model(&m, &obs, &bounds(), &FitOptions::default(), 4).unwrap();
    let b = fit_model(&m, &scaled, &bounds(), &FitOptions::default(), 4).unwrap();
    assert!((a.raw[0] - b.raw[0]).abs() <= 1e-9 * a.raw[0]);
    assert!((a.relative_rms - b.relative_rms).abs() <= 1e-9);
    let amp = |d: &e2i2::estimation::FitDetail| d.result.parameters["amplitude"];
    assert!((amp(&b) / amp(&a) - 1e6).abs() <= 1e-3);
}

#[test]
fn extended_source_round_trip() {
    let m = ForwardModel::HbtExtended { wavelength: 5e-7, distance: 1.0, count: 9 };
    let obs = m.simulate(&[1.5e-3], 1.0, &baselines(80, 1e-3), 0.0, 0).unwrap();
    let wide = vec![ParamSpec::new("width_ratio", 5e-4, 3e-3)];
    let d = fit_model(&m, &obs, &wide, &FitOptions::default(), 2).unwrap();
    assert!((d.raw[0] / 1.5e-3 - 1.0).abs() < 1e-3, "{:?}", d.raw);
}

#[test]
fn fits_are_reproducible_for_a_seed() {
    let m = two_point();
    let obs = m.simulate(&[1e-3], 1.0, &baselines(50, 2e-3), 0.01, 1).unwrap();
    let a = fit_model(&m, &obs, &bounds(), &FitOptions::default(), 8).unwrap();
    let b = fit_model(&m, &obs, &bounds(), &FitOptions::default(), 8).unwrap();
    assert_eq!(a.result, b.result);
}
