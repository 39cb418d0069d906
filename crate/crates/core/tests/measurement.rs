//! Correlation estimators, photon counting, the two-photon interferometer and
//! absorption rates checked against brute-force and quadrature oracles.

use std::f64::consts::PI;

use num_complex::Complex64;
use photonstat::bootstrap::BootstrapConfig;
use photonstat::correlation::{g2_from_counts, g2_tau, gn_zero, gn_zero_with};
use photonstat::instruments::{
    expected_fluorescence_counts, extract_g2, hbt_scan, hbt_scan_with, photon_counter, photon_stream,
    DetectionChain, Excitation, FringeFilter, HbtOptions, InterferogramScan,
};
use photonstat::numeric::{factorial, mean_std};
use photonstat::source::{generate, line_autocorrelation, SourceSpec};
use photonstat::tpa::{mpa_rate_timedomain, rate_ratio, tpa_rate_timedomain, tpa_rate_timedomain_with, AbsorberSpec};
use photonstat::{Error, FieldTrace};
use proptest::prelude::*;

const DT: f64 = 1.5e-14;

fn sld_trace(samples: usize, seed: u64) -> FieldTrace {
    generate(&SourceSpec::sld(), samples as f64 * DT, DT, seed).unwrap()
}

#[test]
fn lineshape_integrates_to_two_pi() {
    let a = AbsorberSpec::dcm();
    // x = 2ω − ω_f = (Δ/2)·tan θ turns the integral into a smooth one over θ
    let half = a.delta_omega_f / 2.0;
    let n = 200_000;
    let h = PI / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let th = -PI / 2.0 + (i as f64 + 0.5) * h;
        let x = half * th.tan();
        let jac = half / th.cos().powi(2);
        s += a.lineshape((a.omega_f + x) / 2.0) * jac * h;
    }
    assert!((s / (2.0 * PI) - 1.0).abs() < 1e-6, "{s}");
    assert!((a.lineshape(a.omega_f / 2.0) - 4.0 / a.delta_omega_f).abs() < 1e-30);
}

#[test]
fn fringe_average_matches_phase_grid_brute_force() {
    let t = sld_trace(1 << 12, 2);
    let tc = SourceSpec::sld().nominal_coherence_time();
    let taus = [0.0, 0.4 * tc, 1.5 * tc];
    let scan = hbt_scan(&t, &taus).unwrap();
    let s = &t.samples;
    let n = s.len() as i64;
    for (i, &tau) in taus.iter().enumerate() {
        let k = (tau / DT).round() as i64;
        let mut acc = 0.0;
        let phases = 64;
        for p in 0..phases {
            let e = Complex64::from_polar(1.0, 2.0 * PI * p as f64 / phases as f64);
            let mut sum = 0.0;
            for j in 0..n - k {
                sum += (s[j as usize] + s[(j + k) as usize] * e).norm_sqr().powi(2) / 16.0;
            }
            acc += sum / (n - k) as f64;
        }
        let brute = acc / phases as f64;
        assert!((scan.filtered_signal[i] / brute - 1.0).abs() < 1e-10, "tau={tau}");
    }
}

#[test]
fn interferogram_envelope_is_monotone_for_thermal_light() {
    let t = sld_trace(1 << 18, 4);
    let tc = SourceSpec::sld().nominal_coherence_time();
    let taus: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0].iter().map(|x| x * tc).collect();
    let scan = hbt_scan(&t, &taus).unwrap();
    for w in scan.filtered_signal.windows(2) {
        assert!(w[1] < w[0] * 1.001, "{:?}", scan.filtered_signal);
    }
    // peak-to-background close to 3 g/(g + 2) = 1.5
    let r = scan.filtered_signal[0] / scan.filtered_signal[4];
    assert!((r - 1.5).abs() < 0.03, "{r}");
}

#[test]
fn fringe_visibility_at_zero_delay() {
    // raw: ⟨|2E|⁴⟩/16 = ⟨I²⟩; fringe-averaged: 6⟨I²⟩/16
    let t = sld_trace(1 << 14, 5);
    let scan = hbt_scan(&t, &[0.0]).unwrap();
    let m2 = t.intensity_moment(2);
    assert!((scan.raw_signal[0] / m2 - 1.0).abs() < 1e-12);
    assert!((scan.filtered_signal[0] / (6.0 * m2 / 16.0) - 1.0).abs() < 1e-12);
}

fn round_trip(spec: &SourceSpec, samples: usize, seed: u64) -> (f64, f64, f64, f64) {
    let t = generate(spec, samples as f64 * DT, DT, seed).unwrap();
    let tc = spec.nominal_coherence_time().min(t.duration() / 40.0);
    let mut delays = vec![0.0];
    delays.extend((0..25).map(|i| (6.0 + 6.0 * i as f64 / 24.0) * tc));
    let scan = hbt_scan(&t, &delays).unwrap();
    let est = extract_g2(&scan, (6.0 * tc, 12.0 * tc), Some(tc)).unwrap();
    let direct = g2_tau(&t, &[0.0]).unwrap();
    (est.values[0], est.std_errors[0], direct.values[0], direct.std_errors[0])
}

#[test]
fn extraction_agrees_with_direct_estimate() {
    for (spec, seed) in [
        (SourceSpec::sld(), 1),
        (SourceSpec::pseudo_thermal(2), 2),
        (SourceSpec::tunable(1.5), 3),
        (SourceSpec::dfb_laser(), 4),
    ] {
        let (g, se, d, dse) = round_trip(&spec, 1 << 17, seed);
        let tol = 3.0 * se.hypot(dse) + 1e-9;
        assert!((g - d).abs() < tol, "{:?}: {g} +/- {se} vs {d} +/- {dse}", spec.statistics);
    }
}

#[test]
fn moving_average_filter_agrees_with_analytic_average() {
    let t = sld_trace(1 << 16, 6);
    let tc = SourceSpec::sld().nominal_coherence_time();
    let taus: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 * tc).collect();
    let a = hbt_scan(&t, &taus).unwrap();
    let opts = HbtOptions {
        filter: FringeFilter::MovingAverage { points_per_fringe: 8 },
        ..HbtOptions::default()
    };
    let b = hbt_scan_with(&t, &taus, &opts).unwrap();
    for (x, y) in a.filtered_signal.iter().zip(&b.filtered_signal) {
        assert!((x / y - 1.0).abs() < 0.03, "{x} vs {y}");
    }
}

#[test]
fn readout_noise_is_seeded_and_inflates_errors() {
    let t = sld_trace(1 << 15, 7);
    let taus = [0.0, 1e-12, 1.1e-12];
    let opts = HbtOptions {
        readout_noise: 0.01,
        seed: 3,
        ..HbtOptions::default()
    };
    let a = hbt_scan_with(&t, &taus, &opts).unwrap();
    let b = hbt_scan_with(&t, &taus, &opts).unwrap();
    assert_eq!(a, b);
    let clean = hbt_scan(&t, &taus).unwrap();
    for (n, c) in a.filtered_std_err.iter().zip(&clean.filtered_std_err) {
        assert!(n > c);
    }
    assert_ne!(a.filtered_signal, clean.filtered_signal);
}

#[test]
fn linear_background_adds_one_photon_term() {
    let t = sld_trace(1 << 12, 8);
    let beta = 1e3;
    let opts = HbtOptions {
        linear_background: beta,
        ..HbtOptions::default()
    };
    let a = hbt_scan_with(&t, &[0.0], &opts).unwrap();
    let b = hbt_scan(&t, &[0.0]).unwrap();
    // ⟨|2E|²⟩/4 = ⟨I⟩ at zero delay
    let extra = beta * t.mean_power();
    assert!(((a.raw_signal[0] - b.raw_signal[0]) / extra - 1.0).abs() < 1e-9);
}

#[test]
fn photon_counts_are_poissonian() {
    let chain = DetectionChain {
        collection_efficiency: 0.5,
        quantum_efficiency: 0.8,
        dark_rate: 2.0,
        integration_time: 0.5,
        power_correction_eta: 0.61,
    };
    let mean = chain.expected_counts(100.0);
    assert!((mean - 21.0).abs() < 1e-12);
    let draws: Vec<f64> = (0..20_000).map(|s| photon_counter(100.0, &chain, s).unwrap() as f64).collect();
    let (m, sd) = mean_std(&draws);
    assert!((m / mean - 1.0).abs() < 0.01, "{m}");
    assert!((sd * sd / mean - 1.0).abs() < 0.05, "{}", sd * sd);
}

/// Bunching of counts in bins of width `w` for a Gaussian line:
/// `1 + (1/w²) ∫_{-w}^{w} (w − |u|) |g¹(u)|² du`.
fn binned_thermal_g2(fwhm: f64, w: f64) -> f64 {
    let n = 20_000;
    let h = 2.0 * w / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let u = -w + (i as f64 + 0.5) * h;
        s += (w - u.abs()) * line_autocorrelation(photonstat::source::SpectralShape::Gaussian, fwhm, u).powi(2) * h;
    }
    1.0 + s / (w * w)
}

#[test]
fn photon_stream_bunching_matches_binned_oracle() {
    let spec = SourceSpec::sld();
    let t = sld_trace(1 << 18, 9);
    let rate = 0.5 / (t.mean_power() * DT);
    let stamps = photon_stream(&t, rate, 1).unwrap();
    let bin = 2.0 * DT;
    let est = g2_from_counts(&stamps, bin, 20.0 * bin).unwrap();
    let oracle = binned_thermal_g2(spec.bandwidth_hz(), bin);
    assert!((est.values[0] - oracle).abs() < 0.05, "{} vs {oracle}", est.values[0]);
    assert!((est.values.last().unwrap() - 1.0).abs() < 0.05);

    let c = generate(&SourceSpec::dfb_laser(), (1 << 18) as f64 * DT, DT, 2).unwrap();
    let stamps = photon_stream(&c, rate, 2).unwrap();
    let est = g2_from_counts(&stamps, bin, 4.0 * bin).unwrap();
    assert!((est.values[0] - 1.0).abs() < 0.03, "{}", est.values[0]);
}

#[test]
fn trace_excitation_equals_measured_statistics() {
    let a = AbsorberSpec::dcm();
    let chain = DetectionChain::paper_emccd();
    let t = sld_trace(1 << 16, 10);
    let g = t.intensity_moment(2) / t.mean_power().powi(2);
    let from_trace = expected_fluorescence_counts(5e-4, &Excitation::Trace(&t), &a, &chain).unwrap();
    let from_stats = expected_fluorescence_counts(
        5e-4,
        &Excitation::Statistics { g2_zero: g, omega: t.carrier_freq },
        &a,
        &chain,
    )
    .unwrap();
    assert!((from_trace / from_stats - 1.0).abs() < 1e-12);
}

#[test]
fn narrow_absorber_fails_broadband_check() {
    let mut a = AbsorberSpec::dcm();
    let t = sld_trace(1 << 14, 11);
    a.delta_omega_f = 2.0 * PI * 2e12;
    assert!(matches!(tpa_rate_timedomain(&t, &a), Err(Error::ModelDomain(_))));
    assert!(tpa_rate_timedomain_with(&t, &a, true).is_ok());
    assert!(matches!(
        expected_fluorescence_counts(1e-4, &Excitation::Trace(&t), &a, &DetectionChain::paper_emccd()),
        Err(Error::ModelDomain(_))
    ));
}

#[test]
fn timedomain_rates_show_factorial_enhancement() {
    let a = AbsorberSpec::dcm();
    let th = sld_trace(1 << 20, 12);
    let co = generate(&SourceSpec::dfb_laser(), (1 << 12) as f64 * DT, DT, 1).unwrap();
    let r = rate_ratio(tpa_rate_timedomain(&th, &a).unwrap(), tpa_rate_timedomain(&co, &a).unwrap()).unwrap();
    assert!((r.value - 2.0).abs() < 3.0 * r.std_err + 1e-3, "{} +/- {}", r.value, r.std_err);
    for n in 2..=4u32 {
        let rt = mpa_rate_timedomain(&th, n, 1.0).unwrap();
        let rc = mpa_rate_timedomain(&co, n, 1.0).unwrap();
        let ratio = rt.value / rc.value;
        let want = factorial(n);
        assert!((ratio / want - 1.0).abs() < 0.1, "n={n}: {ratio}");
    }
}

#[test]
fn gn_error_shrinks_with_trace_length() {
    let short = gn_zero(&sld_trace(1 << 16, 13), 2).unwrap();
    let long = gn_zero(&sld_trace(1 << 20, 13), 2).unwrap();
    let ratio = long.std_errors[0] / short.std_errors[0];
    assert!((0.15..0.4).contains(&ratio), "{ratio}");
}

#[test]
fn bootstrap_error_matches_seed_to_seed_scatter() {
    let mut values = Vec::new();
    let mut reported = Vec::new();
    for s in 0..30 {
        let e = gn_zero_with(&sld_trace(1 << 15, 100 + s), 2, &BootstrapConfig { seed: s, ..Default::default() }).unwrap();
        values.push(e.values[0]);
        reported.push(e.std_errors[0]);
    }
    let (_, empirical) = mean_std(&values);
    let (mean_reported, _) = mean_std(&reported);
    let ratio = mean_reported / empirical;
    assert!((0.6..1.6).contains(&ratio), "{ratio}");
}

fn synthetic_scan(s0: f64, tail: f64) -> InterferogramScan {
    InterferogramScan {
        delays: vec![0.0, 1.0, 2.0],
        raw_signal: vec![0.0; 3],
        filtered_signal: vec![s0, tail, tail],
        filtered_std_err: vec![0.0; 3],
        fringe_period: 0.1,
        filter: FringeFilter::Analytic,
        effective_samples: 1,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_delay_identities_hold_for_any_field(
        amps in proptest::collection::vec((0.01f64..3.0, 0.0f64..6.3), 8..64)
    ) {
        let s: Vec<Complex64> = amps.iter().map(|&(r, p)| Complex64::from_polar(r, p)).collect();
        let t = FieldTrace::new(s, 1e-15, 1.9e15, 0).unwrap();
        let scan = hbt_scan(&t, &[0.0]).unwrap();
        let m2 = t.intensity_moment(2);
        prop_assert!((scan.raw_signal[0] / m2 - 1.0).abs() < 1e-10);
        prop_assert!((scan.filtered_signal[0] / (0.375 * m2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn extraction_inverts_the_ratio_formula(g in 1.0f64..50.0, tail in 0.1f64..10.0) {
        let r = 3.0 * g / (g + 2.0);
        let est = extract_g2(&synthetic_scan(r * tail, tail), (0.5, 2.5), None).unwrap();
        prop_assert!((est.values[0] / g - 1.0).abs() < 1e-9);
        prop_assert!((est.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn raw_signal_is_non_negative(
        amps in proptest::collection::vec((0.0f64..2.0, 0.0f64..6.3), 16..48),
        tau in -5e-15f64..5e-15
    ) {
        let s: Vec<Complex64> = amps.iter().map(|&(r, p)| Complex64::from_polar(r, p)).collect();
        prop_assume!(s.iter().any(|z| z.norm() > 0.0));
        let t = FieldTrace::new(s, 1e-15, 1.9e15, 0).unwrap();
        let scan = hbt_scan(&t, &[tau]).unwrap();
        prop_assert!(scan.raw_signal[0] >= 0.0);
        prop_assert!(scan.filtered_signal[0] >= 0.0);
    }
}
