//! Measurement chain: shot-noise-limited photon counting, the two-photon
//! detector Michelson interferometer, and the fluorescence collection path.
//!
//! # Interferometer model
//!
//! A balanced Michelson splits the field, delays one arm by `τ` and recombines.
//! With `ℰ(t) = E(t)e^{iωt}` the two-photon detector sees
//!
//! ```text
//! S(τ) = ⟨|E(t) + E(t+τ)e^{iωτ}|⁴⟩ / 16
//! ```
//!
//! Writing `A = I(t) + I(t+τ)` and `c = E*(t)E(t+τ)`, the integrand expands to
//! `A² + 2|c|² + 4Re(Ac·e^{iωτ}) + 2Re(c²e^{2iωτ})`. Averaging over one fringe
//! removes the oscillating terms:
//!
//! ```text
//! S̄(τ) = (2⟨I²⟩ + 4⟨I(t)I(t+τ)⟩) / 16
//! ```
//!
//! so `r = S̄(0)/S̄(∞) = 3g²(0)/(g²(0) + 2)`, i.e. `g²(0) = 2r/(3 − r)`.
//! The envelope delay is rounded to the nearest sample; the carrier phase uses
//! the exact delay.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationEstimate;
use crate::error::{invalid, Error, Result};
use crate::numeric::mean_std;
use crate::seeding::{rng_for, stream, Rng};
use crate::tpa::{check_broadband, mollow_rate, AbsorberSpec};
use crate::trace::FieldTrace;

/// Detection chain for fluorescence counting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    pub collection_efficiency: f64,
    pub quantum_efficiency: f64,
    /// Background counts per second.
    pub dark_rate: f64,
    /// Seconds per count record.
    pub integration_time: f64,
    /// `P_exc = η·P_meas`.
    pub power_correction_eta: f64,
}

impl DetectionChain {
    /// EMCCD readout as characterized for the fluorescence setup: 12 % overall
    /// detection efficiency (quantum efficiency 0.9, so 0.1333 for collection,
    /// propagation and filters), negligible dark counts, and η = 0.61.
    pub fn paper_emccd() -> Self {
        Self {
            collection_efficiency: 0.12 / 0.9,
            quantum_efficiency: 0.9,
            dark_rate: 0.0,
            integration_time: 1.0,
            power_correction_eta: 0.61,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper-EMCCD" => Some(Self::paper_emccd()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("collection_efficiency", self.collection_efficiency),
            ("quantum_efficiency", self.quantum_efficiency),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(invalid("dark_rate must be non-negative"));
        }
        if !(self.integration_time > 0.0) || !self.integration_time.is_finite() {
            return Err(invalid("integration_time must be positive"));
        }
        if !(self.power_correction_eta > 0.0 && self.power_correction_eta <= 1.0) {
            return Err(invalid("power_correction_eta must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn overall_efficiency(&self) -> f64 {
        self.collection_efficiency * self.quantum_efficiency
    }

    /// Mean counts for an emission rate (events/s) at the sample.
    pub fn expected_counts(&self, mean_rate: f64) -> f64 {
        (mean_rate * self.overall_efficiency() + self.dark_rate) * self.integration_time
    }
}

pub fn poisson_draw(mean: f64, rng: &mut Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// One shot-noise-limited count record for an emission rate.
pub fn photon_counter(mean_rate: f64, chain: &DetectionChain, seed: u64) -> Result<u64> {
    let mut rng = rng_for(seed, stream::SWEEP, 0);
    photon_counter_with(mean_rate, chain, &mut rng)
}

pub fn photon_counter_with(mean_rate: f64, chain: &DetectionChain, rng: &mut Rng) -> Result<u64> {
    if !(mean_rate >= 0.0) || !mean_rate.is_finite() {
        return Err(invalid(format!("mean rate must be non-negative, got {mean_rate}")));
    }
    chain.validate()?;
    Ok(poisson_draw(chain.expected_counts(mean_rate), rng))
}

/// Doubly stochastic photon arrival times: in sample `j` the number of events
/// is Poisson with mean `rate_per_watt·I_j·dt`, placed uniformly in the sample.
pub fn photon_stream(trace: &FieldTrace, rate_per_watt: f64, seed: u64) -> Result<Vec<f64>> {
    if !(rate_per_watt >= 0.0) || !rate_per_watt.is_finite() {
        return Err(invalid("rate_per_watt must be non-negative"));
    }
    const CHUNK: usize = 1 << 16;
    let dt = trace.dt;
    let parts: Vec<Vec<f64>> = trace
        .samples
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut rng = rng_for(seed, stream::PHOTON_STREAM, c as u64);
            let mut out = Vec::new();
            for (i, e) in chunk.iter().enumerate() {
                let k = poisson_draw(rate_per_watt * e.norm_sqr() * dt, &mut rng);
                let t0 = (c * CHUNK + i) as f64 * dt;
                let mut local: Vec<f64> = (0..k).map(|_| t0 + rng.random::<f64>() * dt).collect();
                local.sort_by(f64::total_cmp);
                out.extend(local);
            }
            out
        })
        .collect();
    Ok(parts.concat())
}

/// How the fringe-resolved interferogram is low-passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FringeFilter {
    /// Exact average over the carrier phase.
    Analytic,
    /// Boxcar average of the raw signal over one fringe period, sampled at
    /// `points_per_fringe` delays.
    MovingAverage { points_per_fringe: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbtOptions {
    pub filter: FringeFilter,
    /// Weight of a one-photon detector response `β⟨|E₁+E₂|²⟩/4`.
    pub linear_background: f64,
    /// Relative Gaussian readout noise on each recorded value.
    pub readout_noise: f64,
    pub seed: u64,
    /// Batches used for the batch-means standard error.
    pub batches: usize,
}

impl Default for HbtOptions {
    fn default() -> Self {
        Self {
            filter: FringeFilter::Analytic,
            linear_background: 0.0,
            readout_noise: 0.0,
            seed: 0,
            batches: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferogramScan {
    pub delays: Vec<f64>,
    pub raw_signal: Vec<f64>,
    pub filtered_signal: Vec<f64>,
    pub filtered_std_err: Vec<f64>,
    /// Carrier period `2π/ω`, s.
    pub fringe_period: f64,
    pub filter: FringeFilter,
    pub effective_samples: u64,
}

impl InterferogramScan {
    /// CSV with header `tau_s,raw,filtered`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_s,raw,filtered\n");
        for ((d, r), f) in self.delays.iter().zip(&self.raw_signal).zip(&self.filtered_signal) {
            out.push_str(&format!("{d},{r},{f}\n"));
        }
        out
    }
}

/// Time averages needed to evaluate the interferogram at any carrier phase for
/// one envelope lag, plus per-batch fringe-averaged values.
#[derive(Debug, Clone)]
struct Harmonics {
    dc: f64,
    first: Complex64,
    second: Complex64,
    lin_dc: f64,
    lin_first: Complex64,
    batch_filtered: Vec<f64>,
}

impl Harmonics {
    fn raw(&self, phase: f64, beta: f64) -> f64 {
        let e1 = Complex64::from_polar(1.0, phase);
        let e2 = e1 * e1;
        let tpa = (self.dc + 4.0 * (e1 * self.first).re + 2.0 * (e2 * self.second).re) / 16.0;
        let lin = (self.lin_dc + 2.0 * (e1 * self.lin_first).re) / 4.0;
        tpa + beta * lin
    }

    fn filtered(&self, beta: f64) -> f64 {
        self.dc / 16.0 + beta * self.lin_dc / 4.0
    }
}

fn harmonics(trace: &FieldTrace, lag: i64, batches: usize, beta: f64) -> Harmonics {
    let n = trace.len();
    let s = &trace.samples;
    let (lo, hi) = if lag >= 0 {
        (0, n - lag as usize)
    } else {
        ((-lag) as usize, n)
    };
    let count = hi - lo;
    let batch_len = count.div_ceil(batches.max(1));
    let mut dc = 0.0;
    let mut first = Complex64::new(0.0, 0.0);
    let mut second = Complex64::new(0.0, 0.0);
    let mut lin_dc = 0.0;
    let mut lin_first = Complex64::new(0.0, 0.0);
    let mut batch_filtered = Vec::with_capacity(batches);
    let mut start = lo;
    while start < hi {
        let end = (start + batch_len).min(hi);
        let (mut bdc, mut blin) = (0.0, 0.0);
        for t in start..end {
            let a = s[t];
            let b = s[(t as i64 + lag) as usize];
            let big_a = a.norm_sqr() + b.norm_sqr();
            let c = a.conj() * b;
            let d = big_a * big_a + 2.0 * c.norm_sqr();
            bdc += d;
            blin += big_a;
            first += c * big_a;
            second += c * c;
            lin_first += c;
        }
        dc += bdc;
        lin_dc += blin;
        let len = (end - start) as f64;
        batch_filtered.push(bdc / len / 16.0 + beta * blin / len / 4.0);
        start = end;
    }
    let norm = 1.0 / count as f64;
    Harmonics {
        dc: dc * norm,
        first: first * norm,
        second: second * norm,
        lin_dc: lin_dc * norm,
        lin_first: lin_first * norm,
        batch_filtered,
    }
}

/// Interferometer scan with default options (analytic fringe average).
pub fn hbt_scan(trace: &FieldTrace, delays: &[f64]) -> Result<InterferogramScan> {
    hbt_scan_with(trace, delays, &HbtOptions::default())
}

pub fn hbt_scan_with(trace: &FieldTrace, delays: &[f64], opts: &HbtOptions) -> Result<InterferogramScan> {
    if delays.is_empty() {
        return Err(invalid("no delays requested"));
    }
    if delays.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("delays must be strictly increasing"));
    }
    if !(trace.carrier_freq > 0.0) {
        return Err(invalid("interferometer needs a positive carrier frequency"));
    }
    if !(opts.readout_noise >= 0.0) || !(opts.linear_background >= 0.0) {
        return Err(invalid("noise and background weights must be non-negative"));
    }
    if !(trace.mean_power() > 0.0) {
        return Err(Error::DegenerateInput("zero-power trace".into()));
    }
    let period = 2.0 * std::f64::consts::PI / trace.carrier_freq;
    let half = (trace.len() / 2) as i64;
    let lag_of = |tau: f64| -> Result<i64> {
        let k = (tau / trace.dt).round();
        if !k.is_finite() || k.abs() >= half as f64 {
            return Err(invalid(format!("delay {tau:e} s lies outside the trace")));
        }
        Ok(k as i64)
    };
    let sub_delays = |tau: f64, k: usize| -> Vec<f64> {
        (0..k)
            .map(|j| tau + ((j as f64 + 0.5) / k as f64 - 0.5) * period)
            .collect()
    };

    let mut needed = std::collections::BTreeSet::new();
    for &tau in delays {
        needed.insert(lag_of(tau)?);
        if let FringeFilter::MovingAverage { points_per_fringe } = opts.filter {
            if points_per_fringe < 5 {
                return Err(invalid("moving average needs at least 5 points per fringe"));
            }
            for t in sub_delays(tau, points_per_fringe) {
                needed.insert(lag_of(t)?);
            }
        }
    }
    let lags: Vec<i64> = needed.into_iter().collect();
    let beta = opts.linear_background;
    let table: BTreeMap<i64, Harmonics> = lags
        .par_iter()
        .map(|&k| (k, harmonics(trace, k, opts.batches, beta)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    let omega = trace.carrier_freq;
    let raw_at = |tau: f64| -> f64 {
        let k = (tau / trace.dt).round() as i64;
        table[&k].raw(omega * tau, beta).max(0.0)
    };

    let mut raw = Vec::with_capacity(delays.len());
    let mut filtered = Vec::with_capacity(delays.len());
    let mut std_err = Vec::with_capacity(delays.len());
    for &tau in delays {
        let h = &table[&lag_of(tau)?];
        raw.push(raw_at(tau));
        let f = match opts.filter {
            FringeFilter::Analytic => h.filtered(beta),
            FringeFilter::MovingAverage { points_per_fringe } => {
                let pts = sub_delays(tau, points_per_fringe);
                pts.iter().map(|&t| raw_at(t)).sum::<f64>() / pts.len() as f64
            }
        };
        filtered.push(f);
        let (_, sd) = mean_std(&h.batch_filtered);
        std_err.push(sd / (h.batch_filtered.len() as f64).sqrt());
    }

    if opts.readout_noise > 0.0 {
        let mut rng = rng_for(opts.seed, stream::READOUT, 0);
        let sigma = opts.readout_noise;
        for i in 0..delays.len() {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            raw[i] = (raw[i] * (1.0 + sigma * x)).max(0.0);
            let noise = sigma * filtered[i];
            filtered[i] = (filtered[i] + noise * y).max(0.0);
            std_err[i] = (std_err[i].powi(2) + noise.powi(2)).sqrt();
        }
    }

    Ok(InterferogramScan {
        delays: delays.to_vec(),
        raw_signal: raw,
        filtered_signal: filtered,
        filtered_std_err: std_err,
        fringe_period: period,
        filter: opts.filter,
        effective_samples: trace.len() as u64,
    })
}

/// `g²(0) = 2r/(3 − r)` from the fringe-averaged interferogram, with
/// `r = S̄(0)/⟨S̄⟩_tail`, plus the pointwise inversion
/// `g²(τ) = (r(τ)(2g²(0) + 4) − 2g²(0))/4`.
///
/// `coherence_time`, when known, enforces a tail window starting at or beyond
/// five coherence times.
pub fn extract_g2(
    scan: &InterferogramScan,
    tail_window: (f64, f64),
    coherence_time: Option<f64>,
) -> Result<CorrelationEstimate> {
    let (start, end) = tail_window;
    if !(end > start) || !(start > 0.0) {
        return Err(invalid("tail window must be a positive, non-empty delay range"));
    }
    if let Some(tc) = coherence_time {
        if start < 5.0 * tc {
            return Err(invalid(format!(
                "tail window starts at {start:e} s, inside 5 coherence times ({:e} s)",
                5.0 * tc
            )));
        }
    }
    let i0 = scan
        .delays
        .iter()
        .position(|&d| d == 0.0)
        .ok_or_else(|| invalid("scan has no zero-delay point"))?;
    let tail: Vec<usize> = (0..scan.delays.len())
        .filter(|&i| scan.delays[i] >= start && scan.delays[i] <= end)
        .collect();
    if tail.is_empty() {
        return Err(invalid("no scan delays inside the tail window"));
    }
    let s0 = scan.filtered_signal[i0];
    let sig0 = scan.filtered_std_err[i0];
    let st = tail.iter().map(|&i| scan.filtered_signal[i]).sum::<f64>() / tail.len() as f64;
    let sigt = (tail
        .iter()
        .map(|&i| scan.filtered_std_err[i].powi(2))
        .sum::<f64>()
        / tail.len() as f64)
        .sqrt();
    if !(st > 0.0) || !(s0 > 0.0) {
        return Err(Error::DegenerateInput("non-positive filtered signal".into()));
    }
    let r = s0 / st;
    if r >= 3.0 {
        return Err(Error::OutOfModel(format!(
            "peak-to-tail ratio {r:.3} >= 3 cannot come from a classical field in this model"
        )));
    }
    let rel_t = sigt / st;
    let g0 = 2.0 * r / (3.0 - r);
    let sigma_r0 = r * ((sig0 / s0).powi(2) + rel_t.powi(2)).sqrt();
    let sigma_g0 = 6.0 * sigma_r0 / (3.0 - r).powi(2);
    let slope = (2.0 * g0 + 4.0) / 4.0;
    let mut values = Vec::with_capacity(scan.delays.len());
    let mut errs = Vec::with_capacity(scan.delays.len());
    for i in 0..scan.delays.len() {
        if i == i0 {
            values.push(g0);
            errs.push(sigma_g0);
            continue;
        }
        let s = scan.filtered_signal[i];
        let ri = s / st;
        values.push(((ri * (2.0 * g0 + 4.0) - 2.0 * g0) / 4.0).max(0.0));
        let rel_i = if s > 0.0 { scan.filtered_std_err[i] / s } else { 0.0 };
        errs.push(slope * ri * (rel_i.powi(2) + rel_t.powi(2)).sqrt());
    }
    Ok(CorrelationEstimate {
        order: 2,
        delays: scan.delays.clone(),
        values,
        std_errors: errs,
        effective_samples: scan.effective_samples,
        requested_delays: None,
    })
}

/// What drives the absorber: a known `g²(0)` at carrier `omega`, or a trace
/// whose statistics are measured (the trace is rescaled to the excitation
/// power, so only its shape matters).
#[derive(Debug, Clone, Copy)]
pub enum Excitation<'a> {
    Statistics { g2_zero: f64, omega: f64 },
    Trace(&'a FieldTrace),
}

impl Excitation<'_> {
    /// Reduces a trace to its measured statistics after the broadband check.
    pub fn resolve(&self, absorber: &AbsorberSpec) -> Result<(f64, f64)> {
        match *self {
            Excitation::Statistics { g2_zero, omega } => Ok((g2_zero, omega)),
            Excitation::Trace(trace) => {
                check_broadband(absorber, trace)?;
                let m1 = trace.mean_power();
                if !(m1 > 0.0) {
                    return Err(Error::DegenerateInput("zero-power trace".into()));
                }
                Ok((trace.intensity_moment(2) / (m1 * m1), trace.carrier_freq))
            }
        }
    }
}

/// Mean fluorescence counts before shot noise: `η` correction, two-photon
/// rate, quantum yield, detection efficiency and dark counts.
pub fn expected_fluorescence_counts(
    excitation_power_measured: f64,
    excitation: &Excitation,
    absorber: &AbsorberSpec,
    chain: &DetectionChain,
) -> Result<f64> {
    if !(excitation_power_measured >= 0.0) || !excitation_power_measured.is_finite() {
        return Err(invalid("excitation power must be non-negative"));
    }
    chain.validate()?;
    let p_exc = chain.power_correction_eta * excitation_power_measured;
    let (g2, omega) = excitation.resolve(absorber)?;
    let rate = mollow_rate(absorber, g2, p_exc, omega)?;
    Ok(chain.expected_counts(absorber.quantum_yield * rate))
}

/// Shot-noise-limited fluorescence count record.
pub fn fluorescence_counts(
    excitation_power_measured: f64,
    excitation: &Excitation,
    absorber: &AbsorberSpec,
    chain: &DetectionChain,
    seed: u64,
) -> Result<u64> {
    let mut rng = rng_for(seed, stream::SWEEP, 0);
    let mean = expected_fluorescence_counts(excitation_power_measured, excitation, absorber, chain)?;
    Ok(poisson_draw(mean, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> DetectionChain {
        DetectionChain::paper_emccd()
    }

    #[test]
    fn emccd_chain_values() {
        let c = chain();
        assert!((c.overall_efficiency() - 0.12).abs() < 1e-12);
        assert_eq!(c.power_correction_eta, 0.61);
        assert!((c.expected_counts(1000.0) - 120.0).abs() < 1e-9);
    }

    #[test]
    fn counter_edge_cases() {
        let mut c = chain();
        for s in 0..20 {
            assert_eq!(photon_counter(0.0, &c, s).unwrap(), 0);
        }
        assert!(matches!(photon_counter(-1.0, &c, 0), Err(Error::InvalidArgument(_))));
        c.dark_rate = 0.5;
        c.integration_time = 2.0;
        assert!((c.expected_counts(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chain_validation() {
        let mut c = chain();
        c.integration_time = 0.0;
        assert!(c.validate().is_err());
        let mut c = chain();
        c.quantum_efficiency = 1.2;
        assert!(c.validate().is_err());
        let mut c = chain();
        c.power_correction_eta = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn raw_at_zero_delay_is_second_moment() {
        let s: Vec<Complex64> = (0..500)
            .map(|i| Complex64::from_polar(1.0 + (i % 7) as f64 * 0.1, i as f64 * 0.3))
            .collect();
        let t = FieldTrace::new(s, 1e-15, 1.93e15, 0).unwrap();
        let scan = hbt_scan(&t, &[0.0]).unwrap();
        let m2 = t.intensity_moment(2);
        assert!((scan.raw_signal[0] - m2).abs() < 1e-12 * m2);
        assert!(scan.raw_signal[0] > scan.filtered_signal[0]);
    }

    #[test]
    fn raw_matches_direct_evaluation() {
        // brute-force |E(t) + E(t+τ)e^{iωτ}|⁴/16 averaged over t
        let s: Vec<Complex64> = (0..300)
            .map(|i| Complex64::from_polar(1.0 + ((i * 13) % 11) as f64 * 0.05, (i as f64).sqrt()))
            .collect();
        let t = FieldTrace::new(s.clone(), 1e-15, 1.93e15, 0).unwrap();
        let taus = [-4.1e-15, -1e-15, 0.0, 2.2e-15, 7.0e-15];
        let scan = hbt_scan(&t, &taus).unwrap();
        for (i, &tau) in taus.iter().enumerate() {
            let k = (tau / 1e-15f64).round() as i64;
            let ph = Complex64::from_polar(1.0, 1.93e15 * tau);
            let mut acc = 0.0;
            let mut cnt = 0.0;
            for j in 0..300i64 {
                let jj = j + k;
                if !(0..300).contains(&jj) {
                    continue;
                }
                acc += (s[j as usize] + s[jj as usize] * ph).norm_sqr().powi(2) / 16.0;
                cnt += 1.0;
            }
            assert!((scan.raw_signal[i] - acc / cnt).abs() < 1e-12 * acc / cnt);
        }
    }

    #[test]
    fn moving_average_equals_phase_average_for_constant_envelope() {
        let t = FieldTrace::new(vec![Complex64::new(0.1, 0.2); 4000], 1e-14, 1.93e15, 0).unwrap();
        let delays: Vec<f64> = (0..40).map(|i| i as f64 * 3e-15).collect();
        let a = hbt_scan(&t, &delays).unwrap();
        let opts = HbtOptions {
            filter: FringeFilter::MovingAverage { points_per_fringe: 8 },
            ..HbtOptions::default()
        };
        let b = hbt_scan_with(&t, &delays, &opts).unwrap();
        for (x, y) in a.filtered_signal.iter().zip(&b.filtered_signal) {
            assert!((x - y).abs() < 1e-9 * x);
        }
        // coherent input: filtered constant in τ
        let f0 = a.filtered_signal[0];
        assert!(a.filtered_signal.iter().all(|f| (f - f0).abs() < 1e-12 * f0));
    }

    #[test]
    fn extraction_inverts_known_ratios() {
        let mk = |r: f64| InterferogramScan {
            delays: vec![0.0, 1e-12, 2e-12],
            raw_signal: vec![0.0; 3],
            filtered_signal: vec![r, 1.0, 1.0],
            filtered_std_err: vec![0.0; 3],
            fringe_period: 3e-15,
            filter: FringeFilter::Analytic,
            effective_samples: 1,
        };
        let g = extract_g2(&mk(1.0), (0.5e-12, 3e-12), None).unwrap();
        assert!((g.values[0] - 1.0).abs() < 1e-12);
        let g = extract_g2(&mk(1.5), (0.5e-12, 3e-12), None).unwrap();
        assert!((g.values[0] - 2.0).abs() < 1e-12);
        // tail points map back to g2 = 1
        assert!((g.values[1] - 1.0).abs() < 1e-12);
        assert!(matches!(
            extract_g2(&mk(3.0), (0.5e-12, 3e-12), None),
            Err(Error::OutOfModel(_))
        ));
        assert!(matches!(
            extract_g2(&mk(1.5), (0.5e-12, 3e-12), Some(0.2e-12)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn scan_rejects_out_of_range_delay() {
        let t = FieldTrace::new(vec![Complex64::new(1.0, 0.0); 100], 1e-15, 1.93e15, 0).unwrap();
        assert!(matches!(hbt_scan(&t, &[0.0, 60e-15]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fluorescence_applies_eta() {
        let a = AbsorberSpec::dcm();
        let c = chain();
        let omega = 1.93e15;
        let exc = Excitation::Statistics { g2_zero: 1.0, omega };
        let counts = expected_fluorescence_counts(100e-6, &exc, &a, &c).unwrap();
        let rate = mollow_rate(&a, 1.0, 61e-6, omega).unwrap();
        let expected = c.expected_counts(a.quantum_yield * rate);
        assert!((counts - expected).abs() < 1e-12 * expected);
        let th = Excitation::Statistics { g2_zero: 2.0, omega };
        let counts2 = expected_fluorescence_counts(100e-6, &th, &a, &c).unwrap();
        assert!((counts2 / counts - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_power_gives_dark_counts_only() {
        let a = AbsorberSpec::dcm();
        let mut c = chain();
        let exc = Excitation::Statistics { g2_zero: 2.0, omega: 1.93e15 };
        assert_eq!(expected_fluorescence_counts(0.0, &exc, &a, &c).unwrap(), 0.0);
        c.dark_rate = 3.0;
        assert_eq!(expected_fluorescence_counts(0.0, &exc, &a, &c).unwrap(), 3.0);
        assert!(expected_fluorescence_counts(-1.0, &exc, &a, &c).is_err());
    }
}
