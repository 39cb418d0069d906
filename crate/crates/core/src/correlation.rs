//! Estimators of the degree of coherence `g²(τ)` and `g⁽ⁿ⁾(0)`.
//!
//! All trace estimators use the semiclassical intensity form
//! `g²(τ) = ⟨I(t)I(t+τ)⟩ / ⟨I⟩²` on a single stationary trace. The numerator is
//! the unbiased time average over the `N − |k|` available pairs; the
//! denominator uses the global trace mean. Requested delays are rounded to the
//! nearest sample and the rounded values are what the estimate reports.
//! Standard errors come from a block bootstrap whose blocks span at least ten
//! coherence times when the coherence time can be estimated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{block_bootstrap, total, BootstrapConfig};
use crate::error::{invalid, Error, Result};
use crate::numeric::mean_std;
use crate::source::coherence_time;
use crate::trace::FieldTrace;

pub const MIN_ORDER: u32 = 2;
pub const MAX_ORDER: u32 = 6;
pub const MIN_EVENTS: usize = 1000;

/// Fraction of events sharing a timestamp with their predecessor above which
/// the zero-delay coincidence bin is reported as divergent.
const DUPLICATE_FRACTION_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub order: u32,
    /// Delays actually evaluated (after rounding to the sample grid), s.
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub effective_samples: u64,
    /// Delays as requested, before rounding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requested_delays: Option<Vec<f64>>,
}

impl CorrelationEstimate {
    /// Value at zero delay, if present.
    pub fn at_zero(&self) -> Option<(f64, f64)> {
        self.delays
            .iter()
            .position(|&d| d == 0.0)
            .map(|i| (self.values[i], self.std_errors[i]))
    }

    /// CSV with header `tau_s,g_value,std_err`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_s,g_value,std_err\n");
        for ((d, v), e) in self.delays.iter().zip(&self.values).zip(&self.std_errors) {
            out.push_str(&format!("{d},{v},{e}\n"));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("estimate serializes")
    }
}

/// Bootstrap means alongside the point estimate.
#[derive(Debug, Clone)]
pub struct DetailedEstimate {
    pub estimate: CorrelationEstimate,
    pub bootstrap_means: Vec<f64>,
}

struct BlockLayout {
    len: usize,
    count: usize,
    effective_samples: u64,
}

fn block_layout(trace: &FieldTrace, target_blocks: usize) -> BlockLayout {
    let n = trace.len();
    let (min_len, effective) = match coherence_time(trace) {
        Ok(tc) => {
            let tc_samples = (tc / trace.dt).max(1.0);
            (
                (10.0 * tc_samples).ceil() as usize,
                ((n as f64 / tc_samples).round() as u64).max(1),
            )
        }
        Err(_) => (1, n as u64),
    };
    let len = n.div_ceil(target_blocks.max(2)).max(min_len).min(n.div_ceil(2));
    BlockLayout {
        len,
        count: n.div_ceil(len),
        effective_samples: effective,
    }
}

fn check_power(intensity: &[f64]) -> Result<()> {
    let total: f64 = intensity.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateInput("zero-power trace".into()));
    }
    Ok(())
}

fn round_delays(trace: &FieldTrace, delays: &[f64]) -> Result<Vec<i64>> {
    if delays.is_empty() {
        return Err(invalid("no delays requested"));
    }
    let half = trace.duration() / 2.0;
    let mut lags = Vec::with_capacity(delays.len());
    for &d in delays {
        if !d.is_finite() || d.abs() >= half {
            return Err(invalid(format!(
                "delay {d:e} s is not below half the trace duration ({half:e} s)"
            )));
        }
        lags.push((d / trace.dt).round() as i64);
    }
    if lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(
            "delays must be strictly increasing after rounding to the sample grid",
        ));
    }
    Ok(lags)
}

/// `g²(τ)` at the given delays with default bootstrap settings.
pub fn g2_tau(trace: &FieldTrace, delays: &[f64]) -> Result<CorrelationEstimate> {
    Ok(g2_tau_detailed(trace, delays, &BootstrapConfig::default())?.estimate)
}

pub fn g2_tau_detailed(
    trace: &FieldTrace,
    delays: &[f64],
    cfg: &BootstrapConfig,
) -> Result<DetailedEstimate> {
    let lags = round_delays(trace, delays)?;
    let intensity = trace.intensities();
    check_power(&intensity)?;
    let n = intensity.len();
    let layout = block_layout(trace, cfg.blocks);
    let nd = lags.len();

    // per block: [ΣI, L, (ΣI·I_k, pairs_k) for each lag]
    let blocks: Vec<Vec<f64>> = (0..layout.count)
        .into_par_iter()
        .map(|b| {
            let start = b * layout.len;
            let end = (start + layout.len).min(n);
            let mut v = Vec::with_capacity(2 + 2 * nd);
            v.push(intensity[start..end].iter().sum());
            v.push((end - start) as f64);
            for &k in &lags {
                let lo = if k < 0 { start.max((-k) as usize) } else { start };
                let hi = if k > 0 { end.min(n - k as usize) } else { end };
                let mut s = 0.0;
                for t in lo..hi.max(lo) {
                    s += intensity[t] * intensity[(t as i64 + k) as usize];
                }
                v.push(s);
                v.push(hi.saturating_sub(lo) as f64);
            }
            v
        })
        .collect();

    let estimator = |t: &[f64]| -> Vec<f64> {
        let mean = t[0] / t[1];
        (0..nd)
            .map(|d| (t[2 + 2 * d] / t[3 + 2 * d]) / (mean * mean))
            .collect()
    };
    let values = estimator(&total(&blocks));
    let boot = block_bootstrap(&blocks, cfg.resamples, cfg.seed, estimator);
    Ok(DetailedEstimate {
        estimate: CorrelationEstimate {
            order: 2,
            delays: lags.iter().map(|&k| k as f64 * trace.dt).collect(),
            values,
            std_errors: boot.std_errors,
            effective_samples: layout.effective_samples,
            requested_delays: Some(delays.to_vec()),
        },
        bootstrap_means: boot.means,
    })
}

/// `g⁽ⁿ⁾(0) = ⟨Iⁿ⟩/⟨I⟩ⁿ` with block-bootstrap standard error.
pub fn gn_zero(trace: &FieldTrace, n: u32) -> Result<CorrelationEstimate> {
    gn_zero_with(trace, n, &BootstrapConfig::default())
}

pub fn gn_zero_with(trace: &FieldTrace, order: u32, cfg: &BootstrapConfig) -> Result<CorrelationEstimate> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(invalid(format!(
            "order {order} outside {MIN_ORDER}..={MAX_ORDER}"
        )));
    }
    let intensity = trace.intensities();
    check_power(&intensity)?;
    let n = intensity.len();
    let layout = block_layout(trace, cfg.blocks);
    let p = order as i32;
    let blocks: Vec<Vec<f64>> = (0..layout.count)
        .into_par_iter()
        .map(|b| {
            let start = b * layout.len;
            let end = (start + layout.len).min(n);
            let seg = &intensity[start..end];
            vec![
                seg.iter().sum(),
                seg.iter().map(|i| i.powi(p)).sum(),
                seg.len() as f64,
            ]
        })
        .collect();
    let estimator = |t: &[f64]| vec![(t[1] / t[2]) / (t[0] / t[2]).powi(p)];
    let value = estimator(&total(&blocks))[0];
    let boot = block_bootstrap(&blocks, cfg.resamples, cfg.seed, estimator);
    Ok(CorrelationEstimate {
        order,
        delays: vec![0.0],
        values: vec![value],
        std_errors: boot.std_errors,
        effective_samples: layout.effective_samples,
        requested_delays: None,
    })
}

/// Ensemble-average `g⁽ⁿ⁾(0)`: mean of `⟨Iⁿ⟩` over realizations divided by
/// the `n`-th power of the mean `⟨I⟩`; the standard error is the spread of
/// per-realization estimates over `√R`.
pub fn gn_zero_ensemble(traces: &[FieldTrace], order: u32) -> Result<CorrelationEstimate> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(invalid(format!(
            "order {order} outside {MIN_ORDER}..={MAX_ORDER}"
        )));
    }
    if traces.len() < 2 {
        return Err(Error::InsufficientData(
            "ensemble estimate needs at least two realizations".into(),
        ));
    }
    let moments: Vec<(f64, f64)> = traces
        .par_iter()
        .map(|t| (t.intensity_moment(1), t.intensity_moment(order)))
        .collect();
    if moments.iter().any(|m| !(m.0 > 0.0)) {
        return Err(Error::DegenerateInput("zero-power realization".into()));
    }
    let r = moments.len() as f64;
    let m1 = moments.iter().map(|m| m.0).sum::<f64>() / r;
    let mn = moments.iter().map(|m| m.1).sum::<f64>() / r;
    let per: Vec<f64> = moments.iter().map(|m| m.1 / m.0.powi(order as i32)).collect();
    let (_, sd) = mean_std(&per);
    Ok(CorrelationEstimate {
        order,
        delays: vec![0.0],
        values: vec![mn / m1.powi(order as i32)],
        std_errors: vec![sd / r.sqrt()],
        effective_samples: traces.iter().map(|t| t.len() as u64).sum(),
        requested_delays: None,
    })
}

/// `g²(τ)` from photon arrival times.
///
/// Events are binned at `bin_width`; with bin counts `n_j` and mean `μ`,
/// `g²(0) = ⟨n(n−1)⟩/μ²` (self-pairs removed) and `g²(k) = ⟨n_j n_{j+k}⟩/μ²`.
/// An exact-duplicate fraction above 1 % makes the zero bin divergent and is
/// reported as `DegenerateInput` rather than returned.
pub fn g2_from_counts(timestamps: &[f64], bin_width: f64, max_delay: f64) -> Result<CorrelationEstimate> {
    g2_from_counts_with(timestamps, bin_width, max_delay, &BootstrapConfig::default())
}

pub fn g2_from_counts_with(
    timestamps: &[f64],
    bin_width: f64,
    max_delay: f64,
    cfg: &BootstrapConfig,
) -> Result<CorrelationEstimate> {
    if timestamps.len() < MIN_EVENTS {
        return Err(Error::InsufficientData(format!(
            "{} events, need at least {MIN_EVENTS}",
            timestamps.len()
        )));
    }
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(invalid("bin_width must be positive"));
    }
    if !(max_delay >= 0.0) || !max_delay.is_finite() {
        return Err(invalid("max_delay must be non-negative"));
    }
    if timestamps.iter().any(|t| !t.is_finite()) {
        return Err(invalid("non-finite timestamp"));
    }
    let mut ts = timestamps.to_vec();
    ts.sort_by(f64::total_cmp);
    let duplicates = ts.windows(2).filter(|w| w[1] == w[0]).count();
    if duplicates as f64 > DUPLICATE_FRACTION_LIMIT * ts.len() as f64 {
        return Err(Error::DegenerateInput(format!(
            "divergent zero-delay bin: {duplicates} of {} events duplicate their predecessor",
            ts.len()
        )));
    }
    let t0 = ts[0];
    let nbins = ((ts[ts.len() - 1] - t0) / bin_width).floor() as usize + 1;
    let kmax = (max_delay / bin_width).round() as usize;
    if nbins < 2 * (kmax + 1) {
        return Err(Error::InsufficientData(
            "record too short for the requested maximum delay".into(),
        ));
    }
    let mut counts = vec![0u32; nbins];
    for &t in &ts {
        let j = (((t - t0) / bin_width) as usize).min(nbins - 1);
        counts[j] += 1;
    }

    let target = cfg.blocks.max(2);
    let len = nbins.div_ceil(target).max(kmax + 1);
    let nblocks = nbins.div_ceil(len);
    // per block: [Σn, bins, (Σ pair products, pair count) per lag]
    let blocks: Vec<Vec<f64>> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let start = b * len;
            let end = (start + len).min(nbins);
            let mut v = Vec::with_capacity(2 + 2 * (kmax + 1));
            v.push(counts[start..end].iter().map(|&c| c as f64).sum());
            v.push((end - start) as f64);
            for k in 0..=kmax {
                let hi = end.min(nbins - k);
                let mut s = 0.0;
                for j in start..hi.max(start) {
                    let a = counts[j] as f64;
                    s += if k == 0 { a * (a - 1.0) } else { a * counts[j + k] as f64 };
                }
                v.push(s);
                v.push(hi.saturating_sub(start) as f64);
            }
            v
        })
        .collect();
    let estimator = |t: &[f64]| -> Vec<f64> {
        let mu = t[0] / t[1];
        (0..=kmax)
            .map(|k| (t[2 + 2 * k] / t[3 + 2 * k]) / (mu * mu))
            .collect()
    };
    let values = estimator(&total(&blocks));
    let boot = block_bootstrap(&blocks, cfg.resamples, cfg.seed, estimator);
    Ok(CorrelationEstimate {
        order: 2,
        delays: (0..=kmax).map(|k| k as f64 * bin_width).collect(),
        values,
        std_errors: boot.std_errors,
        effective_samples: ts.len() as u64,
        requested_delays: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{generate, SourceSpec};
    use num_complex::Complex64;

    fn constant_trace(n: usize) -> FieldTrace {
        FieldTrace::new(vec![Complex64::new(0.03, 0.01); n], 1e-15, 1.9e15, 0).unwrap()
    }

    #[test]
    fn coherent_is_flat_with_zero_spread() {
        let t = constant_trace(4096);
        let delays: Vec<f64> = (0..10).map(|k| k as f64 * 1e-14).collect();
        let e = g2_tau(&t, &delays).unwrap();
        for (v, s) in e.values.iter().zip(&e.std_errors) {
            assert!((v - 1.0).abs() < 1e-12);
            assert!(*s < 1e-12);
        }
        for n in 2..=6 {
            let g = gn_zero(&t, n).unwrap();
            assert!((g.values[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn argument_errors() {
        let t = constant_trace(1000);
        assert!(matches!(g2_tau(&t, &[0.0, 6e-13]), Err(Error::InvalidArgument(_))));
        assert!(matches!(g2_tau(&t, &[0.0, 0.2e-15]), Err(Error::InvalidArgument(_))));
        assert!(matches!(gn_zero(&t, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(gn_zero(&t, 7), Err(Error::InvalidArgument(_))));
        let dark = FieldTrace::new(vec![Complex64::new(0.0, 0.0); 100], 1e-15, 0.0, 0).unwrap();
        assert!(matches!(g2_tau(&dark, &[0.0]), Err(Error::DegenerateInput(_))));
        assert!(matches!(gn_zero(&dark, 2), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn delays_round_to_nearest_sample() {
        let t = constant_trace(1000);
        let e = g2_tau(&t, &[0.0, 1.4e-15, 2.6e-15]).unwrap();
        for (got, want) in e.delays.iter().zip([0.0, 1e-15, 3e-15]) {
            assert!((got - want).abs() < 1e-27);
        }
        assert_eq!(e.requested_delays.as_deref(), Some(&[0.0, 1.4e-15, 2.6e-15][..]));
    }

    #[test]
    fn negative_delays_mirror_positive_ones() {
        let spec = SourceSpec::sld();
        let dt = 1.0 / (10.0 * spec.bandwidth_hz());
        let t = generate(&spec, 20000.0 * dt, dt, 4).unwrap();
        let e = g2_tau(&t, &[-3.0 * dt, -dt, 0.0, dt, 3.0 * dt]).unwrap();
        assert!((e.values[0] - e.values[4]).abs() < 1e-12);
        assert!((e.values[1] - e.values[3]).abs() < 1e-12);
    }

    #[test]
    fn too_few_events() {
        let ts: Vec<f64> = (0..999).map(|i| i as f64).collect();
        assert!(matches!(
            g2_from_counts(&ts, 1.0, 3.0),
            Err(Error::InsufficientData(_))
        ));
        let ts: Vec<f64> = (0..2000).map(|i| i as f64).collect();
        assert!(matches!(g2_from_counts(&ts, 0.0, 3.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn csv_layout() {
        let e = CorrelationEstimate {
            order: 2,
            delays: vec![0.0, 1e-15],
            values: vec![2.0, 1.5],
            std_errors: vec![0.01, 0.02],
            effective_samples: 10,
            requested_delays: None,
        };
        assert_eq!(e.to_csv(), "tau_s,g_value,std_err\n0,2,0.01\n0.000000000000001,1.5,0.02\n");
        let j = e.to_json();
        assert_eq!(j["order"], 2);
        assert_eq!(e.at_zero(), Some((2.0, 0.01)));
    }
}
