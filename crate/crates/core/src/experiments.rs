//! Simulated fluorescence experiment: excitation-power sweeps with a thermal
//! and a coherent source, quadratic regression and the thermal enhancement
//! ratio of the two-photon signal.
//!
//! Each source trace is generated once per master seed and its `ĝ²(0)` is
//! measured once; all fluorophores and powers share that estimate, as they
//! would share the physical light source.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::gn_zero;
use crate::error::{invalid, Error, Result};
use crate::instruments::{poisson_draw, DetectionChain, Excitation};
use crate::numeric::logspace;
use crate::seeding::{derive_seed, rng_for, stream};
use crate::source::{generate, SourceSpec};
use crate::tpa::{mollow_rate, rate_ratio, AbsorberSpec, Rate};

/// How the source statistics enter the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExcitationModel {
    /// Generate a trace and use its measured `ĝ²(0)`.
    #[default]
    Trace,
    /// Use the model's expected `g²(0)`.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Excitation powers at the sample, W.
    pub powers: Vec<f64>,
    pub repeats: usize,
    /// Poisson shot noise on the counts; off gives expected counts.
    pub noise: bool,
    pub excitation: ExcitationModel,
    pub trace_samples: usize,
    pub trace_dt: f64,
    /// Relative standard deviation of a per-sweep power-meter miscalibration.
    pub power_calibration_error: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            powers: logspace(30e-6, 1e-3, 12),
            repeats: 5,
            noise: true,
            excitation: ExcitationModel::Trace,
            trace_samples: 1 << 20,
            trace_dt: 1.5e-14,
            power_calibration_error: 0.0,
        }
    }
}

impl SweepSettings {
    pub fn validate(&self) -> Result<()> {
        if self.powers.is_empty() {
            return Err(invalid("power list is empty"));
        }
        if self.powers.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(invalid("powers must be positive"));
        }
        if self.powers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("powers must be strictly increasing"));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats must be at least 1"));
        }
        if self.trace_samples < 2 || !(self.trace_dt > 0.0) {
            return Err(invalid("trace needs at least 2 samples and positive dt"));
        }
        if !(self.power_calibration_error >= 0.0) {
            return Err(invalid("power_calibration_error must be non-negative"));
        }
        Ok(())
    }
}

/// A source reduced to what the fluorescence rate needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedSource {
    pub label: String,
    pub spec: SourceSpec,
    pub g2_zero: f64,
    pub g2_std_err: f64,
    pub omega: f64,
    /// Spectral width of the generated trace, Hz (0 for analytic sources).
    pub spectral_width_hz: f64,
}

/// Generates the source trace (or takes the analytic value) and measures
/// `ĝ²(0)`.
pub fn prepare_source(label: &str, spec: &SourceSpec, settings: &SweepSettings, seed: u64) -> Result<PreparedSource> {
    spec.validate()?;
    match settings.excitation {
        ExcitationModel::Analytic => Ok(PreparedSource {
            label: label.to_string(),
            spec: spec.clone(),
            g2_zero: spec.expected_g2(),
            g2_std_err: 0.0,
            omega: spec.carrier_freq(),
            spectral_width_hz: 0.0,
        }),
        ExcitationModel::Trace => {
            let duration = settings.trace_samples as f64 * settings.trace_dt;
            let trace = generate(spec, duration, settings.trace_dt, seed)?;
            let g = gn_zero(&trace, 2)?;
            Ok(PreparedSource {
                label: label.to_string(),
                spec: spec.clone(),
                g2_zero: g.values[0],
                g2_std_err: g.std_errors[0],
                omega: trace.carrier_freq,
                spectral_width_hz: trace.spectral_width(),
            })
        }
    }
}

impl PreparedSource {
    fn excitation(&self) -> Excitation<'static> {
        Excitation::Statistics {
            g2_zero: self.g2_zero,
            omega: self.omega,
        }
    }

    /// Broadband check against the measured spectral width.
    pub fn check_absorber(&self, absorber: &AbsorberSpec) -> Result<()> {
        let bw = 2.0 * std::f64::consts::PI * self.spectral_width_hz;
        let ratio = absorber.broadband_ratio(bw);
        if ratio < crate::tpa::BROADBAND_MIN_RATIO {
            return Err(Error::ModelDomain(format!(
                "source {} is too broad for absorber {} (width ratio {ratio:.2})",
                self.label, absorber.label
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// Excitation power at the sample, W.
    pub power_exc: f64,
    /// One count per repeat.
    pub counts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub source_label: String,
    pub fluorophore_label: String,
    pub records: Vec<SweepRecord>,
    pub seed: u64,
}

impl SweepResult {
    /// CSV with header `P_exc_W,counts,repeat`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("P_exc_W,counts,repeat\n");
        for r in &self.records {
            for (i, c) in r.counts.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", r.power_exc, c, i));
            }
        }
        out
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .flat_map(|r| r.counts.iter().map(move |&c| (r.power_exc, c)))
            .collect()
    }
}

/// Sets `dipole_sq` so that a coherent source at `power_exc` yields
/// `target_counts` expected signal counts (background excluded).
pub fn calibrate_absorber(
    absorber: &AbsorberSpec,
    chain: &DetectionChain,
    omega: f64,
    power_exc: f64,
    target_counts: f64,
) -> Result<AbsorberSpec> {
    if !(target_counts > 0.0) || !(power_exc > 0.0) {
        return Err(invalid("calibration needs positive power and target counts"));
    }
    chain.validate()?;
    let per_unit = chain.overall_efficiency()
        * chain.integration_time
        * absorber.quantum_yield
        * absorber.lineshape(omega)
        * power_exc
        * power_exc;
    if !(per_unit > 0.0) {
        return Err(Error::DegenerateInput("detection chain has zero efficiency".into()));
    }
    let mut out = absorber.clone();
    out.dipole_sq = target_counts / per_unit;
    out.validate()?;
    Ok(out)
}

/// Sweep for an already prepared source.
pub fn power_sweep_prepared(
    source: &PreparedSource,
    absorber: &AbsorberSpec,
    chain: &DetectionChain,
    settings: &SweepSettings,
    seed: u64,
) -> Result<SweepResult> {
    settings.validate()?;
    chain.validate()?;
    absorber.validate()?;
    let scale = if settings.power_calibration_error > 0.0 {
        let mut rng = rng_for(seed, stream::POWER_CALIBRATION, 0);
        let x: f64 = StandardNormal.sample(&mut rng);
        (1.0 + settings.power_calibration_error * x).max(0.0)
    } else {
        1.0
    };
    let exc = source.excitation();
    let (g2, omega) = exc.resolve(absorber)?;
    let mut records = Vec::with_capacity(settings.powers.len());
    for (i, &p) in settings.powers.iter().enumerate() {
        let p_true = p * scale;
        let rate = absorber.quantum_yield * mollow_rate(absorber, g2, p_true, omega)?;
        let mean = chain.expected_counts(rate);
        let mut rng = rng_for(seed, stream::SWEEP, i as u64);
        let counts = (0..settings.repeats)
            .map(|_| {
                if settings.noise {
                    poisson_draw(mean, &mut rng) as f64
                } else {
                    mean
                }
            })
            .collect();
        records.push(SweepRecord { power_exc: p, counts });
    }
    Ok(SweepResult {
        source_label: source.label.clone(),
        fluorophore_label: absorber.label.clone(),
        records,
        seed,
    })
}

/// One fluorescence count per (power, repeat) for a source described by
/// `source`; the trace is generated from `seed`.
pub fn power_sweep(
    source: &SourceSpec,
    absorber: &AbsorberSpec,
    chain: &DetectionChain,
    powers: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<SweepResult> {
    let settings = SweepSettings {
        powers: powers.to_vec(),
        repeats,
        ..SweepSettings::default()
    };
    settings.validate()?;
    let prepared = prepare_source("source", source, &settings, derive_seed(seed, stream::SOURCE_TRACE, 0))?;
    power_sweep_prepared(&prepared, absorber, chain, &settings, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub b: f64,
    pub b_stderr: f64,
    /// 95 % confidence interval for `b`.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Amplitude at the reference power `x_ref`.
    pub amplitude: f64,
    pub x_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Quadratic coefficient, counts/W².
    pub a: f64,
    pub a_stderr: f64,
    pub exponent_check: Option<ExponentFit>,
    pub residual_stats: ResidualStats,
}

/// Minimum point count and decade span for the free-exponent check.
const EXPONENT_MIN_POINTS: usize = 5;
const EXPONENT_MIN_DECADES: f64 = 0.5;
const Z95: f64 = 1.959_963_984_540_054;

fn poisson_weight(c: f64) -> f64 {
    1.0 / c.max(1.0)
}

/// Weighted least squares `f(x) = a·x²` with variance `max(counts, 1)`, plus
/// a free-exponent fit `A·(x/x_ref)^b`.
pub fn fit_quadratic(sweep: &SweepResult) -> Result<FitResult> {
    let pts = sweep.points();
    let mut distinct: Vec<f64> = sweep.records.iter().map(|r| r.power_exc).collect();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} distinct powers, need at least 3",
            distinct.len()
        )));
    }
    if pts.iter().all(|&(_, c)| c == 0.0) {
        return Err(Error::DegenerateInput("all counts are zero".into()));
    }
    if pts.iter().any(|&(x, c)| !(x > 0.0) || !(c >= 0.0)) {
        return Err(invalid("powers must be positive and counts non-negative"));
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in &pts {
        let w = poisson_weight(y);
        sxy += w * y * x * x;
        sxx += w * x.powi(4);
    }
    let a = sxy / sxx;
    let a_stderr = (1.0 / sxx).sqrt();
    let chi2: f64 = pts
        .iter()
        .map(|&(x, y)| poisson_weight(y) * (y - a * x * x).powi(2))
        .sum();
    let dof = pts.len().saturating_sub(1);
    let residual_stats = ResidualStats {
        chi2,
        dof,
        reduced_chi2: if dof > 0 { chi2 / dof as f64 } else { f64::NAN },
    };
    let span = (distinct[distinct.len() - 1] / distinct[0]).log10();
    let exponent_check = if distinct.len() >= EXPONENT_MIN_POINTS && span >= EXPONENT_MIN_DECADES {
        fit_power_law(&pts, a)
    } else {
        None
    };
    Ok(FitResult {
        a,
        a_stderr,
        exponent_check,
        residual_stats,
    })
}

/// Gauss–Newton for `y = A·u^b`, `u = x/x_ref`, with Poisson weights.
fn fit_power_law(pts: &[(f64, f64)], a_quadratic: f64) -> Option<ExponentFit> {
    let x_ref = (pts.iter().map(|p| p.0.ln()).sum::<f64>() / pts.len() as f64).exp();
    let data: Vec<(f64, f64, f64)> = pts
        .iter()
        .map(|&(x, y)| ((x / x_ref).ln(), y, poisson_weight(y)))
        .collect();
    let chi2 = |amp: f64, b: f64| -> f64 {
        data.iter()
            .map(|&(lu, y, w)| w * (y - amp * (b * lu).exp()).powi(2))
            .sum()
    };
    let normal = |amp: f64, b: f64| -> ([f64; 3], [f64; 2]) {
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(lu, y, w) in &data {
            let m = (b * lu).exp();
            let da = m;
            let db = amp * m * lu;
            let r = y - amp * m;
            jaa += w * da * da;
            jab += w * da * db;
            jbb += w * db * db;
            ga += w * da * r;
            gb += w * db * r;
        }
        ([jaa, jab, jbb], [ga, gb])
    };
    let mut amp = a_quadratic * x_ref * x_ref;
    let mut b = 2.0;
    let mut current = chi2(amp, b);
    for _ in 0..200 {
        let ([jaa, jab, jbb], [ga, gb]) = normal(amp, b);
        let det = jaa * jbb - jab * jab;
        if !(det.abs() > 0.0) {
            return None;
        }
        let da = (jbb * ga - jab * gb) / det;
        let db = (jaa * gb - jab * ga) / det;
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-6 {
            let (na, nb) = (amp + step * da, b + step * db);
            let c = chi2(na, nb);
            if c <= current {
                amp = na;
                b = nb;
                current = c;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || (step * db).abs() < 1e-13 {
            break;
        }
    }
    let ([jaa, jab, jbb], _) = normal(amp, b);
    let det = jaa * jbb - jab * jab;
    if !(det > 0.0) || !b.is_finite() {
        return None;
    }
    let b_stderr = (jaa / det).sqrt();
    Some(ExponentFit {
        b,
        b_stderr,
        ci_low: b - Z95 * b_stderr,
        ci_high: b + Z95 * b_stderr,
        amplitude: amp,
        x_ref,
    })
}

/// `a_thermal / a_coherent` with first-order error propagation.
pub fn enhancement_ratio(fit_thermal: &FitResult, fit_coherent: &FitResult) -> Result<Rate> {
    rate_ratio(
        Rate {
            value: fit_thermal.a,
            std_err: fit_thermal.a_stderr,
        },
        Rate {
            value: fit_coherent.a,
            std_err: fit_coherent.a_stderr,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub name: String,
    pub spec: SourceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorberEntry {
    pub name: String,
    pub spec: AbsorberSpec,
    /// Expected coherent signal counts at the calibration power.
    pub reference_counts: f64,
}

/// Everything the comparison experiment needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Setup {
    pub master_seed: u64,
    pub thermal: SourceEntry,
    pub coherent: SourceEntry,
    pub absorbers: Vec<AbsorberEntry>,
    pub chain: DetectionChain,
    pub sweep: SweepSettings,
    pub calibration_power: f64,
    pub acceptance_band: (f64, f64),
    /// Relative systematic error added to the budget line.
    pub systematic_error: f64,
}

impl Fig2Setup {
    /// SLD vs DFB laser with DCM, CdTe quantum dots and Rhodamine B.
    pub fn paper_default(master_seed: u64) -> Self {
        let absorber = |name: &str, counts: f64| AbsorberEntry {
            name: name.to_string(),
            spec: AbsorberSpec::preset(name).expect("built-in preset"),
            reference_counts: counts,
        };
        Self {
            master_seed,
            thermal: SourceEntry {
                name: "SLD".into(),
                spec: SourceSpec::sld(),
            },
            coherent: SourceEntry {
                name: "DFB".into(),
                spec: SourceSpec::dfb_laser(),
            },
            absorbers: vec![
                absorber("DCM", 100.0),
                absorber("CdTe-QD", 80.0),
                absorber("RhodamineB", 40.0),
            ],
            chain: DetectionChain::paper_emccd(),
            sweep: SweepSettings::default(),
            calibration_power: 300e-6,
            acceptance_band: (1.8, 2.2),
            systematic_error: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub fluorophore: String,
    pub thermal: SweepResult,
    pub coherent: SweepResult,
    pub fit_thermal: FitResult,
    pub fit_coherent: FitResult,
    pub ratio: f64,
    pub ratio_std_err: f64,
    pub within_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// Largest relative statistical error over the panels.
    pub statistical: f64,
    pub systematic: f64,
    pub total: f64,
    pub line: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Result {
    pub master_seed: u64,
    pub sources: Vec<PreparedSource>,
    pub panels: Vec<Panel>,
    pub acceptance_band: (f64, f64),
    pub error_budget: ErrorBudget,
    pub passed: bool,
}

impl Fig2Result {
    pub fn ratios(&self) -> Vec<f64> {
        self.panels.iter().map(|p| p.ratio).collect()
    }
}

/// Thermal and coherent sweeps for every fluorophore, fits and ratios.
pub fn reproduce_fig2(setup: &Fig2Setup) -> Result<Fig2Result> {
    if setup.absorbers.is_empty() {
        return Err(Error::Config("no fluorophores configured".into()));
    }
    let (lo, hi) = setup.acceptance_band;
    if !(lo < hi) {
        return Err(Error::Config("acceptance band must have low < high".into()));
    }
    setup.sweep.validate()?;
    let master = setup.master_seed;
    let thermal = prepare_source(
        &setup.thermal.name,
        &setup.thermal.spec,
        &setup.sweep,
        derive_seed(master, stream::SOURCE_TRACE, 0),
    )?;
    let coherent = prepare_source(
        &setup.coherent.name,
        &setup.coherent.spec,
        &setup.sweep,
        derive_seed(master, stream::SOURCE_TRACE, 1),
    )?;
    let panels: Vec<Panel> = setup
        .absorbers
        .par_iter()
        .enumerate()
        .map(|(i, entry)| -> Result<Panel> {
            let absorber = calibrate_absorber(
                &entry.spec,
                &setup.chain,
                coherent.omega,
                setup.calibration_power,
                entry.reference_counts,
            )?;
            if setup.sweep.excitation == ExcitationModel::Trace {
                thermal.check_absorber(&absorber)?;
                coherent.check_absorber(&absorber)?;
            }
            let seed_th = derive_seed(master, stream::SWEEP, 2 * i as u64);
            let seed_co = derive_seed(master, stream::SWEEP, 2 * i as u64 + 1);
            let th = power_sweep_prepared(&thermal, &absorber, &setup.chain, &setup.sweep, seed_th)?;
            let co = power_sweep_prepared(&coherent, &absorber, &setup.chain, &setup.sweep, seed_co)?;
            let fit_thermal = fit_quadratic(&th)?;
            let fit_coherent = fit_quadratic(&co)?;
            let ratio = enhancement_ratio(&fit_thermal, &fit_coherent)?;
            Ok(Panel {
                fluorophore: entry.name.clone(),
                thermal: th,
                coherent: co,
                fit_thermal,
                fit_coherent,
                ratio: ratio.value,
                ratio_std_err: ratio.std_err,
                within_band: ratio.value >= lo && ratio.value <= hi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let statistical = panels
        .iter()
        .map(|p| p.ratio_std_err / p.ratio)
        .fold(0.0, f64::max);
    let systematic = setup.systematic_error;
    let total = statistical.hypot(systematic);
    let line = format!(
        "overall measurement error about {:.1} % (statistical {:.1} %, systematic {:.1} %)",
        100.0 * total,
        100.0 * statistical,
        100.0 * systematic
    );
    let passed = panels.iter().all(|p| p.within_band);
    Ok(Fig2Result {
        master_seed: master,
        sources: vec![thermal, coherent],
        panels,
        acceptance_band: setup.acceptance_band,
        error_budget: ErrorBudget {
            statistical,
            systematic,
            total,
            line,
        },
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticsPoint {
    pub target_g2: f64,
    pub measured_g2: f64,
    pub measured_g2_std_err: f64,
    pub ratio: f64,
    pub ratio_std_err: f64,
}

/// Enhancement ratio against the coherent reference for tunable sources with
/// the given `g²(0)` targets, using the first configured fluorophore.
pub fn statistics_sweep(setup: &Fig2Setup, targets: &[f64]) -> Result<Vec<StatisticsPoint>> {
    let entry = setup
        .absorbers
        .first()
        .ok_or_else(|| Error::Config("no fluorophores configured".into()))?;
    if targets.is_empty() {
        return Err(invalid("no g2 targets given"));
    }
    let master = setup.master_seed;
    let coherent = prepare_source(
        &setup.coherent.name,
        &setup.coherent.spec,
        &setup.sweep,
        derive_seed(master, stream::SOURCE_TRACE, 1),
    )?;
    let absorber = calibrate_absorber(
        &entry.spec,
        &setup.chain,
        coherent.omega,
        setup.calibration_power,
        entry.reference_counts,
    )?;
    let co = power_sweep_prepared(
        &coherent,
        &absorber,
        &setup.chain,
        &setup.sweep,
        derive_seed(master, stream::SWEEP, 1),
    )?;
    let fit_co = fit_quadratic(&co)?;
    let mut out = Vec::with_capacity(targets.len());
    for (i, &g) in targets.iter().enumerate() {
        let mut spec = setup.thermal.spec.clone();
        spec.statistics = crate::source::Statistics::Tunable { target_g2: g };
        let src = prepare_source(
            &format!("tunable-{g}"),
            &spec,
            &setup.sweep,
            derive_seed(master, stream::ENSEMBLE, i as u64),
        )?;
        let sw = power_sweep_prepared(
            &src,
            &absorber,
            &setup.chain,
            &setup.sweep,
            derive_seed(master, stream::SWEEP, 1000 + i as u64),
        )?;
        let fit = fit_quadratic(&sw)?;
        let ratio = enhancement_ratio(&fit, &fit_co)?;
        out.push(StatisticsPoint {
            target_g2: g,
            measured_g2: src.g2_zero,
            measured_g2_std_err: src.g2_std_err,
            ratio: ratio.value,
            ratio_std_err: ratio.std_err,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, powers: &[f64]) -> SweepResult {
        SweepResult {
            source_label: "s".into(),
            fluorophore_label: "f".into(),
            records: powers
                .iter()
                .map(|&p| SweepRecord {
                    power_exc: p,
                    counts: vec![f(p)],
                })
                .collect(),
            seed: 0,
        }
    }

    #[test]
    fn noiseless_quadratic_is_exact() {
        let powers = logspace(1.0, 100.0, 8);
        let fit = fit_quadratic(&synthetic(|p| 3.0 * p * p, &powers)).unwrap();
        assert!((fit.a - 3.0).abs() < 1e-12);
        let e = fit.exponent_check.unwrap();
        assert!((e.b - 2.0).abs() < 1e-9);
        assert!(fit.residual_stats.chi2 < 1e-12);
    }

    #[test]
    fn free_exponent_recovers_cubic() {
        let powers = logspace(1.0, 10.0, 10);
        let fit = fit_quadratic(&synthetic(|p| 5.0 * p.powi(3), &powers)).unwrap();
        assert!((fit.exponent_check.unwrap().b - 3.0).abs() < 1e-6);
    }

    #[test]
    fn exponent_check_requires_span() {
        let powers = logspace(1.0, 2.0, 8);
        let fit = fit_quadratic(&synthetic(|p| p * p, &powers)).unwrap();
        assert!(fit.exponent_check.is_none());
        let powers = logspace(1.0, 100.0, 4);
        let fit = fit_quadratic(&synthetic(|p| p * p, &powers)).unwrap();
        assert!(fit.exponent_check.is_none());
    }

    #[test]
    fn fit_errors() {
        let s = synthetic(|p| p * p, &[1.0, 2.0]);
        assert!(matches!(fit_quadratic(&s), Err(Error::InsufficientData(_))));
        let s = synthetic(|_| 0.0, &[1.0, 2.0, 3.0]);
        assert!(matches!(fit_quadratic(&s), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn ratio_of_identical_fits_is_one() {
        let powers = logspace(1.0, 100.0, 8);
        let f = fit_quadratic(&synthetic(|p| 7.0 * p * p, &powers)).unwrap();
        assert!((enhancement_ratio(&f, &f).unwrap().value - 1.0).abs() < 1e-15);
        let mut zero = f.clone();
        zero.a = 0.0;
        assert!(matches!(enhancement_ratio(&f, &zero), Err(Error::DivisionDomain(_))));
    }

    #[test]
    fn analytic_noiseless_ratio_is_two() {
        let mut setup = Fig2Setup::paper_default(1);
        setup.sweep.excitation = ExcitationModel::Analytic;
        setup.sweep.noise = false;
        let r = reproduce_fig2(&setup).unwrap();
        for p in &r.panels {
            assert!((p.ratio - 2.0).abs() < 1e-12, "{}", p.ratio);
        }
        assert!(r.passed);
    }

    #[test]
    fn calibration_hits_reference_counts() {
        let chain = DetectionChain::paper_emccd();
        let a = calibrate_absorber(&AbsorberSpec::dcm(), &chain, 1.93e15, 300e-6, 100.0).unwrap();
        let rate = a.quantum_yield * mollow_rate(&a, 1.0, 300e-6, 1.93e15).unwrap();
        assert!((chain.expected_counts(rate) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_validation() {
        let mut s = SweepSettings {
            powers: vec![],
            ..SweepSettings::default()
        };
        assert!(s.validate().is_err());
        s.powers = vec![2.0, 1.0];
        assert!(s.validate().is_err());
        s.powers = vec![1.0, 2.0];
        s.repeats = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let s = synthetic(|p| p, &[1.0, 2.0]);
        assert_eq!(s.to_csv(), "P_exc_W,counts,repeat\n1,1,0\n2,2,0\n");
    }
}
