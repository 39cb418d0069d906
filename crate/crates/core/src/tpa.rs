//! Two- and multi-photon absorption rates.
//!
//! For a weak stationary field and a final state much broader than the field
//! spectrum, the two-photon rate is
//!
//! ```text
//! R = g²(0) · |D|² · 2 (Δω_f/2) / ((Δω_f/2)² + (2ω − ω_f)²) · I²
//! ```
//!
//! so that with `C = |D|² · L(2ω)` the time-domain form is `R = C⟨I²⟩`.
//! Rates carry an arbitrary-units scale fixed by `dipole_sq`.

use serde::{Deserialize, Serialize};

use crate::correlation::gn_zero;
use crate::error::{invalid, Error, Result};
use crate::source::SPEED_OF_LIGHT;
use crate::trace::FieldTrace;

/// Minimum `Δω_f / Δω_field` for which the broadband reduction is applied.
pub const BROADBAND_MIN_RATIO: f64 = 10.0;

fn omega_of_wavelength(lambda: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / lambda
}

fn omega_of_wavenumber_cm(k: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * k * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorberSpec {
    /// Two-photon transition frequency, rad/s.
    pub omega_f: f64,
    /// Final-state FWHM, rad/s.
    pub delta_omega_f: f64,
    /// Squared two-photon transition dipole (arbitrary units).
    pub dipole_sq: f64,
    pub quantum_yield: f64,
    pub label: String,
}

impl AbsorberSpec {
    /// DCM, 5 mmol/l in DMSO.
    pub fn dcm() -> Self {
        Self {
            omega_f: omega_of_wavelength(480e-9),
            delta_omega_f: omega_of_wavenumber_cm(4500.0),
            dipole_sq: 1.0,
            quantum_yield: 0.8,
            label: "DCM 5 mmol/l in DMSO".into(),
        }
    }

    /// Water-soluble CdTe quantum dots, 250 mmol/l in distilled water.
    pub fn cdte_qd() -> Self {
        Self {
            omega_f: omega_of_wavelength(500e-9),
            delta_omega_f: omega_of_wavenumber_cm(6000.0),
            dipole_sq: 1.0,
            quantum_yield: 0.4,
            label: "CdTe quantum dots 250 mmol/l in water".into(),
        }
    }

    /// Rhodamine B, 50 mmol/l in methanol.
    pub fn rhodamine_b() -> Self {
        Self {
            omega_f: omega_of_wavelength(543e-9),
            delta_omega_f: omega_of_wavenumber_cm(3500.0),
            dipole_sq: 1.0,
            quantum_yield: 0.5,
            label: "Rhodamine B 50 mmol/l in methanol".into(),
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "DCM" => Some(Self::dcm()),
            "CdTe-QD" => Some(Self::cdte_qd()),
            "RhodamineB" => Some(Self::rhodamine_b()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_omega_f > 0.0) || !self.delta_omega_f.is_finite() {
            return Err(invalid("delta_omega_f must be positive"));
        }
        if !(self.dipole_sq > 0.0) || !self.dipole_sq.is_finite() {
            return Err(invalid("dipole_sq must be positive"));
        }
        if !(self.quantum_yield > 0.0 && self.quantum_yield <= 1.0) {
            return Err(invalid("quantum_yield must lie in (0, 1]"));
        }
        if !(self.omega_f > 0.0) {
            return Err(invalid("omega_f must be positive"));
        }
        Ok(())
    }

    /// Lorentzian factor `2(Δω_f/2)/((Δω_f/2)² + (2ω − ω_f)²)`.
    pub fn lineshape(&self, omega: f64) -> f64 {
        let half = self.delta_omega_f / 2.0;
        2.0 * half / (half * half + (2.0 * omega - self.omega_f).powi(2))
    }

    /// Absorber constant `C = |D|²·L(2ω)`.
    pub fn coupling(&self, omega: f64) -> f64 {
        self.dipole_sq * self.lineshape(omega)
    }

    /// `Δω_f` over the field bandwidth (both angular).
    pub fn broadband_ratio(&self, field_bandwidth_rad: f64) -> f64 {
        if field_bandwidth_rad <= 0.0 {
            f64::INFINITY
        } else {
            self.delta_omega_f / field_bandwidth_rad
        }
    }
}

/// A rate (or any positive quantity) with a standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub std_err: f64,
}

impl Rate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_err: 0.0,
        }
    }
}

/// Round-off allowance below the classical bound `g²(0) ≥ 1`.
const G2_TOLERANCE: f64 = 1e-9;

/// Closed-form two-photon rate for a field of given `g²(0)` and intensity.
pub fn mollow_rate(absorber: &AbsorberSpec, g2_zero: f64, intensity: f64, omega: f64) -> Result<f64> {
    absorber.validate()?;
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(invalid(format!("intensity must be non-negative, got {intensity}")));
    }
    if !(g2_zero >= 1.0 - G2_TOLERANCE) || !g2_zero.is_finite() {
        return Err(invalid(format!("g2(0) = {g2_zero} is below the classical bound 1")));
    }
    Ok(g2_zero * absorber.coupling(omega) * intensity * intensity)
}

/// Angular bandwidth used by the broadband check: `2π` times the
/// Gaussian-equivalent spectral FWHM of the trace.
pub fn field_bandwidth_rad(trace: &FieldTrace) -> f64 {
    2.0 * std::f64::consts::PI * trace.spectral_width()
}

pub fn check_broadband(absorber: &AbsorberSpec, trace: &FieldTrace) -> Result<()> {
    let bw = field_bandwidth_rad(trace);
    let ratio = absorber.broadband_ratio(bw);
    if ratio < BROADBAND_MIN_RATIO {
        return Err(Error::ModelDomain(format!(
            "final-state width {:e} rad/s is only {ratio:.2}x the field bandwidth {bw:e} rad/s (need >= {BROADBAND_MIN_RATIO})",
            absorber.delta_omega_f
        )));
    }
    Ok(())
}

/// Time-domain two-photon rate `C·⟨I²⟩`. The standard error follows from the
/// bootstrap error of `ĝ²(0)` at the trace's mean power.
pub fn tpa_rate_timedomain(trace: &FieldTrace, absorber: &AbsorberSpec) -> Result<Rate> {
    tpa_rate_timedomain_with(trace, absorber, false)
}

/// As [`tpa_rate_timedomain`]; `force` skips the broadband check.
pub fn tpa_rate_timedomain_with(trace: &FieldTrace, absorber: &AbsorberSpec, force: bool) -> Result<Rate> {
    absorber.validate()?;
    if !force {
        check_broadband(absorber, trace)?;
    }
    let c = absorber.coupling(trace.carrier_freq);
    timedomain_moment_rate(trace, 2, c)
}

/// `n`-photon rate `scale·⟨Iⁿ⟩`.
pub fn mpa_rate_timedomain(trace: &FieldTrace, n: u32, scale_const: f64) -> Result<Rate> {
    if !(2..=6).contains(&n) {
        return Err(invalid(format!("order {n} outside 2..=6")));
    }
    if !(scale_const > 0.0) {
        return Err(invalid("scale constant must be positive"));
    }
    timedomain_moment_rate(trace, n, scale_const)
}

fn timedomain_moment_rate(trace: &FieldTrace, n: u32, scale: f64) -> Result<Rate> {
    let mean = trace.mean_power();
    if !(mean > 0.0) {
        return Err(Error::DegenerateInput("zero-power trace".into()));
    }
    let moment = trace.intensity_moment(n);
    let g = gn_zero(trace, n)?;
    Ok(Rate {
        value: scale * moment,
        std_err: scale * mean.powi(n as i32) * g.std_errors[0],
    })
}

/// `a / b` with first-order propagation of independent errors.
pub fn rate_ratio(a: Rate, b: Rate) -> Result<Rate> {
    if b.value == 0.0 || !b.value.is_finite() {
        return Err(Error::DivisionDomain("denominator rate is zero".into()));
    }
    let r = a.value / b.value;
    let rel_a = if a.value != 0.0 { a.std_err / a.value } else { 0.0 };
    let rel_b = b.std_err / b.value;
    let std_err = if a.value == 0.0 {
        a.std_err / b.value.abs()
    } else {
        r.abs() * (rel_a * rel_a + rel_b * rel_b).sqrt()
    };
    Ok(Rate { value: r, std_err })
}
