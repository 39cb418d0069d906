//! Sampled complex field envelopes and their binary file format.
//!
//! # Trace file layout
//!
//! All fields little-endian:
//!
//! | offset | size | content                               |
//! |--------|------|---------------------------------------|
//! | 0      | 8    | magic `PHOTSTAT`                      |
//! | 8      | 4    | format version (`u32`, currently 1)   |
//! | 12     | 8    | sample interval `dt` in s (`f64`)     |
//! | 20     | 8    | carrier angular frequency rad/s (`f64`) |
//! | 28     | 8    | sample count (`u64`)                  |
//! | 36     | 16·n | interleaved `re, im` pairs (`f64`)    |

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::numeric::ordered_sum;

pub const TRACE_MAGIC: &[u8; 8] = b"PHOTSTAT";
pub const TRACE_VERSION: u32 = 1;
const HEADER_LEN: usize = 36;

/// Fraction of spectral power inside the FWHM of a Gaussian line.
const GAUSSIAN_FWHM_FRACTION: f64 = 0.760_968_108_550_488_4;

/// One realization of a field envelope. `|E|²` is instantaneous power in W.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrace {
    pub samples: Vec<Complex64>,
    /// Sample interval in seconds.
    pub dt: f64,
    /// Carrier angular frequency in rad/s.
    pub carrier_freq: f64,
    /// Seed the trace was generated from (0 when read back from a file).
    pub seed_id: u64,
}

impl FieldTrace {
    pub fn new(samples: Vec<Complex64>, dt: f64, carrier_freq: f64, seed_id: u64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(invalid("a trace needs at least two samples"));
        }
        Ok(Self {
            samples,
            dt,
            carrier_freq,
            seed_id,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn intensity(&self, i: usize) -> f64 {
        self.samples[i].norm_sqr()
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.samples.iter().map(|e| e.norm_sqr()).collect()
    }

    pub fn mean_power(&self) -> f64 {
        self.intensity_moment(1)
    }

    /// Time average of `Iⁿ`.
    pub fn intensity_moment(&self, n: u32) -> f64 {
        let n_i = n as i32;
        ordered_sum(self.len(), |i| self.intensity(i).powi(n_i)) / self.len() as f64
    }

    /// Rescales the envelope so the time-averaged power equals `power`.
    pub(crate) fn normalize_power(&mut self, power: f64) -> Result<()> {
        let mean = self.mean_power();
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::DegenerateInput(
                "trace has zero or non-finite mean power".into(),
            ));
        }
        let scale = (power / mean).sqrt();
        for s in &mut self.samples {
            *s *= scale;
        }
        Ok(())
    }

    /// Returns a copy rescaled to the given mean power.
    pub fn scaled_to_power(&self, power: f64) -> Result<Self> {
        let mut out = self.clone();
        out.normalize_power(power)?;
        Ok(out)
    }

    /// Gaussian-equivalent spectral FWHM in Hz: the width of the central
    /// 76.1 % of the periodogram power. Exact for a Gaussian line, larger than
    /// the FWHM for heavier-tailed lines, and close to zero when the power is
    /// concentrated in a narrow (coherent) line.
    pub fn spectral_width(&self) -> f64 {
        let n = self.len();
        let mut buf = self.samples.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        // order bins by frequency: negative half first
        let half = n.div_ceil(2);
        let ordered: Vec<(f64, f64)> = (half..n)
            .chain(0..half)
            .map(|k| {
                let m = if k >= half { k as f64 - n as f64 } else { k as f64 };
                (m / (n as f64 * self.dt), buf[k].norm_sqr())
            })
            .collect();
        let total: f64 = ordered.iter().map(|p| p.1).sum();
        if total <= 0.0 {
            return 0.0;
        }
        let lo_q = 0.5 - GAUSSIAN_FWHM_FRACTION / 2.0;
        let hi_q = 0.5 + GAUSSIAN_FWHM_FRACTION / 2.0;
        let quantile = |q: f64| -> f64 {
            let target = q * total;
            let mut acc = 0.0;
            for (f, p) in &ordered {
                if acc + p >= target {
                    return *f;
                }
                acc += p;
            }
            ordered.last().map(|x| x.0).unwrap_or(0.0)
        };
        (quantile(hi_q) - quantile(lo_q)).max(0.0)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(TRACE_MAGIC);
        header.extend_from_slice(&TRACE_VERSION.to_le_bytes());
        header.extend_from_slice(&self.dt.to_le_bytes());
        header.extend_from_slice(&self.carrier_freq.to_le_bytes());
        header.extend_from_slice(&(self.len() as u64).to_le_bytes());
        w.write_all(&header)?;
        let mut body = Vec::with_capacity(16 * self.len());
        for s in &self.samples {
            body.extend_from_slice(&s.re.to_le_bytes());
            body.extend_from_slice(&s.im.to_le_bytes());
        }
        w.write_all(&body)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format("trace file shorter than its header".into()));
        }
        if &bytes[0..8] != TRACE_MAGIC {
            return Err(Error::Format("bad trace magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != TRACE_VERSION {
            return Err(Error::Format(format!("unsupported trace version {version}")));
        }
        let dt = f64_at(12);
        let carrier = f64_at(20);
        let count = u64_at(28) as usize;
        let body = &bytes[HEADER_LEN..];
        if body.len() != count.saturating_mul(16) {
            return Err(Error::Format(format!(
                "header declares {count} samples but body holds {} bytes",
                body.len()
            )));
        }
        let samples = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        FieldTrace::new(samples, dt, carrier, 0).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_trace() -> FieldTrace {
        let s = (0..8)
            .map(|i| Complex64::new(i as f64, -(i as f64) * 0.5))
            .collect();
        FieldTrace::new(s, 1e-15, 1.9e15, 3).unwrap()
    }

    #[test]
    fn rejects_bad_dt_and_short_traces() {
        assert!(FieldTrace::new(vec![Complex64::new(1.0, 0.0); 4], 0.0, 0.0, 0).is_err());
        assert!(FieldTrace::new(vec![Complex64::new(1.0, 0.0); 1], 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn header_layout_is_fixed() {
        let t = small_trace();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 36 + 16 * 8);
        assert_eq!(&buf[0..8], b"PHOTSTAT");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[12..20].try_into().unwrap()), 1e-15);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 1.9e15);
        assert_eq!(u64::from_le_bytes(buf[28..36].try_into().unwrap()), 8);
        // second sample, imaginary part
        assert_eq!(f64::from_le_bytes(buf[60..68].try_into().unwrap()), -0.5);
    }

    #[test]
    fn bad_magic_and_version_are_format_errors() {
        let t = small_trace();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(FieldTrace::from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(FieldTrace::from_bytes(&bad), Err(Error::Format(_))));
        let bad = &buf[..buf.len() - 3];
        assert!(matches!(FieldTrace::from_bytes(bad), Err(Error::Format(_))));
    }

    #[test]
    fn normalize_sets_exact_mean() {
        let mut t = small_trace();
        t.normalize_power(2.5e-3).unwrap();
        assert!((t.mean_power() - 2.5e-3).abs() < 1e-15);
    }

    #[test]
    fn coherent_line_has_no_width() {
        let t = FieldTrace::new(vec![Complex64::new(1.0, 0.0); 1024], 1e-14, 0.0, 0).unwrap();
        assert_eq!(t.spectral_width(), 0.0);
    }

    proptest! {
        #[test]
        fn file_roundtrip(values in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..64),
                          dt in 1e-16f64..1e-9, carrier in 0.0f64..1e16) {
            let s = values.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            let t = FieldTrace::new(s, dt, carrier, 0).unwrap();
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            prop_assert_eq!(FieldTrace::from_bytes(&buf).unwrap(), t);
        }
    }
}
