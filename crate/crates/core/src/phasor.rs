//! Closed-form single-frequency phasor math.
//!
//! A single-exponential emitter with lifetime `tau` measured at angular
//! modulation frequency `omega` has phasor coordinates
//!
//! ```text
//! G = 1 / (1 + (omega*tau)^2)      S = omega*tau / (1 + (omega*tau)^2)
//! ```
//!
//! which lie on the universal semicircle `(G - 1/2)^2 + S^2 = 1/4`.
//! Measured FLIM samples are amplitude-weighted sums of such phasors.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Result};

pub const DEFAULT_FREQUENCY_MHZ: f64 = 80.0;

/// Modulation frequency of the excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    frequency_mhz: f64,
}

impl ModulationSpec {
    pub fn new(frequency_mhz: f64) -> Result<Self> {
        if !(frequency_mhz.is_finite() && frequency_mhz > 0.0) {
            return domain(format!(
                "modulation frequency must be positive and finite, got {frequency_mhz} MHz"
            ));
        }
        Ok(Self { frequency_mhz })
    }

    pub fn frequency_mhz(&self) -> f64 {
        self.frequency_mhz
    }

    /// Angular frequency in rad/ns, so that `omega * tau_ns` is dimensionless.
    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency_mhz * 1e-3
    }
}

impl Default for ModulationSpec {
    fn default() -> Self {
        Self {
            frequency_mhz: DEFAULT_FREQUENCY_MHZ,
        }
    }
}

/// A single emitter. `magnitude` is the product of concentration and
/// cross-section (the emission strength `A`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fluorophore {
    pub tau_ns: f64,
    pub magnitude: f64,
}

impl Fluorophore {
    pub fn new(tau_ns: f64, magnitude: f64) -> Result<Self> {
        let f = Self { tau_ns, magnitude };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_ns.is_finite() && self.tau_ns >= 0.0) {
            return domain(format!("lifetime must be >= 0 ns, got {}", self.tau_ns));
        }
        if !(self.magnitude.is_finite() && self.magnitude >= 0.0) {
            return domain(format!("magnitude must be >= 0, got {}", self.magnitude));
        }
        Ok(())
    }
}

/// Normalized phasor coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasorPoint {
    pub g: f64,
    pub s: f64,
}

/// Amplitude-weighted real / imaginary FLIM components of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexSample {
    pub re: f64,
    pub im: f64,
}

impl ComplexSample {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

pub fn single_exponential_phasor(tau_ns: f64, modulation: ModulationSpec) -> Result<PhasorPoint> {
    if !(tau_ns.is_finite() && tau_ns >= 0.0) {
        return domain(format!("lifetime must be >= 0 ns, got {tau_ns}"));
    }
    let wt = modulation.angular_frequency() * tau_ns;
    let denom = 1.0 + wt * wt;
    Ok(PhasorPoint {
        g: 1.0 / denom,
        s: wt / denom,
    })
}

/// Sum of `A_i * (G_i, S_i)` over the emitters. An empty list gives `(0, 0)`.
pub fn mixture_sample(emitters: &[Fluorophore], modulation: ModulationSpec) -> Result<ComplexSample> {
    let mut acc = ComplexSample::default();
    for e in emitters {
        e.validate()?;
        let p = single_exponential_phasor(e.tau_ns, modulation)?;
        acc.re += e.magnitude * p.g;
        acc.im += e.magnitude * p.s;
    }
    Ok(acc)
}

/// Phase lifetime `im / (omega * re)`.
///
/// Returns `None` when `re` is not strictly positive or the result is not
/// finite; callers treat that as an undefined pixel.
pub fn phase_lifetime(sample: ComplexSample, modulation: ModulationSpec) -> Option<f64> {
    if sample.re.is_nan() || sample.re <= 0.0 || !sample.im.is_finite() {
        return None;
    }
    let tau = sample.im / (modulation.angular_frequency() * sample.re);
    tau.is_finite().then_some(tau)
}

/// Modulation lifetime `(1/omega) * sqrt(A^2 / (re^2 + im^2) - 1)` for a sample
/// of known total amplitude `A`.
///
/// Returns `None` unless `0 < re^2 + im^2 <= A^2`.
pub fn modulation_lifetime(sample: ComplexSample, amplitude: f64, modulation: ModulationSpec) -> Option<f64> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return None;
    }
    let m2 = (sample.re * sample.re + sample.im * sample.im) / (amplitude * amplitude);
    if !(m2 > 0.0 && m2 <= 1.0) {
        return None;
    }
    let tau = (1.0 / m2 - 1.0).sqrt() / modulation.angular_frequency();
    tau.is_finite().then_some(tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // High-precision reference values (30-digit evaluation of the closed form
    // at f = 80 MHz, omega = 0.16 * pi rad/ns).
    const G_1NS: f64 = 0.798_300_021_593_397_2;
    const S_1NS: f64 = 0.401_269_357_311_742_4;
    const G_2NS: f64 = 0.497_352_223_420_328_6;
    const S_2NS: f64 = 0.499_992_989_230_033_2;
    const MIX_RE: f64 = 1.295_652_245_013_725_8;
    const MIX_IM: f64 = 0.901_262_346_541_775_6;
    const MIX_TAU_PHI: f64 = 1.383_862_433_252_728;
    const MIX_TAU_M: f64 = 1.548_426_320_256_054_9;

    fn f80() -> ModulationSpec {
        ModulationSpec::new(80.0).unwrap()
    }

    #[test]
    fn angular_frequency_matches_mhz() {
        let m = f80();
        assert_relative_eq!(m.angular_frequency(), 0.16 * PI, max_relative = 1e-12);
        assert!(ModulationSpec::new(0.0).is_err());
        assert!(ModulationSpec::new(-5.0).is_err());
        assert!(ModulationSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn apex_and_zero_lifetime() {
        let m = f80();
        let p = single_exponential_phasor(1.0 / m.angular_frequency(), m).unwrap();
        assert_relative_eq!(p.g, 0.5, epsilon = 1e-15);
        assert_relative_eq!(p.s, 0.5, epsilon = 1e-15);
        let p0 = single_exponential_phasor(0.0, m).unwrap();
        assert_eq!((p0.g, p0.s), (1.0, 0.0));
    }

    #[test]
    fn one_ns_at_80_mhz() {
        let p = single_exponential_phasor(1.0, f80()).unwrap();
        assert_relative_eq!(p.g, G_1NS, epsilon = 1e-12);
        assert_relative_eq!(p.s, S_1NS, epsilon = 1e-12);
        let p = single_exponential_phasor(2.0, f80()).unwrap();
        assert_relative_eq!(p.g, G_2NS, epsilon = 1e-12);
        assert_relative_eq!(p.s, S_2NS, epsilon = 1e-12);
    }

    #[test]
    fn negative_lifetime_rejected() {
        assert!(single_exponential_phasor(-0.1, f80()).is_err());
        assert!(Fluorophore::new(-1.0, 1.0).is_err());
        assert!(Fluorophore::new(1.0, -1.0).is_err());
    }

    #[test]
    fn mixture_examples() {
        let m = f80();
        assert_eq!(mixture_sample(&[], m).unwrap(), ComplexSample::default());
        let single = mixture_sample(&[Fluorophore::new(1.0, 1.0).unwrap()], m).unwrap();
        let p = single_exponential_phasor(1.0, m).unwrap();
        assert_eq!((single.re, single.im), (p.g, p.s));

        let mix = mixture_sample(
            &[Fluorophore::new(1.0, 1.0).unwrap(), Fluorophore::new(2.0, 1.0).unwrap()],
            m,
        )
        .unwrap();
        assert_relative_eq!(mix.re, MIX_RE, epsilon = 1e-12);
        assert_relative_eq!(mix.im, MIX_IM, epsilon = 1e-12);
        let bad = [Fluorophore {
            tau_ns: -1.0,
            magnitude: 1.0,
        }];
        assert!(mixture_sample(&bad, m).is_err());
    }

    #[test]
    fn phase_lifetime_examples() {
        let m = f80();
        let apex = phase_lifetime(ComplexSample::new(0.5, 0.5), m).unwrap();
        assert_relative_eq!(apex, 1.0 / m.angular_frequency(), max_relative = 1e-15);

        let tau = phase_lifetime(ComplexSample::new(MIX_RE, MIX_IM), m).unwrap();
        assert_relative_eq!(tau, MIX_TAU_PHI, epsilon = 1e-12);
        assert!(tau < 1.5);

        assert_eq!(phase_lifetime(ComplexSample::new(0.0, 0.3), m), None);
        assert_eq!(phase_lifetime(ComplexSample::new(-1e-3, 0.3), m), None);
    }

    #[test]
    fn modulation_lifetime_examples() {
        let m = f80();
        let apex = modulation_lifetime(ComplexSample::new(0.5, 0.5), 1.0, m).unwrap();
        assert_relative_eq!(apex, 1.0 / m.angular_frequency(), max_relative = 1e-12);

        let p = single_exponential_phasor(1.0, m).unwrap();
        let tm = modulation_lifetime(ComplexSample::new(p.g, p.s), 1.0, m).unwrap();
        assert_relative_eq!(tm, 1.0, max_relative = 1e-12);

        let tm = modulation_lifetime(ComplexSample::new(MIX_RE, MIX_IM), 2.0, m).unwrap();
        assert_relative_eq!(tm, MIX_TAU_M, epsilon = 1e-12);
        assert!(tm > MIX_TAU_PHI);

        // modulation depth above one, zero modulus, bad amplitude
        assert_eq!(modulation_lifetime(ComplexSample::new(1.0, 1.0), 1.0, m), None);
        assert_eq!(modulation_lifetime(ComplexSample::new(0.0, 0.0), 1.0, m), None);
        assert_eq!(modulation_lifetime(ComplexSample::new(0.5, 0.5), 0.0, m), None);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn freq() -> impl Strategy<Value = ModulationSpec> {
        (1.0f64..500.0).prop_map(|f| ModulationSpec::new(f).unwrap())
    }

    proptest! {
        #[test]
        fn semicircle(tau in 0.0f64..1e3, m in freq()) {
            let p = single_exponential_phasor(tau, m).unwrap();
            prop_assert!(((p.g - 0.5).powi(2) + p.s * p.s - 0.25).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&p.g));
            prop_assert!((0.0..=0.5).contains(&p.s));
        }

        #[test]
        fn g_decreases_with_lifetime(a in 0.0f64..50.0, d in 1e-3f64..50.0, m in freq()) {
            let p1 = single_exponential_phasor(a, m).unwrap();
            let p2 = single_exponential_phasor(a + d, m).unwrap();
            prop_assert!(p2.g < p1.g);
        }

        #[test]
        fn round_trip(tau in 0.01f64..100.0, m in freq()) {
            let p = single_exponential_phasor(tau, m).unwrap();
            let back = phase_lifetime(ComplexSample::new(p.g, p.s), m).unwrap();
            prop_assert!((back - tau).abs() <= 1e-9 * tau);
        }

        #[test]
        fn mixture_lies_between_components(
            t1 in 0.05f64..20.0, dt in 0.01f64..20.0,
            a1 in 1e-3f64..10.0, a2 in 1e-3f64..10.0, m in freq(),
        ) {
            let t2 = t1 + dt;
            let mix = mixture_sample(&[Fluorophore::new(t1, a1).unwrap(), Fluorophore::new(t2, a2).unwrap()], m).unwrap();
            prop_assert!(mix.re >= 0.0 && mix.im >= 0.0);
            let tau = phase_lifetime(mix, m).unwrap();
            prop_assert!(tau > t1 && tau < t2, "{} not in ({}, {})", tau, t1, t2);
            let tm = modulation_lifetime(mix, a1 + a2, m).unwrap();
            prop_assert!(tm > tau);
        }

        #[test]
        fn magnitude_scaling(
            t1 in 0.05f64..20.0, t2 in 0.05f64..20.0,
            a1 in 1e-2f64..10.0, a2 in 1e-2f64..10.0, c in 1e-2f64..100.0, m in freq(),
        ) {
            let base = mixture_sample(&[Fluorophore::new(t1, a1).unwrap(), Fluorophore::new(t2, a2).unwrap()], m).unwrap();
            let scaled = mixture_sample(&[Fluorophore::new(t1, c * a1).unwrap(), Fluorophore::new(t2, c * a2).unwrap()], m).unwrap();
            prop_assert!((scaled.re - c * base.re).abs() <= 1e-12 * scaled.re.abs().max(1.0));
            prop_assert!((scaled.im - c * base.im).abs() <= 1e-12 * scaled.im.abs().max(1.0));
            let t_base = phase_lifetime(base, m).unwrap();
            let t_scaled = phase_lifetime(scaled, m).unwrap();
            prop_assert!((t_base - t_scaled).abs() <= 1e-12 * t_base.max(1.0));
        }
    }
}
