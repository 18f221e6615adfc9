//! Two-fluorophore phantoms and the noise protocol used to evaluate
//! deconvolution.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::{ComplexField, FieldAccumulator, LifetimeMap, Plane};
use crate::phasor::{mixture_sample, Fluorophore, ModulationSpec};

/// Generator behind every noise draw. Realization `k` of seed `s` reads
/// stream `k` of `ChaCha20Rng::seed_from_u64(s)`; each plane is filled in
/// row-major order, real plane first.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.3, seed_from_u64, stream = realization index)";

/// A vertical interface at `boundary_px`: columns `x < boundary_px` hold the
/// left emitter, the rest the right one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub boundary_px: usize,
    pub left: Fluorophore,
    pub right: Fluorophore,
    pub modulation: ModulationSpec,
    pub pixel_pitch_nm: f64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height == 0 {
            return domain(format!("degenerate phantom dimensions {}x{}", self.width, self.height));
        }
        if self.boundary_px == 0 || self.boundary_px >= self.width {
            return domain(format!(
                "boundary {} px must lie strictly inside (0, {})",
                self.boundary_px, self.width
            ));
        }
        if !(self.pixel_pitch_nm.is_finite() && self.pixel_pitch_nm > 0.0) {
            return domain(format!("pixel pitch must be positive, got {}", self.pixel_pitch_nm));
        }
        self.left.validate()?;
        self.right.validate()
    }

    /// Lifetime threshold halfway between the two emitters.
    pub fn mean_lifetime(&self) -> f64 {
        0.5 * (self.left.tau_ns + self.right.tau_ns)
    }
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<(ComplexField, LifetimeMap)> {
    spec.validate()?;
    let left = mixture_sample(&[spec.left], spec.modulation)?;
    let right = mixture_sample(&[spec.right], spec.modulation)?;
    let (w, h, b) = (spec.width, spec.height, spec.boundary_px);
    let pick = |x: usize| if x < b { left } else { right };
    let re = Plane::from_fn(w, h, |x, _| pick(x).re)?;
    let im = Plane::from_fn(w, h, |x, _| pick(x).im)?;
    let truth = (0..h)
        .flat_map(|_| (0..w).map(|x| Some(if x < b { spec.left.tau_ns } else { spec.right.tau_ns })))
        .collect();
    Ok((
        ComplexField::new(re, im, spec.pixel_pitch_nm, spec.modulation)?,
        LifetimeMap::new(w, h, spec.pixel_pitch_nm, truth)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseKind {
    /// Additive zero-mean Gaussian with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Counts scaled so the field maximum maps to `peak_counts`.
    Poisson { peak_counts: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
    pub realizations: usize,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64, seed: u64, realizations: usize) -> Self {
        Self {
            kind: NoiseKind::Gaussian { sigma },
            seed,
            realizations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::Gaussian { sigma } if !(sigma.is_finite() && sigma >= 0.0) => {
                return domain(format!("noise sigma must be >= 0, got {sigma}"));
            }
            NoiseKind::Poisson { peak_counts } if !(peak_counts.is_finite() && peak_counts > 0.0) => {
                return domain(format!("peak counts must be positive, got {peak_counts}"));
            }
            _ => {}
        }
        if self.realizations == 0 {
            return domain("realizations must be >= 1");
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gaussian_realization(field: &ComplexField, sigma: f64, seed: u64, index: u64) -> Result<ComplexField> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return domain(format!("noise sigma must be >= 0, got {sigma}"));
    }
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = stream_rng(seed, index);
    let re = field.re();
    let re = Plane::new(
        re.width(),
        re.height(),
        re.data().iter().map(|v| v + normal.sample(&mut rng)).collect(),
    )?;
    let im = field.im();
    let im = Plane::new(
        im.width(),
        im.height(),
        im.data().iter().map(|v| v + normal.sample(&mut rng)).collect(),
    )?;
    field.with_planes(re, im)
}

fn poisson_realization(field: &ComplexField, peak_counts: f64, seed: u64, index: u64) -> Result<ComplexField> {
    if !(peak_counts.is_finite() && peak_counts > 0.0) {
        return domain(format!("peak counts must be positive, got {peak_counts}"));
    }
    if field.planes().iter().any(|p| p.min() < 0.0) {
        return domain("Poisson noise requires a non-negative field");
    }
    let peak = field.re().max().max(field.im().max());
    if peak <= 0.0 {
        return Ok(field.clone());
    }
    let scale = peak_counts / peak;
    let mut rng = stream_rng(seed, index);
    let mut draw = |plane: &Plane| -> Result<Plane> {
        let mut out = Vec::with_capacity(plane.len());
        for &v in plane.data() {
            let rate = v * scale;
            let counts = if rate > 0.0 {
                Poisson::new(rate)
                    .map_err(|e| Error::Domain(e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            out.push(counts / scale);
        }
        Plane::new(plane.width(), plane.height(), out)
    };
    let re = draw(field.re())?;
    let im = draw(field.im())?;
    field.with_planes(re, im)
}

/// One noisy copy of `field`: realization `index` of `noise`.
pub fn noisy_realization(field: &ComplexField, noise: &NoiseSpec, index: usize) -> Result<ComplexField> {
    match noise.kind {
        NoiseKind::Gaussian { sigma } => gaussian_realization(field, sigma, noise.seed, index as u64),
        NoiseKind::Poisson { peak_counts } => poisson_realization(field, peak_counts, noise.seed, index as u64),
    }
}

/// Adds i.i.d. `N(0, sigma^2)` to both planes (realization 0 of the seed).
///
/// Output may go negative; clamp with [`ComplexField::clamp_non_negative`]
/// before deconvolving.
pub fn add_gaussian_noise(field: &ComplexField, sigma: f64, seed: u64) -> Result<ComplexField> {
    gaussian_realization(field, sigma, seed, 0)
}

pub fn add_poisson_noise(field: &ComplexField, peak_counts: f64, seed: u64) -> Result<ComplexField> {
    poisson_realization(field, peak_counts, seed, 0)
}

/// `20 log10(signal / sigma)`.
pub fn snr_db(signal_amplitude: f64, sigma: f64) -> Result<f64> {
    if !(signal_amplitude > 0.0 && sigma > 0.0) || !signal_amplitude.is_finite() || !sigma.is_finite() {
        return domain(format!(
            "SNR needs positive amplitude and sigma, got {signal_amplitude} and {sigma}"
        ));
    }
    Ok(20.0 * (signal_amplitude / sigma).log10())
}

/// Mean over `noise.realizations` of `pipeline(noisy_realization(field, k))`,
/// accumulated in realization order.
pub fn average_realizations<F>(mut pipeline: F, noise: &NoiseSpec, field: &ComplexField) -> Result<ComplexField>
where
    F: FnMut(&ComplexField) -> Result<ComplexField>,
{
    noise.validate()?;
    let mut acc = FieldAccumulator::default();
    for index in 0..noise.realizations {
        let wrap = |e: Error| Error::Realization {
            index,
            source: Box::new(e),
        };
        let noisy = noisy_realization(field, noise, index).map_err(wrap)?;
        let out = pipeline(&noisy).map_err(wrap)?;
        acc.add(&out).map_err(wrap)?;
    }
    acc.mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(a1: f64, a2: f64) -> PhantomSpec {
        PhantomSpec {
            width: 256,
            height: 1,
            boundary_px: 128,
            left: Fluorophore::new(1.0, a1).unwrap(),
            right: Fluorophore::new(2.0, a2).unwrap(),
            modulation: ModulationSpec::default(),
            pixel_pitch_nm: 300.0,
        }
    }

    fn constant_field(w: usize, h: usize, v: f64) -> ComplexField {
        ComplexField::new(
            Plane::filled(w, h, v).unwrap(),
            Plane::filled(w, h, v).unwrap(),
            300.0,
            ModulationSpec::default(),
        )
        .unwrap()
    }

    fn std_dev(v: impl Iterator<Item = f64> + Clone) -> f64 {
        let n = v.clone().count() as f64;
        let mean = v.clone().sum::<f64>() / n;
        (v.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn phantom_pixels() {
        let (f, truth) = make_phantom(&spec(1.0, 1.0)).unwrap();
        assert_relative_eq!(f.re().get(0, 0), 0.798_300_021_593_397_2, epsilon = 1e-12);
        assert_relative_eq!(f.im().get(127, 0), 0.401_269_357_311_742_4, epsilon = 1e-12);
        assert_relative_eq!(f.re().get(128, 0), 0.497_352_223_420_328_6, epsilon = 1e-12);
        assert_relative_eq!(f.im().get(255, 0), 0.499_992_989_230_033_2, epsilon = 1e-12);
        assert_eq!(truth.get(127, 0), Some(1.0));
        assert_eq!(truth.get(128, 0), Some(2.0));

        let (f5, _) = make_phantom(&spec(5.0, 1.0)).unwrap();
        assert_relative_eq!(f5.re().get(3, 0), 5.0 * f.re().get(3, 0), max_relative = 1e-15);
        assert_eq!(f5.re().get(200, 0), f.re().get(200, 0));
    }

    #[test]
    fn equal_emitters_give_constant_field() {
        let mut s = spec(1.0, 1.0);
        s.right = s.left;
        let (f, truth) = make_phantom(&s).unwrap();
        assert!(f.re().data().iter().all(|v| *v == f.re().data()[0]));
        assert!(truth.values().iter().all(|v| *v == Some(1.0)));
    }

    #[test]
    fn truth_matches_phase_lifetime() {
        let mut s = spec(5.0, 1.0);
        s.height = 4;
        let (f, truth) = make_phantom(&s).unwrap();
        for (est, t) in f.lifetime_map().values().iter().zip(truth.values()) {
            assert!((est.unwrap() - t.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_specs() {
        let mut s = spec(1.0, 1.0);
        s.boundary_px = 0;
        assert!(make_phantom(&s).is_err());
        s.boundary_px = 256;
        assert!(make_phantom(&s).is_err());
        let mut s = spec(1.0, 1.0);
        s.width = 1;
        assert!(make_phantom(&s).is_err());
        let mut s = spec(1.0, 1.0);
        s.height = 0;
        assert!(make_phantom(&s).is_err());
    }

    #[test]
    fn gaussian_noise_basics() {
        let f = constant_field(260, 260, 1.0);
        assert_eq!(add_gaussian_noise(&f, 0.0, 7).unwrap(), f);
        let a = add_gaussian_noise(&f, 0.05, 7).unwrap();
        let b = add_gaussian_noise(&f, 0.05, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, add_gaussian_noise(&f, 0.05, 8).unwrap());
        for plane in a.planes() {
            let s = std_dev(plane.data().iter().copied());
            assert!((0.0485..=0.0515).contains(&s), "std {s}");
        }
        assert!(add_gaussian_noise(&f, -0.1, 7).is_err());
    }

    #[test]
    fn snr_examples() {
        assert_relative_eq!(snr_db(1.0, 0.05).unwrap(), 26.0206, epsilon = 1e-4);
        assert_eq!(snr_db(1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(snr_db(10.0, 0.1).unwrap(), 40.0, epsilon = 1e-12);
        assert!(snr_db(0.0, 1.0).is_err());
        assert!(snr_db(1.0, -1.0).is_err());
    }

    #[test]
    fn averaging_protocol() {
        let f = constant_field(32, 32, 1.0);
        let one = NoiseSpec::gaussian(0.05, 3, 1);
        let avg = average_realizations(|x| Ok(x.clone()), &one, &f).unwrap();
        assert_eq!(avg, noisy_realization(&f, &one, 0).unwrap());

        let quiet = NoiseSpec::gaussian(0.0, 3, 17);
        assert_eq!(average_realizations(|x| Ok(x.clone()), &quiet, &f).unwrap(), f);

        let many = NoiseSpec::gaussian(0.05, 3, 100);
        let avg = average_realizations(|x| Ok(x.clone()), &many, &f).unwrap();
        for p in avg.planes() {
            // 6 sigma of the averaged noise (0.005)
            assert!(p.data().iter().all(|v| (v - 1.0).abs() < 0.03));
        }

        let err = average_realizations(
            |x| {
                if x.re().get(0, 0) > 1.0 {
                    domain("boom")
                } else {
                    Ok(x.clone())
                }
            },
            &many,
            &f,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Realization { .. }));
        assert!(NoiseSpec::gaussian(0.05, 0, 0).validate().is_err());
    }

    #[test]
    fn averaging_variance_scaling() {
        let f = constant_field(64, 64, 1.0);
        let base = {
            let n = NoiseSpec::gaussian(0.05, 11, 1);
            let avg = average_realizations(|x| Ok(x.clone()), &n, &f).unwrap();
            std_dev(avg.re().data().iter().copied())
        };
        for r in [4usize, 16, 64] {
            let n = NoiseSpec::gaussian(0.05, 11, r);
            let avg = average_realizations(|x| Ok(x.clone()), &n, &f).unwrap();
            let s = std_dev(avg.re().data().iter().copied());
            let expect = base / (r as f64).sqrt();
            assert!((s / expect - 1.0).abs() < 0.2, "r={r}: {s} vs {expect}");
        }
    }

    #[test]
    fn poisson_noise() {
        let f = constant_field(64, 64, 1.0);
        let big = add_poisson_noise(&f, 1e9, 1).unwrap();
        assert!(big.re().data().iter().all(|v| (v - 1.0).abs() < 1e-3));

        let mut z = Plane::filled(8, 8, 0.5).unwrap();
        z.data_mut()[5] = 0.0;
        let zf = ComplexField::new(z.clone(), z, 300.0, ModulationSpec::default()).unwrap();
        for seed in 0..5 {
            let out = add_poisson_noise(&zf, 50.0, seed).unwrap();
            assert_eq!(out.re().data()[5], 0.0);
            assert_eq!(out.im().data()[5], 0.0);
        }

        let out = add_poisson_noise(&f, 100.0, 2).unwrap();
        let n = out.re().len() as f64;
        let mean = out.re().sum() / n;
        assert!((mean - 1.0).abs() < 3.0 * 100f64.sqrt() / 100.0 / n.sqrt());
        assert_eq!(out, add_poisson_noise(&f, 100.0, 2).unwrap());

        let neg = constant_field(4, 4, -1.0);
        assert!(add_poisson_noise(&neg, 10.0, 0).is_err());
        assert!(add_poisson_noise(&f, 0.0, 0).is_err());
    }
}
