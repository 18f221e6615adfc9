//! Boundary localization and lifetime error metrics.
//!
//! Positions are in sample-index coordinates: sample `i` sits at `x = i`.
//! A phantom whose right emitter starts at column `b` therefore has its
//! physical interface at `x = b - 0.5`, which is also where a threshold at
//! the mean lifetime crosses the ideal step.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::{ComplexField, LifetimeMap, Plane};
use crate::phantom::PhantomSpec;

/// Default central fraction used for crossing detection and RMSE.
pub const CENTRAL_FRACTION: f64 = 0.8;

/// One row of a map with physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub row: usize,
    pub x_px: Vec<f64>,
    pub x_nm: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl Profile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn from_row(row: usize, pitch_nm: f64, values: Vec<Option<f64>>) -> Profile {
        let x_px: Vec<f64> = (0..values.len()).map(|x| x as f64).collect();
        let x_nm = x_px.iter().map(|x| x * pitch_nm).collect();
        Profile {
            row,
            x_px,
            x_nm,
            values,
        }
    }
}

pub fn extract_profile(map: &LifetimeMap, row: usize) -> Result<Profile> {
    if row >= map.height() {
        return domain(format!("row {row} out of range for map height {}", map.height()));
    }
    Ok(Profile::from_row(row, map.pixel_pitch_nm, map.row(row).to_vec()))
}

pub fn extract_plane_profile(plane: &Plane, pixel_pitch_nm: f64, row: usize) -> Result<Profile> {
    if row >= plane.height() {
        return domain(format!("row {row} out of range for plane height {}", plane.height()));
    }
    Ok(Profile::from_row(
        row,
        pixel_pitch_nm,
        plane.row(row).iter().map(|v| Some(*v)).collect(),
    ))
}

/// Index range `[lo, hi)` covering the central `fraction` of `n` samples.
pub fn central_range(n: usize, fraction: f64) -> std::ops::Range<usize> {
    let margin = ((n as f64) * (1.0 - fraction) / 2.0 + 1e-9).floor() as usize;
    margin.min(n / 2)..n - margin.min(n / 2)
}

/// Row-major mask of the central `fraction` of a `width x height` raster.
/// One-dimensional rasters are restricted along x only.
pub fn central_mask(width: usize, height: usize, fraction: f64) -> Vec<bool> {
    let xs = central_range(width, fraction);
    let ys = if height == 1 {
        0..1
    } else {
        central_range(height, fraction)
    };
    (0..height)
        .flat_map(|y| {
            let (xs, in_y) = (xs.clone(), ys.contains(&y));
            (0..width).map(move |x| in_y && xs.contains(&x))
        })
        .collect()
}

/// Subpixel position where `values` crosses `threshold`, by linear
/// interpolation between the bracketing samples. Only pairs inside the
/// central 80% are considered and undefined samples break the chain.
pub fn threshold_crossing(values: &[Option<f64>], threshold: f64) -> Result<f64> {
    let range = central_range(values.len(), CENTRAL_FRACTION);
    let mut crossings = Vec::new();
    for i in range.start..range.end.saturating_sub(1) {
        let (Some(a), Some(b)) = (values[i], values[i + 1]) else {
            continue;
        };
        if (a >= threshold) != (b >= threshold) {
            crossings.push(i as f64 + (threshold - a) / (b - a));
        }
    }
    match crossings.as_slice() {
        [p] => Ok(*p),
        _ => Err(Error::Ambiguous {
            crossings: crossings.len(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Where the interface really is and which side is dimmer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueBoundary {
    pub position_px: f64,
    pub weak_side: Side,
}

impl TrueBoundary {
    /// The interface of a phantom. With equal magnitudes the right side counts
    /// as the weak one.
    pub fn of_phantom(spec: &PhantomSpec) -> TrueBoundary {
        TrueBoundary {
            position_px: spec.boundary_px as f64 - 0.5,
            weak_side: if spec.left.magnitude >= spec.right.magnitude {
                Side::Right
            } else {
                Side::Left
            },
        }
    }

    /// Recovers the interface from a noiseless two-emitter field: the
    /// threshold crossing of its lifetime profile on `row`, with the weak side
    /// found by comparing the emission magnitude `re * (1 + (omega tau)^2)`
    /// at the two ends of the row.
    pub fn from_truth_field(field: &ComplexField, row: usize, tau_threshold: f64) -> Result<TrueBoundary> {
        let map = field.lifetime_map();
        let profile = extract_profile(&map, row)?;
        let position_px = threshold_crossing(&profile.values, tau_threshold)?;
        let w = field.width();
        let omega = field.modulation.angular_frequency();
        let magnitude = |x: usize| -> f64 {
            let tau = profile.values[x].unwrap_or(0.0);
            field.re().get(x, row) * (1.0 + (omega * tau).powi(2))
        };
        Ok(TrueBoundary {
            position_px,
            weak_side: if magnitude(0) >= magnitude(w - 1) {
                Side::Right
            } else {
                Side::Left
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub position_px: f64,
    pub position_nm: f64,
    /// Signed offset from the true interface; positive points into the weaker
    /// fluorophore.
    pub shift_px: f64,
}

pub fn boundary_from_threshold(
    profile: &Profile,
    tau_threshold: f64,
    truth: &TrueBoundary,
) -> Result<BoundaryEstimate> {
    let position_px = threshold_crossing(&profile.values, tau_threshold)?;
    let pitch = match profile.x_px.len() {
        0 | 1 => 0.0,
        _ => profile.x_nm[1] - profile.x_nm[0],
    };
    let dir = match truth.weak_side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    Ok(BoundaryEstimate {
        position_px,
        position_nm: position_px * pitch,
        shift_px: dir * (position_px - truth.position_px),
    })
}

/// Root-mean-square lifetime difference over pixels that are inside `mask`
/// (all pixels when `None`) and defined in both maps.
pub fn lifetime_rmse(estimate: &LifetimeMap, truth: &LifetimeMap, mask: Option<&[bool]>) -> Result<f64> {
    if estimate.dims() != truth.dims() {
        return domain(format!(
            "map shapes differ: {:?} vs {:?}",
            estimate.dims(),
            truth.dims()
        ));
    }
    if let Some(m) = mask {
        if m.len() != truth.values().len() {
            return domain("mask length does not match map");
        }
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (j, (e, t)) in estimate.values().iter().zip(truth.values()).enumerate() {
        if mask.is_some_and(|m| !m[j]) {
            continue;
        }
        if let (Some(e), Some(t)) = (e, t) {
            sum += (e - t) * (e - t);
            n += 1;
        }
    }
    if n == 0 {
        return domain("RMSE mask selects no defined pixels");
    }
    Ok((sum / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::{Fluorophore, ModulationSpec};
    use proptest::prelude::*;

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().map(|x| Some(*x)).collect()
    }

    #[test]
    fn midpoint_interpolation() {
        assert_eq!(threshold_crossing(&some(&[1.0, 1.0, 2.0, 2.0]), 1.5).unwrap(), 1.5);
    }

    #[test]
    fn ideal_step_crossing() {
        for b in [20usize, 37, 50] {
            let p: Vec<f64> = (0..64).map(|x| if x < b { 1.0 } else { 2.0 }).collect();
            for t in [1.2, 1.5, 1.9] {
                let pos = threshold_crossing(&some(&p), t).unwrap();
                let expect = b as f64 - 1.0 + (t - 1.0) / (2.0 - 1.0);
                assert!((pos - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ambiguous_profiles() {
        let flat = some(&[1.0; 20]);
        assert!(matches!(
            threshold_crossing(&flat, 1.5),
            Err(Error::Ambiguous { crossings: 0 })
        ));
        let mut bumpy = vec![1.0; 40];
        bumpy[10..15].fill(2.0);
        bumpy[25..30].fill(2.0);
        assert!(matches!(
            threshold_crossing(&some(&bumpy), 1.5),
            Err(Error::Ambiguous { crossings: 4 })
        ));
        // crossings in the outer 10% are ignored
        let mut edge = vec![1.0; 40];
        edge[0..2].fill(2.0);
        edge[20..].fill(2.0);
        assert!((threshold_crossing(&some(&edge), 1.5).unwrap() - 19.5).abs() < 1e-12);
    }

    #[test]
    fn undefined_samples_break_pairs() {
        let v = vec![Some(1.0), Some(1.0), None, Some(2.0), Some(2.0), Some(2.0)];
        assert!(threshold_crossing(&v, 1.5).is_err());
    }

    #[test]
    fn shift_sign_follows_weak_side() {
        let p = Profile::from_row(
            0,
            300.0,
            some(&(0..40).map(|x| if x < 23 { 1.0 } else { 2.0 }).collect::<Vec<_>>()),
        );
        let right = TrueBoundary {
            position_px: 19.5,
            weak_side: Side::Right,
        };
        let left = TrueBoundary {
            position_px: 19.5,
            weak_side: Side::Left,
        };
        let e = boundary_from_threshold(&p, 1.5, &right).unwrap();
        assert!((e.position_px - 22.5).abs() < 1e-12);
        assert!((e.position_nm - 6750.0).abs() < 1e-9);
        assert!((e.shift_px - 3.0).abs() < 1e-12);
        assert!((boundary_from_threshold(&p, 1.5, &left).unwrap().shift_px + 3.0).abs() < 1e-12);
    }

    #[test]
    fn true_boundary_of_phantom() {
        let spec = PhantomSpec {
            width: 256,
            height: 1,
            boundary_px: 128,
            left: Fluorophore::new(1.0, 1.0).unwrap(),
            right: Fluorophore::new(2.0, 5.0).unwrap(),
            modulation: ModulationSpec::default(),
            pixel_pitch_nm: 300.0,
        };
        let t = TrueBoundary::of_phantom(&spec);
        assert_eq!(t.position_px, 127.5);
        assert_eq!(t.weak_side, Side::Left);
        let (field, _) = crate::phantom::make_phantom(&spec).unwrap();
        let recovered = TrueBoundary::from_truth_field(&field, 0, 1.5).unwrap();
        assert!((recovered.position_px - 127.5).abs() < 1e-12);
        assert_eq!(recovered.weak_side, Side::Left);
    }

    #[test]
    fn rmse_examples() {
        let truth = LifetimeMap::new(4, 2, 300.0, some(&[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0])).unwrap();
        assert_eq!(lifetime_rmse(&truth, &truth, None).unwrap(), 0.0);
        let biased =
            LifetimeMap::new(4, 2, 300.0, truth.values().iter().map(|v| v.map(|x| x + 0.1)).collect()).unwrap();
        assert!((lifetime_rmse(&biased, &truth, None).unwrap() - 0.1).abs() < 1e-12);
        assert!(lifetime_rmse(&biased, &truth, Some(&[false; 8])).is_err());
        let other = LifetimeMap::new(8, 1, 300.0, truth.values().to_vec()).unwrap();
        assert!(lifetime_rmse(&other, &truth, None).is_err());
        let undefined = LifetimeMap::new(4, 2, 300.0, vec![None; 8]).unwrap();
        assert!(lifetime_rmse(&undefined, &truth, None).is_err());
    }

    #[test]
    fn profiles() {
        let map = LifetimeMap::new(3, 2, 250.0, some(&[1.0, 1.0, 1.0, 2.0, 3.0, 4.0])).unwrap();
        let p = extract_profile(&map, 1).unwrap();
        assert_eq!(p.values, some(&[2.0, 3.0, 4.0]));
        assert_eq!(p.x_nm, vec![0.0, 250.0, 500.0]);
        assert_eq!(extract_profile(&map, 0).unwrap().values, some(&[1.0; 3]));
        assert!(extract_profile(&map, 2).is_err());
        let plane = Plane::new(3, 1, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(
            extract_plane_profile(&plane, 1.0, 0).unwrap().values,
            some(&[0.1, 0.2, 0.3])
        );
    }

    #[test]
    fn central_regions() {
        assert_eq!(central_range(256, 0.8), 25..231);
        assert_eq!(central_range(260, 0.8), 26..234);
        assert_eq!(central_range(4, 0.8), 0..4);
        let m = central_mask(10, 10, 0.8);
        assert_eq!(m.iter().filter(|v| **v).count(), 64);
        let m1 = central_mask(10, 1, 0.8);
        assert_eq!(m1.iter().filter(|v| **v).count(), 8);
    }

    fn monotone_profile() -> impl Strategy<Value = Vec<f64>> {
        (proptest::collection::vec(0.0f64..0.3, 30..80)).prop_map(|steps| {
            let mut acc = 1.0;
            let n = steps.len();
            steps
                .into_iter()
                .enumerate()
                .map(|(i, s)| {
                    // strictly increasing, concentrated in the middle
                    let w = if i > n / 4 && i < 3 * n / 4 { 1.0 } else { 0.01 };
                    acc += 1e-6 + w * s;
                    acc
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn threshold_monotonicity(p in monotone_profile(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let v = some(&p);
            let range = central_range(p.len(), CENTRAL_FRACTION);
            let lo = p[range.start];
            let hi = p[range.end - 1];
            let (t1, t2) = (lo + (hi - lo) * a.min(b), lo + (hi - lo) * a.max(b));
            prop_assume!(t1 > lo && t2 < hi);
            let p1 = threshold_crossing(&v, t1).unwrap();
            let p2 = threshold_crossing(&v, t2).unwrap();
            prop_assert!(p1 <= p2 + 1e-12);
        }

        #[test]
        fn mirror_symmetry(p in monotone_profile(), a in 0.1f64..0.9) {
            let range = central_range(p.len(), CENTRAL_FRACTION);
            let t = p[range.start] + (p[range.end - 1] - p[range.start]) * a;
            let fwd = threshold_crossing(&some(&p), t).unwrap();
            let rev: Vec<f64> = p.iter().rev().copied().collect();
            let back = threshold_crossing(&some(&rev), t).unwrap();
            prop_assert!((fwd - ((p.len() - 1) as f64 - back)).abs() < 1e-9);
        }
    }
}
