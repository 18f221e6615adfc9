use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub const DEFAULT_PSF_SIGMA_PX: f64 = 5.0;

/// Truncation radius of Gaussian kernels, in units of sigma.
const TRUNCATE_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelDims {
    One,
    Two,
}

/// A normalized, odd-sized discrete PSF stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    values: Vec<f64>,
    sigma_px: Option<f64>,
}

impl Kernel {
    /// Wraps already-normalized weights. The sum must be 1 within 1e-12.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::check_shape(width, height, &values)?;
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return domain(format!("kernel weights sum to {sum}, expected 1"));
        }
        Ok(Self {
            width,
            height,
            values,
            sigma_px: None,
        })
    }

    /// Rescales arbitrary non-negative weights to unit sum.
    pub fn normalized(width: usize, height: usize, mut values: Vec<f64>) -> Result<Self> {
        Self::check_shape(width, height, &values)?;
        let sum: f64 = values.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return domain("kernel weights sum to zero");
        }
        values.iter_mut().for_each(|v| *v /= sum);
        Ok(Self {
            width,
            height,
            values,
            sigma_px: None,
        })
    }

    pub fn delta() -> Kernel {
        Kernel {
            width: 1,
            height: 1,
            values: vec![1.0],
            sigma_px: None,
        }
    }

    fn check_shape(width: usize, height: usize, values: &[f64]) -> Result<()> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return domain(format!("kernel extent must be odd in every axis, got {width}x{height}"));
        }
        if values.len() != width * height {
            return domain(format!(
                "kernel has {} weights, expected {}",
                values.len(),
                width * height
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return domain("kernel weights must be finite and non-negative");
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn radius_x(&self) -> usize {
        self.width / 2
    }

    pub fn radius_y(&self) -> usize {
        self.height / 2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sigma_px(&self) -> Option<f64> {
        self.sigma_px
    }

    pub fn center(&self) -> f64 {
        self.values[self.radius_y() * self.width + self.radius_x()]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Isotropic Gaussian truncated at `ceil(4 sigma)` and renormalized.
pub fn gaussian_kernel(sigma_px: f64, dims: KernelDims) -> Result<Kernel> {
    if !(sigma_px.is_finite() && sigma_px > 0.0) {
        return domain(format!("PSF sigma must be positive, got {sigma_px} px"));
    }
    let radius = (TRUNCATE_SIGMAS * sigma_px).ceil() as usize;
    let extent = 2 * radius + 1;
    let two_var = 2.0 * sigma_px * sigma_px;
    let r = radius as f64;
    let tap = |i: usize| {
        let d = i as f64 - r;
        d * d
    };
    let (width, height, raw) = match dims {
        KernelDims::One => (extent, 1, (0..extent).map(|i| (-tap(i) / two_var).exp()).collect()),
        KernelDims::Two => {
            let mut v = Vec::with_capacity(extent * extent);
            for y in 0..extent {
                for x in 0..extent {
                    v.push(((-tap(x) - tap(y)) / two_var).exp());
                }
            }
            (extent, extent, v)
        }
    };
    let mut k = Kernel::normalized(width, height, raw)?;
    k.sigma_px = Some(sigma_px);
    Ok(k)
}

/// Point reflection `h(s) -> h(-s)`: weights reversed along every axis.
pub fn mirror(kernel: &Kernel) -> Kernel {
    let mut values = kernel.values.clone();
    // Row-major reversal flips both axes at once.
    values.reverse();
    Kernel {
        width: kernel.width,
        height: kernel.height,
        values,
        sigma_px: kernel.sigma_px,
    }
}
