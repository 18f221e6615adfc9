use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::fft::FftPlan;
use super::Kernel;
use crate::error::{domain, Error, Result};
use crate::field::{ComplexField, Plane};

/// How samples outside the field are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Half-sample symmetric extension: `d c b a | a b c d | d c b a`.
    #[default]
    Reflect,
    /// Wrap-around.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Explicit tap-by-tap sum.
    Direct,
    #[default]
    Fft,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Reflect => "reflect",
            Boundary::Periodic => "periodic",
        })
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflect" => Ok(Boundary::Reflect),
            "periodic" => Ok(Boundary::Periodic),
            other => domain(format!("unknown boundary mode '{other}'")),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Direct => "direct",
            Engine::Fft => "fft",
        })
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Engine::Direct),
            "fft" => Ok(Engine::Fft),
            other => domain(format!("unknown convolution engine '{other}'")),
        }
    }
}

#[inline]
fn fold(i: isize, n: usize, boundary: Boundary) -> usize {
    let n = n as isize;
    match boundary {
        Boundary::Periodic => i.rem_euclid(n) as usize,
        Boundary::Reflect => {
            let m = i.rem_euclid(2 * n);
            (if m < n { m } else { 2 * n - 1 - m }) as usize
        }
    }
}

/// A kernel bound to a plane geometry and boundary policy, with any FFT
/// plans and the kernel spectrum computed once up front.
pub struct Convolver {
    kernel: Kernel,
    width: usize,
    height: usize,
    boundary: Boundary,
    fft: Option<FftPlan>,
}

impl Convolver {
    pub fn new(kernel: &Kernel, width: usize, height: usize, boundary: Boundary, engine: Engine) -> Result<Self> {
        if kernel.width() > width || kernel.height() > height {
            return domain(format!(
                "kernel {}x{} does not fit in field {}x{}",
                kernel.width(),
                kernel.height(),
                width,
                height
            ));
        }
        let fft = match engine {
            Engine::Direct => None,
            Engine::Fft => Some(FftPlan::new(
                kernel,
                width + 2 * kernel.radius_x(),
                height + 2 * kernel.radius_y(),
            )),
        };
        Ok(Self {
            kernel: kernel.clone(),
            width,
            height,
            boundary,
            fft,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Appends the boundary-extended copy of `input` to `ext`, `row_stride`
    /// values per row (padding past the extended width is zero).
    fn extend_into(&self, input: &[f64], row_stride: usize, ext: &mut Vec<f64>) {
        let (rx, ry) = (self.kernel.radius_x(), self.kernel.radius_y());
        let ew = self.width + 2 * rx;
        let eh = self.height + 2 * ry;
        let base = ext.len();
        ext.resize(base + eh * row_stride, 0.0);
        for ey in 0..eh {
            let sy = fold(ey as isize - ry as isize, self.height, self.boundary);
            let src = &input[sy * self.width..(sy + 1) * self.width];
            let dst = &mut ext[base + ey * row_stride..base + ey * row_stride + ew];
            for (ex, d) in dst.iter_mut().enumerate() {
                *d = src[fold(ex as isize - rx as isize, self.width, self.boundary)];
            }
        }
    }

    /// Convolves a row-major slice of `width * height` values into `out`.
    pub fn apply_slice(&self, input: &[f64], out: &mut [f64]) {
        assert_eq!(input.len(), self.width * self.height);
        assert_eq!(out.len(), self.width * self.height);
        match &self.fft {
            None => self.direct(input, out),
            Some(plan) => self.via_fft(plan, input, out),
        }
    }

    pub fn apply(&self, plane: &Plane) -> Result<Plane> {
        if plane.dims() != (self.width, self.height) {
            return domain(format!(
                "plane {:?} does not match convolver geometry {:?}",
                plane.dims(),
                (self.width, self.height)
            ));
        }
        let mut out = vec![0.0; plane.len()];
        self.apply_slice(plane.data(), &mut out);
        Plane::new(self.width, self.height, out)
    }

    fn direct(&self, input: &[f64], out: &mut [f64]) {
        let k = &self.kernel;
        let (kw, kh) = (k.width(), k.height());
        let (rx, ry) = (k.radius_x(), k.radius_y());
        let ew = self.width + 2 * rx;
        let mut ext = Vec::new();
        self.extend_into(input, ew, &mut ext);
        for y in 0..self.height {
            for x in 0..self.width {
                // out(x, y) = sum_t k(t) * in(x + r - t)
                let mut acc: Option<f64> = None;
                for ty in 0..kh {
                    let row = &ext[(y + 2 * ry - ty) * ew..];
                    let krow = &k.values()[ty * kw..(ty + 1) * kw];
                    for (tx, kv) in krow.iter().enumerate() {
                        let term = kv * row[x + 2 * rx - tx];
                        acc = Some(match acc {
                            None => term,
                            Some(a) => a + term,
                        });
                    }
                }
                out[y * self.width + x] = acc.unwrap_or(0.0);
            }
        }
    }

    fn via_fft(&self, plan: &FftPlan, input: &[f64], out: &mut [f64]) {
        let (rx, ry) = (self.kernel.radius_x(), self.kernel.radius_y());
        let w = self.width;
        let eh = self.height + 2 * ry;
        // Output pixel (x, y) sits at (x + 2rx, y + 2ry) of the circular result.
        plan.convolve(
            eh,
            |rows| self.extend_into(input, plan.nx(), rows),
            2 * ry..2 * ry + self.height,
            |y, line| out[y * w..(y + 1) * w].copy_from_slice(&line[2 * rx..2 * rx + w]),
        );
    }
}

pub fn convolve_plane(plane: &Plane, kernel: &Kernel, boundary: Boundary, engine: Engine) -> Result<Plane> {
    Convolver::new(kernel, plane.width(), plane.height(), boundary, engine)?.apply(plane)
}

/// Blurs both planes of `field` with the same kernel.
pub fn convolve_field(
    field: &ComplexField,
    kernel: &Kernel,
    boundary: Boundary,
    engine: Engine,
) -> Result<ComplexField> {
    let conv = Convolver::new(kernel, field.width(), field.height(), boundary, engine)?;
    field.with_planes(conv.apply(field.re())?, conv.apply(field.im())?)
}
