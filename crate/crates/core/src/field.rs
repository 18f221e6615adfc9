//! Raster containers shared by every stage of the pipeline.

use crate::error::{domain, Result};
use crate::phasor::{phase_lifetime, ComplexSample, ModulationSpec};

pub const DEFAULT_PIXEL_PITCH_NM: f64 = 300.0;

/// Pixels whose real component falls below this fraction of the field's
/// maximum real component get no lifetime.
pub const DEFAULT_MAGNITUDE_FLOOR: f64 = 1e-6;

/// A row-major scalar raster. One-dimensional data has `height == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return domain(format!("degenerate plane dimensions {width}x{height}"));
        }
        if data.len() != width * height {
            return domain(format!(
                "plane data has {} values, expected {}x{} = {}",
                data.len(),
                width,
                height,
                width * height
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Amplitude-weighted real and imaginary FLIM planes plus acquisition metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub pixel_pitch_nm: f64,
    pub modulation: ModulationSpec,
    re: Plane,
    im: Plane,
}

impl ComplexField {
    pub fn new(re: Plane, im: Plane, pixel_pitch_nm: f64, modulation: ModulationSpec) -> Result<Self> {
        if re.dims() != im.dims() {
            return domain(format!(
                "plane dimensions differ: re {:?}, im {:?}",
                re.dims(),
                im.dims()
            ));
        }
        if !(pixel_pitch_nm.is_finite() && pixel_pitch_nm > 0.0) {
            return domain(format!("pixel pitch must be positive, got {pixel_pitch_nm} nm"));
        }
        if !re.is_finite() || !im.is_finite() {
            return domain("field planes contain non-finite values");
        }
        Ok(Self {
            pixel_pitch_nm,
            modulation,
            re,
            im,
        })
    }

    pub fn width(&self) -> usize {
        self.re.width()
    }

    pub fn height(&self) -> usize {
        self.re.height()
    }

    pub fn re(&self) -> &Plane {
        &self.re
    }

    pub fn im(&self) -> &Plane {
        &self.im
    }

    pub fn planes(&self) -> [&Plane; 2] {
        [&self.re, &self.im]
    }

    pub fn into_planes(self) -> (Plane, Plane) {
        (self.re, self.im)
    }

    /// Same metadata, new planes.
    pub fn with_planes(&self, re: Plane, im: Plane) -> Result<Self> {
        Self::new(re, im, self.pixel_pitch_nm, self.modulation)
    }

    pub fn sample(&self, x: usize, y: usize) -> ComplexSample {
        ComplexSample::new(self.re.get(x, y), self.im.get(x, y))
    }

    /// Clamp negative values of both planes to zero.
    pub fn clamp_non_negative(&self) -> ComplexField {
        ComplexField {
            pixel_pitch_nm: self.pixel_pitch_nm,
            modulation: self.modulation,
            re: self.re.map(|v| v.max(0.0)),
            im: self.im.map(|v| v.max(0.0)),
        }
    }

    /// Pixel-wise arithmetic mean of fields with identical geometry, accumulated
    /// in slice order.
    pub fn mean(fields: &[ComplexField]) -> Result<ComplexField> {
        let mut acc = FieldAccumulator::default();
        for f in fields {
            acc.add(f)?;
        }
        acc.mean()
    }

    pub fn lifetime_map(&self) -> LifetimeMap {
        LifetimeMap::from_field(self, DEFAULT_MAGNITUDE_FLOOR)
    }
}

/// Per-pixel lifetime in ns; `None` marks undefined pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeMap {
    width: usize,
    height: usize,
    pub pixel_pitch_nm: f64,
    values: Vec<Option<f64>>,
}

impl LifetimeMap {
    pub fn new(width: usize, height: usize, pixel_pitch_nm: f64, values: Vec<Option<f64>>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return domain(format!(
                "lifetime map has {} values for {}x{}",
                values.len(),
                width,
                height
            ));
        }
        Ok(Self {
            width,
            height,
            pixel_pitch_nm,
            values,
        })
    }

    /// Phase lifetime at every pixel; pixels with `re < floor_ratio * max(re)`
    /// are undefined.
    pub fn from_field(field: &ComplexField, floor_ratio: f64) -> LifetimeMap {
        let max_re = field.re().max();
        let floor = if max_re > 0.0 {
            floor_ratio * max_re
        } else {
            f64::INFINITY
        };
        let values = field
            .re()
            .data()
            .iter()
            .zip(field.im().data())
            .map(|(&re, &im)| {
                if re < floor {
                    None
                } else {
                    phase_lifetime(ComplexSample::new(re, im), field.modulation)
                }
            })
            .collect();
        LifetimeMap {
            width: field.width(),
            height: field.height(),
            pixel_pitch_nm: field.pixel_pitch_nm,
            values,
        }
    }

    /// Pixel-wise mean over the maps that define each pixel.
    pub fn mean(maps: &[LifetimeMap]) -> Result<LifetimeMap> {
        let mut acc = LifetimeAccumulator::default();
        for m in maps {
            acc.add(m)?;
        }
        acc.mean()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.values[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[Option<f64>] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    /// Range of the defined values.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.values.iter().flatten().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

/// Running pixel-wise mean of complex fields, updated as
/// `m += (x - m) / k` in the order fields are added. Averaging identical
/// fields returns them bitwise.
#[derive(Debug, Default)]
pub struct FieldAccumulator {
    template: Option<ComplexField>,
    re: Vec<f64>,
    im: Vec<f64>,
    count: usize,
}

impl FieldAccumulator {
    pub fn add(&mut self, field: &ComplexField) -> Result<()> {
        match &self.template {
            None => {
                self.template = Some(field.clone());
                self.re = field.re().data().to_vec();
                self.im = field.im().data().to_vec();
            }
            Some(t) => {
                if t.re().dims() != field.re().dims() {
                    return domain("cannot average fields of different dimensions");
                }
                let k = (self.count + 1) as f64;
                for (m, v) in self.re.iter_mut().zip(field.re().data()) {
                    *m += (v - *m) / k;
                }
                for (m, v) in self.im.iter_mut().zip(field.im().data()) {
                    *m += (v - *m) / k;
                }
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Result<ComplexField> {
        let Some(t) = &self.template else {
            return domain("cannot average zero fields");
        };
        let (w, h) = t.re().dims();
        t.with_planes(Plane::new(w, h, self.re.clone())?, Plane::new(w, h, self.im.clone())?)
    }
}

/// Running pixel-wise mean of lifetime maps over the maps defining each pixel.
#[derive(Debug, Default)]
pub struct LifetimeAccumulator {
    shape: Option<(usize, usize, f64)>,
    mean: Vec<f64>,
    count: Vec<usize>,
}

impl LifetimeAccumulator {
    pub fn add(&mut self, map: &LifetimeMap) -> Result<()> {
        match self.shape {
            None => {
                self.shape = Some((map.width, map.height, map.pixel_pitch_nm));
                self.mean = vec![0.0; map.values.len()];
                self.count = vec![0; map.values.len()];
            }
            Some((w, h, _)) if (w, h) != map.dims() => {
                return domain("cannot average lifetime maps of different dimensions");
            }
            Some(_) => {}
        }
        for (i, v) in map.values.iter().enumerate() {
            if let Some(v) = v {
                self.count[i] += 1;
                self.mean[i] += (v - self.mean[i]) / self.count[i] as f64;
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> Result<LifetimeMap> {
        let Some((w, h, pitch)) = self.shape else {
            return domain("cannot average zero lifetime maps");
        };
        let values = self
            .mean
            .iter()
            .zip(&self.count)
            .map(|(&m, &c)| (c > 0).then_some(m))
            .collect();
        LifetimeMap::new(w, h, pitch, values)
    }
}
