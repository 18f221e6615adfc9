//! Real-input 2D FFT convolution on a padded grid.
//!
//! The boundary-extended input (`w + 2rx` by `h + 2ry`) is embedded in an
//! `nx` by `ny` grid with `nx, ny` 5-smooth and at least the extended size, so
//! the circular convolution never wraps into the samples we keep. Rows go
//! through a real-to-complex transform; only `nx/2 + 1` columns need the
//! complex column pass.

use std::sync::{Arc, Mutex};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::Kernel;

/// Buffers reused across calls so steady-state convolution does not allocate.
struct Workspace {
    rows: Vec<f64>,
    spec: Vec<Complex<f64>>,
    spec_row: Vec<Complex<f64>>,
    line: Vec<f64>,
    r2c_scratch: Vec<Complex<f64>>,
    c2r_scratch: Vec<Complex<f64>>,
    col_scratch: Vec<Complex<f64>>,
}

pub(super) struct FftPlan {
    nx: usize,
    ny: usize,
    spectrum: Vec<Complex<f64>>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    work: Mutex<Workspace>,
}

/// Smallest `n >= min` whose only prime factors are 2, 3 and 5.
pub(super) fn fast_len(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

impl FftPlan {
    pub(super) fn new(kernel: &Kernel, ext_w: usize, ext_h: usize) -> FftPlan {
        let nx = fast_len(ext_w);
        let ny = if ext_h == 1 { 1 } else { fast_len(ext_h) };
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        let r2c = real.plan_fft_forward(nx);
        let c2r = real.plan_fft_inverse(nx);
        let col_fwd = cplx.plan_fft_forward(ny);
        let col_inv = cplx.plan_fft_inverse(ny);
        let zero = Complex::new(0.0, 0.0);
        let col_len = col_fwd.get_inplace_scratch_len().max(col_inv.get_inplace_scratch_len());
        let work = Workspace {
            rows: Vec::with_capacity(ny * nx),
            spec: vec![zero; (nx / 2 + 1) * ny],
            spec_row: r2c.make_output_vec(),
            line: c2r.make_output_vec(),
            r2c_scratch: r2c.make_scratch_vec(),
            c2r_scratch: c2r.make_scratch_vec(),
            col_scratch: vec![zero; col_len],
        };
        let mut plan = FftPlan {
            nx,
            ny,
            spectrum: Vec::new(),
            r2c,
            c2r,
            col_fwd,
            col_inv,
            work: Mutex::new(work),
        };
        let mut ws = plan.work.lock().expect("fresh lock");
        ws.rows.resize(kernel.height() * nx, 0.0);
        for y in 0..kernel.height() {
            for x in 0..kernel.width() {
                ws.rows[y * nx + x] = kernel.get(x, y);
            }
        }
        plan.forward(&mut ws, kernel.height());
        let spectrum = ws.spec.clone();
        drop(ws);
        plan.spectrum = spectrum;
        plan
    }

    fn ncols(&self) -> usize {
        self.nx / 2 + 1
    }

    /// Forward 2D transform of the first `used_rows` rows of `ws.rows` (rows
    /// past that are zero) into `ws.spec`, column-major: `spec[c * ny + r]`.
    fn forward(&self, ws: &mut Workspace, used_rows: usize) {
        let (nx, ny) = (self.nx, self.ny);
        let Workspace {
            rows,
            spec,
            spec_row,
            r2c_scratch,
            col_scratch,
            ..
        } = ws;
        spec.fill(Complex::new(0.0, 0.0));
        for r in 0..used_rows {
            self.r2c
                .process_with_scratch(&mut rows[r * nx..(r + 1) * nx], spec_row, r2c_scratch)
                .expect("row length matches plan");
            for (c, v) in spec_row.iter().enumerate() {
                spec[c * ny + r] = *v;
            }
        }
        if ny > 1 {
            self.col_fwd.process_with_scratch(spec, col_scratch);
        }
    }

    /// Circular convolution of the zero-padded rows produced by `fill` with
    /// the kernel. `fill` receives an empty buffer and must push `used_rows`
    /// rows of length `nx`. Row `keep_rows.start + i` of the (normalized)
    /// result is handed to `emit(i, row)`.
    pub(super) fn convolve(
        &self,
        used_rows: usize,
        fill: impl FnOnce(&mut Vec<f64>),
        keep_rows: std::ops::Range<usize>,
        mut emit: impl FnMut(usize, &[f64]),
    ) {
        let (nx, ny, nc) = (self.nx, self.ny, self.ncols());
        let mut guard = self.work.lock().unwrap_or_else(|e| e.into_inner());
        let ws = &mut *guard;
        ws.rows.clear();
        fill(&mut ws.rows);
        debug_assert_eq!(ws.rows.len(), used_rows * nx);
        self.forward(ws, used_rows);
        for (v, k) in ws.spec.iter_mut().zip(&self.spectrum) {
            *v *= k;
        }
        if ny > 1 {
            self.col_inv.process_with_scratch(&mut ws.spec, &mut ws.col_scratch);
        }
        let scale = 1.0 / (nx * ny) as f64;
        for (i, r) in keep_rows.enumerate() {
            for (c, v) in ws.spec_row.iter_mut().enumerate() {
                *v = ws.spec[c * ny + r];
            }
            // The result is real: DC and Nyquist bins carry no imaginary part.
            ws.spec_row[0].im = 0.0;
            if nx % 2 == 0 {
                ws.spec_row[nc - 1].im = 0.0;
            }
            self.c2r
                .process_with_scratch(&mut ws.spec_row, &mut ws.line, &mut ws.c2r_scratch)
                .expect("row length matches plan");
            for v in ws.line.iter_mut() {
                *v *= scale;
            }
            emit(i, &ws.line);
        }
    }

    pub(super) fn nx(&self) -> usize {
        self.nx
    }
}
