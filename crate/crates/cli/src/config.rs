//! Flag resolution: preset values first, explicit flags on top.

use std::path::Path;

use serde::{Deserialize, Serialize};

use flimdeconv::deconv::DeconvConfig;
use flimdeconv::io::read_field;
use flimdeconv::optics::{gaussian_kernel, Kernel, KernelDims, DEFAULT_PSF_SIGMA_PX};
use flimdeconv::phantom::{NoiseSpec, PhantomSpec};
use flimdeconv::{Boundary, Engine, Fluorophore, ModulationSpec};

use crate::args::{BoundaryMode, DeconvArgs, EngineMode, OpticsArgs, PhantomArgs, Preset, PsfArgs};
use crate::error::{invalid, CliResult};
use crate::manifest::Recorder;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.05;
pub const DEFAULT_REALIZATIONS: usize = 100;
const DEFAULT_N: usize = 256;

/// Values a preset pins before flags are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetValues {
    pub width: usize,
    pub height: usize,
    pub a1: f64,
    pub a2: f64,
    pub noise_sigma: f64,
    pub realizations: usize,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Fig2Equal => "fig2-equal",
            Preset::Fig2Unequal => "fig2-unequal",
        }
    }

    pub fn values(self) -> PresetValues {
        let line = |a1| PresetValues {
            width: 256,
            height: 1,
            a1,
            a2: 1.0,
            noise_sigma: 0.0,
            realizations: 1,
        };
        let image = |a1| PresetValues {
            width: 260,
            height: 260,
            a1,
            a2: 1.0,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            realizations: DEFAULT_REALIZATIONS,
        };
        match self {
            Preset::Fig1a => line(1.0),
            Preset::Fig1b => line(5.0),
            Preset::Fig2Equal => image(1.0),
            Preset::Fig2Unequal => image(5.0),
        }
    }
}

pub fn modulation(freq_mhz: Option<f64>) -> CliResult<ModulationSpec> {
    Ok(match freq_mhz {
        Some(f) => ModulationSpec::new(f)?,
        None => ModulationSpec::default(),
    })
}

pub fn resolve_phantom(args: &PhantomArgs) -> CliResult<PhantomSpec> {
    let base = args.preset.map(Preset::values);
    let (mut width, mut height) = base.map_or((DEFAULT_N, 1), |p| (p.width, p.height));
    if let Some(n) = args.n {
        (width, height) = (n, 1);
    }
    width = args.width.unwrap_or(width);
    height = args.height.unwrap_or(height);
    let spec = PhantomSpec {
        width,
        height,
        boundary_px: args.boundary_px.unwrap_or(width / 2),
        left: Fluorophore::new(args.tau1.unwrap_or(1.0), args.a1.unwrap_or(base.map_or(1.0, |p| p.a1)))?,
        right: Fluorophore::new(args.tau2.unwrap_or(2.0), args.a2.unwrap_or(base.map_or(1.0, |p| p.a2)))?,
        modulation: modulation(args.freq_mhz)?,
        pixel_pitch_nm: args.pitch_nm.unwrap_or(flimdeconv::field::DEFAULT_PIXEL_PITCH_NM),
    };
    spec.validate()?;
    Ok(spec)
}

/// Noise for a pipeline run; `None` when sigma resolves to zero.
pub fn resolve_noise(
    preset: Option<Preset>,
    sigma: Option<f64>,
    realizations: Option<u32>,
    seed: Option<u64>,
) -> CliResult<Option<NoiseSpec>> {
    let base = preset.map(Preset::values);
    let sigma = sigma.unwrap_or(base.map_or(DEFAULT_NOISE_SIGMA, |p| p.noise_sigma));
    let realizations = realizations
        .map(|r| r as usize)
        .unwrap_or(base.map_or(DEFAULT_REALIZATIONS, |p| p.realizations));
    if sigma == 0.0 {
        return Ok(None);
    }
    let spec = NoiseSpec::gaussian(sigma, seed.unwrap_or(DEFAULT_SEED), realizations);
    spec.validate()?;
    Ok(Some(spec))
}

pub fn boundary(mode: Option<BoundaryMode>) -> Boundary {
    match mode {
        Some(BoundaryMode::Periodic) => Boundary::Periodic,
        Some(BoundaryMode::Reflect) | None => Boundary::Reflect,
    }
}

pub fn engine(mode: Option<EngineMode>) -> Engine {
    match mode {
        Some(EngineMode::Direct) => Engine::Direct,
        Some(EngineMode::Fft) | None => Engine::Fft,
    }
}

pub fn resolve_deconv(optics: &OpticsArgs, args: &DeconvArgs) -> CliResult<DeconvConfig> {
    let defaults = DeconvConfig::default();
    let cfg = DeconvConfig {
        iterations: args.iters.map_or(defaults.iterations, |i| i as usize),
        lambda: args.lambda.unwrap_or(defaults.lambda),
        boundary: boundary(optics.boundary_mode),
        engine: engine(optics.engine),
        ..defaults
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Where the PSF came from. File PSFs are identified by content digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PsfSource {
    Gaussian {
        sigma_px: f64,
        dims: KernelDims,
    },
    File {
        sha256: String,
        width: usize,
        height: usize,
    },
}

pub fn dims_for_height(height: usize) -> KernelDims {
    if height == 1 {
        KernelDims::One
    } else {
        KernelDims::Two
    }
}

pub fn resolve_kernel(args: &PsfArgs, field_height: usize, rec: &mut Recorder) -> CliResult<(Kernel, PsfSource)> {
    match &args.psf {
        Some(path) => kernel_from_file(path, rec),
        None => {
            let sigma_px = args.psf_sigma_px.unwrap_or(DEFAULT_PSF_SIGMA_PX);
            let dims = dims_for_height(field_height);
            Ok((gaussian_kernel(sigma_px, dims)?, PsfSource::Gaussian { sigma_px, dims }))
        }
    }
}

fn kernel_from_file(path: &Path, rec: &mut Recorder) -> CliResult<(Kernel, PsfSource)> {
    rec.input(path)?;
    let scalar = read_field(path)?.into_scalar()?;
    let (w, h) = scalar.plane.dims();
    let Ok(kernel) = Kernel::normalized(w, h, scalar.plane.into_data()) else {
        return invalid(format!(
            "{}: a PSF needs odd dimensions and non-negative values with positive sum",
            path.display()
        ));
    };
    let sha256 = crate::manifest::sha256_file(path)?;
    Ok((
        kernel,
        PsfSource::File {
            sha256,
            width: w,
            height: h,
        },
    ))
}
