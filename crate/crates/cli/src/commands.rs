use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;

use flimdeconv::deconv::Deconvolver;
use flimdeconv::field::DEFAULT_MAGNITUDE_FLOOR;
use flimdeconv::io::{
    atomic_write, profile_csv, read_field, write_field, write_lifetime_outputs, FieldData, ScalarField,
};
use flimdeconv::metrics::{extract_profile, TrueBoundary, CENTRAL_FRACTION};
use flimdeconv::optics::{gaussian_kernel, DEFAULT_PSF_SIGMA_PX};
use flimdeconv::phantom::{make_phantom, noisy_realization, NoiseKind, NoiseSpec};
use flimdeconv::{convolve_field, ComplexField, LifetimeMap};

use crate::args::*;
use crate::config::{self, resolve_kernel, resolve_phantom, PsfSource, DEFAULT_NOISE_SIGMA, DEFAULT_SEED};
use crate::error::{invalid, CliError, CliResult};
use crate::manifest::{
    absolute, digest_mismatches, read_manifest, sha256_file, write_manifest, Recorder, RunManifest, TOOL, VERSION,
};
use crate::pipeline::{run_pipeline, score, trace_csv, PipelineConfig};

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn output_parent(out: &Path) -> PathBuf {
    match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn read_complex(path: &Path, rec: &mut Recorder) -> CliResult<ComplexField> {
    rec.input(path)?;
    Ok(read_field(path)?.into_complex()?)
}

fn save_complex(path: &Path, field: &ComplexField, rec: &mut Recorder) -> CliResult<()> {
    write_field(path, &FieldData::Complex(field.clone()))?;
    rec.output(path);
    Ok(())
}

fn check_row(row: usize, height: usize) -> CliResult<()> {
    if row >= height {
        return invalid(format!("row {row} is outside a field of height {height}"));
    }
    Ok(())
}

/// Finishes a single-output command: digests relative to the output's
/// directory, manifest written next to the output.
fn finish_single(
    rec: Recorder,
    command: &str,
    argv: &[String],
    config: serde_json::Value,
    out: &Path,
) -> CliResult<RunManifest> {
    let manifest = rec.finish(command, argv, config, &output_parent(out))?;
    write_manifest(&manifest, &with_suffix(out, ".manifest.json"))?;
    Ok(manifest)
}

fn simulate(a: &SimulateArgs, argv: &[String]) -> CliResult<RunManifest> {
    let mut rec = Recorder::default();
    let spec = resolve_phantom(&a.phantom)?;
    let (field, _) = make_phantom(&spec)?;
    save_complex(&a.out, &field, &mut rec)?;
    let config = json!({ "preset": a.phantom.preset.map(|p| p.name()), "phantom": spec });
    finish_single(rec, "simulate", argv, config, &a.out)
}

fn psf(a: &PsfCmdArgs, argv: &[String]) -> CliResult<RunManifest> {
    let mut rec = Recorder::default();
    let sigma_px = a.psf_sigma_px.unwrap_or(DEFAULT_PSF_SIGMA_PX);
    let dims = config::dims_for_height(if a.dims == 1 { 1 } else { 2 });
    let kernel = gaussian_kernel(sigma_px, dims)?;
    let plane = flimdeconv::Plane::new(kernel.width(), kernel.height(), kernel.values().to_vec())?;
    let pixel_pitch_nm = a.pitch_nm.unwrap_or(flimdeconv::field::DEFAULT_PIXEL_PITCH_NM);
    let scalar = ScalarField {
        plane,
        pixel_pitch_nm,
        modulation: flimdeconv::ModulationSpec::default(),
    };
    write_field(&a.out, &FieldData::Scalar(scalar))?;
    rec.output(&a.out);
    let config = json!({ "psf": PsfSource::Gaussian { sigma_px, dims }, "pixel_pitch_nm": pixel_pitch_nm });
    finish_single(rec, "psf", argv, config, &a.out)
}

fn convolve(a: &ConvolveArgs, argv: &[String]) -> CliResult<RunManifest> {
    let mut rec = Recorder::default();
    let field = read_complex(&a.input, &mut rec)?;
    let (kernel, source) = resolve_kernel(&a.psf, field.height(), &mut rec)?;
    let boundary = config::boundary(a.optics.boundary_mode);
    let engine = config::engine(a.optics.engine);
    let out = convolve_field(&field, &kernel, boundary, engine)?;
    save_complex(&a.out, &out, &mut rec)?;
    let config = json!({ "psf": source, "boundary": boundary, "engine": engine });
    finish_single(rec, "convolve", argv, config, &a.out)
}

fn noise(a: &NoiseCmdArgs, argv: &[String]) -> CliResult<RunManifest> {
    let mut rec = Recorder::default();
    let field = read_complex(&a.input, &mut rec)?;
    let kind = match a.kind {
        NoiseKindArg::Gaussian => NoiseKind::Gaussian {
            sigma: a.sigma.unwrap_or(DEFAULT_NOISE_SIGMA),
        },
        NoiseKindArg::Poisson => NoiseKind::Poisson {
            peak_counts: a.peak_counts,
        },
    };
    let spec = NoiseSpec {
        kind,
        seed: a.seed.unwrap_or(DEFAULT_SEED),
        realizations: a.realization as usize + 1,
    };
    spec.validate()?;
    rec.seed(spec.seed);
    let mut noisy = noisy_realization(&field, &spec, a.realization as usize)?;
    if !a.no_clamp {
        noisy = noisy.clamp_non_negative();
    }
    save_complex(&a.out, &noisy, &mut rec)?;
    let config = json!({
        "noise": kind,
        "seed": spec.seed,
        "realization": a.realization,
        "clamp_non_negative": !a.no_clamp,
    });
    finish_single(rec, "noise", argv, config, &a.out)
}

fn deconvolve(a: &DeconvolveArgs, argv: &[String]) -> CliResult<RunManifest> {
    let mut rec = Recorder::default();
    let field = read_complex(&a.input, &mut rec)?;
    let (kernel, source) = resolve_kernel(&a.psf, field.height(), &mut rec)?;
    let cfg = config::resolve_deconv(&a.optics, &a.deconv)?;
    let d = Deconvolver::new(&kernel, field.width(), field.height(), cfg)?;
    let (re, t_re) = d.run(field.re())?;
    let (im, t_im) = d.run(field.im())?;
    save_complex(&a.out, &field.with_planes(re, im)?, &mut rec)?;
    let trace = with_suffix(&a.out, ".trace.csv");
    atomic_write(&trace, trace_csv(&[t_re, t_im]).as_bytes())?;
    rec.output(&trace);
    let config = json!({ "psf": source, "deconv": cfg });
    finish_single(rec, "deconvolve", argv, config, &a.out)
}

fn lifetime(a: &LifetimeArgs, argv: &[String]) -> CliResult<RunManifest> {
    let mut rec = Recorder::default();
    let field = read_complex(&a.input, &mut rec)?;
    if let Some(r) = a.row {
        check_row(r, field.height())?;
    }
    let map = LifetimeMap::from_field(&field, DEFAULT_MAGNITUDE_FLOOR);
    let outputs = write_lifetime_outputs(&map, &a.out, a.row)?;
    for p in outputs.paths() {
        rec.output(p);
    }
    let config = json!({ "row": a.row, "magnitude_floor": DEFAULT_MAGNITUDE_FLOOR });
    finish_single(rec, "lifetime", argv, config, &a.out)
}

fn profile(a: &ProfileArgs, argv: &[String]) -> CliResult<RunManifest> {
    let mut rec = Recorder::default();
    let field = read_complex(&a.input, &mut rec)?;
    let row = a.row.unwrap_or(field.height() / 2);
    check_row(row, field.height())?;
    let map = LifetimeMap::from_field(&field, DEFAULT_MAGNITUDE_FLOOR);
    atomic_write(&a.out, profile_csv(&extract_profile(&map, row)?).as_bytes())?;
    rec.output(&a.out);
    let config = json!({ "row": row, "magnitude_floor": DEFAULT_MAGNITUDE_FLOOR });
    finish_single(rec, "profile", argv, config, &a.out)
}

fn metrics(a: &MetricsArgs, argv: &[String]) -> CliResult<RunManifest> {
    let mut rec = Recorder::default();
    let estimate = read_complex(&a.input, &mut rec)?;
    let truth = read_complex(&a.truth, &mut rec)?;
    if (estimate.width(), estimate.height()) != (truth.width(), truth.height()) {
        return invalid("estimate and truth fields differ in size");
    }
    let row = a.row.unwrap_or(truth.height() / 2);
    check_row(row, truth.height())?;
    let truth_map = LifetimeMap::from_field(&truth, DEFAULT_MAGNITUDE_FLOOR);
    let threshold_ns = match (a.tau1, a.tau2) {
        (Some(t1), Some(t2)) => 0.5 * (t1 + t2),
        _ => match truth_map.range() {
            Some((lo, hi)) => 0.5 * (lo + hi),
            None => return invalid("truth field has no defined lifetimes"),
        },
    };
    let true_boundary = TrueBoundary::from_truth_field(&truth, row, threshold_ns)?;
    let est_map = LifetimeMap::from_field(&estimate, DEFAULT_MAGNITUDE_FLOOR);
    let scores = score(
        &est_map,
        &truth_map,
        &true_boundary,
        row,
        threshold_ns,
        CENTRAL_FRACTION,
    )?;
    let report = json!({
        "threshold_ns": threshold_ns,
        "row": row,
        "central_fraction": CENTRAL_FRACTION,
        "true_boundary": true_boundary,
        "estimate": scores,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    atomic_write(&a.out, text.as_bytes())?;
    rec.output(&a.out);
    let config = json!({ "row": row, "threshold_ns": threshold_ns, "central_fraction": CENTRAL_FRACTION });
    finish_single(rec, "metrics", argv, config, &a.out)
}

pub fn pipeline_config(a: &PipelineArgs, kernel_source: PsfSource) -> CliResult<PipelineConfig> {
    let phantom = resolve_phantom(&a.phantom)?;
    let row = a.row.unwrap_or(phantom.height / 2);
    check_row(row, phantom.height)?;
    Ok(PipelineConfig {
        preset: a.phantom.preset.map(|p| p.name().to_string()),
        phantom,
        psf: kernel_source,
        deconv: config::resolve_deconv(&a.optics, &a.deconv)?,
        noise: config::resolve_noise(a.phantom.preset, a.noise.sigma, a.noise.realizations, a.noise.seed)?,
        avg_order: a.noise.avg_order.unwrap_or_default(),
        clamp_before_deconv: true,
        row,
        threshold_ns: phantom.mean_lifetime(),
        magnitude_floor: DEFAULT_MAGNITUDE_FLOOR,
        central_fraction: CENTRAL_FRACTION,
    })
}

fn pipeline(a: &PipelineArgs, argv: &[String]) -> CliResult<RunManifest> {
    let mut rec = Recorder::default();
    let height = resolve_phantom(&a.phantom)?.height;
    let (kernel, source) = resolve_kernel(&a.psf, height, &mut rec)?;
    let cfg = pipeline_config(a, source)?;
    run_pipeline(&cfg, &kernel, &a.out, &mut rec)?;
    let manifest = rec.finish("pipeline", argv, serde_json::to_value(&cfg)?, &a.out)?;
    write_manifest(&manifest, &a.out.join("manifest.json"))?;
    Ok(manifest)
}

const PATH_FLAGS: [&str; 4] = ["--in", "--truth", "--psf", "--out"];

/// Re-targets `--out` and anchors relative input paths at `cwd`.
fn rewrite_argv(argv: &[String], cwd: &Path, new_out: &Path) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut pending: Option<&str> = None;
    let fix = |flag: &str, value: &str| -> String {
        if flag == "--out" {
            new_out.display().to_string()
        } else {
            cwd.join(value).display().to_string()
        }
    };
    for arg in argv {
        if let Some(flag) = pending.take() {
            out.push(fix(flag, arg));
            continue;
        }
        if let Some(flag) = PATH_FLAGS.iter().find(|f| *f == arg) {
            pending = Some(flag);
            out.push(arg.clone());
        } else if let Some((flag, value)) = arg.split_once('=').filter(|(f, _)| PATH_FLAGS.contains(f)) {
            out.push(format!("{flag}={}", fix(flag, value)));
        } else {
            out.push(arg.clone());
        }
    }
    out
}

fn original_out(argv: &[String]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--out=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn replay(a: &ReplayArgs) -> CliResult<RunManifest> {
    let recorded = read_manifest(&a.manifest)?;
    if recorded.tool != TOOL || recorded.version != VERSION {
        return invalid(format!(
            "manifest was written by {} {}, this is {TOOL} {VERSION}",
            recorded.tool, recorded.version
        ));
    }
    if recorded.command == "replay" {
        return invalid("cannot replay a replay");
    }
    for (path, digest) in &recorded.inputs {
        if &sha256_file(Path::new(path))? != digest {
            return invalid(format!("input {path} changed since the recorded run"));
        }
    }
    let new_out = if recorded.command == "pipeline" {
        absolute(&a.out)?
    } else {
        let Some(name) = original_out(&recorded.argv).and_then(|p| p.file_name().map(PathBuf::from)) else {
            return invalid("manifest argv has no --out");
        };
        std::fs::create_dir_all(&a.out)?;
        absolute(&a.out)?.join(name)
    };
    let argv = rewrite_argv(&recorded.argv, &recorded.cwd, &new_out);
    let cli = Cli::try_parse_from(std::iter::once(TOOL.to_string()).chain(argv.iter().cloned()))
        .map_err(|e| CliError::Invalid(format!("recorded argv no longer parses: {e}")))?;
    let rerun = execute(&cli.command, &argv)?;
    let mut bad = digest_mismatches(&recorded, &rerun);
    if rerun.config != recorded.config {
        bad.push("resolved configuration differs".into());
    }
    if !bad.is_empty() {
        return Err(CliError::Mismatch(bad));
    }
    println!("replay: {} outputs reproduced", rerun.outputs.len());
    Ok(rerun)
}

/// Runs a parsed command. `argv` excludes the program name.
pub fn execute(command: &Command, argv: &[String]) -> CliResult<RunManifest> {
    match command {
        Command::Simulate(a) => simulate(a, argv),
        Command::Psf(a) => psf(a, argv),
        Command::Convolve(a) => convolve(a, argv),
        Command::Noise(a) => noise(a, argv),
        Command::Deconvolve(a) => deconvolve(a, argv),
        Command::Lifetime(a) => lifetime(a, argv),
        Command::Profile(a) => profile(a, argv),
        Command::Metrics(a) => metrics(a, argv),
        Command::Pipeline(a) => pipeline(a, argv),
        Command::Replay(a) => replay(a),
    }
}

pub(crate) fn to_strings<I, T>(args: I) -> Vec<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    args.into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect()
}
