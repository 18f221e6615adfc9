//! The end-to-end simulation: phantom, blur, optional noise averaging,
//! deconvolution, lifetime extraction and scoring.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use flimdeconv::deconv::{ConvergenceTrace, DeconvConfig, Deconvolver};
use flimdeconv::field::{FieldAccumulator, LifetimeAccumulator};
use flimdeconv::io::{format_sig9, write_field, write_lifetime_outputs, FieldData};
use flimdeconv::metrics::{
    boundary_from_threshold, central_mask, extract_profile, lifetime_rmse, BoundaryEstimate, TrueBoundary,
};
use flimdeconv::phantom::{make_phantom, noisy_realization, NoiseSpec, PhantomSpec};
use flimdeconv::{convolve_field, ComplexField, Error, Kernel, LifetimeMap};

use crate::args::AvgOrder;
use crate::config::PsfSource;
use crate::error::CliResult;
use crate::manifest::Recorder;

/// Fully resolved pipeline settings, as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preset: Option<String>,
    pub phantom: PhantomSpec,
    pub psf: PsfSource,
    pub deconv: DeconvConfig,
    /// `None` runs the noiseless model once.
    pub noise: Option<NoiseSpec>,
    pub avg_order: AvgOrder,
    /// Noisy fields are clamped at zero before deconvolution.
    pub clamp_before_deconv: bool,
    pub row: usize,
    pub threshold_ns: f64,
    pub magnitude_floor: f64,
    pub central_fraction: f64,
}

/// Scores of one lifetime estimate against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchMetrics {
    pub boundary: Option<BoundaryEstimate>,
    /// Why `boundary` is missing (no or several crossings on the row).
    pub boundary_error: Option<String>,
    pub rmse_central_ns: Option<f64>,
    pub rmse_all_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMetrics {
    pub threshold_ns: f64,
    pub row: usize,
    pub central_fraction: f64,
    pub realizations: usize,
    pub true_boundary: TrueBoundary,
    pub convolved: BranchMetrics,
    pub deconvolved: BranchMetrics,
}

pub fn score(
    estimate: &LifetimeMap,
    truth: &LifetimeMap,
    true_boundary: &TrueBoundary,
    row: usize,
    threshold_ns: f64,
    central_fraction: f64,
) -> CliResult<BranchMetrics> {
    let profile = extract_profile(estimate, row)?;
    let (boundary, boundary_error) = match boundary_from_threshold(&profile, threshold_ns, true_boundary) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mask = central_mask(truth.width(), truth.height(), central_fraction);
    Ok(BranchMetrics {
        boundary,
        boundary_error,
        rmse_central_ns: lifetime_rmse(estimate, truth, Some(&mask)).ok(),
        rmse_all_ns: lifetime_rmse(estimate, truth, None).ok(),
    })
}

pub fn trace_csv(traces: &[ConvergenceTrace; 2]) -> String {
    let mut s = String::from("iteration,residual_re,max_rel_change_re,residual_im,max_rel_change_im\n");
    for k in 0..traces[0].len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            k + 1,
            format_sig9(traces[0].residual[k]),
            format_sig9(traces[0].max_rel_change[k]),
            format_sig9(traces[1].residual[k]),
            format_sig9(traces[1].max_rel_change[k]),
        );
    }
    s
}

struct Estimates {
    convolved: ComplexField,
    deconvolved: ComplexField,
    convolved_map: LifetimeMap,
    deconvolved_map: LifetimeMap,
    /// Traces of the noiseless run, or of realization 0.
    traces: [ConvergenceTrace; 2],
}

fn deconvolve(d: &Deconvolver, field: &ComplexField) -> flimdeconv::Result<(ComplexField, [ConvergenceTrace; 2])> {
    let (re, t_re) = d.run(field.re())?;
    let (im, t_im) = d.run(field.im())?;
    Ok((field.with_planes(re, im)?, [t_re, t_im]))
}

fn estimate(cfg: &PipelineConfig, kernel: &Kernel, ideal: &ComplexField) -> flimdeconv::Result<Estimates> {
    let floor = cfg.magnitude_floor;
    let blurred = convolve_field(ideal, kernel, cfg.deconv.boundary, cfg.deconv.engine)?;
    let d = Deconvolver::new(kernel, ideal.width(), ideal.height(), cfg.deconv)?;
    let Some(noise) = cfg.noise else {
        let (deconvolved, traces) = deconvolve(&d, &blurred)?;
        return Ok(Estimates {
            convolved_map: LifetimeMap::from_field(&blurred, floor),
            deconvolved_map: LifetimeMap::from_field(&deconvolved, floor),
            convolved: blurred,
            deconvolved,
            traces,
        });
    };
    let mut conv_acc = FieldAccumulator::default();
    let mut dec_acc = FieldAccumulator::default();
    let mut conv_maps = LifetimeAccumulator::default();
    let mut dec_maps = LifetimeAccumulator::default();
    let mut first_traces = None;
    for index in 0..noise.realizations {
        let wrap = |e: Error| Error::Realization {
            index,
            source: Box::new(e),
        };
        let noisy = noisy_realization(&blurred, &noise, index).map_err(wrap)?;
        let input = if cfg.clamp_before_deconv {
            noisy.clamp_non_negative()
        } else {
            noisy.clone()
        };
        let (dec, traces) = deconvolve(&d, &input).map_err(wrap)?;
        first_traces.get_or_insert(traces);
        if cfg.avg_order == AvgOrder::Lifetime {
            conv_maps.add(&LifetimeMap::from_field(&noisy, floor)).map_err(wrap)?;
            dec_maps.add(&LifetimeMap::from_field(&dec, floor)).map_err(wrap)?;
        }
        conv_acc.add(&noisy).map_err(wrap)?;
        dec_acc.add(&dec).map_err(wrap)?;
    }
    let convolved = conv_acc.mean()?;
    let deconvolved = dec_acc.mean()?;
    let (convolved_map, deconvolved_map) = match cfg.avg_order {
        AvgOrder::Field => (
            LifetimeMap::from_field(&convolved, floor),
            LifetimeMap::from_field(&deconvolved, floor),
        ),
        AvgOrder::Lifetime => (conv_maps.mean()?, dec_maps.mean()?),
    };
    Ok(Estimates {
        convolved,
        deconvolved,
        convolved_map,
        deconvolved_map,
        traces: first_traces.expect("at least one realization"),
    })
}

/// Runs the pipeline and writes every artifact into `out_dir`.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    kernel: &Kernel,
    out_dir: &Path,
    rec: &mut Recorder,
) -> CliResult<PipelineMetrics> {
    std::fs::create_dir_all(out_dir)?;
    if let Some(n) = &cfg.noise {
        rec.seed(n.seed);
    }
    let (ideal, truth) = make_phantom(&cfg.phantom)?;
    let est = estimate(cfg, kernel, &ideal)?;

    let mut save_field = |name: &str, f: &ComplexField| -> CliResult<()> {
        let p = out_dir.join(name);
        write_field(&p, &FieldData::Complex(f.clone()))?;
        rec.output(&p);
        Ok(())
    };
    save_field("ideal.flimcf", &ideal)?;
    save_field("convolved.flimcf", &est.convolved)?;
    save_field("deconvolved.flimcf", &est.deconvolved)?;

    for (name, map) in [
        ("truth_lifetime", &truth),
        ("convolved_lifetime", &est.convolved_map),
        ("deconvolved_lifetime", &est.deconvolved_map),
    ] {
        let outputs = write_lifetime_outputs(map, &out_dir.join(name), Some(cfg.row))?;
        for p in outputs.paths() {
            rec.output(p);
        }
    }

    let trace_path = out_dir.join("trace.csv");
    flimdeconv::io::atomic_write(&trace_path, trace_csv(&est.traces).as_bytes())?;
    rec.output(&trace_path);

    let true_boundary = TrueBoundary::of_phantom(&cfg.phantom);
    let branch = |map: &LifetimeMap| {
        score(
            map,
            &truth,
            &true_boundary,
            cfg.row,
            cfg.threshold_ns,
            cfg.central_fraction,
        )
    };
    let metrics = PipelineMetrics {
        threshold_ns: cfg.threshold_ns,
        row: cfg.row,
        central_fraction: cfg.central_fraction,
        realizations: cfg.noise.map_or(1, |n| n.realizations),
        true_boundary,
        convolved: branch(&est.convolved_map)?,
        deconvolved: branch(&est.deconvolved_map)?,
    };
    let metrics_path = out_dir.join("metrics.json");
    let mut json = serde_json::to_string_pretty(&metrics)?;
    json.push('\n');
    flimdeconv::io::atomic_write(&metrics_path, json.as_bytes())?;
    rec.output(&metrics_path);
    Ok(metrics)
}
