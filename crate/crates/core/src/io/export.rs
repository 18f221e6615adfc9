//! Lifetime map exports: CSV tables and 16-bit PGM previews.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::atomic_write;
use crate::error::Result;
use crate::field::LifetimeMap;
use crate::metrics::{extract_profile, Profile};

/// Formats `v` with 9 significant digits, dropping trailing zeros, in plain
/// decimal for exponents in `[-5, 9)` and scientific notation otherwise.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig9).unwrap_or_default()
}

/// `x_px,y_px,lifetime_ns` rows, undefined lifetimes left blank.
pub fn lifetime_csv(map: &LifetimeMap) -> String {
    let mut s = String::from("x_px,y_px,lifetime_ns\n");
    for y in 0..map.height() {
        for x in 0..map.width() {
            let _ = writeln!(s, "{x},{y},{}", opt(map.get(x, y)));
        }
    }
    s
}

/// `x_px,x_nm,lifetime_ns` rows.
pub fn profile_csv(profile: &Profile) -> String {
    let mut s = String::from("x_px,x_nm,lifetime_ns\n");
    for ((x, nm), v) in profile.x_px.iter().zip(&profile.x_nm).zip(&profile.values) {
        let _ = writeln!(s, "{},{},{}", format_sig9(*x), format_sig9(*nm), opt(*v));
    }
    s
}

/// Binary 16-bit PGM. Defined pixels map linearly from `[min, max]` onto
/// `[0, 65535]`; undefined pixels and flat maps map to 0.
fn lifetime_pgm(map: &LifetimeMap) -> (Vec<u8>, Option<(f64, f64)>) {
    let range = map.range();
    let mut out = format!("P5\n{} {}\n65535\n", map.width(), map.height()).into_bytes();
    for v in map.values() {
        let level: u16 = match (v, range) {
            (Some(v), Some((lo, hi))) if hi > lo => ((v - lo) / (hi - lo) * 65535.0).round().clamp(0.0, 65535.0) as u16,
            _ => 0,
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    (out, range)
}

fn range_sidecar(range: Option<(f64, f64)>) -> String {
    match range {
        Some((lo, hi)) => format!(
            "min_ns={}\nmax_ns={}\nmapping=linear\nflat={}\nundefined_level=0\n",
            format_sig9(lo),
            format_sig9(hi),
            hi <= lo
        ),
        None => "min_ns=\nmax_ns=\nmapping=linear\nflat=true\nundefined_level=0\n".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeOutputs {
    pub csv: PathBuf,
    pub pgm: PathBuf,
    pub sidecar: PathBuf,
    pub profile: Option<PathBuf>,
}

impl LifetimeOutputs {
    pub fn paths(&self) -> Vec<&Path> {
        let mut v = vec![self.csv.as_path(), self.pgm.as_path(), self.sidecar.as_path()];
        v.extend(self.profile.as_deref());
        v
    }
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<base>.csv`, `<base>.pgm`, `<base>.pgm.txt` and, when `row` is
/// given, `<base>_row<row>.csv`.
pub fn write_lifetime_outputs(map: &LifetimeMap, basename: &Path, row: Option<usize>) -> Result<LifetimeOutputs> {
    let profile = row.map(|r| extract_profile(map, r)).transpose()?;
    let csv = with_suffix(basename, ".csv");
    atomic_write(&csv, lifetime_csv(map).as_bytes())?;
    let (pgm_bytes, range) = lifetime_pgm(map);
    let pgm = with_suffix(basename, ".pgm");
    atomic_write(&pgm, &pgm_bytes)?;
    let sidecar = with_suffix(basename, ".pgm.txt");
    atomic_write(&sidecar, range_sidecar(range).as_bytes())?;
    let profile_path = match profile {
        Some(p) => {
            let path = with_suffix(basename, &format!("_row{}.csv", p.row));
            atomic_write(&path, profile_csv(&p).as_bytes())?;
            Some(path)
        }
        None => None,
    };
    Ok(LifetimeOutputs {
        csv,
        pgm,
        sidecar,
        profile: profile_path,
    })
}
