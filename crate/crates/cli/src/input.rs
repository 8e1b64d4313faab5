//! Loading curves and plans, and writing output documents.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use reconfig_core::bermodel::{read_curves, BerCurve, DensityRange, SchemeId};
use reconfig_core::curvefit::{fit_polynomial, read_samples_csv};
use reconfig_core::fixtures;
use reconfig_core::offline::Plan;

use crate::{CurveArgs, RangeArgs};

pub fn builtin(name: &str) -> Result<Vec<BerCurve>> {
    fixtures::builtin(name)
        .ok_or_else(|| anyhow!("unknown fixture `{name}` (known: {})", fixtures::NAMES.join(", ")))
}

/// Parses `SCHEME=PATH`.
fn data_entry(raw: &str) -> Result<(SchemeId, PathBuf)> {
    let (scheme, path) = raw
        .split_once('=')
        .ok_or_else(|| anyhow!("--data expects SCHEME=PATH, got `{raw}`"))?;
    Ok((scheme.parse()?, PathBuf::from(path)))
}

/// Curves from whichever source was given, ordered OP, SP, OT, ST.
/// `None` when no source was given.
pub fn curves(args: &CurveArgs) -> Result<Option<Vec<BerCurve>>> {
    let mut curves = if let Some(name) = &args.fixture {
        builtin(name)?
    } else if let Some(path) = &args.curves {
        read_curves(path)?
    } else if !args.data.is_empty() {
        let mut out = Vec::new();
        for raw in &args.data {
            let (scheme, path) = data_entry(raw)?;
            let samples = read_samples_csv(&path)?;
            let report = fit_polynomial(&samples, args.degree)
                .with_context(|| format!("fitting {}", path.display()))?;
            let lo = samples.iter().map(|s| s.density).fold(f64::INFINITY, f64::min);
            let hi = samples.iter().map(|s| s.density).fold(f64::NEG_INFINITY, f64::max);
            out.push(BerCurve::new(scheme, report.coefficients, (lo, hi))?);
        }
        out
    } else {
        return Ok(None);
    };
    curves.sort_by_key(|c| c.scheme);
    Ok(Some(curves))
}

pub fn required_curves(args: &CurveArgs) -> Result<Vec<BerCurve>> {
    curves(args)?.ok_or_else(|| anyhow!("no curves given: use --fixture, --curves or --data"))
}

pub fn range(args: &RangeArgs) -> Result<DensityRange> {
    if !(args.threshold > 0.0 && args.threshold.is_finite()) {
        bail!("--threshold must be positive, got {}", args.threshold);
    }
    Ok(DensityRange::new(args.d0, args.d1)?)
}

/// Built-in name or curve document path.
pub fn named_or_file(spec: &str) -> Result<Vec<BerCurve>> {
    if fixtures::NAMES.contains(&spec) {
        return builtin(spec);
    }
    let path = Path::new(spec);
    if !path.exists() {
        bail!("`{spec}` is neither a built-in curve set nor an existing file");
    }
    Ok(read_curves(path)?)
}

#[derive(Deserialize)]
struct PlanOnly {
    plan: Plan,
}

/// The `[plan]` table of a document written by `solve` or `online`.
pub fn read_plan(path: &Path) -> Result<Plan> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: PlanOnly = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(doc.plan)
}

/// Writes `body` to `dir/name`, or to stdout when no directory was given.
pub fn emit(dir: Option<&Path>, name: &str, body: &str) -> Result<()> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

/// Rounds to 15 significant digits for reports.
pub fn sig15(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.14e}").parse().expect("formatted float parses")
}
