//! Gnuplot scripts of ratio against standardized separation, one per
//! theorem. The data are inlined so each script runs on its own.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::run::CSV_COLUMNS;

#[derive(Debug, Default)]
pub struct PlotOutput {
    pub scripts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Level the ratio approaches along a schedule.
fn asymptote(theorem: &str) -> f64 {
    if theorem == "T2" {
        -0.5
    } else {
        1.0
    }
}

pub fn emit_plots(results_path: &Path) -> Result<PlotOutput> {
    let mut rd = csv::Reader::from_path(results_path).with_context(|| format!("reading {}", results_path.display()))?;
    let header = rd.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let missing: Vec<&str> =
        ["theorem", "x", "ratio", "se_combined"].into_iter().filter(|c| col(c).is_none()).collect();
    if !missing.is_empty() {
        bail!("results schema error: missing column(s) {}", missing.join(", "));
    }
    let (ct, cx, cr, cs) =
        (col("theorem").unwrap(), col("x").unwrap(), col("ratio").unwrap(), col("se_combined").unwrap());

    let mut series: BTreeMap<String, Vec<(String, String, String)>> = BTreeMap::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("NA").to_string();
        if field(cr) == "NA" || field(cx) == "NA" {
            continue;
        }
        let se = if field(cs) == "NA" { "0".to_string() } else { field(cs) };
        series.entry(field(ct)).or_default().push((field(cx), field(cr), se));
    }

    let mut out = PlotOutput::default();
    if series.is_empty() {
        out.warnings.push(format!("{}: no rows with a ratio, no plot scripts written", results_path.display()));
        return Ok(out);
    }
    let dir = results_path.parent().unwrap_or(Path::new("."));
    let stem = results_path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    for (theorem, points) in &series {
        let mut s = String::new();
        let _ = writeln!(s, "# {theorem}: ratio against x = u_eps*sqrt(I)/eps");
        let _ = writeln!(s, "# columns of {}: {}", stem, CSV_COLUMNS.join(","));
        let _ = writeln!(s, "set terminal pngcairo size 800,560");
        let _ = writeln!(s, "set output '{stem}_{theorem}.png'");
        let _ = writeln!(s, "set title '{theorem}'");
        let _ = writeln!(s, "set xlabel 'x'");
        let _ = writeln!(s, "set ylabel 'ratio'");
        let _ = writeln!(s, "set key top right");
        let _ = writeln!(s, "$data << EOD");
        for (x, r, se) in points {
            let _ = writeln!(s, "{x} {r} {se}");
        }
        let _ = writeln!(s, "EOD");
        let _ = writeln!(
            s,
            "plot $data using 1:2:(3*$3) with yerrorlines title 'ratio (3 SE)', {} with lines dashtype 2 title 'asymptote'",
            asymptote(theorem)
        );
        let path = dir.join(format!("{stem}_{theorem}.gp"));
        fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        out.scripts.push(path);
    }
    Ok(out)
}
