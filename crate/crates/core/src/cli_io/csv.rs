use std::io::Write;
use std::path::Path;

use crate::diagnostics::NormReport;
use crate::error::Result;

pub const CSV_HEADER: &str = "time,l1_xv,linfM_xv,linfx_l2v_alpha,l2x_l1v_w,mass,px,py,pz,energy,momentN,min_value,boundary_mass_lost";

/// 17 significant digits, enough to round-trip any f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_report_row(r: &NormReport) -> String {
    [
        r.time,
        r.l1_xv,
        r.linf_m_xv,
        r.linfx_l2v_alpha,
        r.l2x_l1v_w,
        r.mass,
        r.momentum[0],
        r.momentum[1],
        r.momentum[2],
        r.energy,
        r.moment_n,
        r.min_value,
        r.boundary_mass_lost,
    ]
    .iter()
    .map(|x| format_f64(*x))
    .collect::<Vec<_>>()
    .join(",")
}

pub fn write_reports(path: &Path, reports: &[NormReport]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", format_report_row(r))?;
    }
    out.flush()?;
    Ok(())
}
