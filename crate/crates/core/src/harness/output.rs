//! CSV and snapshot files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{KsfError, Result};
use crate::snapshot;
use crate::solver::Trajectory;

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn diagnostics_header() -> String {
    DiagnosticsRecord::COLUMNS.join(",")
}

/// Diagnostics table as CSV text.
pub fn records_to_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = diagnostics_header();
    out.push('\n');
    for r in records {
        let row: Vec<String> = r.as_array().iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses text produced by [`records_to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != diagnostics_header() {
        return Err(KsfError::InsufficientData(format!("unexpected CSV header `{header}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != DiagnosticsRecord::COLUMNS.len() {
                return Err(KsfError::InsufficientData(format!("row {} has {} cells", i + 1, cells.len())));
            }
            let mut a = [0.0; 13];
            for (slot, cell) in a.iter_mut().zip(&cells) {
                *slot = cell
                    .parse()
                    .map_err(|_| KsfError::InsufficientData(format!("row {}: bad number `{cell}`", i + 1)))?;
            }
            Ok(DiagnosticsRecord::from_array(a))
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| KsfError::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| KsfError::io(path, e))
}

/// Writes the per-step diagnostics of a run.
pub fn emit_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    write_text(path, &records_to_csv(records))
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| KsfError::io(path, e))?;
    records_from_csv(&text)
}

/// `diagnostics.csv`, `snapshots/{u,v}_NNNN.ksf` and `{u,v}_final.ksf` under `dir`.
pub fn write_trajectory(dir: &Path, trajectory: &Trajectory) -> Result<()> {
    emit_csv(&trajectory.records, &dir.join("diagnostics.csv"))?;
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps).map_err(|e| KsfError::io(&snaps, e))?;
    for (k, s) in trajectory.snapshots.iter().enumerate() {
        snapshot::write(&snaps.join(format!("u_{k:04}.ksf")), &s.u)?;
        snapshot::write(&snaps.join(format!("v_{k:04}.ksf")), &s.v)?;
    }
    snapshot::write(&dir.join("u_final.ksf"), &trajectory.final_state.u)?;
    snapshot::write(&dir.join("v_final.ksf"), &trajectory.final_state.v)?;
    let mut times = String::from("index,t\n");
    for (k, s) in trajectory.snapshots.iter().enumerate() {
        let _ = writeln!(times, "{k},{}", fmt_f64(s.t));
    }
    write_text(&snaps.join("times.csv"), &times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_exact() {
        assert_eq!(
            diagnostics_header(),
            "t,mass_u,v_l1,v_l1_exact,u_linf,u_l2,v_w1theta,energy_w,dissipation,energy_residual,fv_integral,ulogu_l1,vt_l2_accum"
        );
        assert_eq!(records_to_csv(&[]), format!("{}\n", diagnostics_header()));
    }

    #[test]
    fn formatting_is_compact() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1.5), "1.5");
        assert_eq!(fmt_f64(1e-300), "1e-300");
        assert_eq!(fmt_f64(-2.5e20), "-2.5e20");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    proptest! {
        #[test]
        fn floats_round_trip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            let y: f64 = fmt_f64(x).parse().unwrap();
            prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
        }
    }
}
