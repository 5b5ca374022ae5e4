//! CSV serialization of invariant records: 17 significant digits (lossless
//! for 64-bit floats), LF line endings, empty cells for quantities the run
//! does not define, rows ordered by time.

use std::path::Path;

use crate::invariants::InvariantRecord;

use super::IoError;

pub const TIMESERIES_HEADER: &str = "t,sphere_violation,dirichlet_energy,q_value,\
h2_identity_residual,h1,h2,h3,boundary_flux_max,eps_dissipation_rate";

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

pub fn timeseries_to_string(records: &[InvariantRecord]) -> String {
    let mut rows: Vec<&InvariantRecord> = records.iter().collect();
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            fmt(r.t),
            fmt(r.sphere_violation),
            fmt(r.dirichlet_energy),
            fmt_opt(r.q_value),
            fmt_opt(r.h2_identity_residual),
            fmt(r.sobolev[0]),
            fmt(r.sobolev[1]),
            fmt(r.sobolev[2]),
            fmt(r.boundary_flux_max),
            fmt_opt(r.eps_dissipation_rate),
        ));
    }
    out
}

pub fn write_timeseries(path: &Path, records: &[InvariantRecord]) -> Result<(), IoError> {
    std::fs::write(path, timeseries_to_string(records)).map_err(|e| IoError::file(path, e))
}

pub fn parse_timeseries(text: &str) -> Result<Vec<InvariantRecord>, IoError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == TIMESERIES_HEADER => {}
        other => {
            return Err(IoError::Format(format!(
                "bad time-series header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 10 {
            return Err(IoError::Format(format!(
                "row {}: expected 10 cells, got {}",
                i + 2,
                cells.len()
            )));
        }
        let req = |j: usize| -> Result<f64, IoError> {
            cells[j]
                .parse::<f64>()
                .map_err(|e| IoError::Format(format!("row {}, cell {}: {e}", i + 2, j + 1)))
        };
        let opt = |j: usize| -> Result<Option<f64>, IoError> {
            if cells[j].is_empty() {
                Ok(None)
            } else {
                req(j).map(Some)
            }
        };
        records.push(InvariantRecord {
            t: req(0)?,
            sphere_violation: req(1)?,
            dirichlet_energy: req(2)?,
            q_value: opt(3)?,
            h2_identity_residual: opt(4)?,
            sobolev: [req(5)?, req(6)?, req(7)?],
            boundary_flux_max: req(8)?,
            eps_dissipation_rate: opt(9)?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64) -> InvariantRecord {
        InvariantRecord {
            t,
            sphere_violation: 1.25e-13,
            dirichlet_energy: 1.2337005501361697,
            q_value: Some(11.605),
            h2_identity_residual: None,
            sobolev: [1.1107207345395915, 11.0, 108.3],
            boundary_flux_max: 0.0,
            eps_dissipation_rate: None,
        }
    }

    #[test]
    fn empty_record_list_gives_header_only() {
        let text = timeseries_to_string(&[]);
        assert_eq!(text, format!("{TIMESERIES_HEADER}\n"));
        assert!(parse_timeseries(&text).unwrap().is_empty());
    }

    #[test]
    fn constant_field_row_has_zeros_and_empties() {
        let r = InvariantRecord {
            t: 0.0,
            sphere_violation: 0.0,
            dirichlet_energy: 0.0,
            q_value: Some(0.0),
            h2_identity_residual: Some(0.0),
            sobolev: [0.0, 0.0, 0.0],
            boundary_flux_max: 0.0,
            eps_dissipation_rate: None,
        };
        let text = timeseries_to_string(&[r]);
        let row = text.lines().nth(1).unwrap();
        assert!(row.ends_with(',')); // trailing empty cell
        assert!(!text.contains('\r'));
    }

    #[test]
    fn reserialization_is_byte_identical() {
        let records = vec![sample(0.0), sample(0.5), sample(0.25)];
        let text = timeseries_to_string(&records);
        let parsed = parse_timeseries(&text).unwrap();
        // Rows come back ordered by t.
        assert_eq!(parsed[1].t, 0.25);
        let text2 = timeseries_to_string(&parsed);
        assert_eq!(text, text2);
    }

    #[test]
    fn seventeen_digit_cells_round_trip_exactly() {
        let mut r = sample(0.1);
        r.dirichlet_energy = std::f64::consts::PI * 1e-7;
        r.q_value = Some(f64::MIN_POSITIVE);
        let parsed = parse_timeseries(&timeseries_to_string(&[r.clone()])).unwrap();
        assert_eq!(parsed[0], r);
    }

    #[test]
    fn malformed_rows_are_reported() {
        assert!(parse_timeseries("nope\n").is_err());
        let text = format!("{TIMESERIES_HEADER}\n1.0,2.0\n");
        assert!(parse_timeseries(&text).is_err());
    }
}
