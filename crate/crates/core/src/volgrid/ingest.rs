use std::cmp::Ordering;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{VolCubeSeries, VolGridError};

const HEADER: [&str; 5] = ["date", "expiry_years", "tenor_years", "moneyness", "vol"];

struct Row {
    line: u64,
    date: NaiveDate,
    expiry: f64,
    tenor: f64,
    moneyness: f64,
    vol: f64,
    forward: Option<f64>,
}

/// Reads a cube from a CSV file; see [`read_cube_csv`] for the format.
pub fn load_cube_csv(path: impl AsRef<Path>) -> Result<VolCubeSeries, VolGridError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| VolGridError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_cube_csv(io::BufReader::new(file))
}

/// Parses `date,expiry_years,tenor_years,moneyness,vol[,forward]` rows.
///
/// Grids are the sorted union of the observed coordinates and every
/// (date, moneyness, expiry, tenor) combination must be present exactly once.
/// Errors carry the 1-based line number of the offending row.
pub fn read_cube_csv<R: Read>(reader: R) -> Result<VolCubeSeries, VolGridError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| VolGridError::UnparseableRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let with_forward = match names.len() {
        5 => false,
        6 if names[5] == "forward" => true,
        _ => {
            return Err(VolGridError::BadHeader {
                found: names.join(","),
            })
        }
    };
    if names[..5] != HEADER {
        return Err(VolGridError::BadHeader {
            found: names.join(","),
        });
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| VolGridError::UnparseableRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |reason: String| VolGridError::UnparseableRow { line, reason };
        let num = |i: usize, name: &str| -> Result<f64, VolGridError> {
            let field = record.get(i).unwrap_or("");
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("{name} {field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("{name} {field:?} is not finite")));
            }
            // fold -0.0 into 0.0 so it lands on the same node
            Ok(v + 0.0)
        };
        let date_field = record.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_field, "%Y-%m-%d")
            .map_err(|_| bad(format!("date {date_field:?} is not ISO-8601 (YYYY-MM-DD)")))?;
        let expiry = num(1, "expiry_years")?;
        let tenor = num(2, "tenor_years")?;
        let moneyness = num(3, "moneyness")?;
        let vol_field = record.get(4).unwrap_or("");
        let vol: f64 = vol_field
            .parse()
            .map_err(|_| bad(format!("vol {vol_field:?} is not a number")))?;
        if !(vol > 0.0 && vol.is_finite()) {
            return Err(VolGridError::NonPositiveVol { line, vol });
        }
        let forward = if with_forward {
            Some(num(5, "forward")?)
        } else {
            None
        };
        rows.push(Row {
            line,
            date,
            expiry,
            tenor,
            moneyness,
            vol,
            forward,
        });
    }
    if rows.is_empty() {
        return Err(VolGridError::Empty);
    }

    let mut dates: Vec<NaiveDate> = rows.iter().map(|r| r.date).collect();
    dates.sort_unstable();
    dates.dedup();
    let moneyness = sorted_unique(rows.iter().map(|r| r.moneyness));
    let expiries = sorted_unique(rows.iter().map(|r| r.expiry));
    let tenors = sorted_unique(rows.iter().map(|r| r.tenor));
    let (nd, nm, ne, nt) = (dates.len(), moneyness.len(), expiries.len(), tenors.len());

    let mut cells: Vec<Option<(f64, u64)>> = vec![None; nd * nm * ne * nt];
    let mut fwd_cells: Vec<Option<f64>> = vec![None; nd * ne * nt];
    for r in &rows {
        let d = dates.binary_search(&r.date).expect("date collected above");
        let m = find(&moneyness, r.moneyness);
        let e = find(&expiries, r.expiry);
        let t = find(&tenors, r.tenor);
        let idx = ((d * nm + m) * ne + e) * nt + t;
        if let Some((_, first_line)) = cells[idx] {
            return Err(VolGridError::DuplicateRow {
                line: r.line,
                first_line,
            });
        }
        cells[idx] = Some((r.vol, r.line));
        if let Some(f) = r.forward {
            let fidx = (d * ne + e) * nt + t;
            match fwd_cells[fidx] {
                Some(expected) if expected != f => {
                    return Err(VolGridError::ForwardMismatch {
                        line: r.line,
                        found: f,
                        expected,
                    })
                }
                _ => fwd_cells[fidx] = Some(f),
            }
        }
    }

    let mut vols = Vec::with_capacity(cells.len());
    for (idx, cell) in cells.iter().enumerate() {
        match cell {
            Some((v, _)) => vols.push(*v),
            None => {
                let t = idx % nt;
                let e = (idx / nt) % ne;
                let m = (idx / (nt * ne)) % nm;
                let d = idx / (nt * ne * nm);
                return Err(VolGridError::MissingCell {
                    date: dates[d],
                    moneyness: moneyness[m],
                    expiry: expiries[e],
                    tenor: tenors[t],
                });
            }
        }
    }
    // every vol cell is present, so every forward cell was written too
    let forwards = with_forward.then(|| fwd_cells.into_iter().map(|f| f.unwrap_or(0.0)).collect());
    VolCubeSeries::new(dates, moneyness, expiries, tenors, vols, forwards)
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn find(grid: &[f64], x: f64) -> usize {
    grid.binary_search_by(|g| g.partial_cmp(&x).unwrap_or(Ordering::Less))
        .expect("coordinate collected above")
}

/// Writes the cube in the format [`read_cube_csv`] accepts.
///
/// Rows are ordered by date, expiry, tenor, moneyness. Floats use the
/// shortest representation that parses back to the same bits.
pub fn write_cube_csv<W: Write>(cube: &VolCubeSeries, mut out: W) -> io::Result<()> {
    let with_forward = cube.has_forwards();
    let mut header = HEADER.join(",");
    if with_forward {
        header.push_str(",forward");
    }
    writeln!(out, "{header}")?;
    let (nd, nm, ne, nt) = cube.shape();
    for d in 0..nd {
        let date = cube.dates()[d].format("%Y-%m-%d");
        for e in 0..ne {
            for t in 0..nt {
                let fwd = cube.forward(d, e, t);
                for m in 0..nm {
                    write!(
                        out,
                        "{date},{},{},{},{}",
                        cube.expiry_grid()[e],
                        cube.tenor_grid()[t],
                        cube.moneyness_grid()[m],
                        cube.vol(d, m, e, t)
                    )?;
                    match fwd {
                        Some(f) => writeln!(out, ",{f}")?,
                        None => writeln!(out)?,
                    }
                }
            }
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIX_ROWS: &str = "\
date,expiry_years,tenor_years,moneyness,vol
2020-01-02,10,10,-0.01,0.0070
2020-01-02,10,10,0,0.0065
2020-01-02,10,10,0.01,0.0068
2020-01-03,10,10,-0.01,0.0071
2020-01-03,10,10,0,0.0066
2020-01-03,10,10,0.01,0.0069
";

    #[test]
    fn dense_ingestion() {
        let cube = read_cube_csv(SIX_ROWS.as_bytes()).unwrap();
        assert_eq!(cube.shape(), (2, 3, 1, 1));
        assert_eq!(cube.moneyness_grid(), &[-0.01, 0.0, 0.01]);
        assert_eq!(cube.vol(1, 2, 0, 0), 0.0069);
        assert!(!cube.has_forwards());
    }

    #[test]
    fn rows_in_any_order() {
        let mut lines: Vec<&str> = SIX_ROWS.lines().collect();
        lines[1..].reverse();
        let cube = read_cube_csv(lines.join("\n").as_bytes()).unwrap();
        assert_eq!(cube, read_cube_csv(SIX_ROWS.as_bytes()).unwrap());
    }

    #[test]
    fn missing_cell_is_named() {
        let text: Vec<&str> = SIX_ROWS.lines().filter(|l| !l.starts_with("2020-01-03,10,10,0,")).collect();
        let err = read_cube_csv(text.join("\n").as_bytes()).unwrap_err();
        match err {
            VolGridError::MissingCell { date, moneyness, .. } => {
                assert_eq!(date, NaiveDate::from_ymd_opt(2020, 1, 3).unwrap());
                assert_eq!(moneyness, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_vol_reports_line() {
        let text = SIX_ROWS.replace("2020-01-02,10,10,0.01,0.0068", "2020-01-02,10,10,0.01,-0.001");
        let err = read_cube_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, VolGridError::NonPositiveVol { line: 4, vol } if vol == -0.001));
    }

    #[test]
    fn duplicate_and_garbage_rows() {
        let text = format!("{SIX_ROWS}2020-01-02,10,10,0,0.0066\n");
        assert!(matches!(
            read_cube_csv(text.as_bytes()),
            Err(VolGridError::DuplicateRow { line: 8, first_line: 3 })
        ));
        let text = SIX_ROWS.replace("2020-01-03,10,10,0,", "2020-01-03,ten,10,0,");
        assert!(matches!(
            read_cube_csv(text.as_bytes()),
            Err(VolGridError::UnparseableRow { line: 6, .. })
        ));
        let text = SIX_ROWS.replace("2020-01-03,10,10,0,", "03/01/2020,10,10,0,");
        assert!(matches!(
            read_cube_csv(text.as_bytes()),
            Err(VolGridError::UnparseableRow { line: 6, .. })
        ));
    }

    #[test]
    fn header_is_mandatory() {
        let body: String = SIX_ROWS.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            read_cube_csv(body.as_bytes()),
            Err(VolGridError::BadHeader { .. })
        ));
    }

    #[test]
    fn forwards_round_trip() {
        let text = "\
date,expiry_years,tenor_years,moneyness,vol,forward
2020-01-02,1,10,-0.005,0.0070,0.021
2020-01-02,1,10,0.005,0.0065,0.021
2020-01-03,1,10,-0.005,0.0071,-0.001
2020-01-03,1,10,0.005,0.0066,-0.001
";
        let cube = read_cube_csv(text.as_bytes()).unwrap();
        assert_eq!(cube.forward(1, 0, 0), Some(-0.001));
        let mut buf = Vec::new();
        write_cube_csv(&cube, &mut buf).unwrap();
        assert_eq!(read_cube_csv(buf.as_slice()).unwrap(), cube);

        let bad = text.replace("0.0065,0.021", "0.0065,0.022");
        assert!(matches!(
            read_cube_csv(bad.as_bytes()),
            Err(VolGridError::ForwardMismatch { line: 3, .. })
        ));
    }
}
