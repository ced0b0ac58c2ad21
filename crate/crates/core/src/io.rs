//! CSV and JSON import/export.
//!
//! Floats are written with 17 significant digits so every value survives a
//! write/read cycle bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::classify::{DatasetRecord, DistanceReport};
use crate::noisegen::{NoiseFamily, NoiseModel, NoiseRealization, NoiseType, TimeGrid};
use crate::pulsegen::ControlField;
use crate::qfs::{QfsPoint, QFS_COLUMNS};
use crate::qsim::EvolutionResult;
use crate::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Csv {
        row,
        column: String::new(),
        message: e.to_string(),
    }
}

/// Reads all records with their line numbers, checking the header.
fn read_table<R: Read>(reader: R, required: &[&str]) -> Result<(Vec<String>, Vec<(usize, csv::StringRecord)>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    for col in required {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Csv {
                row: 1,
                column: col.to_string(),
                message: "missing column".into(),
            });
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec));
    }
    Ok((headers, rows))
}

struct Row<'a> {
    line: usize,
    headers: &'a [String],
    rec: &'a csv::StringRecord,
}

impl Row<'_> {
    fn raw(&self, col: &str) -> Result<&str> {
        let i = self.headers.iter().position(|h| h == col).ok_or_else(|| Error::Csv {
            row: self.line,
            column: col.into(),
            message: "missing column".into(),
        })?;
        self.rec.get(i).ok_or_else(|| Error::Csv {
            row: self.line,
            column: col.into(),
            message: "missing field".into(),
        })
    }

    fn err(&self, col: &str, message: String) -> Error {
        Error::Csv {
            row: self.line,
            column: col.into(),
            message,
        }
    }

    fn f64(&self, col: &str) -> Result<f64> {
        let s = self.raw(col)?;
        s.parse::<f64>().map_err(|_| self.err(col, format!("'{s}' is not a number")))
    }

    fn opt_f64(&self, col: &str) -> Result<Option<f64>> {
        match self.raw(col)? {
            "" => Ok(None),
            _ => self.f64(col).map(Some),
        }
    }

    fn u64(&self, col: &str) -> Result<u64> {
        let s = self.raw(col)?;
        s.parse::<u64>().map_err(|_| self.err(col, format!("'{s}' is not an unsigned integer")))
    }

    fn bool(&self, col: &str) -> Result<bool> {
        let s = self.raw(col)?;
        s.parse::<bool>().map_err(|_| self.err(col, format!("'{s}' is not true/false")))
    }

    fn coords(&self) -> Result<[f64; 9]> {
        let mut c = [0.0; 9];
        for (v, name) in c.iter_mut().zip(QFS_COLUMNS) {
            *v = self.f64(name)?;
        }
        Ok(c)
    }
}

fn for_rows<R: Read, T>(reader: R, required: &[&str], mut f: impl FnMut(&Row) -> Result<T>) -> Result<Vec<T>> {
    let (headers, rows) = read_table(reader, required)?;
    rows.iter()
        .map(|(line, rec)| {
            f(&Row {
                line: *line,
                headers: &headers,
                rec,
            })
        })
        .collect()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

const POINT_LABELS: [&str; 3] = ["noise_label", "pulse_label", "seed"];

pub fn write_qfs_points<W: Write>(w: W, points: &[QfsPoint]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(POINT_LABELS.iter().chain(QFS_COLUMNS.iter()))
        .map_err(csv_err)?;
    for p in points {
        let mut rec = vec![p.noise_label.clone(), p.pulse_label.clone(), p.seed.to_string()];
        rec.extend(p.coords.iter().map(|&v| fmt_f64(v)));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads QFS points; label columns are optional.
pub fn read_qfs_points<R: Read>(r: R) -> Result<Vec<QfsPoint>> {
    for_rows(r, &QFS_COLUMNS, |row| {
        let label = |c: &str| row.raw(c).map(String::from).unwrap_or_default();
        let seed = if row.headers.iter().any(|h| h == "seed") {
            row.u64("seed")?
        } else {
            0
        };
        Ok(QfsPoint {
            coords: row.coords()?,
            noise_label: label("noise_label"),
            pulse_label: label("pulse_label"),
            seed,
        })
    })
}

const DATASET_COLUMNS: [&str; 10] = [
    "noise_type",
    "stationary",
    "exponent",
    "peak_bin",
    "bump_width_bins",
    "bump_height",
    "division_factor",
    "envelope_peak_fraction",
    "scale_factor",
    "seed",
];

pub fn write_dataset<W: Write>(w: W, records: &[DatasetRecord]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(DATASET_COLUMNS.iter().chain(QFS_COLUMNS.iter()))
        .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in records {
        let m = &r.model;
        let (exp, peak, width, height, div) = match m.family {
            NoiseFamily::OneOverF { exponent } => (Some(exponent), None, None, None, None),
            NoiseFamily::OneOverFBump {
                exponent,
                peak_bin,
                bump_width_bins,
                bump_height,
            } => (Some(exponent), Some(peak_bin), Some(bump_width_bins), Some(bump_height), None),
            NoiseFamily::ColoredGaussian { division_factor } => (None, None, None, None, Some(division_factor)),
        };
        let mut rec = vec![
            r.noise_type.as_str().to_string(),
            r.stationary.to_string(),
            opt(exp),
            opt(peak),
            opt(width),
            opt(height),
            opt(div),
            fmt_f64(m.envelope_peak_fraction),
            fmt_f64(m.scale_factor),
            r.point.seed.to_string(),
        ];
        rec.extend(r.point.coords.iter().map(|&v| fmt_f64(v)));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<Vec<DatasetRecord>> {
    let mut required = DATASET_COLUMNS.to_vec();
    required.extend(QFS_COLUMNS);
    for_rows(r, &required, |row| {
        let t = row.raw("noise_type")?;
        let noise_type =
            NoiseType::parse(t).ok_or_else(|| row.err("noise_type", format!("unknown noise type '{t}'")))?;
        let need = |c: &str| row.opt_f64(c)?.ok_or_else(|| row.err(c, "value required".into()));
        let family = match noise_type {
            NoiseType::OneOverF => NoiseFamily::OneOverF {
                exponent: need("exponent")?,
            },
            NoiseType::OneOverFBump => NoiseFamily::OneOverFBump {
                exponent: need("exponent")?,
                peak_bin: need("peak_bin")?,
                bump_width_bins: need("bump_width_bins")?,
                bump_height: need("bump_height")?,
            },
            NoiseType::Colored => NoiseFamily::ColoredGaussian {
                division_factor: need("division_factor")?,
            },
        };
        let stationary = row.bool("stationary")?;
        let model = NoiseModel {
            family,
            stationary,
            envelope_peak_fraction: row.f64("envelope_peak_fraction")?,
            scale_factor: row.f64("scale_factor")?,
        };
        let seed = row.u64("seed")?;
        let point = QfsPoint::new(row.coords()?).with_labels(model.label(), "cpmg-ideal", seed);
        Ok(DatasetRecord {
            point,
            noise_type,
            stationary,
            model,
        })
    })
}

pub fn write_realisation<W: Write>(w: W, grid: &TimeGrid, noise: &NoiseRealization) -> Result<()> {
    if noise.len() != grid.num_steps {
        return Err(Error::LengthMismatch {
            what: "realisation vs grid",
            left: noise.len(),
            right: grid.num_steps,
        });
    }
    let mut out = writer(w);
    out.write_record(["t", "beta_x", "beta_z"]).map_err(csv_err)?;
    for j in 0..noise.len() {
        out.write_record([fmt_f64(grid.t(j)), fmt_f64(noise.beta_x[j]), fmt_f64(noise.beta_z[j])])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `(t, realisation)`.
pub fn read_realisation<R: Read>(r: R) -> Result<(Vec<f64>, NoiseRealization)> {
    let rows = for_rows(r, &["t", "beta_x", "beta_z"], |row| {
        Ok((row.f64("t")?, row.f64("beta_x")?, row.f64("beta_z")?))
    })?;
    let t = rows.iter().map(|r| r.0).collect();
    Ok((
        t,
        NoiseRealization {
            beta_x: rows.iter().map(|r| r.1).collect(),
            beta_z: rows.iter().map(|r| r.2).collect(),
        },
    ))
}

pub fn write_field<W: Write>(w: W, grid: &TimeGrid, field: &ControlField) -> Result<()> {
    if field.len() != grid.num_steps {
        return Err(Error::LengthMismatch {
            what: "control field vs grid",
            left: field.len(),
            right: grid.num_steps,
        });
    }
    let mut out = writer(w);
    out.write_record(["t", "f_x", "f_y", "f_z"]).map_err(csv_err)?;
    for j in 0..field.len() {
        out.write_record([
            fmt_f64(grid.t(j)),
            fmt_f64(field.f_x[j]),
            fmt_f64(field.f_y[j]),
            fmt_f64(field.f_z[j]),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(r: R) -> Result<(Vec<f64>, ControlField)> {
    let rows = for_rows(r, &["t", "f_x", "f_y", "f_z"], |row| {
        Ok([row.f64("t")?, row.f64("f_x")?, row.f64("f_y")?, row.f64("f_z")?])
    })?;
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<_>>();
    Ok((
        col(0),
        ControlField {
            f_x: col(1),
            f_y: col(2),
            f_z: col(3),
        },
    ))
}

const TABLE_ROWS: [&str; 4] = ["X", "Y", "Z", "Total"];

/// One column per reference; rows `X, Y, Z, Total`.
pub fn write_distance_table<W: Write>(w: W, table: &[DistanceReport]) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["observable".to_string()];
    header.extend(table.iter().map(|r| r.label.clone()));
    out.write_record(&header).map_err(csv_err)?;
    for (i, name) in TABLE_ROWS.iter().enumerate() {
        let mut rec = vec![name.to_string()];
        rec.extend(table.iter().map(|r| {
            fmt_f64(if i < 3 { r.per_observable[i] } else { r.total })
        }));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_distance_table<R: Read>(r: R) -> Result<Vec<DistanceReport>> {
    let (headers, rows) = read_table(r, &["observable"])?;
    if rows.len() != 4 {
        return Err(Error::Csv {
            row: rows.last().map_or(1, |r| r.0),
            column: "observable".into(),
            message: format!("expected 4 rows (X, Y, Z, Total), found {}", rows.len()),
        });
    }
    let mut out: Vec<DistanceReport> = headers[1..]
        .iter()
        .map(|l| DistanceReport::new(l.clone(), [0.0; 3]))
        .collect();
    for (i, (line, rec)) in rows.iter().enumerate() {
        let row = Row {
            line: *line,
            headers: &headers,
            rec,
        };
        let name = row.raw("observable")?;
        if name != TABLE_ROWS[i] {
            return Err(row.err("observable", format!("expected '{}', found '{name}'", TABLE_ROWS[i])));
        }
        for (r, col) in out.iter_mut().zip(&headers[1..]) {
            let v = row.f64(col)?;
            if i < 3 {
                r.per_observable[i] = v;
            } else {
                r.total = v;
            }
        }
    }
    Ok(out)
}

/// A simulation result with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionDocument {
    pub seed: u64,
    pub config_hash: String,
    pub noise_label: String,
    pub pulse_label: String,
    pub result: EvolutionResult,
}

pub fn write_json<W: Write, T: Serialize>(w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub fn read_json<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<T> {
    Ok(serde_json::from_reader(r)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, 0.0, -0.0, 5e-324] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn points_round_trip() {
        let pts = vec![
            QfsPoint::new([0.1, -0.2, 1.0 / 3.0, 0.0, 1.0, -1.0, 0.5, 0.25, 1e-17]).with_labels("1/f, α=1", "ideal", 7),
            QfsPoint::noiseless(),
        ];
        let mut buf = Vec::new();
        write_qfs_points(&mut buf, &pts).unwrap();
        assert_eq!(read_qfs_points(buf.as_slice()).unwrap(), pts);
    }

    #[test]
    fn malformed_csv_names_row_and_column() {
        let mut buf = Vec::new();
        write_qfs_points(&mut buf, &[QfsPoint::noiseless(), QfsPoint::noiseless()]).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("0.0000000000000000e0", "oops", 1);
        match read_qfs_points(text.as_bytes()) {
            Err(Error::Csv { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "beta_x");
            }
            other => panic!("{other:?}"),
        }
        let missing = "noise_label,alpha_x\nx,1\n";
        assert!(matches!(read_qfs_points(missing.as_bytes()), Err(Error::Csv { .. })));
    }

    #[test]
    fn distance_table_round_trip() {
        let t = vec![
            DistanceReport::new("1/f", [0.40, 0.30, 0.29]),
            DistanceReport::new("coloured (NS)", [0.92, 0.86, 0.62]),
        ];
        let mut buf = Vec::new();
        write_distance_table(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("observable,1/f,coloured (NS)\nX,"));
        assert_eq!(read_distance_table(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn realisation_and_field_round_trip() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let n = NoiseRealization::from_x(vec![0.1, -0.7, 0.3, 1e-9]);
        let mut buf = Vec::new();
        write_realisation(&mut buf, &grid, &n).unwrap();
        let (t, back) = read_realisation(buf.as_slice()).unwrap();
        assert_eq!(back, n);
        assert_eq!(t, grid.times());
        let mut f = ControlField::zeros(4);
        f.f_y = vec![1.0, 2.0, 3.0, 4.0];
        let mut buf = Vec::new();
        write_field(&mut buf, &grid, &f).unwrap();
        assert_eq!(read_field(buf.as_slice()).unwrap().1, f);
    }
}
