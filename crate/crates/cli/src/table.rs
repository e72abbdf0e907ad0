//! Result tables and their CSV / gnuplot renderings.

use crate::config::Experiment;
use std::io::{self, Read, Write};
use std::str::FromStr;
use thiserror::Error;

pub const HEADER: [&str; 10] = [
    "experiment",
    "snr",
    "L",
    "K",
    "scheme",
    "policy_or_kind",
    "mean_rate",
    "stderr",
    "trials",
    "seed",
];

/// One aggregated grid point of one series. `snr_db` is in dB; `sources` is
/// `None` for the large-`L` models and written as `inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: Experiment,
    pub snr_db: f64,
    pub sources: Option<usize>,
    pub stages: usize,
    pub scheme: String,
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Row {
    fn series_key(&self) -> (&str, &str) {
        (&self.scheme, &self.label)
    }

    /// The same row with every float rounded to its written precision.
    pub fn rounded(&self) -> Row {
        let r = |x: f64| sig6(x).parse().unwrap_or(x);
        Row {
            snr_db: r(self.snr_db),
            mean: r(self.mean),
            stderr: r(self.stderr),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    GnuplotDat,
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("unsupported format `{0}` (expected csv or gnuplot-dat)")]
    UnsupportedFormat(String),
    #[error("csv row {row}: {reason}")]
    Load { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FromStr for Format {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "gnuplot-dat" => Ok(Format::GnuplotDat),
            other => Err(TableError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Six significant digits, shortest round-trip text.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let v: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    if v == 0.0 {
        "0".to_string()
    } else {
        v.to_string()
    }
}

fn sources_text(sources: Option<usize>) -> String {
    sources.map_or_else(|| "inf".to_string(), |l| l.to_string())
}

/// Series in order of first appearance; rows with a non-finite mean are
/// dropped and series left empty are skipped, both with a warning.
fn series(table: &Table) -> Vec<Vec<&Row>> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    let mut out: Vec<Vec<&Row>> = Vec::new();
    for row in &table.rows {
        let key = row.series_key();
        let i = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                out.push(Vec::new());
                keys.len() - 1
            }
        };
        if row.mean.is_finite() {
            out[i].push(row);
        } else {
            log::warn!(
                "dropping {} {} at snr {} dB, L = {}, K = {}: mean is {}",
                row.scheme,
                row.label,
                row.snr_db,
                sources_text(row.sources),
                row.stages,
                row.mean
            );
        }
    }
    keys.into_iter()
        .zip(out)
        .filter_map(|((scheme, label), rows)| {
            if rows.is_empty() {
                log::warn!("series {scheme} {label} is empty; skipped");
                None
            } else {
                Some(rows)
            }
        })
        .collect()
}

/// Write the table; returns the number of series emitted.
pub fn emit_plot_data(table: &Table, format: Format, out: impl Write) -> Result<usize, TableError> {
    let groups = series(table);
    match format {
        Format::Csv => write_csv(&groups, out)?,
        Format::GnuplotDat => write_gnuplot(&groups, out)?,
    }
    Ok(groups.len())
}

fn write_csv(groups: &[Vec<&Row>], out: impl Write) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in groups.iter().flatten() {
        w.write_record([
            row.experiment.name().to_string(),
            sig6(row.snr_db),
            sources_text(row.sources),
            row.stages.to_string(),
            row.scheme.clone(),
            row.label.clone(),
            sig6(row.mean),
            sig6(row.stderr),
            row.trials.to_string(),
            row.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Series blocks separated by two blank lines (gnuplot `index`); within a
/// block, curves for different `(snr, L)` are separated by one blank line.
fn write_gnuplot(groups: &[Vec<&Row>], mut out: impl Write) -> Result<(), TableError> {
    for (i, rows) in groups.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
            writeln!(out)?;
        }
        writeln!(out, "# {} {} ({})", rows[0].scheme, rows[0].label, rows[0].experiment)?;
        writeln!(out, "# snr L K mean_rate stderr trials")?;
        let mut prev: Option<(f64, Option<usize>)> = None;
        for row in rows {
            let curve = (row.snr_db, row.sources);
            if prev.is_some_and(|p| p != curve) {
                writeln!(out)?;
            }
            prev = Some(curve);
            writeln!(
                out,
                "{} {} {} {} {} {}",
                sig6(row.snr_db),
                sources_text(row.sources),
                row.stages,
                sig6(row.mean),
                sig6(row.stderr),
                row.trials
            )?;
        }
    }
    Ok(())
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, i: usize, row: usize) -> Result<T, TableError> {
    let text = rec.get(i).unwrap_or("");
    text.parse().map_err(|_| TableError::Load {
        row,
        reason: format!("bad {} `{text}`", HEADER[i]),
    })
}

/// Read a table written by [`emit_plot_data`] in CSV format.
pub fn load_csv(input: impl Read) -> Result<Table, TableError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(TableError::Load {
            row: 0,
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let experiment = Experiment::from_name(rec.get(0).unwrap_or("")).ok_or_else(|| TableError::Load {
            row,
            reason: format!("unknown experiment `{}`", rec.get(0).unwrap_or("")),
        })?;
        let sources = match rec.get(2) {
            Some("inf") => None,
            _ => Some(parse_field(&rec, 2, row)?),
        };
        rows.push(Row {
            experiment,
            snr_db: parse_field(&rec, 1, row)?,
            sources,
            stages: parse_field(&rec, 3, row)?,
            scheme: rec.get(4).unwrap_or("").to_string(),
            label: rec.get(5).unwrap_or("").to_string(),
            mean: parse_field(&rec, 6, row)?,
            stderr: parse_field(&rec, 7, row)?,
            trials: parse_field(&rec, 8, row)?,
            seed: parse_field(&rec, 9, row)?,
        });
    }
    Ok(Table { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, label: &str, k: usize, mean: f64) -> Row {
        Row {
            experiment: Experiment::DenseVsK,
            snr_db: 20.0,
            sources: if k % 2 == 0 { None } else { Some(4) },
            stages: k,
            scheme: scheme.into(),
            label: label.into(),
            mean,
            stderr: mean / 123.456789,
            trials: 10,
            seed: 7,
        }
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(4.608712345), "4.60871");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(-0.000123456789), "-0.000123457");
        assert_eq!(sig6(f64::NAN), "NaN");
    }

    #[test]
    fn csv_round_trip() {
        let table = Table {
            rows: vec![row("qmf", "optimal", 1, 4.60871234), row("qmf", "optimal", 2, 4.1), row("mr", "-", 1, 0.22)],
        };
        let mut buf = Vec::new();
        emit_plot_data(&table, Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("experiment,snr,L,K,scheme,policy_or_kind,mean_rate,stderr,trials,seed\n"));
        assert!(text.contains("dense_vs_k,20,inf,2,qmf,optimal,4.1,"));
        let back = load_csv(buf.as_slice()).unwrap();
        let rounded: Vec<Row> = table.rows.iter().map(Row::rounded).collect();
        assert_eq!(back.rows, rounded);
        let mut again = Vec::new();
        emit_plot_data(&back, Format::Csv, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn gnuplot_blocks() {
        let table = Table {
            rows: vec![row("qmf", "optimal", 1, 4.6), row("mr", "-", 1, 0.2), row("qmf", "optimal", 2, 4.1)],
        };
        let mut buf = Vec::new();
        assert_eq!(emit_plot_data(&table, Format::GnuplotDat, &mut buf).unwrap(), 2);
        let text = String::from_utf8(buf).unwrap();
        let blocks: Vec<&str> = text.split("\n\n\n").collect();
        assert_eq!(blocks.len(), 2);
        assert!(blocks[0].starts_with("# qmf optimal"));
        // the two optimal rows differ in L, so they form separate curves
        assert_eq!(blocks[0].lines().filter(|l| l.is_empty()).count(), 1);
        assert!(blocks[1].contains("20 4 1 0.2 "));
    }

    #[test]
    fn empty_series_filtered() {
        let table = Table {
            rows: vec![row("qmf", "optimal", 1, 4.6), row("qmf", "fixed", 1, f64::NAN)],
        };
        let mut buf = Vec::new();
        assert_eq!(emit_plot_data(&table, Format::Csv, &mut buf).unwrap(), 1);
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn unknown_format_rejected() {
        assert!(matches!("png".parse::<Format>(), Err(TableError::UnsupportedFormat(_))));
        assert_eq!("gnuplot-dat".parse::<Format>().unwrap(), Format::GnuplotDat);
    }

    #[test]
    fn loader_reports_bad_rows() {
        let text = "experiment,snr,L,K,scheme,policy_or_kind,mean_rate,stderr,trials,seed\ndense_vs_k,20,x,1,qmf,optimal,1,0,1,0\n";
        let err = load_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }
}
