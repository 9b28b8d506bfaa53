//! CSV ingestion and result serialization.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covtest::CovTestResult;
use crate::cure::{CureEstimate, CurveEstimate};
use crate::error::{CureError, Result};
use crate::mz::MZTestResult;
use crate::params::ControlParams;
use crate::rng::GENERATOR;
use crate::sample::{Covariate, SurvivalSample};

/// Column names to read from a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Columns {
    pub x: String,
    pub t: String,
    pub d: String,
    /// Read `x` as labels even when every value is numeric.
    pub categorical: bool,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub sample: SurvivalSample,
    /// Rows skipped because one of the three fields was missing.
    pub dropped: usize,
}

fn missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "NA"
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CureError + '_ {
    move |source| CureError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a comma-separated file with a header row.
pub fn ingest_csv(path: &Path, columns: &Columns) -> Result<Ingested> {
    let file = File::open(path).map_err(io_error(path))?;
    read_csv(file, columns).map_err(|e| match e {
        CureError::Format { message, .. } => CureError::Format {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Same as [`ingest_csv`] for any reader. Row numbers in errors count the
/// header as row 1.
pub fn read_csv<R: Read>(reader: R, columns: &Columns) -> Result<Ingested> {
    let format = |message: String| CureError::Format {
        path: PathBuf::from("<input>"),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| format(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format(format!("column `{name}` not found")))
    };
    let (ix, it, id) = (find(&columns.x)?, find(&columns.t)?, find(&columns.d)?);

    let mut xs = Vec::new();
    let mut ts = Vec::new();
    let mut ds = Vec::new();
    let mut dropped = 0;
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| format(e.to_string()))?;
        let (x, t, d) = (&rec[ix], &rec[it], &rec[id]);
        if missing(x) || missing(t) || missing(d) {
            dropped += 1;
            continue;
        }
        let parse_err = |column: &str, message: String| CureError::Parse {
            row,
            column: column.to_string(),
            message,
        };
        let tv: f64 = t
            .parse()
            .map_err(|_| parse_err(&columns.t, format!("`{t}` is not a number")))?;
        if !(tv.is_finite() && tv >= 0.0) {
            return Err(parse_err(
                &columns.t,
                format!("time {t} must be finite and non-negative"),
            ));
        }
        let dv = match d.parse::<f64>() {
            Ok(0.0) => false,
            Ok(1.0) => true,
            _ => {
                return Err(parse_err(
                    &columns.d,
                    format!("indicator `{d}` is not 0 or 1"),
                ))
            }
        };
        xs.push(x.to_string());
        ts.push(tv);
        ds.push(dv);
    }
    if ts.is_empty() {
        return Err(CureError::EmptyAfterFiltering);
    }
    let numeric: Option<Vec<f64>> = if columns.categorical {
        None
    } else {
        xs.iter()
            .map(|v| v.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect()
    };
    let x = match numeric {
        Some(v) => Covariate::Continuous(v),
        None => Covariate::categorical(&xs),
    };
    Ok(Ingested {
        sample: SurvivalSample::new(x, ts, ds)?,
        dropped,
    })
}

/// Float with 17 significant digits and a two-digit signed exponent, e.g.
/// `1.0472418294131268e-05`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    let s = format!("{v:.16e}");
    let (mantissa, exp) = s.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_else(|| "NA".into())
}

/// Any result the command line can emit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Output {
    Cure(CureEstimate),
    Curve(CurveEstimate),
    CovTest(CovTestResult),
    MzTest(MZTestResult),
}

/// JSON document: the result with the parameters and seed that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub generator: String,
    pub seed: u64,
    pub params: ControlParams,
    pub result: Output,
}

impl Report {
    pub fn new(command: &str, params: &ControlParams, result: Output) -> Self {
        Self {
            command: command.to_string(),
            generator: GENERATOR.to_string(),
            seed: params.seed_or_default(),
            params: params.clone(),
            result,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// CSV rendering: one row per (x0, time) cell for estimates, one row for
/// tests.
pub fn to_csv(output: &Output) -> String {
    let mut s = String::new();
    match output {
        Output::Cure(c) => {
            s.push_str("x0,h,time,estimate,lower,upper\n");
            for p in 0..c.x0.len() {
                let band = |b: &Option<Vec<Option<f64>>>| b.as_ref().and_then(|v| v[p]);
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    format_float(c.x0[p]),
                    format_float(c.h[p]),
                    opt(c.tmax1),
                    opt(c.cure[p]),
                    opt(band(&c.lower)),
                    opt(band(&c.upper)),
                ));
            }
        }
        Output::Curve(c) => {
            s.push_str("x0,h,time,estimate,lower,upper\n");
            for p in 0..c.x0.len() {
                let band = |b: &Option<Vec<Option<Vec<f64>>>>, k: usize| {
                    b.as_ref().and_then(|v| v[p].as_ref()).map(|v| v[k])
                };
                for (k, &t) in c.times.iter().enumerate() {
                    s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        format_float(c.x0[p]),
                        format_float(c.h[p]),
                        format_float(t),
                        opt(c.values[p].as_ref().map(|v| v[k])),
                        opt(band(&c.lower, k)),
                        opt(band(&c.upper, k)),
                    ));
                }
            }
        }
        Output::CovTest(r) => {
            s.push_str("cm_stat,cm_pvalue,ks_stat,ks_pvalue,B\n");
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                format_float(r.cm_stat),
                format_float(r.cm_pvalue),
                format_float(r.ks_stat),
                format_float(r.ks_pvalue),
                r.b
            ));
        }
        Output::MzTest(r) => {
            s.push_str("statistic,n,delta,interval_lo,interval_hi,pvalue\n");
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.statistic,
                r.n,
                opt(r.delta),
                opt(r.interval.map(|i| i.0)),
                opt(r.interval.map(|i| i.1)),
                format_float(r.pvalue)
            ));
        }
    }
    s
}

/// Serialize a report in `format` to `destination`, or to standard output
/// when `destination` is `None`.
pub fn emit(report: &Report, format: Format, destination: Option<&Path>) -> Result<()> {
    let text = match format {
        Format::Csv => to_csv(&report.result),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| CureError::Format {
                path: destination.map(Path::to_path_buf).unwrap_or_default(),
                message: e.to_string(),
            })?;
            s.push('\n');
            s
        }
    };
    match destination {
        Some(path) => {
            let mut f = File::create(path).map_err(io_error(path))?;
            f.write_all(text.as_bytes()).map_err(io_error(path))
        }
        None => {
            let path = Path::new("<stdout>");
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(io_error(path))
        }
    }
}

/// Write a sample as `x,t,d` rows in input order.
pub fn write_sample(sample: &SurvivalSample, path: &Path) -> Result<()> {
    let n = sample.len();
    let mut rows = vec![String::new(); n];
    for (k, &i) in sample.order().iter().enumerate() {
        let x = match sample.covariate() {
            Covariate::Continuous(v) => format_float(v[k]),
            Covariate::Categorical { levels, codes } => levels[codes[k]].clone(),
        };
        rows[i] = format!(
            "{x},{},{}\n",
            format_float(sample.time()[k]),
            sample.event()[k] as u8
        );
    }
    let mut f = File::create(path).map_err(io_error(path))?;
    f.write_all(b"x,t,d\n").map_err(io_error(path))?;
    f.write_all(rows.concat().as_bytes())
        .map_err(io_error(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols() -> Columns {
        Columns {
            x: "x".into(),
            t: "t".into(),
            d: "d".into(),
            categorical: false,
        }
    }

    #[test]
    fn well_formed() {
        let r = read_csv("x,t,d\n1,2,1\n0.5,3,0\n2,1,1\n".as_bytes(), &cols()).unwrap();
        assert_eq!(r.sample.len(), 3);
        assert_eq!(r.dropped, 0);
        assert!(r.sample.covariate().is_continuous());
    }

    #[test]
    fn bad_indicator_names_row() {
        let err = read_csv("x,t,d\n1,2,1\n1,3,2\n".as_bytes(), &cols()).unwrap_err();
        match err {
            CureError::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "d");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn missing_rows_dropped() {
        let r = read_csv("x,t,d\n1,2,1\nNA,3,0\n2,,1\n3,4,0\n".as_bytes(), &cols()).unwrap();
        assert_eq!((r.sample.len(), r.dropped), (2, 2));
        let err = read_csv("x,t,d\nNA,3,0\n".as_bytes(), &cols()).unwrap_err();
        assert!(matches!(err, CureError::EmptyAfterFiltering));
    }

    #[test]
    fn labels_become_categorical() {
        let r = read_csv("x,t,d\na,2,1\nb,3,0\n".as_bytes(), &cols()).unwrap();
        assert!(!r.sample.covariate().is_continuous());
        let forced = Columns {
            categorical: true,
            ..cols()
        };
        let r = read_csv("x,t,d\n1,2,1\n0,3,0\n".as_bytes(), &forced).unwrap();
        assert!(!r.sample.covariate().is_continuous());
    }

    #[test]
    fn unknown_column() {
        let c = Columns {
            x: "age".into(),
            ..cols()
        };
        assert!(matches!(
            read_csv("x,t,d\n1,2,1\n".as_bytes(), &c),
            Err(CureError::Format { .. })
        ));
    }

    #[test]
    fn float_format() {
        assert_eq!(
            format_float(1.0472418294131268e-05),
            "1.0472418294131268e-05"
        );
        assert_eq!(format_float(137.0), "1.3700000000000000e+02");
        assert_eq!(format_float(0.0), "0.0000000000000000e+00");
        assert_eq!(format_float(-2.5e-300), "-2.5000000000000000e-300");
        let v = 0.1 + 0.2;
        assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }
}
