//! CSV tables, JSON summaries and file naming.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::RateReport;
use crate::norms::{Exponent, Rational};

/// One row of a rate or residual table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub scale_eps: f64,
    pub scale_sigma: Option<f64>,
    pub value: f64,
    pub slope: Option<f64>,
    pub predicted: Option<f64>,
    pub residual: Option<f64>,
}

impl Row {
    pub const HEADER: [&'static str; 6] = ["scale_eps", "scale_sigma", "value", "slope", "predicted", "residual"];
}

/// Rows of a fitted ladder; `residual` is the per-level deviation from the
/// fitted line in log space unless `residuals` supplies its own values.
pub fn ladder_rows(report: &RateReport, residuals: Option<&[f64]>) -> Vec<Row> {
    (0..report.values.len())
        .map(|i| {
            let eps = report.epsilon[i];
            let sigma = report.sigma.get(i).copied().filter(|s| s.is_finite());
            let fit_dev = (!report.excluded[i]).then(|| report.values[i].ln() - report.intercept - report.slope * eps.ln());
            Row {
                scale_eps: eps,
                scale_sigma: sigma,
                value: report.values[i],
                slope: Some(report.slope),
                predicted: report.predicted,
                residual: residuals.map_or(fit_dev, |r| r.get(i).copied()),
            }
        })
        .collect()
}

fn number(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.to_string() }
}

/// Plain decimals for moderate magnitudes, scientific notation otherwise.
pub fn compact(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-3..1e4).contains(&a) {
        number(v)
    } else {
        format!("{v:.3e}")
    }
}

/// The parameter tag embedded in every file name.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tag {
    pub theta: Rational,
    pub kappa: Option<Rational>,
    pub p: Exponent,
    pub q: Option<Exponent>,
    pub seed: u64,
}

impl Tag {
    pub fn render(&self) -> String {
        let kappa = self.kappa.map_or_else(|| "na".into(), |k| number(k.to_f64()));
        let q = self.q.map_or_else(|| "na".into(), |q| q.label());
        format!(
            "theta{}_kappa{}_p{}_q{}_seed{}",
            number(self.theta.to_f64()),
            kappa,
            self.p.label(),
            q,
            self.seed
        )
    }
}

/// The single writer through which an experiment emits files. Every write
/// is recorded so the summary can list it.
#[derive(Debug)]
pub struct ReportWriter {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl ReportWriter {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ReportWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn record(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    /// Writes `header` and then `rows`; the header is present even when
    /// there are no rows.
    pub fn write_csv<T: Serialize>(&mut self, name: &str, header: &[&str], rows: &[T]) -> crate::Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path).map_err(csv_error)?;
        w.write_record(header).map_err(csv_error)?;
        for r in rows {
            w.serialize(r).map_err(csv_error)?;
        }
        w.flush()?;
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> crate::Result<PathBuf> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| std::io::Error::other(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        self.files.push(path.clone());
        Ok(path)
    }
}

fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => std::io::Error::other(format!("{other:?}")).into(),
    }
}

/// One asserted quantity of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    /// Human-readable admissible range, e.g. `[0.475, 0.775]`.
    pub target: String,
    pub pass: bool,
}

impl Assertion {
    pub fn within(name: impl Into<String>, value: f64, centre: f64, tol: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            target: format!("[{}, {}]", number(centre - tol), number(centre + tol)),
            pass: (value - centre).abs() <= tol,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            target: format!("<= {}", compact(limit)),
            pass: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            target: format!(">= {}", compact(limit)),
            pass: value >= limit,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::fit_rate;

    #[test]
    fn tag_format() {
        let t = Tag {
            theta: Rational::new(1, 5).unwrap(),
            kappa: Some(Rational::new(1, 3).unwrap()),
            p: Exponent::Finite(2.0),
            q: Some(Exponent::Infinity),
            seed: 7,
        };
        assert_eq!(t.render(), "theta0.2_kappa0.3333_p2_qinf_seed7");
    }

    #[test]
    fn ladder_rows_carry_fit() {
        let r = fit_rate(&[(0.5, 0.25), (0.25, 0.0625), (0.125, 0.015625)]).unwrap().with_predicted(Some(2.0));
        let rows = ladder_rows(&r, None);
        assert_eq!(rows.len(), 3);
        assert!((rows[0].slope.unwrap() - 2.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.residual.unwrap().abs() < 1e-12 && r.scale_sigma.is_none()));
    }

    #[test]
    fn csv_has_the_documented_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ReportWriter::create(dir.path()).unwrap();
        let row = Row {
            scale_eps: 0.5,
            scale_sigma: None,
            value: 1.0,
            slope: Some(0.5),
            predicted: None,
            residual: Some(0.0),
        };
        let p = w.write_csv("t.csv", &Row::HEADER, &[row]).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text, "scale_eps,scale_sigma,value,slope,predicted,residual\n0.5,,1.0,0.5,,0.0\n");
        let p = w.write_csv::<Row>("empty.csv", &Row::HEADER, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "scale_eps,scale_sigma,value,slope,predicted,residual\n");
        assert_eq!(w.files().len(), 2);
    }
}
