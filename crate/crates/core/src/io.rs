//! File formats: observation vectors, mixture CSV and the fit sidecar.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::mixtures::DiscreteMixture;
use crate::npmle::{Certificate, NpmleFit};
use crate::{Error, Result};

/// Parses newline-delimited decimal reals. Blank lines and lines starting with
/// `#` are skipped; anything else must parse as a finite number.
pub fn read_observations<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            message: format!("`{t}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("`{t}` is not finite"),
            });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no observations".into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct MixtureRow {
    support: f64,
    weight: f64,
}

/// Writes `support,weight` rows sorted by support.
pub fn write_mixture_csv<W: Write>(g: &DiscreteMixture, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (&support, &weight) in g.support().iter().zip(g.weights()) {
        w.serialize(MixtureRow { support, weight })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mixture_csv<R: Read>(reader: R) -> Result<DiscreteMixture> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["support", "weight"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `support,weight`".into(),
        });
    }
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for row in r.deserialize() {
        let row: MixtureRow = row?;
        support.push(row.support);
        weights.push(row.weight);
    }
    DiscreteMixture::new(support, weights)
}

/// Summary written next to the mixture CSV of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSidecar {
    pub iterations: usize,
    pub final_loglik: f64,
    pub certificate: Option<Certificate>,
}

impl From<&NpmleFit> for FitSidecar {
    fn from(fit: &NpmleFit) -> Self {
        Self {
            iterations: fit.iterations,
            final_loglik: fit.final_loglik(),
            certificate: fit.certificate,
        }
    }
}

pub fn write_fit<W1: Write, W2: Write>(fit: &NpmleFit, mixture: W1, mut sidecar: W2) -> Result<()> {
    write_mixture_csv(&fit.mixture, mixture)?;
    serde_json::to_writer_pretty(&mut sidecar, &FitSidecar::from(fit))?;
    sidecar.write_all(b"\n")?;
    Ok(())
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if exp < -4 || exp >= digits as i32 + 3 {
        return format!("{:.*e}", digits.saturating_sub(1), v);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
