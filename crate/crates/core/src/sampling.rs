//! Sampling by the conditional-distribution method.
//!
//! Row `i` uses its own ChaCha20 stream (see [`crate::stream`]), so the
//! matrix does not depend on how rows are scheduled across threads.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::conditional::ConditionalCopula;
use crate::copula::{ArchimedeanCopula, KernelCopula};
use crate::error::{Error, Result};
use crate::fmt::g12;
use crate::stream::{row_uniforms, RNG_ALGORITHM};

const ROW_CHUNK: usize = 1024;

/// An `n x d` sample, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    pub n: usize,
    pub d: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub provenance: Value,
}

impl SampleMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Fraction of rows with `row <= u` componentwise.
    pub fn empirical_cdf(&self, u: &[f64]) -> f64 {
        let hits = self.rows().filter(|r| r.iter().zip(u).all(|(a, b)| a <= b)).count();
        hits as f64 / self.n as f64
    }

    /// CSV with a leading `#` metadata comment and a `u1,...,ud` header.
    /// Values are written with 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = json!({ "seed": self.seed, "n": self.n, "d": self.d, "rng": RNG_ALGORITHM, "copula": self.provenance });
        writeln!(w, "# {meta}")?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record((1..=self.d).map(|j| format!("u{j}")))?;
        for r in self.rows() {
            out.write_record(r.iter().map(|&v| g12(v)))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the format written by [`SampleMatrix::write_csv`]. The metadata
    /// comment is optional; without it seed and provenance are empty.
    pub fn read_csv<R: BufRead>(mut r: R) -> Result<SampleMatrix> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let (meta, rest): (Value, String) = match first.strip_prefix('#') {
            Some(m) => (serde_json::from_str(m.trim())?, String::new()),
            None => (Value::Null, first),
        };
        let chained = std::io::Read::chain(std::io::Cursor::new(rest), r);
        let mut reader = csv::Reader::from_reader(chained);
        let d = reader.headers()?.len();
        let mut values = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            if rec.len() != d {
                return Err(Error::DimensionMismatch(format!("row with {} fields, header has {d}", rec.len())));
            }
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Domain(format!("not a number: {field:?}")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!("sample value {v} outside [0, 1]")));
                }
                values.push(v);
            }
        }
        let n = if d == 0 { 0 } else { values.len() / d };
        Ok(SampleMatrix {
            n,
            d,
            values,
            seed: meta.get("seed").and_then(Value::as_u64).unwrap_or(0),
            provenance: meta.get("copula").cloned().unwrap_or(Value::Null),
        })
    }
}

/// Descriptor of an Archimedean copula for provenance records.
pub fn describe(c: &ArchimedeanCopula) -> Value {
    json!({ "type": "archimedean", "generator": c.generator().spec(), "dim": crate::copula::Copula::dim(c) })
}

/// Draws `n` rows from any copula with conditional quantiles.
pub fn sample_with<C: KernelCopula + ?Sized>(c: &C, n: usize, seed: u64, provenance: Value) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let d = c.dim();
    let mut values = vec![0.0; n * d];
    let results: Vec<Result<()>> = values
        .par_chunks_mut(ROW_CHUNK * d)
        .enumerate()
        .map(|(k, block)| {
            let mut v = vec![0.0; d];
            for (i, row) in block.chunks_exact_mut(d).enumerate() {
                row_uniforms(seed, (k * ROW_CHUNK + i) as u64, &mut v);
                c.transform_leading(&v, row).map_err(|e| match e {
                    Error::NumericalFailure(_) => e,
                    other => Error::NumericalFailure(other.to_string()),
                })?;
            }
            Ok(())
        })
        .collect();
    results.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(SampleMatrix { n, d, values, seed, provenance })
}

/// `n` rows from a strict Archimedean copula.
pub fn sample(c: &ArchimedeanCopula, n: usize, seed: u64) -> Result<SampleMatrix> {
    if !c.is_strict() {
        return Err(Error::NotStrict("sampling is limited to strict generators".into()));
    }
    sample_with(c, n, seed, describe(c))
}

/// `n` rows from a conditional copula `C^x`.
pub fn sample_conditional(cc: &ConditionalCopula, n: usize, seed: u64) -> Result<SampleMatrix> {
    let provenance = json!({ "type": "conditional", "base": describe(cc.base()), "x": cc.x() });
    sample_with(cc, n, seed, provenance)
}

/// `n` rows `(x, x, z)` with `x, z` independent uniforms.
pub fn sample_fixture_b(n: usize, seed: u64) -> Result<SampleMatrix> {
    sample_with(&crate::copula::FixtureCopulaB, n, seed, json!({ "type": "fixture-b" }))
}
