//! Behavioral-profile tables, simple correspondence analysis, moon plots and
//! frame-annotation tallies.

mod frames;
mod moon;
mod svd;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use frames::{frame_tally, parse_annotations, Annotation, FrameCell, FrameTally, LanguageTally};
pub use moon::{moon_plot, FeatureLabel, MoonPlotSpec, MoonStyle, WordGlyph};
pub use svd::{jacobi_svd, Svd};

use crate::error::{Error, Result};

/// Singular values at or below this are treated as zero.
pub const SIGMA_TOL: f64 = 1e-12;

const APPENDIX_CSV: &str = include_str!("../../data/appendix_profile.csv");

/// ID-tag rows × word columns of nonnegative proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub tag_types: Vec<String>,
    pub id_tags: Vec<String>,
    pub columns: Vec<String>,
    /// Row-major, `id_tags.len()` rows of `columns.len()` values.
    pub values: Vec<Vec<f64>>,
}

impl ProfileTable {
    pub fn new(tag_types: Vec<String>, id_tags: Vec<String>, columns: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let t = ProfileTable {
            tag_types,
            id_tags,
            columns,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let (r, c) = (self.values.len(), self.columns.len());
        if self.tag_types.len() != r || self.id_tags.len() != r {
            return Err(Error::Table("row labels do not match the number of rows".into()));
        }
        if r < 2 || c < 2 {
            return Err(Error::Table(format!("need at least 2 rows and 2 columns, got {r}×{c}")));
        }
        for (i, row) in self.values.iter().enumerate() {
            if row.len() != c {
                return Err(Error::Table(format!("row {} has {} values, expected {c}", i + 1, row.len())));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Table(format!("row {} has invalid value {v}", i + 1)));
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::Table(format!("row {} ({}) is all zero", i + 1, self.row_label(i))));
            }
        }
        for j in 0..c {
            if self.values.iter().all(|row| row[j] == 0.0) {
                return Err(Error::Table(format!("column {} is all zero", self.columns[j])));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// `"Patient: environment"`.
    pub fn row_label(&self, i: usize) -> String {
        format!("{}: {}", self.tag_types[i], self.id_tags[i])
    }

    pub fn row_index(&self, tag_type: &str, id_tag: &str) -> Option<usize> {
        (0..self.n_rows()).find(|&i| self.tag_types[i] == tag_type && self.id_tags[i] == id_tag)
    }

    pub fn row(&self, tag_type: &str, id_tag: &str) -> Option<&[f64]> {
        self.row_index(tag_type, id_tag).map(|i| self.values[i].as_slice())
    }

    pub fn scaled(&self, factor: f64) -> ProfileTable {
        let mut t = self.clone();
        for row in &mut t.values {
            for v in row {
                *v *= factor;
            }
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tag_type,id_tag");
        for c in &self.columns {
            out.push(',');
            out.push_str(&crate::corpus::csv_field(c));
        }
        out.push('\n');
        for i in 0..self.n_rows() {
            let _ = write!(
                out,
                "{},{}",
                crate::corpus::csv_field(&self.tag_types[i]),
                crate::corpus::csv_field(&self.id_tags[i])
            );
            for v in &self.values[i] {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Parses `tag_type,id_tag,<word1>,<word2>,...` CSV text.
pub fn parse_profile_csv(text: &str) -> Result<ProfileTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Table(e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "tag_type" || &header[1] != "id_tag" {
        return Err(Error::Table("header must be tag_type,id_tag,<word>,...".into()));
    }
    let columns: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let (mut tag_types, mut id_tags, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Table(format!("line {line}: {e}")))?;
        if rec.len() != header.len() {
            return Err(Error::Table(format!(
                "line {line}: ragged row with {} fields, expected {}",
                rec.len(),
                header.len()
            )));
        }
        tag_types.push(rec[0].to_owned());
        id_tags.push(rec[1].to_owned());
        let row = rec
            .iter()
            .skip(2)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Table(format!("line {line}: not a number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(v) = row.iter().find(|v| **v < 0.0) {
            return Err(Error::Table(format!("line {line}: negative value {v}")));
        }
        values.push(row);
    }
    ProfileTable::new(tag_types, id_tags, columns, values)
}

pub fn load_profile_table(path: &Path) -> Result<ProfileTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profile_csv(&text)
}

/// The bundled 29 × 3 table for shang, harm and kizutsukeru.
pub fn appendix_table() -> ProfileTable {
    parse_profile_csv(APPENDIX_CSV).expect("bundled table is valid")
}

pub fn appendix_csv() -> &'static str {
    APPENDIX_CSV
}

/// Simple correspondence analysis. Coordinates are row-major, one entry per
/// retained dimension (singular values above [`SIGMA_TOL`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaResult {
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub row_masses: Vec<f64>,
    pub column_masses: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub row_standard: Vec<Vec<f64>>,
    pub row_principal: Vec<Vec<f64>>,
    pub column_standard: Vec<Vec<f64>>,
    pub column_principal: Vec<Vec<f64>>,
    pub total_inertia: f64,
    pub inertia_shares: Vec<f64>,
}

impl CaResult {
    pub fn dims(&self) -> usize {
        self.singular_values.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ca result serializes")
    }
}

/// Standardized residual matrix `D_r^{-1/2}(P − r cᵀ)D_c^{-1/2}` with its margins.
pub fn standardized_residuals(table: &ProfileTable) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let (nr, nc) = (table.n_rows(), table.n_cols());
    let total: f64 = table.values.iter().flatten().sum();
    let p = DMatrix::from_fn(nr, nc, |i, j| table.values[i][j] / total);
    let r: Vec<f64> = (0..nr).map(|i| p.row(i).sum()).collect();
    let c: Vec<f64> = (0..nc).map(|j| p.column(j).sum()).collect();
    let s = DMatrix::from_fn(nr, nc, |i, j| (p[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt());
    (s, r, c)
}

pub fn correspondence_analysis(table: &ProfileTable) -> Result<CaResult> {
    table.validate()?;
    let (s, r, c) = standardized_residuals(table);
    let svd = jacobi_svd(&s);
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > SIGMA_TOL)
        .collect();
    let sigma: Vec<f64> = kept.iter().map(|&k| svd.singular_values[k]).collect();
    let coords = |mat: &DMatrix<f64>, masses: &[f64], scale: bool| -> Vec<Vec<f64>> {
        (0..masses.len())
            .map(|i| {
                kept.iter()
                    .zip(&sigma)
                    .map(|(&k, &sv)| {
                        let x = mat[(i, k)] / masses[i].sqrt();
                        if scale {
                            x * sv
                        } else {
                            x
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let total_inertia: f64 = sigma.iter().map(|s| s * s).sum();
    let inertia_shares = sigma.iter().map(|s| s * s / total_inertia).collect();
    Ok(CaResult {
        row_labels: (0..table.n_rows()).map(|i| table.row_label(i)).collect(),
        column_labels: table.columns.clone(),
        row_standard: coords(&svd.u, &r, false),
        row_principal: coords(&svd.u, &r, true),
        column_standard: coords(&svd.v, &c, false),
        column_principal: coords(&svd.v, &c, true),
        row_masses: r,
        column_masses: c,
        singular_values: sigma,
        total_inertia,
        inertia_shares,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InertiaRow {
    /// 1-based.
    pub dimension: usize,
    pub singular_value: f64,
    pub inertia: f64,
    pub share: f64,
    pub cumulative: f64,
}

pub fn inertia_report(ca: &CaResult) -> Vec<InertiaRow> {
    let mut cumulative = 0.0;
    ca.singular_values
        .iter()
        .zip(&ca.inertia_shares)
        .enumerate()
        .map(|(k, (&sv, &share))| {
            cumulative += share;
            InertiaRow {
                dimension: k + 1,
                singular_value: sv,
                inertia: sv * sv,
                share,
                cumulative,
            }
        })
        .collect()
}

/// Tab-separated report; shares as percentages with two decimals.
pub fn inertia_report_tsv(rows: &[InertiaRow]) -> String {
    let mut out = String::from("dimension\tsingular_value\tinertia\tshare_pct\tcumulative_pct\n");
    if rows.is_empty() {
        out.push_str("# total inertia is zero: no association between rows and columns\n");
    }
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.2}\t{:.2}",
            r.dimension,
            r.singular_value,
            r.inertia,
            r.share * 100.0,
            r.cumulative * 100.0
        );
    }
    out
}
