//! JSON ingestion of matrices and composite models, and CSV output.
//!
//! Matrices use `{"dim": n, "re": [[...]], "im": [[...]]}`; a model is
//! `{"dimS", "dimR", "H_S", "H_R", "V"}` with matrix values. Writers emit
//! 17 significant digits.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianOperator};
use crate::thermo::CompositeModel;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixJson {
    pub fn to_operator(&self, field: &str) -> Result<HermitianOperator> {
        let n = self.dim;
        let check = |part: &str, rows: &Vec<Vec<f64>>| -> Result<()> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Model(format!("{field}.{part}: expected {n}x{n} entries")));
            }
            Ok(())
        };
        check("re", &self.re)?;
        if let Some(im) = &self.im {
            check("im", im)?;
        }
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |im| im[i][j]);
            Complex64::new(self.re[i][j], im)
        });
        HermitianOperator::new(m).map_err(|e| Error::Model(format!("{field}: {e}")))
    }

    pub fn from_operator(op: &HermitianOperator) -> Self {
        let m = op.matrix();
        let n = op.dim();
        Self {
            dim: n,
            re: (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect(),
            im: Some((0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect()),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    #[serde(rename = "dimS")]
    pub dim_s: usize,
    #[serde(rename = "dimR")]
    pub dim_r: usize,
    #[serde(rename = "H_S")]
    pub h_s: MatrixJson,
    #[serde(rename = "H_R")]
    pub h_r: MatrixJson,
    #[serde(rename = "V")]
    pub v: MatrixJson,
}

impl ModelJson {
    pub fn to_model(&self) -> Result<CompositeModel> {
        let expect = |field: &str, m: &MatrixJson, d: usize| -> Result<()> {
            if m.dim != d {
                return Err(Error::Model(format!("{field}.dim: expected {d}, got {}", m.dim)));
            }
            Ok(())
        };
        expect("H_S", &self.h_s, self.dim_s)?;
        expect("H_R", &self.h_r, self.dim_r)?;
        expect("V", &self.v, self.dim_s * self.dim_r)?;
        CompositeModel::new(
            self.h_s.to_operator("H_S")?,
            self.h_r.to_operator("H_R")?,
            self.v.to_operator("V")?,
        )
    }

    pub fn from_model(model: &CompositeModel) -> Self {
        Self {
            dim_s: model.dim_s,
            dim_r: model.dim_r,
            h_s: MatrixJson::from_operator(&model.h_s),
            h_r: MatrixJson::from_operator(&model.h_r),
            v: MatrixJson::from_operator(&model.v),
        }
    }
}

/// Parses a model, reporting the JSON path of the first malformed field.
pub fn parse_model(text: &str) -> Result<CompositeModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let parsed: ModelJson = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Model(format!("at {path}: {}", e.into_inner()))
    })?;
    parsed.to_model()
}

pub fn parse_matrix(text: &str) -> Result<HermitianOperator> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let parsed: MatrixJson = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Model(format!("at {path}: {}", e.into_inner()))
    })?;
    parsed.to_operator("matrix")
}

/// 17 significant digits; non-finite values as `NaN`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_rows(out: &mut String, rows: &[Vec<f64>], indent: &str) {
    out.push('[');
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('\n');
        out.push_str(indent);
        out.push('[');
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        out.push_str(&cells.join(", "));
        out.push(']');
    }
    out.push(']');
}

fn matrix_json_text(m: &MatrixJson, indent: &str) -> String {
    let inner = format!("{indent}  ");
    let mut out = format!("{{\n{inner}\"dim\": {},\n{inner}\"re\": ", m.dim);
    write_rows(&mut out, &m.re, &format!("{inner}  "));
    if let Some(im) = &m.im {
        out.push_str(&format!(",\n{inner}\"im\": "));
        write_rows(&mut out, im, &format!("{inner}  "));
    }
    out.push_str(&format!("\n{indent}}}"));
    out
}

pub fn write_matrix_json(op: &HermitianOperator) -> String {
    matrix_json_text(&MatrixJson::from_operator(op), "")
}

pub fn write_model_json(model: &CompositeModel) -> String {
    let m = ModelJson::from_model(model);
    format!(
        "{{\n  \"dimS\": {},\n  \"dimR\": {},\n  \"H_S\": {},\n  \"H_R\": {},\n  \"V\": {}\n}}\n",
        m.dim_s,
        m.dim_r,
        matrix_json_text(&m.h_s, "  "),
        matrix_json_text(&m.h_r, "  "),
        matrix_json_text(&m.v, "  ")
    )
}

/// Writes a `#`-prefixed JSON parameter line, then a header row.
pub fn write_csv_preamble<W: Write>(out: &mut W, params: &serde_json::Value, columns: &[&str]) -> std::io::Result<()> {
    writeln!(out, "# {params}")?;
    writeln!(out, "{}", columns.join(","))
}

pub fn write_csv_row<W: Write>(out: &mut W, values: &[f64]) -> std::io::Result<()> {
    let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
    writeln!(out, "{}", cells.join(","))
}
