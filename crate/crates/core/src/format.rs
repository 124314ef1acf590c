//! Versioned plain-text model files.
//!
//! ```toml
//! format = "redar-model"
//! version = 1
//! kind = "closed-loop"          # or "identified"
//!
//! [dims]
//! n_x = 2
//! n_u = 1
//! n_y = 1
//! n_s = 2
//!
//! [plant]
//! a = [[0.5, 0.1], [0.0, 0.3]]
//! # b, c, k, psi
//!
//! [controller]
//! # af, b1f, b2f, cf, d1f, d2f
//! ```
//!
//! Identified models use `kind = "identified"`, `[dims]` with `order`, `n_u`,
//! `n_y` and a `[model]` table holding `ahat`, `bhat`, `chat`, `dhat`, `khat`.
//! Matrices are arrays of rows. Numbers are written in shortest round-trip
//! form, so save followed by load reproduces every entry bit for bit.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::models::{ClosedLoop, Controller, InnovationModel};
use crate::realization::IdentifiedModel;

pub const FORMAT_TAG: &str = "redar-model";
pub const FORMAT_VERSION: i64 = 1;

#[derive(Debug, Clone)]
pub enum ModelFile {
    ClosedLoop(Box<ClosedLoop>),
    Identified(IdentifiedModel),
}

type Rows = Spanned<Vec<Vec<f64>>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: Spanned<String>,
    version: Spanned<i64>,
    kind: Spanned<String>,
    dims: Spanned<toml::Table>,
    plant: Option<toml::Value>,
    controller: Option<toml::Value>,
    model: Option<toml::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoopDims {
    n_x: usize,
    n_u: usize,
    n_y: usize,
    n_s: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantRows {
    a: Rows,
    b: Rows,
    c: Rows,
    k: Rows,
    psi: Rows,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerRows {
    af: Rows,
    b1f: Rows,
    b2f: Rows,
    cf: Rows,
    d1f: Rows,
    d2f: Rows,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentifiedDims {
    order: usize,
    n_u: usize,
    n_y: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentifiedRows {
    ahat: Rows,
    bhat: Rows,
    chat: Rows,
    dhat: Rows,
    khat: Rows,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn schema(src: &str, span: Option<Range<usize>>, message: impl Into<String>) -> Error {
    Error::Schema {
        line: span.map_or(0, |s| line_of(src, s.start)),
        message: message.into(),
    }
}

fn from_toml_err(src: &str, e: toml::de::Error) -> Error {
    schema(src, e.span(), e.message().to_string())
}

/// Locates the header line of a `[table]` for errors inside that table.
fn table_line(src: &str, name: &str) -> usize {
    let header = format!("[{name}]");
    src.lines()
        .position(|l| l.trim() == header)
        .map_or(0, |i| i + 1)
}

fn section<T: serde::de::DeserializeOwned>(
    src: &str,
    value: Option<toml::Value>,
    name: &str,
) -> Result<T> {
    if value.is_none() {
        return Err(Error::Schema {
            line: 0,
            message: format!("missing [{name}] table"),
        });
    }
    let table_src = extract_table(src, name);
    toml::from_str(&table_src.text).map_err(|e| {
        let line = e.span().map_or(table_src.first_line, |s| {
            table_src.first_line + line_of(&table_src.text, s.start) - 1
        });
        Error::Schema {
            line,
            message: format!("[{name}]: {}", e.message()),
        }
    })
}

struct TableText {
    text: String,
    /// File line corresponding to the first line of `text`.
    first_line: usize,
}

fn extract_table(src: &str, name: &str) -> TableText {
    let start = table_line(src, name);
    let mut text = String::new();
    for line in src.lines().skip(start) {
        if line.trim_start().starts_with('[')
            && !line.trim_start().starts_with("[[")
            && line.trim_end().ends_with(']')
            && !line.contains('=')
        {
            break;
        }
        text.push_str(line);
        text.push('\n');
    }
    TableText {
        text,
        first_line: start + 1,
    }
}

fn matrix(
    src: &str,
    first_line: usize,
    name: &str,
    rows: &Rows,
    shape: (usize, usize),
) -> Result<DMatrix<f64>> {
    let data = rows.get_ref();
    let line = first_line + line_of(src, rows.span().start) - 1;
    let (r, c) = shape;
    let err = |msg: String| Error::Schema { line, message: msg };
    if r == 0 {
        if !data.is_empty() {
            return Err(err(format!(
                "{name}: expected 0 rows, found {}",
                data.len()
            )));
        }
        return Ok(DMatrix::zeros(0, c));
    }
    if data.len() != r {
        return Err(err(format!(
            "{name}: expected {r} rows, found {}",
            data.len()
        )));
    }
    let mut m = DMatrix::zeros(r, c);
    for (i, row) in data.iter().enumerate() {
        if row.len() != c {
            return Err(err(format!(
                "{name}: row {} has {} entries, expected {c}",
                i + 1,
                row.len()
            )));
        }
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(err(format!(
                    "{name}: entry ({}, {}) is not finite",
                    i + 1,
                    j + 1
                )));
            }
            m[(i, j)] = x;
        }
    }
    Ok(m)
}

/// Parses either model kind.
pub fn parse_model(src: &str) -> Result<ModelFile> {
    let header: Header = toml::from_str(src).map_err(|e| from_toml_err(src, e))?;
    if header.format.get_ref() != FORMAT_TAG {
        return Err(schema(
            src,
            Some(header.format.span()),
            format!(
                "format must be \"{FORMAT_TAG}\", found \"{}\"",
                header.format.get_ref()
            ),
        ));
    }
    if *header.version.get_ref() != FORMAT_VERSION {
        return Err(schema(
            src,
            Some(header.version.span()),
            format!("unsupported version {}", header.version.get_ref()),
        ));
    }
    let dims_line = table_line(src, "dims");
    let dims_value = toml::Value::Table(header.dims.get_ref().clone());
    match header.kind.get_ref().as_str() {
        "closed-loop" => {
            let dims: LoopDims =
                dims_value
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::Schema {
                        line: dims_line,
                        message: format!("[dims]: {}", e.message()),
                    })?;
            let plant_text = extract_table(src, "plant");
            let pr: PlantRows = section(src, header.plant, "plant")?;
            let (n_x, n_u, n_y, n_s) = (dims.n_x, dims.n_u, dims.n_y, dims.n_s);
            let mp = |name: &str, rows: &Rows, shape| {
                matrix(&plant_text.text, plant_text.first_line, name, rows, shape)
            };
            let plant = InnovationModel::new(
                mp("a", &pr.a, (n_x, n_x))?,
                mp("b", &pr.b, (n_x, n_u))?,
                mp("c", &pr.c, (n_y, n_x))?,
                mp("k", &pr.k, (n_x, n_y))?,
                mp("psi", &pr.psi, (n_y, n_y))?,
            )
            .map_err(|e| Error::Schema {
                line: plant_text.first_line - 1,
                message: format!("[plant]: {e}"),
            })?;
            let ctrl_text = extract_table(src, "controller");
            let cr: ControllerRows = section(src, header.controller, "controller")?;
            let mc = |name: &str, rows: &Rows, shape| {
                matrix(&ctrl_text.text, ctrl_text.first_line, name, rows, shape)
            };
            let controller = Controller::new(
                mc("af", &cr.af, (n_s, n_s))?,
                mc("b1f", &cr.b1f, (n_s, n_y))?,
                mc("b2f", &cr.b2f, (n_s, n_u))?,
                mc("cf", &cr.cf, (n_u, n_s))?,
                mc("d1f", &cr.d1f, (n_u, n_y))?,
                mc("d2f", &cr.d2f, (n_u, n_u))?,
            )
            .map_err(|e| Error::Schema {
                line: ctrl_text.first_line - 1,
                message: format!("[controller]: {e}"),
            })?;
            Ok(ModelFile::ClosedLoop(Box::new(ClosedLoop::assemble(
                plant, controller,
            )?)))
        }
        "identified" => {
            let dims: IdentifiedDims =
                dims_value
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::Schema {
                        line: dims_line,
                        message: format!("[dims]: {}", e.message()),
                    })?;
            let text = extract_table(src, "model");
            let rows: IdentifiedRows = section(src, header.model, "model")?;
            let (n, n_u, n_y) = (dims.order, dims.n_u, dims.n_y);
            let mm =
                |name: &str, r: &Rows, shape| matrix(&text.text, text.first_line, name, r, shape);
            let model = IdentifiedModel::new(
                mm("ahat", &rows.ahat, (n, n))?,
                mm("bhat", &rows.bhat, (n, n_u))?,
                mm("chat", &rows.chat, (n_y, n))?,
                mm("dhat", &rows.dhat, (n_y, n_u))?,
                mm("khat", &rows.khat, (n, n_y))?,
            )?;
            Ok(ModelFile::Identified(model))
        }
        other => Err(schema(
            src,
            Some(header.kind.span()),
            format!("unknown kind \"{other}\""),
        )),
    }
}

pub fn parse_closed_loop(src: &str) -> Result<ClosedLoop> {
    match parse_model(src)? {
        ModelFile::ClosedLoop(cl) => Ok(*cl),
        ModelFile::Identified(_) => Err(Error::Schema {
            line: 0,
            message: "expected a closed-loop model, found an identified model".into(),
        }),
    }
}

pub fn parse_identified(src: &str) -> Result<IdentifiedModel> {
    match parse_model(src)? {
        ModelFile::Identified(m) => Ok(m),
        ModelFile::ClosedLoop(_) => Err(Error::Schema {
            line: 0,
            message: "expected an identified model, found a closed-loop model".into(),
        }),
    }
}

pub fn load_closed_loop(path: impl AsRef<Path>) -> Result<ClosedLoop> {
    parse_closed_loop(&std::fs::read_to_string(path)?)
}

pub fn load_identified(path: impl AsRef<Path>) -> Result<IdentifiedModel> {
    parse_identified(&std::fs::read_to_string(path)?)
}

fn write_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = write!(out, "{name} = [");
    for i in 0..m.nrows() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('[');
        for j in 0..m.ncols() {
            if j > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{:?}", m[(i, j)]);
        }
        out.push(']');
    }
    out.push_str("]\n");
}

fn preamble(kind: &str) -> String {
    format!("format = \"{FORMAT_TAG}\"\nversion = {FORMAT_VERSION}\nkind = \"{kind}\"\n\n")
}

pub fn write_closed_loop(cl: &ClosedLoop) -> String {
    let (plant, ctrl) = (&cl.plant, &cl.controller);
    let mut out = preamble("closed-loop");
    let _ = writeln!(
        out,
        "[dims]\nn_x = {}\nn_u = {}\nn_y = {}\nn_s = {}\n",
        plant.n_x(),
        plant.n_u(),
        plant.n_y(),
        ctrl.n_s()
    );
    out.push_str("[plant]\n");
    for (name, m) in [
        ("a", &plant.a),
        ("b", &plant.b),
        ("c", &plant.c),
        ("k", &plant.k),
        ("psi", &plant.psi),
    ] {
        write_matrix(&mut out, name, m);
    }
    out.push_str("\n[controller]\n");
    for (name, m) in [
        ("af", &ctrl.af),
        ("b1f", &ctrl.b1f),
        ("b2f", &ctrl.b2f),
        ("cf", &ctrl.cf),
        ("d1f", &ctrl.d1f),
        ("d2f", &ctrl.d2f),
    ] {
        write_matrix(&mut out, name, m);
    }
    out
}

pub fn write_identified(m: &IdentifiedModel) -> String {
    let mut out = preamble("identified");
    let _ = writeln!(
        out,
        "[dims]\norder = {}\nn_u = {}\nn_y = {}\n",
        m.order(),
        m.n_u(),
        m.n_y()
    );
    out.push_str("[model]\n");
    for (name, x) in [
        ("ahat", &m.ahat),
        ("bhat", &m.bhat),
        ("chat", &m.chat),
        ("dhat", &m.dhat),
        ("khat", &m.khat),
    ] {
        write_matrix(&mut out, name, x);
    }
    out
}

pub fn save_closed_loop(cl: &ClosedLoop, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_closed_loop(cl))?;
    Ok(())
}

pub fn save_identified(m: &IdentifiedModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_identified(m))?;
    Ok(())
}
