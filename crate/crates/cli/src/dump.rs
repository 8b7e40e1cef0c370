//! Bulk grid dumps (CSV) and their JSON manifests.
//!
//! A frame dump is `<stem>.csv` with columns `z_re, z_im` followed by
//! `c{k}_{i}{j}_re, c{k}_{i}{j}_im` for `k = -N..=N`, one row per grid node in
//! row-major order (`x` fastest). Flagged nodes keep their row with empty
//! coefficient cells. `<stem>.json` holds the grid, model, `N`, base point
//! and flagged points.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use dpwkit::grid::{GridField, RectGrid};
use dpwkit::linalg::{c, CMatrix};
use dpwkit::loopcore::json::MatrixJson;
use dpwkit::loopcore::{GroupModel, MatrixLoop, Parity, RealForm};
use dpwkit::pipeline::{ExtendedFrameField, FlaggedPoint};

use crate::config::SCHEMA_VERSION;
use crate::error::CliError;

const Z_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_form: Option<RealForm>,
    pub twist: MatrixJson,
    pub star: MatrixJson,
    pub cartan: MatrixJson,
}

impl From<&GroupModel> for ModelJson {
    fn from(m: &GroupModel) -> Self {
        Self {
            real_form: m.real_form(),
            twist: m.sigma().matrix().into(),
            star: m.tau().matrix().into(),
            cartan: m.theta().matrix().into(),
        }
    }
}

impl ModelJson {
    pub fn to_model(&self) -> Result<GroupModel, CliError> {
        let m = GroupModel::new(self.twist.to_matrix()?, self.star.to_matrix()?, self.cartan.to_matrix()?)?;
        Ok(m.with_real_form(self.real_form))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameManifest {
    pub schema_version: u32,
    pub kind: String,
    pub data: String,
    pub grid: RectGrid,
    pub model: ModelJson,
    pub n: usize,
    #[serde(rename = "N")]
    pub bound: usize,
    pub basepoint: [f64; 2],
    pub flagged: Vec<FlaggedPoint>,
}

/// Serialized files, written together once a command has finished.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut s = serde_json::to_string_pretty(value).expect("serializable output");
        s.push('\n');
        self.add(name, s);
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, &e))?;
        for (name, content) in &self.files {
            let path = dir.join(name);
            fs::write(&path, content).map_err(|e| CliError::io(&path, &e))?;
        }
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn matrix_header(prefix: &str, n: usize, out: &mut Vec<String>) {
    for i in 0..n {
        for j in 0..n {
            out.push(format!("{prefix}_{i}{j}_re"));
            out.push(format!("{prefix}_{i}{j}_im"));
        }
    }
}

fn push_matrix(m: &CMatrix, out: &mut Vec<String>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(fmt(m[(i, j)].re));
            out.push(fmt(m[(i, j)].im));
        }
    }
}

fn to_csv(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn z_cells(z: Complex64) -> Vec<String> {
    vec![fmt(z.re), fmt(z.im)]
}

pub fn loop_field_csv(field: &GridField<MatrixLoop>, n: usize, bound: usize) -> String {
    let mut header = vec!["z_re".to_string(), "z_im".to_string()];
    let b = bound as i32;
    for k in -b..=b {
        matrix_header(&format!("c{k}"), n, &mut header);
    }
    let width = header.len();
    let rows = (0..field.grid.len())
        .map(|idx| {
            let mut row = z_cells(field.grid.point_at(idx));
            match &field.values[idx] {
                Some(g) => {
                    for k in -b..=b {
                        push_matrix(&g.coeff_or_zero(k), &mut row);
                    }
                }
                None => row.resize(width, String::new()),
            }
            row
        })
        .collect();
    to_csv(header, rows)
}

pub fn matrix_field_csv(field: &GridField<CMatrix>, n: usize, prefix: &str) -> String {
    let mut header = vec!["z_re".to_string(), "z_im".to_string()];
    matrix_header(prefix, n, &mut header);
    let width = header.len();
    let rows = (0..field.grid.len())
        .map(|idx| {
            let mut row = z_cells(field.grid.point_at(idx));
            match &field.values[idx] {
                Some(m) => push_matrix(m, &mut row),
                None => row.resize(width, String::new()),
            }
            row
        })
        .collect();
    to_csv(header, rows)
}

/// Several matrix fields on one grid side by side, column prefixes
/// `{prefix}{index}`.
pub fn matrix_fields_csv(fields: &[GridField<CMatrix>], n: usize, prefix: &str) -> String {
    let grid = fields.first().map(|f| f.grid);
    let mut header = vec!["z_re".to_string(), "z_im".to_string()];
    for l in 0..fields.len() {
        matrix_header(&format!("{prefix}{l}"), n, &mut header);
    }
    let Some(grid) = grid else {
        return to_csv(header, Vec::new());
    };
    let rows = (0..grid.len())
        .map(|idx| {
            let mut row = z_cells(grid.point_at(idx));
            for f in fields {
                match &f.values[idx] {
                    Some(m) => push_matrix(m, &mut row),
                    None => row.extend(std::iter::repeat_n(String::new(), 2 * n * n)),
                }
            }
            row
        })
        .collect();
    to_csv(header, rows)
}

/// Adds `<stem>.csv` and `<stem>.json` for a frame field.
pub fn add_frame_dump(out: &mut Outputs, stem: &str, frame: &ExtendedFrameField) {
    let n = frame.model.size();
    out.add(&format!("{stem}.csv"), loop_field_csv(&frame.values, n, frame.bound));
    let manifest = FrameManifest {
        schema_version: SCHEMA_VERSION,
        kind: "extended_frame".into(),
        data: format!("{stem}.csv"),
        grid: frame.grid(),
        model: (&frame.model).into(),
        n,
        bound: frame.bound,
        basepoint: [frame.basepoint.re, frame.basepoint.im],
        flagged: frame.flagged.clone(),
    };
    out.add_json(&format!("{stem}.json"), &manifest);
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, &e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::json(&e, Some(path)))
}

/// Loads a frame dump from its manifest.
pub fn load_frame_dump(manifest_path: &Path) -> Result<ExtendedFrameField, CliError> {
    let m: FrameManifest = read_json(manifest_path)?;
    let schema = |msg: String| CliError::schema(msg).in_file(manifest_path);
    if m.schema_version != SCHEMA_VERSION {
        return Err(schema(format!("unsupported schema_version {}", m.schema_version)));
    }
    if m.kind != "extended_frame" {
        return Err(schema(format!("expected an extended_frame manifest, found `{}`", m.kind)));
    }
    m.grid.validate().map_err(|e| CliError::from(e).in_file(manifest_path))?;
    let model = m.model.to_model().map_err(|e| e.in_file(manifest_path))?;
    if model.size() != m.n {
        return Err(schema(format!("model is {}x{} but n = {}", model.size(), model.size(), m.n)));
    }
    let data_path: PathBuf = manifest_path.parent().unwrap_or(Path::new(".")).join(&m.data);
    let values = read_loop_csv(&data_path, &m)?;
    let mut frame = ExtendedFrameField::new(
        GridField::new(m.grid, values),
        c(m.basepoint[0], m.basepoint[1]),
        model,
        m.bound,
    );
    frame.flagged = m.flagged;
    Ok(frame)
}

fn read_loop_csv(path: &Path, m: &FrameManifest) -> Result<Vec<Option<MatrixLoop>>, CliError> {
    let text = read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let n = m.n;
    let b = m.bound as i32;
    let width = 2 + 2 * n * n * (2 * m.bound + 1);
    let headers = reader
        .headers()
        .map_err(|e| CliError::schema(e.to_string()).in_file(path))?
        .clone();
    if headers.len() != width {
        return Err(CliError::schema(format!("expected {width} columns, found {}", headers.len())).in_file(path));
    }
    let mut values = Vec::with_capacity(m.grid.len());
    for (idx, rec) in reader.records().enumerate() {
        let row_loc = |msg: String| CliError::schema(msg).at(json!({ "file": path.display().to_string(), "row": idx + 1 }));
        let rec = rec.map_err(|e| row_loc(e.to_string()))?;
        if idx >= m.grid.len() {
            return Err(row_loc(format!("more rows than the {} grid nodes", m.grid.len())));
        }
        let num = |j: usize| -> Result<f64, CliError> {
            rec[j]
                .parse::<f64>()
                .map_err(|_| row_loc(format!("column {} is not a number", &headers[j])))
        };
        let z = c(num(0)?, num(1)?);
        if (z - m.grid.point_at(idx)).norm() > Z_TOL {
            return Err(row_loc(format!("node {z} does not match the grid")));
        }
        if rec.iter().skip(2).all(str::is_empty) {
            values.push(None);
            continue;
        }
        let mut coeffs = Vec::with_capacity(2 * m.bound + 1);
        let mut col = 2;
        for k in -b..=b {
            let mut mat = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    mat[(i, j)] = c(num(col)?, num(col + 1)?);
                    col += 2;
                }
            }
            coeffs.push((k, mat));
        }
        values.push(Some(MatrixLoop::from_modes(n, m.bound, coeffs)?.with_parity(Parity::Group)));
    }
    if values.len() != m.grid.len() {
        return Err(CliError::schema(format!("expected {} rows, found {}", m.grid.len(), values.len())).in_file(path));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dpwkit::linalg::real_matrix;

    #[test]
    fn frame_dump_round_trips_exactly() {
        let grid = RectGrid::square(0.5, 3).unwrap();
        let model = GroupModel::rank_one(RealForm::Indefinite);
        let values = (0..grid.len())
            .map(|i| {
                (i != 4).then(|| {
                    MatrixLoop::from_modes(
                        2,
                        2,
                        [
                            (0, dpwkit::linalg::identity(2)),
                            (-1, real_matrix(&[&[0.0, 0.1 * i as f64], &[1.0 / 3.0, 0.0]])),
                        ],
                    )
                    .unwrap()
                    .with_parity(Parity::Group)
                })
            })
            .collect();
        let frame = ExtendedFrameField::new(GridField::new(grid, values), c(0.0, 0.0), model, 2);
        let mut out = Outputs::default();
        add_frame_dump(&mut out, "frames", &frame);
        let dir = std::env::temp_dir().join(format!("dpwkit-dump-{}", std::process::id()));
        out.write(&dir).unwrap();
        let back = load_frame_dump(&dir.join("frames.json")).unwrap();
        assert_eq!(back.values.values, frame.values.values);
        assert_eq!(back.model, frame.model);
        fs::remove_dir_all(dir).ok();
    }
}
