//! Exports of a checkpoint: node table, full-state JSON, VTK slices and caloron-coordinate table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use caloron_core::geometry::{to_caloron_coords, ProductGrid};
use caloron_core::hymflow::{initial_metric, DiagRow, FlowDiagnostics, HermitianMetricField, RunnerState};
use caloron_core::instanton::{caloron_fields, connection_from_pair};
use caloron_core::matrixcore::{c, sigma_raw, ComplexMatrix};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, RunStatus};
use crate::config::RunConfig;
use crate::error::{io_err, CliError, Result};
use crate::run::write;

pub const JSON_FORMAT: &str = "caloron-state/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    /// `nodes.csv`: one row per node with coordinates and the entries of `H`.
    Csv,
    /// `state.json`: the whole checkpoint; [`import_json`] restores it exactly.
    Json,
    /// `slice_<ip>.vtk`: legacy structured grids over `(x, y, u)` per `phi` slice.
    Vtk,
    /// `caloron.csv`: `(theta, x)` with `Phi` and `A` magnitudes at nodes off the `w` faces.
    Caloron,
}

impl FromStr for ExportFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "vtk" => Ok(Self::Vtk),
            "caloron" => Ok(Self::Caloron),
            other => Err(CliError::UnknownFormat(other.into())),
        }
    }
}

/// Writes `ck` in `format` under `dir`; returns the files written.
pub fn export(ck: &Checkpoint, format: ExportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    match format {
        ExportFormat::Csv => one(dir.join("nodes.csv"), nodes_csv(&ck.state.field)?.as_bytes()),
        ExportFormat::Json => one(dir.join("state.json"), &serde_json::to_vec(&StateJson::from(ck))?),
        ExportFormat::Vtk => vtk_slices(ck, dir),
        ExportFormat::Caloron => one(dir.join("caloron.csv"), caloron_csv(ck)?.as_bytes()),
    }
}

fn one(path: PathBuf, bytes: &[u8]) -> Result<Vec<PathBuf>> {
    write(&path, bytes)?;
    Ok(vec![path])
}

fn nodes_csv(h: &HermitianMetricField) -> Result<String> {
    let g = h.grid();
    let n = h.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["ix", "iy", "iu", "iphi", "x", "y", "u", "phi"].map(String::from).to_vec();
    for r in 0..n {
        for col in 0..n {
            header.push(format!("h{r}{col}_re"));
            header.push(format!("h{r}{col}_im"));
        }
    }
    w.write_record(&header)?;
    for (k, m) in h.values().iter().enumerate() {
        let (ix, iy, iu, ip) = g.unindex(k);
        let mut rec = vec![ix.to_string(), iy.to_string(), iu.to_string(), ip.to_string()];
        rec.extend([g.x(ix), g.y(iy), g.u(iu), g.phi(ip)].map(|v| format!("{v:.17e}")));
        for z in m.as_slice() {
            rec.push(format!("{:.17e}", z.re));
            rec.push(format!("{:.17e}", z.im));
        }
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer flushes")).expect("csv of ascii"))
}

/// Full checkpoint contents; matrices are row-major `[re, im, re, im, ...]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub format: String,
    pub config_sha256: String,
    pub config: RunConfig,
    pub status: RunStatus,
    pub step: u64,
    pub increases: u32,
    pub field: FieldJson,
    pub snapshots: Vec<FieldJson>,
    pub diagnostics: Vec<RowJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldJson {
    pub t: f64,
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowJson {
    pub step: u64,
    pub t: f64,
    pub sup_b: f64,
    pub energy: f64,
    pub sigma_drift: Option<f64>,
    pub distance_ratio: f64,
}

impl From<&HermitianMetricField> for FieldJson {
    fn from(h: &HermitianMetricField) -> Self {
        Self {
            t: h.t,
            values: h.values().iter().map(|m| m.as_slice().iter().flat_map(|z| [z.re, z.im]).collect()).collect(),
        }
    }
}

impl FieldJson {
    fn to_field(&self, g: &ProductGrid) -> Result<HermitianMetricField> {
        let values = self
            .values
            .iter()
            .map(|v| {
                if v.len() % 2 != 0 {
                    return Err(CliError::Config("matrix entries must come in re, im pairs".into()));
                }
                let entries: Vec<_> = v.chunks(2).map(|p| c(p[0], p[1])).collect();
                Ok(ComplexMatrix::from_row_major(&entries)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HermitianMetricField::new(g.clone(), self.t, values)?)
    }
}

impl From<&Checkpoint> for StateJson {
    fn from(ck: &Checkpoint) -> Self {
        let s = &ck.state;
        Self {
            format: JSON_FORMAT.into(),
            config_sha256: ck.config.hash_hex(),
            config: ck.config.clone(),
            status: ck.status,
            step: s.step,
            increases: s.increases,
            field: (&s.field).into(),
            snapshots: s.snapshots.iter().map(FieldJson::from).collect(),
            diagnostics: s
                .diagnostics
                .rows
                .iter()
                .map(|r| RowJson {
                    step: r.step,
                    t: r.t,
                    sup_b: r.sup_b,
                    energy: r.energy,
                    sigma_drift: r.sigma_drift,
                    distance_ratio: r.distance_ratio,
                })
                .collect(),
        }
    }
}

impl StateJson {
    pub fn into_checkpoint(self) -> Result<Checkpoint> {
        if self.format != JSON_FORMAT {
            return Err(CliError::Config(format!("unsupported state format `{}`", self.format)));
        }
        self.config.validate()?;
        if self.config.hash_hex() != self.config_sha256 {
            return Err(CliError::Config("config_sha256 does not match the embedded config".into()));
        }
        let g = ProductGrid::new(self.config.grid.spec())?;
        let field = self.field.to_field(&g)?;
        field.validate()?;
        let snapshots = self.snapshots.iter().map(|f| f.to_field(&g)).collect::<Result<Vec<_>>>()?;
        let rows = self
            .diagnostics
            .iter()
            .map(|r| DiagRow {
                step: r.step,
                t: r.t,
                sup_b: r.sup_b,
                energy: r.energy,
                sigma_drift: r.sigma_drift,
                distance_ratio: r.distance_ratio,
            })
            .collect();
        Ok(Checkpoint {
            config: self.config,
            status: self.status,
            state: RunnerState {
                field,
                step: self.step,
                snapshots,
                increases: self.increases,
                diagnostics: FlowDiagnostics { rows },
            },
        })
    }
}

/// Reads a `state.json` export back into a checkpoint.
pub fn import_json(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice::<StateJson>(&bytes)?.into_checkpoint()
}

/// Named point-data column of a VTK slice.
type NodeScalar<'a> = (&'a str, Box<dyn Fn(usize) -> f64 + 'a>);

/// One file per `phi` slice; point data `trace_h`, `log_det_h` and `sigma_to_xi`.
fn vtk_slices(ck: &Checkpoint, dir: &Path) -> Result<Vec<PathBuf>> {
    let h = &ck.state.field;
    let g = h.grid();
    let s = *g.spec();
    let h_xi = initial_metric(&ck.config.xi0()?, g)?;
    let mut files = Vec::with_capacity(s.nphi);
    for ip in 0..s.nphi {
        let mut out = String::new();
        let n = s.nx * s.ny * s.nu;
        let _ = writeln!(out, "# vtk DataFile Version 3.0");
        let _ = writeln!(out, "metric at phi = {:.17e}, t = {:.17e}", g.phi(ip), h.t);
        let _ = writeln!(out, "ASCII\nDATASET STRUCTURED_GRID");
        let _ = writeln!(out, "DIMENSIONS {} {} {}", s.nx, s.ny, s.nu);
        let _ = writeln!(out, "POINTS {n} double");
        // VTK runs x fastest, then y, then u
        let order: Vec<usize> = (0..s.nu)
            .flat_map(|iu| (0..s.ny).flat_map(move |iy| (0..s.nx).map(move |ix| (ix, iy, iu))))
            .map(|(ix, iy, iu)| g.index(ix, iy, iu, ip))
            .collect();
        for &k in &order {
            let (ix, iy, iu, _) = g.unindex(k);
            let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", g.x(ix), g.y(iy), g.u(iu));
        }
        let _ = writeln!(out, "POINT_DATA {n}");
        let scalars: [NodeScalar; 3] = [
            ("trace_h", Box::new(|k| h.values()[k].trace().re)),
            ("log_det_h", Box::new(|k| log_det(&h.values()[k]))),
            ("sigma_to_xi", Box::new(|k| sigma_raw(&h.values()[k], &h_xi.values()[k]))),
        ];
        for (name, f) in &scalars {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for &k in &order {
                let _ = writeln!(out, "{:.17e}", f(k));
            }
        }
        let path = dir.join(format!("slice_{ip:03}.vtk"));
        write(&path, out.as_bytes())?;
        files.push(path);
    }
    Ok(files)
}

/// `ln det H` from the Cholesky diagonal.
fn log_det(m: &ComplexMatrix) -> f64 {
    match caloron_core::matrixcore::cholesky(m) {
        Ok(l) => 2.0 * l.diag().iter().map(|d| d.re.ln()).sum::<f64>(),
        Err(_) => f64::NAN,
    }
}

fn caloron_csv(ck: &Checkpoint) -> Result<String> {
    let cfg = &ck.config;
    let e = cfg.eta()?;
    let a = connection_from_pair(&ck.state.field, &e)?;
    let xi0 = cfg.xi0()?.mode(0);
    let smp = caloron_fields(&a, &xi0, cfg.input.mu, None)?;
    let tr_xi = (&xi0 * &xi0).trace();
    let g = a.grid();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "node",
        "abs_z",
        "theta",
        "x1",
        "x2",
        "x3",
        "r",
        "phi_minus_xi0",
        "tr_phi2_minus_tr_xi02",
        "abs_a",
    ])?;
    for (i, &k) in smp.nodes.iter().enumerate() {
        let (ix, iy, iu, ip) = g.unindex(k);
        let p = to_caloron_coords(g.w(ix, iy), g.z(iu, ip), cfg.input.mu)?;
        let phi = &smp.phi[i];
        let abs_a = smp.a[i].iter().map(|m| m.frobenius_norm().powi(2)).sum::<f64>().sqrt();
        let vals = [
            g.z(iu, ip).norm(),
            p.theta,
            p.x[0],
            p.x[1],
            p.x[2],
            smp.radius(i),
            (phi - &xi0).frobenius_norm(),
            ((phi * phi).trace() - tr_xi).norm(),
            abs_a,
        ];
        let mut rec = vec![k.to_string()];
        rec.extend(vals.iter().map(|v| format!("{v:.17e}")));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer flushes")).expect("csv of ascii"))
}
