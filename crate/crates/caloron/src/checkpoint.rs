//! Binary checkpoints: a run continues from one bit-identically.
//!
//! Layout (little endian): magic `CALCKPT1`, config SHA-256 (32 bytes), config JSON
//! (u64 length + bytes), status (u8), grid spec (4 x u64, 3 x f64), dim (u64), step (u64),
//! increases (u32), field, snapshot count (u64) + snapshots, row count (u64) + rows,
//! then the SHA-256 of all preceding bytes.
//! A field is `t` (f64) followed by `re, im` pairs of each node's matrix in row-major order.
//! A row is step (u64), t, sup_b, energy (f64), drift flag (u8), drift (f64), distance ratio (f64).

use std::path::{Path, PathBuf};

use caloron_core::geometry::{GridSpec, ProductGrid};
use caloron_core::hymflow::{DiagRow, FlowDiagnostics, FlowStatus, HermitianMetricField, RunnerState};
use caloron_core::matrixcore::{c, ComplexMatrix};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{io_err, CliError, Result};

pub const MAGIC: &[u8; 8] = b"CALCKPT1";
pub const FILE_NAME: &str = "checkpoint.bin";

/// Where a run stands when a checkpoint is written.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Converged,
    TimeLimit,
    /// Stopped by the divergence monitor.
    Diverged,
}

impl RunStatus {
    fn code(self) -> u8 {
        match self {
            RunStatus::Running => 0,
            RunStatus::Converged => 1,
            RunStatus::TimeLimit => 2,
            RunStatus::Diverged => 3,
        }
    }

    fn from_code(b: u8) -> Option<Self> {
        [RunStatus::Running, RunStatus::Converged, RunStatus::TimeLimit, RunStatus::Diverged].get(b as usize).copied()
    }

    pub fn is_finished(self) -> bool {
        self != RunStatus::Running
    }
}

impl From<FlowStatus> for RunStatus {
    fn from(s: FlowStatus) -> Self {
        match s {
            FlowStatus::Running => RunStatus::Running,
            FlowStatus::Converged => RunStatus::Converged,
            FlowStatus::TimeLimit => RunStatus::TimeLimit,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub status: RunStatus,
    pub state: RunnerState,
}

impl Checkpoint {
    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join(FILE_NAME)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&self.config.hash());
        let json = serde_json::to_vec(&self.config).expect("config serializes");
        w.u64(json.len() as u64);
        w.0.extend_from_slice(&json);
        w.0.push(self.status.code());
        let field = &self.state.field;
        let s = field.grid().spec();
        for n in [s.nx, s.ny, s.nu, s.nphi] {
            w.u64(n as u64);
        }
        for x in [s.r_w, s.eps, s.delta] {
            w.f64(x);
        }
        w.u64(field.dim() as u64);
        w.u64(self.state.step);
        w.0.extend_from_slice(&self.state.increases.to_le_bytes());
        w.field(field);
        w.u64(self.state.snapshots.len() as u64);
        for f in &self.state.snapshots {
            w.field(f);
        }
        let rows = &self.state.diagnostics.rows;
        w.u64(rows.len() as u64);
        for r in rows {
            w.u64(r.step);
            w.f64(r.t);
            w.f64(r.sup_b);
            w.f64(r.energy);
            w.0.push(r.sigma_drift.is_some() as u8);
            w.f64(r.sigma_drift.unwrap_or(0.0));
            w.f64(r.distance_ratio);
        }
        let digest = Sha256::digest(&w.0);
        w.0.extend_from_slice(&digest);
        w.0
    }

    /// Parses and checks magic, trailer digest, config hash and field validity.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |reason: &str| CliError::Checkpoint { path: path.to_path_buf(), reason: reason.to_string() };
        if bytes.len() < MAGIC.len() + 64 || &bytes[..8] != MAGIC {
            return Err(fail("not a checkpoint (bad magic)"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != trailer {
            return Err(fail("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 8 };
        let parse = |r: &mut Reader| -> Option<Checkpoint> {
            let hash: [u8; 32] = r.take(32)?.try_into().ok()?;
            let n = r.u64()? as usize;
            let config: RunConfig = serde_json::from_slice(r.take(n)?).ok()?;
            if config.hash() != hash {
                return None;
            }
            let status = RunStatus::from_code(r.u8()?)?;
            let mut dims = [0usize; 4];
            for d in &mut dims {
                *d = r.u64()? as usize;
            }
            let spec = GridSpec {
                nx: dims[0],
                ny: dims[1],
                nu: dims[2],
                nphi: dims[3],
                r_w: r.f64()?,
                eps: r.f64()?,
                delta: r.f64()?,
            };
            let grid = ProductGrid::new(spec).ok()?;
            let dim = r.u64()? as usize;
            let step = r.u64()?;
            let increases = u32::from_le_bytes(r.take(4)?.try_into().ok()?);
            let field = r.field(&grid, dim)?;
            let snaps = r.u64()? as usize;
            let snapshots = (0..snaps).map(|_| r.field(&grid, dim)).collect::<Option<Vec<_>>>()?;
            let nrows = r.u64()? as usize;
            let mut rows = Vec::with_capacity(nrows.min(1 << 20));
            for _ in 0..nrows {
                let step = r.u64()?;
                let (t, sup_b, energy) = (r.f64()?, r.f64()?, r.f64()?);
                let has = r.u8()?;
                let drift = r.f64()?;
                rows.push(DiagRow {
                    step,
                    t,
                    sup_b,
                    energy,
                    sigma_drift: (has == 1).then_some(drift),
                    distance_ratio: r.f64()?,
                });
            }
            (r.pos == r.buf.len()).then_some(())?;
            Some(Checkpoint {
                config,
                status,
                state: RunnerState { field, step, snapshots, increases, diagnostics: FlowDiagnostics { rows } },
            })
        };
        let ck = parse(&mut r).ok_or_else(|| fail("truncated or inconsistent contents"))?;
        ck.state.field.validate().map_err(|e| fail(&e.to_string()))?;
        Ok(ck)
    }

    /// Writes to a temporary sibling, then renames, so a crash never leaves a torn file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("bin.tmp");
        std::fs::write(&tmp, self.encode()).map_err(io_err(&tmp))?;
        std::fs::rename(&tmp, path).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::decode(&bytes, path)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn field(&mut self, f: &HermitianMetricField) {
        self.f64(f.t);
        for m in f.values() {
            for z in m.as_slice() {
                self.f64(z.re);
                self.f64(z.im);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn field(&mut self, grid: &ProductGrid, dim: usize) -> Option<HermitianMetricField> {
        let t = self.f64()?;
        // bound the allocation by what the buffer can actually hold
        let need = grid.len().checked_mul(dim * dim * 16)?;
        if self.buf.len() - self.pos < need {
            return None;
        }
        let mut values = Vec::with_capacity(grid.len());
        let mut entries = Vec::with_capacity(dim * dim);
        for _ in 0..grid.len() {
            entries.clear();
            for _ in 0..dim * dim {
                entries.push(c(self.f64()?, self.f64()?));
            }
            values.push(ComplexMatrix::from_row_major(&entries).ok()?);
        }
        HermitianMetricField::new(grid.clone(), t, values).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use caloron_core::hymflow::{initial_metric, FlowRunner};

    fn sample() -> Checkpoint {
        let config = RunConfig::from_toml(
            "[input]\nkind = \"blip\"\nv = [\"1\", \"W\"]\nphases = [0.0, 0.0]\n[grid]\nnx = 5\nny = 5\nnu = 7\nnphi = 4\n[flow]\ncheck_every = 2\ntau_steps = 4",
            &[],
        )
        .unwrap();
        let e = config.eta().unwrap();
        let g = ProductGrid::new(config.grid.spec()).unwrap();
        let h0 = initial_metric(&config.xi0().unwrap(), &g).unwrap();
        let mut r = FlowRunner::new(&e, &h0, config.flow.config()).unwrap();
        for _ in 0..3 {
            r.advance().unwrap();
        }
        Checkpoint { config, status: r.status().into(), state: r.state() }
    }

    #[test]
    fn round_trips_exactly() {
        let ck = sample();
        let back = Checkpoint::decode(&ck.encode(), Path::new("mem")).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().encode();
        let p = Path::new("mem");
        let mut flipped = bytes.clone();
        flipped[100] ^= 1;
        assert!(matches!(Checkpoint::decode(&flipped, p), Err(CliError::Checkpoint { .. })));
        assert!(Checkpoint::decode(&bytes[..bytes.len() - 1], p).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(Checkpoint::decode(&magic, p).is_err());
        assert!(Checkpoint::decode(b"", p).is_err());
    }
}
