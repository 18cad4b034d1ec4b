//! Run directories: CSV tables, JSON reports, point clouds and the manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use ehrenfest_core::classical::PhasePoint;
use ehrenfest_core::phasespace::PhaseDensity;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Magic bytes of the point-cloud format.
pub const CLOUD_MAGIC: &[u8; 4] = b"EHPC";
pub const CLOUD_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub config_sha256: Option<String>,
    pub seeds: Vec<u64>,
    pub versions: Versions,
    pub threads: usize,
    pub quick: bool,
    pub wall_clock_seconds: f64,
    pub status: String,
    pub error: Option<String>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub ehrenfest_core: String,
    pub ehrenfest_cli: String,
}

/// One output directory. Files are recorded in the manifest as they are written.
pub struct RunDir {
    root: PathBuf,
    pub scenario_hash: String,
    /// ℏ_ε written in CSV comment headers.
    pub hbar: Option<f64>,
    files: Vec<FileEntry>,
    started: Instant,
}

impl RunDir {
    pub fn create(root: &Path, scenario_hash: String) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), scenario_hash, hbar: None, files: Vec::new(), started: Instant::now() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.root.join(name)).with_context(|| format!("reading back {name}"))?;
        let entry =
            FileEntry { path: name.to_string(), sha256: format!("{:x}", Sha256::digest(&bytes)), bytes: bytes.len() as u64 };
        self.files.retain(|f| f.path != name);
        self.files.push(entry);
        Ok(())
    }

    pub fn sha256(&self, name: &str) -> Option<String> {
        self.files.iter().find(|f| f.path == name).map(|f| f.sha256.clone())
    }

    fn header(&self) -> String {
        match self.hbar {
            Some(h) => format!("# scenario={} hbar={h}\n", self.scenario_hash),
            None => format!("# scenario={}\n", self.scenario_hash),
        }
    }

    /// A table with a `# scenario=… hbar=…` first line and a column header.
    pub fn csv(&mut self, name: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let rows = rows.into_iter().map(|r| r.into_iter().map(Cell::Num).collect());
        self.csv_cells(name, columns, rows)
    }

    pub fn csv_cells(&mut self, name: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
        let path = self.root.join(name);
        let mut file = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        file.write_all(self.header().as_bytes())?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(columns)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        drop(w);
        self.record(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.root.join(name), text).with_context(|| format!("writing {name}"))?;
        self.record(name)
    }

    /// Header `EHPC`, u32 version, u32 dim, u64 count, f64 time, then per
    /// point x₁..x_d, p₁..p_d as little-endian f64.
    pub fn point_cloud(&mut self, name: &str, time: f64, points: &[PhasePoint]) -> Result<()> {
        let dim = points.first().map_or(1, |p| p.dim);
        let mut buf = Vec::with_capacity(28 + points.len() * 16 * dim);
        buf.extend_from_slice(CLOUD_MAGIC);
        buf.extend_from_slice(&CLOUD_VERSION.to_le_bytes());
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
        buf.extend_from_slice(&(points.len() as u64).to_le_bytes());
        buf.extend_from_slice(&time.to_le_bytes());
        for pt in points {
            for v in pt.xs().iter().chain(pt.ps()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(self.root.join(name), &buf).with_context(|| format!("writing {name}"))?;
        self.record(name)
    }

    /// `<stem>.csv` holds one row per x cell and one column per p cell;
    /// `<stem>.json` holds the axes.
    pub fn density(&mut self, stem: &str, density: &PhaseDensity, time: f64, kind: &str) -> Result<()> {
        let g = density.grid;
        let columns: Vec<String> = std::iter::once("x".to_string()).chain((0..g.np).map(|ip| format!("p{ip}"))).collect();
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        let rows = (0..g.nx).map(|ix| {
            let mut row = vec![g.cell_center(ix, 0).0];
            row.extend((0..g.np).map(|ip| density.value(ix, ip)));
            row
        });
        self.csv(&format!("{stem}.csv"), &cols, rows)?;
        let meta = DensityMeta {
            kind: kind.to_string(),
            time,
            hbar: g.hbar.get(),
            x_range: [g.x_min, g.x_max()],
            p_range: [g.p_min, g.p_max()],
            dx: g.dx,
            dp: g.dp,
            nx: g.nx,
            np: g.np,
            p_centers: (0..g.np).map(|ip| g.cell_center(0, ip).1).collect(),
            leakage: density.leakage,
            normalized: density.normalized,
        };
        self.json(&format!("{stem}.json"), &meta)
    }

    /// Write `manifest.json`, including files written so far.
    pub fn finish(&mut self, mut manifest: Manifest) -> Result<()> {
        manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        manifest.files = self.files.clone();
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join("manifest.json"), text).context("writing manifest.json")
    }
}

#[derive(Debug, Clone, Serialize)]
struct DensityMeta {
    kind: String,
    time: f64,
    hbar: f64,
    x_range: [f64; 2],
    p_range: [f64; 2],
    dx: f64,
    dp: f64,
    nx: usize,
    np: usize,
    p_centers: Vec<f64>,
    leakage: f64,
    normalized: bool,
}

/// A CSV field; failed sweep points carry text.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Parse a point-cloud file back into (time, dim, points).
pub fn read_point_cloud(bytes: &[u8]) -> Result<(f64, usize, Vec<Vec<f64>>)> {
    anyhow::ensure!(bytes.len() >= 28 && &bytes[..4] == CLOUD_MAGIC, "not an EHPC point cloud");
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    anyhow::ensure!(u32_at(4) == CLOUD_VERSION, "unsupported point-cloud version {}", u32_at(4));
    let dim = u32_at(8) as usize;
    let n = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let time = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let width = 2 * dim * 8;
    anyhow::ensure!(bytes.len() == 28 + n * width, "point cloud truncated");
    let points = bytes[28..]
        .chunks_exact(width)
        .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect();
    Ok((time, dim, points))
}
