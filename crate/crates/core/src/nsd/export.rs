use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::loewner::Side;
use crate::{CMat, Result, Tolerances};

use super::decomposition::{NsdKind, NsdResult, NsdSample};
use super::DropEvent;

/// Summary written next to the CSV matrices.
#[derive(Clone, Debug, Serialize)]
pub struct NsdManifest {
    pub kind: NsdKind,
    pub dim: usize,
    pub anchor: Option<f64>,
    pub drop_times: Vec<f64>,
    pub drops: Vec<DropEvent>,
    pub interval_ranks: Vec<usize>,
    pub rank_sequence: Vec<usize>,
    pub rank_method: String,
    pub rank_threshold: f64,
    pub time_resolution: f64,
    pub chain_sizes: Vec<usize>,
    pub max_chain_residual: f64,
    pub max_zero_block: f64,
    pub zero_block_tolerance: f64,
    pub min_leading_eig: f64,
    pub zero_block_ok: bool,
    pub leading_block_definite: bool,
    pub qtilde_weakly_decreasing: bool,
    pub qhat_weakly_decreasing: Option<bool>,
    pub max_unitarity_residual: Option<f64>,
    pub min_l_diagonal: Option<f64>,
    pub valid: bool,
    pub tolerances: Tolerances,
    pub files: Vec<String>,
}

fn side_str(s: Side) -> &'static str {
    match s {
        Side::Left => "left",
        Side::Point => "point",
        Side::Right => "right",
    }
}

fn entry_header(rows: usize, cols: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(2 * rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            h.push(format!("m{}{}_re", i + 1, j + 1));
            h.push(format!("m{}{}_im", i + 1, j + 1));
        }
    }
    h
}

/// Entries of `m` padded to `rows × cols` with empty cells.
fn entry_cells(m: &CMat, rows: usize, cols: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            if i < m.nrows() && j < m.ncols() {
                out.push(m[(i, j)].re.to_string());
                out.push(m[(i, j)].im.to_string());
            } else {
                out.push(String::new());
                out.push(String::new());
            }
        }
    }
    out
}

fn write_matrix(path: &Path, m: &CMat) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["row".to_string()];
    for j in 0..m.ncols() {
        header.push(format!("c{}_re", j + 1));
        header.push(format!("c{}_im", j + 1));
    }
    w.write_record(&header)?;
    for i in 0..m.nrows() {
        let mut rec = vec![(i + 1).to_string()];
        for j in 0..m.ncols() {
            rec.push(m[(i, j)].re.to_string());
            rec.push(m[(i, j)].im.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_series<F>(path: &Path, samples: &[NsdSample], n: usize, pick: F) -> Result<()>
where
    F: Fn(&NsdSample) -> Option<CMat>,
{
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string(), "side".to_string(), "rank".to_string()];
    header.extend(entry_header(n, n));
    w.write_record(&header)?;
    for s in samples {
        if let Some(m) = pick(s) {
            let mut rec = vec![s.t.to_string(), side_str(s.side).to_string(), s.rank.to_string()];
            rec.extend(entry_cells(&m, n, n));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

impl NsdResult {
    pub fn manifest(&self) -> NsdManifest {
        let p = &self.rank_profile;
        NsdManifest {
            kind: self.kind,
            dim: self.dim,
            anchor: self.anchor,
            drop_times: p.drop_times.clone(),
            drops: p.drops.clone(),
            interval_ranks: p.interval_ranks.clone(),
            rank_sequence: p.sequence.clone(),
            rank_method: p.method.clone(),
            rank_threshold: p.threshold,
            time_resolution: p.time_resolution,
            chain_sizes: self.chain.sizes(),
            max_chain_residual: self.chain.max_residual,
            max_zero_block: self.check.max_zero_block,
            zero_block_tolerance: self.check.zero_block_tolerance,
            min_leading_eig: self.check.min_leading_eig,
            zero_block_ok: self.check.zero_block_ok,
            leading_block_definite: self.check.leading_block_definite,
            qtilde_weakly_decreasing: self.qtilde_report.is_decreasing(),
            qhat_weakly_decreasing: self.qhat_decreasing(),
            max_unitarity_residual: self.max_unitarity_residual,
            min_l_diagonal: self.min_l_diagonal,
            valid: self.is_valid(),
            tolerances: self.tolerances.clone(),
            files: Vec::new(),
        }
    }

    /// Writes `nsd.json`, `v0.csv`, the leading-block series
    /// (`qtilde11.csv`, or `qhat11.csv` for the unitary variant) and, when
    /// present, `u.csv` and `l.csv` into `dir`. Returns the written paths.
    pub fn export(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let n = self.dim;
        let mut files = Vec::new();

        let v0 = dir.join("v0.csv");
        write_matrix(&v0, &self.v0)?;
        files.push(v0);

        let block = dir.join(if self.kind == NsdKind::Unitary { "qhat11.csv" } else { "qtilde11.csv" });
        write_series(&block, &self.check.samples, n, |s| Some(s.leading_block()))?;
        files.push(block);

        if self.check.samples.iter().any(|s| s.u.is_some()) {
            let u = dir.join("u.csv");
            write_series(&u, &self.check.samples, n, |s| s.u.clone())?;
            files.push(u);
            let l = dir.join("l.csv");
            write_series(&l, &self.check.samples, n, |s| s.l.clone())?;
            files.push(l);
        }

        let mut manifest = self.manifest();
        manifest.files = files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect();
        let json = dir.join("nsd.json");
        fs::write(&json, crate::report::to_json(&manifest)?)?;
        files.insert(0, json);
        Ok(files)
    }
}
