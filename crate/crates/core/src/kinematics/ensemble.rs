use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"QAMTRAJ1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    Reflect,
    Absorb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dt_sde: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub direction: Direction,
    pub boundary_policy: BoundaryPolicy,
    pub t_start: f64,
    pub t_end: f64,
    /// Store every `record_every`-th step; must divide the step count.
    pub record_every: usize,
}

impl SdeConfig {
    pub fn forward(seed: u64, n_paths: usize, dt_sde: f64, t_start: f64, t_end: f64) -> Self {
        SdeConfig {
            dt_sde,
            n_paths,
            seed,
            direction: Direction::Forward,
            boundary_policy: BoundaryPolicy::Reflect,
            t_start,
            t_end,
            record_every: 1,
        }
    }

    pub fn backward(seed: u64, n_paths: usize, dt_sde: f64, t_start: f64, t_end: f64) -> Self {
        SdeConfig {
            direction: Direction::Backward,
            ..Self::forward(seed, n_paths, dt_sde, t_start, t_end)
        }
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn with_boundary(mut self, policy: BoundaryPolicy) -> Self {
        self.boundary_policy = policy;
        self
    }

    /// Number of Euler–Maruyama steps; the effective step is `span / n_steps`.
    pub fn n_steps(&self) -> usize {
        (((self.t_end - self.t_start) / self.dt_sde).round() as usize).max(1)
    }

    pub fn effective_dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps() as f64
    }

    pub fn validate(&self, dt_pde: f64) -> Result<()> {
        if !(self.dt_sde > 0.0) || !self.dt_sde.is_finite() {
            return Err(Error::invalid("dt_sde must be > 0"));
        }
        if self.dt_sde > dt_pde * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "dt_sde = {} exceeds the field time step dt_pde = {dt_pde}",
                self.dt_sde
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be ≥ 1"));
        }
        if !(self.t_end > self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::invalid("horizon must satisfy t_start < t_end"));
        }
        if self.record_every == 0 || self.n_steps() % self.record_every != 0 {
            return Err(Error::invalid(format!(
                "record_every = {} must divide the step count {}",
                self.record_every,
                self.n_steps()
            )));
        }
        Ok(())
    }
}

/// Sampled paths in physical time order, row-major `n_paths × n_times`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub paths: Vec<f64>,
    pub n_paths: usize,
    pub direction: Direction,
    pub seed: u64,
    pub stream_ids: Vec<u64>,
    /// Physical time at which each path was absorbed (or aborted on a non-finite drift).
    pub absorbed_at: Vec<Option<f64>>,
    pub dt_sde: f64,
}

impl TrajectoryEnsemble {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn path(&self, k: usize) -> &[f64] {
        let n = self.n_times();
        &self.paths[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn position(&self, k: usize, j: usize) -> f64 {
        self.paths[k * self.n_times() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_paths).map(|k| self.position(k, j)).collect()
    }

    /// Positions at slot `j` of paths that have not been absorbed by then.
    pub fn live_column(&self, j: usize) -> Vec<f64> {
        let t = self.times[j];
        (0..self.n_paths)
            .filter(|&k| self.alive_at(k, t))
            .map(|k| self.position(k, j))
            .collect()
    }

    #[inline]
    pub fn alive_at(&self, k: usize, t: f64) -> bool {
        match self.absorbed_at[k] {
            None => true,
            Some(ta) => match self.direction {
                Direction::Forward => t < ta,
                Direction::Backward => t > ta,
            },
        }
    }

    pub fn is_absorbed(&self, k: usize) -> bool {
        self.absorbed_at[k].is_some()
    }

    pub fn record_dt(&self) -> f64 {
        if self.times.len() < 2 {
            return self.dt_sde;
        }
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    /// Index of the stored time nearest to `t`, or an error outside the horizon.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        let t0 = self.times[0];
        let t1 = self.times[self.times.len() - 1];
        let slack = 0.5 * self.record_dt();
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::TimeOutOfRange {
                t,
                t_min: t0,
                t_max: t1,
            });
        }
        let j = self.times.partition_point(|&s| s < t);
        let j = if j == 0 {
            0
        } else if j >= self.times.len() {
            self.times.len() - 1
        } else if (self.times[j] - t).abs() < (t - self.times[j - 1]).abs() {
            j
        } else {
            j - 1
        };
        Ok(j)
    }

    /// Path-wise mean over live paths at each stored time.
    pub fn mean_series(&self) -> Vec<f64> {
        (0..self.n_times())
            .map(|j| crate::numerics::mean(&self.live_column(j)))
            .collect()
    }

    /// CSV with columns `t, path_id, x`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,path_id,x")?;
        for k in 0..self.n_paths {
            for (j, t) in self.times.iter().enumerate() {
                writeln!(w, "{},{},{}", t, k, self.position(k, j))?;
            }
        }
        Ok(())
    }

    /// Binary table: magic, `n_paths` and `n_times` as u64, the times, then the
    /// row-major positions; all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(TRAJECTORY_MAGIC)?;
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        w.write_all(&(self.n_times() as u64).to_le_bytes())?;
        for t in &self.times {
            w.write_all(&t.to_le_bytes())?;
        }
        for x in &self.paths {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * (self.times.len() + self.paths.len()));
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Reads the binary table; metadata comes from `manifest`.
    pub fn read_binary<R: Read>(mut r: R, manifest: &EnsembleManifest) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(|e| Error::Format(format!("reading trajectory table: {e}")))?;
        if buf.len() < 24 || &buf[..8] != TRAJECTORY_MAGIC {
            return Err(Error::Format("missing QAMTRAJ1 magic".into()));
        }
        let word = |i: usize| u64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
        let n_paths = word(8) as usize;
        let n_times = word(16) as usize;
        let expect = 24 + 8 * (n_times + n_paths * n_times);
        if buf.len() != expect {
            return Err(Error::Format(format!(
                "trajectory table has {} bytes, expected {expect}",
                buf.len()
            )));
        }
        let floats: Vec<f64> = buf[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if manifest.n_paths != n_paths || manifest.n_times != n_times {
            return Err(Error::Format("manifest shape does not match the table".into()));
        }
        let mut absorbed_at = vec![None; n_paths];
        for &(k, t) in &manifest.absorbed {
            if k < n_paths {
                absorbed_at[k] = Some(t);
            }
        }
        Ok(TrajectoryEnsemble {
            times: floats[..n_times].to_vec(),
            paths: floats[n_times..].to_vec(),
            n_paths,
            direction: manifest.config.direction,
            seed: manifest.seed,
            stream_ids: (0..n_paths as u64).collect(),
            absorbed_at,
            dt_sde: manifest.config.effective_dt(),
        })
    }

    pub fn manifest(&self, config: &SdeConfig, field_checksum: &str) -> EnsembleManifest {
        EnsembleManifest {
            seed: self.seed,
            config: config.clone(),
            field_checksum: field_checksum.to_string(),
            n_paths: self.n_paths,
            n_times: self.n_times(),
            absorbed: self
                .absorbed_at
                .iter()
                .enumerate()
                .filter_map(|(k, t)| t.map(|t| (k, t)))
                .collect(),
        }
    }
}

/// Sidecar JSON for a trajectory table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub seed: u64,
    pub config: SdeConfig,
    pub field_checksum: String,
    pub n_paths: usize,
    pub n_times: usize,
    pub absorbed: Vec<(usize, f64)>,
}

impl EnsembleManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("ensemble manifest: {e}")))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_ensemble(table: &Path, manifest: &Path) -> Result<TrajectoryEnsemble> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let m = EnsembleManifest::from_json(&text)?;
    let f = std::fs::File::open(table).map_err(|e| Error::io(table, e))?;
    TrajectoryEnsemble::read_binary(std::io::BufReader::new(f), &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(n_paths: usize, n_times: usize, seed: u64) -> (TrajectoryEnsemble, SdeConfig) {
        let cfg = SdeConfig::forward(seed, n_paths, 0.1, 0.0, 0.1 * (n_times - 1) as f64);
        let ens = TrajectoryEnsemble {
            times: (0..n_times).map(|j| 0.1 * j as f64).collect(),
            paths: (0..n_paths * n_times).map(|i| (i as f64 * 0.37).sin()).collect(),
            n_paths,
            direction: Direction::Forward,
            seed,
            stream_ids: (0..n_paths as u64).collect(),
            absorbed_at: (0..n_paths).map(|k| if k == 1 { Some(0.25) } else { None }).collect(),
            dt_sde: cfg.effective_dt(),
        };
        (ens, cfg)
    }

    proptest! {
        #[test]
        fn binary_table_round_trips(n_paths in 2usize..20, n_times in 2usize..30, seed in any::<u64>()) {
            let (ens, cfg) = toy(n_paths, n_times, seed);
            let bytes = ens.to_binary();
            prop_assert_eq!(&bytes[..8], TRAJECTORY_MAGIC);
            let m = EnsembleManifest::from_json(&ens.manifest(&cfg, "abc").to_json()).unwrap();
            let back = TrajectoryEnsemble::read_binary(&bytes[..], &m).unwrap();
            prop_assert_eq!(back, ens);
        }
    }

    #[test]
    fn rejects_corrupt_tables() {
        let (ens, cfg) = toy(3, 4, 1);
        let m = ens.manifest(&cfg, "");
        let mut bytes = ens.to_binary();
        bytes[0] = b'X';
        assert!(TrajectoryEnsemble::read_binary(&bytes[..], &m).is_err());
        let bytes = ens.to_binary();
        assert!(TrajectoryEnsemble::read_binary(&bytes[..bytes.len() - 1], &m).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let (ens, _) = toy(2, 3, 1);
        let mut out = Vec::new();
        ens.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,path_id,x\n"));
        assert_eq!(text.lines().count(), 1 + 6);
    }

    #[test]
    fn time_index_and_liveness() {
        let (ens, _) = toy(3, 11, 1);
        assert_eq!(ens.time_index(0.31).unwrap(), 3);
        assert!(ens.time_index(2.0).is_err());
        assert!(ens.alive_at(1, 0.2));
        assert!(!ens.alive_at(1, 0.3));
        assert_eq!(ens.live_column(5).len(), 2);
    }
}
