//! Designs of experiments on `[0,1]^d`.
//!
//! Random designs are drawn from ChaCha8 (`rand_chacha::ChaCha8Rng`, seeded
//! through `SeedableRng::seed_from_u64`), so a design is reproducible from
//! its kind, size and seed.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Design;

/// Identifier recorded in metadata next to every seeded output.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng(seed_from_u64)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoeKind {
    LatinHypercube,
    UniformIid,
    /// Four corners of an axis-aligned rectangle.
    Fig1Left,
    /// Six points on three `x₁` and three `x₂` levels carrying one additive relation.
    Fig1Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoeConfig {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub kind: DoeKind,
}

impl DoeConfig {
    pub fn lhs(n: usize, d: usize, seed: u64) -> Self {
        DoeConfig {
            n,
            d,
            seed,
            kind: DoeKind::LatinHypercube,
        }
    }

    pub fn uniform(n: usize, d: usize, seed: u64) -> Self {
        DoeConfig {
            n,
            d,
            seed,
            kind: DoeKind::UniformIid,
        }
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mix a base seed with cell indices (splitmix64 finalizer per step).
pub fn derive_seed(seed: u64, indices: &[u64]) -> u64 {
    let mut h = seed;
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn generate(cfg: &DoeConfig) -> Result<Design> {
    match cfg.kind {
        DoeKind::Fig1Left => {
            fixed_size(cfg, 4)?;
            Design::from_rows(&[
                vec![0.2, 0.3],
                vec![0.8, 0.3],
                vec![0.2, 0.7],
                vec![0.8, 0.7],
            ])
        }
        DoeKind::Fig1Right => {
            fixed_size(cfg, 6)?;
            Design::from_rows(&[
                vec![0.2, 0.2],
                vec![0.5, 0.2],
                vec![0.2, 0.5],
                vec![0.8, 0.5],
                vec![0.5, 0.8],
                vec![0.8, 0.8],
            ])
        }
        DoeKind::LatinHypercube => {
            check_size(cfg)?;
            latin_hypercube(cfg.n, cfg.d, &mut rng_from_seed(cfg.seed))
        }
        DoeKind::UniformIid => {
            check_size(cfg)?;
            uniform(cfg.n, cfg.d, &mut rng_from_seed(cfg.seed))
        }
    }
}

fn check_size(cfg: &DoeConfig) -> Result<()> {
    if cfg.n == 0 || cfg.d == 0 {
        return Err(Error::invalid("design size n and dimension d must be positive"));
    }
    Ok(())
}

fn fixed_size(cfg: &DoeConfig, n: usize) -> Result<()> {
    if cfg.n != n || cfg.d != 2 {
        return Err(Error::invalid(format!(
            "{:?} requires n = {n}, d = 2 (got n = {}, d = {})",
            cfg.kind, cfg.n, cfg.d
        )));
    }
    Ok(())
}

/// Jittered Latin hypercube: in every column, `floor(n·x)` is a permutation of `0..n`.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Design> {
    let mut data = vec![0.0; n * d];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        for (i, &p) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            let mut x = (p as f64 + u) / n as f64;
            if (x * n as f64).floor() as usize != p {
                x = (p as f64 + 0.5) / n as f64;
            }
            data[i * d + j] = x;
        }
    }
    Design::from_flat(n, d, data)
}

/// I.i.d. uniform points.
pub fn uniform<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Design> {
    let data = (0..n * d).map(|_| rng.random::<f64>()).collect();
    Design::from_flat(n, d, data)
}

/// Sidecar metadata written next to a design file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMetadata {
    pub kind: DoeKind,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub rng: String,
}

impl From<&DoeConfig> for DesignMetadata {
    fn from(cfg: &DoeConfig) -> Self {
        DesignMetadata {
            kind: cfg.kind,
            n: cfg.n,
            d: cfg.d,
            seed: cfg.seed,
            rng: RNG_ALGORITHM.to_string(),
        }
    }
}

/// `design.csv` → `design.meta.json`
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_design_csv<W: Write>(design: &Design, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=design.dim()).map(|j| format!("x{j}")))?;
    for row in design.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a design with header `x1,…,xd`.
pub fn read_design_csv<R: Read>(input: R) -> Result<Design> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let d = headers.len();
    for (j, h) in headers.iter().enumerate() {
        if h.trim() != format!("x{}", j + 1) {
            return Err(Error::invalid(format!(
                "unexpected design column header '{h}', expected 'x{}'",
                j + 1
            )));
        }
    }
    let mut data = Vec::new();
    let mut n = 0;
    for record in r.records() {
        let record = record?;
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("not a number: '{field}'")))?;
            data.push(v);
        }
        n += 1;
    }
    Design::from_flat(n, d, data)
}

pub fn write_design_files(design: &Design, cfg: &DoeConfig, csv_path: &Path) -> Result<()> {
    write_design_csv(design, std::fs::File::create(csv_path)?)?;
    let meta = DesignMetadata::from(cfg);
    std::fs::write(metadata_path(csv_path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
