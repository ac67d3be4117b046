//! Seeded Rician channel generation.
//!
//! Every entry of `H` and `G` is `mean + sqrt(variance / 2) · (z₁ + j z₂)`
//! with `z₁, z₂` standard normal. The defaults (mean 2, unit scatter
//! variance) put four times more power in the line-of-sight component than
//! in the diffuse one.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`) seeded through
//! `seed_from_u64`, with normals from `rand_distr::StandardNormal`. Draws are
//! taken element by element along the RIS: for element `n`, first row `n` of
//! `H` (N_T entries), then column `n` of `G` (N_R entries), real part before
//! imaginary part. A surface of N elements is therefore a prefix of any
//! larger surface drawn from the same seed.
//!
//! Per-trial seeds are `splitmix64(master ^ splitmix64(trial))`, so trials can
//! be generated independently and in any order.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ChannelPair;

const DUMP_MAGIC: &[u8; 8] = b"RISCHAN1";
const PHASE_STREAM: u64 = 0x5048_4153_4553_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub ris_elements: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
}

impl Dims {
    pub fn new(ris_elements: usize, tx_antennas: usize, rx_antennas: usize) -> Self {
        Dims {
            ris_elements,
            tx_antennas,
            rx_antennas,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ris_elements == 0 || self.tx_antennas == 0 || self.rx_antennas == 0 {
            return Err(Error::invalid(
                "dims",
                format!("all dimensions must be >= 1, got {self:?}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub mean_h: Complex64,
    pub mean_g: Complex64,
    /// Per-entry power of the diffuse component.
    pub scatter_variance: f64,
    pub dims: Dims,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            mean_h: Complex64::new(2.0, 0.0),
            mean_g: Complex64::new(2.0, 0.0),
            scatter_variance: 1.0,
            dims: Dims::new(100, 4, 4),
        }
    }
}

impl ChannelModel {
    /// Line-of-sight to diffuse power ratio of `H`.
    pub fn k_factor(&self) -> f64 {
        self.mean_h.norm_sqr() / self.scatter_variance
    }

    pub fn with_dims(self, dims: Dims) -> Self {
        ChannelModel { dims, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if !(self.scatter_variance.is_finite() && self.scatter_variance >= 0.0) {
            return Err(Error::invalid(
                "scatter_variance",
                "must be finite and >= 0",
            ));
        }
        for (name, m) in [("mean_h", self.mean_h), ("mean_g", self.mean_g)] {
            if !(m.re.is_finite() && m.im.is_finite()) {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }
}

pub fn sample(model: &ChannelModel, seed: u64) -> Result<ChannelPair> {
    model.validate()?;
    let Dims {
        ris_elements: n,
        tx_antennas: nt,
        rx_antennas: nr,
    } = model.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (model.scatter_variance / 2.0).sqrt();
    let mut draw = |mean: Complex64| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        mean + Complex64::new(scale * re, scale * im)
    };
    let mut h = DMatrix::zeros(n, nt);
    let mut g = DMatrix::zeros(nr, n);
    for e in 0..n {
        for t in 0..nt {
            h[(e, t)] = draw(model.mean_h);
        }
        for r in 0..nr {
            g[(r, e)] = draw(model.mean_g);
        }
    }
    ChannelPair::new(h, g)
}

/// i.i.d. uniform phases in `[0, 2π)`, drawn element by element.
pub fn random_phases(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(trial))
}

/// Seed of the random-phase stream paired with a channel seed.
pub fn phase_seed(channel_seed: u64) -> u64 {
    splitmix64(channel_seed ^ PHASE_STREAM)
}

fn for_each_entry(channels: &ChannelPair, mut f: impl FnMut(Complex64)) {
    let (h, g) = (channels.h(), channels.g());
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            f(h[(i, j)]);
        }
    }
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            f(g[(i, j)]);
        }
    }
}

/// First 8 bytes (hex) of SHA-256 over the dimensions and the row-major
/// IEEE-754 entries of `H` then `G`.
pub fn channel_hash(channels: &ChannelPair) -> String {
    let mut hasher = Sha256::new();
    for d in [channels.n_ris(), channels.n_tx(), channels.n_rx()] {
        hasher.update((d as u64).to_le_bytes());
    }
    for_each_entry(channels, |z| {
        hasher.update(z.re.to_le_bytes());
        hasher.update(z.im.to_le_bytes());
    });
    let digest = hasher.finalize();
    hex::encode(&digest[..8])
}

/// Writes a binary channel dump:
///
/// ```text
/// "RISCHAN1" | N u64 | N_T u64 | N_R u64 | seed u64 | H (N×N_T) | G (N_R×N)
/// ```
///
/// All integers and doubles little-endian; matrices row-major as `(re, im)`.
pub fn dump_channel(path: &Path, channels: &ChannelPair, seed: u64) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut bytes =
        Vec::with_capacity(40 + 16 * (channels.n_ris() * (channels.n_tx() + channels.n_rx())));
    bytes.extend_from_slice(DUMP_MAGIC);
    for v in [
        channels.n_ris() as u64,
        channels.n_tx() as u64,
        channels.n_rx() as u64,
        seed,
    ] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for_each_entry(channels, |z| {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    });
    out.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a dump written by [`dump_channel`], returning the channels and seed.
pub fn load_channel(path: &Path) -> Result<(ChannelPair, u64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 40 || &bytes[..8] != DUMP_MAGIC {
        return Err(Error::format(
            path,
            "not a channel dump (bad magic or truncated header)",
        ));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
    let (n, nt, nr, seed) = (
        word(0) as usize,
        word(1) as usize,
        word(2) as usize,
        word(3),
    );
    let entries = n
        .checked_mul(nt)
        .and_then(|a| n.checked_mul(nr).and_then(|b| a.checked_add(b)))
        .ok_or_else(|| Error::format(path, "dimensions overflow"))?;
    if bytes.len() != 40 + 16 * entries {
        return Err(Error::format(
            path,
            format!(
                "expected {} bytes for {n}x{nt}x{nr}, found {}",
                40 + 16 * entries,
                bytes.len()
            ),
        ));
    }
    let mut values = bytes[40..].chunks_exact(16).map(|c| {
        Complex64::new(
            f64::from_le_bytes(c[..8].try_into().unwrap()),
            f64::from_le_bytes(c[8..].try_into().unwrap()),
        )
    });
    let h = DMatrix::from_row_iterator(n, nt, values.by_ref().take(n * nt));
    let g = DMatrix::from_row_iterator(nr, n, values.take(nr * n));
    let pair = ChannelPair::new(h, g).map_err(|e| Error::format(path, e.to_string()))?;
    Ok((pair, seed))
}
