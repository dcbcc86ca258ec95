//! Seeded Wiener paths on a uniform grid.
//!
//! Path `(seed, stream)` is drawn from its own ChaCha8 stream, so a path is
//! reproducible no matter which worker builds it or in which order.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::params::TimeGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: TimeGrid,
    w: Vec<f64>,
    seed: u64,
    stream: u64,
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Overwrites `w` with the path values `W(t_k)`, `k = 0..=n_steps`.
pub(crate) fn fill_path(grid: &TimeGrid, seed: u64, stream: u64, w: &mut Vec<f64>) {
    let mut rng = stream_rng(seed, stream);
    let sd = grid.dt().sqrt();
    w.clear();
    w.reserve(grid.len());
    let mut acc = 0.0;
    w.push(acc);
    for _ in 0..grid.n_steps() {
        let z: f64 = StandardNormal.sample(&mut rng);
        acc += sd * z;
        w.push(acc);
    }
}

/// Path with i.i.d. `N(0, dt)` increments, deterministic in `(seed, stream)`.
pub fn sample_path(grid: &TimeGrid, seed: u64, stream: u64) -> BrownianPath {
    let mut w = Vec::new();
    fill_path(grid, seed, stream, &mut w);
    BrownianPath {
        grid: *grid,
        w,
        seed,
        stream,
    }
}

/// Wiener self-similarity applied to a stored path: `w'[k] = sqrt(eps) w[k]`
/// on the same nodes.
pub fn rescale_path(path: &BrownianPath, epsilon: f64) -> Result<BrownianPath> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
    }
    let s = epsilon.sqrt();
    Ok(BrownianPath {
        w: path.w.iter().map(|&x| s * x).collect(),
        ..path.clone()
    })
}

impl BrownianPath {
    /// Wraps externally produced values. `w[0]` must be zero.
    pub fn from_values(grid: TimeGrid, w: Vec<f64>, seed: u64, stream: u64) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                w.len(),
                grid.len()
            )));
        }
        if w[0] != 0.0 {
            return Err(invalid("w", "path must start at 0"));
        }
        Ok(Self {
            grid,
            w,
            seed,
            stream,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.w.windows(2).map(|p| p[1] - p[0])
    }

    /// The mirrored path `-W`.
    pub fn negated(&self) -> Self {
        Self {
            w: self.w.iter().map(|x| -x).collect(),
            ..self.clone()
        }
    }

    /// First `k` steps of the path.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        let grid = self.grid.prefix(k)?;
        Ok(Self {
            grid,
            w: self.w[..=k].to_vec(),
            seed: self.seed,
            stream: self.stream,
        })
    }

    /// Every `factor`-th node; the coarse path shares the fine increments.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.grid.n_steps() % factor != 0 {
            return Err(Error::GridMismatch(format!(
                "cannot coarsen {} steps by {factor}",
                self.grid.n_steps()
            )));
        }
        let grid = TimeGrid::new(self.grid.t_end(), self.grid.n_steps() / factor)?;
        Ok(Self {
            grid,
            w: self.w.iter().step_by(factor).copied().collect(),
            seed: self.seed,
            stream: self.stream,
        })
    }

    /// Binary dump: magic, `t_end`, `n_steps`, `seed`, `stream`, then the
    /// `n_steps + 1` values, all little-endian 64-bit.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(PATH_MAGIC)?;
        out.write_all(&self.grid.t_end().to_le_bytes())?;
        out.write_all(&(self.grid.n_steps() as u64).to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.stream.to_le_bytes())?;
        for x in &self.w {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != PATH_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let t_end = f64::from_le_bytes(next(&mut input)?);
        let n_steps = u64::from_le_bytes(next(&mut input)?) as usize;
        let seed = u64::from_le_bytes(next(&mut input)?);
        let stream = u64::from_le_bytes(next(&mut input)?);
        let grid = TimeGrid::new(t_end, n_steps).map_err(|e| Error::Format(e.to_string()))?;
        let mut w = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            w.push(f64::from_le_bytes(next(&mut input)?));
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", rest.len())));
        }
        Self::from_values(grid, w, seed, stream)
    }
}

pub const PATH_MAGIC: &[u8; 8] = b"QMPATH01";
