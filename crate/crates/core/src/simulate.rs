//! Lattice realizations of `eps(x, t) = exp(Z(S(x, t)))`.
//!
//! Every cell of area `dx dt` receives an independent draw of the basis
//! measure. Time runs over slabs of cells; the field at the start of slab
//! `c` sums row `j` of the mask over slab `c - 1 - j`. Space is periodic.

use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambit::{AmbitBoundary, AmbitMask};
use crate::error::{Error, Result};
use crate::levy::{CellSampler, LevyBasis};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub dx: f64,
    pub dt: f64,
    pub nx: usize,
    pub nt: usize,
    /// Slabs generated and discarded before the first retained row;
    /// defaults to `ceil(T / dt)`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    pub seed: u64,
    pub realizations: usize,
}

impl LatticeConfig {
    pub fn burn_in_depth(&self, boundary: &AmbitBoundary) -> usize {
        self.burn_in
            .unwrap_or_else(|| (boundary.decorrelation_time() / self.dt * (1.0 - 1e-12)).ceil() as usize)
    }

    /// Every violated lattice invariant, empty when the lattice is usable
    /// for spatial lags up to `max_spatial_lag`.
    pub fn violations(&self, boundary: &AmbitBoundary, max_spatial_lag: f64) -> Vec<String> {
        let mut out = Vec::new();
        let big_t = boundary.decorrelation_time();
        if !(self.dx.is_finite() && self.dx > 0.0) {
            out.push(format!("lattice.dx must be positive, got {}", self.dx));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            out.push(format!("lattice.dt must be positive, got {}", self.dt));
        } else if self.dt >= big_t {
            out.push(format!("lattice.dt = {} must be below the decorrelation time T = {big_t}", self.dt));
        }
        if self.nx == 0 || self.nt == 0 {
            out.push(format!("lattice extent must be positive, got nx={}, nt={}", self.nx, self.nt));
        }
        if self.realizations == 0 {
            out.push("lattice.realizations must be positive".into());
        }
        if !out.is_empty() {
            return out;
        }
        let burn = self.burn_in_depth(boundary);
        if (burn as f64) * self.dt < big_t * (1.0 - 1e-12) {
            out.push(format!(
                "lattice.burn_in = {burn} slabs covers {} < T = {big_t}",
                burn as f64 * self.dt
            ));
        }
        let width = self.nx as f64 * self.dx;
        let needed = 2.0 * boundary.half_width(0.0) + max_spatial_lag;
        if width <= needed {
            out.push(format!(
                "lattice width nx*dx = {width} must exceed 2 g(0) + largest spatial lag = {needed}"
            ));
        }
        out
    }

    pub fn validate(&self, boundary: &AmbitBoundary, max_spatial_lag: f64) -> Result<()> {
        let v = self.violations(boundary, max_spatial_lag);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Lattice(v.join("; ")))
        }
    }
}

/// One retained field, row-major in `t` then `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub index: usize,
    pub nx: usize,
    pub nt: usize,
    pub dx: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl FieldRealization {
    pub fn get(&self, ix: usize, it: usize) -> f64 {
        self.values[it * self.nx + ix]
    }

    pub fn row(&self, it: usize) -> &[f64] {
        &self.values[it * self.nx..(it + 1) * self.nx]
    }
}

/// Field generator for one lattice, with a cell law `D` (normally a
/// [`CellSampler`]; tests substitute degenerate laws).
#[derive(Debug, Clone)]
pub struct Simulator<D> {
    lattice: LatticeConfig,
    mask: AmbitMask,
    burn_in: usize,
    cells: D,
}

impl Simulator<CellSampler> {
    pub fn new(basis: &LevyBasis, boundary: &AmbitBoundary, lattice: LatticeConfig) -> Result<Self> {
        let sampler = basis.cell_sampler(lattice.dx * lattice.dt)?;
        Self::with_cells(boundary, lattice, sampler)
    }
}

impl<D: Distribution<f64> + Sync> Simulator<D> {
    pub fn with_cells(boundary: &AmbitBoundary, lattice: LatticeConfig, cells: D) -> Result<Self> {
        lattice.validate(boundary, 0.0)?;
        let mask = boundary.ambit_mask(lattice.dx, lattice.dt)?;
        let burn_in = lattice.burn_in_depth(boundary);
        if burn_in < mask.depth() {
            return Err(Error::Lattice(format!(
                "burn_in = {burn_in} is shallower than the mask depth {}",
                mask.depth()
            )));
        }
        Ok(Self {
            lattice,
            mask,
            burn_in,
            cells,
        })
    }

    pub fn lattice(&self) -> &LatticeConfig {
        &self.lattice
    }

    pub fn mask(&self) -> &AmbitMask {
        &self.mask
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.lattice.seed);
        rng.set_stream(index as u64);
        rng
    }

    fn slab_count(&self) -> usize {
        self.burn_in + self.lattice.nt - 1
    }

    /// Realization `index`, computed with per-slab running sums: each mask row
    /// contributes one difference of a periodically extended prefix sum.
    pub fn realization(&self, index: usize) -> FieldRealization {
        let LatticeConfig { nx, nt, .. } = self.lattice;
        let reach = self.mask.max_half_count();
        let depth = self.mask.depth();
        let mut rng = self.rng(index);
        let mut cells = vec![0.0; nx];
        let mut ring: Vec<Vec<f64>> = (0..depth.max(1)).map(|_| vec![0.0; nx + 2 * reach + 1]).collect();
        let mut values = vec![0.0; nx * nt];
        for c in 0..self.slab_count() {
            cells.iter_mut().for_each(|v| *v = self.cells.sample(&mut rng));
            let prefix = &mut ring[c % depth.max(1)];
            let mut acc = 0.0;
            for (m, p) in prefix.iter_mut().enumerate().skip(1) {
                acc += cells[(m - 1 + nx * (reach / nx + 1) - reach) % nx];
                *p = acc;
            }
            if c + 1 < self.burn_in {
                continue;
            }
            let row = &mut values[(c + 1 - self.burn_in) * nx..][..nx];
            for (j, &k) in self.mask.half_counts.iter().enumerate() {
                let prefix = &ring[(c - j) % depth];
                let hi = &prefix[reach + k + 1..reach + k + 1 + nx];
                let lo = &prefix[reach - k..reach - k + nx];
                for ((r, &h), &l) in row.iter_mut().zip(hi).zip(lo) {
                    *r += h - l;
                }
            }
            row.iter_mut().for_each(|v| *v = v.exp());
        }
        self.finish(index, values)
    }

    /// Realization `index` by summing the full stencil at every point.
    pub fn realization_direct(&self, index: usize) -> FieldRealization {
        let LatticeConfig { nx, nt, .. } = self.lattice;
        let mut rng = self.rng(index);
        let slabs: Vec<f64> = (0..self.slab_count() * nx)
            .map(|_| self.cells.sample(&mut rng))
            .collect();
        let offsets = self.mask.offsets();
        let mut values = vec![0.0; nx * nt];
        for n in 0..nt {
            for x in 0..nx {
                let mut s = 0.0;
                for &(i, j) in &offsets {
                    let c = self.burn_in + n - 1 - j as usize;
                    let col = (x as i64 + i).rem_euclid(nx as i64) as usize;
                    s += slabs[c * nx + col];
                }
                values[n * nx + x] = s.exp();
            }
        }
        self.finish(index, values)
    }

    fn finish(&self, index: usize, values: Vec<f64>) -> FieldRealization {
        FieldRealization {
            index,
            nx: self.lattice.nx,
            nt: self.lattice.nt,
            dx: self.lattice.dx,
            dt: self.lattice.dt,
            values,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = FieldRealization> + '_ {
        (0..self.lattice.realizations).map(|i| self.realization(i))
    }

    /// Apply `f` to every realization in parallel; results are in index
    /// order whatever the thread count.
    pub fn par_map<T: Send>(&self, f: impl Fn(FieldRealization) -> T + Sync + Send) -> Vec<T> {
        (0..self.lattice.realizations)
            .into_par_iter()
            .map(|i| f(self.realization(i)))
            .collect()
    }
}
