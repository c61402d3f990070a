//! Chain and square-lattice geometry with row-major site indexing.

use serde::{Deserialize, Serialize};

use crate::error::{DgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Chain1d,
    Square2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeGeometry {
    pub kind: LatticeKind,
    /// Sites per dimension.
    pub extent: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl LatticeGeometry {
    pub fn new(kind: LatticeKind, extent: usize, boundary: Boundary) -> Result<Self> {
        let geom = Self { kind, extent, boundary };
        geom.validate()?;
        Ok(geom)
    }

    pub fn chain(extent: usize) -> Result<Self> {
        Self::new(LatticeKind::Chain1d, extent, Boundary::Open)
    }

    pub fn square(extent: usize) -> Result<Self> {
        Self::new(LatticeKind::Square2d, extent, Boundary::Open)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        // a one-site chain is the single-resonator limit
        let min = match self.kind {
            LatticeKind::Chain1d => 1,
            LatticeKind::Square2d => 2,
        };
        if self.extent < min {
            out.push(format!("lattice extent must be >= {min}, got {}", self.extent));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(DgError::Config(v.join("; ")))
        }
    }

    pub fn num_sites(&self) -> usize {
        match self.kind {
            LatticeKind::Chain1d => self.extent,
            LatticeKind::Square2d => self.extent * self.extent,
        }
    }

    pub fn dimensions(&self) -> usize {
        match self.kind {
            LatticeKind::Chain1d => 1,
            LatticeKind::Square2d => 2,
        }
    }

    /// `(row, col)` of a site; `row` is always 0 on a chain.
    pub fn coords(&self, site: usize) -> (usize, usize) {
        match self.kind {
            LatticeKind::Chain1d => (0, site),
            LatticeKind::Square2d => (site / self.extent, site % self.extent),
        }
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        match self.kind {
            LatticeKind::Chain1d => col,
            LatticeKind::Square2d => row * self.extent + col,
        }
    }

    fn step(&self, x: usize, forward: bool) -> Option<usize> {
        let l = self.extent;
        match (forward, self.boundary) {
            (true, _) if x + 1 < l => Some(x + 1),
            (false, _) if x > 0 => Some(x - 1),
            (true, Boundary::Periodic) => Some(0),
            (false, Boundary::Periodic) => Some(l - 1),
            _ => None,
        }
    }

    pub fn neighbors(&self, site: usize) -> Result<Vec<usize>> {
        let total = self.num_sites();
        if site >= total {
            return Err(DgError::SiteOutOfRange { site, total });
        }
        let (row, col) = self.coords(site);
        let mut out = Vec::with_capacity(4);
        let mut push = |s: usize| {
            // periodic L = 2 would otherwise list the same neighbor twice
            if s != site && !out.contains(&s) {
                out.push(s);
            }
        };
        if self.kind == LatticeKind::Square2d {
            if let Some(r) = self.step(row, false) {
                push(self.index(r, col));
            }
            if let Some(r) = self.step(row, true) {
                push(self.index(r, col));
            }
        }
        if let Some(c) = self.step(col, false) {
            push(self.index(row, c));
        }
        if let Some(c) = self.step(col, true) {
            push(self.index(row, c));
        }
        Ok(out)
    }

    /// Neighbor lists for every site, in site order.
    pub fn neighbor_table(&self) -> Vec<Vec<usize>> {
        (0..self.num_sites())
            .map(|s| self.neighbors(s).expect("site in range"))
            .collect()
    }

    pub fn center_site(&self) -> Result<usize> {
        if self.extent.is_multiple_of(2) {
            return Err(DgError::Config(format!(
                "lattice extent {} is even: no exact center site",
                self.extent
            )));
        }
        let c = (self.extent - 1) / 2;
        Ok(self.index(c, c))
    }

    /// Displacement `(di, dj)` of `site` from the center; `di` is 0 on a chain.
    pub fn displacement_from_center(&self, site: usize) -> Result<(isize, isize)> {
        let center = self.center_site()?;
        let (r0, c0) = self.coords(center);
        let (r, c) = self.coords(site);
        Ok((r as isize - r0 as isize, c as isize - c0 as isize))
    }
}
