//! Axis-aligned boxes with an optional ball mask, and tensor lattices over them.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Closed box `[lo, hi]`, optionally intersected with a closed ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
    ball: Option<Ball>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, ball: Option<Ball>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Config("box bounds must be nonempty and of equal length".into()));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite())
        {
            return Err(Error::Config(format!("degenerate box {lo:?} .. {hi:?}")));
        }
        if let Some(b) = &ball {
            if b.center.len() != lo.len() || !(b.radius > 0.0) {
                return Err(Error::Config("ball mask has wrong dimension or radius".into()));
            }
        }
        Ok(Region { lo, hi, ball })
    }

    pub fn unit_box(dim: usize) -> Self {
        Region::new(vec![0.0; dim], vec![1.0; dim], None).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn ball(&self) -> Option<&Ball> {
        self.ball.as_ref()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn center(&self) -> Vec<f64> {
        match &self.ball {
            Some(b) => b.center.clone(),
            None => self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        }
    }

    pub fn diam(&self) -> f64 {
        let box_diam = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt();
        match &self.ball {
            Some(b) => box_diam.min(2.0 * b.radius),
            None => box_diam,
        }
    }

    /// Membership with a relative slack that absorbs round-off on the boundary.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with(x, 1e-12)
    }

    pub fn contains_with(&self, x: &[f64], rel: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for i in 0..self.dim() {
            let slack = rel * (1.0 + self.lo[i].abs().max(self.hi[i].abs()));
            if x[i] < self.lo[i] - slack || x[i] > self.hi[i] + slack {
                return false;
            }
        }
        match &self.ball {
            Some(b) => dist(x, &b.center) <= b.radius * (1.0 + rel) + rel,
            None => true,
        }
    }

    /// Whether the closed ball `B_r(x0)` fits inside the region.
    pub fn contains_ball(&self, x0: &[f64], r: f64) -> bool {
        let tol = 1e-12;
        for i in 0..self.dim() {
            if x0[i] - r < self.lo[i] - tol || x0[i] + r > self.hi[i] + tol {
                return false;
            }
        }
        match &self.ball {
            Some(b) => dist(x0, &b.center) + r <= b.radius + tol,
            None => true,
        }
    }

    pub fn check(&self, which: &'static str, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                which,
                point: x.to_vec(),
            })
        }
    }

    /// Uniform sample by rejection against the mask.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..self.dim())
                .map(|i| rng.random_range(self.lo[i]..=self.hi[i]))
                .collect();
            if self.contains(&x) {
                return x;
            }
        }
    }

    /// A copy shrunk by `margin` on every side (boxes and masks alike).
    pub fn shrink(&self, margin: f64) -> Result<Self> {
        let lo = self.lo.iter().map(|v| v + margin).collect();
        let hi = self.hi.iter().map(|v| v - margin).collect();
        let ball = self.ball.as_ref().map(|b| Ball {
            center: b.center.clone(),
            radius: b.radius - margin,
        });
        Region::new(lo, hi, ball)
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Nodes at cell midpoints; each node carries one cell of volume.
    CellCentered,
    /// Nodes on cell corners, including the box boundary.
    Vertex,
}

/// Tensor lattice over a box with masked nodes dropped. Active nodes are
/// stored in lexicographic order (last axis fastest).
#[derive(Debug, Clone)]
pub struct Grid {
    region: Region,
    counts: Vec<usize>,
    placement: Placement,
    spacing: Vec<f64>,
    coords: Vec<f64>,
    lattice_ids: Vec<usize>,
    lookup: Vec<usize>,
}

const MASKED: usize = usize::MAX;

impl Grid {
    pub fn new(region: Region, counts: Vec<usize>, placement: Placement) -> Result<Self> {
        let dim = region.dim();
        if counts.len() != dim || counts.iter().any(|&c| c < 2) {
            return Err(Error::Config(format!(
                "grid counts {counts:?} must have {dim} entries, each at least 2"
            )));
        }
        let spacing: Vec<f64> = (0..dim)
            .map(|i| match placement {
                Placement::CellCentered => region.width(i) / counts[i] as f64,
                Placement::Vertex => region.width(i) / (counts[i] - 1) as f64,
            })
            .collect();
        let total: usize = counts.iter().product();
        let mut coords = Vec::new();
        let mut lattice_ids = Vec::new();
        let mut lookup = vec![MASKED; total];
        let mut idx = vec![0usize; dim];
        let mut p = vec![0.0; dim];
        for lid in 0..total {
            for i in 0..dim {
                p[i] = match placement {
                    Placement::CellCentered => region.lo[i] + (idx[i] as f64 + 0.5) * spacing[i],
                    Placement::Vertex => {
                        if idx[i] + 1 == counts[i] {
                            region.hi[i]
                        } else {
                            region.lo[i] + idx[i] as f64 * spacing[i]
                        }
                    }
                };
            }
            let keep = match &region.ball {
                Some(b) => dist(&p, &b.center) <= b.radius,
                None => true,
            };
            if keep {
                lookup[lid] = lattice_ids.len();
                lattice_ids.push(lid);
                coords.extend_from_slice(&p);
            }
            for i in (0..dim).rev() {
                idx[i] += 1;
                if idx[i] < counts[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        if lattice_ids.is_empty() {
            return Err(Error::Config("grid mask removes every node".into()));
        }
        Ok(Grid {
            region,
            counts,
            placement,
            spacing,
            coords,
            lattice_ids,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn len(&self) -> usize {
        self.lattice_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice_ids.is_empty()
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[k * d..(k + 1) * d]
    }

    /// All active node coordinates, flat, `dim` per node.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        let mut lid = self.lattice_ids[k];
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            idx[i] = lid % self.counts[i];
            lid /= self.counts[i];
        }
        idx
    }

    pub fn node_at(&self, idx: &[usize]) -> Option<usize> {
        let mut lid = 0;
        for i in 0..self.dim() {
            if idx[i] >= self.counts[i] {
                return None;
            }
            lid = lid * self.counts[i] + idx[i];
        }
        match self.lookup[lid] {
            MASKED => None,
            k => Some(k),
        }
    }

    /// Active node displaced by an integer lattice offset, if any.
    pub fn neighbor(&self, k: usize, offset: &[isize]) -> Option<usize> {
        let idx = self.multi_index(k);
        let mut moved = Vec::with_capacity(idx.len());
        for (i, &o) in offset.iter().enumerate() {
            let v = idx[i] as isize + o;
            if v < 0 {
                return None;
            }
            moved.push(v as usize);
        }
        self.node_at(&moved)
    }

    /// Nearest active node by Euclidean distance; lowest index on ties.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for k in 0..self.len() {
            let d = dist(self.point(k), x);
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }
}
