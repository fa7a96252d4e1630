//! Finite menus of b-affine pieces, discrete b-transforms and envelopes.

use crate::benefit::BenefitFunction;
use crate::domain::Grid;
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// One menu item: `x -> b(x, y) + a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BAffinePiece {
    pub y: Vec<f64>,
    pub a: f64,
    #[serde(default)]
    pub frozen: bool,
}

impl BAffinePiece {
    pub fn new(y: Vec<f64>, a: f64) -> Self {
        BAffinePiece { y, a, frozen: false }
    }

    pub fn null(y: Vec<f64>, a: f64) -> Self {
        BAffinePiece { y, a, frozen: true }
    }

    #[inline]
    pub fn value(&self, b: &BenefitFunction, x: &[f64]) -> f64 {
        b.eval(x, &self.y) + self.a
    }
}

/// Maximum of finitely many b-affine pieces. The frozen null piece sits at
/// index 0, so the lowest-index tie-break always favours nonparticipation.
#[derive(Debug, Clone)]
pub struct BConvexFunction {
    pieces: Vec<BAffinePiece>,
    benefit: Arc<BenefitFunction>,
}

impl BConvexFunction {
    pub fn new(benefit: Arc<BenefitFunction>, pieces: Vec<BAffinePiece>) -> Result<Self> {
        if pieces.is_empty() || !pieces[0].frozen {
            return Err(Error::Config("menu must start with the frozen null piece".into()));
        }
        if pieces.iter().filter(|p| p.frozen).count() != 1 {
            return Err(Error::Config("menu must contain exactly one frozen piece".into()));
        }
        for p in &pieces {
            if p.y.len() != benefit.dim() || !p.a.is_finite() {
                return Err(Error::Config(format!("malformed menu piece {p:?}")));
            }
            benefit.y_domain().check("Y", &p.y)?;
        }
        Ok(BConvexFunction { pieces, benefit })
    }

    pub fn null_only(benefit: Arc<BenefitFunction>, null: BAffinePiece) -> Result<Self> {
        Self::new(benefit, vec![BAffinePiece { frozen: true, ..null }])
    }

    pub fn pieces(&self) -> &[BAffinePiece] {
        &self.pieces
    }

    pub fn null_piece(&self) -> &BAffinePiece {
        &self.pieces[0]
    }

    pub fn benefit(&self) -> &Arc<BenefitFunction> {
        &self.benefit
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Appends a piece; it loses every tie to the existing menu.
    pub fn with_piece(&self, p: BAffinePiece) -> Result<Self> {
        let mut pieces = self.pieces.clone();
        pieces.push(BAffinePiece { frozen: false, ..p });
        Self::new(self.benefit.clone(), pieces)
    }

    #[inline]
    pub fn eval_unchecked(&self, x: &[f64]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, p) in self.pieces.iter().enumerate() {
            let v = p.value(&self.benefit, x);
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    pub fn eval_u(&self, x: &[f64]) -> Result<(f64, usize)> {
        self.benefit.x_domain().check("X", x)?;
        Ok(self.eval_unchecked(x))
    }

    #[allow(non_snake_case)]
    pub fn Yu_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, i) = self.eval_u(x)?;
        Ok(self.pieces[i].y.clone())
    }

    /// Values and winners at every grid node.
    pub fn on_grid(&self, grid: &Grid) -> (Vec<f64>, Vec<usize>) {
        (0..grid.len())
            .into_par_iter()
            .map(|k| self.eval_unchecked(grid.point(k)))
            .unzip()
    }

    pub fn sample(&self, grid: &Grid) -> GridFunction {
        GridFunction::from_grid(grid, self.on_grid(grid).0)
    }

    /// The b-support at `x0`, checked against `u` on the grid nodes.
    pub fn support_at(&self, x0: &[f64], grid: &Grid) -> Result<BAffinePiece> {
        let (u0, i) = self.eval_u(x0)?;
        let y0 = self.pieces[i].y.clone();
        let a = u0 - self.benefit.eval(x0, &y0);
        for k in 0..grid.len() {
            let x = grid.point(k);
            let excess = self.benefit.eval(x, &y0) + a - self.eval_unchecked(x).0;
            if excess > 1e-10 {
                return Err(Error::SupportViolation {
                    x0: x0.to_vec(),
                    at: x.to_vec(),
                    excess,
                });
            }
        }
        Ok(BAffinePiece {
            y: y0,
            a,
            frozen: self.pieces[i].frozen,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.pieces).expect("menu serializes")
    }

    pub fn from_json(benefit: Arc<BenefitFunction>, text: &str) -> Result<Self> {
        let pieces: Vec<BAffinePiece> = serde_json::from_str(text).map_err(|e| Error::Config(format!("menu: {e}")))?;
        Self::new(benefit, pieces)
    }
}

/// Values on a finite node set (a lattice or any scattered set of points).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(dim: usize, coords: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() != dim * values.len() {
            return Err(Error::Config("grid function coordinates and values disagree".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("grid function has non-finite values".into()));
        }
        Ok(GridFunction { dim, coords, values })
    }

    pub fn from_grid(grid: &Grid, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len());
        GridFunction {
            dim: grid.dim(),
            coords: grid.coords().to_vec(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn transform(b: &BenefitFunction, src: &GridFunction, dst_coords: &[f64], src_is_x: bool) -> GridFunction {
    let d = src.dim;
    let values: Vec<f64> = dst_coords
        .par_chunks(d)
        .map(|q| {
            let mut best = f64::NEG_INFINITY;
            for k in 0..src.len() {
                let p = src.point(k);
                let bv = if src_is_x { b.eval(p, q) } else { b.eval(q, p) };
                let v = bv - src.values[k];
                if v > best {
                    best = v;
                }
            }
            best
        })
        .collect();
    GridFunction {
        dim: d,
        coords: dst_coords.to_vec(),
        values,
    }
}

/// `v(y) = max_x b(x, y) - u(x)` over the nodes of `u`.
pub fn b_transform_v(b: &BenefitFunction, u: &GridFunction, y_coords: &[f64]) -> GridFunction {
    transform(b, u, y_coords, true)
}

/// `u(x) = max_y b(x, y) - v(y)` over the nodes of `v`.
pub fn b_transform_u(b: &BenefitFunction, v: &GridFunction, x_coords: &[f64]) -> GridFunction {
    transform(b, v, x_coords, false)
}

/// Double transform through the product nodes `y_coords`, back onto the
/// nodes of `u`.
pub fn bconvex_envelope(b: &BenefitFunction, u: &GridFunction, y_coords: &[f64]) -> GridFunction {
    let v = b_transform_v(b, u, y_coords);
    b_transform_u(b, &v, u.coords())
}
