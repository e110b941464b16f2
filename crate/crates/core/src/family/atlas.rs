//! Affine ball charts on the flat torus and the nerve of their inner balls.

use std::collections::VecDeque;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::bump::CHART_RADIUS;
use crate::error::{invalid, Error, Result};
use crate::geom::{TorusPoint, MAX_DIM};

/// `phi(x) = wrap(x - center) / scale`, mapping `U = B(center, 4 scale)` onto `B(0, 4)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chart {
    pub center: TorusPoint,
    pub scale: f64,
}

impl Chart {
    pub fn new(center: TorusPoint, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || CHART_RADIUS * scale >= 0.5 {
            return Err(invalid(format!("chart scale {scale} must be positive with 4*scale < 1/2")));
        }
        Ok(Self { center, scale })
    }

    /// Model coordinates `phi(x)`.
    #[inline]
    pub fn to_local(&self, x: &TorusPoint) -> Vector3<f64> {
        self.center.displacement_to(x) / self.scale
    }

    /// `phi^{-1}(p)`.
    #[inline]
    pub fn from_local(&self, p: &Vector3<f64>) -> TorusPoint {
        self.center.translate(&(p * self.scale))
    }
}

/// Serializable description of a uniform grid atlas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAtlasConfig {
    pub per_axis: usize,
    pub scale: f64,
}

impl GridAtlasConfig {
    /// Smallest grid whose inner balls cover: 6x6 on `T^2`, 7x7x7 on `T^3`.
    pub fn default_for(dim: usize) -> Self {
        match dim {
            2 => Self { per_axis: 6, scale: 0.12 },
            3 => Self { per_axis: 7, scale: 0.1245 },
            _ => Self { per_axis: 4, scale: 0.12 },
        }
    }
}

/// A finite atlas whose inner sets `W_i = phi_i^{-1}(B(0,1))` cover the torus.
#[derive(Clone, Debug)]
pub struct ChartAtlas {
    dim: usize,
    charts: Vec<Chart>,
    adjacency: Vec<Vec<usize>>,
    diameter: usize,
}

/// Grid resolution per axis used when validating the cover.
fn cover_resolution(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 256,
        _ => 48,
    }
}

impl ChartAtlas {
    /// Validates chart scales, the cover on a dense grid and connectivity of
    /// the nerve, and computes the nerve's diameter.
    pub fn new(dim: usize, charts: Vec<Chart>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(invalid(format!("atlas dimension {dim} not in 1..=3")));
        }
        if charts.is_empty() {
            return Err(invalid("atlas has no charts"));
        }
        for c in &charts {
            if c.center.dim() != dim {
                return Err(invalid("chart center dimension differs from atlas dimension"));
            }
            Chart::new(c.center, c.scale)?;
        }
        let l = charts.len();
        let mut adjacency = vec![Vec::new(); l];
        for i in 0..l {
            for j in i + 1..l {
                let d = charts[i].center.distance(&charts[j].center);
                if d < charts[i].scale + charts[j].scale {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        let mut atlas = Self { dim, charts, adjacency, diameter: 0 };
        atlas.check_cover(cover_resolution(dim))?;
        let mut diameter = 0;
        for i in 0..l {
            let dist = atlas.bfs(i);
            for d in dist {
                match d {
                    Some(d) => diameter = diameter.max(d),
                    None => return Err(invalid("nerve of the inner sets is disconnected")),
                }
            }
        }
        atlas.diameter = diameter;
        Ok(atlas)
    }

    /// `per_axis^dim` charts centered at `k / per_axis` with a common scale.
    pub fn grid(dim: usize, config: GridAtlasConfig) -> Result<Self> {
        if config.per_axis == 0 || !(1..=MAX_DIM).contains(&dim) {
            return Err(invalid("grid atlas needs per_axis >= 1 and dimension in 1..=3"));
        }
        let m = config.per_axis;
        let total = m.pow(dim as u32);
        let mut charts = Vec::with_capacity(total);
        for idx in 0..total {
            let mut c = [0.0; MAX_DIM];
            let mut rem = idx;
            for k in (0..dim).rev() {
                c[k] = (rem % m) as f64 / m as f64;
                rem /= m;
            }
            charts.push(Chart::new(TorusPoint::new(&c[..dim])?, config.scale)?);
        }
        Self::new(dim, charts)
    }

    pub fn default_for(dim: usize) -> Result<Self> {
        Self::grid(dim, GridAtlasConfig::default_for(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, i: usize) -> Result<&Chart> {
        self.charts.get(i).ok_or_else(|| invalid(format!("chart index {i} out of range ({})", self.len())))
    }

    /// Graph diameter `D` of the nerve of `{W_i}`.
    pub fn cech_diameter(&self) -> usize {
        self.diameter
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Chart whose inner set contains `x`, preferring the smallest `|phi_i(x)|`.
    pub fn containing_inner(&self, x: &TorusPoint) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.charts.iter().enumerate() {
            let r = c.to_local(x).norm();
            if r < 1.0 && best.is_none_or(|(_, b)| r < b) {
                best = Some((i, r));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Shortest chart path from `from` to `to` in the nerve (both inclusive).
    pub fn route(&self, from: usize, to: usize) -> Result<Vec<usize>> {
        let l = self.len();
        if from >= l || to >= l {
            return Err(invalid("chart index out of range"));
        }
        let mut prev = vec![usize::MAX; l];
        let mut seen = vec![false; l];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(i) = queue.pop_front() {
            if i == to {
                break;
            }
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    prev[j] = i;
                    queue.push_back(j);
                }
            }
        }
        if !seen[to] {
            return Err(Error::Internal(format!("no nerve path from chart {from} to {to}")));
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    fn bfs(&self, from: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[from] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(i) = queue.pop_front() {
            let d = dist[i].unwrap_or(0);
            for &j in &self.adjacency[i] {
                if dist[j].is_none() {
                    dist[j] = Some(d + 1);
                    queue.push_back(j);
                }
            }
        }
        dist
    }

    /// Checks that every point of a `resolution^dim` grid (cell centers) lies
    /// in some inner set.
    pub fn check_cover(&self, resolution: usize) -> Result<()> {
        let total = resolution.pow(self.dim as u32);
        let mut last_hit = 0usize;
        for idx in 0..total {
            let mut c = Vector3::zeros();
            let mut rem = idx;
            for k in (0..self.dim).rev() {
                c[k] = ((rem % resolution) as f64 + 0.5) / resolution as f64;
                rem /= resolution;
            }
            let x = TorusPoint::from_lift(c, self.dim);
            // neighboring grid points usually share a chart
            if self.charts[last_hit].to_local(&x).norm_squared() < 1.0 {
                continue;
            }
            match self.charts.iter().position(|ch| ch.to_local(&x).norm_squared() < 1.0) {
                Some(i) => last_hit = i,
                None => return Err(invalid(format!("inner sets do not cover the torus: {x} uncovered"))),
            }
        }
        Ok(())
    }
}
