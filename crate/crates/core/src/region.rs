//! Regions of the complex plane bounded by the separatrix, and their
//! cross-sections along vertical lines.

use serde::{Deserialize, Serialize};

use crate::eigenstate::Eigenstate;
use crate::model::ComplexPoint;

/// Radius of the discs cut out around poles.
pub const POLE_EXCLUSION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    /// Union of all subnests, separatrix included.
    InsideSeparatrix,
    OutsideSeparatrix,
    /// Subnest lobe around the stagnation point with this index.
    Lobe(usize),
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub level: u32,
    pub kind: RegionKind,
    pub xr: (f64, f64),
    pub xi: (f64, f64),
    pub exclusion_radius: f64,
}

impl RegionSpec {
    pub fn bounded(state: &Eigenstate, kind: RegionKind, xr: (f64, f64), xi: (f64, f64)) -> Self {
        Self { level: state.level(), kind, xr, xi, exclusion_radius: POLE_EXCLUSION }
    }

    /// Box of the whole inside region with a small margin.
    pub fn inside(state: &Eigenstate) -> Self {
        let (lo, hi) = inside_extent(state);
        Self::bounded(state, RegionKind::InsideSeparatrix, (lo, hi), (-1.0, 1.0))
    }

    pub fn lobe(state: &Eigenstate, index: usize) -> Self {
        let (lo, hi) = inside_extent(state);
        Self::bounded(state, RegionKind::Lobe(index), (lo, hi), (-1.0, 1.0))
    }

    /// Outside region truncated to `|X_r|, |X_i| ≤ half_width`.
    pub fn outside(state: &Eigenstate, half_width: f64) -> Self {
        Self::bounded(state, RegionKind::OutsideSeparatrix, (-half_width, half_width), (-half_width, half_width))
    }

    pub fn rectangle(state: &Eigenstate, xr: (f64, f64), xi: (f64, f64)) -> Self {
        Self::bounded(state, RegionKind::Box, xr, xi)
    }

    fn in_box(&self, p: ComplexPoint) -> bool {
        p.xr >= self.xr.0 && p.xr <= self.xr.1 && p.xi >= self.xi.0 && p.xi <= self.xi.1
    }

    fn kind_contains(&self, state: &Eigenstate, p: ComplexPoint) -> bool {
        match self.kind {
            RegionKind::Box => true,
            RegionKind::InsideSeparatrix => state.in_subnest(p, true),
            RegionKind::OutsideSeparatrix => !state.in_subnest(p, true),
            RegionKind::Lobe(j) => state.in_subnest(p, true) && state.basin_of(p) == j,
        }
    }

    /// Membership predicate; pole discs are excluded.
    pub fn contains(&self, state: &Eigenstate, p: ComplexPoint) -> bool {
        self.in_box(p)
            && !state.pole_positions().iter().any(|&r| ComplexPoint::real(r).distance(p) < self.exclusion_radius)
            && self.kind_contains(state, p)
    }

    /// Levels whose curves bound the region.
    fn boundary_levels(&self, state: &Eigenstate) -> Vec<f64> {
        let mut levels: Vec<f64> = match self.kind {
            RegionKind::Box => Vec::new(),
            RegionKind::Lobe(j) => vec![state.basin_limit(j)],
            _ => state.basin_limits().iter().copied().filter(|l| l.is_finite()).collect(),
        };
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
    }

    /// Real-axis positions where the cross-section changes topology; the outer
    /// quadrature must not straddle them.
    pub fn breakpoints(&self, state: &Eigenstate) -> Vec<f64> {
        let mut pts = vec![self.xr.0, self.xr.1];
        for lvl in self.boundary_levels(state) {
            pts.extend(state.real_level_crossings(lvl));
        }
        for &r in state.pole_positions() {
            pts.extend([r - self.exclusion_radius, r, r + self.exclusion_radius]);
        }
        pts.extend(state.center_positions());
        pts.retain(|&x| x >= self.xr.0 && x <= self.xr.1);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        pts
    }

    /// `X_i` intervals of the region on the vertical line through `xr`, ascending.
    pub fn intervals_at(&self, state: &Eigenstate, xr: f64) -> Vec<(f64, f64)> {
        if xr < self.xr.0 || xr > self.xr.1 {
            return Vec::new();
        }
        let (y_lo, y_hi) = self.xi;
        // The level function is symmetric in X_i, so split at 0 when the box straddles it.
        let mut cuts = vec![y_lo, y_hi];
        if y_lo < 0.0 && y_hi > 0.0 {
            cuts.push(0.0);
        }
        for lvl in self.boundary_levels(state) {
            for y in level_roots(state, xr, lvl, y_lo.abs().max(y_hi.abs())) {
                cuts.extend([y, -y]);
            }
        }
        for &r in state.pole_positions() {
            let d = (xr - r).abs();
            if d < self.exclusion_radius {
                let h = (self.exclusion_radius * self.exclusion_radius - d * d).sqrt();
                cuts.extend([-h, h]);
            }
        }
        cuts.retain(|&y| y >= y_lo && y <= y_hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out: Vec<(f64, f64)> = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a || !self.contains(state, ComplexPoint::new(xr, 0.5 * (a + b))) {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.1 == a => last.1 = b,
                _ => out.push((a, b)),
            }
        }
        out
    }
}

/// Real-axis extent of the inside region with a margin.
fn inside_extent(state: &Eigenstate) -> (f64, f64) {
    let top = state.basin_limits().iter().copied().filter(|l| l.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return (-1.0, 1.0);
    }
    let xs = state.real_level_crossings(top);
    let lo = xs.first().copied().unwrap_or(-1.0);
    let hi = xs.last().copied().unwrap_or(1.0);
    (lo - 1e-9, hi + 1e-9)
}

/// Positive `X_i` where `ln G(X_r + iX_i)` crosses `level`, below `y_max`.
pub fn level_roots(state: &Eigenstate, xr: f64, level: f64, y_max: f64) -> Vec<f64> {
    let f = |y: f64| state.log_level(ComplexPoint::new(xr, y)) - level;
    let cells = ((y_max / 2e-3).ceil() as usize).max(1);
    let dy = y_max / cells as f64;
    let mut roots = Vec::new();
    let mut a = 0.0;
    let mut fa = f(a);
    for k in 1..=cells {
        let b = k as f64 * dy;
        let fb = f(b);
        if fa.is_finite() && fb.is_finite() && fa.signum() != fb.signum() && fb != 0.0 {
            roots.push(bisect(&f, a, b, fa));
        } else if fb == 0.0 {
            roots.push(b);
        }
        a = b;
        fa = fb;
    }
    roots
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
