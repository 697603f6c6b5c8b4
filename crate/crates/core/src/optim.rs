//! Box-constrained Nelder–Mead and coarse grid search in two dimensions.

use serde::{Deserialize, Serialize};

/// Axis-aligned box `[lo, hi]` in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds2 {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Bounds2 {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { lo: [x.0, y.0], hi: [x.1, y.1] }
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.lo[0], self.hi[0]), p[1].clamp(self.lo[1], self.hi[1])]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }
}

/// Tensor grid of cell centres over a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub bounds: Bounds2,
    pub shape: (usize, usize),
}

impl Grid2 {
    pub fn new(bounds: Bounds2, shape: (usize, usize)) -> Self {
        assert!(shape.0 >= 2 && shape.1 >= 2, "grid must be at least 2x2");
        Self { bounds, shape }
    }

    pub fn cell_size(&self) -> [f64; 2] {
        [self.bounds.width(0) / self.shape.0 as f64, self.bounds.width(1) / self.shape.1 as f64]
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let [dx, dy] = self.cell_size();
        [self.bounds.lo[0] + (i as f64 + 0.5) * dx, self.bounds.lo[1] + (j as f64 + 0.5) * dy]
    }

    pub fn len(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Points in scan order: first axis outer, second axis inner.
    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.shape.0).flat_map(move |i| (0..self.shape.1).map(move |j| self.point(i, j)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x: [f64; 2],
    pub f: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Simplex diameter (max-norm) at which the search stops.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial simplex edge as a fraction of the box width per axis.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iters: 2000, initial_step: 0.05 }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn eval<F: FnMut([f64; 2]) -> f64>(f: &mut F, x: [f64; 2]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Minimizes `f` over `bounds` starting from `x0`.
///
/// Trial points are projected onto the box, so the returned point always lies
/// inside it. NaN objective values are treated as +∞.
pub fn nelder_mead<F>(mut f: F, x0: [f64; 2], bounds: &Bounds2, opts: &NelderMeadOptions) -> OptimResult
where
    F: FnMut([f64; 2]) -> f64,
{
    let start = bounds.clamp(x0);
    let mut simplex = [start; 3];
    for axis in 0..2 {
        let step = opts.initial_step * bounds.width(axis);
        let mut v = start;
        v[axis] = if start[axis] + step <= bounds.hi[axis] { start[axis] + step } else { start[axis] - step };
        simplex[axis + 1] = bounds.clamp(v);
    }
    let mut values = simplex.map(|v| eval(&mut f, v));

    let mut iters = 0;
    let mut converged = false;
    loop {
        // order: best, middle, worst
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.map(|i| simplex[i]);
        values = idx.map(|i| values[i]);

        let diameter = simplex[1..]
            .iter()
            .map(|v| (v[0] - simplex[0][0]).abs().max((v[1] - simplex[0][1]).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.tol {
            converged = true;
            break;
        }
        if iters >= opts.max_iters {
            break;
        }
        iters += 1;

        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let worst = simplex[2];
        let xr = bounds.clamp(lerp(centroid, worst, -REFLECT));
        let fr = eval(&mut f, xr);

        if fr < values[0] {
            let xe = bounds.clamp(lerp(centroid, worst, -EXPAND));
            let fe = eval(&mut f, xe);
            if fe < fr {
                simplex[2] = xe;
                values[2] = fe;
            } else {
                simplex[2] = xr;
                values[2] = fr;
            }
            continue;
        }
        if fr < values[1] {
            simplex[2] = xr;
            values[2] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[2] {
            let xc = bounds.clamp(lerp(centroid, xr, CONTRACT));
            (xc, eval(&mut f, xc))
        } else {
            let xc = bounds.clamp(lerp(centroid, worst, CONTRACT));
            (xc, eval(&mut f, xc))
        };
        if fc < values[2].min(fr) {
            simplex[2] = xc;
            values[2] = fc;
            continue;
        }
        for k in 1..3 {
            simplex[k] = lerp(simplex[0], simplex[k], SHRINK);
            values[k] = eval(&mut f, simplex[k]);
        }
    }

    OptimResult { x: simplex[0], f: values[0], iters, converged }
}

/// Evaluates `f` on every grid point and returns the minimizer and its value.
///
/// Ties go to the lowest scan index.
pub fn grid_multistart<F>(mut f: F, grid: &Grid2) -> ([f64; 2], f64)
where
    F: FnMut([f64; 2]) -> f64,
{
    let mut best = (grid.point(0, 0), f64::INFINITY);
    let mut first = true;
    for p in grid.points() {
        let v = eval(&mut f, p);
        if first || v < best.1 {
            best = (p, v);
            first = false;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Bounds2 {
        Bounds2::new((-5.0, 5.0), (-5.0, 5.0))
    }

    #[test]
    fn convex_quadratic() {
        let f = |p: [f64; 2]| (p[0] - 1.0).powi(2) + (p[1] - 2.0).powi(2);
        let r = nelder_mead(f, [0.0, 0.0], &unit_box(), &NelderMeadOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 2.0).abs() < 1e-8, "{:?}", r.x);
        assert!(r.f <= f([0.0, 0.0]));
        assert_eq!(r.f, f(r.x));
    }

    #[test]
    fn minimum_outside_box_lands_on_boundary() {
        let b = Bounds2::new((0.0, 1.0), (0.0, 1.0));
        let f = |p: [f64; 2]| (p[0] - 3.0).powi(2) + (p[1] + 2.0).powi(2);
        let r = nelder_mead(f, [0.5, 0.5], &b, &NelderMeadOptions::default());
        assert!(b.contains(r.x));
        assert!((r.x[0] - 1.0).abs() < 1e-8 && r.x[1].abs() < 1e-8);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let f = |p: [f64; 2]| (p[0] - 1.0).powi(2) + 10.0 * (p[1] - 2.0).powi(2);
        let opts = NelderMeadOptions { max_iters: 3, ..Default::default() };
        let r = nelder_mead(f, [-4.0, -4.0], &unit_box(), &opts);
        assert!(!r.converged);
        assert_eq!(r.iters, 3);
        assert!(r.f <= f([-4.0, -4.0]));
    }

    #[test]
    fn deterministic() {
        let f = |p: [f64; 2]| (p[0] * p[1] - 1.0).powi(2) + (p[0] - p[1]).powi(2);
        let a = nelder_mead(f, [3.0, -1.0], &unit_box(), &NelderMeadOptions::default());
        let b = nelder_mead(f, [3.0, -1.0], &unit_box(), &NelderMeadOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn grid_constant_objective_picks_first_point() {
        let grid = Grid2::new(unit_box(), (4, 3));
        let (p, v) = grid_multistart(|_| 7.0, &grid);
        assert_eq!(p, grid.point(0, 0));
        assert_eq!(v, 7.0);
    }

    #[test]
    fn grid_bowl_finds_centre_cell() {
        let grid = Grid2::new(Bounds2::new((0.0, 1.0), (0.0, 2.0)), (5, 5));
        let (p, _) = grid_multistart(|p| (p[0] - 0.5).powi(2) + (p[1] - 1.0).powi(2), &grid);
        assert_eq!(p, grid.point(2, 2));
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn result_stays_in_box(
                cx in -10.0f64..10.0, cy in -10.0f64..10.0,
                x0 in -1.0f64..1.0, y0 in -1.0f64..1.0,
            ) {
                let b = Bounds2::new((-1.0, 1.0), (-1.0, 1.0));
                let r = nelder_mead(|p| (p[0] - cx).powi(2) + (p[1] - cy).abs(), [x0, y0], &b, &NelderMeadOptions::default());
                prop_assert!(b.contains(r.x));
            }
        }
    }
}
