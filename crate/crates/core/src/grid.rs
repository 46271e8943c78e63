//! Tensor-product grids, cell-centered fields, rearrangement and the
//! mass-concentration order.
//!
//! Grids are uniform boxes `[-L_1, L_1] x ... x [-L_N, L_N]` with an odd
//! number of cells per axis, so one cell is centered exactly at the origin
//! and every cell has an exact mirror partner across each coordinate
//! hyperplane. That makes symmetry (SSNI) and reflection checks exact at the
//! grid level.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Uniform cell-centered grid on a truncated box.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    l: Vec<f64>,
    n: Vec<usize>,
    h: Vec<f64>,
    strides: Vec<usize>,
}

impl TensorGrid {
    /// `l` are half-widths per axis, `n` cell counts (odd, >= 3).
    pub fn new(l: Vec<f64>, n: Vec<usize>) -> Result<Self> {
        if l.is_empty() || l.len() != n.len() {
            return Err(Error::InvalidGrid(
                "half-widths and cell counts must have equal nonzero length".into(),
            ));
        }
        for (&li, &ni) in l.iter().zip(&n) {
            if !(li > 0.0) || !li.is_finite() {
                return Err(Error::InvalidGrid(format!("half-width {li} must be > 0")));
            }
            if ni < 3 || ni % 2 == 0 {
                return Err(Error::InvalidGrid(format!(
                    "cell count {ni} must be odd and >= 3"
                )));
            }
        }
        let h: Vec<f64> = l.iter().zip(&n).map(|(&li, &ni)| 2.0 * li / ni as f64).collect();
        let mut strides = vec![1usize; n.len()];
        for i in (0..n.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * n[i + 1];
        }
        Ok(Self { l, n, h, strides })
    }

    /// Square box in `dim` dimensions.
    pub fn cube(dim: usize, half_width: f64, cells: usize) -> Result<Self> {
        Self::new(vec![half_width; dim], vec![cells; dim])
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }
    pub fn half_widths(&self) -> &[f64] {
        &self.l
    }
    pub fn cells(&self) -> &[usize] {
        &self.n
    }
    pub fn spacing(&self) -> &[f64] {
        &self.h
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn cell_count(&self) -> usize {
        self.n.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.h.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    /// Center coordinate of cell `idx` along `axis`.
    pub fn coord(&self, axis: usize, idx: usize) -> f64 {
        -self.l[axis] + (idx as f64 + 0.5) * self.h[axis]
    }

    /// Multi-index of a flat cell index.
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        self.strides
            .iter()
            .map(|&s| {
                let q = rest / s;
                rest %= s;
                q
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(&m, &s)| m * s).sum()
    }

    /// Cell-center coordinates of a flat index.
    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(ax, &i)| self.coord(ax, i))
            .collect()
    }

    /// Flat index of the mirror cell across the hyperplane `x_axis = 0`.
    pub fn mirror_index(&self, flat: usize, axis: usize) -> usize {
        let i = (flat / self.strides[axis]) % self.n[axis];
        let j = self.n[axis] - 1 - i;
        (flat as isize + (j as isize - i as isize) * self.strides[axis] as isize) as usize
    }

    /// Flat index of the cell at the origin.
    pub fn center_index(&self) -> usize {
        let multi: Vec<usize> = self.n.iter().map(|&ni| (ni - 1) / 2).collect();
        self.flat_index(&multi)
    }
}

/// Cell-centered scalar field on a [`TensorGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: TensorGrid,
    values: Vec<f64>,
    /// Solver time stamp, when the field belongs to a trajectory.
    pub time: Option<f64>,
}

impl Field {
    pub fn new(grid: TensorGrid, values: Vec<f64>, time: Option<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::InvalidGrid(format!(
                "value count {} does not match cell count {}",
                values.len(),
                grid.cell_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("field values must be finite".into()));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: TensorGrid) -> Self {
        let n = grid.cell_count();
        Self {
            grid,
            values: vec![0.0; n],
            time: None,
        }
    }

    /// Sample a function at cell centers (midpoint rule).
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: TensorGrid, f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.cell_count());
        for flat in 0..grid.cell_count() {
            values.push(f(&grid.cell_center(flat)));
        }
        Field::new(grid, values, None)
    }

    /// Per-cell averages by `sub`-fold subsampling along each axis; reduces
    /// midpoint-sampling bias when the field has features near the grid scale.
    pub fn from_cell_averages<F: Fn(&[f64]) -> f64>(
        grid: TensorGrid,
        f: F,
        sub: usize,
    ) -> Result<Self> {
        if sub == 0 {
            return Err(Error::InvalidParameter("sub must be >= 1".into()));
        }
        let dim = grid.dim();
        let subpoints = sub.pow(dim as u32);
        let mut values = Vec::with_capacity(grid.cell_count());
        let mut point = vec![0.0; dim];
        for flat in 0..grid.cell_count() {
            let center = grid.cell_center(flat);
            let mut acc = 0.0;
            for s in 0..subpoints {
                let mut rest = s;
                for ax in 0..dim {
                    let k = rest % sub;
                    rest /= sub;
                    point[ax] = center[ax]
                        + grid.spacing()[ax] * ((k as f64 + 0.5) / sub as f64 - 0.5);
                }
                acc += f(&point);
            }
            values.push(acc / subpoints as f64);
        }
        Field::new(grid, values, None)
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    /// Midpoint-rule integral `sum values * cell volume` (the total mass for
    /// nonnegative fields).
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `L^q` norm for `q in [1, inf]`; `q = f64::INFINITY` gives `max |value|`.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        if q < 1.0 || q.is_nan() {
            return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
        }
        if q.is_infinite() {
            return Ok(self
                .values
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max));
        }
        let vol = self.grid.cell_volume();
        Ok((self.values.iter().map(|v| v.abs().powf(q)).sum::<f64>() * vol).powf(1.0 / q))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `|| (self - other)_+ ||_1`, the one-sided L1 distance used by the
    /// contraction estimates.
    pub fn l1_positive_part_diff(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let vol = self.grid.cell_volume();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).max(0.0))
            .sum::<f64>()
            * vol)
    }

    pub fn l1_distance(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let vol = self.grid.cell_volume();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .sum::<f64>()
            * vol)
    }

    pub fn linf_distance(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("fields live on different grids".into()));
        }
        Ok(())
    }

    /// Decreasing rearrangement: cell values sorted descending (the step
    /// function u* over cumulative cell volumes) plus its running integral.
    pub fn decreasing_rearrangement(&self) -> (Vec<f64>, ConcentrationCurve) {
        let mut sorted = self.values.clone();
        sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite values"));
        let vol = self.grid.cell_volume();
        let mut volumes = Vec::with_capacity(sorted.len());
        let mut masses = Vec::with_capacity(sorted.len());
        let mut acc = 0.0;
        for (k, &v) in sorted.iter().enumerate() {
            acc += v * vol;
            volumes.push((k + 1) as f64 * vol);
            masses.push(acc);
        }
        (sorted, ConcentrationCurve { volumes, masses })
    }

    /// Schwarz symmetrization onto the same grid: cells ranked by distance
    /// from the origin (ties broken by flat index) receive the values sorted
    /// descending. Mass and every `L^q` norm are preserved exactly.
    pub fn schwarz_symmetrize(&self) -> Field {
        let count = self.grid.cell_count();
        let mut order: Vec<usize> = (0..count).collect();
        let r2: Vec<f64> = (0..count)
            .map(|i| {
                self.grid
                    .cell_center(i)
                    .iter()
                    .map(|&c| c * c)
                    .sum::<f64>()
            })
            .collect();
        order.sort_unstable_by(|&a, &b| {
            r2[a]
                .partial_cmp(&r2[b])
                .expect("finite radii")
                .then(a.cmp(&b))
        });
        let mut sorted = self.values.clone();
        sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite values"));
        let mut out = vec![0.0; count];
        for (rank, &cell) in order.iter().enumerate() {
            out[cell] = sorted[rank];
        }
        Field {
            grid: self.grid.clone(),
            values: out,
            time: self.time,
        }
    }

    /// Separately symmetric and nonincreasing: even in each coordinate and
    /// nonincreasing in each `|x_i|` along grid lines, up to `tol`.
    pub fn is_ssni(&self, tol: f64) -> bool {
        self.ssni_violation() <= tol
    }

    /// Largest violation of mirror symmetry or outward monotonicity.
    pub fn ssni_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        let dim = self.grid.dim();
        for axis in 0..dim {
            let stride = self.grid.strides()[axis];
            let n = self.grid.cells()[axis];
            let mid = (n - 1) / 2;
            for flat in 0..self.grid.cell_count() {
                let i = (flat / stride) % n;
                // symmetry against the mirror cell
                let m = self.grid.mirror_index(flat, axis);
                worst = worst.max((self.values[flat] - self.values[m]).abs());
                // outward monotone on the nonnegative side
                if i >= mid && i + 1 < n {
                    worst = worst.max(self.values[flat + stride] - self.values[flat]);
                }
            }
        }
        worst
    }

    /// Values along the grid line through the origin parallel to `axis`, on
    /// the nonnegative side: pairs (coordinate, value).
    pub fn axis_profile(&self, axis: usize) -> Vec<(f64, f64)> {
        let mut multi: Vec<usize> = self.grid.cells().iter().map(|&ni| (ni - 1) / 2).collect();
        let n = self.grid.cells()[axis];
        let mid = (n - 1) / 2;
        (mid..n)
            .map(|i| {
                multi[axis] = i;
                (self.grid.coord(axis, i), self.values[self.grid.flat_index(&multi)])
            })
            .collect()
    }

    /// Serialize as a small text file: header (N, n, L, t) then one value per
    /// line with 17 significant digits (round-trips f64 exactly).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "anisodiff-field v1").unwrap();
        writeln!(out, "dim = {}", self.grid.dim()).unwrap();
        writeln!(
            out,
            "n = {}",
            self.grid.cells().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        )
        .unwrap();
        writeln!(
            out,
            "l = {}",
            self.grid
                .half_widths()
                .iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        )
        .unwrap();
        match self.time {
            Some(t) => writeln!(out, "t = {t:.17e}").unwrap(),
            None => writeln!(out, "t = none").unwrap(),
        }
        writeln!(out, "values").unwrap();
        for v in &self.values {
            writeln!(out, "{v:.17e}").unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Field> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
        if header.trim() != "anisodiff-field v1" {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut dim = None;
        let mut n: Option<Vec<usize>> = None;
        let mut l: Option<Vec<f64>> = None;
        let mut time: Option<f64> = None;
        for line in lines.by_ref() {
            let line = line.trim();
            if line == "values" {
                break;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header line {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "dim" => dim = Some(value.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?),
                "n" => {
                    n = Some(
                        value
                            .split_whitespace()
                            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
                            .collect::<Result<_>>()?,
                    )
                }
                "l" => {
                    l = Some(
                        value
                            .split_whitespace()
                            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                            .collect::<Result<_>>()?,
                    )
                }
                "t" => {
                    time = if value == "none" {
                        None
                    } else {
                        Some(value.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?)
                    }
                }
                other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let n = n.ok_or_else(|| Error::Parse("missing n".into()))?;
        let l = l.ok_or_else(|| Error::Parse("missing l".into()))?;
        if let Some(d) = dim {
            if d != n.len() {
                return Err(Error::Parse("dim does not match n".into()));
            }
        }
        let grid = TensorGrid::new(l, n)?;
        let mut values = Vec::with_capacity(grid.cell_count());
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(line.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
        }
        let mut field = Field::new(grid, values, None)?;
        field.time = time;
        Ok(field)
    }
}

/// Cumulative mass versus cumulative volume of a rearranged field; carrier of
/// the concentration partial order. The curve is the running integral of the
/// nonincreasing step function u*, hence nondecreasing and concave, ending at
/// the total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationCurve {
    volumes: Vec<f64>,
    masses: Vec<f64>,
}

impl ConcentrationCurve {
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_volume(&self) -> f64 {
        *self.volumes.last().unwrap_or(&0.0)
    }

    pub fn total_mass(&self) -> f64 {
        *self.masses.last().unwrap_or(&0.0)
    }

    /// Piecewise-linear interpolation in volume; constant past the end.
    pub fn mass_at(&self, volume: f64) -> f64 {
        if volume <= 0.0 || self.volumes.is_empty() {
            return 0.0;
        }
        match self
            .volumes
            .binary_search_by(|v| v.partial_cmp(&volume).expect("finite"))
        {
            Ok(i) => self.masses[i],
            Err(0) => self.masses[0] * volume / self.volumes[0],
            Err(i) if i >= self.volumes.len() => self.total_mass(),
            Err(i) => {
                let (v0, m0) = (self.volumes[i - 1], self.masses[i - 1]);
                let (v1, m1) = (self.volumes[i], self.masses[i]);
                m0 + (m1 - m0) * (volume - v0) / (v1 - v0)
            }
        }
    }
}

/// `f` less concentrated than `g` up to `tol`: every cumulative mass of the
/// rearranged `f` stays below that of `g` plus `tol`. Curves are compared at
/// the merged breakpoints, which is exact for piecewise-linear curves.
pub fn concentration_leq(f: &Field, g: &Field, tol: f64) -> bool {
    concentration_violation(f, g) <= tol
}

/// Largest violation `max_s (curve_f(s) - curve_g(s))` over merged breakpoints
/// (negative when `f` is strictly less concentrated everywhere).
pub fn concentration_violation(f: &Field, g: &Field) -> f64 {
    let (_, cf) = f.decreasing_rearrangement();
    let (_, cg) = g.decreasing_rearrangement();
    let mut worst = f64::NEG_INFINITY;
    for &v in cf.volumes().iter().chain(cg.volumes()) {
        worst = worst.max(cf.mass_at(v) - cg.mass_at(v));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_line_grid() -> TensorGrid {
        // three unit-volume cells on [-1.5, 1.5]
        TensorGrid::new(vec![1.5], vec![3]).unwrap()
    }

    #[test]
    fn grid_structure() {
        let g = TensorGrid::new(vec![1.0, 2.0], vec![5, 3]).unwrap();
        assert_eq!(g.cell_count(), 15);
        assert!((g.cell_volume() - (2.0 / 5.0) * (4.0 / 3.0)).abs() < 1e-15);
        // origin-centered middle cell
        let c = g.cell_center(g.center_index());
        assert!(c.iter().all(|&x| x.abs() < 1e-15));
        // even counts and tiny grids rejected
        assert!(TensorGrid::new(vec![1.0], vec![4]).is_err());
        assert!(TensorGrid::new(vec![1.0], vec![1]).is_err());
        // index round trip
        for flat in 0..g.cell_count() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
    }

    #[test]
    fn integrate_constant() {
        for n in [3usize, 9, 33] {
            let g = TensorGrid::new(vec![1.0, 1.0], vec![n, n]).unwrap();
            let f = Field::from_fn(g, |_| 1.0).unwrap();
            assert!((f.integrate() - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lq_norms() {
        let g = unit_line_grid();
        let f = Field::new(g, vec![3.0, -1.0, 2.0], None).unwrap();
        assert!((f.lq_norm(1.0).unwrap() - 6.0).abs() < 1e-14);
        assert!((f.lq_norm(f64::INFINITY).unwrap() - 3.0).abs() < 1e-15);
        assert!((f.lq_norm(2.0).unwrap() - 14.0f64.sqrt()).abs() < 1e-14);
        assert!(f.lq_norm(0.5).is_err());
    }

    #[test]
    fn rearrangement_steps_and_norms() {
        let g = unit_line_grid();
        let f = Field::new(g, vec![3.0, 1.0, 2.0], None).unwrap();
        let (ustar, curve) = f.decreasing_rearrangement();
        assert_eq!(ustar, vec![3.0, 2.0, 1.0]);
        assert_eq!(curve.masses(), &[3.0, 5.0, 6.0]);
        // equimeasurability preserves every lq norm
        let r = f.schwarz_symmetrize();
        for &q in &[1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((f.lq_norm(q).unwrap() - r.lq_norm(q).unwrap()).abs() < 1e-13);
        }
        assert!((r.integrate() - f.integrate()).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_idempotent_and_radial() {
        let g = TensorGrid::new(vec![2.0, 2.0], vec![9, 9]).unwrap();
        let f = Field::from_fn(g, |x| (x[0] - 0.7).powi(2).mul_add(-1.0, 3.0).max(0.0)).unwrap();
        let s1 = f.schwarz_symmetrize();
        let s2 = s1.schwarz_symmetrize();
        assert_eq!(s1.values(), s2.values());
        // shifted bump has the same concentration curve as its symmetrization
        let (_, c1) = f.decreasing_rearrangement();
        let (_, c2) = s1.decreasing_rearrangement();
        assert_eq!(c1.masses(), c2.masses());
    }

    #[test]
    fn concentration_order_basics() {
        let g = TensorGrid::new(vec![1.0], vec![3]).unwrap();
        let spread = Field::new(g.clone(), vec![1.0, 1.0, 0.0], None).unwrap();
        let peaked = Field::new(g, vec![0.0, 2.0, 0.0], None).unwrap();
        // a single hot cell is more concentrated than the spread field
        assert!(concentration_leq(&spread, &peaked, 0.0));
        assert!(!concentration_leq(&peaked, &spread, 0.0));
        // reflexivity
        assert!(concentration_leq(&spread, &spread, 0.0));
    }

    #[test]
    fn concentration_transitive_and_monotone() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = TensorGrid::new(vec![1.0, 1.0], vec![5, 5]).unwrap();
        for _ in 0..50 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let vals: Vec<f64> = (0..25).map(|_| rng.gen_range(0.0..2.0)).collect();
                Field::new(g.clone(), vals, None).unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let c = mk(&mut rng);
            // transitivity on the curve order
            if concentration_leq(&a, &b, 0.0) && concentration_leq(&b, &c, 0.0) {
                assert!(concentration_leq(&a, &c, 1e-12));
            }
            // pointwise order implies curve order
            let lo = Field::new(
                g.clone(),
                a.values().iter().map(|v| v * 0.5).collect(),
                None,
            )
            .unwrap();
            assert!(concentration_leq(&lo, &a, 1e-12));
            // rearrangement is an L1 contraction
            let (ra, _) = a.decreasing_rearrangement();
            let (rb, _) = b.decreasing_rearrangement();
            let vol = g.cell_volume();
            let lhs: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).abs()).sum::<f64>() * vol;
            let rhs = a.l1_distance(&b).unwrap();
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn curve_concavity_and_total() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = TensorGrid::new(vec![1.0, 1.0], vec![7, 7]).unwrap();
        let vals: Vec<f64> = (0..49).map(|_| rng.gen_range(0.0..5.0)).collect();
        let f = Field::new(g, vals, None).unwrap();
        let (ustar, curve) = f.decreasing_rearrangement();
        assert!((curve.total_mass() - f.integrate()).abs() < 1e-12);
        // concavity: slopes (= u* values) nonincreasing
        for w in ustar.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        for w in curve.masses().windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
    }

    #[test]
    fn ssni_checks() {
        let g = TensorGrid::new(vec![2.0, 2.0], vec![9, 9]).unwrap();
        // product of per-axis even decreasing profiles is SSNI
        let f = Field::from_fn(g.clone(), |x| 1.0 / (1.0 + x[0].abs()) / (1.0 + x[1] * x[1]))
            .unwrap();
        assert!(f.is_ssni(1e-12));
        // translated bump is not
        let t = Field::from_fn(g, |x| (-(x[0] - 0.6).powi(2) - x[1] * x[1]).exp()).unwrap();
        assert!(!t.is_ssni(1e-9));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = std::env::temp_dir().join("anisodiff-grid-test");
        std::fs::create_dir_all(&dir).unwrap();
        let g = TensorGrid::new(vec![1.0, 2.0], vec![5, 3]).unwrap();
        let f = Field::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin())
            .unwrap()
            .with_time(0.75);
        let path = dir.join("field.txt");
        f.save(&path).unwrap();
        let g2 = Field::load(&path).unwrap();
        assert_eq!(f, g2);
    }
}
