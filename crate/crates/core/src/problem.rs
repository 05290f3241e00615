//! Problem definitions on the unit hypercube.
//!
//! Every optimizer component works on `[0, 1]^D`. A [`DesignSpace`] maps that
//! cube affinely onto the raw bounds of a problem, and [`ObjectiveFn`] wraps a
//! raw-space function so callers only ever hand it unit-cube points.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Axis-aligned raw bounds of a problem. Internally everything lives in `[0,1]^D`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DesignSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Config(format!(
                "bounds must be non-empty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(d) = (0..lower.len()).find(|&d| !(lower[d] < upper[d])) {
            return Err(Error::Config(format!(
                "lower bound must be below upper bound in dimension {d}"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lo, hi]` in every one of `dim` dimensions.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::uniform(dim, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn to_raw(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(u, (lo, hi))| lo + u * (hi - lo))
            .collect()
    }

    pub fn to_unit(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (lo, hi))| (x - lo) / (hi - lo))
            .collect()
    }
}

/// Mean and standard deviation used to standardize objective values.
///
/// The population convention is used (divide by `n`). When all values are
/// equal the standard deviation falls back to `1.0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

impl Standardization {
    pub fn from_values(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "standardization of an empty value list");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let std = if std > 0.0 && std.is_finite() { std } else { 1.0 };
        Self { mean, std }
    }

    pub fn apply(&self, value: f64) -> f64 {
        (value - self.mean) / self.std
    }

    pub fn invert(&self, value: f64) -> f64 {
        value * self.std + self.mean
    }
}

/// Standardize `values` to zero mean and unit (population) standard deviation.
pub fn standardize(values: &[f64]) -> (Vec<f64>, Standardization) {
    let s = Standardization::from_values(values);
    (values.iter().map(|&v| s.apply(v)).collect(), s)
}

/// Inverse of [`standardize`].
pub fn unstandardize(values: &[f64], s: &Standardization) -> Vec<f64> {
    values.iter().map(|&v| s.invert(v)).collect()
}

/// Evaluated samples: unit-cube points and their raw objective values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Config(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let mut data = Self::new();
        for (p, v) in points.into_iter().zip(values) {
            data.try_push(p, v)?;
        }
        Ok(data)
    }

    fn try_push(&mut self, point: Vec<f64>, value: f64) -> Result<()> {
        if let Some(first) = self.points.first() {
            if first.len() != point.len() {
                return Err(Error::Config(format!(
                    "point of dimension {} added to a dataset of dimension {}",
                    point.len(),
                    first.len()
                )));
            }
        }
        if point.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Config("dataset points must lie in [0,1]^D".into()));
        }
        self.points.push(point);
        self.values.push(value);
        Ok(())
    }

    /// Appends a sample. Panics if the point leaves the unit cube or has the wrong dimension.
    pub fn push(&mut self, point: Vec<f64>, value: f64) {
        self.try_push(point, value).expect("invalid dataset point");
    }

    pub fn extend_from(&mut self, other: &Dataset) {
        for (p, v) in other.iter() {
            self.push(p.to_vec(), v);
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.iter().map(Vec::as_slice).zip(self.values.iter().copied())
    }

    /// Index and value of the smallest objective value (lowest index on ties).
    pub fn best(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(None, |acc, (i, v)| match acc {
                Some((_, b)) if b <= v => acc,
                _ => Some((i, v)),
            })
    }

    pub fn standardization(&self) -> Standardization {
        Standardization::from_values(&self.values)
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            values: indices.iter().map(|&i| self.values[i]).collect(),
        }
    }
}

type RawFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A deterministic objective on `[0,1]^D`, backed by a raw-space function.
#[derive(Clone)]
pub struct ObjectiveFn {
    name: String,
    space: DesignSpace,
    known_optimum: Option<f64>,
    raw: Arc<RawFn>,
}

impl fmt::Debug for ObjectiveFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveFn")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("known_optimum", &self.known_optimum)
            .finish()
    }
}

impl ObjectiveFn {
    pub fn new<F>(name: impl Into<String>, space: DesignSpace, known_optimum: Option<f64>, raw: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), space, known_optimum, raw: Arc::new(raw) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn known_optimum(&self) -> Option<f64> {
        self.known_optimum
    }

    /// Evaluates at a unit-cube point.
    pub fn evaluate(&self, unit: &[f64]) -> f64 {
        (self.raw)(&self.space.to_raw(unit))
    }

    /// Evaluates at a point given in the problem's raw units.
    pub fn evaluate_raw(&self, raw: &[f64]) -> f64 {
        (self.raw)(raw)
    }
}

/// Largest dimension supported by [`sobol_points`].
pub const SOBOL_MAX_DIM: usize = sobol_burley::NUM_DIMENSIONS as usize;
/// Largest number of points per call supported by [`sobol_points`].
pub const SOBOL_MAX_POINTS: usize = 1 << 16;

fn sobol_seed(seed: u64) -> u32 {
    (seed as u32) ^ ((seed >> 32) as u32).wrapping_mul(0x9e37_79b9)
}

/// One coordinate of an Owen-scrambled Sobol point, with 32 bits of resolution.
fn sobol_coord(index: u32, dimension: u32, seed: u32) -> f64 {
    use sobol_burley::parts::{hash, owen_scramble_rev, sobol_rev};
    let shuffled = owen_scramble_rev(index.reverse_bits(), hash(seed ^ 0x79c6_8e4a));
    let sobol = sobol_rev(shuffled, dimension);
    let scramble = {
        let s = seed.wrapping_mul(0x9c8f_2d3b);
        let ds = dimension >> 2;
        ds ^ s ^ [0x912f_69ba, 0x174f_18ab, 0x691e_72ca, 0xb40c_c1b8][dimension as usize & 0b11]
    };
    let bits = owen_scramble_rev(sobol, hash(scramble)).reverse_bits();
    bits as f64 * (1.0 / 4_294_967_296.0)
}

/// `count` Owen-scrambled Sobol points in `[0,1)^dim`; the scramble is keyed by `seed`.
pub fn sobol_points(count: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if count == 0 || dim == 0 {
        return Err(Error::Config("sobol_points needs count >= 1 and dim >= 1".into()));
    }
    if dim > SOBOL_MAX_DIM {
        return Err(Error::Config(format!(
            "Sobol generator supports at most {SOBOL_MAX_DIM} dimensions (asked for {dim})"
        )));
    }
    if count > SOBOL_MAX_POINTS {
        return Err(Error::Config(format!(
            "Sobol generator supports at most {SOBOL_MAX_POINTS} points per call (asked for {count})"
        )));
    }
    let s = sobol_seed(seed);
    Ok((0..count as u32)
        .map(|i| (0..dim as u32).map(|d| sobol_coord(i, d, s)).collect())
        .collect())
}

/// Sobol points mapped affinely into the box `[lower, upper]`.
pub fn sobol_in_box(count: usize, lower: &[f64], upper: &[f64], seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut pts = sobol_points(count, lower.len(), seed)?;
    for p in &mut pts {
        for (d, c) in p.iter_mut().enumerate() {
            *c = (lower[d] + *c * (upper[d] - lower[d])).clamp(lower[d], upper[d]);
        }
    }
    Ok(pts)
}

/// Names accepted by [`benchmark_suite`].
pub const BENCHMARK_NAMES: [&str; 6] =
    ["ackley", "rastrigin", "rosenbrock", "levy", "styblinski_tang", "sharp_broad_1d"];

/// Ackley, minimum 0 at the origin.
pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

/// Rastrigin on `[-5.12, 5.12]^D`, minimum 0 at the origin.
pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

/// Rosenbrock on `[-5, 10]^D`, minimum 0 at `(1, ..., 1)`.
pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

/// Levy on `[-10, 10]^D`, minimum 0 at `(1, ..., 1)`.
pub fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let last = w[w.len() - 1];
    let head = (PI * w[0]).sin().powi(2);
    let mid: f64 = w[..w.len() - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    head + mid + (last - 1.0).powi(2) * (1.0 + (2.0 * PI * last).sin().powi(2))
}

/// Styblinski-Tang on `[-5, 5]^D`, minimum `-39.16616570377142 * D`.
pub fn styblinski_tang(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v).sum::<f64>()
}

/// Location and width of the narrow, deep valley of [`sharp_broad_1d`].
pub const SHARP_VALLEY: (f64, f64) = (0.03, 0.03);
/// Location and width of the broad, shallow valley of [`sharp_broad_1d`].
pub const BROAD_VALLEY: (f64, f64) = (0.75, 0.15);
const SHARP_DEPTH: f64 = 1.2;
const BROAD_DEPTH: f64 = 0.7;

/// A 1D function on `[0, 1]` with a narrow deep valley at the left end (global
/// minimum about -0.2 near 0.03) and a broad shallow valley near 0.75 (about 0.3).
///
/// Sampled on an even grid of 9 to 13 points, the best sample lies on the flank
/// of the narrow valley, so EI peaks sharply at the left end while the broad
/// valley gives a wide, lower EI plateau.
pub fn sharp_broad_1d(x: &[f64]) -> f64 {
    let v = x[0];
    let bump = |(c, w): (f64, f64)| (-(v - c).powi(2) / (2.0 * w * w)).exp();
    1.0 - SHARP_DEPTH * bump(SHARP_VALLEY) - BROAD_DEPTH * bump(BROAD_VALLEY)
}

/// Builds one of the synthetic benchmark problems mapped onto `[0,1]^dim`.
///
/// | name              | raw bounds            | optimum          |
/// |-------------------|-----------------------|------------------|
/// | `ackley`          | `[-5, 10]^D`           | 0                |
/// | `rastrigin`       | `[-5.12, 5.12]^D`     | 0                |
/// | `rosenbrock`      | `[-5, 10]^D`, D >= 2  | 0                |
/// | `levy`            | `[-10, 10]^D`         | 0                |
/// | `styblinski_tang` | `[-5, 5]^D`           | -39.16616570377142·D |
/// | `sharp_broad_1d`  | `[0, 1]`, D = 1       | numeric          |
pub fn benchmark_suite(name: &str, dim: usize) -> Result<ObjectiveFn> {
    if dim == 0 {
        return Err(Error::Config("benchmark dimension must be positive".into()));
    }
    let obj = match name {
        "ackley" => ObjectiveFn::new(name, DesignSpace::uniform(dim, -5.0, 10.0)?, Some(0.0), ackley),
        "rastrigin" => ObjectiveFn::new(name, DesignSpace::uniform(dim, -5.12, 5.12)?, Some(0.0), rastrigin),
        "rosenbrock" => {
            if dim < 2 {
                return Err(Error::Config("rosenbrock needs dim >= 2".into()));
            }
            ObjectiveFn::new(name, DesignSpace::uniform(dim, -5.0, 10.0)?, Some(0.0), rosenbrock)
        }
        "levy" => ObjectiveFn::new(name, DesignSpace::uniform(dim, -10.0, 10.0)?, Some(0.0), levy),
        "styblinski_tang" => ObjectiveFn::new(
            name,
            DesignSpace::uniform(dim, -5.0, 5.0)?,
            Some(-39.166_165_703_771_42 * dim as f64),
            styblinski_tang,
        ),
        "sharp_broad_1d" => {
            if dim != 1 {
                return Err(Error::Config("sharp_broad_1d is one-dimensional".into()));
            }
            ObjectiveFn::new(name, DesignSpace::unit(1)?, None, sharp_broad_1d)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown benchmark '{other}' (expected one of {})",
                BENCHMARK_NAMES.join(", ")
            )))
        }
    };
    Ok(obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Star discrepancy over anchored boxes with corners on a regular grid.
    fn grid_star_discrepancy(points: &[Vec<f64>], grid: usize) -> f64 {
        let n = points.len() as f64;
        let mut worst: f64 = 0.0;
        for i in 1..=grid {
            for j in 1..=grid {
                let (a, b) = (i as f64 / grid as f64, j as f64 / grid as f64);
                let inside = points.iter().filter(|p| p[0] < a && p[1] < b).count() as f64;
                worst = worst.max((inside / n - a * b).abs());
            }
        }
        worst
    }

    #[test]
    fn sobol_small_in_range() {
        let pts = sobol_points(4, 2, 0).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().flatten().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn sobol_deterministic_and_seeded() {
        assert_eq!(sobol_points(64, 3, 7).unwrap(), sobol_points(64, 3, 7).unwrap());
        assert_ne!(sobol_points(64, 3, 7).unwrap(), sobol_points(64, 3, 8).unwrap());
    }

    #[test]
    fn sobol_beats_uniform_discrepancy() {
        let sobol = sobol_points(256, 2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let uniform: Vec<Vec<f64>> =
            (0..256).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let ds = grid_star_discrepancy(&sobol, 128);
        let du = grid_star_discrepancy(&uniform, 128);
        assert!(ds < du, "sobol {ds} vs uniform {du}");
    }

    #[test]
    fn sobol_rejects_bad_sizes() {
        assert!(matches!(sobol_points(4, SOBOL_MAX_DIM + 1, 0), Err(Error::Config(_))));
        assert!(sobol_points(0, 2, 0).is_err());
    }

    #[test]
    fn standardize_examples() {
        let (z, s) = standardize(&[2.0, 4.0]);
        assert_eq!(z, vec![-1.0, 1.0]);
        assert_eq!((s.mean, s.std), (3.0, 1.0));

        let (z, s) = standardize(&[5.0, 5.0, 5.0]);
        assert_eq!(z, vec![0.0; 3]);
        assert_eq!((s.mean, s.std), (5.0, 1.0));

        let (z, _) = standardize(&[1.0, 2.0, 3.0, 4.0]);
        let m = z.iter().sum::<f64>() / 4.0;
        let v = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!(m.abs() < 1e-12 && (v.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn benchmark_known_minima() {
        let a = benchmark_suite("ackley", 5).unwrap();
        assert!(a.evaluate_raw(&[0.0; 5]).abs() < 1e-12);
        assert!(a.evaluate(&[1.0 / 3.0; 5]).abs() < 1e-12);
        let r = benchmark_suite("rosenbrock", 4).unwrap();
        assert_eq!(r.evaluate_raw(&[1.0; 4]), 0.0);
        let l = benchmark_suite("levy", 3).unwrap();
        assert!(l.evaluate_raw(&[1.0; 3]).abs() < 1e-12);
        let st = benchmark_suite("styblinski_tang", 2).unwrap();
        let x = -2.903_534_027_771_178;
        assert!((st.evaluate_raw(&[x, x]) - st.known_optimum().unwrap()).abs() < 1e-9);
        assert!(benchmark_suite("rastrigin", 2).unwrap().evaluate_raw(&[0.0, 0.0]).abs() < 1e-12);
    }

    #[test]
    fn benchmark_unknown_name() {
        assert!(matches!(benchmark_suite("sphere", 2), Err(Error::Config(_))));
        assert!(benchmark_suite("sharp_broad_1d", 2).is_err());
    }

    /// Widths (in grid cells) of the sublevel sets within 10% of each valley's depth.
    fn valley_widths(grid: &[(f64, f64)]) -> (usize, usize, f64) {
        let split = grid
            .iter()
            .filter(|(x, _)| *x > SHARP_VALLEY.0 && *x < BROAD_VALLEY.0)
            .fold((0.0, f64::NEG_INFINITY), |acc, &(x, f)| if f > acc.1 { (x, f) } else { acc })
            .0;
        let (left, right): (Vec<_>, Vec<_>) = grid.iter().partition(|(x, _)| *x < split);
        let width = |side: &[&(f64, f64)]| {
            let top = side.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let bottom = side.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let cut = bottom + 0.1 * (top - bottom);
            side.iter().filter(|p| p.1 <= cut).count()
        };
        let argmin = grid.iter().fold((0.0, f64::INFINITY), |a, &(x, f)| if f < a.1 { (x, f) } else { a }).0;
        (width(&left), width(&right), argmin - split)
    }

    #[test]
    fn sharp_broad_geometry() {
        let grid: Vec<(f64, f64)> = (0..=100_000)
            .map(|i| {
                let x = i as f64 / 100_000.0;
                (x, sharp_broad_1d(&[x]))
            })
            .collect();
        let (narrow, broad, argmin_offset) = valley_widths(&grid);
        // global minimum sits left of the ridge, i.e. in the narrow valley
        assert!(argmin_offset < 0.0);
        assert!(broad > 4 * narrow, "narrow {narrow} broad {broad}");
    }

    #[test]
    fn benchmarks_are_pure() {
        let f = benchmark_suite("levy", 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..6).map(|_| rng.random()).collect();
            assert_eq!(f.evaluate(&x).to_bits(), f.evaluate(&x).to_bits());
        }
    }

    #[test]
    fn design_space_round_trip() {
        let s = DesignSpace::new(vec![-1.0, 2.0], vec![3.0, 5.0]).unwrap();
        let raw = s.to_raw(&[0.25, 0.5]);
        assert_eq!(raw, vec![0.0, 3.5]);
        assert_eq!(s.to_unit(&raw), vec![0.25, 0.5]);
        assert!(DesignSpace::new(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn dataset_best_and_bounds() {
        let d = Dataset::from_parts(vec![vec![0.1], vec![0.2], vec![0.3]], vec![3.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.best(), Some((1, 1.0)));
        assert!(Dataset::from_parts(vec![vec![1.5]], vec![0.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn standardize_round_trip(values in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            let (z, s) = standardize(&values);
            let back = unstandardize(&z, &s);
            for (a, b) in back.iter().zip(&values) {
                proptest::prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
