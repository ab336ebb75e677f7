//! Planar locations, samples, grids and estimation-site selection.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub x1: f64,
    pub x2: f64,
}

impl Location {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    #[inline]
    pub fn distance(&self, other: &Location) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }
}

impl From<(f64, f64)> for Location {
    fn from((x1, x2): (f64, f64)) -> Self {
        Self { x1, x2 }
    }
}

/// Observed values at distinct sample locations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSample {
    locations: Vec<Location>,
    values: Vec<f64>,
}

impl SpatialSample {
    /// Minimum number of observations accepted by [`SpatialSample::new`].
    pub const MIN_SIZE: usize = 3;

    pub fn new(locations: Vec<Location>, values: Vec<f64>) -> Result<Self> {
        if locations.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} locations but {} values",
                locations.len(),
                values.len()
            )));
        }
        if locations.len() < Self::MIN_SIZE {
            return Err(Error::TooFewPoints {
                got: locations.len(),
                need: Self::MIN_SIZE,
            });
        }
        if let Some(i) = locations.iter().position(|l| !l.is_finite()) {
            return Err(Error::InvalidInput(format!("location {i} is not finite")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("value {i} is not finite")));
        }
        if let Some((_, j)) = first_duplicate(&locations) {
            let l = locations[j];
            return Err(Error::DuplicateLocation {
                x1: l.x1,
                x2: l.x2,
                line: None,
            });
        }
        Ok(Self { locations, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample variance of the values (denominator n - 1).
    pub fn value_variance(&self) -> f64 {
        let n = self.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }
}

/// Returns the first pair `(i, j)`, `i < j`, of identical locations.
pub(crate) fn first_duplicate(locs: &[Location]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..locs.len()).collect();
    order.sort_by(|&a, &b| {
        locs[a]
            .x1
            .total_cmp(&locs[b].x1)
            .then(locs[a].x2.total_cmp(&locs[b].x2))
    });
    order.windows(2).find_map(|w| {
        let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
        (locs[a] == locs[b]).then_some((a, b))
    })
}

/// Unobserved locations where the risk is estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSet {
    pub locations: Vec<Location>,
}

impl EstimationSet {
    pub fn new(locations: Vec<Location>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InvalidInput("empty estimation set".into()));
        }
        if let Some(i) = locations.iter().position(|l| !l.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "estimation location {i} is not finite"
            )));
        }
        Ok(Self { locations })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl Bounds {
    pub const UNIT_SQUARE: Bounds = Bounds {
        x1_min: 0.0,
        x1_max: 1.0,
        x2_min: 0.0,
        x2_max: 1.0,
    };

    /// Bounding box of a set of locations.
    pub fn enclosing(locs: &[Location]) -> Option<Bounds> {
        let first = locs.first()?;
        Some(locs.iter().fold(
            Bounds {
                x1_min: first.x1,
                x1_max: first.x1,
                x2_min: first.x2,
                x2_max: first.x2,
            },
            |b, l| Bounds {
                x1_min: b.x1_min.min(l.x1),
                x1_max: b.x1_max.max(l.x1),
                x2_min: b.x2_min.min(l.x2),
                x2_max: b.x2_max.max(l.x2),
            },
        ))
    }
}

/// Regular `nx` x `ny` grid over a rectangle, boundary included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, bounds: Bounds) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput(format!("grid size {nx}x{ny}")));
        }
        if !(bounds.x1_min <= bounds.x1_max && bounds.x2_min <= bounds.x2_max) {
            return Err(Error::InvalidInput("grid bounds are inverted".into()));
        }
        Ok(Self { nx, ny, bounds })
    }

    pub fn unit_square(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, Bounds::UNIT_SQUARE)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index of grid node `(ix, iy)`.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }
}

fn axis(n: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if i + 1 == n && n > 1 { hi } else { lo + step * i as f64 })
}

/// Grid nodes in row-major order (`x1` varies fastest).
pub fn make_grid(spec: &GridSpec) -> Vec<Location> {
    let b = spec.bounds;
    let xs: Vec<f64> = axis(spec.nx, b.x1_min, b.x1_max).collect();
    axis(spec.ny, b.x2_min, b.x2_max)
        .flat_map(|x2| xs.iter().map(move |&x1| Location { x1, x2 }))
        .collect()
}

/// Full Euclidean distance matrix.
pub fn pairwise_distances(locs: &[Location]) -> DMatrix<f64> {
    let n = locs.len();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let v = locs[i].distance(&locs[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// How estimation locations are carved out of a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimationRule {
    /// `k` nodes of the main diagonal closest to the top-right corner.
    DiagonalUpper(usize),
    /// Exactly these grid nodes.
    Explicit(Vec<Location>),
    /// `k` nodes drawn uniformly without replacement.
    Random { k: usize, seed: u64 },
}

impl EstimationRule {
    /// Diagonal rule sized as 55% of the grid side, rounded up (11 of 20).
    pub fn default_for(spec: &GridSpec) -> Self {
        let side = spec.nx.min(spec.ny);
        EstimationRule::DiagonalUpper(((side as f64) * 0.55).ceil() as usize)
    }
}

/// Observation/estimation partition of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub sample_locations: Vec<Location>,
    pub estimation: EstimationSet,
    /// Grid indices of the estimation nodes, in estimation-set order.
    pub estimation_indices: Vec<usize>,
    /// Grid indices of the observation nodes, in sample order.
    pub sample_indices: Vec<usize>,
}

/// Splits the grid into observation and estimation locations.
pub fn split_design(spec: &GridSpec, rule: &EstimationRule) -> Result<Design> {
    let grid = make_grid(spec);
    let chosen: Vec<usize> = match rule {
        EstimationRule::DiagonalUpper(k) => {
            let avail = spec.nx.min(spec.ny);
            if *k == 0 || *k > avail {
                return Err(Error::InvalidInput(format!(
                    "diagonal-upper({k}) but only {avail} diagonal sites"
                )));
            }
            (0..*k)
                .rev()
                .map(|m| spec.index(spec.nx - 1 - m, spec.ny - 1 - m))
                .collect()
        }
        _ => return split_locations(&grid, rule),
    };
    Ok(partition(&grid, chosen))
}

/// Like [`split_design`] but over an arbitrary list of candidate locations.
/// The diagonal rule needs grid structure and is rejected here.
pub fn split_locations(locs: &[Location], rule: &EstimationRule) -> Result<Design> {
    if locs.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let chosen: Vec<usize> = match rule {
        EstimationRule::DiagonalUpper(_) => {
            return Err(Error::InvalidInput(
                "diagonal-upper rule requires a grid layout".into(),
            ))
        }
        EstimationRule::Explicit(points) => {
            let mut idx = Vec::with_capacity(points.len());
            for p in points {
                let i = locs.iter().position(|l| l == p).ok_or_else(|| {
                    Error::InvalidInput(format!("({}, {}) is not a grid node", p.x1, p.x2))
                })?;
                if !idx.contains(&i) {
                    idx.push(i);
                }
            }
            idx
        }
        EstimationRule::Random { k, seed } => {
            if *k == 0 || *k >= locs.len() {
                return Err(Error::InvalidInput(format!(
                    "random({k}) out of range for {} sites",
                    locs.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut idx = sample_indices(&mut rng, locs.len(), *k).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    if chosen.is_empty() {
        return Err(Error::InvalidInput("estimation rule selected no sites".into()));
    }
    Ok(partition(locs, chosen))
}

fn partition(locs: &[Location], chosen: Vec<usize>) -> Design {
    let mut is_target = vec![false; locs.len()];
    for &i in &chosen {
        is_target[i] = true;
    }
    let sample_indices: Vec<usize> = (0..locs.len()).filter(|&i| !is_target[i]).collect();
    Design {
        sample_locations: sample_indices.iter().map(|&i| locs[i]).collect(),
        estimation: EstimationSet {
            locations: chosen.iter().map(|&i| locs[i]).collect(),
        },
        estimation_indices: chosen,
        sample_indices,
    }
}

/// Distinct inter-point lags of a location set.
///
/// Pairs whose distances agree to within `1e-12` of the largest lag share an
/// entry, so isotropic functions of the lag need only be evaluated once per
/// distinct value. On regular grids this collapses `n(n-1)/2` pairs into a few
/// hundred lags.
#[derive(Debug, Clone)]
pub struct LagTable {
    n: usize,
    /// Representative lag of each group, ascending.
    pub lags: Vec<f64>,
    /// Group id of pair `(i, j)`, `i < j`, stored in the order of [`pair_offset`].
    pub group: Vec<u32>,
}

/// Offset of pair `(i, j)`, `i < j`, in the row-by-row upper-triangle ordering.
#[inline]
pub fn pair_offset(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl LagTable {
    pub fn new(locs: &[Location]) -> Self {
        let n = locs.len();
        let mut raw = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                raw.push(locs[i].distance(&locs[j]));
            }
        }
        let mut order: Vec<u32> = (0..raw.len() as u32).collect();
        order.sort_unstable_by(|&a, &b| raw[a as usize].total_cmp(&raw[b as usize]));
        let max = order.last().map(|&k| raw[k as usize]).unwrap_or(0.0);
        let tol = 1e-12 * max;
        let mut lags = Vec::new();
        let mut group = vec![0u32; raw.len()];
        let mut start = f64::NEG_INFINITY;
        for &k in &order {
            let l = raw[k as usize];
            if lags.is_empty() || l - start > tol {
                lags.push(l);
                start = l;
            }
            group[k as usize] = (lags.len() - 1) as u32;
        }
        Self { n, lags, group }
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    /// Builds the symmetric matrix `f(lag)` with `diag` on the diagonal.
    pub fn symmetric_matrix(&self, diag: f64, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let values: Vec<f64> = self.lags.iter().map(|&l| f(l)).collect();
        let n = self.n;
        let mut m = DMatrix::from_element(n, n, diag);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = values[self.group[k] as usize];
                m[(i, j)] = v;
                m[(j, i)] = v;
                k += 1;
            }
        }
        m
    }
}
