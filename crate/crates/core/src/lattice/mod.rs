//! Lattice geometry, Galerkin cubes, interaction models and cylinder observables.

mod model;
mod observable;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{
    beta_lower_bound, choose_b, drift, validate_assumptions, AssumptionReport, InteractionModel, ModelSpec,
    PotentialFamily, PotentialKind, SIGMOID_SECOND_SUP,
};
pub use observable::{BoundObservable, CylinderObservable, ObservableKind};

/// Largest supported lattice dimension (site codes pack coordinates into 32 bits).
pub const MAX_DIMENSION: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("site {site} lies outside the cube of radius {radius}")]
    OutsideCube { site: LatticeIndex, radius: u32 },
    #[error("coupling at offset {offset} exceeds the interaction range K = {range} (finite range property)")]
    RangeViolation { offset: LatticeIndex, range: u32 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("state has {found} values but the cube has {expected} sites")]
    StateSize { expected: usize, found: usize },
    #[error("state value at site {site} is not finite")]
    NonFinite { site: LatticeIndex },
}

/// A point of `ℤ^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticeIndex {
    pub coords: Vec<i32>,
}

impl LatticeIndex {
    pub fn new(coords: impl Into<Vec<i32>>) -> Self {
        LatticeIndex { coords: coords.into() }
    }

    pub fn origin(d: usize) -> Self {
        LatticeIndex { coords: vec![0; d] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// `|i| = Σ |i_k|`.
    pub fn norm(&self) -> u64 {
        self.coords.iter().map(|c| c.unsigned_abs() as u64).sum()
    }

    pub fn offset_by(&self, o: &LatticeIndex) -> LatticeIndex {
        LatticeIndex {
            coords: self.coords.iter().zip(&o.coords).map(|(a, b)| a + b).collect(),
        }
    }

    /// Parses `"1"`, `"-1,0"` and similar.
    pub fn parse(text: &str) -> Option<Self> {
        let coords: Result<Vec<i32>, _> = text.split(',').map(|c| c.trim().parse::<i32>()).collect();
        coords.ok().filter(|c| !c.is_empty()).map(LatticeIndex::new)
    }
}

impl fmt::Display for LatticeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// `|i - j| = Σ_k |i_k - j_k|`.
pub fn lattice_distance(i: &LatticeIndex, j: &LatticeIndex) -> Result<u64, LatticeError> {
    if i.dim() != j.dim() {
        return Err(LatticeError::DimensionMismatch {
            expected: i.dim(),
            found: j.dim(),
        });
    }
    Ok(i.coords.iter().zip(&j.coords).map(|(a, b)| a.abs_diff(*b) as u64).sum())
}

/// The Galerkin cube `Γ_N = [-N, N]^d`, sites enumerated in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cube {
    d: usize,
    radius: u32,
}

impl Cube {
    pub fn new(d: usize, radius: u32) -> Self {
        Cube { d, radius }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: &LatticeIndex) -> bool {
        i.dim() == self.d && i.coords.iter().all(|c| c.unsigned_abs() <= self.radius)
    }

    pub fn index_of(&self, i: &LatticeIndex) -> Option<usize> {
        if !self.contains(i) {
            return None;
        }
        let side = self.side();
        Some(i.coords.iter().fold(0, |acc, &c| acc * side + (c + self.radius as i32) as usize))
    }

    pub fn site(&self, mut k: usize) -> LatticeIndex {
        let side = self.side();
        let mut coords = vec![0; self.d];
        for c in coords.iter_mut().rev() {
            *c = (k % side) as i32 - self.radius as i32;
            k /= side;
        }
        LatticeIndex { coords }
    }

    pub fn sites(&self) -> impl Iterator<Item = LatticeIndex> + '_ {
        (0..self.len()).map(|k| self.site(k))
    }

    /// Checks that `i` is a site of this cube.
    pub fn require(&self, i: &LatticeIndex) -> Result<usize, LatticeError> {
        if i.dim() != self.d {
            return Err(LatticeError::DimensionMismatch {
                expected: self.d,
                found: i.dim(),
            });
        }
        self.index_of(i).ok_or_else(|| LatticeError::OutsideCube {
            site: i.clone(),
            radius: self.radius,
        })
    }
}

/// Radius of the largest cube whose site codes fit in 32 bits.
pub fn max_radius(d: usize) -> u32 {
    let bits = 32 / d as u32;
    (1u32 << (bits - 1)) - 1
}

/// Position-independent 32-bit label of a site: zigzag-coded coordinates packed
/// side by side. Equal sites get equal codes in every cube.
pub fn site_code(i: &LatticeIndex) -> u32 {
    let bits = 32 / i.dim() as u32;
    i.coords.iter().enumerate().fold(0u32, |acc, (k, &c)| {
        let z = ((c << 1) ^ (c >> 31)) as u32;
        acc | z.checked_shl(k as u32 * bits).unwrap_or(0)
    })
}

/// The envelope `B_{R,ρ} = {x : |x_i| ≤ R(|i|^ρ + 1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallParams {
    #[serde(rename = "R")]
    pub r: f64,
    pub rho: f64,
}

impl BallParams {
    pub fn new(r: f64, rho: f64) -> Result<Self, LatticeError> {
        if r.is_finite() && r > 0.0 && rho.is_finite() && rho > 0.0 {
            Ok(BallParams { r, rho })
        } else {
            Err(LatticeError::InvalidModel(format!("ball needs R, rho > 0, got R = {r}, rho = {rho}")))
        }
    }

    pub fn envelope(&self, i: &LatticeIndex) -> f64 {
        self.r * ((i.norm() as f64).powf(self.rho) + 1.0)
    }
}

/// Values on every site of a cube.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    cube: Cube,
    values: Vec<f64>,
}

impl LatticeState {
    pub fn new(cube: Cube, values: Vec<f64>) -> Result<Self, LatticeError> {
        if values.len() != cube.len() {
            return Err(LatticeError::StateSize {
                expected: cube.len(),
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(LatticeError::NonFinite { site: cube.site(k) });
        }
        Ok(LatticeState { cube, values })
    }

    pub fn zeros(cube: Cube) -> Self {
        LatticeState {
            cube,
            values: vec![0.0; cube.len()],
        }
    }

    pub fn constant(cube: Cube, v: f64) -> Self {
        LatticeState {
            cube,
            values: vec![v; cube.len()],
        }
    }

    pub fn from_fn(cube: Cube, f: impl Fn(&LatticeIndex) -> f64) -> Result<Self, LatticeError> {
        LatticeState::new(cube, cube.sites().map(|i| f(&i)).collect())
    }

    pub fn cube(&self) -> Cube {
        self.cube
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: &LatticeIndex) -> Result<f64, LatticeError> {
        Ok(self.values[self.cube.require(i)?])
    }

    pub fn set(&mut self, i: &LatticeIndex, v: f64) -> Result<(), LatticeError> {
        let k = self.cube.require(i)?;
        self.values[k] = v;
        Ok(())
    }

    /// Restriction to a smaller centred cube, or zero-extension to a larger one.
    pub fn resized(&self, cube: Cube) -> Result<Self, LatticeError> {
        if cube.dim() != self.cube.dim() {
            return Err(LatticeError::DimensionMismatch {
                expected: self.cube.dim(),
                found: cube.dim(),
            });
        }
        Ok(LatticeState {
            cube,
            values: cube.sites().map(|i| self.cube.index_of(&i).map_or(0.0, |k| self.values[k])).collect(),
        })
    }
}

/// True iff every coordinate of `x` lies within the envelope of `ball`.
pub fn ball_membership(x: &LatticeState, ball: &BallParams) -> bool {
    x.cube.sites().zip(&x.values).all(|(i, v)| v.abs() <= ball.envelope(&i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let i = LatticeIndex::new([1, 2]);
        let j = LatticeIndex::new([3, -1]);
        assert_eq!(lattice_distance(&i, &j), Ok(5));
        assert_eq!(lattice_distance(&i, &i), Ok(0));
        assert!(lattice_distance(&i, &LatticeIndex::new([1])).is_err());
    }

    #[test]
    fn cube_indexing_round_trips() {
        let c = Cube::new(2, 2);
        assert_eq!(c.len(), 25);
        for k in 0..c.len() {
            assert_eq!(c.index_of(&c.site(k)), Some(k));
        }
        assert_eq!(c.index_of(&LatticeIndex::new([3, 0])), None);
    }

    #[test]
    fn site_codes_are_distinct_and_cube_independent() {
        let c = Cube::new(2, 5);
        let mut codes: Vec<u32> = c.sites().map(|i| site_code(&i)).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), c.len());
        assert_eq!(site_code(&LatticeIndex::new([0])), 0);
        assert_ne!(site_code(&LatticeIndex::new([1])), site_code(&LatticeIndex::new([-1])));
    }

    #[test]
    fn ball_examples() {
        let cube = Cube::new(1, 5);
        let ball = BallParams::new(1.0, 1.0).unwrap();
        assert!(ball_membership(&LatticeState::zeros(cube), &ball));
        let mut x = LatticeState::zeros(cube);
        x.set(&LatticeIndex::new([5]), 10.0).unwrap();
        assert!(!ball_membership(&x, &ball));
        x.set(&LatticeIndex::new([5]), 6.0).unwrap();
        assert!(ball_membership(&x, &ball));
    }

    #[test]
    fn resize_restricts_and_pads() {
        let big = LatticeState::from_fn(Cube::new(1, 3), |i| i.coords[0] as f64).unwrap();
        let small = big.resized(Cube::new(1, 1)).unwrap();
        assert_eq!(small.values(), &[-1.0, 0.0, 1.0]);
        let back = small.resized(Cube::new(1, 2)).unwrap();
        assert_eq!(back.values(), &[0.0, -1.0, 0.0, 1.0, 0.0]);
    }
}
