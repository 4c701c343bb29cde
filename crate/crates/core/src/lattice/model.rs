use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{max_radius, site_code, BallParams, Cube, LatticeError, LatticeIndex, LatticeState, MAX_DIMENSION};

/// `sup |s''|` for `s(z) = z / √(1 + z²)`, attained at `z = 1/2`.
pub const SIGMOID_SECOND_SUP: f64 = 0.858_650_103_359_919_2;

#[inline]
fn sigmoid(z: f64) -> f64 {
    z / (1.0 + z * z).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    SmoothBounded,
}

/// `U_i(x) = ε s(Σ_o w_o x_{i+o})` with `s(z) = z/√(1+z²)`, or `U ≡ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential", into = "RawPotential")]
pub struct PotentialFamily {
    kind: PotentialKind,
    epsilon: f64,
    weights: Vec<(LatticeIndex, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: PotentialKind,
    #[serde(default)]
    epsilon: f64,
    #[serde(default)]
    weights: BTreeMap<String, f64>,
}

impl TryFrom<RawPotential> for PotentialFamily {
    type Error = LatticeError;
    fn try_from(raw: RawPotential) -> Result<Self, LatticeError> {
        match raw.kind {
            PotentialKind::Zero => {
                if raw.epsilon != 0.0 || !raw.weights.is_empty() {
                    return Err(LatticeError::InvalidModel(
                        "potential kind \"zero\" takes no epsilon or weights".into(),
                    ));
                }
                Ok(PotentialFamily::zero())
            }
            PotentialKind::SmoothBounded => {
                let weights = parse_offsets(&raw.weights, "potential weight")?;
                PotentialFamily::smooth_bounded(raw.epsilon, weights)
            }
        }
    }
}

impl From<PotentialFamily> for RawPotential {
    fn from(p: PotentialFamily) -> Self {
        RawPotential {
            kind: p.kind,
            epsilon: p.epsilon,
            weights: render_offsets(&p.weights),
        }
    }
}

fn parse_offsets(map: &BTreeMap<String, f64>, what: &str) -> Result<Vec<(LatticeIndex, f64)>, LatticeError> {
    map.iter()
        .map(|(k, &v)| {
            LatticeIndex::parse(k)
                .map(|o| (o, v))
                .ok_or_else(|| LatticeError::InvalidModel(format!("{what} key {k:?} is not an offset like \"-1\" or \"1,0\"")))
        })
        .collect()
}

fn render_offsets(list: &[(LatticeIndex, f64)]) -> BTreeMap<String, f64> {
    list.iter().map(|(o, v)| (o.to_string(), *v)).collect()
}

impl PotentialFamily {
    pub fn zero() -> Self {
        PotentialFamily {
            kind: PotentialKind::Zero,
            epsilon: 0.0,
            weights: Vec::new(),
        }
    }

    pub fn smooth_bounded(epsilon: f64, weights: Vec<(LatticeIndex, f64)>) -> Result<Self, LatticeError> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(LatticeError::InvalidModel(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        if let Some((o, _)) = weights.iter().find(|(_, w)| !w.is_finite()) {
            return Err(LatticeError::InvalidModel(format!("potential weight at offset {o} is not finite")));
        }
        Ok(PotentialFamily {
            kind: PotentialKind::SmoothBounded,
            epsilon,
            weights,
        })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &[(LatticeIndex, f64)] {
        &self.weights
    }

    /// True when `U ≡ 0`.
    pub fn vanishes(&self) -> bool {
        self.kind == PotentialKind::Zero || self.epsilon == 0.0 || self.weights.iter().all(|(_, w)| *w == 0.0)
    }

    /// `||∂_{i+o} U_i|| = ε |w_o|`.
    pub fn derivative_bound(&self, o: &LatticeIndex) -> f64 {
        if self.kind == PotentialKind::Zero {
            return 0.0;
        }
        self.weights.iter().filter(|(w, _)| w == o).map(|(_, v)| self.epsilon * v.abs()).sum()
    }

    /// `|||U_i|||₁ = ε Σ |w_o|`.
    pub fn triple_norm1(&self) -> f64 {
        if self.kind == PotentialKind::Zero {
            return 0.0;
        }
        self.epsilon * self.weights.iter().map(|(_, w)| w.abs()).sum::<f64>()
    }

    /// `|||U_i|||₂ = ε (Σ |w_o|)² sup|s''|`.
    pub fn triple_norm2(&self) -> f64 {
        if self.kind == PotentialKind::Zero {
            return 0.0;
        }
        let s: f64 = self.weights.iter().map(|(_, w)| w.abs()).sum();
        self.epsilon * s * s * SIGMOID_SECOND_SUP
    }

    /// `sup |U_i| ≤ ε`.
    pub fn sup_norm(&self) -> f64 {
        if self.kind == PotentialKind::Zero {
            0.0
        } else {
            self.epsilon
        }
    }
}

/// Serializable description of an [`InteractionModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dimension: usize,
    pub radius: u32,
    pub range: u32,
    /// Off-diagonal `a_{i,i+o}` keyed by offset, e.g. `"-1"` or `"0,1"`.
    #[serde(default)]
    pub couplings: BTreeMap<String, f64>,
    #[serde(default = "PotentialFamily::zero")]
    pub potential: PotentialFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball: Option<BallParams>,
}

/// Translation-invariant drift `Σ_j a_{ij} x_j + U_i(x)` restricted to a cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct InteractionModel {
    cube: Cube,
    range: u32,
    couplings: Vec<(LatticeIndex, f64)>,
    potential: PotentialFamily,
    ball: Option<BallParams>,
    linear: Neighbours,
    inputs: Neighbours,
    codes: Vec<u32>,
}

/// Compressed per-site neighbour lists (cube index, coefficient).
#[derive(Debug, Clone, PartialEq, Default)]
struct Neighbours {
    start: Vec<u32>,
    entries: Vec<(u32, f64)>,
}

impl Neighbours {
    fn build(cube: Cube, offsets: &[(LatticeIndex, f64)]) -> Self {
        let mut start = Vec::with_capacity(cube.len() + 1);
        let mut entries = Vec::new();
        start.push(0);
        for i in cube.sites() {
            for (o, v) in offsets {
                if *v == 0.0 {
                    continue;
                }
                if let Some(j) = cube.index_of(&i.offset_by(o)) {
                    entries.push((j as u32, *v));
                }
            }
            start.push(entries.len() as u32);
        }
        Neighbours { start, entries }
    }

    #[inline]
    fn of(&self, i: usize) -> &[(u32, f64)] {
        &self.entries[self.start[i] as usize..self.start[i + 1] as usize]
    }
}

impl TryFrom<ModelSpec> for InteractionModel {
    type Error = LatticeError;
    fn try_from(spec: ModelSpec) -> Result<Self, LatticeError> {
        InteractionModel::from_spec(&spec)
    }
}

impl From<InteractionModel> for ModelSpec {
    fn from(m: InteractionModel) -> Self {
        m.to_spec()
    }
}

impl InteractionModel {
    pub fn new(
        d: usize,
        radius: u32,
        range: u32,
        couplings: Vec<(LatticeIndex, f64)>,
        potential: PotentialFamily,
        ball: Option<BallParams>,
    ) -> Result<Self, LatticeError> {
        if d == 0 || d > MAX_DIMENSION {
            return Err(LatticeError::InvalidModel(format!("dimension must be 1..={MAX_DIMENSION}, got {d}")));
        }
        if radius > max_radius(d) {
            return Err(LatticeError::InvalidModel(format!(
                "radius {radius} too large for dimension {d} (at most {})",
                max_radius(d)
            )));
        }
        if range == 0 {
            return Err(LatticeError::InvalidModel("interaction range K must be >= 1".into()));
        }
        let check_offset = |o: &LatticeIndex| -> Result<(), LatticeError> {
            if o.dim() != d {
                return Err(LatticeError::DimensionMismatch {
                    expected: d,
                    found: o.dim(),
                });
            }
            if o.norm() > range as u64 {
                return Err(LatticeError::RangeViolation {
                    offset: o.clone(),
                    range,
                });
            }
            Ok(())
        };
        let mut seen = std::collections::BTreeSet::new();
        for (o, a) in &couplings {
            check_offset(o)?;
            if o.norm() == 0 {
                return Err(LatticeError::InvalidModel(
                    "the diagonal a_ii = -1 is implicit; offset 0 is not a coupling".into(),
                ));
            }
            if !(a.is_finite() && *a >= 0.0) {
                return Err(LatticeError::InvalidModel(format!("coupling at offset {o} must be finite and >= 0, got {a}")));
            }
            if !seen.insert(o.clone()) {
                return Err(LatticeError::InvalidModel(format!("duplicate coupling offset {o}")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for (o, _) in potential.weights() {
            check_offset(o)?;
            if !seen.insert(o.clone()) {
                return Err(LatticeError::InvalidModel(format!("duplicate potential weight offset {o}")));
            }
        }
        let cube = Cube::new(d, radius);
        let linear = Neighbours::build(cube, &couplings);
        let inputs = if potential.vanishes() {
            Neighbours::default()
        } else {
            Neighbours::build(cube, potential.weights())
        };
        let codes = cube.sites().map(|i| site_code(&i)).collect();
        Ok(InteractionModel {
            cube,
            range,
            couplings,
            potential,
            ball,
            linear,
            inputs,
            codes,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self, LatticeError> {
        InteractionModel::new(
            spec.dimension,
            spec.radius,
            spec.range,
            parse_offsets(&spec.couplings, "coupling")?,
            spec.potential.clone(),
            spec.ball,
        )
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            dimension: self.cube.dim(),
            radius: self.cube.radius(),
            range: self.range,
            couplings: render_offsets(&self.couplings),
            potential: self.potential.clone(),
            ball: self.ball,
        }
    }

    /// Nearest-neighbour couplings `a_{i,i±e_k} = γ`.
    pub fn nearest_neighbour(d: usize, radius: u32, gamma: f64, potential: PotentialFamily) -> Result<Self, LatticeError> {
        let mut couplings = Vec::new();
        for k in 0..d {
            for s in [-1, 1] {
                let mut o = vec![0; d];
                o[k] = s;
                couplings.push((LatticeIndex::new(o), gamma));
            }
        }
        InteractionModel::new(d, radius, 1, couplings, potential, None)
    }

    /// `d = 1`, `N = 8`, `K = 1`, `γ = 0.05`, `ε = 0.02`, `w_{-1} = w_0 = w_1 = 1`, ball `R = 2`, `ρ = 1`.
    pub fn standard_small() -> Self {
        let weights = [-1, 0, 1].iter().map(|&o| (LatticeIndex::new([o]), 1.0)).collect();
        let potential = PotentialFamily::smooth_bounded(0.02, weights).expect("valid potential");
        InteractionModel::nearest_neighbour(1, 8, 0.05, potential)
            .and_then(|m| m.with_ball(Some(BallParams::new(2.0, 1.0)?)))
            .expect("standard model is valid")
    }

    /// One uncoupled site: the scalar OU process.
    pub fn single_site() -> Self {
        InteractionModel::new(1, 0, 1, Vec::new(), PotentialFamily::zero(), None).expect("valid model")
    }

    pub fn with_radius(&self, radius: u32) -> Result<Self, LatticeError> {
        InteractionModel::new(
            self.cube.dim(),
            radius,
            self.range,
            self.couplings.clone(),
            self.potential.clone(),
            self.ball,
        )
    }

    pub fn with_ball(mut self, ball: Option<BallParams>) -> Result<Self, LatticeError> {
        self.ball = ball;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.cube.dim()
    }

    pub fn radius(&self) -> u32 {
        self.cube.radius()
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn cube(&self) -> Cube {
        self.cube
    }

    pub fn couplings(&self) -> &[(LatticeIndex, f64)] {
        &self.couplings
    }

    pub fn potential(&self) -> &PotentialFamily {
        &self.potential
    }

    pub fn ball(&self) -> Option<BallParams> {
        self.ball
    }

    /// Noise-stream labels of the cube sites, in cube order.
    pub fn site_codes(&self) -> &[u32] {
        &self.codes
    }

    /// `a_{i,i+o}` (0 when absent).
    pub fn coupling(&self, o: &LatticeIndex) -> f64 {
        self.couplings.iter().filter(|(c, _)| c == o).map(|(_, a)| *a).sum()
    }

    /// Linear couplings of cube site `i` as (cube index, coefficient), excluding the diagonal.
    pub fn linear_neighbours(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.linear.of(i).iter().map(|&(j, a)| (j as usize, a))
    }

    /// `U_i^N(x)` at cube site `i`, with coordinates outside the cube taken as 0.
    #[inline]
    pub fn potential_at(&self, x: &[f64], i: usize) -> f64 {
        if self.inputs.start.is_empty() {
            return 0.0;
        }
        let z: f64 = self.inputs.of(i).iter().map(|&(j, w)| w * x[j as usize]).sum();
        self.potential.epsilon * sigmoid(z)
    }

    /// Full drift vector: `out_i = -x_i + Σ_j a_{ij} x_j + U_i^N(x)`.
    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cube.len());
        for (i, o) in out.iter_mut().enumerate() {
            let lin: f64 = self.linear.of(i).iter().map(|&(j, a)| a * x[j as usize]).sum();
            *o = lin - x[i] + self.potential_at(x, i);
        }
    }
}

/// Drift component at site `i`.
pub fn drift(model: &InteractionModel, x: &LatticeState, i: &LatticeIndex) -> Result<f64, LatticeError> {
    if x.cube() != model.cube() {
        return Err(LatticeError::StateSize {
            expected: model.cube().len(),
            found: x.values().len(),
        });
    }
    let k = model.cube().require(i)?;
    let v = x.values();
    let lin: f64 = model.linear_neighbours(k).map(|(j, a)| a * v[j]).sum();
    Ok(lin - v[k] + model.potential_at(v, k))
}

/// Constants of the interaction assumptions, evaluated for the infinite translation-invariant lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `sup_j (Σ_{i≠j} a_{ij} + |||U_j|||₁)`.
    pub eta: f64,
    #[serde(rename = "K")]
    pub range: u32,
    /// `sup_i ||U_i||`.
    pub sup_u: f64,
    /// `sup_i |||U_i|||₁`.
    pub sup_u1_norm: f64,
    /// `sup_i |||U_i|||₂`.
    pub sup_u2_norm: f64,
    pub beta_lower: f64,
    pub linear_ok: bool,
    pub bounded_ok: bool,
    pub finite_range_ok: bool,
    pub eta_finite: bool,
    pub valid: bool,
    /// `beta_lower > 0`: the quadratic form is certified positive and gradients should decay.
    pub gradient_decay_hypothesis: bool,
}

/// Checks the four interaction assumptions and computes `η` and the Gershgorin bound.
pub fn validate_assumptions(model: &InteractionModel) -> AssumptionReport {
    let coupling_sum: f64 = model.couplings.iter().map(|(_, a)| a).sum();
    let u1 = model.potential.triple_norm1();
    let eta = coupling_sum + u1;
    let linear_ok = model.couplings.iter().all(|(o, a)| *a >= 0.0 && o.norm() > 0);
    let bounded_ok = model.potential.sup_norm().is_finite() && model.potential.triple_norm2().is_finite();
    let finite_range_ok = model
        .couplings
        .iter()
        .chain(model.potential.weights())
        .all(|(o, _)| o.norm() <= model.range as u64);
    let eta_finite = eta.is_finite();
    let beta_lower = beta_lower_bound(model);
    AssumptionReport {
        eta,
        range: model.range,
        sup_u: model.potential.sup_norm(),
        sup_u1_norm: u1,
        sup_u2_norm: model.potential.triple_norm2(),
        beta_lower,
        linear_ok,
        bounded_ok,
        finite_range_ok,
        eta_finite,
        valid: linear_ok && bounded_ok && finite_range_ok && eta_finite,
        gradient_decay_hypothesis: beta_lower > 0.0,
    }
}

/// Gershgorin lower bound on the smallest eigenvalue of the symmetrized form
/// `Q(ξ,ξ) = Σ_i (1 - ||∂_iU_i||) ξ_i² - Σ_{i≠j} (a_{ij} + ||∂_jU_i||) ξ_i ξ_j`.
pub fn beta_lower_bound(model: &InteractionModel) -> f64 {
    let d = model.dim();
    let p = &model.potential;
    let mut offsets: Vec<LatticeIndex> = model
        .couplings
        .iter()
        .chain(p.weights())
        .map(|(o, _)| o.clone())
        .filter(|o| o.norm() > 0)
        .collect();
    let negated: Vec<LatticeIndex> = offsets
        .iter()
        .map(|o| LatticeIndex::new(o.coords.iter().map(|c| -c).collect::<Vec<_>>()))
        .collect();
    offsets.extend(negated);
    offsets.sort();
    offsets.dedup();
    let off_diagonal: f64 = offsets
        .iter()
        .map(|o| {
            let minus = LatticeIndex::new(o.coords.iter().map(|c| -c).collect::<Vec<_>>());
            (model.coupling(o) + p.derivative_bound(o) + model.coupling(&minus) + p.derivative_bound(&minus)) / 2.0
        })
        .sum();
    1.0 - p.derivative_bound(&LatticeIndex::origin(d)) - off_diagonal
}

/// Smallest `B ≥ 1` with `2 - ln B + ln(1+η) + (1+η)/B ≤ -2A`.
///
/// The left side is strictly decreasing in `B`, so the root is bracketed on
/// `[1, 10^6]` and found by bisection.
pub fn choose_b(a: f64, eta: f64) -> f64 {
    assert!(a > 0.0 && eta >= 0.0, "choose_b needs A > 0 and eta >= 0");
    let g = |b: f64| 2.0 - b.ln() + (1.0 + eta).ln() + (1.0 + eta) / b + 2.0 * a;
    let (mut lo, mut hi) = (1.0_f64, 1.0e6_f64);
    if g(lo) <= 0.0 {
        return 1.0;
    }
    while g(hi) > 0.0 {
        hi *= 1.0e3;
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
