use std::fmt;
use std::sync::Arc;

use super::{lattice_distance, Cube, LatticeError, LatticeIndex, LatticeState};

type LocalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Which closed form an observable has, when it has one.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableKind {
    Constant(f64),
    Coordinate,
    Tanh,
    Abs,
    Gaussian,
    /// `constant + Σ coeffs[k] x_{support[k]}`.
    Affine { constant: f64, coeffs: Vec<f64> },
    Custom,
}

/// A function of finitely many coordinates with its localization set `Λ(f)`
/// and sup-norm bounds on itself and its first and second partials.
#[derive(Clone)]
pub struct CylinderObservable {
    name: String,
    kind: ObservableKind,
    support: Vec<LatticeIndex>,
    eval: LocalFn,
    grad_bounds: Vec<f64>,
    second_bounds: Vec<f64>,
    sup_bound: f64,
}

impl fmt::Debug for CylinderObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderObservable")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("support", &self.support)
            .field("grad_bounds", &self.grad_bounds)
            .field("sup_bound", &self.sup_bound)
            .finish_non_exhaustive()
    }
}

impl CylinderObservable {
    /// A general observable. `eval` receives the coordinates on `support`, in order;
    /// `second_bounds` is the row-major `|support|²` matrix of `||∂_{jk} f||`.
    pub fn custom(
        name: impl Into<String>,
        support: Vec<LatticeIndex>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad_bounds: Vec<f64>,
        second_bounds: Vec<f64>,
        sup_bound: f64,
    ) -> Result<Self, LatticeError> {
        CylinderObservable::build(name.into(), ObservableKind::Custom, support, Arc::new(eval), grad_bounds, second_bounds, sup_bound)
    }

    fn build(
        name: String,
        kind: ObservableKind,
        support: Vec<LatticeIndex>,
        eval: LocalFn,
        grad_bounds: Vec<f64>,
        second_bounds: Vec<f64>,
        sup_bound: f64,
    ) -> Result<Self, LatticeError> {
        let n = support.len();
        if grad_bounds.len() != n || second_bounds.len() != n * n {
            return Err(LatticeError::InvalidModel(format!(
                "observable {name}: {n} support sites need {n} gradient bounds and {} second-derivative bounds",
                n * n
            )));
        }
        if let Some(first) = support.first() {
            if let Some(bad) = support.iter().find(|s| s.dim() != first.dim()) {
                return Err(LatticeError::DimensionMismatch {
                    expected: first.dim(),
                    found: bad.dim(),
                });
            }
        }
        let mut sorted = support.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            return Err(LatticeError::InvalidModel(format!("observable {name}: repeated support site")));
        }
        Ok(CylinderObservable {
            name,
            kind,
            support,
            eval,
            grad_bounds,
            second_bounds,
            sup_bound,
        })
    }

    fn single(name: String, kind: ObservableKind, site: LatticeIndex, f: fn(f64) -> f64, grad: f64, second: f64, sup: f64) -> Self {
        CylinderObservable::build(name, kind, vec![site], Arc::new(move |x: &[f64]| f(x[0])), vec![grad], vec![second], sup)
            .expect("one-site observable is well formed")
    }

    pub fn constant(c: f64) -> Self {
        CylinderObservable::build(format!("const({c})"), ObservableKind::Constant(c), vec![], Arc::new(move |_: &[f64]| c), vec![], vec![], c.abs())
            .expect("constant observable is well formed")
    }

    /// `f(x) = x_k`.
    pub fn coordinate(site: LatticeIndex) -> Self {
        CylinderObservable::single(format!("x[{site}]"), ObservableKind::Coordinate, site, |v| v, 1.0, 0.0, f64::INFINITY)
    }

    /// `f(x) = tanh(x_k)`.
    pub fn tanh(site: LatticeIndex) -> Self {
        // sup |tanh''| = 4/(3√3)
        CylinderObservable::single(format!("tanh(x[{site}])"), ObservableKind::Tanh, site, f64::tanh, 1.0, 0.769_800_358_919_501, 1.0)
    }

    /// `f(x) = |x_k|`; not differentiable at 0, so the second bound is infinite.
    pub fn abs(site: LatticeIndex) -> Self {
        CylinderObservable::single(format!("|x[{site}]|"), ObservableKind::Abs, site, f64::abs, 1.0, f64::INFINITY, f64::INFINITY)
    }

    /// `f(x) = exp(-x_k²)`.
    pub fn gaussian(site: LatticeIndex) -> Self {
        CylinderObservable::single(
            format!("exp(-x[{site}]^2)"),
            ObservableKind::Gaussian,
            site,
            |v| (-v * v).exp(),
            0.857_763_884_960_706_9,
            2.0,
            1.0,
        )
    }

    /// `f(x) = constant + Σ c_k x_{i_k}`.
    pub fn affine(constant: f64, terms: Vec<(LatticeIndex, f64)>) -> Result<Self, LatticeError> {
        let (support, coeffs): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
        let n = support.len();
        let name = format!(
            "{constant}{}",
            support.iter().zip(&coeffs).map(|(s, c)| format!(" + {c}*x[{s}]")).collect::<String>()
        );
        let cs = coeffs.clone();
        let eval = Arc::new(move |x: &[f64]| constant + x.iter().zip(&cs).map(|(v, c)| v * c).sum::<f64>());
        let grads = coeffs.iter().map(|c| c.abs()).collect();
        let sup = if coeffs.iter().all(|c| *c == 0.0) { constant.abs() } else { f64::INFINITY };
        CylinderObservable::build(name, ObservableKind::Affine { constant, coeffs }, support, eval, grads, vec![0.0; n * n], sup)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ObservableKind {
        &self.kind
    }

    /// `Λ(f)`.
    pub fn support(&self) -> &[LatticeIndex] {
        &self.support
    }

    pub fn grad_bounds(&self) -> &[f64] {
        &self.grad_bounds
    }

    pub fn second_bounds(&self) -> &[f64] {
        &self.second_bounds
    }

    /// `||f||`.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// `|||f|||₁ = Σ_i ||∂_i f||`.
    pub fn triple_norm1(&self) -> f64 {
        self.grad_bounds.iter().sum()
    }

    /// `|||f|||₂ = Σ_{j,k} ||∂_{jk} f||`.
    pub fn triple_norm2(&self) -> f64 {
        self.second_bounds.iter().sum()
    }

    /// Evaluates on the coordinates of the support, in support order.
    pub fn eval_local(&self, local: &[f64]) -> f64 {
        (self.eval)(local)
    }

    pub fn evaluate(&self, x: &LatticeState) -> Result<f64, LatticeError> {
        let local: Result<Vec<f64>, _> = self.support.iter().map(|s| x.get(s)).collect();
        Ok(self.eval_local(&local?))
    }

    /// Resolves the support to cube positions for repeated evaluation.
    pub fn bind(&self, cube: &Cube) -> Result<BoundObservable<'_>, LatticeError> {
        let idx = self.support.iter().map(|s| cube.require(s)).collect::<Result<_, _>>()?;
        Ok(BoundObservable { obs: self, idx })
    }

    /// `dist(k, Λ(f))`, or `None` for a constant.
    pub fn distance_to_support(&self, k: &LatticeIndex) -> Result<Option<u64>, LatticeError> {
        let mut best = None;
        for s in &self.support {
            let d = lattice_distance(k, s)?;
            best = Some(best.map_or(d, |b: u64| b.min(d)));
        }
        Ok(best)
    }

    /// `n_k = ⌊dist(k, Λ(f)) / K⌋`.
    pub fn hops(&self, k: &LatticeIndex, range: u32) -> Result<u64, LatticeError> {
        Ok(self.distance_to_support(k)?.map_or(0, |d| d / range as u64))
    }
}

/// An observable with its support resolved against one cube.
#[derive(Debug, Clone)]
pub struct BoundObservable<'a> {
    obs: &'a CylinderObservable,
    idx: Vec<usize>,
}

impl BoundObservable<'_> {
    #[inline]
    pub fn eval(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend(self.idx.iter().map(|&k| x[k]));
        self.obs.eval_local(scratch)
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }
}
