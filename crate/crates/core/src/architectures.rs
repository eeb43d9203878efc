//! In-parameter-linear architectures `ỹ = wᵀ g(x)`.
//!
//! A [`FeatureMap`] turns an input `x` into features `g(x)`. It never sees the
//! weights, so every model built on it is linear in its trainable parameters
//! and its weight update decomposes into a state-space step.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grammar::SpecParams;
use crate::linalg::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Logistic,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

/// Polynomial (higher-order neural unit) features: all monomials of the
/// input up to `order`, graded lexicographic, bias first.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    order: usize,
    input_dim: usize,
    bias: bool,
    /// Each monomial as a non-decreasing list of input indices.
    monomials: Vec<Vec<usize>>,
}

impl Polynomial {
    pub fn new(order: usize, input_dim: usize, bias: bool) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::domain("polynomial map needs input_dim >= 1"));
        }
        if order == 0 && !bias {
            return Err(Error::domain("order 0 without bias has no features"));
        }
        let mut monomials = Vec::new();
        if bias {
            monomials.push(Vec::new());
        }
        for degree in 1..=order {
            let mut idx = vec![0usize; degree];
            loop {
                monomials.push(idx.clone());
                // next combination with replacement in lex order
                let Some(pos) = (0..degree).rev().find(|&p| idx[p] + 1 < input_dim) else {
                    break;
                };
                let v = idx[pos] + 1;
                for slot in &mut idx[pos..] {
                    *slot = v;
                }
            }
        }
        Ok(Polynomial {
            order,
            input_dim,
            bias,
            monomials,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn monomials(&self) -> &[Vec<usize>] {
        &self.monomials
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.monomials
            .iter()
            .map(|m| m.iter().map(|&i| x[i]).product())
            .collect()
    }
}

/// Random vector functional link: `[1, x (direct links), φ(V x + b)]` with a
/// frozen random projection `V` and biases `b`, uniform on `[−1, 1]` from a
/// seeded ChaCha8 stream (projection row-major first, then biases).
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalLink {
    input_dim: usize,
    hidden: usize,
    activation: Activation,
    direct: bool,
    seed: u64,
    projection: Matrix,
    biases: Vec<f64>,
}

impl FunctionalLink {
    pub fn new(input_dim: usize, hidden: usize, activation: Activation, direct: bool, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::domain("functional link needs input_dim >= 1 and hidden >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proj: Vec<f64> = (0..hidden * input_dim)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let biases = (0..hidden).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Ok(FunctionalLink {
            input_dim,
            hidden,
            activation,
            direct,
            seed,
            projection: Matrix::from_row_major(hidden, input_dim, proj)?,
            biases,
        })
    }

    pub fn projection(&self) -> &Matrix {
        &self.projection
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.output_dim());
        out.push(1.0);
        if self.direct {
            out.extend_from_slice(x);
        }
        for (j, b) in self.biases.iter().enumerate() {
            let z: f64 = self.projection.row(j).iter().zip(x).map(|(v, xi)| v * xi).sum::<f64>() + b;
            out.push(self.activation.apply(z));
        }
        out
    }

    fn output_dim(&self) -> usize {
        1 + self.hidden + if self.direct { self.input_dim } else { 0 }
    }
}

pub type BasisFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// User-supplied scalar basis functions of the whole input vector.
#[derive(Clone)]
pub struct CustomBasis {
    input_dim: usize,
    functions: Vec<(String, BasisFn)>,
}

impl CustomBasis {
    pub fn new(input_dim: usize, functions: Vec<(String, BasisFn)>) -> Result<Self> {
        if input_dim == 0 || functions.is_empty() {
            return Err(Error::domain("custom basis needs input_dim >= 1 and at least one function"));
        }
        Ok(CustomBasis { input_dim, functions })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.iter().map(|(n, _)| n.as_str())
    }
}

impl fmt::Debug for CustomBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomBasis")
            .field("input_dim", &self.input_dim)
            .field("functions", &self.names().collect::<Vec<_>>())
            .finish()
    }
}

/// The map `g(x)`. Immutable once built.
#[derive(Clone, Debug)]
pub enum FeatureMap {
    Polynomial(Polynomial),
    FunctionalLink(FunctionalLink),
    Custom(CustomBasis),
}

impl FeatureMap {
    pub fn polynomial(order: usize, input_dim: usize, bias: bool) -> Result<Self> {
        Polynomial::new(order, input_dim, bias).map(FeatureMap::Polynomial)
    }

    pub fn functional_link(
        input_dim: usize,
        hidden: usize,
        activation: Activation,
        direct: bool,
        seed: u64,
    ) -> Result<Self> {
        FunctionalLink::new(input_dim, hidden, activation, direct, seed).map(FeatureMap::FunctionalLink)
    }

    /// Parses `honu:order=<r>,dim=<n>[,bias=<0|1>]` or
    /// `rvfl:dim=<n>,hidden=<h>,act=<tanh|logistic>[,direct=<0|1>],seed=<u64>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut p = SpecParams::parse(spec)?;
        let map = match p.kind {
            "honu" => {
                let order = p.required("order")?;
                let dim = p.required("dim")?;
                let bias = p.flag("bias", true)?;
                FeatureMap::polynomial(order, dim, bias)?
            }
            "rvfl" => {
                let dim = p.required("dim")?;
                let hidden = p.required("hidden")?;
                let act = match p.raw("act") {
                    Some("tanh") => Activation::Tanh,
                    Some("logistic") => Activation::Logistic,
                    Some(other) => return Err(p.error(format!("unknown activation `{other}`"))),
                    None => return Err(p.error("missing `act`")),
                };
                let direct = p.flag("direct", true)?;
                let seed = p.required("seed")?;
                FeatureMap::functional_link(dim, hidden, act, direct, seed)?
            }
            other => return Err(p.error(format!("unknown architecture `{other}`"))),
        };
        p.finish()?;
        Ok(map)
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Polynomial(p) => p.input_dim,
            FeatureMap::FunctionalLink(f) => f.input_dim,
            FeatureMap::Custom(c) => c.input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FeatureMap::Polynomial(p) => p.monomials.len(),
            FeatureMap::FunctionalLink(f) => f.output_dim(),
            FeatureMap::Custom(c) => c.functions.len(),
        }
    }

    /// `g(x)`.
    pub fn features(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if !x.is_finite() {
            return Err(Error::domain("features: non-finite input"));
        }
        let xs = x.as_slice();
        let g = match self {
            FeatureMap::Polynomial(p) => p.eval(xs),
            FeatureMap::FunctionalLink(f) => f.eval(xs),
            FeatureMap::Custom(c) => c.functions.iter().map(|(_, f)| f(xs)).collect(),
        };
        Vector::new(g).map_err(|_| Error::domain("features: map produced non-finite values"))
    }
}

/// `ỹ = wᵀ g(x)`.
#[derive(Clone, Debug)]
pub struct IplnaModel {
    weights: Vector,
    map: FeatureMap,
}

impl IplnaModel {
    /// Zero-initialised weights.
    pub fn new(map: FeatureMap) -> Self {
        IplnaModel {
            weights: Vector::zeros(map.output_dim()),
            map,
        }
    }

    pub fn with_weights(map: FeatureMap, weights: Vector) -> Result<Self> {
        if weights.len() != map.output_dim() {
            return Err(Error::Dimension {
                expected: map.output_dim(),
                got: weights.len(),
            });
        }
        Ok(IplnaModel { weights, map })
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: Vector) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                got: weights.len(),
            });
        }
        self.weights = weights;
        Ok(())
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn predict(&self, x: &Vector) -> Result<f64> {
        Ok(self.weights.dot(&self.map.features(x)?))
    }
}
