//! Benchmark maps `L: [0,1]^d → ℝ`, each paired with an independent oracle.
//!
//! Names understood by [`lookup`]:
//!
//! | name | d | map |
//! |---|---|---|
//! | `owen-d{d}-r{r}`, `owen-f34` | d | `(max{Σy − ½, 0})^r` |
//! | `relu-net-d{d}` | d | one hidden ReLU unit, weights 1, bias −½ |
//! | `sum-of-sines` | 6 | `Σ sin(4π y_i)` |
//! | `projectile`, `projectile-drag-free` | 7 | horizontal range, forward Euler |
//! | `basket-d{d}` | d | geometric basket call, inputs floored at 1e-6 |
//! | `linear` | 1 | `2y` |
//! | `product-xy` | 2 | `y₁ y₂` |

mod basket;
mod normal;
mod projectile;

use rayon::prelude::*;

pub use basket::{basket_call_monte_carlo, basket_call_price, BasketParams, McEstimate, PRICE_FLOOR};
pub use normal::{erfc, normal_cdf};
pub use projectile::{
    projectile_range, range_euler, range_rk4, ProjectileParams, Realization, DEFAULT_DT,
    PROJECTILE_DIM, TIME_LIMIT,
};

use crate::lds::PointSet;
use crate::net::{Activation, NetworkConfig, NetworkParams};
use crate::rng::split_seed;
use crate::variation::GridFunction;
use crate::{Error, Result};

/// `(max{Σ y_i − ½, 0})^r`, with `r = 0` giving the indicator of `Σ y_i > ½`.
pub fn owen_f(r: u32, y: &[f64]) -> f64 {
    let s = y.iter().sum::<f64>() - 0.5;
    if s <= 0.0 {
        0.0
    } else {
        s.powi(r as i32)
    }
}

/// `Σ sin(4π y_i)`.
pub fn sum_of_sines(y: &[f64]) -> f64 {
    y.iter().map(|v| (4.0 * std::f64::consts::PI * v).sin()).sum()
}

/// Value from an independent evaluation path and the agreement it promises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub value: f64,
    pub tolerance: f64,
}

impl Reference {
    pub fn agrees(&self, value: f64) -> bool {
        (value - self.value).abs() <= self.tolerance
    }
}

pub trait BenchmarkMap: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn evaluate(&self, y: &[f64]) -> Result<f64>;
    fn oracle(&self, y: &[f64]) -> Result<Reference>;
}

/// Evaluates `map` at every point, in point order.
pub fn evaluate_points(map: &dyn BenchmarkMap, points: &PointSet) -> Result<Vec<f64>> {
    if points.dim() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            got: points.dim(),
        });
    }
    (0..points.len())
        .into_par_iter()
        .map(|i| map.evaluate(points.point(i)))
        .collect()
}

/// Views a benchmark as a variation-module integrand. Evaluation errors become NaN.
pub struct AsGrid<'a>(pub &'a dyn BenchmarkMap);

impl GridFunction for AsGrid<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, y: &[f64]) -> f64 {
        self.0.evaluate(y).unwrap_or(f64::NAN)
    }
}

fn check_dim(expected: usize, y: &[f64]) -> Result<()> {
    if y.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: y.len(),
        })
    }
}

struct Owen {
    name: String,
    dim: usize,
    r: u32,
}

impl BenchmarkMap for Owen {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim, y)?;
        Ok(owen_f(self.r, y))
    }
    fn oracle(&self, y: &[f64]) -> Result<Reference> {
        check_dim(self.dim, y)?;
        // Reversed summation and an exp/ln power take a different rounding path.
        let s: f64 = y.iter().rev().sum::<f64>() - 0.5;
        let value = match (s > 0.0, self.r) {
            (false, _) => 0.0,
            (true, 0) => 1.0,
            (true, r) => (r as f64 * s.ln()).exp(),
        };
        Ok(Reference {
            value,
            tolerance: 1e-12 * value.abs().max(1.0),
        })
    }
}

struct ReluNet {
    name: String,
    net: NetworkParams,
}

impl ReluNet {
    fn new(dim: usize) -> Result<Self> {
        let mut net = NetworkParams::zeros(NetworkConfig {
            input_dim: dim,
            hidden_layers: 1,
            width: 1,
            activation: Activation::Relu,
            batch_norm: false,
        })?;
        net.weights_mut(0).fill(1.0);
        net.bias_mut(0)[0] = -0.5;
        net.weights_mut(1)[0] = 1.0;
        Ok(Self {
            name: format!("relu-net-d{dim}"),
            net,
        })
    }
}

impl BenchmarkMap for ReluNet {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.net.config().input_dim
    }
    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y)?;
        Ok(self.net.predict(y)?[0])
    }
    fn oracle(&self, y: &[f64]) -> Result<Reference> {
        check_dim(self.dim(), y)?;
        Ok(Reference {
            value: owen_f(1, y),
            tolerance: 1e-14,
        })
    }
}

struct SumOfSines;

impl BenchmarkMap for SumOfSines {
    fn name(&self) -> &str {
        "sum-of-sines"
    }
    fn dim(&self) -> usize {
        6
    }
    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        check_dim(6, y)?;
        Ok(sum_of_sines(y))
    }
    fn oracle(&self, y: &[f64]) -> Result<Reference> {
        check_dim(6, y)?;
        let value = y
            .iter()
            .map(|v| {
                let (s, c) = (2.0 * std::f64::consts::PI * v).sin_cos();
                2.0 * s * c
            })
            .sum();
        Ok(Reference {
            value,
            tolerance: 1e-12,
        })
    }
}

struct Projectile {
    name: &'static str,
    params: ProjectileParams,
}

/// Step of the RK4 reference solver.
const PROJECTILE_REFERENCE_DT: f64 = 1e-4;
/// Forward Euler at the default step sits within this distance of the exact range.
const PROJECTILE_TOLERANCE: f64 = 0.05;

impl BenchmarkMap for Projectile {
    fn name(&self) -> &str {
        self.name
    }
    fn dim(&self) -> usize {
        PROJECTILE_DIM
    }
    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        range_euler(&self.params, y, DEFAULT_DT)
    }
    fn oracle(&self, y: &[f64]) -> Result<Reference> {
        Ok(Reference {
            value: range_rk4(&self.params, y, PROJECTILE_REFERENCE_DT)?,
            tolerance: PROJECTILE_TOLERANCE,
        })
    }
}

struct Basket {
    name: String,
    params: BasketParams,
}

const BASKET_ORACLE_PATHS: usize = 4096;

impl Basket {
    fn floored(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.params.dim, y)?;
        Ok(y.iter().map(|v| v.max(PRICE_FLOOR)).collect())
    }
}

impl BenchmarkMap for Basket {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.params.dim
    }
    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        basket_call_price(&self.floored(y)?, &self.params)
    }
    fn oracle(&self, y: &[f64]) -> Result<Reference> {
        let s = self.floored(y)?;
        let seed = y.iter().fold(0x00ba_54e7_u64, |h, v| split_seed(h, v.to_bits()));
        let mc = basket_call_monte_carlo(&s, &self.params, BASKET_ORACLE_PATHS, seed)?;
        // The closed form and the exact law differ by O(σ²T) in the mean; 1e-9 covers it.
        Ok(Reference {
            value: mc.mean,
            tolerance: 5.0 * mc.std_error + 1e-9,
        })
    }
}

struct Linear;

impl BenchmarkMap for Linear {
    fn name(&self) -> &str {
        "linear"
    }
    fn dim(&self) -> usize {
        1
    }
    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        check_dim(1, y)?;
        Ok(2.0 * y[0])
    }
    fn oracle(&self, y: &[f64]) -> Result<Reference> {
        check_dim(1, y)?;
        Ok(Reference {
            value: y[0] + y[0],
            tolerance: 0.0,
        })
    }
}

struct ProductXy;

impl BenchmarkMap for ProductXy {
    fn name(&self) -> &str {
        "product-xy"
    }
    fn dim(&self) -> usize {
        2
    }
    fn evaluate(&self, y: &[f64]) -> Result<f64> {
        check_dim(2, y)?;
        Ok(y[0] * y[1])
    }
    fn oracle(&self, y: &[f64]) -> Result<Reference> {
        check_dim(2, y)?;
        let value = if y[0] == 0.0 || y[1] == 0.0 {
            0.0
        } else {
            (y[0].ln() + y[1].ln()).exp()
        };
        Ok(Reference {
            value,
            tolerance: 1e-14,
        })
    }
}

/// Largest input dimension accepted for the parametric families.
pub const MAX_FAMILY_DIM: usize = 64;

fn parse_dim(text: &str, name: &str) -> Result<usize> {
    match text.parse::<usize>() {
        Ok(d) if (1..=MAX_FAMILY_DIM).contains(&d) => Ok(d),
        _ => Err(Error::UnknownBenchmark(name.to_string())),
    }
}

/// Resolves a benchmark by name.
pub fn lookup(name: &str) -> Result<Box<dyn BenchmarkMap>> {
    let unknown = || Error::UnknownBenchmark(name.to_string());
    Ok(match name {
        "owen-f34" => Box::new(Owen {
            name: name.into(),
            dim: 3,
            r: 4,
        }),
        "sum-of-sines" => Box::new(SumOfSines),
        "projectile" => Box::new(Projectile {
            name: "projectile",
            params: ProjectileParams::default(),
        }),
        "projectile-drag-free" => Box::new(Projectile {
            name: "projectile-drag-free",
            params: ProjectileParams::drag_free(),
        }),
        "linear" => Box::new(Linear),
        "product-xy" => Box::new(ProductXy),
        _ => {
            if let Some(rest) = name.strip_prefix("owen-d") {
                let (d, r) = rest.split_once("-r").ok_or_else(unknown)?;
                Box::new(Owen {
                    name: name.into(),
                    dim: parse_dim(d, name)?,
                    r: r.parse().map_err(|_| unknown())?,
                })
            } else if let Some(d) = name.strip_prefix("relu-net-d") {
                Box::new(ReluNet::new(parse_dim(d, name)?)?)
            } else if let Some(d) = name.strip_prefix("basket-d") {
                let dim = parse_dim(d, name)?;
                Box::new(Basket {
                    name: name.into(),
                    params: BasketParams::standard(dim),
                })
            } else {
                return Err(unknown());
            }
        }
    })
}

/// One representative name per registered family.
pub const EXAMPLE_NAMES: &[&str] = &[
    "owen-f34",
    "owen-d2-r0",
    "relu-net-d3",
    "sum-of-sines",
    "projectile",
    "projectile-drag-free",
    "basket-d5",
    "basket-d7",
    "basket-d9",
    "linear",
    "product-xy",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn owen_examples() {
        assert_eq!(owen_f(4, &[0.0; 3]), 0.0);
        assert_eq!(owen_f(4, &[1.0; 3]), 39.0625);
        assert_eq!(owen_f(4, &[1.0 / 6.0; 3]), 0.0);
        assert_eq!(owen_f(0, &[0.4, 0.2]), 1.0);
        assert_eq!(owen_f(0, &[0.2, 0.2]), 0.0);
    }

    #[test]
    fn sines_examples() {
        assert_eq!(sum_of_sines(&[0.0; 6]), 0.0);
        assert!((sum_of_sines(&[0.125; 6]) - 6.0).abs() < 1e-12);
        assert!(sum_of_sines(&[0.25; 6]).abs() < 1e-12);
    }

    #[test]
    fn relu_network_examples() {
        let m = lookup("relu-net-d3").unwrap();
        assert!((m.evaluate(&[0.4, 0.2, 0.1]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(m.evaluate(&[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn registry() {
        for name in EXAMPLE_NAMES {
            let m = lookup(name).unwrap();
            assert_eq!(m.name(), *name);
        }
        assert_eq!(lookup("basket-d9").unwrap().dim(), 9);
        assert_eq!(lookup("owen-d4-r2").unwrap().dim(), 4);
        for bad in ["nope", "owen-d0-r1", "basket-d", "owen-d3", "relu-net-dx"] {
            assert!(matches!(lookup(bad), Err(Error::UnknownBenchmark(_))), "{bad}");
        }
    }

    #[test]
    fn wrong_dimension_is_an_error() {
        let m = lookup("sum-of-sines").unwrap();
        assert!(m.evaluate(&[0.5; 5]).is_err());
    }
}
