//! European call on the geometric average of a basket under multi-asset Black–Scholes.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::normal::normal_cdf;
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Lowest asset price fed to the pricer by the benchmark map; inputs drawn from `[0,1]^d`
/// would otherwise hit `log 0`.
pub const PRICE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasketParams {
    pub dim: usize,
    /// `σ_ij`, row-major `dim × dim`.
    pub sigma: Vec<f64>,
    pub maturity: f64,
    pub strike: f64,
    pub rate: f64,
}

impl BasketParams {
    /// `σ = 10⁻⁵·I`, `T = 5`, `K = 0.08`, `r = 0.05`.
    pub fn standard(dim: usize) -> Self {
        let mut sigma = vec![0.0; dim * dim];
        for i in 0..dim {
            sigma[i * dim + i] = 1e-5;
        }
        Self {
            dim,
            sigma,
            maturity: 5.0,
            strike: 0.08,
            rate: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("basket needs at least one asset".into()));
        }
        if self.sigma.len() != self.dim * self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim * self.dim,
                got: self.sigma.len(),
            });
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::InvalidArgument(format!("strike must be positive, got {}", self.strike)));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "maturity must be positive, got {}",
                self.maturity
            )));
        }
        let d = self.dim;
        for i in 0..d {
            for j in 0..i {
                if self.sigma[i * d + j] != self.sigma[j * d + i] {
                    return Err(Error::InvalidArgument("sigma must be symmetric".into()));
                }
            }
        }
        Ok(())
    }

    fn sigma(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.dim + j]
    }

    /// `(ν, m)` of the closed form.
    fn moments(&self) -> (f64, f64) {
        let d = self.dim as f64;
        let nu = (0..self.dim)
            .map(|j| {
                let col: f64 = (0..self.dim).map(|i| self.sigma(i, j).powi(2)).sum();
                col * col
            })
            .sum::<f64>()
            .sqrt()
            / d;
        let total: f64 = self.sigma.iter().map(|s| s * s).sum();
        let m = self.rate * self.maturity - total * self.maturity / (2.0 * d);
        (nu, m)
    }

    /// Upper bound `e^{−rT} s̃ e^{m̃}` of the price.
    pub fn forward_bound(&self, s: &[f64]) -> Result<f64> {
        self.validate()?;
        let g = geometric_mean(s, self.dim)?;
        let (nu, m) = self.moments();
        Ok((-self.rate * self.maturity).exp() * g * (m + 0.5 * nu * nu).exp())
    }
}

fn geometric_mean(s: &[f64], dim: usize) -> Result<f64> {
    if s.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: s.len(),
        });
    }
    if let Some(bad) = s.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("asset price {bad} is not a finite non-negative number")));
    }
    if s.contains(&0.0) {
        return Ok(0.0);
    }
    Ok((s.iter().map(|v| v.ln()).sum::<f64>() / dim as f64).exp())
}

/// Closed-form price `e^{−rT}(s̃ e^{m̃} Φ(d₁) − K Φ(d₂))`.
///
/// A zero asset price makes the geometric mean worthless and returns 0.
pub fn basket_call_price(s: &[f64], params: &BasketParams) -> Result<f64> {
    params.validate()?;
    let g = geometric_mean(s, params.dim)?;
    if g == 0.0 {
        return Ok(0.0);
    }
    let (nu, m) = params.moments();
    let (k, t) = (params.strike, params.maturity);
    let discount = (-params.rate * t).exp();
    let price = if nu > 0.0 {
        let m_tilde = m + 0.5 * nu * nu;
        let d1 = ((g / k).ln() + m + nu * nu) / nu;
        let d2 = d1 - nu;
        discount * (g * m_tilde.exp() * normal_cdf(d1) - k * normal_cdf(d2))
    } else {
        // Deterministic terminal value.
        discount * (g * m.exp() - k).max(0.0)
    };
    Ok(price.max(0.0))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Discounted payoff averaged over `paths` draws of the exact terminal law
/// `log S_i(T) = log S_i + (r − ½ Σ_j σ_ij²) T + √T Σ_j σ_ij Z_j`.
pub fn basket_call_monte_carlo(
    s: &[f64],
    params: &BasketParams,
    paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    params.validate()?;
    geometric_mean(s, params.dim)?;
    if paths < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let d = params.dim;
    let t = params.maturity;
    let mut drift = 0.0;
    for (i, &si) in s.iter().enumerate() {
        let var: f64 = (0..d).map(|j| params.sigma(i, j).powi(2)).sum();
        drift += si.ln() + (params.rate - 0.5 * var) * t;
    }
    drift /= d as f64;
    // Loading of the mean log-price on each factor.
    let loading: Vec<f64> = (0..d)
        .map(|j| (0..d).map(|i| params.sigma(i, j)).sum::<f64>() * t.sqrt() / d as f64)
        .collect();
    let discount = (-params.rate * t).exp();
    let mut rng = SplitMix64::new(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..paths {
        let mut log_g = drift;
        for &l in &loading {
            let z: f64 = StandardNormal.sample(&mut rng);
            log_g += l * z;
        }
        let payoff = discount * (log_g.exp() - params.strike).max(0.0);
        sum += payoff;
        sum_sq += payoff * payoff;
    }
    let n = paths as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_strike_limit() {
        let mut p = BasketParams::standard(5);
        p.strike = 1e-300;
        let s = [0.3, 0.4, 0.5, 0.6, 0.7];
        let price = basket_call_price(&s, &p).unwrap();
        let bound = p.forward_bound(&s).unwrap();
        assert!((price - bound).abs() < 1e-15, "{price} vs {bound}");
    }

    #[test]
    fn zero_asset_is_worthless() {
        let p = BasketParams::standard(3);
        assert_eq!(basket_call_price(&[0.0, 0.5, 0.5], &p).unwrap(), 0.0);
    }

    #[test]
    fn nearly_deterministic_value() {
        // With σ = 1e-5 the geometric mean grows at rate r almost surely.
        let p = BasketParams::standard(9);
        let price = basket_call_price(&[0.5; 9], &p).unwrap();
        let expected = 0.5 - 0.08 * (-0.25f64).exp();
        assert!((price - expected).abs() < 1e-9, "{price} vs {expected}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = BasketParams::standard(2);
        p.strike = 0.0;
        assert!(basket_call_price(&[0.5, 0.5], &p).is_err());
        let mut p = BasketParams::standard(2);
        p.maturity = -1.0;
        assert!(basket_call_price(&[0.5, 0.5], &p).is_err());
        let p = BasketParams::standard(2);
        assert!(basket_call_price(&[0.5], &p).is_err());
        assert!(basket_call_price(&[0.5, -0.1], &p).is_err());
    }
}
