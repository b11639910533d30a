//! Horizontal range of a ball thrown through air with uncertain parameters.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Input dimension of the parametric model.
pub const PROJECTILE_DIM: usize = 7;
/// Step size used by the benchmark map.
pub const DEFAULT_DT: f64 = 0.00125;
/// Simulated time after which integration is abandoned.
pub const TIME_LIMIT: f64 = 1e3;

/// Nominal values and perturbation size of the parametric model.
///
/// Every parameter is `nominal * (1 + epsilon * (2 y_k - 1))`, in the order density,
/// radius, drag coefficient, mass, release height, release angle (degrees), speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectileParams {
    pub epsilon: f64,
    pub density: f64,
    pub radius: f64,
    pub drag_coefficient: f64,
    pub mass: f64,
    pub height: f64,
    pub angle_deg: f64,
    pub speed: f64,
    pub gravity: f64,
    /// `false` forces the drag coefficient to zero.
    pub drag: bool,
}

impl Default for ProjectileParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            density: 1.225,
            radius: 0.23,
            drag_coefficient: 0.1,
            mass: 0.145,
            height: 1.0,
            angle_deg: 30.0,
            speed: 25.0,
            gravity: 9.81,
            drag: true,
        }
    }
}

/// Physical quantities for one parameter draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Realization {
    /// `ρ C_d π r² / (2 m)`, so that the drag deceleration is `k ‖v‖²`.
    pub drag_factor: f64,
    pub height: f64,
    pub angle_rad: f64,
    pub speed: f64,
    pub gravity: f64,
}

impl ProjectileParams {
    pub fn drag_free() -> Self {
        Self {
            drag: false,
            ..Self::default()
        }
    }

    pub fn realize(&self, y: &[f64]) -> Result<Realization> {
        if y.len() != PROJECTILE_DIM {
            return Err(Error::DimensionMismatch {
                expected: PROJECTILE_DIM,
                got: y.len(),
            });
        }
        let p = |k: usize, nominal: f64| nominal * (1.0 + self.epsilon * (2.0 * y[k] - 1.0));
        let density = p(0, self.density);
        let radius = p(1, self.radius);
        let cd = if self.drag {
            p(2, self.drag_coefficient)
        } else {
            0.0
        };
        let mass = p(3, self.mass);
        let r = Realization {
            drag_factor: density * cd * std::f64::consts::PI * radius * radius / (2.0 * mass),
            height: p(4, self.height),
            angle_rad: p(5, self.angle_deg).to_radians(),
            speed: p(6, self.speed),
            gravity: self.gravity,
        };
        if !(mass > 0.0 && r.height > 0.0 && r.speed > 0.0 && r.drag_factor >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "parameters leave the physical range at y = {y:?}"
            )));
        }
        Ok(r)
    }
}

#[derive(Clone, Copy)]
struct State {
    x: [f64; 2],
    v: [f64; 2],
}

impl Realization {
    fn initial(&self) -> State {
        State {
            x: [0.0, self.height],
            v: [
                self.speed * self.angle_rad.cos(),
                self.speed * self.angle_rad.sin(),
            ],
        }
    }

    fn acceleration(&self, v: [f64; 2]) -> [f64; 2] {
        let speed_sq = v[0] * v[0] + v[1] * v[1];
        [-self.drag_factor * speed_sq, -self.gravity]
    }

    /// Closed-form range when there is no drag.
    pub fn ballistic_range(&self) -> f64 {
        let (s, c) = self.angle_rad.sin_cos();
        let (v, g) = (self.speed, self.gravity);
        v * c * (v * s + (v * v * s * s + 2.0 * g * self.height).sqrt()) / g
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")))
    }
}

/// Forward Euler until the height changes sign, then linear interpolation of `x₁`
/// between the two bracketing steps.
pub fn range_euler(params: &ProjectileParams, y: &[f64], dt: f64) -> Result<f64> {
    check_dt(dt)?;
    let r = params.realize(y)?;
    let mut s = r.initial();
    let mut t = 0.0;
    loop {
        let a = r.acceleration(s.v);
        let next = State {
            x: [s.x[0] + dt * s.v[0], s.x[1] + dt * s.v[1]],
            v: [s.v[0] + dt * a[0], s.v[1] + dt * a[1]],
        };
        if next.x[1] < 0.0 {
            let w = s.x[1] / (s.x[1] - next.x[1]);
            return Ok(s.x[0] + w * (next.x[0] - s.x[0]));
        }
        s = next;
        t += dt;
        if t > TIME_LIMIT {
            return Err(Error::NonTermination { limit: TIME_LIMIT });
        }
    }
}

/// Range with the default parameters and the forward Euler solver.
pub fn projectile_range(y: &[f64], dt: f64) -> Result<f64> {
    range_euler(&ProjectileParams::default(), y, dt)
}

/// Independent reference: classical RK4, with the landing point located on the cubic
/// Hermite interpolant of the last step (positions and velocities at both ends).
pub fn range_rk4(params: &ProjectileParams, y: &[f64], dt: f64) -> Result<f64> {
    check_dt(dt)?;
    let r = params.realize(y)?;
    let deriv = |s: &State| State {
        x: s.v,
        v: r.acceleration(s.v),
    };
    let axpy = |s: &State, h: f64, k: &State| State {
        x: [s.x[0] + h * k.x[0], s.x[1] + h * k.x[1]],
        v: [s.v[0] + h * k.v[0], s.v[1] + h * k.v[1]],
    };
    let mut s = r.initial();
    let mut t = 0.0;
    loop {
        let k1 = deriv(&s);
        let k2 = deriv(&axpy(&s, dt / 2.0, &k1));
        let k3 = deriv(&axpy(&s, dt / 2.0, &k2));
        let k4 = deriv(&axpy(&s, dt, &k3));
        let mut next = s;
        for i in 0..2 {
            next.x[i] += dt / 6.0 * (k1.x[i] + 2.0 * k2.x[i] + 2.0 * k3.x[i] + k4.x[i]);
            next.v[i] += dt / 6.0 * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
        }
        if next.x[1] < 0.0 {
            let hermite = |i: usize, u: f64| {
                let (u2, u3) = (u * u, u * u * u);
                (2.0 * u3 - 3.0 * u2 + 1.0) * s.x[i]
                    + (u3 - 2.0 * u2 + u) * dt * s.v[i]
                    + (-2.0 * u3 + 3.0 * u2) * next.x[i]
                    + (u3 - u2) * dt * next.v[i]
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if hermite(1, mid) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(hermite(0, 0.5 * (lo + hi)));
        }
        s = next;
        t += dt;
        if t > TIME_LIMIT {
            return Err(Error::NonTermination { limit: TIME_LIMIT });
        }
    }
}
