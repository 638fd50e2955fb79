//! Dirichlet and Fejer kernels in closed form.

use std::f64::consts::PI;

use serde::Serialize;

use crate::circle::C64;

/// Below this `|u|` the kernels switch to their series at the removable
/// singularity.
pub const SINGULAR_THRESHOLD: f64 = 1e-6;

/// `K_n(u) = (sin((n+1)u/2) / sin(u/2))^2 / (2(n+1))`.
pub fn fejer_kernel(n: u64, u: f64) -> f64 {
    let m = (n + 1) as f64;
    if u.abs() < SINGULAR_THRESHOLD {
        return m / 2.0 * (1.0 - (m * m - 1.0) * u * u / 12.0);
    }
    let ratio = (0.5 * u * m).sin() / (0.5 * u).sin();
    ratio * ratio / (2.0 * m)
}

/// `D_l(z) = (1/2) sum_{|k| <= l} e^{ikz}`.
pub fn dirichlet_kernel(l: u64, z: f64) -> C64 {
    if z == 0.0 {
        return C64::new(l as f64 + 0.5, 0.0);
    }
    if z.abs() < SINGULAR_THRESHOLD {
        if l > 4096 {
            // sin((l + 1/2) z) / (2 sin(z/2)); sin(z/2) keeps full relative
            // precision here, only the complex closed form cancels badly.
            return C64::new(((l as f64 + 0.5) * z).sin() / (2.0 * (0.5 * z).sin()), 0.0);
        }
        let mut acc = 0.5;
        for k in 1..=l {
            acc += (k as f64 * z).cos();
        }
        return C64::new(acc, 0.0);
    }
    let lf = l as f64;
    let num = C64::from_polar(1.0, (lf + 1.0) * z) - C64::from_polar(1.0, -lf * z);
    num * C64::new(-0.25, -0.25 / (0.5 * z).tan())
}

/// `1 / (e^{iz} - 1)` through its cotangent form.
pub fn inverse_phase_gap(z: f64) -> C64 {
    C64::new(-0.5, -0.5 / (0.5 * z).tan())
}

#[derive(Clone, Debug, Serialize)]
pub struct FejerBoundReport {
    pub order: u64,
    pub samples: usize,
    /// Smallest sampled kernel value.
    pub min_value: f64,
    /// Largest `K_n(u) * 2(n+1) u^2 / pi^2` over sampled `u != 0`.
    pub max_decay_ratio: f64,
}

impl FejerBoundReport {
    pub fn passes(&self) -> bool {
        self.min_value >= -1e-12 && self.max_decay_ratio <= 1.0 + 1e-9
    }
}

/// Positivity and the `pi^2 / (2(n+1)u^2)` decay bound on a midpoint grid.
pub fn check_fejer_bounds(n: u64, samples: usize) -> FejerBoundReport {
    let samples = samples.max(1);
    let step = 2.0 * PI / samples as f64;
    let mut min_value = f64::INFINITY;
    let mut max_decay_ratio = 0.0f64;
    let m = (n + 1) as f64;
    for p in 0..samples {
        let u = -PI + (p as f64 + 0.5) * step;
        if u == 0.0 {
            continue;
        }
        let k = fejer_kernel(n, u);
        min_value = min_value.min(k);
        max_decay_ratio = max_decay_ratio.max(k * 2.0 * m * u * u / (PI * PI));
    }
    FejerBoundReport {
        order: n,
        samples,
        min_value,
        max_decay_ratio,
    }
}
