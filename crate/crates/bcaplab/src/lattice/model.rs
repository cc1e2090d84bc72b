//! g and G on demand: spectral values inside the kernel range, power laws outside.

use super::{c_g_constant, LaplaceKernel, StepLaw, ThetaNorm};
use crate::error::Result;
use crate::point::{self, Point};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct GreenModel {
    d: usize,
    norm: ThetaNorm,
    c_g: f64,
    c_big_g: f64,
    kernel: Option<LaplaceKernel>,
}

impl GreenModel {
    /// Spectral values for |x_i| ≤ `range` when the law is axis-supported.
    pub fn new(law: &StepLaw, range: usize) -> Result<GreenModel> {
        let d = law.dim();
        let c_g = c_g_constant(law)?;
        let df = d as f64;
        // ∫ |x−y|^{2−d} |y|^{2−d} dy = π^{d/2} Γ((d−4)/2) / Γ((d−2)/2)² · |x|^{4−d}
        let c_big_g = if d > 4 {
            c_g * c_g * law.det_cov().sqrt() * PI.powf(df / 2.0) * gamma((df - 4.0) / 2.0)
                / gamma((df - 2.0) / 2.0).powi(2)
        } else {
            f64::NAN
        };
        let kernel = if law.is_axis_supported() && d >= 5 { Some(LaplaceKernel::new(law, range)?) } else { None };
        Ok(GreenModel { d, norm: law.theta_norm(), c_g, c_big_g, kernel })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn c_g(&self) -> f64 {
        self.c_g
    }

    pub fn norm(&self) -> &ThetaNorm {
        &self.norm
    }

    fn in_range(&self, x: &Point) -> Option<&LaplaceKernel> {
        self.kernel
            .as_ref()
            .filter(|k| point::sup_norm(x) as usize <= k.n_max())
    }

    pub fn g(&self, x: &Point) -> f64 {
        match self.in_range(x) {
            Some(k) => k.g(x).unwrap(),
            None => self.g_asymptotic(x),
        }
    }

    pub fn big_g(&self, x: &Point) -> f64 {
        match self.in_range(x) {
            Some(k) => k.big_g(x).unwrap(),
            None => self.big_g_asymptotic(x),
        }
    }

    pub fn g_asymptotic(&self, x: &Point) -> f64 {
        self.c_g * self.norm.norm(x).max(0.5).powf(2.0 - self.d as f64)
    }

    pub fn big_g_asymptotic(&self, x: &Point) -> f64 {
        self.c_big_g * self.norm.norm(x).max(0.5).powf(4.0 - self.d as f64)
    }
}
