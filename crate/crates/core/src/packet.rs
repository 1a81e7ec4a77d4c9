//! Free Gaussian wave packets: closed-form evolution and grid superposition.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::Grid1D;

/// Parameters of one free Gaussian packet in reduced units.
///
/// At `t = 0` the modulus squared is normal with mean `x0` and standard
/// deviation `d`; `k0` is the central wave number. `weight` is the real
/// coefficient applied when packets are superposed, and is ignored by the
/// single-packet evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacketParams {
    pub k0: f64,
    pub x0: f64,
    pub d: f64,
    pub weight: f64,
}

impl GaussianPacketParams {
    pub fn new(k0: f64, x0: f64, d: f64, weight: f64) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidConfig(format!("packet width must be positive, got {d}")));
        }
        if !k0.is_finite() || !x0.is_finite() || !weight.is_finite() {
            return Err(Error::InvalidConfig("packet parameters must be finite".into()));
        }
        Ok(Self { k0, x0, d, weight })
    }
}

/// Closed-form free evolution of a unit-norm Gaussian packet:
///
/// ```text
/// Phi(t,x) = (d^2/2pi)^(1/4) * exp(-k0^2 d^2) / sqrt(d^2 + i t/2)
///            * exp[ (2 d^2 k0 + i (x - x0))^2 / (4 d^2 + 2 i t) ]
/// ```
///
/// The packet centre moves at `k0` and the density spreads as
/// `d(t)^2 = d^2 + t^2/(4 d^2)`. `weight` plays no role here.
pub fn gaussian_packet(t: f64, x: f64, p: &GaussianPacketParams) -> Complex64 {
    let d2 = p.d * p.d;
    let prefactor = (d2 / (2.0 * PI)).powf(0.25) * (-p.k0 * p.k0 * d2).exp();
    let denom = Complex64::new(d2, 0.5 * t);
    let z = Complex64::new(2.0 * d2 * p.k0, x - p.x0);
    prefactor / denom.sqrt() * (z * z / (4.0 * denom)).exp()
}

/// Weighted sum of packets sampled on `grid` at time `t`, renormalized so the
/// discrete norm is exactly 1.
///
/// Renormalization on the grid is deliberate: overlapping packets make the
/// analytic weights only approximately normalizing, and every downstream
/// probability assumes a unit-norm state.
pub fn superpose(packets: &[GaussianPacketParams], grid: &Grid1D, t: f64) -> Result<WaveField> {
    if packets.is_empty() {
        return Err(Error::InvalidConfig("packet list is empty".into()));
    }
    let mut values = vec![Complex64::ZERO; grid.n_points()];
    for p in packets {
        for (k, v) in values.iter_mut().enumerate() {
            *v += p.weight * gaussian_packet(t, grid.position(k), p);
        }
    }
    let mut field = WaveField::new(grid.clone(), t, values)?;
    field.normalize()?;
    Ok(field)
}
