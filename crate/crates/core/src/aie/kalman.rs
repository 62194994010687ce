//! Constant-velocity Kalman filter over the box center.
//!
//! State `[cx, cy, vx, vy]`, unit time step, observation of `(cx, cy)`.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::error::{Error, Result};

pub const DEFAULT_PROCESS_NOISE: f64 = 0.01;
pub const DEFAULT_MEASUREMENT_NOISE: f64 = 1.0;
pub const INITIAL_POSITION_VARIANCE: f64 = 1.0;
pub const INITIAL_VELOCITY_VARIANCE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub s: Vector4<f64>,
    pub p: Matrix4<f64>,
}

fn transition() -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = 1.0;
    f[(1, 3)] = 1.0;
    f
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

impl KalmanState {
    /// Zero velocity with covariance `diag(1, 1, 10, 10)`.
    pub fn new(center: (f64, f64)) -> Self {
        Self {
            s: Vector4::new(center.0, center.1, 0.0, 0.0),
            p: Matrix4::from_diagonal(&Vector4::new(
                INITIAL_POSITION_VARIANCE,
                INITIAL_POSITION_VARIANCE,
                INITIAL_VELOCITY_VARIANCE,
                INITIAL_VELOCITY_VARIANCE,
            )),
        }
    }

    pub fn with_covariance(s: [f64; 4], p: Matrix4<f64>) -> Self {
        Self {
            s: Vector4::from(s),
            p,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.s[0], self.s[1])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.s[2], self.s[3])
    }
}

/// `s' = F·s`, `P' = F·P·Fᵀ + q·I`.
pub fn kalman_predict(state: &KalmanState, q: f64) -> KalmanState {
    let f = transition();
    KalmanState {
        s: f * state.s,
        p: f * state.p * f.transpose() + Matrix4::identity() * q,
    }
}

/// Standard linear update against a center measurement with `R = r·I`.
pub fn kalman_update(state: &KalmanState, z: (f64, f64), r: f64) -> Result<KalmanState> {
    let h = observation();
    let innovation_cov = h * state.p * h.transpose() + Matrix2::identity() * r;
    let inv = innovation_cov
        .try_inverse()
        .ok_or(Error::Singular("kalman innovation covariance"))?;
    let gain = state.p * h.transpose() * inv;
    let residual = Vector2::new(z.0, z.1) - h * state.s;
    let p = (Matrix4::identity() - gain * h) * state.p;
    Ok(KalmanState {
        s: state.s + gain * residual,
        // the product form drifts from symmetry by rounding only
        p: (p + p.transpose()) * 0.5,
    })
}
