//! Planar kinematic arm: minimize the distance from the arm tip to a target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::ProblemError;
use crate::scalar::Scalar;

pub const MANIPULATOR_DATASET: &str = "Planar_Kinematic_Arm_Control";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManipulatorParams {
    /// Total arm length, split evenly over the links.
    pub length: f64,
    /// Sum of the per-joint maximum angles (radians).
    pub phi_max: f64,
    pub joints: usize,
    pub target: (f64, f64),
}

impl ManipulatorParams {
    pub fn new(length: f64, phi_max: f64, joints: usize) -> Result<Self, ProblemError> {
        if !(length > 0.0) || !(phi_max > 0.0) || joints == 0 {
            return Err(ProblemError::InvalidParams(format!(
                "manipulator needs L > 0, phi_max > 0, d >= 1 (got {length}, {phi_max}, {joints})"
            )));
        }
        Ok(Self {
            length,
            phi_max,
            joints,
            target: (0.5, 0.5),
        })
    }
}

/// Tip position for decision vector `v` (components clamped to [0, 1]).
pub fn tip_position<T: Scalar>(p: &ManipulatorParams, v: &[T]) -> Result<(T, T), ProblemError> {
    if v.len() != p.joints {
        return Err(ProblemError::DimMismatch {
            expected: p.joints,
            actual: v.len(),
        });
    }
    let per_joint = T::of(p.phi_max) / T::of_usize(p.joints);
    let link = T::of(p.length) / T::of_usize(p.joints);
    let mut heading = T::zero();
    let (mut x, mut y) = (T::zero(), T::zero());
    for &vj in v {
        heading += vj.max(T::zero()).min(T::one()) * per_joint;
        x += link * heading.cos();
        y += link * heading.sin();
    }
    Ok((x, y))
}

pub fn manipulator_eval<T: Scalar>(p: &ManipulatorParams, v: &[T]) -> Result<T, ProblemError> {
    let (x, y) = tip_position(p, v)?;
    Ok((x - T::of(p.target.0)).hypot(y - T::of(p.target.1)))
}

/// Parameter rectangle for generated tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRect {
    pub length: (f64, f64),
    pub phi_max: (f64, f64),
}

impl Default for ParamRect {
    fn default() -> Self {
        Self {
            length: (0.8, 1.2),
            phi_max: (PI / 2.0, 2.0 * PI),
        }
    }
}

impl ParamRect {
    pub fn to_params(&self, u: [f64; 2]) -> (f64, f64) {
        (
            self.length.0 + u[0] * (self.length.1 - self.length.0),
            self.phi_max.0 + u[1] * (self.phi_max.1 - self.phi_max.0),
        )
    }
}

const CVT_GRID: usize = 100;
const CVT_MAX_ITERS: usize = 200;

/// Lloyd-iterated centroidal Voronoi tessellation of the unit square with
/// `n` generators, using a regular grid of cell centres as the density
/// sample. Generators start from seeded uniform draws.
pub fn cvt_unit_square(n: usize, seed: u64) -> Vec<[f64; 2]> {
    assert!(n >= 1, "need at least one generator");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gens: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let step = 1.0 / CVT_GRID as f64;
    let samples: Vec<[f64; 2]> = (0..CVT_GRID * CVT_GRID)
        .map(|k| {
            [
                ((k / CVT_GRID) as f64 + 0.5) * step,
                ((k % CVT_GRID) as f64 + 0.5) * step,
            ]
        })
        .collect();
    for _ in 0..CVT_MAX_ITERS {
        let mut sums = vec![[0.0f64; 2]; n];
        let mut counts = vec![0usize; n];
        for s in &samples {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (i, g) in gens.iter().enumerate() {
                let d = (s[0] - g[0]).powi(2) + (s[1] - g[1]).powi(2);
                if d < bd {
                    bd = d;
                    best = i;
                }
            }
            sums[best][0] += s[0];
            sums[best][1] += s[1];
            counts[best] += 1;
        }
        let mut moved = 0.0f64;
        for i in 0..n {
            if counts[i] == 0 {
                continue;
            }
            let c = [sums[i][0] / counts[i] as f64, sums[i][1] / counts[i] as f64];
            moved = moved.max((c[0] - gens[i][0]).abs().max((c[1] - gens[i][1]).abs()));
            gens[i] = c;
        }
        if moved < 1e-12 {
            break;
        }
    }
    gens
}

/// `(L, phi_max)` pairs for `nt` tasks.
pub fn manipulator_params(nt: usize, seed: u64, rect: &ParamRect) -> Vec<(f64, f64)> {
    cvt_unit_square(nt, seed)
        .into_iter()
        .map(|u| rect.to_params(u))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_angles_point_along_x() {
        let p = ManipulatorParams::new(1.0, PI, 20).unwrap();
        let j = manipulator_eval(&p, &[0.0f64; 20]).unwrap();
        assert!((j - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(manipulator_eval(&p, &[0.0f64; 3]).is_err());
        assert!(ManipulatorParams::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn single_generator_is_centroid() {
        let g = cvt_unit_square(1, 4);
        assert!((g[0][0] - 0.5).abs() < 1e-12 && (g[0][1] - 0.5).abs() < 1e-12);
        let (l, phi) = manipulator_params(1, 4, &ParamRect::default())[0];
        assert!((l - 1.0).abs() < 1e-12);
        assert!((phi - 1.25 * PI).abs() < 1e-12);
    }
}
