//! The 24 noise-free BBOB-style functions with seeded instance transforms.
//!
//! An instance is a shift vector drawn uniformly from `[-4, 4]^D` plus two
//! random orthogonal matrices, all derived from `(name, instance, dim)`. Every
//! function attains `f = 0` at its optimum.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::transforms::{f_pen, lambda_diag, ratio, scale, t_asy, t_osz, t_osz1};
use super::ProblemError;
use crate::linalg::{random_orthogonal, Matrix};
use crate::scalar::Scalar;
use crate::seed::seed_from_parts;

pub const BBOB_NAMES: [&str; 24] = [
    "Sphere",
    "Ellipsoidal",
    "Rastrigin",
    "Buche_Rastrigin",
    "Linear_Slope",
    "Attractive_Sector",
    "Step_Ellipsoidal",
    "Rosenbrock_original",
    "Rosenbrock_rotated",
    "Ellipsoidal_high_cond",
    "Discus",
    "Bent_Cigar",
    "Sharp_Ridge",
    "Different_Powers",
    "Rastrigin_F15",
    "Weierstrass",
    "Schaffers",
    "Schaffers_high_cond",
    "Composite_Grie_rosen",
    "Schwefel",
    "Gallagher_101Peaks",
    "Gallagher_21Peaks",
    "Katsuura",
    "Lunacek_bi_Rastrigin",
];

/// 1-based function number for a name.
pub fn function_number(name: &str) -> Result<usize, ProblemError> {
    BBOB_NAMES
        .iter()
        .position(|&n| n == name)
        .map(|i| i + 1)
        .ok_or_else(|| ProblemError::UnknownFunction(name.to_string()))
}

const SCHWEFEL_OPT: f64 = 4.209_687_462_275_036;
const SCHWEFEL_CONST: f64 = 4.189_828_872_724_339;
const LUNACEK_MU0: f64 = 2.5;

#[derive(Debug, Clone)]
struct Peaks<T> {
    weights: Vec<T>,
    /// Per-peak diagonal of the scaled conditioning matrix.
    conditioning: Vec<Vec<T>>,
    /// Rotated peak locations `R y_i`.
    rotated: Vec<Vec<T>>,
    locations: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
pub struct BbobFunction<T> {
    number: usize,
    instance: u32,
    dim: usize,
    shift: Vec<T>,
    r: Matrix<T>,
    q: Matrix<T>,
    peaks: Option<Peaks<T>>,
}

impl<T: Scalar> BbobFunction<T> {
    pub fn new(name: &str, instance: u32, dim: usize) -> Result<Self, ProblemError> {
        Self::by_number(function_number(name)?, instance, dim)
    }

    pub fn by_number(number: usize, instance: u32, dim: usize) -> Result<Self, ProblemError> {
        if !(1..=24).contains(&number) {
            return Err(ProblemError::UnknownFunction(format!("F{number}")));
        }
        if dim == 0 {
            return Err(ProblemError::InvalidParams("dimension must be positive".into()));
        }
        let name = BBOB_NAMES[number - 1];
        let seed = seed_from_parts(&[name, &instance.to_string(), &dim.to_string()]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<T> = (0..dim).map(|_| T::of(rng.random_range(-4.0..4.0))).collect();
        let r = random_orthogonal(dim, &mut rng);
        let q = random_orthogonal(dim, &mut rng);
        let mut f = Self {
            number,
            instance,
            dim,
            shift,
            r,
            q,
            peaks: None,
        };
        f.peaks = f.build_peaks(&mut rng);
        Ok(f)
    }

    /// Replaces the shift vector; peak 1 of the Gallagher functions moves with it.
    pub fn with_shift(mut self, shift: Vec<T>) -> Result<Self, ProblemError> {
        if shift.len() != self.dim {
            return Err(ProblemError::DimMismatch {
                expected: self.dim,
                actual: shift.len(),
            });
        }
        if let Some(p) = self.peaks.as_mut() {
            p.rotated[0] = self.r.matvec(&shift);
            p.locations[0] = shift.clone();
        }
        self.shift = shift;
        Ok(self)
    }

    fn build_peaks(&self, rng: &mut ChaCha8Rng) -> Option<Peaks<T>> {
        let (n, alpha1, bound) = match self.number {
            21 => (101usize, 1000.0f64, 4.9),
            22 => (21, 1.0e6, 4.9),
            _ => return None,
        };
        let d = self.dim;
        let mut locations = vec![self.shift.clone()];
        for _ in 1..n {
            locations.push((0..d).map(|_| T::of(rng.random_range(-bound..bound))).collect());
        }
        let mut alphas = vec![alpha1];
        let mut rest: Vec<f64> = (0..n - 1)
            .map(|j| 1000f64.powf(2.0 * j as f64 / (n - 2) as f64))
            .collect();
        rest.shuffle(rng);
        alphas.extend(rest);
        let mut weights = vec![T::of(10.0)];
        weights.extend((2..=n).map(|i| T::of(1.1 + 8.0 * (i - 2) as f64 / (n - 2) as f64)));
        let conditioning = alphas
            .iter()
            .map(|&a| {
                let mut diag: Vec<T> = lambda_diag(T::of(a), d)
                    .into_iter()
                    .map(|v| v / T::of(a.powf(0.25)))
                    .collect();
                diag.shuffle(rng);
                // Λ^α enters squared in the quadratic form.
                diag.into_iter().map(|v| v * v).collect()
            })
            .collect();
        let rotated = locations.iter().map(|y| self.r.matvec(y)).collect();
        Some(Peaks {
            weights,
            conditioning,
            rotated,
            locations,
        })
    }

    pub fn number(&self) -> usize {
        self.number
    }

    pub fn name(&self) -> &'static str {
        BBOB_NAMES[self.number - 1]
    }

    pub fn function_id(&self) -> String {
        format!("F{}", self.number)
    }

    pub fn instance(&self) -> u32 {
        self.instance
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift(&self) -> &[T] {
        &self.shift
    }

    /// Peak locations of the Gallagher functions, global peak first.
    pub fn peak_locations(&self) -> Option<&[Vec<T>]> {
        self.peaks.as_ref().map(|p| p.locations.as_slice())
    }

    fn signs(&self) -> Vec<T> {
        self.shift
            .iter()
            .map(|&o| if o < T::zero() { -T::one() } else { T::one() })
            .collect()
    }

    /// Location of the global optimum. Equal to the shift except for the
    /// slope, Schwefel and Lunacek functions, whose optimum sits on a sign
    /// pattern taken from the shift.
    pub fn optimum(&self) -> Vec<T> {
        let s = self.signs();
        match self.number {
            5 => s.iter().map(|&v| v * T::of(5.0)).collect(),
            20 => s.iter().map(|&v| v * T::of(SCHWEFEL_OPT / 2.0)).collect(),
            24 => s.iter().map(|&v| v * T::of(LUNACEK_MU0 / 2.0)).collect(),
            _ => self.shift.clone(),
        }
    }

    pub fn evaluate(&self, x: &[T]) -> Result<T, ProblemError> {
        if x.len() != self.dim {
            return Err(ProblemError::DimMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(self.eval(x))
    }

    fn centered(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(&self.shift).map(|(&a, &b)| a - b).collect()
    }

    fn eval(&self, x: &[T]) -> T {
        let d = self.dim;
        let dt = T::of_usize(d);
        let c = |v: f64| T::of(v);
        let xc = self.centered(x);
        match self.number {
            1 => sum_sq(&xc),
            2 => ellipsoid(&t_osz(&xc)),
            3 => {
                let z = scale(&lambda_diag(c(10.0), d), &t_asy(&t_osz(&xc), c(0.2)));
                rastrigin(&z)
            }
            4 => {
                let mut z = t_osz(&xc);
                for (i, v) in z.iter_mut().enumerate() {
                    let s = c(10.0).powf(c(0.5) * ratio::<T>(i, d));
                    let s = if i % 2 == 0 && *v > T::zero() { s * c(10.0) } else { s };
                    *v *= s;
                }
                rastrigin(&z) + c(100.0) * f_pen(x)
            }
            5 => {
                let xopt = self.optimum();
                let mut f = T::zero();
                for i in 0..d {
                    let s = xopt[i].signum() * c(10.0).powf(ratio::<T>(i, d));
                    let z = if xopt[i] * x[i] < c(25.0) { x[i] } else { xopt[i] };
                    f += c(5.0) * s.abs() - s * z;
                }
                f
            }
            6 => {
                let z = self.q.matvec(&scale(&lambda_diag(c(10.0), d), &self.r.matvec(&xc)));
                let s: T = z
                    .iter()
                    .zip(&xc)
                    .map(|(&zi, &xi)| {
                        let w = if zi * xi > T::zero() { c(100.0) } else { T::one() };
                        (w * zi) * (w * zi)
                    })
                    .sum();
                t_osz1(s).powf(c(0.9))
            }
            7 => {
                let zh = scale(&lambda_diag(c(10.0), d), &self.r.matvec(&xc));
                let zt: Vec<T> = zh
                    .iter()
                    .map(|&v| {
                        if v.abs() > c(0.5) {
                            (c(0.5) + v).floor()
                        } else {
                            (c(0.5) + c(10.0) * v).floor() / c(10.0)
                        }
                    })
                    .collect();
                let z = self.q.matvec(&zt);
                let e: T = z
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| c(10.0).powf(c(2.0) * ratio::<T>(i, d)) * v * v)
                    .sum();
                c(0.1) * (zh[0].abs() / c(1e4)).max(e) + f_pen(x)
            }
            8 | 9 => {
                let base = if self.number == 8 { xc } else { self.r.matvec(&xc) };
                rosenbrock(&rosen_z(&base))
            }
            10 => ellipsoid(&t_osz(&self.r.matvec(&xc))),
            11 => {
                let z = t_osz(&self.r.matvec(&xc));
                c(1e6) * z[0] * z[0] + sum_sq(&z[1..])
            }
            12 => {
                let z = self.r.matvec(&t_asy(&self.r.matvec(&xc), c(0.5)));
                z[0] * z[0] + c(1e6) * sum_sq(&z[1..])
            }
            13 => {
                let z = self.q.matvec(&scale(&lambda_diag(c(10.0), d), &self.r.matvec(&xc)));
                z[0] * z[0] + c(100.0) * sum_sq(&z[1..]).sqrt()
            }
            14 => {
                let z = self.r.matvec(&xc);
                z.iter()
                    .enumerate()
                    .map(|(i, &v)| v.abs().powf(c(2.0) + c(4.0) * ratio::<T>(i, d)))
                    .sum::<T>()
                    .sqrt()
            }
            15 => {
                let inner = t_asy(&t_osz(&self.r.matvec(&xc)), c(0.2));
                let z = self.r.matvec(&scale(&lambda_diag(c(10.0), d), &self.q.matvec(&inner)));
                rastrigin(&z)
            }
            16 => {
                let z = self.r.matvec(&scale(
                    &lambda_diag(c(0.01), d),
                    &self.q.matvec(&t_osz(&self.r.matvec(&xc))),
                ));
                let f0 = weierstrass_term::<T>(T::zero());
                let m = z.iter().map(|&v| weierstrass_term(v)).sum::<T>() / dt;
                let e = m - f0;
                c(10.0) * e * e * e + c(10.0) / dt * f_pen(x)
            }
            17 | 18 => {
                let cond = if self.number == 17 { 10.0 } else { 1000.0 };
                let z = scale(
                    &lambda_diag(c(cond), d),
                    &self.q.matvec(&t_asy(&self.r.matvec(&xc), c(0.5))),
                );
                if d < 2 {
                    return c(10.0) * f_pen(x);
                }
                let mut acc = T::zero();
                for i in 0..d - 1 {
                    let s = (z[i] * z[i] + z[i + 1] * z[i + 1]).sqrt();
                    let sq = s.sqrt();
                    let sn = (c(50.0) * s.powf(c(0.2))).sin();
                    acc += sq + sq * sn * sn;
                }
                let m = acc / T::of_usize(d - 1);
                m * m + c(10.0) * f_pen(x)
            }
            19 => {
                let z = rosen_z(&self.r.matvec(&xc));
                if d < 2 {
                    return T::zero();
                }
                let mut acc = T::zero();
                for i in 0..d - 1 {
                    let a = z[i] * z[i] - z[i + 1];
                    let b = z[i] - T::one();
                    let s = c(100.0) * a * a + b * b;
                    acc += s / c(4000.0) - s.cos();
                }
                c(10.0) * acc / T::of_usize(d - 1) + c(10.0)
            }
            20 => {
                let signs = self.signs();
                let two_opt = c(SCHWEFEL_OPT);
                let xh: Vec<T> = x.iter().zip(&signs).map(|(&v, &s)| c(2.0) * s * v).collect();
                let mut zh = xh.clone();
                for i in 1..d {
                    zh[i] = xh[i] + c(0.25) * (xh[i - 1] - two_opt);
                }
                let lam = lambda_diag(c(10.0), d);
                let z: Vec<T> = (0..d)
                    .map(|i| c(100.0) * (lam[i] * (zh[i] - two_opt) + two_opt))
                    .collect();
                let s: T = z.iter().map(|&v| v * v.abs().sqrt().sin()).sum();
                let zs: Vec<T> = z.iter().map(|&v| v / c(100.0)).collect();
                -s / (c(100.0) * dt) + c(SCHWEFEL_CONST) + c(100.0) * f_pen(&zs)
            }
            21 | 22 => {
                let p = self.peaks.as_ref().expect("gallagher peaks are built");
                let rx = self.r.matvec(x);
                let mut best = T::zero();
                for ((w, cond), ry) in p.weights.iter().zip(&p.conditioning).zip(&p.rotated) {
                    let q: T = rx
                        .iter()
                        .zip(ry)
                        .zip(cond)
                        .map(|((&a, &b), &cv)| cv * (a - b) * (a - b))
                        .sum();
                    best = best.max(*w * (-q / (c(2.0) * dt)).exp());
                }
                let t = t_osz1(c(10.0) - best);
                t * t + f_pen(x)
            }
            23 => {
                let z = self.q.matvec(&scale(&lambda_diag(c(100.0), d), &self.r.matvec(&xc)));
                let expo = c(10.0) / dt.powf(c(1.2));
                let mut prod = T::one();
                for (i, &v) in z.iter().enumerate() {
                    let mut s = T::zero();
                    let mut p2 = T::one();
                    for _ in 1..=32 {
                        p2 *= c(2.0);
                        let t = p2 * v;
                        s += (t - t.round()).abs() / p2;
                    }
                    prod *= (T::one() + T::of_usize(i + 1) * s).powf(expo);
                }
                let k = c(10.0) / (dt * dt);
                k * prod - k + f_pen(x)
            }
            24 => {
                let signs = self.signs();
                let mu0 = c(LUNACEK_MU0);
                let s = T::one() - T::one() / (c(2.0) * (dt + c(20.0)).sqrt() - c(8.2));
                let mu1 = -((mu0 * mu0 - T::one()) / s).sqrt();
                let xh: Vec<T> = x.iter().zip(&signs).map(|(&v, &sg)| c(2.0) * sg * v).collect();
                let a: T = xh.iter().map(|&v| (v - mu0) * (v - mu0)).sum();
                let b: T = dt + s * xh.iter().map(|&v| (v - mu1) * (v - mu1)).sum::<T>();
                let shifted: Vec<T> = xh.iter().map(|&v| v - mu0).collect();
                let z = self
                    .q
                    .matvec(&scale(&lambda_diag(c(100.0), d), &self.r.matvec(&shifted)));
                let cos: T = z.iter().map(|&v| (c(2.0 * PI) * v).cos()).sum();
                a.min(b) + c(10.0) * (dt - cos) + c(1e4) * f_pen(x)
            }
            _ => unreachable!("number validated at construction"),
        }
    }
}

fn sum_sq<T: Scalar>(z: &[T]) -> T {
    z.iter().map(|&v| v * v).sum()
}

fn ellipsoid<T: Scalar>(z: &[T]) -> T {
    let d = z.len();
    z.iter()
        .enumerate()
        .map(|(i, &v)| T::of(10.0).powf(T::of(6.0) * ratio::<T>(i, d)) * v * v)
        .sum()
}

fn rastrigin<T: Scalar>(z: &[T]) -> T {
    let cos: T = z.iter().map(|&v| (T::of(2.0 * PI) * v).cos()).sum();
    T::of(10.0) * (T::of_usize(z.len()) - cos) + sum_sq(z)
}

/// Scaled, re-centred coordinates placing the valley minimum at `z = 1`.
fn rosen_z<T: Scalar>(y: &[T]) -> Vec<T> {
    let c = T::one().max(T::of_usize(y.len()).sqrt() / T::of(8.0));
    y.iter().map(|&v| c * v + T::one()).collect()
}

fn rosenbrock<T: Scalar>(z: &[T]) -> T {
    z.windows(2)
        .map(|w| {
            let a = w[0] * w[0] - w[1];
            let b = w[0] - T::one();
            T::of(100.0) * a * a + b * b
        })
        .sum()
}

fn weierstrass_term<T: Scalar>(v: T) -> T {
    let mut s = T::zero();
    let mut half = T::one();
    let mut three = T::one();
    for _ in 0..12 {
        s += half * (T::of(2.0 * PI) * three * (v + T::of(0.5))).cos();
        half /= T::of(2.0);
        three *= T::of(3.0);
    }
    s
}
