//! Truncated Fourier-series features of a contour.
//!
//! Each coordinate channel of the contour is fitted by least squares against
//! `{1, cos(2 pi k t), sin(2 pi k t)}` for `k = 1..H`, with the curve
//! parameter `t_i = i / alpha` on `[0, 1)`. Simulator contours are sampled at
//! uniform arc length, so this is the normalised arc-length parameter.
//!
//! The feature vector is laid out as
//! `[x: DC, cos_1, sin_1, ..., cos_H, sin_H, y: DC, cos_1, sin_1, ...]`,
//! giving `m = 2 (2H + 1)` entries.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cable::Contour;
use crate::error::{Error, Result};

/// Feature dimension for `harmonics` harmonics.
pub const fn feature_dim(harmonics: usize) -> usize {
    2 * (2 * harmonics + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierFeature {
    pub harmonics: usize,
    #[serde(with = "crate::serde_vec")]
    pub coeffs: DVector<f64>,
}

impl FourierFeature {
    pub fn new(harmonics: usize, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != feature_dim(harmonics) {
            return Err(Error::Dimension(format!(
                "{} harmonics need {} coefficients, got {}",
                harmonics,
                feature_dim(harmonics),
                coeffs.len()
            )));
        }
        Ok(Self { harmonics, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }
}

fn basis(harmonics: usize, t: f64) -> impl Iterator<Item = f64> {
    std::iter::once(1.0).chain((1..=harmonics).flat_map(move |k| {
        let a = TAU * k as f64 * t;
        [a.cos(), a.sin()]
    }))
}

fn design_matrix(harmonics: usize, samples: usize) -> DMatrix<f64> {
    let cols = 2 * harmonics + 1;
    let mut b = DMatrix::zeros(samples, cols);
    for i in 0..samples {
        let t = i as f64 / samples as f64;
        for (c, v) in basis(harmonics, t).enumerate() {
            b[(i, c)] = v;
        }
    }
    b
}

/// Least-squares Fourier coefficients of a contour.
pub fn fourier_coeffs(contour: &Contour, harmonics: usize) -> Result<FourierFeature> {
    let alpha = contour.len();
    let cols = 2 * harmonics + 1;
    if alpha < cols {
        return Err(Error::InsufficientSamples {
            required: cols,
            got: alpha,
        });
    }
    let b = design_matrix(harmonics, alpha);
    let qr = b.qr();
    let mut coeffs = DVector::zeros(2 * cols);
    for channel in 0..2 {
        let data = DVector::from_iterator(alpha, contour.points.iter().map(|p| p[channel]));
        let qtb = qr.q().transpose() * data;
        let sol = qr
            .r()
            .solve_upper_triangular(&qtb)
            .ok_or(Error::InsufficientSamples {
                required: cols,
                got: alpha,
            })?;
        coeffs.rows_mut(channel * cols, cols).copy_from(&sol);
    }
    FourierFeature::new(harmonics, coeffs)
}

/// Evaluates the truncated series at `alpha` uniform parameter values.
pub fn reconstruct(feature: &FourierFeature, alpha: usize) -> Result<Contour> {
    if alpha < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two points, got {alpha}"
        )));
    }
    let cols = 2 * feature.harmonics + 1;
    let points = (0..alpha)
        .map(|i| {
            let t = i as f64 / alpha as f64;
            let mut p = [0.0; 2];
            for (c, v) in basis(feature.harmonics, t).enumerate() {
                p[0] += feature.coeffs[c] * v;
                p[1] += feature.coeffs[cols + c] * v;
            }
            p
        })
        .collect();
    Ok(Contour::new(points))
}

/// Root-mean-square point distance between two equally sampled contours.
pub fn rms_distance(a: &Contour, b: &Contour) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension(format!(
            "contours have {} and {} points",
            a.len(),
            b.len()
        )));
    }
    let sum: f64 = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}

fn check_same_len(a: &DVector<f64>, b: &DVector<f64>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "vectors have {} and {} entries",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Regulation error `E = |y - y*|^2`.
pub fn feature_error(y: &DVector<f64>, y_star: &DVector<f64>) -> Result<f64> {
    check_same_len(y, y_star)?;
    Ok((y - y_star).norm_squared())
}

/// Local model error `G = |delta - A_hat u|^2`.
pub fn model_error(delta: &DVector<f64>, a_hat: &DMatrix<f64>, u: &DVector<f64>) -> Result<f64> {
    if a_hat.nrows() != delta.len() || a_hat.ncols() != u.len() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, delta has {}, u has {}",
            a_hat.nrows(),
            a_hat.ncols(),
            delta.len(),
            u.len()
        )));
    }
    Ok((delta - a_hat * u).norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trig_contour(f: &FourierFeature, alpha: usize) -> Contour {
        // independent evaluation of the series
        let cols = 2 * f.harmonics + 1;
        let pts = (0..alpha)
            .map(|i| {
                let t = i as f64 / alpha as f64;
                let mut p = [f.coeffs[0], f.coeffs[cols]];
                for k in 1..=f.harmonics {
                    let (c, s) = ((TAU * k as f64 * t).cos(), (TAU * k as f64 * t).sin());
                    p[0] += f.coeffs[2 * k - 1] * c + f.coeffs[2 * k] * s;
                    p[1] += f.coeffs[cols + 2 * k - 1] * c + f.coeffs[cols + 2 * k] * s;
                }
                p
            })
            .collect();
        Contour::new(pts)
    }

    #[test]
    fn dimension_law() {
        assert_eq!(feature_dim(4), 18);
        assert_eq!(feature_dim(2), 10);
        assert!(feature_dim(4) * 2 < 40);
    }

    #[test]
    fn unit_circle_has_single_harmonic() {
        let alpha = 100;
        let pts = (0..alpha)
            .map(|i| {
                let t = i as f64 / alpha as f64;
                [(TAU * t).cos(), (TAU * t).sin()]
            })
            .collect();
        let f = fourier_coeffs(&Contour::new(pts), 4).unwrap();
        let mut expected = DVector::zeros(18);
        expected[1] = 1.0; // x: cos_1
        expected[9 + 2] = 1.0; // y: sin_1
        assert!((f.coeffs - expected).amax() < 1e-12);
    }

    #[test]
    fn constant_contour_has_only_dc() {
        let c = Contour::new(vec![[0.3, -0.7]; 20]);
        let f = fourier_coeffs(&c, 4).unwrap();
        for (i, &v) in f.coeffs.iter().enumerate() {
            match i {
                0 => assert_relative_eq!(v, 0.3, max_relative = 1e-12),
                9 => assert_relative_eq!(v, -0.7, max_relative = 1e-12),
                _ => assert!(v.abs() < 1e-12),
            }
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        let c = Contour::new(vec![[0.0, 0.0]; 8]);
        assert_eq!(
            fourier_coeffs(&c, 4),
            Err(Error::InsufficientSamples {
                required: 9,
                got: 8
            })
        );
    }

    #[test]
    fn random_trig_polynomials_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for h in 1..=6 {
            let f = FourierFeature::new(
                h,
                DVector::from_fn(feature_dim(h), |_, _| rng.gen_range(-1.0..1.0)),
            )
            .unwrap();
            let c = trig_contour(&f, 100);
            let fit = fourier_coeffs(&c, h).unwrap();
            assert!((fit.coeffs - &f.coeffs).amax() < 1e-8);
            let back = reconstruct(&f, 100).unwrap();
            assert!(rms_distance(&back, &c).unwrap() < 1e-12);
        }
    }

    #[test]
    fn zero_features_reconstruct_origin() {
        let f = FourierFeature::new(3, DVector::zeros(14)).unwrap();
        let c = reconstruct(&f, 7).unwrap();
        assert!(c.points.iter().all(|p| p == &[0.0, 0.0]));
        assert!(reconstruct(&f, 1).is_err());
    }

    #[test]
    fn errors_examples() {
        let y = DVector::from_row_slice(&[3.0, 4.0]);
        assert_eq!(feature_error(&y, &y).unwrap(), 0.0);
        assert_eq!(feature_error(&y, &DVector::zeros(2)).unwrap(), 25.0);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let u = DVector::from_row_slice(&[1.0, -1.0]);
        assert_eq!(model_error(&(&a * &u), &a, &u).unwrap(), 0.0);
        assert!(model_error(&y, &a, &DVector::zeros(3)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn contour(len: usize) -> impl Strategy<Value = Contour> {
            prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
                .prop_map(|v| Contour::new(v.into_iter().map(|(a, b)| [a, b]).collect()))
        }

        proptest! {
            #[test]
            fn fit_is_linear(a in contour(30), b in contour(30), s in -3.0..3.0f64) {
                let sum = Contour::new(a.points.iter().zip(&b.points)
                    .map(|(p, q)| [p[0] + s * q[0], p[1] + s * q[1]]).collect());
                let fa = fourier_coeffs(&a, 4).unwrap().coeffs;
                let fb = fourier_coeffs(&b, 4).unwrap().coeffs;
                let fs = fourier_coeffs(&sum, 4).unwrap().coeffs;
                prop_assert!((fs - (fa + fb * s)).amax() < 1e-10);
            }

            #[test]
            fn projection_is_idempotent(a in contour(40), h in 1usize..6) {
                let f = fourier_coeffs(&a, h).unwrap();
                let again = fourier_coeffs(&reconstruct(&f, 40).unwrap(), h).unwrap();
                prop_assert!((again.coeffs - f.coeffs).amax() < 1e-10);
            }
        }
    }
}
