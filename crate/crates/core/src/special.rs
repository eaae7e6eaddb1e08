//! Stable special functions, the sigmoid/normal-CDF bridge, and the
//! variance-shrunk mixture prediction, plus a slow quadrature reference for
//! the exact mixture probability.

use crate::error::{ModelError, Result};
use crate::model::Label;

/// pi / 8, the bridge scaling between logistic and probit score units.
pub const PI_OVER_8: f64 = std::f64::consts::PI / 8.0;

const INV_SQRT_2PI: f64 = 0.3989422804014326779;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Logistic function 1/(1+e^-z), stable for large |z|.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^v) without overflow.
#[inline]
pub fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

/// ln Sigma(z), stable in both tails.
#[inline]
pub fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF via the complementary error function; keeps full
/// relative accuracy deep into the lower tail.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// The probit approximation of the sigmoid: a 0-mean Gaussian CDF with
/// variance 8/pi, i.e. Phi(sqrt(pi/8) * w).
#[inline]
pub fn sigmoid_probit_bridge(w: f64) -> f64 {
    std_normal_cdf(PI_OVER_8.sqrt() * w)
}

/// Inverse Mills ratio phi(z)/Phi(z).
///
/// Direct division loses all accuracy once Phi underflows, so the lower tail
/// (z < -6) uses the Laplace continued fraction for the Mills ratio
/// R(t) = 1/(t + 1/(t + 2/(t + 3/(...)))), t = -z, evaluated bottom-up at a
/// depth where it is converged to machine precision for the whole tail.
pub fn hazard(z: f64) -> f64 {
    if z >= -6.0 {
        std_normal_pdf(z) / std_normal_cdf(z)
    } else {
        let t = -z;
        let mut v = 0.0;
        for k in (1..=40u32).rev() {
            v = f64::from(k) / (t + v);
        }
        t + v
    }
}

/// Which marginalized likelihood a prediction is computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkKind {
    /// Denominator sqrt(1 + (pi/8) sigma^2).
    Logistic,
    /// Denominator sqrt(1 + sigma^2); exact for the probit likelihood.
    Probit,
}

/// A predicted probability for an observed label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction(f64);

impl Prediction {
    /// Smallest probability used when taking logs in loss accounting.
    pub const CLAMP: f64 = 1e-12;

    #[inline]
    pub fn new(p: f64) -> Prediction {
        Prediction(p)
    }

    /// Raw probability, possibly outside [CLAMP, 1-CLAMP].
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// -ln p with p clamped into [1e-12, 1-1e-12]; finite for any input.
    #[inline]
    pub fn log_loss(self) -> f64 {
        -self.0.clamp(Self::CLAMP, 1.0 - Self::CLAMP).ln()
    }
}

/// Probability of `label` when the score is Gaussian with the given mean and
/// variance: the variance pulls the probability towards 0.5.
///
/// Evaluated once for the positive label so that the two label probabilities
/// sum to exactly 1.
pub fn shrunk_prediction(
    label: Label,
    mean: f64,
    variance: f64,
    kind: ShrinkKind,
) -> Result<Prediction> {
    if variance < 0.0 || !variance.is_finite() {
        return Err(ModelError::NegativeVariance(variance));
    }
    let p_pos = match kind {
        ShrinkKind::Logistic => sigmoid(mean / (1.0 + PI_OVER_8 * variance).sqrt()),
        ShrinkKind::Probit => std_normal_cdf(mean / (1.0 + variance).sqrt()),
    };
    Ok(Prediction(match label {
        Label::Pos => p_pos,
        Label::Neg => 1.0 - p_pos,
    }))
}

/// Numerical-integration reference for the exact mixture probability
/// `int likelihood(y(mu + sigma z)) phi(z) dz`.
///
/// Composite Simpson over z in [-10, 10] with 20001 points; truncation and
/// discretization error are both far below 1e-9. Slow by design; used by
/// verification paths, never by learners.
pub fn quadrature_mixture(label: Label, mean: f64, variance: f64, kind: ShrinkKind) -> f64 {
    assert!(variance >= 0.0, "quadrature_mixture needs sigma^2 >= 0");
    let y = label.sign();
    let sigma = variance.sqrt();
    let likelihood = |w: f64| -> f64 {
        match kind {
            ShrinkKind::Logistic => sigmoid(y * w),
            ShrinkKind::Probit => std_normal_cdf(y * w),
        }
    };
    const N: usize = 20_000; // even number of intervals
    const LO: f64 = -10.0;
    const HI: f64 = 10.0;
    let h = (HI - LO) / N as f64;
    let f = |z: f64| likelihood(mean + sigma * z) * std_normal_pdf(z);
    let mut acc = f(LO) + f(HI);
    for i in 1..N {
        let z = LO + h * i as f64;
        acc += f(z) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_relative_eq!(sigmoid(1.0), 0.73105857863000487925, epsilon = 1e-15);
        let tail = sigmoid(-40.0);
        assert!(tail > 0.0 && tail < 1e-17);
        assert!(sigmoid(800.0) == 1.0 || sigmoid(800.0) > 1.0 - 1e-15);
    }

    #[test]
    fn normal_pdf_cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_relative_eq!(std_normal_pdf(0.0), 0.39894228040143267794, epsilon = 1e-16);
        // frozen mpmath references
        assert_relative_eq!(std_normal_cdf(1.0), 0.84134474606854294859, epsilon = 1e-15);
        assert!((std_normal_cdf(-8.0) - 6.2209605742717841235e-16).abs() < 1e-15);
        assert!((std_normal_cdf(-5.5) - 1.8989562465887719384e-8).abs() < 1e-15);
    }

    #[test]
    fn bridge_symmetry_and_bound() {
        assert_eq!(sigmoid_probit_bridge(0.0), 0.5);
        for i in 0..200 {
            let w = -10.0 + 0.1 * i as f64;
            let b = sigmoid_probit_bridge(w);
            assert_relative_eq!(b + sigmoid_probit_bridge(-w), 1.0, epsilon = 1e-14);
            assert!((sigmoid(w) - b).abs() <= 0.02);
        }
    }

    #[test]
    fn hazard_values_and_tail() {
        // 2/sqrt(2 pi)
        assert_relative_eq!(hazard(0.0), 0.79788456080286535588, epsilon = 1e-15);
        assert!(hazard(8.0) < 1e-14);
        // frozen mpmath references across the continued-fraction crossover
        assert_relative_eq!(hazard(-6.0), 6.158482604544599, max_relative = 1e-13);
        assert_relative_eq!(hazard(-7.0), 7.137545613226503, max_relative = 1e-13);
        assert_relative_eq!(hazard(-8.0), 8.121368112236113, max_relative = 1e-10);
        assert_relative_eq!(hazard(-12.0), 12.08221417525428, max_relative = 1e-13);
        assert_relative_eq!(hazard(-37.0), 37.02698768612699, max_relative = 1e-13);
        // both evaluation routes agree at the crossover point
        let direct = std_normal_pdf(-6.0) / std_normal_cdf(-6.0);
        let mut v = 0.0;
        for k in (1..=40u32).rev() {
            v = f64::from(k) / (6.0 + v);
        }
        assert_relative_eq!(direct, 6.0 + v, max_relative = 1e-13);
    }

    #[test]
    fn hazard_positivity_and_eq31_bracket() {
        for i in 0..=200 {
            let z = -10.0 + 0.1 * i as f64;
            let h = hazard(z);
            assert!(h > 0.0, "hazard({z}) = {h}");
            assert!(z + h > 0.0, "z + hazard at {z}");
            let bracket = h * (z + h);
            assert!(bracket > 0.0 && bracket < 1.0, "bracket at {z} = {bracket}");
        }
    }

    #[test]
    fn shrunk_prediction_values() {
        let p = shrunk_prediction(Label::Pos, 0.0, 17.3, ShrinkKind::Logistic).unwrap();
        assert_eq!(p.value(), 0.5);
        let p = shrunk_prediction(Label::Pos, 1.0, 0.0, ShrinkKind::Logistic).unwrap();
        assert_relative_eq!(p.value(), 0.73105857863000487925, epsilon = 1e-15);
        let p = shrunk_prediction(Label::Pos, 1.0, 0.0, ShrinkKind::Probit).unwrap();
        assert_relative_eq!(p.value(), 0.84134474606854294859, epsilon = 1e-15);
        // shrink by 8/pi in logistic units equals Sigma(1/sqrt(2))
        let p = shrunk_prediction(Label::Pos, 1.0, 8.0 / std::f64::consts::PI, ShrinkKind::Logistic)
            .unwrap();
        assert_relative_eq!(p.value(), 0.669761549326657, epsilon = 1e-14);
        let oracle = quadrature_mixture(
            Label::Pos,
            1.0,
            8.0 / std::f64::consts::PI,
            ShrinkKind::Logistic,
        );
        assert!((p.value() - oracle).abs() < 5e-3);
    }

    #[test]
    fn shrunk_prediction_rejects_negative_variance() {
        assert!(shrunk_prediction(Label::Pos, 0.0, -1e-9, ShrinkKind::Logistic).is_err());
    }

    #[test]
    fn shrunk_prediction_complement_is_exact() {
        for &(mu, var) in &[(0.3, 1.7), (-2.0, 0.01), (5.0, 9.0), (0.0, 0.0)] {
            for kind in [ShrinkKind::Logistic, ShrinkKind::Probit] {
                let p = shrunk_prediction(Label::Pos, mu, var, kind).unwrap();
                let q = shrunk_prediction(Label::Neg, mu, var, kind).unwrap();
                assert_eq!(p.value() + q.value(), 1.0);
            }
        }
    }

    #[test]
    fn shrunk_prediction_monotone_towards_half_in_variance() {
        let mut prev = shrunk_prediction(Label::Pos, 2.0, 0.0, ShrinkKind::Logistic)
            .unwrap()
            .value();
        for k in 1..=20 {
            let v = k as f64 * 0.5;
            let p = shrunk_prediction(Label::Pos, 2.0, v, ShrinkKind::Logistic)
                .unwrap()
                .value();
            assert!(p < prev && p > 0.5);
            prev = p;
        }
    }

    #[test]
    fn quadrature_symmetry_and_complement() {
        assert_relative_eq!(
            quadrature_mixture(Label::Pos, 0.0, 3.3, ShrinkKind::Logistic),
            0.5,
            epsilon = 1e-12
        );
        let a = quadrature_mixture(Label::Pos, 0.7, 2.0, ShrinkKind::Logistic);
        let b = quadrature_mixture(Label::Neg, 0.7, 2.0, ShrinkKind::Logistic);
        assert_relative_eq!(a + b, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_matches_exact_probit_closed_form() {
        for &(mu, var) in &[(0.0, 1.0), (1.2, 0.5), (-2.0, 4.0), (3.0, 9.5)] {
            let exact = shrunk_prediction(Label::Pos, mu, var, ShrinkKind::Probit)
                .unwrap()
                .value();
            let quad = quadrature_mixture(Label::Pos, mu, var, ShrinkKind::Probit);
            assert!(
                (exact - quad).abs() < 1e-8,
                "mu={mu} var={var}: {exact} vs {quad}"
            );
        }
    }

    #[test]
    fn log_loss_is_finite_at_extremes() {
        assert!(Prediction::new(0.0).log_loss().is_finite());
        assert!(Prediction::new(1.0).log_loss().is_finite());
        assert_relative_eq!(Prediction::new(0.5).log_loss(), std::f64::consts::LN_2);
    }
}
