//! Margin losses and the angle-based cost-sensitive composite loss
//! `l_c(f, y) = sum_t C[y][t] * l(-<f, w_t>)`.

use std::fmt;
use std::str::FromStr;

use crate::cost::CostMatrix;
use crate::error::{invalid, Result};
use crate::simplex::SimplexCode;

/// A scalar margin loss `l(z)` with its first two derivatives.
///
/// Fisher consistency of the composite loss needs `l` convex and
/// differentiable with `l'(z) < 0` everywhere; the built-in
/// [`MarginLoss`] kinds all satisfy this.
pub trait Margin {
    fn value(&self, z: f64) -> f64;
    fn derivative(&self, z: f64) -> f64;
    fn second_derivative(&self, z: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginLoss {
    /// `exp(-z)`
    Exponential,
    /// `log(1 + exp(-z))`
    Logit,
    /// Large-margin unified machine loss with `a > 0`, `0 <= c < inf`.
    Lmum { a: f64, c: f64 },
}

impl MarginLoss {
    pub fn lmum(a: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid(format!("lmum parameter a must be > 0, got {a}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid(format!(
                "lmum parameter c must be finite and >= 0, got {c}"
            )));
        }
        Ok(MarginLoss::Lmum { a, c })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MarginLoss::Exponential => "exponential",
            MarginLoss::Logit => "logit",
            MarginLoss::Lmum { .. } => "lmum",
        }
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-x))` without overflow.
#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Margin for MarginLoss {
    fn value(&self, z: f64) -> f64 {
        match *self {
            MarginLoss::Exponential => (-z).exp(),
            MarginLoss::Logit => softplus(-z),
            MarginLoss::Lmum { a, c } => {
                if z < c / (1.0 + c) {
                    1.0 - z
                } else {
                    (a / ((1.0 + c) * z - c + a)).powf(a) / (1.0 + c)
                }
            }
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match *self {
            MarginLoss::Exponential => -(-z).exp(),
            MarginLoss::Logit => -sigmoid(-z),
            MarginLoss::Lmum { a, c } => {
                if z < c / (1.0 + c) {
                    -1.0
                } else {
                    -(a / ((1.0 + c) * z - c + a)).powf(a + 1.0)
                }
            }
        }
    }

    fn second_derivative(&self, z: f64) -> f64 {
        match *self {
            MarginLoss::Exponential => (-z).exp(),
            MarginLoss::Logit => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            MarginLoss::Lmum { a, c } => {
                if z < c / (1.0 + c) {
                    0.0
                } else {
                    (a + 1.0) * (1.0 + c) / a * (a / ((1.0 + c) * z - c + a)).powf(a + 2.0)
                }
            }
        }
    }
}

impl fmt::Display for MarginLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarginLoss::Lmum { a, c } => write!(f, "lmum(a={a},c={c})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for MarginLoss {
    type Err = crate::Error;

    /// Accepts `exponential`, `logit` and `lmum` (with `a = 1, c = 0`).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" | "exp" => Ok(MarginLoss::Exponential),
            "logit" => Ok(MarginLoss::Logit),
            "lmum" => MarginLoss::lmum(1.0, 0.0),
            other => Err(invalid(format!("unknown loss `{other}`"))),
        }
    }
}

/// The cost-sensitive loss of decision vector `f` for true class `y`.
pub fn cs_loss<L: Margin + ?Sized>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    f: &[f64],
    y: usize,
) -> Result<f64> {
    check_classes(code, cost)?;
    code.check_dim(f)?;
    if y >= code.k() {
        return Err(invalid(format!(
            "label {y} out of range for K = {}",
            code.k()
        )));
    }
    Ok(cs_loss_unchecked(code, cost, loss, f, y))
}

pub(crate) fn cs_loss_unchecked<L: Margin + ?Sized>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    f: &[f64],
    y: usize,
) -> f64 {
    code.vertices()
        .zip(cost.row(y))
        .filter(|(_, &c)| c != 0.0)
        .map(|(w, &c)| c * loss.value(-crate::simplex::dot(f, w)))
        .sum()
}

/// Mean cost-sensitive loss over a sample.
pub fn empirical_risk<L: Margin + ?Sized, F: AsRef<[f64]>>(
    code: &SimplexCode,
    cost: &CostMatrix,
    loss: &L,
    f_values: &[F],
    labels: &[usize],
) -> Result<f64> {
    if f_values.is_empty() {
        return Err(invalid("empirical risk of an empty sample"));
    }
    if f_values.len() != labels.len() {
        return Err(invalid(format!(
            "{} decision vectors but {} labels",
            f_values.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (f, &y) in f_values.iter().zip(labels) {
        total += cs_loss(code, cost, loss, f.as_ref(), y)?;
    }
    Ok(total / f_values.len() as f64)
}

pub(crate) fn check_classes(code: &SimplexCode, cost: &CostMatrix) -> Result<()> {
    if code.k() != cost.k() {
        return Err(invalid(format!(
            "simplex code has K = {} but cost matrix has K = {}",
            code.k(),
            cost.k()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    const KINDS: [MarginLoss; 4] = [
        MarginLoss::Exponential,
        MarginLoss::Logit,
        MarginLoss::Lmum { a: 1.0, c: 0.0 },
        MarginLoss::Lmum { a: 2.5, c: 1.5 },
    ];

    #[test]
    fn values_at_reference_points() {
        assert_eq!(MarginLoss::Exponential.value(0.0), 1.0);
        assert!((MarginLoss::Logit.value(0.0) - 2f64.ln()).abs() < 1e-15);
        let lmum = MarginLoss::lmum(1.0, 0.0).unwrap();
        assert!((lmum.value(0.5) - 2.0 / 3.0).abs() < 1e-15);
        // linear branch
        assert_eq!(lmum.value(-1.0), 2.0);
    }

    #[test]
    fn derivatives_at_reference_points() {
        assert_eq!(MarginLoss::Exponential.derivative(0.0), -1.0);
        assert_eq!(MarginLoss::Logit.derivative(0.0), -0.5);
        let lmum = MarginLoss::lmum(1.0, 0.0).unwrap();
        assert!((lmum.derivative(0.5) + 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(lmum.derivative(-0.1), -1.0);
    }

    #[test]
    fn logit_is_overflow_safe() {
        let l = MarginLoss::Logit;
        assert!((l.value(-800.0) - 800.0).abs() < 1e-9);
        assert!(l.value(800.0) >= 0.0 && l.value(800.0) < 1e-300);
        assert_eq!(l.derivative(-800.0), -1.0);
        assert!(l.derivative(800.0).is_finite());
    }

    #[test]
    fn lmum_validation() {
        assert!(MarginLoss::lmum(0.0, 0.0).is_err());
        assert!(MarginLoss::lmum(1.0, -0.1).is_err());
        assert!(MarginLoss::lmum(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-6;
        for kind in KINDS {
            for i in 0..=400 {
                let z = -10.0 + 0.05 * i as f64 + 1e-3;
                let fd = (kind.value(z + h) - kind.value(z - h)) / (2.0 * h);
                let d = kind.derivative(z);
                assert!(
                    (fd - d).abs() <= 1e-5 * d.abs().max(1e-3),
                    "{kind} at z={z}: fd {fd} vs {d}"
                );
                assert!(d < 0.0, "{kind}: l'({z}) = {d}");
            }
        }
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let h = 1e-5;
        for kind in KINDS {
            for i in 0..200 {
                let z = -10.0 + 0.1 * i as f64 + 3e-3;
                let fd = (kind.derivative(z + h) - kind.derivative(z - h)) / (2.0 * h);
                let d2 = kind.second_derivative(z);
                assert!(
                    (fd - d2).abs() <= 1e-4 * d2.abs().max(1e-2),
                    "{kind} at z={z}: fd {fd} vs {d2}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn midpoint_convexity(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            for kind in KINDS {
                let mid = kind.value(0.5 * (a + b));
                let avg = 0.5 * (kind.value(a) + kind.value(b));
                prop_assert!(mid <= avg + 1e-12 * avg.abs().max(1.0));
            }
        }
    }

    fn sim1() -> CostMatrix {
        CostMatrix::from_rows(&[[0.0, 2.0, 2.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).unwrap()
    }

    #[test]
    fn cs_loss_examples() {
        let code3 = SimplexCode::new(3).unwrap();
        let c = sim1();
        for y in 0..3 {
            let v = cs_loss(&code3, &c, &MarginLoss::Exponential, &[0.0, 0.0], y).unwrap();
            assert!((v - c.row(y).iter().sum::<f64>()).abs() < 1e-15);
        }

        let code2 = SimplexCode::new(2).unwrap();
        let zo2 = CostMatrix::zero_one(2).unwrap();
        let m = 0.8;
        let v = cs_loss(&code2, &zo2, &MarginLoss::Exponential, &[m], 0).unwrap();
        assert!((v - (-m as f64).exp()).abs() < 1e-15);

        let zo3 = CostMatrix::zero_one(3).unwrap();
        let v = cs_loss(&code3, &zo3, &MarginLoss::Logit, code3.vertex(0), 0).unwrap();
        let expect = 2.0 * (1.0 + (-0.5f64).exp()).ln();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.94815).abs() < 1e-5);
    }

    #[test]
    fn cs_loss_errors() {
        let code = SimplexCode::new(3).unwrap();
        let c = sim1();
        assert!(cs_loss(&code, &c, &MarginLoss::Logit, &[0.0], 0).is_err());
        assert!(cs_loss(&code, &c, &MarginLoss::Logit, &[0.0, 0.0], 3).is_err());
        let c4 = CostMatrix::zero_one(4).unwrap();
        assert!(cs_loss(&code, &c4, &MarginLoss::Logit, &[0.0, 0.0], 0).is_err());
    }

    #[test]
    fn empirical_risk_examples() {
        let code = SimplexCode::new(4).unwrap();
        let zo = CostMatrix::zero_one(4).unwrap();
        let l = MarginLoss::Exponential;
        let f = vec![vec![0.1, -0.3, 0.2]];
        let single = empirical_risk(&code, &zo, &l, &f, &[2]).unwrap();
        assert_eq!(single, cs_loss(&code, &zo, &l, &f[0], 2).unwrap());

        let zeros = vec![vec![0.0; 3]; 5];
        let r = empirical_risk(&code, &zo, &l, &zeros, &[0, 1, 2, 3, 0]).unwrap();
        assert!((r - 3.0).abs() < 1e-15);

        let empty: Vec<Vec<f64>> = vec![];
        assert!(empirical_risk(&code, &zo, &l, &empty, &[]).is_err());
        assert!(empirical_risk(&code, &zo, &l, &zeros, &[0]).is_err());
    }

    #[test]
    fn empirical_risk_matches_double_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let k = 4;
        let code = SimplexCode::new(k).unwrap();
        let cost = CostMatrix::from_fn(k, |j, t| {
            if j == t {
                0.0
            } else {
                (j * 7 + t * 3) as f64 % 5.0 + 0.5
            }
        })
        .unwrap();
        let n = 13;
        let f: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k - 1).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        for kind in KINDS {
            let mut total = 0.0;
            for i in 0..n {
                for t in 0..k {
                    let w = code.vertex(t);
                    let s: f64 = (0..k - 1).map(|r| f[i][r] * w[r]).sum();
                    total += cost.get(y[i], t) * kind.value(-s);
                }
            }
            let r = empirical_risk(&code, &cost, &kind, &f, &y).unwrap();
            assert!((r - total / n as f64).abs() < 1e-12 * r.max(1.0));
        }
    }

    proptest! {
        #[test]
        fn cs_loss_is_class_permutation_invariant(
            seed in any::<u64>(),
            k in 2usize..6,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let code = SimplexCode::new(k).unwrap();
            let cost = CostMatrix::from_fn(k, |j, t| if j == t { 0.0 } else { 0.1 + (j * k + t) as f64 }).unwrap();
            let mut order: Vec<usize> = (0..k).collect();
            for i in (1..k).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let pcode = code.permuted(&order).unwrap();
            let pcost = cost.permuted(&order).unwrap();
            let f: Vec<f64> = (0..k - 1).map(|_| rng.random_range(-2.0..2.0)).collect();
            for (a, &y) in order.iter().enumerate() {
                for kind in KINDS {
                    let orig = cs_loss(&code, &cost, &kind, &f, y).unwrap();
                    let perm = cs_loss(&pcode, &pcost, &kind, &f, a).unwrap();
                    prop_assert!((orig - perm).abs() <= 1e-12 * orig.max(1.0));
                }
            }
        }
    }
}
