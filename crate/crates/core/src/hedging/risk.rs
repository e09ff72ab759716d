//! Risk functionals on finite distributions, loss functions and utilities.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scenario::DiscreteDistribution;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1]")))
    }
}

/// `AVaR_α(Z) = inf_m E[(Z − m)^+]/α + m`, minimised over the atoms.
pub fn avar(dist: &DiscreteDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let atoms = dist.atoms();
    // Convex and piecewise linear in m with kinks at the atoms.
    let mut best = f64::INFINITY;
    for a in atoms {
        let m = a.value;
        let v = m + atoms.iter().map(|b| b.weight * (b.value - m).max(0.0)).sum::<f64>() / alpha;
        best = best.min(v);
    }
    Ok(best)
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Convex, non-decreasing loss `ℓ: R → R_+`.
#[derive(Clone)]
pub enum LossSpec {
    /// `max_k (slope_k x + intercept_k)`.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// `e^{λx}/λ`.
    Exponential { rate: f64 },
    Custom {
        name: String,
        value: ScalarFn,
        derivative: ScalarFn,
    },
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::PiecewiseLinear(p) => write!(f, "PiecewiseLinear({p:?})"),
            LossSpec::Exponential { rate } => write!(f, "Exponential {{ rate: {rate} }}"),
            LossSpec::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Grid on which convexity and monotonicity are sampled.
fn sample_grid() -> Vec<f64> {
    (-400..=400).map(|i| i as f64 * 0.025).collect()
}

impl LossSpec {
    pub fn positive_part() -> Self {
        LossSpec::PiecewiseLinear(vec![(0.0, 0.0), (1.0, 0.0)])
    }

    /// `x^+/α`; its OCE is `AVaR_α`.
    pub fn avar(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(LossSpec::PiecewiseLinear(vec![(0.0, 0.0), (1.0 / alpha, 0.0)]))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            LossSpec::PiecewiseLinear(p) => p.iter().map(|(a, b)| a * x + b).fold(f64::NEG_INFINITY, f64::max),
            LossSpec::Exponential { rate } => (rate * x).exp() / rate,
            LossSpec::Custom { value, .. } => value(x),
        }
    }

    /// A subgradient (the right derivative for piecewise-linear losses).
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            LossSpec::PiecewiseLinear(p) => {
                let v = self.eval(x);
                p.iter()
                    .filter(|(a, b)| (a * x + b - v).abs() <= 1e-12 * (1.0 + v.abs()))
                    .map(|(a, _)| *a)
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            LossSpec::Exponential { rate } => (rate * x).exp(),
            LossSpec::Custom { derivative, .. } => derivative(x),
        }
    }

    /// Global Lipschitz constant, known for piecewise-linear losses only.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            LossSpec::PiecewiseLinear(p) => Some(p.iter().map(|(a, _)| *a).fold(0.0, f64::max)),
            _ => None,
        }
    }

    /// Whether `inf_m E[ℓ(Z − m)] + m` is finite for every finite `Z`.
    pub(crate) fn check_oce_finite(&self) -> Result<()> {
        if let LossSpec::PiecewiseLinear(p) = self {
            let top = p.iter().map(|(a, _)| *a).fold(f64::NEG_INFINITY, f64::max);
            let bottom = p.iter().map(|(a, _)| *a).fold(f64::INFINITY, f64::min);
            if top < 1.0 || bottom > 1.0 {
                return Err(Error::InvalidParameter(
                    "OCE is −∞ unless the loss slopes bracket one".into(),
                ));
            }
        }
        Ok(())
    }

    /// Kinks of a piecewise-linear loss; `None` for smooth losses.
    pub(crate) fn kinks(&self) -> Option<Vec<f64>> {
        let LossSpec::PiecewiseLinear(p) = self else {
            return None;
        };
        let mut out = Vec::new();
        for (i, (a1, b1)) in p.iter().enumerate() {
            for (a2, b2) in &p[i + 1..] {
                if a1 != a2 {
                    out.push((b2 - b1) / (a1 - a2));
                }
            }
        }
        Some(out)
    }

    /// Sampled check of convexity, monotonicity and non-negativity.
    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::PiecewiseLinear(p) if p.is_empty() => {
                return Err(Error::InvalidParameter("loss with no affine pieces".into()))
            }
            LossSpec::PiecewiseLinear(p) if p.iter().any(|(a, _)| *a < 0.0) => {
                return Err(Error::InvalidParameter("loss with a decreasing piece".into()))
            }
            LossSpec::Exponential { rate } if !(*rate > 0.0) => {
                return Err(Error::InvalidParameter(format!("exponential loss rate {rate} must be > 0")))
            }
            _ => {}
        }
        let g = sample_grid();
        let v: Vec<f64> = g.iter().map(|&x| self.eval(x)).collect();
        for i in 0..v.len() {
            if !v[i].is_finite() || v[i] < -1e-12 {
                return Err(Error::InvalidParameter(format!("loss negative or non-finite at {}", g[i])));
            }
            if i > 0 && v[i] < v[i - 1] - 1e-12 {
                return Err(Error::InvalidParameter(format!("loss decreasing near {}", g[i])));
            }
            if i > 0 && i + 1 < v.len() {
                let second = v[i + 1] - 2.0 * v[i] + v[i - 1];
                if second < -1e-9 * (1.0 + v[i].abs()) {
                    return Err(Error::InvalidParameter(format!("loss not convex near {}", g[i])));
                }
            }
        }
        Ok(())
    }
}

/// Optimised certainty equivalent `ρ(Z) = inf_m E[ℓ(Z − m)] + m`.
///
/// Exact for piecewise-linear losses (the infimum sits at some atom minus
/// a kink); golden-section search to `1e-8` in `m` otherwise.
pub fn oce_risk(dist: &DiscreteDistribution, loss: &LossSpec) -> Result<f64> {
    loss.validate()?;
    let objective = |m: f64| m + dist.expect(|z| loss.eval(z - m));
    loss.check_oce_finite()?;
    if let Some(kinks) = loss.kinks() {
        let mut best = f64::INFINITY;
        for a in dist.atoms() {
            for k in &kinks {
                best = best.min(objective(a.value - k));
            }
        }
        return Ok(best);
    }
    let slope = |m: f64| Ok(1.0 - dist.expect(|z| loss.derivative(z - m)));
    let (lo, hi) = bracket_minimiser(slope, dist.min() - 1.0, dist.max() + 1.0)?;
    let m = golden_section(objective, lo, hi, 1e-8);
    Ok(objective(m))
}

/// Expands `[lo, hi]` geometrically until `slope(lo) ≤ 0 ≤ slope(hi)`.
pub(crate) fn bracket_minimiser(
    slope: impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
) -> Result<(f64, f64)> {
    let (base_lo, base_hi) = (lo, hi);
    let mut width = 1.0;
    for _ in 0..200 {
        if slope(lo)? <= 0.0 {
            break;
        }
        width *= 2.0;
        lo = base_lo - width;
    }
    width = 1.0;
    for _ in 0..200 {
        if slope(hi)? >= 0.0 {
            break;
        }
        width *= 2.0;
        hi = base_hi + width;
    }
    if slope(lo)? <= 0.0 && slope(hi)? >= 0.0 {
        Ok((lo, hi))
    } else {
        Err(Error::Solver("could not bracket the OCE minimiser".into()))
    }
}

pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Concave non-decreasing utility with its left derivative.
#[derive(Clone)]
pub enum UtilitySpec {
    /// `min(x, cap)`.
    CappedLinear { cap: f64 },
    /// `(1 − e^{−a x})/a` for `x ≥ 0`, `x` below: C¹, strictly increasing,
    /// derivative bounded by one.
    ExponentialLinear { risk_aversion: f64 },
    /// `−e^{−a x}/a`.
    Exponential { risk_aversion: f64 },
    Custom {
        name: String,
        value: ScalarFn,
        derivative: ScalarFn,
        /// `(c, p)` with `U'(x) ≤ c(1 + |x|^{p−1})`.
        growth: (f64, f64),
    },
}

impl fmt::Debug for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilitySpec::CappedLinear { cap } => write!(f, "CappedLinear {{ cap: {cap} }}"),
            UtilitySpec::ExponentialLinear { risk_aversion } => {
                write!(f, "ExponentialLinear {{ risk_aversion: {risk_aversion} }}")
            }
            UtilitySpec::Exponential { risk_aversion } => write!(f, "Exponential {{ risk_aversion: {risk_aversion} }}"),
            UtilitySpec::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl UtilitySpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            UtilitySpec::CappedLinear { cap } => x.min(*cap),
            UtilitySpec::ExponentialLinear { risk_aversion: a } => {
                if x >= 0.0 {
                    -(-a * x).exp_m1() / a
                } else {
                    x
                }
            }
            UtilitySpec::Exponential { risk_aversion: a } => -(-a * x).exp() / a,
            UtilitySpec::Custom { value, .. } => value(x),
        }
    }

    /// Left derivative.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            UtilitySpec::CappedLinear { cap } => {
                if x <= *cap {
                    1.0
                } else {
                    0.0
                }
            }
            UtilitySpec::ExponentialLinear { risk_aversion: a } => {
                if x > 0.0 {
                    (-a * x).exp()
                } else {
                    1.0
                }
            }
            UtilitySpec::Exponential { risk_aversion: a } => (-a * x).exp(),
            UtilitySpec::Custom { derivative, .. } => derivative(x),
        }
    }

    /// Declared `(c, p)` growth parameters; `None` when no polynomial bound holds.
    pub fn growth(&self) -> Option<(f64, f64)> {
        match self {
            UtilitySpec::CappedLinear { .. } | UtilitySpec::ExponentialLinear { .. } => Some((1.0, 1.0)),
            UtilitySpec::Exponential { .. } => None,
            UtilitySpec::Custom { growth, .. } => Some(*growth),
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        match self {
            UtilitySpec::CappedLinear { .. } => false,
            UtilitySpec::ExponentialLinear { .. } | UtilitySpec::Exponential { .. } => true,
            UtilitySpec::Custom { .. } => {
                let g = sample_grid();
                g.iter().all(|&x| self.derivative(x) > 0.0)
            }
        }
    }

    /// Sampled check of concavity, monotonicity and the declared growth bound.
    pub fn validate(&self) -> Result<()> {
        match self {
            UtilitySpec::ExponentialLinear { risk_aversion: a } | UtilitySpec::Exponential { risk_aversion: a }
                if !(*a > 0.0) =>
            {
                return Err(Error::InvalidParameter(format!("risk aversion {a} must be > 0")))
            }
            _ => {}
        }
        let g = sample_grid();
        let v: Vec<f64> = g.iter().map(|&x| self.eval(x)).collect();
        for i in 0..g.len() {
            let d = self.derivative(g[i]);
            if !v[i].is_finite() || d < 0.0 {
                return Err(Error::InvalidParameter(format!("utility decreasing or non-finite at {}", g[i])));
            }
            if i > 0 && v[i] < v[i - 1] - 1e-12 {
                return Err(Error::InvalidParameter(format!("utility decreasing near {}", g[i])));
            }
            if i > 0 && i + 1 < g.len() {
                let second = v[i + 1] - 2.0 * v[i] + v[i - 1];
                if second > 1e-9 * (1.0 + v[i].abs()) {
                    return Err(Error::InvalidParameter(format!("utility not concave near {}", g[i])));
                }
            }
            if let Some((c, p)) = self.growth() {
                if d > c * (1.0 + g[i].abs().powf(p - 1.0)) * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!("growth bound fails at {}", g[i])));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(v: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::uniform(v).unwrap()
    }

    #[test]
    fn avar_basics() {
        let d = uniform(&[1.0, 2.0, 3.0, 4.0]);
        assert!((avar(&d, 0.5).unwrap() - 3.5).abs() < 1e-15);
        assert!((avar(&d, 1.0).unwrap() - 2.5).abs() < 1e-15);
        assert_eq!(avar(&DiscreteDistribution::dirac(2.0), 0.1).unwrap(), 2.0);
        assert!(avar(&d, 0.0).is_err());
        assert!(avar(&d, 1.5).is_err());
    }

    #[test]
    fn oce_of_scaled_positive_part_is_avar() {
        let d = uniform(&[-1.0, 0.5, 2.0, 7.0, 3.0]);
        for alpha in [0.1, 0.3, 0.75] {
            let o = oce_risk(&d, &LossSpec::avar(alpha).unwrap()).unwrap();
            assert!((o - avar(&d, alpha).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_oce_closed_form() {
        let d = uniform(&[-1.0, 0.0, 2.0]);
        let rate = 0.7;
        let o = oce_risk(&d, &LossSpec::Exponential { rate }).unwrap();
        let m = d.expect(|z| (rate * z).exp()).ln() / rate;
        assert!((o - (m + 1.0 / rate)).abs() < 1e-10);
    }

    #[test]
    fn loss_validation() {
        assert!(LossSpec::positive_part().validate().is_ok());
        let concave = LossSpec::Custom {
            name: "sqrt".into(),
            value: Arc::new(|x: f64| x.max(0.0).sqrt()),
            derivative: Arc::new(|x: f64| if x > 0.0 { 0.5 / x.sqrt() } else { 0.0 }),
        };
        assert!(concave.validate().is_err());
    }

    #[test]
    fn utility_validation() {
        UtilitySpec::CappedLinear { cap: 5.0 }.validate().unwrap();
        UtilitySpec::ExponentialLinear { risk_aversion: 0.5 }.validate().unwrap();
        let convex = UtilitySpec::Custom {
            name: "square".into(),
            value: Arc::new(|x: f64| x * x),
            derivative: Arc::new(|x: f64| 2.0 * x),
            growth: (2.0, 2.0),
        };
        assert!(convex.validate().is_err());
    }
}
