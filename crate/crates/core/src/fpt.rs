//! First-passage analytics for `t + ε^p B_t` reaching the level `α`.
//!
//! The passage time is inverse Gaussian with mean `α` and shape
//! `α² / ε^{2p}`. For small `ε^p` the shape is huge and the term
//! `exp(2λ/μ) G(a + 4λ/μ)` of the closed-form CDF overflows and underflows
//! in its two factors separately, so everything runs through `ln G`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FptParams {
    alpha: f64,
    eps_p: f64,
}

impl FptParams {
    pub fn new(alpha: f64, eps_p: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
        }
        if !(eps_p > 0.0 && eps_p < 1.0) {
            return Err(Error::param("eps_p", format!("must lie in (0, 1), got {eps_p}")));
        }
        Ok(Self { alpha, eps_p })
    }

    /// From the noise scale `ε` and exponent `p`.
    pub fn from_noise(alpha: f64, epsilon: f64, p: f64) -> Result<Self> {
        Self::new(alpha, epsilon.powf(p))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps_p(&self) -> f64 {
        self.eps_p
    }

    /// `ε^{2p}`
    fn var_rate(&self) -> f64 {
        self.eps_p * self.eps_p
    }

    /// Inverse Gaussian shape `α² / ε^{2p}`.
    pub fn shape(&self) -> f64 {
        self.alpha * self.alpha / self.var_rate()
    }

    /// Mean of the inverse Gaussian law, which is `α`.
    pub fn mean(&self) -> f64 {
        self.alpha
    }

    pub fn ln_density(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.alpha.ln() - self.eps_p.ln() - 0.5 * (2.0 * PI * t * t * t).ln()
            - (t - self.alpha).powi(2) / (2.0 * self.var_rate() * t)
    }

    /// Density of the passage time. Errors for `t <= 0`; see
    /// [`FptParams::density_or_zero`] for the total version.
    pub fn density(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("passage-time density needs t > 0, got {t}")));
        }
        Ok(self.ln_density(t).exp())
    }

    pub fn density_or_zero(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.ln_density(t).exp()
        } else {
            0.0
        }
    }

    /// `a = λ(c - μ)² / (μ² c)` and `4λ/μ`, `2λ/μ`.
    fn shuster_terms(&self, c: f64) -> (f64, f64) {
        let mu = self.alpha;
        let lam = self.shape();
        let a = lam * (c - mu).powi(2) / (mu * mu * c);
        (a, 2.0 * lam / mu)
    }

    /// `ln(½ exp(2λ/μ) G(a + 4λ/μ))`
    fn ln_reflected(&self, a: f64, two_lam_mu: f64) -> f64 {
        -std::f64::consts::LN_2 + two_lam_mu + ln_chi2_tail(a + 2.0 * two_lam_mu)
    }

    pub fn cdf(&self, c: f64) -> f64 {
        if !(c > 0.0) {
            return 0.0;
        }
        let (a, two) = self.shuster_terms(c);
        let reflected = self.ln_reflected(a, two).exp();
        let half_tail = 0.5 * ln_chi2_tail(a).exp();
        let f = if c <= self.alpha {
            half_tail + reflected
        } else {
            1.0 - half_tail + reflected
        };
        f.clamp(0.0, 1.0)
    }

    /// `P(τ > c)`, accurate far into the upper tail.
    pub fn survival(&self, c: f64) -> f64 {
        self.ln_survival(c).exp()
    }

    pub fn ln_cdf(&self, c: f64) -> f64 {
        if !(c > 0.0) {
            return f64::NEG_INFINITY;
        }
        if c <= self.alpha {
            let (a, two) = self.shuster_terms(c);
            log_add(-std::f64::consts::LN_2 + ln_chi2_tail(a), self.ln_reflected(a, two))
        } else {
            (-self.survival(c)).ln_1p()
        }
    }

    pub fn ln_survival(&self, c: f64) -> f64 {
        if !(c > 0.0) {
            return 0.0;
        }
        if c <= self.alpha {
            return (-self.cdf(c)).ln_1p();
        }
        let (a, two) = self.shuster_terms(c);
        let ln_half_tail = -std::f64::consts::LN_2 + ln_chi2_tail(a);
        let ratio = self.ln_reflected(a, two) - ln_half_tail;
        ln_half_tail + (-ratio.exp_m1()).ln()
    }

    /// `P(|τ - α| >= δ)` evaluated in log space.
    pub fn ln_two_sided_deviation(&self, delta: f64) -> f64 {
        log_add(self.ln_cdf(self.alpha - delta), self.ln_survival(self.alpha + delta))
    }

    pub fn two_sided_deviation(&self, delta: f64) -> f64 {
        self.ln_two_sided_deviation(delta).exp()
    }

    fn check_delta(&self, delta: f64) -> Result<()> {
        let top = 1f64.min(self.alpha / 2.0);
        if !(delta > 0.0 && delta < top) {
            return Err(Error::param("delta", format!("must lie in (0, {top}), got {delta}")));
        }
        Ok(())
    }

    /// `ln(K (ε^p/δ) exp(-δ²/(4αε^{2p})))` with `K` from [`tail_constant`].
    pub fn ln_tail_bound(&self, delta: f64) -> Result<f64> {
        self.check_delta(delta)?;
        Ok(tail_constant(self.alpha).ln() + (self.eps_p / delta).ln()
            - delta * delta / (4.0 * self.alpha * self.var_rate()))
    }

    /// Upper bound on `P(|τ - α| >= δ)` for `0 < δ < min(1, α/2)`.
    pub fn tail_bound(&self, delta: f64) -> Result<f64> {
        Ok(self.ln_tail_bound(delta)?.exp())
    }

    /// `E[exp(-λτ)] = exp((α/ε^{2p})(1 - sqrt(1 + 2λε^{2p})))`, written
    /// without the cancellation in `1 - sqrt(..)`.
    pub fn laplace(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::param("lambda", format!("must be nonnegative, got {lambda}")));
        }
        let s = (1.0 + 2.0 * lambda * self.var_rate()).sqrt();
        Ok((-2.0 * self.alpha * lambda / (1.0 + s)).exp())
    }

    /// Inverse of [`FptParams::cdf`] by bisection.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::param("u", format!("must lie in (0, 1), got {u}")));
        }
        let mut hi = 2.0 * self.alpha;
        while self.cdf(hi) < u {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// `K = sqrt(α/2π) + sqrt(α/π) + 1/sqrt(8πα)`: the lower-tail estimate
/// contributes the first and last terms (using `ε^p <= ε^p/δ` for `δ < 1`),
/// the upper-tail estimate the middle one.
pub fn tail_constant(alpha: f64) -> f64 {
    (alpha / (2.0 * PI)).sqrt() + (alpha / PI).sqrt() + 1.0 / (8.0 * PI * alpha).sqrt()
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln G(z)` where `G(z) = P(χ²₁ > z) = erfc(sqrt(z/2))`.
pub fn ln_chi2_tail(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    ln_erfc((0.5 * z).sqrt())
}

/// `ln erfc(x)`, finite for arbitrarily large `x`.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 3.0 {
        libm::erfc(x).ln()
    } else {
        -x * x + erfcx_continued_fraction(x).ln()
    }
}

/// Scaled complementary error function `exp(x²) erfc(x)` for `x >= 3`, from
/// the Laplace continued fraction evaluated with the modified Lentz method.
fn erfcx_continued_fraction(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for j in 1..2000 {
        let a = 0.5 * j as f64;
        d = x + a * d;
        if d == 0.0 {
            d = tiny;
        }
        c = x + a / c;
        if c == 0.0 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (PI.sqrt() * f)
}

/// Exponential-moment bound for the impact counter `Q_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalBound {
    /// Chernoff exponent used.
    pub lambda: f64,
    /// `ε`-uniform prefactor `1 / (1 - exp(γ - 2αλ/(1 + sqrt(1 + 2λ))))`.
    pub kappa: f64,
    /// `κ(λ) e^{λt}`, valid for every `ε ∈ (0, 1)`.
    pub bound: f64,
    /// `e^{λt} / (1 - e^γ E[e^{-λτ}])` at the requested `ε`; never above `bound`.
    pub chernoff: f64,
}

/// Bounds `E[exp(γ Q_t)]` through `Σ_n e^{γn} P(τ_n <= t) <= Σ_n e^{γn} e^{λt} E[e^{-λτ}]^n`.
/// The exponent `λ` is chosen above `γ/α + γ²/(2α²)` (which makes the
/// series converge uniformly in `ε < 1`) by minimising the returned bound.
pub fn renewal_mgf_bound(gamma: f64, alpha: f64, epsilon: f64, p: f64, t: f64) -> Result<RenewalBound> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("must be nonnegative, got {gamma}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    if !(p > 1.0) {
        return Err(Error::param("p", format!("must exceed 1, got {p}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    let params = FptParams::from_noise(alpha, epsilon, p)?;
    let threshold = gamma / alpha + gamma * gamma / (2.0 * alpha * alpha);

    let evaluate = |lambda: f64| -> Option<RenewalBound> {
        let uniform = gamma - 2.0 * alpha * lambda / (1.0 + (1.0 + 2.0 * lambda).sqrt());
        if !(uniform < 0.0) {
            return None;
        }
        let kappa = -1.0 / uniform.exp_m1();
        let at_eps = gamma + params.laplace(lambda).ok()?.ln();
        if !(at_eps < 0.0) {
            return None;
        }
        let growth = (lambda * t).exp();
        let bound = kappa * growth;
        let chernoff = -growth / at_eps.exp_m1();
        (bound.is_finite() && chernoff.is_finite()).then_some(RenewalBound {
            lambda,
            kappa,
            bound,
            chernoff,
        })
    };

    // coarse log-spaced scan above the threshold, then golden-section refinement
    let mut best: Option<RenewalBound> = None;
    let mut best_k = 0;
    let scan: Vec<f64> = (0..=400)
        .map(|k| threshold + 1e-6 * 10f64.powf(9.0 * k as f64 / 400.0))
        .collect();
    for (k, &lambda) in scan.iter().enumerate() {
        if let Some(b) = evaluate(lambda) {
            if best.is_none_or(|cur| b.bound < cur.bound) {
                best = Some(b);
                best_k = k;
            }
        }
    }
    let mut best = best.ok_or(Error::BoundSearch { gamma })?;
    let lo = if best_k == 0 { threshold } else { scan[best_k - 1] };
    let hi = scan.get(best_k + 1).copied().unwrap_or(scan[best_k]);
    let (mut a, mut b) = (lo, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        let fc = evaluate(c).map_or(f64::INFINITY, |r| r.bound);
        let fd = evaluate(d).map_or(f64::INFINITY, |r| r.bound);
        if fc < fd {
            b = d;
        } else {
            a = c;
        }
    }
    if let Some(r) = evaluate(0.5 * (a + b)) {
        if r.bound < best.bound {
            best = r;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use skorolab_oracles::{integrate, integrate_split, inverse_gaussian_pdf};

    #[test]
    fn density_at_the_mean() {
        let f = FptParams::new(PI / 2.0, 0.01).unwrap();
        assert_abs_diff_eq!(f.density(PI / 2.0).unwrap(), 100.0 / PI, epsilon = 1e-9);
        assert_abs_diff_eq!(f.density(PI / 2.0).unwrap(), 31.830989, epsilon = 1e-6);
        assert!(f.density(0.0).is_err());
        assert!(f.density(-1.0).is_err());
        assert_eq!(f.density_or_zero(-1.0), 0.0);
        assert_eq!(f.density(1e-8).unwrap(), 0.0);
    }

    #[test]
    fn density_matches_inverse_gaussian_form() {
        let f = FptParams::new(1.3, 0.2).unwrap();
        for t in [0.2, 0.9, 1.3, 2.0, 4.0] {
            let o = inverse_gaussian_pdf(t, 1.3, f.shape());
            assert!((f.density(t).unwrap() - o).abs() <= 1e-12 * o.max(1.0));
        }
    }

    #[test]
    fn density_normalises() {
        for (alpha, eps_p) in [(1.0, 0.2), (PI / 2.0, 0.01), (0.5, 0.5)] {
            let f = FptParams::new(alpha, eps_p).unwrap();
            let m = integrate_split(|t| f.density_or_zero(t), 0.0, 200.0, &[alpha, 2.0 * alpha], 1e-12);
            assert_abs_diff_eq!(m, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn ln_erfc_agrees_with_libm_where_both_work() {
        for i in 0..=220 {
            let x = 3.0 + 0.1 * i as f64;
            let direct = libm::erfc(x).ln();
            let ours = -x * x + erfcx_continued_fraction(x).ln();
            assert!((direct - ours).abs() < 1e-12 * direct.abs(), "x={x}: {direct} vs {ours}");
        }
        // asymptotic ln erfc(x) ~ -x² - ln(x sqrt π)
        let x = 1e4;
        assert_abs_diff_eq!(ln_erfc(x), -x * x - (x * PI.sqrt()).ln(), epsilon = 1e-6);
    }

    #[test]
    fn cdf_reference_values() {
        let f = FptParams::new(1.0, 0.2).unwrap();
        assert_abs_diff_eq!(f.shape(), 25.0, epsilon = 1e-12);
        let at_mean = 0.5 + 0.5 * (50.0 + ln_chi2_tail(100.0)).exp();
        assert_abs_diff_eq!(f.cdf(1.0), at_mean, epsilon = 1e-15);
        let q = integrate_split(|t| f.density_or_zero(t), 0.0, 1.0, &[0.5], 1e-13);
        assert_abs_diff_eq!(f.cdf(1.0), q, epsilon = 1e-9);
        assert_abs_diff_eq!(f.cdf(1.0), 0.5395066941013857, epsilon = 1e-12);
        let q = integrate(|t| f.density_or_zero(t), 0.0, 0.8, 1e-13);
        assert_abs_diff_eq!(f.cdf(0.8), q, epsilon = 1e-9);
        assert_abs_diff_eq!(f.cdf(0.8), 0.1527941837807325, epsilon = 1e-12);
        assert_abs_diff_eq!(f.cdf(1e6), 1.0, epsilon = 1e-10);
        assert_eq!(f.cdf(0.0), 0.0);
        assert_eq!(f.cdf(-3.0), 0.0);
    }

    #[test]
    fn cdf_derivative_is_density() {
        let f = FptParams::new(PI / 2.0, 0.1).unwrap();
        for i in 1..40 {
            let t = 1.0 + 0.03 * i as f64;
            let h = 1e-5;
            let fd = (f.cdf(t + h) - f.cdf(t - h)) / (2.0 * h);
            let d = f.density(t).unwrap();
            if d > 1e-3 {
                assert!((fd - d).abs() <= 1e-6 * d, "t={t}: fd {fd} vs {d}");
            }
        }
    }

    #[test]
    fn survival_and_cdf_are_complementary() {
        let f = FptParams::new(1.0, 0.3).unwrap();
        for c in [0.3, 0.9, 1.0, 1.1, 2.0, 4.0] {
            assert_abs_diff_eq!(f.cdf(c) + f.survival(c), 1.0, epsilon = 1e-14);
        }
        // deep upper tail stays positive instead of rounding to zero
        let f = FptParams::new(1.0, 0.01).unwrap();
        assert_abs_diff_eq!(f.ln_survival(1.5), -838.1854487995957, epsilon = 1e-9);
    }

    #[test]
    fn tail_bound_reference_value() {
        let f = FptParams::new(1.0, 0.05).unwrap();
        let k = tail_constant(1.0);
        assert_abs_diff_eq!(k, 1.16260, epsilon = 1e-5);
        let bound = f.tail_bound(0.3).unwrap();
        assert_abs_diff_eq!(bound, k * (0.05 / 0.3) * (-9.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(bound, 2.392e-5, epsilon = 1e-8);
        let exact = f.cdf(0.7) + (1.0 - f.cdf(1.3));
        assert!(bound >= exact);
        assert!(bound >= f.two_sided_deviation(0.3));
    }

    #[test]
    fn tail_bound_range_and_monotonicity() {
        let f = FptParams::new(1.0, 0.05).unwrap();
        assert!(f.tail_bound(0.0).is_err());
        assert!(f.tail_bound(0.5).is_err());
        assert!(f.tail_bound(0.5 - 1e-12).unwrap().is_finite());
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let b = f.tail_bound(0.005 * i as f64).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn laplace_transform() {
        let f = FptParams::new(1.0, 0.1).unwrap();
        assert_eq!(f.laplace(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(f.laplace(1.0).unwrap(), (100.0 * (1.0 - 1.02f64.sqrt())).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(f.laplace(1.0).unwrap(), 0.369705186712502, epsilon = 1e-12);
        let q = integrate_split(|t| (-t).exp() * f.density_or_zero(t), 0.0, 50.0, &[1.0], 1e-13);
        assert_abs_diff_eq!(f.laplace(1.0).unwrap(), q, epsilon = 1e-9);
        let mut prev = 1.0;
        for i in 1..50 {
            let v = f.laplace(i as f64 * 2.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-30);
        assert!(f.laplace(-0.1).is_err());
    }

    #[test]
    fn inverse_gaussian_mean() {
        let f = FptParams::new(PI / 2.0, 0.05).unwrap();
        let m = integrate_split(|t| t * f.density_or_zero(t), 0.0, 100.0, &[PI / 2.0], 1e-12);
        assert_abs_diff_eq!(m, f.mean(), epsilon = 1e-6);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let f = FptParams::new(1.0, 0.2).unwrap();
        for u in [0.01, 0.3, 0.5, 0.9, 0.999] {
            assert_abs_diff_eq!(f.cdf(f.quantile(u).unwrap()), u, epsilon = 1e-12);
        }
    }

    #[test]
    fn renewal_bound_admissibility() {
        let r = renewal_mgf_bound(0.5, 1.0, 0.1f64.sqrt(), 2.0, 4.0).unwrap();
        assert!(r.lambda > 0.5 + 0.125);
        let f = FptParams::from_noise(1.0, 0.1f64.sqrt(), 2.0).unwrap();
        assert!(0.5f64.exp() * f.laplace(r.lambda).unwrap() < 1.0);
        assert!(r.chernoff <= r.bound * (1.0 + 1e-12));
        assert!(r.bound.is_finite() && r.bound >= 1.0);

        let z = renewal_mgf_bound(0.0, 1.0, 0.3, 2.0, 4.0).unwrap();
        assert!(z.bound >= 1.0);
        assert!(renewal_mgf_bound(0.5, 1.0, 1.5, 2.0, 4.0).is_err());
        assert!(renewal_mgf_bound(-0.5, 1.0, 0.5, 2.0, 4.0).is_err());
    }
}
