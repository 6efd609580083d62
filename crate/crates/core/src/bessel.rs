//! Modified Bessel function of the second kind, `K_ν(x)`, for real ν ≥ 0.
//!
//! Small arguments (`x ≤ 2`) use Temme's series for the fractional order
//! `μ ∈ [−1/2, 1/2]`; larger arguments use Steed's continued fraction.
//! Both produce `K_μ` and `K_{μ+1}` together, after which the stable upward
//! recurrence `K_{ν+1} = K_{ν−1} + (2ν/x) K_ν` reaches the requested order.

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `K_ν(x)` for ν ≥ 0, x > 0. Returns `None` when the result is not
/// representable (x ≤ 0, or x large enough that `e^{−x}` underflows).
pub fn bessel_k(nu: f64, x: f64) -> Option<f64> {
    bessel_k_pair(nu, x).map(|(k, _)| k)
}

/// `(K_ν(x), K_{ν+1}(x))` for ν ≥ 0, x > 0.
pub fn bessel_k_pair(nu: f64, x: f64) -> Option<(f64, f64)> {
    if x.is_nan() || nu.is_nan() || x <= 0.0 || nu < 0.0 || x > 700.0 {
        return None;
    }
    // Split ν into an integer number of recurrences and a fractional part
    // with |μ| ≤ 1/2.
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;

    let (mut k_mu, mut k_mu1) = if x <= 2.0 {
        temme_series(mu, x)?
    } else {
        steed_cf2(mu, x)?
    };

    let mut order = mu;
    for _ in 0..nl {
        let next = k_mu + 2.0 * (order + 1.0) / x * k_mu1;
        k_mu = k_mu1;
        k_mu1 = next;
        order += 1.0;
        if !k_mu1.is_finite() {
            return None;
        }
    }
    Some((k_mu, k_mu1))
}

/// Temme's series for `K_μ(x)` and `K_{μ+1}(x)`, |μ| ≤ 1/2, 0 < x ≤ 2.
fn temme_series(mu: f64, x: f64) -> Option<(f64, f64)> {
    let pimu = std::f64::consts::PI * mu;
    let fact = if pimu.abs() < 1e-12 {
        1.0
    } else {
        pimu / pimu.sin()
    };
    let d = -(0.5 * x).ln();
    let e = mu * d;
    let fact2 = if e.abs() < 1e-12 { 1.0 } else { e.sinh() / e };

    let (gam1, gam2) = temme_gammas(mu);
    let gampl = gam2 - mu * gam1; // 1/Γ(1+μ)
    let gammi = gam2 + mu * gam1; // 1/Γ(1−μ)

    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let e_exp = e.exp();
    let mut p = 0.5 * e_exp / gampl;
    let mut q = 0.5 / (e_exp * gammi);
    let mut c = 1.0;
    let d2 = 0.25 * x * x;
    let mut sum1 = p;

    for i in 1..=MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu * mu);
        c *= d2 / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * EPS {
            return Some((sum, sum1 * 2.0 / x));
        }
    }
    None
}

/// Steed's continued fraction CF2 for `K_μ(x)` and `K_{μ+1}(x)`, x > 2.
fn steed_cf2(mu: f64, x: f64) -> Option<(f64, f64)> {
    let a1 = 0.25 - mu * mu;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = delh;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;

    for i in 2..=MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            let h = a1 * h;
            let k_mu = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
            if k_mu == 0.0 {
                return None;
            }
            let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
            return Some((k_mu, k_mu1));
        }
    }
    None
}

/// Temme's auxiliary gamma combinations for |μ| ≤ 1/2:
/// `gam1 = [1/Γ(1−μ) − 1/Γ(1+μ)]/(2μ)` and `gam2 = [1/Γ(1−μ) + 1/Γ(1+μ)]/2`.
fn temme_gammas(mu: f64) -> (f64, f64) {
    let rg_plus = 1.0 / gamma(1.0 + mu);
    let rg_minus = 1.0 / gamma(1.0 - mu);
    let gam1 = if mu.abs() < 1e-6 {
        // limit of the difference quotient; O(μ²) correction is below f64 noise
        -EULER_GAMMA
    } else {
        (rg_minus - rg_plus) / (2.0 * mu)
    };
    let gam2 = 0.5 * (rg_minus + rg_plus);
    (gam1, gam2)
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}
