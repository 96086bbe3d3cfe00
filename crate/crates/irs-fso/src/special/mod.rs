//! Special functions: complex erf, Q-function, K_nu and the Gamma-Gamma law.

pub mod bessel;
pub mod faddeeva;

pub use bessel::{bessel_k, bessel_k_scaled};
pub use faddeeva::{cerf, erf_diff_scaled, faddeeva_w, Scaled};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, Tolerance};

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
pub fn qfunc(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

fn check_shape(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::Domain { func: "gamma_gamma", detail: format!("need alpha, beta > 0, got {alpha}, {beta}") });
    }
    Ok(())
}

/// Unit-mean Gamma-Gamma density, evaluated in the log domain.
pub fn gamma_gamma_pdf(h: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_shape(alpha, beta)?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain { func: "gamma_gamma_pdf", detail: format!("need h > 0, got {h}") });
    }
    let ab = alpha * beta;
    let x = 2.0 * (ab * h).sqrt();
    let kscaled = bessel_k_scaled(alpha - beta, x)?;
    let log = std::f64::consts::LN_2 + 0.5 * (alpha + beta) * (ab * h).ln() - ln_gamma(alpha) - ln_gamma(beta) - h.ln()
        + kscaled.ln()
        - x;
    Ok(log.exp())
}

/// P(h_a <= h). Pass `f64::INFINITY` for the total mass.
///
/// The integral runs in u = h^m with m = min(alpha, beta), which removes the
/// h^(m-1) behavior at the origin, and is split at decades of h.
pub fn gamma_gamma_cdf(h: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_shape(alpha, beta)?;
    if h.is_nan() || h < 0.0 {
        return Err(Error::Domain { func: "gamma_gamma_cdf", detail: format!("need h >= 0, got {h}") });
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    // Beyond the median the complement is computed instead, so both halves
    // are integrated where their mass is.
    let pivot = 1.0;
    if h <= pivot {
        Ok(lower_mass(h, alpha, beta)?.clamp(0.0, 1.0))
    } else {
        let below = lower_mass(pivot, alpha, beta)?;
        let above = upper_mass(pivot, h, alpha, beta)?;
        let total = upper_mass(pivot, f64::INFINITY, alpha, beta)?;
        Ok((below + above).min(below + total).clamp(0.0, 1.0))
    }
}

fn pdf_or_zero(h: f64, alpha: f64, beta: f64) -> f64 {
    if h > 0.0 && h.is_finite() {
        gamma_gamma_pdf(h, alpha, beta).unwrap_or(0.0)
    } else {
        0.0
    }
}

const CDF_TOL: Tolerance = Tolerance { abs: 1e-11, rel: 1e-11, max_depth: 60 };

fn lower_mass(h: f64, alpha: f64, beta: f64) -> Result<f64> {
    let m = alpha.min(beta).min(1.0);
    let inv = 1.0 / m;
    let f = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let x = u.powf(inv);
        pdf_or_zero(x, alpha, beta) * inv * x / u
    };
    // Decade breakpoints in h, mapped into u.
    let mut pts = vec![0.0];
    let mut edge = h * 1e-12;
    while edge < h {
        pts.push(edge.powf(m));
        edge *= 10.0;
    }
    pts.push(h.powf(m));
    integrate_pieces(f, &pts, CDF_TOL)
}

fn upper_mass(lo: f64, hi: f64, alpha: f64, beta: f64) -> Result<f64> {
    // The density decays like exp(-2 sqrt(alpha beta h)); stop doubling once
    // the remaining tail is far below the accuracy target.
    let ab = alpha * beta;
    let mut pts = vec![lo];
    let mut edge = lo;
    loop {
        edge *= 2.0;
        if edge >= hi {
            pts.push(hi);
            break;
        }
        pts.push(edge);
        if 2.0 * (ab * edge).sqrt() > 80.0 + (alpha + beta) * edge.ln().max(0.0) {
            break;
        }
    }
    integrate_pieces(|x: f64| pdf_or_zero(x, alpha, beta), &pts, CDF_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Gamma};

    #[test]
    fn qfunc_values() {
        assert_eq!(qfunc(0.0), 0.5);
        // Tail of the Gaussian by quadrature.
        let tail = integrate(
            |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            1.0,
            40.0,
            Tolerance::new(1e-15, 1e-13),
        )
        .unwrap();
        assert!((qfunc(1.0) - tail).abs() < 1e-12);
        assert!((qfunc(1.0) - 0.158655).abs() < 1e-6);
        assert!((qfunc(2.3) + qfunc(-2.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pdf_normalization_and_mean() {
        let pts = [0.0, 1e-6, 1e-3, 0.1, 1.0, 5.0, 20.0, 80.0, 300.0];
        let tol = Tolerance::new(1e-12, 1e-12);
        let mass = integrate_pieces(|h: f64| pdf_or_zero(h, 2.0, 2.0), &pts, tol).unwrap();
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
        let mean = integrate_pieces(|h: f64| h * pdf_or_zero(h, 2.0, 2.0), &pts, tol).unwrap();
        assert!((mean - 1.0).abs() < 1e-4, "{mean}");
    }

    #[test]
    fn pdf_matches_product_convolution() {
        // Density of X*Y with X ~ Gamma(a, rate a), Y ~ Gamma(b, rate b):
        // f(h) = int f_X(x) f_Y(h/x) / x dx.
        let (a, b, h) = (4.2, 1.4, 1.0);
        let gpdf = |s: f64, x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                (s * s.ln() + (s - 1.0) * x.ln() - s * x - ln_gamma(s)).exp()
            }
        };
        let conv = integrate_pieces(
            |x: f64| gpdf(a, x) * gpdf(b, h / x) / x,
            &[0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 60.0],
            Tolerance::new(1e-13, 1e-12),
        )
        .unwrap();
        let v = gamma_gamma_pdf(h, a, b).unwrap();
        assert!((v - conv).abs() < 1e-6, "{v} vs {conv}");
    }

    #[test]
    fn pdf_symmetric_in_shapes() {
        for h in [0.01, 0.3, 1.0, 4.0] {
            let a = gamma_gamma_pdf(h, 2.7, 1.2).unwrap();
            let b = gamma_gamma_pdf(h, 1.2, 2.7).unwrap();
            assert!((a - b).abs() <= 1e-13 * a);
        }
        assert!(gamma_gamma_pdf(0.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn cdf_limits_and_small_shapes() {
        assert_eq!(gamma_gamma_cdf(0.0, 2.0, 2.0).unwrap(), 0.0);
        assert!((gamma_gamma_cdf(f64::INFINITY, 2.0, 2.0).unwrap() - 1.0).abs() < 1e-6);
        assert!((gamma_gamma_cdf(f64::INFINITY, 0.6, 3.5).unwrap() - 1.0).abs() < 1e-6);
        assert!(gamma_gamma_cdf(-1.0, 2.0, 2.0).is_err());
        let mut last = 0.0;
        for i in 1..60 {
            let v = gamma_gamma_cdf(i as f64 * 0.1, 0.7, 2.5).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn cdf_matches_monte_carlo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let gx = Gamma::new(2.0, 0.5).unwrap();
        let n = 1_000_000;
        let hits = (0..n).filter(|_| gx.sample(&mut rng) * gx.sample(&mut rng) <= 1.0).count();
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let c = gamma_gamma_cdf(1.0, 2.0, 2.0).unwrap();
        assert!((c - p).abs() < 3.0 * se, "{c} vs {p} ± {se}");
    }
}
