//! Modified Bessel function of the second kind for real order.
//!
//! The order is reduced to mu in [-1/2, 1/2], K_mu and K_{mu+1} come from
//! Temme's series (x < 2) or Steed's continued fraction (x >= 2), and forward
//! recurrence climbs to the requested order.

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const MAX_IT: usize = 10_000;
const X_SPLIT: f64 = 2.0;

// Taylor coefficients of 1/Gamma(z) = sum_k C[k-1] z^k.
const RGAMMA: [f64; 28] = [
    1.0,
    0.5772156649015329,
    -0.6558780715202539,
    -0.04200263503409524,
    0.16653861138229148,
    -0.04219773455554433,
    -0.009621971527876973,
    0.0072189432466631,
    -0.0011651675918590652,
    -0.00021524167411495098,
    0.0001280502823881162,
    -2.013485478078824e-05,
    -1.2504934821426706e-06,
    1.133027231981696e-06,
    -2.056338416977607e-07,
    6.116095104481416e-09,
    5.002007644469223e-09,
    -1.18127457048702e-09,
    1.0434267116911005e-10,
    7.782263439905071e-12,
    -3.696805618642206e-12,
    5.100370287454476e-13,
    -2.0583260535665066e-14,
    -5.348122539423018e-15,
    1.2267786282382608e-15,
    -1.1812593016974588e-16,
    1.1866922547516004e-18,
    1.4123806553180319e-18,
];

/// Returns (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) for |mu| <= 1/2, where
/// gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) and
/// gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let horner = |t: f64, coefs: &mut dyn Iterator<Item = f64>| coefs.fold(0.0, |acc, c| acc * t + c);
    let plus = horner(mu, &mut RGAMMA.iter().rev().copied());
    let minus = horner(-mu, &mut RGAMMA.iter().rev().copied());
    // Odd powers cancel in gam1 and even powers in gam2, leaving series in mu^2.
    let mu2 = mu * mu;
    let gam1 = -horner(mu2, &mut RGAMMA.iter().skip(1).step_by(2).rev().copied());
    let gam2 = horner(mu2, &mut RGAMMA.iter().step_by(2).rev().copied());
    (gam1, gam2, plus, minus)
}

/// exp(x) K_nu(x) for x > 0.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() || !nu.is_finite() {
        return Err(Error::Domain { func: "bessel_k", detail: format!("need finite x > 0, got x = {x}, nu = {nu}") });
    }
    let nu = nu.abs();
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut rkmu, mut rk1);
    if x < X_SPLIT {
        let x2 = 0.5 * x;
        let pimu = std::f64::consts::PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let mut converged = false;
        for i in 1..=MAX_IT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            let del1 = c * (p - fi * ff);
            sum1 += del1;
            if del.abs() < sum.abs() * EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Quadrature("bessel_k series did not converge".into()));
        }
        let ex = x.exp();
        rkmu = sum * ex;
        rk1 = sum1 * xi2 * ex;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut converged = false;
        for i in 1..=MAX_IT {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Quadrature("bessel_k continued fraction did not converge".into()));
        }
        h *= a1;
        rkmu = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
        rk1 = rkmu * (mu + x + 0.5 - h) * xi;
    }
    for i in 1..=nl {
        let next = (mu + i as f64) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = next;
    }
    if !rkmu.is_finite() {
        return Err(Error::Overflow("bessel_k"));
    }
    Ok(rkmu)
}

/// K_nu(x) for x > 0; errors when the value over- or underflows.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let s = bessel_k_scaled(nu, x)?;
    let v = s * (-x).exp();
    if v == 0.0 || !v.is_finite() {
        return Err(Error::Overflow("bessel_k (value outside the representable range)"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    // 40-digit reference values (mpmath.besselk).
    const K_REF: &[(f64, f64, f64)] = &[
        (0.5, 1.0, 0.46106850444789454),
        (0.3, 2.0, 0.11603697434811926),
        (2.0, 3.7, 0.025159327544450043),
        (0.0, 0.1, 2.4270690247020164),
        (0.8, 1e-3, 254.57868042422385),
        (5.3, 0.7, 4827.957524693291),
        (1.7, 25.0, 3.666149344462583e-12),
        (0.2, 600.0, 1.355873688436711e-262),
        (12.5, 3.0, 354693.4258328993),
        (0.0, 2.0, 0.11389387274953344),
        (3.0, 2.0, 0.6473853909486341),
        (0.45, 1.99, 0.12025709395013072),
        (0.45, 2.01, 0.11729767107787566),
    ];

    #[test]
    fn matches_reference_values() {
        for &(nu, x, k) in K_REF {
            let v = bessel_k(nu, x).unwrap();
            assert!(((v - k) / k).abs() < 1e-12, "K_{nu}({x}) = {v}, want {k}");
        }
    }

    #[test]
    fn half_integer_and_parity() {
        let v = bessel_k(0.5, 1.0).unwrap();
        let exact = (std::f64::consts::PI / 2.0).sqrt() * (-1.0f64).exp();
        assert!((v - exact).abs() < 1e-14);
        assert_eq!(bessel_k(-0.3, 2.0).unwrap(), bessel_k(0.3, 2.0).unwrap());
    }

    #[test]
    fn integral_representation() {
        // K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt
        let (nu, x) = (2.0, 3.7);
        let q = integrate(|t: f64| (-x * t.cosh()).exp() * (nu * t).cosh(), 0.0, 12.0, Tolerance::new(1e-15, 1e-13))
            .unwrap();
        assert!((bessel_k(nu, x).unwrap() - q).abs() < 1e-9);
    }

    #[test]
    fn domain_and_range_errors() {
        assert!(bessel_k(1.0, 0.0).is_err());
        assert!(bessel_k(1.0, -1.0).is_err());
        assert!(bessel_k(0.0, 800.0).is_err());
        assert!(bessel_k_scaled(0.0, 800.0).is_ok());
    }
}
