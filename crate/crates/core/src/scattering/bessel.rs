//! Spherical Bessel functions and Legendre polynomials for partial-wave sums.
//!
//! y_l is computed by upward recurrence (stable), j_l by downward Miller
//! recurrence normalized against j_0 (stable), with rescaling guards for
//! extreme arguments.

/// Spherical Bessel functions j_l(x), y_l(x) for l = 0..=l_max, x > 0.
///
/// Entries of y may saturate to -inf for small x at high l; callers forming
/// ratios j/y get the correct zero limit.
pub fn spherical_j_y(l_max: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(x > 0.0, "spherical_j_y requires x > 0");
    let n = l_max + 1;

    // y_l upward
    let mut y = vec![0.0f64; n];
    y[0] = -x.cos() / x;
    if n > 1 {
        y[1] = -x.cos() / (x * x) - x.sin() / x;
        for l in 1..n - 1 {
            let next = (2 * l + 1) as f64 / x * y[l] - y[l - 1];
            y[l + 1] = if next.is_finite() && next.abs() < 1e280 {
                next
            } else {
                f64::NEG_INFINITY
            };
            if y[l + 1].is_infinite() {
                for item in y.iter_mut().take(n).skip(l + 2) {
                    *item = f64::NEG_INFINITY;
                }
                break;
            }
        }
    }

    // j_l downward (Miller), start well above l_max
    let start = l_max + 16 + (1.5 * x) as usize;
    let mut jp = 0.0f64; // j_{l+1}
    let mut jc = 1e-30f64; // j_l
    let mut j = vec![0.0f64; n];
    for l in (0..=start).rev() {
        let jm = (2 * l + 3) as f64 / x * jc - jp;
        jp = jc;
        jc = jm;
        if l <= l_max {
            j[l] = jc; // unnormalized j_l after the update at index l
        }
        if jc.abs() > 1e250 {
            let s = 1e-250;
            jc *= s;
            jp *= s;
            for v in j.iter_mut() {
                *v *= s;
            }
        }
    }
    let j0 = x.sin() / x;
    let scale = j0 / jc;
    for v in j.iter_mut() {
        *v *= scale;
    }
    (j, y)
}

/// Legendre polynomials P_l(u) for l = 0..=l_max.
pub fn legendre_all(l_max: usize, u: f64) -> Vec<f64> {
    let mut p = vec![0.0f64; l_max + 1];
    p[0] = 1.0;
    if l_max >= 1 {
        p[1] = u;
        for l in 1..l_max {
            p[l + 1] = ((2 * l + 1) as f64 * u * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn low_orders_match_closed_forms() {
        for &x in &[0.3, 1.0, 4.7, 20.0] {
            let (j, y) = spherical_j_y(3, x);
            assert_relative_eq!(j[0], x.sin() / x, max_relative = 1e-12);
            assert_relative_eq!(j[1], x.sin() / (x * x) - x.cos() / x, max_relative = 1e-10);
            assert_relative_eq!(y[0], -x.cos() / x, max_relative = 1e-12);
            assert_relative_eq!(y[1], -x.cos() / (x * x) - x.sin() / x, max_relative = 1e-12);
        }
    }

    #[test]
    fn wronskian_identity() {
        // j_{l+1} y_l - j_l y_{l+1} = 1/x^2
        for &x in &[0.05, 0.9, 3.3, 12.0] {
            let (j, y) = spherical_j_y(10, x);
            for l in 0..10 {
                if y[l + 1].is_infinite() {
                    continue;
                }
                assert_relative_eq!(
                    j[l + 1] * y[l] - j[l] * y[l + 1],
                    1.0 / (x * x),
                    max_relative = 1e-9
                );
            }
        }
    }

    #[test]
    fn tiny_argument_ratios_vanish() {
        let (j, y) = spherical_j_y(40, 1e-3);
        for l in 5..=40 {
            let t = j[l] / y[l];
            assert!(t.abs() < 1e-10 || t == 0.0, "l={l}, t={t}");
        }
    }

    #[test]
    fn legendre_values() {
        let p = legendre_all(4, 0.5);
        assert_relative_eq!(p[2], 0.5 * (3.0 * 0.25 - 1.0), max_relative = 1e-14);
        assert_relative_eq!(p[4], (35.0 * 0.5f64.powi(4) - 30.0 * 0.25 + 3.0) / 8.0, max_relative = 1e-13);
        // P_l(1) = 1
        let p1 = legendre_all(8, 1.0);
        for v in p1 {
            assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        }
    }
}
