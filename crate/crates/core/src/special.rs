//! Complementary error function.

use std::f64::consts::FRAC_2_SQRT_PI;

/// `erfc(z)`: Maclaurin series of `erf` for `|z| < 2`, continued fraction beyond.
pub fn erfc(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        return 2.0 - erfc(-z);
    }
    if z < 2.0 {
        1.0 - erf_series(z)
    } else {
        erfc_continued_fraction(z)
    }
}

pub fn erf(z: f64) -> f64 {
    1.0 - erfc(z)
}

fn erf_series(z: f64) -> f64 {
    // erf(z) = 2/√π Σ (−1)ⁿ z^{2n+1} / (n! (2n+1))
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for n in 1..200 {
        term *= -z2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

fn erfc_continued_fraction(z: f64) -> f64 {
    // erfc(z) = e^{−z²}/√π · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    // evaluated with the modified Lentz algorithm.
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 * 0.5;
        d = z + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = z + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-z * z).exp() / (f * std::f64::consts::PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values computed at 30 significant digits
    const TABLE: [(f64, f64); 10] = [
        (0.1, 0.887_537_083_981_715_101_6),
        (0.5, 0.479_500_122_186_953_462_32),
        (1.0, 0.157_299_207_050_285_130_66),
        (1.9, 0.007_209_570_764_742_532_762_8),
        (2.0, 0.004_677_734_981_047_265_837_9),
        (2.1, 0.002_979_466_656_332_984_285_7),
        (3.0, 2.209_049_699_858_544_137_3e-5),
        (5.0, 1.537_459_794_428_034_850_2e-12),
        (10.0, 2.088_487_583_762_544_757e-45),
        (-1.5, 1.966_105_146_475_310_727_1),
    ];

    #[test]
    fn matches_reference_table() {
        for (z, want) in TABLE {
            let got = erfc(z);
            assert!(((got - want) / want).abs() < 1e-12, "erfc({z}) = {got}, want {want}");
        }
    }

    #[test]
    fn symmetry_and_limits() {
        assert_eq!(erfc(0.0), 1.0);
        assert!((erfc(0.7) + erfc(-0.7) - 2.0).abs() < 1e-15);
        assert_eq!(erfc(40.0), 0.0);
        assert!((erf(0.5) - (1.0 - 0.479_500_122_186_953_5)).abs() < 1e-15);
    }
}
