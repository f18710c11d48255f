//! Symmetric Gauss quadrature rules on the reference triangle and
//! tensor-product Gauss rules on the reference square.

use crate::{Error, Result, Vec2};

/// Quadrature point in barycentric coordinates with weight (weights sum to 1;
/// multiply by the element measure to integrate).
#[derive(Clone, Copy, Debug)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Symmetric rule on the triangle. `order` is the number of points: 1, 3 or 7
/// (polynomial exactness degrees 1, 2 and 5).
pub fn triangle_rule(order: usize) -> Result<&'static [TriPoint]> {
    match order {
        1 => Ok(&RULE_1),
        3 => Ok(&RULE_3),
        7 => Ok(&RULE_7),
        _ => Err(Error::Config(format!(
            "triangle quadrature supports 1, 3 or 7 points, got {order}"
        ))),
    }
}

static RULE_1: [TriPoint; 1] = [TriPoint {
    bary: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    weight: 1.0,
}];

static RULE_3: [TriPoint; 3] = [
    TriPoint {
        bary: [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        weight: 1.0 / 3.0,
    },
    TriPoint {
        bary: [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        weight: 1.0 / 3.0,
    },
    TriPoint {
        bary: [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        weight: 1.0 / 3.0,
    },
];

const A1: f64 = 0.059_715_871_789_769_82;
const B1: f64 = 0.470_142_064_105_115_1;
const W1: f64 = 0.132_394_152_788_506_18;
const A2: f64 = 0.797_426_985_353_087_3;
const B2: f64 = 0.101_286_507_323_456_34;
const W2: f64 = 0.125_939_180_544_827_15;

static RULE_7: [TriPoint; 7] = [
    TriPoint {
        bary: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        weight: 0.225,
    },
    TriPoint {
        bary: [A1, B1, B1],
        weight: W1,
    },
    TriPoint {
        bary: [B1, A1, B1],
        weight: W1,
    },
    TriPoint {
        bary: [B1, B1, A1],
        weight: W1,
    },
    TriPoint {
        bary: [A2, B2, B2],
        weight: W2,
    },
    TriPoint {
        bary: [B2, A2, B2],
        weight: W2,
    },
    TriPoint {
        bary: [B2, B2, A2],
        weight: W2,
    },
];

/// Physical coordinates of a barycentric point on a triangle.
pub fn bary_to_point(v: [&Vec2; 3], bary: [f64; 3]) -> Vec2 {
    v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2]
}

/// 1D Gauss-Legendre nodes/weights on [-1, 1] for n = 1..=4.
pub fn gauss_1d(n: usize) -> Result<Vec<(f64, f64)>> {
    let s3 = 1.0 / 3f64.sqrt();
    let s35 = (3.0 / 5.0f64).sqrt();
    match n {
        1 => Ok(vec![(0.0, 2.0)]),
        2 => Ok(vec![(-s3, 1.0), (s3, 1.0)]),
        3 => Ok(vec![(-s35, 5.0 / 9.0), (0.0, 8.0 / 9.0), (s35, 5.0 / 9.0)]),
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            Ok(vec![(-b, wb), (-a, wa), (a, wa), (b, wb)])
        }
        _ => Err(Error::Config(format!(
            "gauss_1d supports 1..=4 points per axis, got {n}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // integrate x^i y^j over the unit right triangle; exact value is
    // i! j! / (i + j + 2)!
    fn monomial_integral(rule: &[TriPoint], i: u32, j: u32) -> f64 {
        let v0 = Vec2::new(0.0, 0.0);
        let v1 = Vec2::new(1.0, 0.0);
        let v2 = Vec2::new(0.0, 1.0);
        let area = 0.5;
        rule.iter()
            .map(|p| {
                let x = bary_to_point([&v0, &v1, &v2], p.bary);
                p.weight * area * x.x.powi(i as i32) * x.y.powi(j as i32)
            })
            .sum()
    }

    fn exact(i: u32, j: u32) -> f64 {
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        fact(i) * fact(j) / fact(i + j + 2)
    }

    #[test]
    fn degrees_of_exactness() {
        for (order, degree) in [(1usize, 1u32), (3, 2), (7, 5)] {
            let rule = triangle_rule(order).unwrap();
            for i in 0..=degree {
                for j in 0..=(degree - i) {
                    assert_relative_eq!(
                        monomial_integral(rule, i, j),
                        exact(i, j),
                        epsilon = 1e-14,
                        max_relative = 1e-13
                    );
                }
            }
        }
    }

    #[test]
    fn gauss_1d_integrates_cubics() {
        let rule = gauss_1d(2).unwrap();
        let int: f64 = rule.iter().map(|&(x, w)| w * (x * x * x + x * x)).sum();
        assert_relative_eq!(int, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn unsupported_order_rejected() {
        assert!(triangle_rule(4).is_err());
        assert!(gauss_1d(0).is_err());
    }
}
