//! Domain atlas: the 2^7 simply connected sign domains D_d and the four
//! convergence regions, plus canonical base points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{C64, EPS_BD};

/// The four complex coefficients of the kernel (x11 + x21 t)(x12 + x22 t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationPoint {
    pub x11: C64,
    pub x21: C64,
    pub x12: C64,
    pub x22: C64,
}

impl EvaluationPoint {
    pub fn new(x11: C64, x21: C64, x12: C64, x22: C64) -> Self {
        EvaluationPoint { x11, x21, x12, x22 }
    }

    pub fn from_reals(x11: f64, x21: f64, x12: f64, x22: f64) -> Self {
        EvaluationPoint {
            x11: C64::new(x11, 0.0),
            x21: C64::new(x21, 0.0),
            x12: C64::new(x12, 0.0),
            x22: C64::new(x22, 0.0),
        }
    }

    pub fn coords(&self) -> [C64; 4] {
        [self.x11, self.x21, self.x12, self.x22]
    }

    pub fn conjugate(&self) -> Self {
        EvaluationPoint {
            x11: self.x11.conj(),
            x21: self.x21.conj(),
            x12: self.x12.conj(),
            x22: self.x22.conj(),
        }
    }

    /// The seven signed quantities whose imaginary parts cut out the D_d atlas:
    /// x11, x21, x12, x22, x21/x11, x22/x12, x21 x12 / (x11 x22).
    pub fn atlas_quantities(&self) -> [C64; 7] {
        [
            self.x11,
            self.x21,
            self.x12,
            self.x22,
            self.x21 / self.x11,
            self.x22 / self.x12,
            self.x21 * self.x12 / (self.x11 * self.x22),
        ]
    }
}

/// Sign vector d in {0,1}^7; d_i = 0 iff the i-th imaginary part is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DVector(pub [u8; 7]);

impl DVector {
    pub fn flipped(&self) -> DVector {
        let mut d = self.0;
        for b in &mut d {
            *b = 1 - *b;
        }
        DVector(d)
    }

    /// All 128 sign vectors.
    pub fn all() -> impl Iterator<Item = DVector> {
        (0u8..128).map(|bits| {
            let mut d = [0u8; 7];
            for (i, slot) in d.iter_mut().enumerate() {
                *slot = (bits >> i) & 1;
            }
            DVector(d)
        })
    }
}

impl std::fmt::Display for DVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{},{},{},{},{})",
            self.0[0], self.0[1], self.0[2], self.0[3], self.0[4], self.0[5], self.0[6]
        )
    }
}

/// The four series convergence regions of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    D12_11,
    D22_11,
    D12_21,
    D22_21,
}

impl RegionTag {
    pub const ALL: [RegionTag; 4] = [
        RegionTag::D12_11,
        RegionTag::D22_11,
        RegionTag::D12_21,
        RegionTag::D22_21,
    ];
}

impl std::fmt::Display for RegionTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RegionTag::D12_11 => "D12_11",
            RegionTag::D22_11 => "D22_11",
            RegionTag::D12_21 => "D12_21",
            RegionTag::D22_21 => "D22_21",
        };
        f.write_str(s)
    }
}

/// Classify x into its sign domain D_d.
///
/// Fails with `Boundary` naming the first of the seven imaginary parts that
/// vanishes (within `EPS_BD`, scaled by the quantity's magnitude).
pub fn classify_d(x: &EvaluationPoint) -> Result<DVector> {
    const NAMES: [&str; 7] = [
        "Im x11",
        "Im x21",
        "Im x12",
        "Im x22",
        "Im x21/x11",
        "Im x22/x12",
        "Im x21*x12/(x11*x22)",
    ];
    let q = x.atlas_quantities();
    let mut d = [0u8; 7];
    for i in 0..7 {
        let v = q[i];
        if !v.is_finite() || v.norm() == 0.0 {
            return Err(Error::Boundary(format!("{} undefined (zero coordinate)", NAMES[i])));
        }
        if v.im.abs() <= EPS_BD * (1.0 + v.norm()) {
            return Err(Error::Boundary(format!("{} vanishes", NAMES[i])));
        }
        d[i] = if v.im > 0.0 { 0 } else { 1 };
    }
    Ok(DVector(d))
}

/// The four absolute ratios |x21 t / x11| (t = b, a) and |x22 t / x12|
/// (t = b, a) that drive region membership.
fn ratios(x: &EvaluationPoint, a: f64, b: f64) -> [f64; 4] {
    let r1 = (x.x21 / x.x11).norm();
    let r2 = (x.x22 / x.x12).norm();
    [r1 * b, r1 * a, r2 * b, r2 * a]
}

fn in_region(x: &EvaluationPoint, a: f64, b: f64, tag: RegionTag, margin: f64) -> bool {
    let [r1b, r1a, r2b, r2a] = ratios(x, a, b);
    let lt = |v: f64| v < 1.0 - margin;
    // first factor: "11" wants |x21 t/x11| < 1; "21" wants the reciprocals < 1
    let f1 = match tag {
        RegionTag::D12_11 | RegionTag::D22_11 => lt(r1b) && lt(r1a),
        RegionTag::D12_21 | RegionTag::D22_21 => {
            r1b > 0.0 && r1a > 0.0 && lt(1.0 / r1b) && lt(1.0 / r1a)
        }
    };
    let f2 = match tag {
        RegionTag::D12_11 | RegionTag::D12_21 => lt(r2b) && lt(r2a),
        RegionTag::D22_11 | RegionTag::D22_21 => {
            r2b > 0.0 && r2a > 0.0 && lt(1.0 / r2b) && lt(1.0 / r2a)
        }
    };
    f1 && f2
}

/// Every region whose four strict inequalities hold at x. May be empty; the
/// four regions are pairwise disjoint so at most one tag is returned.
pub fn region_membership(x: &EvaluationPoint, a: f64, b: f64) -> Result<Vec<RegionTag>> {
    if !(0.0 <= a && a < b) {
        return Err(Error::Endpoint(format!("need 0 <= a < b, got a={a}, b={b}")));
    }
    Ok(RegionTag::ALL
        .iter()
        .copied()
        .filter(|&t| in_region(x, a, b, t, 0.0))
        .collect())
}

/// Region membership with the engine's safety margin (ratios <= 1 - margin).
pub fn region_membership_with_margin(
    x: &EvaluationPoint,
    a: f64,
    b: f64,
    margin: f64,
) -> Result<Vec<RegionTag>> {
    if !(0.0 <= a && a < b) {
        return Err(Error::Endpoint(format!("need 0 <= a < b, got a={a}, b={b}")));
    }
    Ok(RegionTag::ALL
        .iter()
        .copied()
        .filter(|&t| in_region(x, a, b, t, margin))
        .collect())
}

/// Canonical real positive base point: x11 = x12 = 1, x21 = 2 max(1/a, b),
/// x22 = 2 x21. Satisfies
/// 0 < x12/x22 < x11/x21 < a < b < x21/x11 < x22/x12 and lies in D22_21.
pub fn base_point(a: f64, b: f64) -> Result<EvaluationPoint> {
    if !(0.0 < a && a < b) {
        return Err(Error::Endpoint(format!("need 0 < a < b, got a={a}, b={b}")));
    }
    let x21 = 2.0 * (1.0 / a).max(b);
    Ok(EvaluationPoint::from_reals(1.0, x21, 1.0, 2.0 * x21))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn classify_example() {
        let x = EvaluationPoint::new(c(1.0, 1.0), c(1.0, 2.0), c(1.0, 1.0), c(1.0, 3.0));
        assert_eq!(classify_d(&x).unwrap(), DVector([0, 0, 0, 0, 0, 0, 1]));
    }

    #[test]
    fn classify_conjugation_flips() {
        let x = EvaluationPoint::new(c(1.0, 1.0), c(1.0, 2.0), c(1.0, 1.0), c(1.0, 3.0));
        let d = classify_d(&x).unwrap();
        assert_eq!(classify_d(&x.conjugate()).unwrap(), d.flipped());
    }

    #[test]
    fn classify_real_point_is_boundary() {
        let x = EvaluationPoint::from_reals(1.0, 2.0, 1.0, 3.0);
        match classify_d(&x) {
            Err(Error::Boundary(msg)) => assert!(msg.contains("Im x11"), "{msg}"),
            other => panic!("expected boundary error, got {other:?}"),
        }
    }

    #[test]
    fn region_example_d22_21() {
        let x = EvaluationPoint::from_reals(1.0, 2.0, 1.0, 3.0);
        let m = region_membership(&x, 0.8, 1.5).unwrap();
        assert_eq!(m, vec![RegionTag::D22_21]);
    }

    #[test]
    fn region_example_d12_11() {
        let x = EvaluationPoint::from_reals(10.0, 1.0, 10.0, 1.0);
        let m = region_membership(&x, 0.8, 1.5).unwrap();
        assert_eq!(m, vec![RegionTag::D12_11]);
    }

    #[test]
    fn region_boundary_excluded() {
        // |x21 b / x11| = 1 exactly
        let x = EvaluationPoint::from_reals(1.5, 1.0, 10.0, 1.0);
        let m = region_membership(&x, 0.8, 1.5).unwrap();
        assert!(!m.contains(&RegionTag::D12_11));
    }

    #[test]
    fn region_rejects_bad_endpoints() {
        let x = EvaluationPoint::from_reals(1.0, 2.0, 1.0, 3.0);
        assert!(region_membership(&x, 1.5, 0.8).is_err());
        assert!(region_membership(&x, -0.1, 0.8).is_err());
    }

    #[test]
    fn base_point_examples() {
        let p = base_point(0.8, 1.5).unwrap();
        assert_eq!(p, EvaluationPoint::from_reals(1.0, 3.0, 1.0, 6.0));
        let p = base_point(1.0, 2.0).unwrap();
        assert_eq!(p, EvaluationPoint::from_reals(1.0, 4.0, 1.0, 8.0));
        let p = base_point(0.1, 0.2).unwrap();
        assert_eq!(p, EvaluationPoint::from_reals(1.0, 20.0, 1.0, 40.0));
    }

    #[test]
    fn base_point_chain_and_membership() {
        for &(a, b) in &[(0.8, 1.5), (1.0, 2.0), (0.1, 0.2), (3.0, 9.0), (0.01, 50.0)] {
            let p = base_point(a, b).unwrap();
            let x11 = p.x11.re;
            let x21 = p.x21.re;
            let x12 = p.x12.re;
            let x22 = p.x22.re;
            assert!(0.0 < x12 / x22);
            assert!(x12 / x22 < x11 / x21);
            assert!(x11 / x21 < a);
            assert!(a < b);
            assert!(b < x21 / x11);
            assert!(x21 / x11 < x22 / x12);
            let m = region_membership(&p, a, b).unwrap();
            assert!(m.contains(&RegionTag::D22_21));
        }
    }

    #[test]
    fn scaled_base_points_hit_every_region() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a: f64 = rng.gen_range(0.05..2.0);
            let b: f64 = a + rng.gen_range(0.1..3.0);
            // construct a point inside each region from the ratio targets
            for tag in RegionTag::ALL {
                let r_small = 0.3 / b; // |x21/x11| for the "11" side
                let r_big = 1.0 / (0.3 * a); // for the "21" side
                let (r1, r2) = match tag {
                    RegionTag::D12_11 => (r_small, r_small),
                    RegionTag::D22_11 => (r_small, r_big),
                    RegionTag::D12_21 => (r_big, r_small),
                    RegionTag::D22_21 => (r_big, r_big),
                };
                let x = EvaluationPoint::from_reals(1.0, r1, 1.0, r2);
                let m = region_membership(&x, a, b).unwrap();
                assert_eq!(m, vec![tag], "a={a} b={b} tag={tag}");
            }
        }
    }
}
