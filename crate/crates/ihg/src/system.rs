//! System builders for the incomplete kernel (the general matrix form and the
//! two explicit four-row systems), the published contiguity relations, and
//! their numerical verification.

use std::rc::Rc;

use serde::Serialize;

use crate::atlas::{region_membership_with_margin, EvaluationPoint, RegionTag};
use crate::error::{Error, Result};
use crate::quad::{boundary_term, phi_integral};
use crate::scalar::C64;
use crate::series::Parameters;
use crate::weyl::{
    apply, euler_op, symbol_values, DifferentialOperator, FunctionHandle, Poly, ALPHA1, ALPHA2,
    BETA, END_A, END_B, X11, X12, X21, X22,
};

/// Right-hand side of one system row.
#[derive(Clone)]
pub enum RhsDescriptor {
    Zero,
    /// The boundary term [g]_a^b of the kernel.
    BoundaryTerm,
    /// A caller-supplied holonomic inhomogeneity.
    Custom(Rc<dyn Fn(&EvaluationPoint) -> Result<C64>>),
}

impl std::fmt::Debug for RhsDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RhsDescriptor::Zero => f.write_str("Zero"),
            RhsDescriptor::BoundaryTerm => f.write_str("BoundaryTerm"),
            RhsDescriptor::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// General system data: a d x n integer matrix (n <= 4, columns mapped onto
/// the coordinates x11, x21, x12, x22 in order), complex parameters, toric
/// pairs, and the row inhomogeneities.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub a_matrix: Vec<Vec<i64>>,
    pub beta_vec: Vec<C64>,
    pub toric_pairs: Vec<(Vec<u32>, Vec<u32>)>,
    pub rhs: Vec<RhsDescriptor>,
}

/// Smith invariant factors of an integer matrix (destructive elimination).
fn smith_invariants(mut m: Vec<Vec<i64>>) -> Vec<i64> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut inv = Vec::new();
    let mut r0 = 0usize;
    let mut c0 = 0usize;
    while r0 < rows && c0 < cols {
        // find a pivot with minimal nonzero magnitude
        let mut pivot: Option<(usize, usize)> = None;
        for i in r0..rows {
            for j in c0..cols {
                if m[i][j] != 0
                    && pivot.map_or(true, |(pi, pj)| m[i][j].abs() < m[pi][pj].abs())
                {
                    pivot = Some((i, j));
                }
            }
        }
        let (pi, pj) = match pivot {
            None => break,
            Some(p) => p,
        };
        m.swap(r0, pi);
        for row in m.iter_mut() {
            row.swap(c0, pj);
        }
        // reduce the pivot row and column; repeat until clean
        loop {
            let p = m[r0][c0];
            let mut dirty = false;
            for i in r0 + 1..rows {
                let q = m[i][c0] / p;
                if q != 0 {
                    for j in c0..cols {
                        m[i][j] -= q * m[r0][j];
                    }
                }
                if m[i][c0] != 0 {
                    m.swap(r0, i);
                    dirty = true;
                    break;
                }
            }
            if dirty {
                continue;
            }
            for j in c0 + 1..cols {
                let q = m[r0][j] / p;
                if q != 0 {
                    for i in r0..rows {
                        m[i][j] -= q * m[i][c0];
                    }
                }
                if m[r0][j] != 0 {
                    for row in m.iter_mut() {
                        row.swap(c0, j);
                    }
                    dirty = true;
                    break;
                }
            }
            if !dirty {
                break;
            }
        }
        inv.push(m[r0][c0].abs());
        r0 += 1;
        c0 += 1;
    }
    inv
}

/// Build the system operators from `spec`: one Euler row per matrix row and
/// one binomial operator per toric pair.
pub fn build_system(spec: &SystemSpec) -> Result<Vec<(DifferentialOperator, RhsDescriptor)>> {
    let d = spec.a_matrix.len();
    if d == 0 {
        return Err(Error::Rank("empty matrix".into()));
    }
    let n = spec.a_matrix[0].len();
    if n > 4 {
        return Err(Error::Rank(format!("at most 4 columns supported, got {n}")));
    }
    if spec.a_matrix.iter().any(|r| r.len() != n) {
        return Err(Error::Rank("ragged matrix".into()));
    }
    if spec.beta_vec.len() != d || spec.rhs.len() != d {
        return Err(Error::Rank(format!(
            "need {d} parameters and {d} rhs descriptors"
        )));
    }
    let inv = smith_invariants(spec.a_matrix.clone());
    if inv.len() != d || inv.iter().any(|&f| f != 1) {
        return Err(Error::Rank(format!(
            "columns do not span Z^{d} (invariant factors {inv:?})"
        )));
    }
    let mut out = Vec::new();
    for (i, row) in spec.a_matrix.iter().enumerate() {
        let mut op = DifferentialOperator::from_poly(Poly::constant(-spec.beta_vec[i]));
        for (j, &aij) in row.iter().enumerate() {
            if aij != 0 {
                op = op.add(&DifferentialOperator::theta(j).scale(C64::new(aij as f64, 0.0)));
            }
        }
        out.push((op, spec.rhs[i].clone()));
    }
    for (u, v) in &spec.toric_pairs {
        if u.len() != n || v.len() != n {
            return Err(Error::ToricMismatch("pair length != n".into()));
        }
        for (i, row) in spec.a_matrix.iter().enumerate() {
            let au: i64 = row.iter().zip(u).map(|(&a, &ui)| a * ui as i64).sum();
            let av: i64 = row.iter().zip(v).map(|(&a, &vi)| a * vi as i64).sum();
            if au != av {
                return Err(Error::ToricMismatch(format!(
                    "A u != A v in row {i}: {au} vs {av}"
                )));
            }
        }
        let mono = |e: &[u32]| {
            let mut op = DifferentialOperator::identity();
            for (j, &ej) in e.iter().enumerate() {
                for _ in 0..ej {
                    op = op.compose(&DifferentialOperator::dd(j));
                }
            }
            op
        };
        out.push((mono(u).sub(&mono(v)), RhsDescriptor::Zero));
    }
    Ok(out)
}

/// The four rows of the inhomogeneous kernel system: the toric row in its
/// polynomial form x11 x22 (d11 d22 - d21 d12), the two exponent Euler rows,
/// and the weight row whose right side is the boundary term.
pub fn build_delta11_inhomogeneous(
    _p: &Parameters,
) -> Vec<(DifferentialOperator, RhsDescriptor)> {
    let x11x22 = Poly::symbol(X11).mul(&Poly::symbol(X22));
    let toric = DifferentialOperator::dd(X11)
        .compose(&DifferentialOperator::dd(X22))
        .sub(&DifferentialOperator::dd(X21).compose(&DifferentialOperator::dd(X12)))
        .scale_poly(&x11x22);
    vec![
        (toric, RhsDescriptor::Zero),
        (euler_op(0), RhsDescriptor::Zero),
        (euler_op(1), RhsDescriptor::Zero),
        (euler_op(2), RhsDescriptor::BoundaryTerm),
    ]
}

/// The homogeneous variant: the weight row is pre-multiplied by the two
/// first-order annihilators of the endpoint evaluations.
pub fn build_delta11_homogeneous(_p: &Parameters) -> Vec<DifferentialOperator> {
    let x11x22 = Poly::symbol(X11).mul(&Poly::symbol(X22));
    let toric = DifferentialOperator::dd(X11)
        .compose(&DifferentialOperator::dd(X22))
        .sub(&DifferentialOperator::dd(X21).compose(&DifferentialOperator::dd(X12)))
        .scale_poly(&x11x22);
    let ann_a = DifferentialOperator::dd(X22).sub(
        &DifferentialOperator::dd(X12).scale_poly(&Poly::symbol(END_A)),
    );
    let ann_b = DifferentialOperator::dd(X21).sub(
        &DifferentialOperator::dd(X11).scale_poly(&Poly::symbol(END_B)),
    );
    vec![
        toric,
        euler_op(0),
        euler_op(1),
        ann_a.compose(&ann_b).compose(&euler_op(2)),
    ]
}

// ---------------------------------------------------------------------------
// contiguity relations
// ---------------------------------------------------------------------------

/// All published contiguity relations for the kernel. `Minus`/`Plus` name the
/// direction of the column shift; `Hat` variants carry the boundary term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ContiguityId {
    MinusA1,
    PlusA1Hat,
    PlusA1,
    MinusA2,
    PlusA2Hat,
    PlusA2,
    MinusA3,
    PlusA3Hat,
    PlusA3,
    MinusA4,
    PlusA4Hat,
    PlusA4,
    MinusE3,
    MinusE3Hat,
    PlusE3,
    PlusE3Hat,
}

impl ContiguityId {
    pub const ALL: [ContiguityId; 16] = [
        ContiguityId::MinusA1,
        ContiguityId::PlusA1Hat,
        ContiguityId::PlusA1,
        ContiguityId::MinusA2,
        ContiguityId::PlusA2Hat,
        ContiguityId::PlusA2,
        ContiguityId::MinusA3,
        ContiguityId::PlusA3Hat,
        ContiguityId::PlusA3,
        ContiguityId::MinusA4,
        ContiguityId::PlusA4Hat,
        ContiguityId::PlusA4,
        ContiguityId::MinusE3,
        ContiguityId::MinusE3Hat,
        ContiguityId::PlusE3,
        ContiguityId::PlusE3Hat,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        let id = match s {
            "-a1" => ContiguityId::MinusA1,
            "+a1^" => ContiguityId::PlusA1Hat,
            "+a1" => ContiguityId::PlusA1,
            "-a2" => ContiguityId::MinusA2,
            "+a2^" => ContiguityId::PlusA2Hat,
            "+a2" => ContiguityId::PlusA2,
            "-a3" => ContiguityId::MinusA3,
            "+a3^" => ContiguityId::PlusA3Hat,
            "+a3" => ContiguityId::PlusA3,
            "-a4" => ContiguityId::MinusA4,
            "+a4^" => ContiguityId::PlusA4Hat,
            "+a4" => ContiguityId::PlusA4,
            "-e3" => ContiguityId::MinusE3,
            "-e3^" => ContiguityId::MinusE3Hat,
            "+e3" => ContiguityId::PlusE3,
            "+e3^" => ContiguityId::PlusE3Hat,
            other => return Err(Error::UnknownShift(other.into())),
        };
        Ok(id)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ContiguityId::MinusA1 => "-a1",
            ContiguityId::PlusA1Hat => "+a1^",
            ContiguityId::PlusA1 => "+a1",
            ContiguityId::MinusA2 => "-a2",
            ContiguityId::PlusA2Hat => "+a2^",
            ContiguityId::PlusA2 => "+a2",
            ContiguityId::MinusA3 => "-a3",
            ContiguityId::PlusA3Hat => "+a3^",
            ContiguityId::PlusA3 => "+a3",
            ContiguityId::MinusA4 => "-a4",
            ContiguityId::PlusA4Hat => "+a4^",
            ContiguityId::PlusA4 => "+a4",
            ContiguityId::MinusE3 => "-e3",
            ContiguityId::MinusE3Hat => "-e3^",
            ContiguityId::PlusE3 => "+e3",
            ContiguityId::PlusE3Hat => "+e3^",
        }
    }
}

impl std::fmt::Display for ContiguityId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A contiguity relation:
/// `operator . Phi(reference shifted by lhs_shift) =
///  scalar * Phi(reference shifted by rhs_shift) + boundary_coeff * [g]`,
/// with the polynomial symbols bound to the reference parameters and [g]
/// taken at the reference parameters.
#[derive(Debug, Clone)]
pub struct ContiguityRelation {
    pub id: ContiguityId,
    pub operator: DifferentialOperator,
    /// (d alpha1, d alpha2, d gamma) of the operand parameter point.
    pub lhs_shift: (i32, i32, i32),
    /// (d alpha1, d alpha2, d gamma) of the right-hand Phi.
    pub rhs_shift: (i32, i32, i32),
    pub scalar: Poly,
    pub boundary_coeff: Poly,
}

fn sym(i: usize) -> Poly {
    Poly::symbol(i)
}

/// alpha1 + alpha2 - beta
fn s_total() -> Poly {
    sym(ALPHA1).add(&sym(ALPHA2)).sub(&sym(BETA))
}

/// The hatted first-column raise: (x21 x12 - x11 x22) d22 + (alpha1+alpha2) x11.
fn op_plus_a1_hat() -> DifferentialOperator {
    let c = sym(X21).mul(&sym(X12)).sub(&sym(X11).mul(&sym(X22)));
    DifferentialOperator::term(c, [0, 0, 0, 1]).add(&DifferentialOperator::from_poly(
        sym(ALPHA1).add(&sym(ALPHA2)).mul(&sym(X11)),
    ))
}

/// The boundary-free first-column raise (order two).
fn op_plus_a1() -> DifferentialOperator {
    let apb = sym(END_A).add(&sym(END_B));
    let ab = sym(END_A).mul(&sym(END_B));
    let x21x22 = sym(X21).mul(&sym(X22));
    let one_minus_beta = Poly::one().sub(&sym(BETA));
    let mut op = DifferentialOperator::zero();
    op = op.add(&DifferentialOperator::term(
        x21x22.mul(&apb.mul(&sym(X21)).add(&sym(X11))),
        [0, 1, 0, 1],
    ));
    op = op.add(&DifferentialOperator::term(
        x21x22.mul(&apb.mul(&sym(X22)).add(&sym(X12))),
        [0, 0, 0, 2],
    ));
    op = op.add(&DifferentialOperator::term(
        x21x22.mul(&apb).mul(&one_minus_beta),
        [0, 0, 0, 1],
    ));
    op = op.add(&DifferentialOperator::term(
        x21x22.mul(&ab).mul(&sym(BETA)),
        [0, 0, 1, 0],
    ));
    op = op.add(&DifferentialOperator::term(
        x21x22.mul(&sym(X22)).mul(&ab).neg(),
        [0, 0, 1, 1],
    ));
    op = op.add(&DifferentialOperator::term(
        x21x22.mul(&sym(X21)).mul(&ab).neg(),
        [1, 0, 0, 1],
    ));
    op = op.add(&DifferentialOperator::term(
        s_total().mul(&sym(X21)).mul(&sym(X12)),
        [0, 0, 0, 1],
    ));
    op = op.add(&DifferentialOperator::from_poly(
        s_total().mul(&sym(ALPHA2)).mul(&sym(X11)),
    ));
    op
}

/// The hatted second-column raise: x11 x22 d12 + x21 x22 d22 + alpha1 x21.
fn op_plus_a2_hat() -> DifferentialOperator {
    DifferentialOperator::term(sym(X11).mul(&sym(X22)), [0, 0, 1, 0])
        .add(&DifferentialOperator::term(
            sym(X21).mul(&sym(X22)),
            [0, 0, 0, 1],
        ))
        .add(&DifferentialOperator::from_poly(
            sym(ALPHA1).mul(&sym(X21)),
        ))
}

/// The boundary-free second-column raise (order two).
///
/// Two corrections to the printed form, both fixed by numerical
/// verification against the integral: the trailing coordinate factor of the
/// middle group is an ordinary coefficient (the expression is already normal
/// ordered), and the operator as a whole carries the opposite sign.
fn op_plus_a2() -> DifferentialOperator {
    let apb = sym(END_A).add(&sym(END_B));
    let ab = sym(END_A).mul(&sym(END_B));
    let a1 = sym(ALPHA1);
    let a2 = sym(ALPHA2);
    let bet = sym(BETA);
    let x11 = sym(X11);
    let x12 = sym(X12);
    let x21 = sym(X21);
    let x22 = sym(X22);
    let mut op = DifferentialOperator::zero();
    let mut add = |coeff: Poly, d: [u8; 4]| {
        op = op.add(&DifferentialOperator::term(coeff, d));
    };
    // (a+b) x11 group
    add(apb.mul(&x11).mul(&a2).mul(&x21), [0, 1, 0, 0]);
    add(apb.mul(&x11).mul(&x21).mul(&x22).neg(), [0, 1, 0, 1]);
    add(apb.mul(&x11).mul(&x22).mul(&x22).neg(), [0, 0, 0, 2]);
    add(
        apb.mul(&x11).mul(&bet.add(&a2).sub(&Poly::real(2.0))).mul(&x22),
        [0, 0, 0, 1],
    );
    add(
        apb.mul(&x11).mul(&a2).mul(&bet.sub(&Poly::one())).neg(),
        [0, 0, 0, 0],
    );
    // a b group
    add(ab.mul(&x11).mul(&x22).mul(&x22), [0, 0, 1, 1]);
    add(
        ab.mul(&x11)
            .mul(&x22)
            .mul(&a2.add(&bet).sub(&Poly::one()))
            .neg(),
        [0, 0, 1, 0],
    );
    add(ab.mul(&a2).mul(&x21).mul(&x21), [0, 1, 0, 0]);
    add(ab.mul(&x21).mul(&x21).mul(&x22).neg(), [0, 1, 0, 1]);
    add(
        ab.mul(&x21).mul(&a1.sub(&Poly::one())).mul(&x22),
        [0, 0, 0, 1],
    );
    add(
        ab.mul(&x21)
            .mul(&a2)
            .mul(&a1.add(&bet).sub(&Poly::one()))
            .neg(),
        [0, 0, 0, 0],
    );
    // -x11 group
    add(x11.mul(&x12).mul(&x22).neg(), [0, 0, 0, 2]);
    add(
        x11.mul(&a1.sub(&bet).add(&Poly::one())).mul(&x12).neg(),
        [0, 0, 0, 1],
    );
    add(x11.mul(&x11).mul(&x22).neg(), [0, 1, 0, 1]);
    add(a2.mul(&x11).mul(&x11), [0, 1, 0, 0]);
    drop(add);
    op.scale(C64::new(-1.0, 0.0))
}

/// Swap the two coordinate pairs and the two exponents:
/// alpha1 <-> alpha2, x_i1 <-> x_i2, d_i1 <-> d_i2.
fn permute_pairs(op: &DifferentialOperator) -> DifferentialOperator {
    let mut out = DifferentialOperator::zero();
    for (d, poly) in op.terms() {
        let dp = [d[2], d[3], d[0], d[1]];
        let mut p_out = Poly::zero();
        // rebuild each monomial with swapped symbols
        for (mono, c) in poly_terms(poly) {
            let mut m = mono;
            m.swap(X11, X12);
            m.swap(X21, X22);
            m.swap(ALPHA1, ALPHA2);
            p_out = p_out.add(&poly_monomial(m, c));
        }
        out = out.add(&DifferentialOperator::term(p_out, dp));
    }
    out
}

// small helpers to walk Poly internals from this module
fn poly_terms(p: &Poly) -> Vec<([u8; crate::weyl::NSYM], C64)> {
    p.iter_terms().collect()
}

fn poly_monomial(m: [u8; crate::weyl::NSYM], c: C64) -> Poly {
    Poly::from_monomial(m, c)
}

/// The published relation for `id`, with the corrected second-column raise.
pub fn contiguity_op(id: ContiguityId) -> ContiguityRelation {
    use ContiguityId::*;
    match id {
        MinusA1 => ContiguityRelation {
            id,
            operator: DifferentialOperator::dd(X11),
            lhs_shift: (0, 0, 0),
            rhs_shift: (-1, 0, 0),
            scalar: sym(ALPHA1),
            boundary_coeff: Poly::zero(),
        },
        PlusA1Hat => ContiguityRelation {
            id,
            operator: op_plus_a1_hat(),
            lhs_shift: (-1, 0, 0),
            rhs_shift: (0, 0, 0),
            scalar: s_total(),
            boundary_coeff: Poly::one().neg(),
        },
        PlusA1 => ContiguityRelation {
            id,
            operator: op_plus_a1(),
            lhs_shift: (-1, 0, 0),
            rhs_shift: (0, 0, 0),
            scalar: sym(ALPHA2).mul(&s_total()),
            boundary_coeff: Poly::zero(),
        },
        MinusA2 => ContiguityRelation {
            id,
            operator: DifferentialOperator::dd(X21),
            lhs_shift: (0, 0, 0),
            rhs_shift: (-1, 0, 1),
            scalar: sym(ALPHA1),
            boundary_coeff: Poly::zero(),
        },
        PlusA2Hat => ContiguityRelation {
            id,
            operator: op_plus_a2_hat(),
            lhs_shift: (-1, 0, 1),
            rhs_shift: (0, 0, 0),
            scalar: sym(BETA),
            boundary_coeff: Poly::one(),
        },
        PlusA2 => ContiguityRelation {
            id,
            operator: op_plus_a2(),
            lhs_shift: (-1, 0, 1),
            rhs_shift: (0, 0, 0),
            scalar: sym(END_A)
                .mul(&sym(END_B))
                .mul(&sym(ALPHA2))
                .mul(&sym(BETA)),
            boundary_coeff: Poly::zero(),
        },
        MinusA3 => ContiguityRelation {
            id,
            operator: DifferentialOperator::dd(X12),
            lhs_shift: (0, 0, 0),
            rhs_shift: (0, -1, 0),
            scalar: sym(ALPHA2),
            boundary_coeff: Poly::zero(),
        },
        PlusA3Hat => ContiguityRelation {
            id,
            operator: permute_pairs(&op_plus_a1_hat()),
            lhs_shift: (0, -1, 0),
            rhs_shift: (0, 0, 0),
            scalar: s_total(),
            boundary_coeff: Poly::one().neg(),
        },
        PlusA3 => ContiguityRelation {
            id,
            operator: permute_pairs(&op_plus_a1()),
            lhs_shift: (0, -1, 0),
            rhs_shift: (0, 0, 0),
            scalar: sym(ALPHA1).mul(&s_total()),
            boundary_coeff: Poly::zero(),
        },
        MinusA4 => ContiguityRelation {
            id,
            operator: DifferentialOperator::dd(X22),
            lhs_shift: (0, 0, 0),
            rhs_shift: (0, -1, 1),
            scalar: sym(ALPHA2),
            boundary_coeff: Poly::zero(),
        },
        PlusA4Hat => ContiguityRelation {
            id,
            operator: permute_pairs(&op_plus_a2_hat()),
            lhs_shift: (0, -1, 1),
            rhs_shift: (0, 0, 0),
            scalar: sym(BETA),
            boundary_coeff: Poly::one(),
        },
        PlusA4 => ContiguityRelation {
            id,
            operator: permute_pairs(&op_plus_a2()),
            lhs_shift: (0, -1, 1),
            rhs_shift: (0, 0, 0),
            scalar: sym(END_A)
                .mul(&sym(END_B))
                .mul(&sym(ALPHA1))
                .mul(&sym(BETA)),
            boundary_coeff: Poly::zero(),
        },
        MinusE3 => ContiguityRelation {
            id,
            operator: op_plus_a1().compose(&DifferentialOperator::dd(X21)),
            lhs_shift: (0, 0, -1),
            rhs_shift: (0, 0, 0),
            scalar: sym(ALPHA1).mul(&sym(ALPHA2)).mul(&s_total()),
            boundary_coeff: Poly::zero(),
        },
        MinusE3Hat => ContiguityRelation {
            id,
            operator: op_plus_a1_hat().compose(&DifferentialOperator::dd(X21)),
            lhs_shift: (0, 0, -1),
            rhs_shift: (0, 0, 0),
            scalar: sym(ALPHA1).mul(&s_total()),
            boundary_coeff: sym(ALPHA1).neg(),
        },
        PlusE3 => ContiguityRelation {
            id,
            operator: op_plus_a2().compose(&DifferentialOperator::dd(X11)),
            lhs_shift: (0, 0, 1),
            rhs_shift: (0, 0, 0),
            scalar: sym(END_A)
                .mul(&sym(END_B))
                .mul(&sym(ALPHA1))
                .mul(&sym(ALPHA2))
                .mul(&sym(BETA)),
            boundary_coeff: Poly::zero(),
        },
        PlusE3Hat => ContiguityRelation {
            id,
            operator: op_plus_a2_hat().compose(&DifferentialOperator::dd(X11)),
            lhs_shift: (0, 0, 1),
            rhs_shift: (0, 0, 0),
            scalar: sym(ALPHA1).mul(&sym(BETA)),
            boundary_coeff: sym(ALPHA1),
        },
    }
}

/// How Phi and [g] are evaluated during verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMethod {
    Series,
    Oracle,
}

/// One verification record; serializes to the JSON report format.
#[derive(Debug, Clone, Serialize)]
pub struct ContiguityReport {
    pub relation: String,
    pub parameters: Parameters,
    pub point: [C64; 4],
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    pub method: VerifyMethod,
}

fn phi_handle(
    method: VerifyMethod,
    params: &Parameters,
    x: &EvaluationPoint,
) -> Result<FunctionHandle> {
    match method {
        VerifyMethod::Series => {
            let tags = region_membership_with_margin(x, params.a, params.b, 0.005)?;
            let tag = tags.first().copied().ok_or_else(|| {
                Error::OutsideConvergenceRegion(
                    "point lies in no series region; use the oracle method".into(),
                )
            })?;
            Ok(FunctionHandle::from_region_series(tag, *params))
        }
        VerifyMethod::Oracle => {
            let p = *params;
            Ok(FunctionHandle::from_fn(
                move |xp: &EvaluationPoint| phi_integral(&p, xp, 1e-12),
                p,
            ))
        }
    }
}

fn phi_value(method: VerifyMethod, params: &Parameters, x: &EvaluationPoint) -> Result<C64> {
    match method {
        VerifyMethod::Series => {
            let tags = region_membership_with_margin(x, params.a, params.b, 0.005)?;
            let tag = tags.first().copied().ok_or_else(|| {
                Error::OutsideConvergenceRegion("point lies in no series region".into())
            })?;
            Ok(crate::series::f_series(tag, params, x, 1e-13)?.value)
        }
        VerifyMethod::Oracle => phi_integral(params, x, 1e-12),
    }
}

/// Check one contiguity relation numerically at (p, x); `p` is the reference
/// parameter point the relation's symbols are bound to.
pub fn verify_contiguity(
    id: ContiguityId,
    p: &Parameters,
    x: &EvaluationPoint,
    method: VerifyMethod,
    tol: f64,
) -> Result<ContiguityReport> {
    let rel = contiguity_op(id);
    let p_lhs = p.shifted(rel.lhs_shift.0, rel.lhs_shift.1, rel.lhs_shift.2)?;
    let p_rhs = p.shifted(rel.rhs_shift.0, rel.rhs_shift.1, rel.rhs_shift.2)?;
    p.require_generic()?;
    p_lhs.require_generic()?;

    let handle = phi_handle(method, &p_lhs, x)?;
    let lhs = apply(&rel.operator, &handle, p, x, tol.min(1e-12))?;

    let vals = symbol_values(p, x);
    let mut rhs = rel.scalar.evaluate(&vals) * phi_value(method, &p_rhs, x)?;
    if !rel.boundary_coeff.is_zero() {
        rhs += rel.boundary_coeff.evaluate(&vals) * boundary_term(p, x, RegionTag::D22_21)?;
    }
    let residual = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-30);
    Ok(ContiguityReport {
        relation: id.name().to_string(),
        parameters: *p,
        point: x.coords(),
        lhs,
        rhs,
        residual,
        method,
    })
}

/// Verify the derivative-shift condition on the boundary term: d_k [g] at
/// reference parameters equals c_k^{-1} [g] at the k-th shifted parameters.
/// Column k is 0..3 for x11, x21, x12, x22; c_k^{-1} is alpha1, alpha1,
/// alpha2, alpha2 respectively.
#[derive(Debug, Clone, Serialize)]
pub struct GShiftReport {
    pub column: usize,
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    pub degenerate: bool,
}

pub fn check_g_shift_condition(
    k: usize,
    p: &Parameters,
    x: &EvaluationPoint,
) -> Result<GShiftReport> {
    if k > 3 {
        return Err(Error::Config(format!("column index {k} out of range")));
    }
    let (factor, shift) = match k {
        0 => (p.alpha1, (-1, 0, 0)),
        1 => (p.alpha1, (-1, 0, 1)),
        2 => (p.alpha2, (0, -1, 0)),
        _ => (p.alpha2, (0, -1, 1)),
    };
    let p_shift = p.shifted(shift.0, shift.1, shift.2)?;
    let pc = *p;
    let handle = FunctionHandle::from_fn(
        move |xp: &EvaluationPoint| boundary_term(&pc, xp, RegionTag::D22_21),
        pc,
    );
    let mut multi = [0u8; 4];
    multi[k] = 1;
    let lhs = handle.derivative_value(multi, x, 1e-12)?;
    let degenerate = factor.norm() <= 1e-9;
    let rhs = if degenerate {
        C64::new(0.0, 0.0)
    } else {
        factor * boundary_term(&p_shift, x, RegionTag::D22_21)?
    };
    let scale = if degenerate {
        1.0 + boundary_term(p, x, RegionTag::D22_21)?.norm()
    } else {
        lhs.norm().max(rhs.norm()).max(1e-30)
    };
    Ok(GShiftReport {
        column: k,
        lhs,
        rhs,
        residual: (lhs - rhs).norm() / scale,
        degenerate,
    })
}
