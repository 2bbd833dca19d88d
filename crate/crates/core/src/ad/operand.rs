use std::fmt;

use crate::sparse::CsrMatrix;

use super::AdError;

/// Value and Jacobian of a vector-valued expression with respect to the global dof vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdValue {
    pub val: Vec<f64>,
    /// `val.len() x total_dofs`.
    pub jac: CsrMatrix,
}

impl AdValue {
    pub fn new(val: Vec<f64>, jac: CsrMatrix) -> Self {
        assert_eq!(val.len(), jac.nrows(), "AdValue rows must match value length");
        Self { val, jac }
    }

    /// A constant vector: zero Jacobian over `total_dofs` columns.
    pub fn constant(val: Vec<f64>, total_dofs: usize) -> Self {
        let n = val.len();
        Self { val, jac: CsrMatrix::zeros(n, total_dofs) }
    }

    pub fn len(&self) -> usize {
        self.val.len()
    }

    pub fn is_empty(&self) -> bool {
        self.val.is_empty()
    }
}

/// The operand kinds that participate in arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Scalar(f64),
    Dense(Vec<f64>),
    Sparse(CsrMatrix),
    Ad(AdValue),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperandKind {
    Scalar,
    Dense,
    Sparse,
    Ad,
}

impl OperandKind {
    pub const ALL: [OperandKind; 4] = [OperandKind::Scalar, OperandKind::Dense, OperandKind::Sparse, OperandKind::Ad];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OperandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OperandKind::Scalar => "scalar",
            OperandKind::Dense => "dense",
            OperandKind::Sparse => "sparse",
            OperandKind::Ad => "ad",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    MatMul,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 6] =
        [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Pow, BinaryOp::MatMul];

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "**",
            BinaryOp::MatMul => "@",
        }
    }
}

impl fmt::Display for BinaryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

use OperandKind::{Ad as A, Dense as D, Scalar as S, Sparse as M};

const X: Option<OperandKind> = None;

/// Result kind of `left op right`, indexed `[op][left][right]`; `None` marks a
/// combination that raises [`AdError::UnsupportedCombination`].
///
/// Row order of each block is scalar, dense, sparse, ad.
pub const COMBINATION_TABLE: [[[Option<OperandKind>; 4]; 4]; 6] = [
    // add
    [
        [Some(S), Some(D), X, Some(A)],
        [Some(D), Some(D), X, Some(A)],
        [X, X, Some(M), X],
        [Some(A), Some(A), X, Some(A)],
    ],
    // sub
    [
        [Some(S), Some(D), X, Some(A)],
        [Some(D), Some(D), X, Some(A)],
        [X, X, Some(M), X],
        [Some(A), Some(A), X, Some(A)],
    ],
    // mul (elementwise; scalar scales a matrix)
    [
        [Some(S), Some(D), Some(M), Some(A)],
        [Some(D), Some(D), X, Some(A)],
        [Some(M), X, X, X],
        [Some(A), Some(A), X, Some(A)],
    ],
    // div
    [
        [Some(S), Some(D), X, Some(A)],
        [Some(D), Some(D), X, Some(A)],
        [Some(M), X, X, X],
        [Some(A), Some(A), X, Some(A)],
    ],
    // pow (AD base only with a constant scalar exponent)
    [
        [Some(S), Some(D), X, X],
        [Some(D), Some(D), X, X],
        [X, X, X, X],
        [Some(A), X, X, X],
    ],
    // matmul (constant matrix on the left)
    [
        [X, X, X, X],
        [X, X, X, X],
        [X, Some(D), Some(M), Some(A)],
        [X, X, X, X],
    ],
];

pub fn result_kind(op: BinaryOp, left: OperandKind, right: OperandKind) -> Option<OperandKind> {
    COMBINATION_TABLE[op as usize][left.index()][right.index()]
}

impl Operand {
    pub fn kind(&self) -> OperandKind {
        match self {
            Operand::Scalar(_) => OperandKind::Scalar,
            Operand::Dense(_) => OperandKind::Dense,
            Operand::Sparse(_) => OperandKind::Sparse,
            Operand::Ad(_) => OperandKind::Ad,
        }
    }

    /// Converts a vector-valued operand to an [`AdValue`] over `total_dofs` columns.
    pub fn into_ad(self, total_dofs: usize) -> Result<AdValue, AdError> {
        match self {
            Operand::Ad(a) => Ok(a),
            Operand::Dense(v) => Ok(AdValue::constant(v, total_dofs)),
            Operand::Scalar(s) => Ok(AdValue::constant(vec![s], total_dofs)),
            Operand::Sparse(_) => Err(AdError::ShapeMismatch("a sparse matrix is not a vector value".into())),
        }
    }

    /// Plain values of a vector-valued operand.
    pub fn values(&self) -> Result<Vec<f64>, AdError> {
        match self {
            Operand::Ad(a) => Ok(a.val.clone()),
            Operand::Dense(v) => Ok(v.clone()),
            Operand::Scalar(s) => Ok(vec![*s]),
            Operand::Sparse(_) => Err(AdError::ShapeMismatch("a sparse matrix is not a vector value".into())),
        }
    }
}

fn check_len(op: BinaryOp, a: usize, b: usize) -> Result<(), AdError> {
    if a == b {
        Ok(())
    } else {
        Err(AdError::ShapeMismatch(format!("operands of `{op}` have lengths {a} and {b}")))
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn elementwise(op: BinaryOp, x: f64, y: f64) -> f64 {
    match op {
        BinaryOp::Add => x + y,
        BinaryOp::Sub => x - y,
        BinaryOp::Mul => x * y,
        BinaryOp::Div => x / y,
        BinaryOp::Pow => x.powf(y),
        BinaryOp::MatMul => unreachable!("matmul is not elementwise"),
    }
}

/// Combines two operands, returning the exact value and Jacobian of the result.
pub fn combine(left: &Operand, op: BinaryOp, right: &Operand) -> Result<Operand, AdError> {
    if result_kind(op, left.kind(), right.kind()).is_none() {
        return Err(AdError::UnsupportedCombination { op, left: left.kind(), right: right.kind() });
    }
    use Operand::*;
    let out = match (left, right) {
        (Scalar(a), Scalar(b)) => Scalar(elementwise(op, *a, *b)),
        (Scalar(a), Dense(b)) => Dense(b.iter().map(|&y| elementwise(op, *a, y)).collect()),
        (Dense(a), Scalar(b)) => Dense(a.iter().map(|&x| elementwise(op, x, *b)).collect()),
        (Dense(a), Dense(b)) => {
            check_len(op, a.len(), b.len())?;
            Dense(zip_with(a, b, |x, y| elementwise(op, x, y)))
        }
        (Sparse(a), Sparse(b)) => match op {
            BinaryOp::Add | BinaryOp::Sub => {
                if a.shape() != b.shape() {
                    return Err(AdError::ShapeMismatch(format!(
                        "sparse `{op}` of {:?} and {:?}",
                        a.shape(),
                        b.shape()
                    )));
                }
                Sparse(if op == BinaryOp::Add { a.add(b) } else { a.sub(b) })
            }
            _ => {
                check_len(op, a.ncols(), b.nrows())?;
                Sparse(a.matmul(b))
            }
        },
        (Scalar(s), Sparse(m)) => Sparse(m.scale(*s)),
        (Sparse(m), Scalar(s)) => Sparse(if op == BinaryOp::Mul { m.scale(*s) } else { m.scale(1.0 / s) }),
        (Sparse(m), Dense(v)) => {
            check_len(op, m.ncols(), v.len())?;
            Dense(m.matvec(v))
        }
        (Sparse(m), Ad(x)) => {
            check_len(op, m.ncols(), x.len())?;
            Ad(AdValue { val: m.matvec(&x.val), jac: m.matmul(&x.jac) })
        }
        (Ad(x), Scalar(s)) => Ad(ad_scalar(x, op, *s, false)),
        (Scalar(s), Ad(x)) => Ad(ad_scalar(x, op, *s, true)),
        (Ad(x), Dense(v)) => {
            check_len(op, x.len(), v.len())?;
            Ad(ad_dense(x, op, v, false))
        }
        (Dense(v), Ad(x)) => {
            check_len(op, x.len(), v.len())?;
            Ad(ad_dense(x, op, v, true))
        }
        (Ad(x), Ad(y)) => {
            check_len(op, x.len(), y.len())?;
            if x.jac.ncols() != y.jac.ncols() {
                return Err(AdError::ShapeMismatch("AD operands over different dof counts".into()));
            }
            Ad(ad_ad(x, op, y))
        }
        _ => unreachable!("combination table and dispatch disagree"),
    };
    Ok(out)
}

fn ad_scalar(x: &AdValue, op: BinaryOp, s: f64, scalar_left: bool) -> AdValue {
    match (op, scalar_left) {
        (BinaryOp::Add, _) => AdValue { val: x.val.iter().map(|&v| v + s).collect(), jac: x.jac.clone() },
        (BinaryOp::Sub, false) => AdValue { val: x.val.iter().map(|&v| v - s).collect(), jac: x.jac.clone() },
        (BinaryOp::Sub, true) => AdValue { val: x.val.iter().map(|&v| s - v).collect(), jac: x.jac.scale(-1.0) },
        (BinaryOp::Mul, _) => AdValue { val: x.val.iter().map(|&v| v * s).collect(), jac: x.jac.scale(s) },
        (BinaryOp::Div, false) => AdValue { val: x.val.iter().map(|&v| v / s).collect(), jac: x.jac.scale(1.0 / s) },
        (BinaryOp::Div, true) => {
            let d: Vec<f64> = x.val.iter().map(|&v| -s / (v * v)).collect();
            AdValue { val: x.val.iter().map(|&v| s / v).collect(), jac: x.jac.scale_rows(&d) }
        }
        (BinaryOp::Pow, false) => {
            let d: Vec<f64> = x.val.iter().map(|&v| s * v.powf(s - 1.0)).collect();
            AdValue { val: x.val.iter().map(|&v| v.powf(s)).collect(), jac: x.jac.scale_rows(&d) }
        }
        _ => unreachable!("excluded by the combination table"),
    }
}

fn ad_dense(x: &AdValue, op: BinaryOp, v: &[f64], dense_left: bool) -> AdValue {
    match (op, dense_left) {
        (BinaryOp::Add, _) => AdValue { val: zip_with(&x.val, v, |a, b| a + b), jac: x.jac.clone() },
        (BinaryOp::Sub, false) => AdValue { val: zip_with(&x.val, v, |a, b| a - b), jac: x.jac.clone() },
        (BinaryOp::Sub, true) => AdValue { val: zip_with(&x.val, v, |a, b| b - a), jac: x.jac.scale(-1.0) },
        (BinaryOp::Mul, _) => AdValue { val: zip_with(&x.val, v, |a, b| a * b), jac: x.jac.scale_rows(v) },
        (BinaryOp::Div, false) => {
            let inv: Vec<f64> = v.iter().map(|b| 1.0 / b).collect();
            AdValue { val: zip_with(&x.val, v, |a, b| a / b), jac: x.jac.scale_rows(&inv) }
        }
        (BinaryOp::Div, true) => {
            let d = zip_with(&x.val, v, |a, b| -b / (a * a));
            AdValue { val: zip_with(&x.val, v, |a, b| b / a), jac: x.jac.scale_rows(&d) }
        }
        _ => unreachable!("excluded by the combination table"),
    }
}

fn ad_ad(x: &AdValue, op: BinaryOp, y: &AdValue) -> AdValue {
    match op {
        BinaryOp::Add => AdValue { val: zip_with(&x.val, &y.val, |a, b| a + b), jac: x.jac.add(&y.jac) },
        BinaryOp::Sub => AdValue { val: zip_with(&x.val, &y.val, |a, b| a - b), jac: x.jac.sub(&y.jac) },
        BinaryOp::Mul => AdValue {
            val: zip_with(&x.val, &y.val, |a, b| a * b),
            jac: x.jac.scale_rows(&y.val).add(&y.jac.scale_rows(&x.val)),
        },
        BinaryOp::Div => {
            let inv: Vec<f64> = y.val.iter().map(|b| 1.0 / b).collect();
            let d = zip_with(&x.val, &y.val, |a, b| -a / (b * b));
            AdValue {
                val: zip_with(&x.val, &y.val, |a, b| a / b),
                jac: x.jac.scale_rows(&inv).add(&y.jac.scale_rows(&d)),
            }
        }
        _ => unreachable!("excluded by the combination table"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ad(val: Vec<f64>) -> AdValue {
        let n = val.len();
        AdValue::new(val, CsrMatrix::identity(n))
    }

    #[test]
    fn pow_chain_rule() {
        let r = combine(&Operand::Ad(ad(vec![1.0, 2.0])), BinaryOp::Pow, &Operand::Scalar(2.0)).unwrap();
        let Operand::Ad(r) = r else { panic!() };
        assert_eq!(r.val, vec![1.0, 4.0]);
        assert_eq!(r.jac.to_dense(), vec![vec![2.0, 0.0], vec![0.0, 4.0]]);
    }

    #[test]
    fn dense_times_ad() {
        let r = combine(&Operand::Dense(vec![1.0, 2.0, 3.0]), BinaryOp::Mul, &Operand::Ad(ad(vec![4.0, 5.0, 6.0])))
            .unwrap();
        let Operand::Ad(r) = r else { panic!() };
        assert_eq!(r.val, vec![4.0, 10.0, 18.0]);
        assert_eq!(r.jac.to_dense(), CsrMatrix::diag(&[1.0, 2.0, 3.0]).to_dense());
    }

    #[test]
    fn quotient_rule_over_distinct_dofs() {
        let a = AdValue::new(vec![2.0], CsrMatrix::from_dense(&[vec![1.0, 0.0]]));
        let b = AdValue::new(vec![4.0], CsrMatrix::from_dense(&[vec![0.0, 1.0]]));
        let Operand::Ad(r) = combine(&Operand::Ad(a), BinaryOp::Div, &Operand::Ad(b)).unwrap() else { panic!() };
        assert_eq!(r.val, vec![0.5]);
        assert_eq!(r.jac.to_dense(), vec![vec![0.25, -2.0 / 16.0]]);
    }

    #[test]
    fn scalar_plus_sparse_is_rejected() {
        let err = combine(&Operand::Scalar(1.0), BinaryOp::Add, &Operand::Sparse(CsrMatrix::identity(2))).unwrap_err();
        assert_eq!(
            err,
            AdError::UnsupportedCombination { op: BinaryOp::Add, left: OperandKind::Scalar, right: OperandKind::Sparse }
        );
    }

    #[test]
    fn length_mismatch() {
        let err = combine(&Operand::Dense(vec![1.0]), BinaryOp::Add, &Operand::Dense(vec![1.0, 2.0])).unwrap_err();
        assert!(matches!(err, AdError::ShapeMismatch(_)));
    }

    #[test]
    fn table_entry_counts_and_matmul_needs_matrix_left() {
        let mut defined = 0;
        for op in BinaryOp::ALL {
            for l in OperandKind::ALL {
                for r in OperandKind::ALL {
                    if result_kind(op, l, r).is_some() {
                        defined += 1;
                        if op == BinaryOp::MatMul {
                            assert_eq!(l, OperandKind::Sparse);
                        }
                    }
                }
            }
        }
        assert_eq!(defined, 10 + 10 + 11 + 10 + 5 + 3);
    }
}
