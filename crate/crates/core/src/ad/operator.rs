use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::ops;
use std::sync::Arc;

use crate::sparse::CsrMatrix;

use super::operand::{combine, AdValue, BinaryOp, Operand};
use super::system::EquationSystem;
use super::AdError;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Elementwise function with its derivative.
#[derive(Clone)]
pub struct ElementFunction {
    pub name: String,
    pub f: ScalarFn,
    pub df: ScalarFn,
}

impl fmt::Debug for ElementFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ElementFunction({})", self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TimeLevel {
    Current,
    PreviousTimestep,
    PreviousIteration,
}

#[derive(Debug)]
pub enum NodeKind {
    /// Dofs `offset + local[i]` of the global vector (all of the variable when `local` is `None`).
    Variable { id: usize, name: String, offset: usize, size: usize, local: Option<Arc<Vec<usize>>> },
    /// The child evaluated on the stored previous-timestep state, with zero Jacobian.
    PreviousTimestep(Operator),
    /// The child evaluated on the stored previous-iterate state, with zero Jacobian.
    PreviousIteration(Operator),
    Constant(Operand),
    /// Named value held by the equation system, refreshed between evaluations.
    Parameter(String),
    Arith(BinaryOp, Operator, Operator),
    Function(ElementFunction, Operator),
}

#[derive(Debug)]
pub struct Node {
    pub kind: NodeKind,
    pub label: Option<String>,
}

/// Immutable handle to a node of an expression graph.
///
/// Cloning shares the node; a shared node is evaluated once per evaluation pass.
#[derive(Clone, Debug)]
pub struct Operator(Arc<Node>);

impl Operator {
    fn from_kind(kind: NodeKind) -> Self {
        Operator(Arc::new(Node { kind, label: None }))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn ptr_eq(&self, other: &Operator) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub(crate) fn variable(id: usize, name: &str, offset: usize, size: usize, local: Option<Vec<usize>>) -> Self {
        Self::from_kind(NodeKind::Variable { id, name: name.to_string(), offset, size, local: local.map(Arc::new) })
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_kind(NodeKind::Constant(Operand::Scalar(v)))
    }

    pub fn dense(v: Vec<f64>) -> Self {
        Self::from_kind(NodeKind::Constant(Operand::Dense(v)))
    }

    pub fn sparse(m: CsrMatrix) -> Self {
        Self::from_kind(NodeKind::Constant(Operand::Sparse(m)))
    }

    pub fn constant(op: Operand) -> Self {
        Self::from_kind(NodeKind::Constant(op))
    }

    pub fn parameter(name: impl Into<String>) -> Self {
        Self::from_kind(NodeKind::Parameter(name.into()))
    }

    pub fn with_label(self, label: impl Into<String>) -> Self {
        match Arc::try_unwrap(self.0) {
            Ok(mut node) => {
                node.label = Some(label.into());
                Operator(Arc::new(node))
            }
            Err(shared) => {
                // Shared nodes keep their identity; wrap with a labelled no-op.
                let op = Operator(shared);
                Operator(Arc::new(Node {
                    kind: NodeKind::Arith(BinaryOp::Add, op, Operator::scalar(0.0)),
                    label: Some(label.into()),
                }))
            }
        }
    }

    pub fn binary(op: BinaryOp, left: &Operator, right: &Operator) -> Self {
        Self::from_kind(NodeKind::Arith(op, left.clone(), right.clone()))
    }

    pub fn previous_timestep(&self) -> Self {
        Self::from_kind(NodeKind::PreviousTimestep(self.clone()))
    }

    pub fn previous_iteration(&self) -> Self {
        Self::from_kind(NodeKind::PreviousIteration(self.clone()))
    }

    pub fn apply(
        &self,
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let func = ElementFunction { name: name.to_string(), f: Arc::new(f), df: Arc::new(df) };
        Self::from_kind(NodeKind::Function(func, self.clone()))
    }

    pub fn exp(&self) -> Self {
        self.apply("exp", f64::exp, f64::exp)
    }

    pub fn ln(&self) -> Self {
        self.apply("log", f64::ln, |x| 1.0 / x)
    }

    pub fn powf(&self, e: f64) -> Self {
        Self::binary(BinaryOp::Pow, self, &Operator::scalar(e))
    }

    pub fn pow(&self, e: &Operator) -> Self {
        Self::binary(BinaryOp::Pow, self, e)
    }

    /// `matrix @ self`.
    pub fn left_mul(&self, matrix: &Operator) -> Self {
        Self::binary(BinaryOp::MatMul, matrix, self)
    }

    pub fn matmul(&self, rhs: &Operator) -> Self {
        Self::binary(BinaryOp::MatMul, self, rhs)
    }

    /// Indented text dump of the expression tree.
    pub fn tree_string(&self) -> String {
        let mut out = String::new();
        self.write_tree(&mut out, 0);
        out
    }

    fn write_tree(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        let label = self.0.label.as_deref().map(|l| format!(" [{l}]")).unwrap_or_default();
        match &self.0.kind {
            NodeKind::Variable { name, local, size, .. } => {
                let n = local.as_ref().map_or(*size, |l| l.len());
                let _ = writeln!(out, "{pad}var {name} ({n} dofs){label}");
            }
            NodeKind::PreviousTimestep(c) => {
                let _ = writeln!(out, "{pad}prev_time{label}");
                c.write_tree(out, depth + 1);
            }
            NodeKind::PreviousIteration(c) => {
                let _ = writeln!(out, "{pad}prev_iter{label}");
                c.write_tree(out, depth + 1);
            }
            NodeKind::Constant(o) => {
                let desc = match o {
                    Operand::Scalar(s) => format!("scalar {s}"),
                    Operand::Dense(v) => format!("dense[{}]", v.len()),
                    Operand::Sparse(m) => format!("sparse {}x{}", m.nrows(), m.ncols()),
                    Operand::Ad(a) => format!("ad[{}]", a.len()),
                };
                let _ = writeln!(out, "{pad}{desc}{label}");
            }
            NodeKind::Parameter(name) => {
                let _ = writeln!(out, "{pad}param {name}{label}");
            }
            NodeKind::Arith(op, l, r) => {
                let _ = writeln!(out, "{pad}{op}{label}");
                l.write_tree(out, depth + 1);
                r.write_tree(out, depth + 1);
            }
            NodeKind::Function(func, c) => {
                let _ = writeln!(out, "{pad}{}(){label}", func.name);
                c.write_tree(out, depth + 1);
            }
        }
    }
}

/// One evaluation pass over a graph. Results are memoized per node and time level.
pub(crate) struct Evaluator<'a> {
    sys: &'a EquationSystem,
    with_jacobian: bool,
    memo: HashMap<(*const Node, TimeLevel), Arc<Operand>>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(sys: &'a EquationSystem, with_jacobian: bool) -> Self {
        Self { sys, with_jacobian, memo: HashMap::new() }
    }

    pub(crate) fn eval(&mut self, op: &Operator, level: TimeLevel) -> Result<Arc<Operand>, AdError> {
        let key = (Arc::as_ptr(&op.0), level);
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let value = Arc::new(self.compute(op, level)?);
        self.memo.insert(key, value.clone());
        Ok(value)
    }

    fn compute(&mut self, op: &Operator, level: TimeLevel) -> Result<Operand, AdError> {
        let ndof = self.sys.num_dofs();
        match &op.0.kind {
            NodeKind::Variable { offset, size, local, .. } => {
                let state = self.sys.state_at(level);
                let idx: Vec<usize> = match local {
                    Some(l) => l.iter().map(|&i| offset + i).collect(),
                    None => (*offset..offset + size).collect(),
                };
                let val: Vec<f64> = idx.iter().map(|&i| state[i]).collect();
                let jac = if self.with_jacobian && level == TimeLevel::Current {
                    let trip: Vec<(usize, usize, f64)> = idx.iter().enumerate().map(|(r, &c)| (r, c, 1.0)).collect();
                    CsrMatrix::from_triplets(idx.len(), ndof, &trip)
                } else {
                    CsrMatrix::zeros(idx.len(), ndof)
                };
                Ok(Operand::Ad(AdValue { val, jac }))
            }
            NodeKind::PreviousTimestep(c) => Ok((*self.eval(c, TimeLevel::PreviousTimestep)?).clone()),
            NodeKind::PreviousIteration(c) => Ok((*self.eval(c, TimeLevel::PreviousIteration)?).clone()),
            NodeKind::Constant(o) => Ok(o.clone()),
            NodeKind::Parameter(name) => {
                self.sys.parameter(name).cloned().ok_or_else(|| AdError::UnknownParameter(name.clone()))
            }
            NodeKind::Arith(bop, l, r) => {
                let lv = self.eval(l, level)?;
                let rv = self.eval(r, level)?;
                combine(&lv, *bop, &rv)
            }
            NodeKind::Function(func, c) => {
                let cv = self.eval(c, level)?;
                apply_function(func, &cv)
            }
        }
    }
}

pub fn apply_function(func: &ElementFunction, x: &Operand) -> Result<Operand, AdError> {
    let map = |v: &[f64]| -> Result<Vec<f64>, AdError> {
        v.iter()
            .map(|&x| {
                let y = (func.f)(x);
                if y.is_nan() && !x.is_nan() {
                    Err(AdError::DomainError { function: func.name.clone(), value: x })
                } else {
                    Ok(y)
                }
            })
            .collect()
    };
    match x {
        Operand::Scalar(s) => Ok(Operand::Scalar(map(&[*s])?[0])),
        Operand::Dense(v) => Ok(Operand::Dense(map(v)?)),
        Operand::Ad(a) => {
            let val = map(&a.val)?;
            let d: Vec<f64> = a.val.iter().map(|&x| (func.df)(x)).collect();
            Ok(Operand::Ad(AdValue { val, jac: a.jac.scale_rows(&d) }))
        }
        Operand::Sparse(_) => Err(AdError::ShapeMismatch(format!("{}() of a sparse matrix", func.name))),
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl ops::$trait<&Operator> for &Operator {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                Operator::binary($op, self, rhs)
            }
        }
        impl ops::$trait<Operator> for Operator {
            type Output = Operator;
            fn $method(self, rhs: Operator) -> Operator {
                Operator::binary($op, &self, &rhs)
            }
        }
        impl ops::$trait<&Operator> for Operator {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                Operator::binary($op, &self, rhs)
            }
        }
        impl ops::$trait<Operator> for &Operator {
            type Output = Operator;
            fn $method(self, rhs: Operator) -> Operator {
                Operator::binary($op, self, &rhs)
            }
        }
        impl ops::$trait<f64> for &Operator {
            type Output = Operator;
            fn $method(self, rhs: f64) -> Operator {
                Operator::binary($op, self, &Operator::scalar(rhs))
            }
        }
        impl ops::$trait<f64> for Operator {
            type Output = Operator;
            fn $method(self, rhs: f64) -> Operator {
                Operator::binary($op, &self, &Operator::scalar(rhs))
            }
        }
        impl ops::$trait<&Operator> for f64 {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                Operator::binary($op, &Operator::scalar(self), rhs)
            }
        }
        impl ops::$trait<Operator> for f64 {
            type Output = Operator;
            fn $method(self, rhs: Operator) -> Operator {
                Operator::binary($op, &Operator::scalar(self), &rhs)
            }
        }
    };
}

impl_binop!(Add, add, BinaryOp::Add);
impl_binop!(Sub, sub, BinaryOp::Sub);
impl_binop!(Mul, mul, BinaryOp::Mul);
impl_binop!(Div, div, BinaryOp::Div);

impl ops::Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator::binary(BinaryOp::Mul, &Operator::scalar(-1.0), self)
    }
}

impl ops::Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        -&self
    }
}
