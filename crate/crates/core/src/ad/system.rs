use std::collections::HashMap;

use crate::geometry::MixedDimensionalGrid;
use crate::sparse::CsrMatrix;

use super::operand::{AdValue, Operand};
use super::operator::{Evaluator, Operator, TimeLevel};
use super::AdError;

/// A grid that carries dofs: a subdomain or an interface (mortar grid).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GridRef {
    Subdomain(usize),
    Interface(usize),
}

#[derive(Clone, Debug)]
pub struct VariableInfo {
    pub name: String,
    pub grids: Vec<GridRef>,
    pub dofs_per_cell: usize,
    /// First global dof of the variable.
    pub offset: usize,
    pub size: usize,
    /// Local dof offset of each grid in `grids`.
    pub grid_offsets: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VariableId(pub usize);

#[derive(Clone, Debug)]
pub struct Equation {
    pub name: String,
    pub operator: Operator,
}

/// Dof registry, solution states and named equations.
///
/// Variables are laid out contiguously in registration order; within a variable,
/// grids follow the order given at registration and cells follow grid numbering.
#[derive(Clone, Debug)]
pub struct EquationSystem {
    subdomain_cells: Vec<usize>,
    interface_cells: Vec<usize>,
    variables: Vec<VariableInfo>,
    by_name: HashMap<String, usize>,
    state: Vec<f64>,
    prev_time: Vec<f64>,
    prev_iter: Vec<f64>,
    parameters: HashMap<String, Operand>,
    equations: Vec<Equation>,
}

/// Assembled residual and Jacobian, equations stacked in registration order.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub residual: Vec<f64>,
    pub jacobian: CsrMatrix,
    /// `(name, first row, row count)` per equation.
    pub blocks: Vec<(String, usize, usize)>,
}

impl EquationSystem {
    pub fn new(mdg: &MixedDimensionalGrid) -> Self {
        Self::with_counts(
            mdg.subdomains.iter().map(|g| g.num_cells).collect(),
            mdg.interfaces.iter().map(|m| m.num_cells()).collect(),
        )
    }

    /// A system over abstract grids with the given cell counts.
    pub fn with_counts(subdomain_cells: Vec<usize>, interface_cells: Vec<usize>) -> Self {
        Self {
            subdomain_cells,
            interface_cells,
            variables: Vec::new(),
            by_name: HashMap::new(),
            state: Vec::new(),
            prev_time: Vec::new(),
            prev_iter: Vec::new(),
            parameters: HashMap::new(),
            equations: Vec::new(),
        }
    }

    fn cells_of(&self, g: GridRef) -> Result<usize, AdError> {
        match g {
            GridRef::Subdomain(i) => self.subdomain_cells.get(i).copied(),
            GridRef::Interface(i) => self.interface_cells.get(i).copied(),
        }
        .ok_or_else(|| AdError::UnknownGrid(format!("{g:?}")))
    }

    pub fn register_variable(
        &mut self,
        name: &str,
        grids: &[GridRef],
        dofs_per_cell: usize,
    ) -> Result<VariableId, AdError> {
        if self.by_name.contains_key(name) {
            return Err(AdError::DuplicateVariable(name.to_string()));
        }
        let mut grid_offsets = Vec::with_capacity(grids.len());
        let mut size = 0;
        for &g in grids {
            grid_offsets.push(size);
            size += self.cells_of(g)? * dofs_per_cell;
        }
        let offset = self.state.len();
        let id = self.variables.len();
        self.variables.push(VariableInfo {
            name: name.to_string(),
            grids: grids.to_vec(),
            dofs_per_cell,
            offset,
            size,
            grid_offsets,
        });
        self.by_name.insert(name.to_string(), id);
        self.state.resize(offset + size, 0.0);
        self.prev_time.resize(offset + size, 0.0);
        self.prev_iter.resize(offset + size, 0.0);
        Ok(VariableId(id))
    }

    pub fn variable_id(&self, name: &str) -> Result<VariableId, AdError> {
        self.by_name.get(name).map(|&i| VariableId(i)).ok_or_else(|| AdError::UnknownVariable(name.to_string()))
    }

    pub fn variable_info(&self, v: VariableId) -> &VariableInfo {
        &self.variables[v.0]
    }

    pub fn variables(&self) -> &[VariableInfo] {
        &self.variables
    }

    /// Operator for the whole variable.
    pub fn var(&self, v: VariableId) -> Operator {
        let info = &self.variables[v.0];
        Operator::variable(v.0, &info.name, info.offset, info.size, None)
    }

    /// Operator for the variable restricted to `grids`, in the given order.
    pub fn var_on(&self, v: VariableId, grids: &[GridRef]) -> Result<Operator, AdError> {
        let info = &self.variables[v.0];
        let mut local = Vec::new();
        for g in grids {
            let k = info.grids.iter().position(|x| x == g).ok_or_else(|| {
                AdError::UnknownVariable(format!("{} is not defined on {g:?}", info.name))
            })?;
            let n = self.cells_of(*g)? * info.dofs_per_cell;
            local.extend(info.grid_offsets[k]..info.grid_offsets[k] + n);
        }
        Ok(Operator::variable(v.0, &info.name, info.offset, info.size, Some(local)))
    }

    /// Global dof range of the variable on one grid.
    pub fn dofs_on(&self, v: VariableId, g: GridRef) -> Option<std::ops::Range<usize>> {
        let info = &self.variables[v.0];
        let k = info.grids.iter().position(|x| *x == g)?;
        let n = self.cells_of(g).ok()? * info.dofs_per_cell;
        let start = info.offset + info.grid_offsets[k];
        Some(start..start + n)
    }

    pub fn num_dofs(&self) -> usize {
        self.state.len()
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut [f64] {
        &mut self.state
    }

    pub fn previous_timestep_state(&self) -> &[f64] {
        &self.prev_time
    }

    pub fn previous_iteration_state(&self) -> &[f64] {
        &self.prev_iter
    }

    pub(crate) fn state_at(&self, level: TimeLevel) -> &[f64] {
        match level {
            TimeLevel::Current => &self.state,
            TimeLevel::PreviousTimestep => &self.prev_time,
            TimeLevel::PreviousIteration => &self.prev_iter,
        }
    }

    pub fn set_state(&mut self, values: &[f64]) -> Result<(), AdError> {
        if values.len() != self.state.len() {
            return Err(AdError::ShapeMismatch(format!(
                "state has {} dofs, got {}",
                self.state.len(),
                values.len()
            )));
        }
        self.state.copy_from_slice(values);
        Ok(())
    }

    pub fn values_of(&self, v: VariableId) -> &[f64] {
        let info = &self.variables[v.0];
        &self.state[info.offset..info.offset + info.size]
    }

    pub fn set_values(&mut self, v: VariableId, values: &[f64]) -> Result<(), AdError> {
        let info = &self.variables[v.0];
        if values.len() != info.size {
            return Err(AdError::ShapeMismatch(format!(
                "variable {} has {} dofs, got {}",
                info.name,
                info.size,
                values.len()
            )));
        }
        let (o, n) = (info.offset, info.size);
        self.state[o..o + n].copy_from_slice(values);
        Ok(())
    }

    /// Sets the variable on one grid.
    pub fn set_values_on(&mut self, v: VariableId, g: GridRef, values: &[f64]) -> Result<(), AdError> {
        let r = self
            .dofs_on(v, g)
            .ok_or_else(|| AdError::UnknownVariable(format!("{} on {g:?}", self.variables[v.0].name)))?;
        if values.len() != r.len() {
            return Err(AdError::ShapeMismatch(format!("expected {} values, got {}", r.len(), values.len())));
        }
        self.state[r].copy_from_slice(values);
        Ok(())
    }

    /// Adds `delta` to the current state.
    pub fn update_state(&mut self, delta: &[f64]) {
        for (x, d) in self.state.iter_mut().zip(delta) {
            *x += d;
        }
    }

    /// Copies the current state to the previous-timestep and previous-iterate states.
    pub fn shift_time(&mut self) {
        self.prev_time.copy_from_slice(&self.state);
        self.prev_iter.copy_from_slice(&self.state);
    }

    pub fn shift_iterate(&mut self) {
        self.prev_iter.copy_from_slice(&self.state);
    }

    /// Restores the current state from the previous timestep.
    pub fn reset_to_previous_timestep(&mut self) {
        self.state.copy_from_slice(&self.prev_time);
        self.prev_iter.copy_from_slice(&self.prev_time);
    }

    pub fn set_parameter(&mut self, name: &str, value: Operand) {
        self.parameters.insert(name.to_string(), value);
    }

    pub fn parameter(&self, name: &str) -> Option<&Operand> {
        self.parameters.get(name)
    }

    pub fn set_equation(&mut self, name: &str, operator: Operator) {
        if let Some(e) = self.equations.iter_mut().find(|e| e.name == name) {
            e.operator = operator;
        } else {
            self.equations.push(Equation { name: name.to_string(), operator });
        }
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn evaluate(&self, op: &Operator) -> Result<AdValue, AdError> {
        let mut ev = Evaluator::new(self, true);
        let r = ev.eval(op, TimeLevel::Current)?;
        (*r).clone().into_ad(self.num_dofs())
    }

    pub fn evaluate_operand(&self, op: &Operator) -> Result<Operand, AdError> {
        let mut ev = Evaluator::new(self, true);
        Ok((*ev.eval(op, TimeLevel::Current)?).clone())
    }

    /// Values only; Jacobians are not formed.
    pub fn evaluate_values(&self, op: &Operator) -> Result<Vec<f64>, AdError> {
        let mut ev = Evaluator::new(self, false);
        ev.eval(op, TimeLevel::Current)?.values()
    }

    /// Evaluates all equations in one pass, sharing common subexpressions.
    pub fn assemble(&self) -> Result<LinearSystem, AdError> {
        let mut ev = Evaluator::new(self, true);
        let mut residual = Vec::new();
        let mut jacs = Vec::new();
        let mut blocks = Vec::new();
        for eq in &self.equations {
            let v = (*ev.eval(&eq.operator, TimeLevel::Current)?).clone().into_ad(self.num_dofs())?;
            blocks.push((eq.name.clone(), residual.len(), v.len()));
            residual.extend_from_slice(&v.val);
            jacs.push(v.jac);
        }
        let refs: Vec<&CsrMatrix> = jacs.iter().collect();
        let jacobian = if refs.is_empty() { CsrMatrix::zeros(0, self.num_dofs()) } else { CsrMatrix::vstack(&refs) };
        Ok(LinearSystem { residual, jacobian, blocks })
    }

    /// Residual values of all equations without Jacobians.
    pub fn assemble_residual(&self) -> Result<Vec<f64>, AdError> {
        let mut ev = Evaluator::new(self, false);
        let mut residual = Vec::new();
        for eq in &self.equations {
            residual.extend(ev.eval(&eq.operator, TimeLevel::Current)?.values()?);
        }
        Ok(residual)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys() -> (EquationSystem, VariableId, VariableId) {
        let mut s = EquationSystem::with_counts(vec![3, 2], vec![4]);
        let p = s.register_variable("p", &[GridRef::Subdomain(0), GridRef::Subdomain(1)], 1).unwrap();
        let l = s.register_variable("lambda", &[GridRef::Interface(0)], 1).unwrap();
        (s, p, l)
    }

    #[test]
    fn contiguous_layout() {
        let (s, p, l) = sys();
        assert_eq!(s.num_dofs(), 9);
        assert_eq!(s.dofs_on(p, GridRef::Subdomain(1)), Some(3..5));
        assert_eq!(s.dofs_on(l, GridRef::Interface(0)), Some(5..9));
    }

    #[test]
    fn duplicate_variable_rejected() {
        let (mut s, _, _) = sys();
        assert_eq!(
            s.register_variable("p", &[GridRef::Subdomain(0)], 1).unwrap_err(),
            AdError::DuplicateVariable("p".into())
        );
    }

    #[test]
    fn restricted_variable_jacobian() {
        let (mut s, p, _) = sys();
        s.set_values(p, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let v = s.evaluate(&s.var_on(p, &[GridRef::Subdomain(1)]).unwrap()).unwrap();
        assert_eq!(v.val, vec![4.0, 5.0]);
        assert_eq!(v.jac.get(0, 3), 1.0);
        assert_eq!(v.jac.get(1, 4), 1.0);
        assert_eq!(v.jac.nnz(), 2);
    }

    #[test]
    fn previous_timestep_has_zero_jacobian() {
        let (mut s, p, _) = sys();
        s.set_values(p, &[1.0; 5]).unwrap();
        s.shift_time();
        s.set_values(p, &[2.0; 5]).unwrap();
        let x = s.var(p);
        let v = s.evaluate(&(&x - x.previous_timestep())).unwrap();
        assert_eq!(v.val, vec![1.0; 5]);
        assert_eq!(v.jac, CsrMatrix::identity_block(5, 0, 9));
        let prev = s.evaluate(&(&x * &x).previous_timestep()).unwrap();
        assert_eq!(prev.val, vec![1.0; 5]);
        assert_eq!(prev.jac.nnz(), 0);
    }

    #[test]
    fn shared_node_and_parameters() {
        let (mut s, p, _) = sys();
        s.set_values(p, &[0.5; 5]).unwrap();
        s.set_parameter("k", Operand::Dense(vec![2.0; 5]));
        let e = s.var(p).exp();
        let op = &e * &e * Operator::parameter("k");
        let v = s.evaluate(&op).unwrap();
        assert!((v.val[0] - 2.0 * 1.0_f64.exp()).abs() < 1e-14);
        assert!((v.jac.get(0, 0) - 4.0 * 1.0_f64.exp()).abs() < 1e-13);
        assert!(matches!(s.evaluate(&Operator::parameter("missing")), Err(AdError::UnknownParameter(_))));
        assert!(op.tree_string().contains("param k"));
    }

    #[test]
    fn domain_error_on_log_of_negative() {
        let (mut s, p, _) = sys();
        s.set_values(p, &[-1.0; 5]).unwrap();
        let err = s.evaluate(&s.var(p).ln()).unwrap_err();
        assert!(matches!(err, AdError::DomainError { .. }));
    }

    #[test]
    fn value_only_matches_full_evaluation() {
        let (mut s, p, l) = sys();
        s.set_values(p, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        s.set_values(l, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let op = s.var(p).powf(3.0) / 2.0 + 1.0;
        assert_eq!(s.evaluate_values(&op).unwrap(), s.evaluate(&op).unwrap().val);
        s.set_equation("a", op.clone());
        s.set_equation("b", s.var(l) * s.var(l));
        let lin = s.assemble().unwrap();
        assert_eq!(lin.jacobian.shape(), (9, 9));
        assert_eq!(lin.residual, s.assemble_residual().unwrap());
        assert_eq!(lin.blocks[1], ("b".to_string(), 5, 4));
    }
}
