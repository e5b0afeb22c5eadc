use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(u32, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[bool]) -> f64 {
        self.terms.iter().filter(|(v, _)| values[*v as usize]).map(|(_, c)| c).sum()
    }

    pub fn is_satisfied(&self, values: &[bool]) -> bool {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => a <= self.rhs + 1e-9,
            Sense::Ge => a >= self.rhs - 1e-9,
            Sense::Eq => (a - self.rhs).abs() <= 1e-9,
        }
    }
}

/// A selector variable with the members that carry its inflow and outflow.
///
/// When the selector is 1, exactly one inflow member is 1 and the number of
/// outflow links equals `1 + division - ending`; when it is 0 every member
/// is 0. Blocks nested under `parent` exclude each other along ancestor
/// chains. This lets the solver bound the objective much tighter than a sum
/// of positive coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub selector: u32,
    pub inflow: Vec<u32>,
    /// Members of `inflow` that are links (their weight is shared with the source).
    pub inflow_is_link: Vec<bool>,
    pub outflow: Option<Outflow>,
    pub parent: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outflow {
    pub ending: u32,
    pub division: u32,
    pub links: Vec<u32>,
}

/// Binary program: maximize `c·x` subject to linear rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Model {
    names: Vec<String>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    blocks: Vec<Block>,
    index: HashMap<String, u32>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, objective: f64) -> Result<u32> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Model(format!("duplicate variable {name}")));
        }
        let id = self.names.len() as u32;
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.objective.push(objective);
        Ok(id)
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<(u32, f64)>, sense: Sense, rhs: f64) {
        debug_assert!(terms.iter().all(|(v, _)| (*v as usize) < self.names.len()));
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, var: u32, c: f64) {
        self.objective[var as usize] = c;
    }

    pub(crate) fn set_blocks(&mut self, blocks: Vec<Block>) {
        self.blocks = blocks;
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, var: u32) -> &str {
        &self.names[var as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn var(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn evaluate(&self, values: &[bool]) -> f64 {
        self.objective.iter().zip(values).filter(|(_, &v)| v).map(|(c, _)| c).sum()
    }

    /// Names of the rows the assignment violates.
    pub fn violations(&self, values: &[bool]) -> Vec<&str> {
        self.constraints
            .iter()
            .filter(|c| !c.is_satisfied(values))
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn is_feasible(&self, values: &[bool]) -> bool {
        values.len() == self.num_vars() && self.constraints.iter().all(|c| c.is_satisfied(values))
    }
}
