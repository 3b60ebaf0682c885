use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

/// A single row `sum(coeffs) <sense> rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Row-activity interval `[lo, hi]` implied by the sense.
    pub fn activity_bounds(&self) -> (f64, f64) {
        match self.sense {
            Sense::Le => (f64::NEG_INFINITY, self.rhs),
            Sense::Ge => (self.rhs, f64::INFINITY),
            Sense::Eq => (self.rhs, self.rhs),
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// Minimization LP over bounded variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.coeffs.len()).sum()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
        });
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut names = HashSet::new();
        for (j, v) in self.variables.iter().enumerate() {
            if !names.insert(v.name.as_str()) {
                problems.push(format!("duplicate variable name {:?}", v.name));
            }
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                problems.push(format!("variable {} ({}) has bounds [{}, {}]", j, v.name, v.lower, v.upper));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                problems.push(format!("variable {} has an infinite bound on the wrong side", v.name));
            }
            if !v.cost.is_finite() {
                problems.push(format!("variable {} has cost {}", v.name, v.cost));
            }
            if v.name.is_empty() || v.name.contains(char::is_whitespace) {
                problems.push(format!("variable name {:?} is empty or contains whitespace", v.name));
            }
        }
        let mut row_names = HashSet::new();
        for c in &self.constraints {
            if !row_names.insert(c.name.as_str()) {
                problems.push(format!("duplicate constraint name {:?}", c.name));
            }
            if c.name.is_empty() || c.name.contains(char::is_whitespace) {
                problems.push(format!("constraint name {:?} is empty or contains whitespace", c.name));
            }
            if !c.rhs.is_finite() {
                problems.push(format!("constraint {} has rhs {}", c.name, c.rhs));
            }
            let mut seen = HashSet::new();
            for &(j, a) in &c.coeffs {
                if j >= self.variables.len() {
                    problems.push(format!("constraint {} references missing variable {}", c.name, j));
                } else if !seen.insert(j) {
                    problems.push(format!("constraint {} repeats variable {}", c.name, self.variables[j].name));
                }
                if !a.is_finite() {
                    problems.push(format!("constraint {} has coefficient {}", c.name, a));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.variables.iter().zip(x).map(|(v, &xj)| v.cost * xj).sum()
    }

    /// Largest absolute bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xj) in self.variables.iter().zip(x) {
            worst = worst.max(v.lower - xj).max(xj - v.upper);
        }
        for c in &self.constraints {
            let act = c.activity(x);
            let (lo, hi) = c.activity_bounds();
            worst = worst.max(lo - act).max(act - hi);
        }
        worst
    }
}

/// An LP where some variables are restricted to {0, 1}.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    binaries: Vec<usize>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram) -> Self {
        Self { lp, binaries: Vec::new() }
    }

    /// Flags `var` as binary; its bounds must already lie within [0, 1].
    pub fn mark_binary(&mut self, var: usize) {
        if let Err(pos) = self.binaries.binary_search(&var) {
            self.binaries.insert(pos, var);
        }
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> usize {
        let j = self.lp.add_variable(name, 0.0, 1.0, cost);
        self.mark_binary(j);
        j
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    pub fn is_binary(&self, var: usize) -> bool {
        self.binaries.binary_search(&var).is_ok()
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        let bad: Vec<String> = self
            .binaries
            .iter()
            .filter_map(|&j| {
                let v = self.lp.variables.get(j)?;
                (v.lower < 0.0 || v.upper > 1.0)
                    .then(|| format!("binary variable {} has bounds [{}, {}]", v.name, v.lower, v.upper))
            })
            .chain(
                self.binaries
                    .iter()
                    .filter(|&&j| j >= self.lp.variables.len())
                    .map(|j| format!("binary index {j} out of range")),
            )
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// The LP with every binary relaxed to its continuous bounds.
    pub fn relaxation(&self) -> &LinearProgram {
        &self.lp
    }
}
