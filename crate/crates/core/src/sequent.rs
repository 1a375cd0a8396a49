//! Generalized principals, beliefs, contexts, and sequents.
//!
//! A generalized principal `<l0>.[p1:l1]...[pn:ln]` is a ground label plus a
//! stack of principal/label pairs: the beliefs of `p1` at `l1` as simulated
//! by ground truth, then of `p2` at `l2` as simulated by that, and so on.
//! The bare ground `<>` is normalized at parse time to the theory's default
//! ground label, so every in-memory generalized principal carries an explicit
//! ground label term.
//!
//! A sequent `b1, ..., bn |- phi @ g` pairs an ordered context of beliefs
//! with a goal belief. Context order matters: proof rules address beliefs by
//! position.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::formula::Formula;
use crate::signature::{Signature, Sort};
use crate::term::{sort_check_expect, SortError, Term};

/// A generalized principal: ground label plus a stack of `(principal, label)`
/// pairs, innermost simulation last.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GenPrincipal {
    pub ground: Term,
    pub stack: Vec<(Term, Term)>,
}

impl GenPrincipal {
    pub fn ground_only(ground: Term) -> GenPrincipal {
        GenPrincipal {
            ground,
            stack: vec![],
        }
    }

    pub fn push(&self, p: Term, l: Term) -> GenPrincipal {
        let mut g = self.clone();
        g.stack.push((p, l));
        g
    }

    /// Append a list of pairs.
    pub fn extend(&self, pairs: &[(Term, Term)]) -> GenPrincipal {
        let mut g = self.clone();
        g.stack.extend_from_slice(pairs);
        g
    }

    /// The prefix consisting of the ground label and the first `n` pairs.
    pub fn prefix(&self, n: usize) -> GenPrincipal {
        GenPrincipal {
            ground: self.ground.clone(),
            stack: self.stack[..n].to_vec(),
        }
    }

    /// True when `self` is a (not necessarily proper) prefix of `other`:
    /// same ground label and `self`'s stack is an initial segment of
    /// `other`'s.
    pub fn is_prefix_of(&self, other: &GenPrincipal) -> bool {
        self.ground == other.ground
            && self.stack.len() <= other.stack.len()
            && self.stack[..] == other.stack[..self.stack.len()]
    }

    pub fn free_vars(&self, out: &mut BTreeSet<(String, Sort)>) {
        self.ground.free_vars(out);
        for (p, l) in &self.stack {
            p.free_vars(out);
            l.free_vars(out);
        }
    }

    pub fn has_free_var(&self, name: &str) -> bool {
        self.ground.has_free_var(name)
            || self
                .stack
                .iter()
                .any(|(p, l)| p.has_free_var(name) || l.has_free_var(name))
    }

    pub fn subst(&self, name: &str, t: &Term) -> GenPrincipal {
        GenPrincipal {
            ground: self.ground.subst(name, t),
            stack: self
                .stack
                .iter()
                .map(|(p, l)| (p.subst(name, t), l.subst(name, t)))
                .collect(),
        }
    }

    pub fn sort_check(
        &self,
        sig: &Signature,
        env: &mut BTreeMap<String, Sort>,
    ) -> Result<(), SortError> {
        sort_check_expect(sig, env, &self.ground, &Sort::label())?;
        for (p, l) in &self.stack {
            sort_check_expect(sig, env, p, &Sort::principal())?;
            sort_check_expect(sig, env, l, &Sort::label())?;
        }
        Ok(())
    }

    pub fn terms(&self, out: &mut Vec<Term>) {
        out.push(self.ground.clone());
        for (p, l) in &self.stack {
            out.push(p.clone());
            out.push(l.clone());
        }
    }
}

/// A formula held by a generalized principal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Belief {
    pub formula: Formula,
    pub gp: GenPrincipal,
}

impl Belief {
    pub fn new(formula: Formula, gp: GenPrincipal) -> Belief {
        Belief { formula, gp }
    }

    pub fn free_vars(&self, out: &mut BTreeSet<(String, Sort)>) {
        self.formula.free_vars(out);
        self.gp.free_vars(out);
    }

    pub fn has_free_var(&self, name: &str) -> bool {
        self.formula.has_free_var(name) || self.gp.has_free_var(name)
    }

    pub fn subst(&self, name: &str, t: &Term) -> Belief {
        Belief {
            formula: self.formula.subst(name, t),
            gp: self.gp.subst(name, t),
        }
    }

    pub fn sort_check(
        &self,
        sig: &Signature,
        env: &mut BTreeMap<String, Sort>,
    ) -> Result<(), SortError> {
        self.formula.sort_check(sig, env)?;
        self.gp.sort_check(sig, env)
    }
}

/// An ordered context of beliefs.
pub type Context = Vec<Belief>;

/// A sequent `context |- goal`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequent {
    pub context: Context,
    pub goal: Belief,
}

impl Sequent {
    pub fn new(context: Context, goal: Belief) -> Sequent {
        Sequent { context, goal }
    }

    pub fn free_vars(&self, out: &mut BTreeSet<(String, Sort)>) {
        for b in &self.context {
            b.free_vars(out);
        }
        self.goal.free_vars(out);
    }

    pub fn has_free_var(&self, name: &str) -> bool {
        self.context.iter().any(|b| b.has_free_var(name)) || self.goal.has_free_var(name)
    }

    pub fn subst(&self, name: &str, t: &Term) -> Sequent {
        Sequent {
            context: self.context.iter().map(|b| b.subst(name, t)).collect(),
            goal: self.goal.subst(name, t),
        }
    }

    /// Every term occurring anywhere in the sequent; used to harvest term
    /// universes for subformula checks and proof search.
    pub fn terms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for b in &self.context {
            b.formula.terms(&mut out);
            b.gp.terms(&mut out);
        }
        self.goal.formula.terms(&mut out);
        self.goal.gp.terms(&mut out);
        out
    }
}

/// Errors from sequent well-formedness checking.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WfError {
    #[error("belief {index}: {source}")]
    Belief {
        index: usize,
        #[source]
        source: SortError,
    },
    #[error("goal: {source}")]
    Goal {
        #[source]
        source: SortError,
    },
}

/// Check that every belief in the sequent is sort-correct under a single
/// consistent variable environment.
pub fn check_sequent_wf(sig: &Signature, s: &Sequent) -> Result<(), WfError> {
    let mut env = BTreeMap::new();
    for (index, b) in s.context.iter().enumerate() {
        b.sort_check(sig, &mut env)
            .map_err(|source| WfError::Belief { index, source })?;
    }
    s.goal
        .sort_check(sig, &mut env)
        .map_err(|source| WfError::Goal { source })
}

impl fmt::Display for GenPrincipal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.ground)?;
        for (p, l) in &self.stack {
            write!(f, ".[{p}:{l}]")?;
        }
        Ok(())
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}", self.formula, self.gp)
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.context.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        if self.context.is_empty() {
            write!(f, "|- {}", self.goal)
        } else {
            write!(f, " |- {}", self.goal)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp(pairs: &[(&str, &str)]) -> GenPrincipal {
        GenPrincipal {
            ground: Term::constant("Pub"),
            stack: pairs
                .iter()
                .map(|(p, l)| (Term::constant(p), Term::constant(l)))
                .collect(),
        }
    }

    #[test]
    fn prefix_relation() {
        let a = gp(&[]);
        let b = gp(&[("P", "L")]);
        let c = gp(&[("P", "L"), ("Q", "L")]);
        assert!(a.is_prefix_of(&a));
        assert!(a.is_prefix_of(&b));
        assert!(b.is_prefix_of(&c));
        assert!(!c.is_prefix_of(&b));
        assert!(!b.is_prefix_of(&gp(&[("Q", "L")])));
        let other_ground = GenPrincipal {
            ground: Term::constant("Sec"),
            stack: vec![],
        };
        assert!(!other_ground.is_prefix_of(&b));
    }

    #[test]
    fn wf_requires_consistent_sorts() {
        let mut sig = Signature::new();
        sig.add_func(crate::signature::FuncDecl {
            name: "Pub".into(),
            args: vec![],
            result: Sort::label(),
        })
        .unwrap();
        sig.add_func(crate::signature::FuncDecl {
            name: "P".into(),
            args: vec![],
            result: Sort::principal(),
        })
        .unwrap();
        let good = Sequent::new(
            vec![],
            Belief::new(
                Formula::canread(Term::constant("P"), Term::constant("Pub")),
                GenPrincipal::ground_only(Term::constant("Pub")),
            ),
        );
        assert!(check_sequent_wf(&sig, &good).is_ok());
        let bad = Sequent::new(
            vec![],
            Belief::new(
                Formula::canread(Term::constant("Pub"), Term::constant("Pub")),
                GenPrincipal::ground_only(Term::constant("Pub")),
            ),
        );
        assert!(matches!(check_sequent_wf(&sig, &bad), Err(WfError::Goal { .. })));
    }
}
