//! Signatures: the sorts, function symbols, and relation symbols a theory is
//! defined over.
//!
//! Every signature contains the built-in sorts `Principal` and `Label` and
//! the built-in permission relations `flows(Label, Label)`,
//! `canread(Principal, Label)`, and `canwrite(Principal, Label)`. User
//! theories may add sorts, functions (including constants, as nullary
//! functions), and relations, but may not redeclare the permission relations.

use std::collections::BTreeMap;
use std::fmt;

use crate::term::Term;

/// A sort (the logic word for "type"). Sorts are identified by name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sort(pub String);

impl Sort {
    pub fn principal() -> Sort {
        Sort("Principal".to_string())
    }
    pub fn label() -> Sort {
        Sort("Label".to_string())
    }
    /// Placeholder sort used by the parser before sort resolution.
    pub fn unknown() -> Sort {
        Sort("?".to_string())
    }
    pub fn is_unknown(&self) -> bool {
        self.0 == "?"
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A function symbol with argument sorts and a result sort. Constants are
/// nullary functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncDecl {
    pub name: String,
    pub args: Vec<Sort>,
    pub result: Sort,
}

/// A relation symbol with argument sorts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelDecl {
    pub name: String,
    pub args: Vec<Sort>,
}

/// Errors raised while assembling or validating a signature.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignatureError {
    #[error("duplicate sort declaration: {0}")]
    DuplicateSort(String),
    #[error("duplicate function declaration: {0}")]
    DuplicateFunc(String),
    #[error("duplicate relation declaration: {0}")]
    DuplicateRel(String),
    #[error("relation {0} is a built-in permission relation and cannot be redeclared")]
    ReservedRel(String),
    #[error("unknown sort {0} in declaration of {1}")]
    UnknownSort(String, String),
    #[error("default ground label must have sort Label, found {0}")]
    BadDefaultLabel(String),
}

/// A FLAFOL signature: sorts, functions, relations, and the label used to
/// normalize the bare ground principal `<>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    sorts: Vec<Sort>,
    funcs: BTreeMap<String, FuncDecl>,
    rels: BTreeMap<String, RelDecl>,
    /// Ground label substituted for the empty generalized principal `<>`.
    pub default_ground_label: Option<Term>,
}

pub const FLOWS: &str = "flows";
pub const CANREAD: &str = "canread";
pub const CANWRITE: &str = "canwrite";

impl Default for Signature {
    fn default() -> Self {
        Signature::new()
    }
}

impl Signature {
    /// A signature containing only the built-in sorts and permission
    /// relations.
    pub fn new() -> Signature {
        let mut rels = BTreeMap::new();
        rels.insert(
            FLOWS.to_string(),
            RelDecl {
                name: FLOWS.to_string(),
                args: vec![Sort::label(), Sort::label()],
            },
        );
        rels.insert(
            CANREAD.to_string(),
            RelDecl {
                name: CANREAD.to_string(),
                args: vec![Sort::principal(), Sort::label()],
            },
        );
        rels.insert(
            CANWRITE.to_string(),
            RelDecl {
                name: CANWRITE.to_string(),
                args: vec![Sort::principal(), Sort::label()],
            },
        );
        Signature {
            sorts: vec![Sort::principal(), Sort::label()],
            funcs: BTreeMap::new(),
            rels,
            default_ground_label: None,
        }
    }

    pub fn sorts(&self) -> &[Sort] {
        &self.sorts
    }

    pub fn funcs(&self) -> impl Iterator<Item = &FuncDecl> {
        self.funcs.values()
    }

    pub fn rels(&self) -> impl Iterator<Item = &RelDecl> {
        self.rels.values()
    }

    pub fn has_sort(&self, s: &Sort) -> bool {
        self.sorts.iter().any(|x| x == s)
    }

    pub fn func(&self, name: &str) -> Option<&FuncDecl> {
        self.funcs.get(name)
    }

    pub fn rel(&self, name: &str) -> Option<&RelDecl> {
        self.rels.get(name)
    }

    pub fn add_sort(&mut self, name: &str) -> Result<(), SignatureError> {
        let s = Sort(name.to_string());
        if self.has_sort(&s) {
            return Err(SignatureError::DuplicateSort(name.to_string()));
        }
        self.sorts.push(s);
        Ok(())
    }

    pub fn add_func(&mut self, decl: FuncDecl) -> Result<(), SignatureError> {
        if self.funcs.contains_key(&decl.name) {
            return Err(SignatureError::DuplicateFunc(decl.name));
        }
        for s in decl.args.iter().chain(std::iter::once(&decl.result)) {
            if !self.has_sort(s) {
                return Err(SignatureError::UnknownSort(s.0.clone(), decl.name.clone()));
            }
        }
        self.funcs.insert(decl.name.clone(), decl);
        Ok(())
    }

    pub fn add_rel(&mut self, decl: RelDecl) -> Result<(), SignatureError> {
        if matches!(decl.name.as_str(), FLOWS | CANREAD | CANWRITE) {
            return Err(SignatureError::ReservedRel(decl.name));
        }
        if self.rels.contains_key(&decl.name) {
            return Err(SignatureError::DuplicateRel(decl.name));
        }
        for s in &decl.args {
            if !self.has_sort(s) {
                return Err(SignatureError::UnknownSort(s.0.clone(), decl.name.clone()));
            }
        }
        self.rels.insert(decl.name.clone(), decl);
        Ok(())
    }

    /// The ground label used in place of a bare `<>`; defaults to a nullary
    /// `Label` constant when `default_ground_label` is set, and must be set
    /// before bare grounds can be normalized.
    pub fn ground_label(&self) -> Option<&Term> {
        self.default_ground_label.as_ref()
    }

    /// All nullary constants of the given sort, in declaration (name) order.
    pub fn constants_of(&self, sort: &Sort) -> Vec<Term> {
        self.funcs
            .values()
            .filter(|f| f.args.is_empty() && &f.result == sort)
            .map(|f| Term::App(f.name.clone(), vec![]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_present() {
        let sig = Signature::new();
        assert!(sig.has_sort(&Sort::principal()));
        assert!(sig.has_sort(&Sort::label()));
        assert_eq!(sig.rel(FLOWS).unwrap().args.len(), 2);
        assert_eq!(sig.rel(CANREAD).unwrap().args[0], Sort::principal());
        assert_eq!(sig.rel(CANWRITE).unwrap().args[1], Sort::label());
    }

    #[test]
    fn permission_rels_reserved() {
        let mut sig = Signature::new();
        let err = sig.add_rel(RelDecl {
            name: "flows".into(),
            args: vec![],
        });
        assert_eq!(err, Err(SignatureError::ReservedRel("flows".into())));
    }

    #[test]
    fn duplicate_and_unknown_sorts_rejected() {
        let mut sig = Signature::new();
        sig.add_sort("Token").unwrap();
        assert!(sig.add_sort("Token").is_err());
        let err = sig.add_func(FuncDecl {
            name: "f".into(),
            args: vec![Sort("Missing".into())],
            result: Sort::label(),
        });
        assert!(matches!(err, Err(SignatureError::UnknownSort(_, _))));
    }

    #[test]
    fn constants_of_sort() {
        let mut sig = Signature::new();
        sig.add_func(FuncDecl {
            name: "Alice".into(),
            args: vec![],
            result: Sort::principal(),
        })
        .unwrap();
        sig.add_func(FuncDecl {
            name: "Pub".into(),
            args: vec![],
            result: Sort::label(),
        })
        .unwrap();
        let ps = sig.constants_of(&Sort::principal());
        assert_eq!(ps, vec![Term::constant("Alice")]);
    }
}
