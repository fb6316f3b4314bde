use std::collections::BTreeSet;

use itertools::Itertools;

use crate::ast::{Name, Type, Value};
use crate::typecheck::TypeEnv;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum UniverseError {
    #[error("value universe at type {ty} exceeds {cap} values")]
    BoundExceeded { ty: Type, cap: usize },
}

/// The finite set of values used to instantiate inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Universe {
    pub env: TypeEnv,
    /// Maximum constructor nesting (atoms have depth 0).
    pub depth: usize,
    /// Fresh signal names per signal type, beyond the names in scope.
    pub fresh_quota: usize,
    /// Names always offered, in addition to those in scope.
    pub seeds: BTreeSet<Name>,
    /// Maximum number of values per type.
    pub cap: usize,
}

impl Universe {
    pub fn new(env: TypeEnv) -> Self {
        Universe {
            env,
            depth: 2,
            fresh_quota: 1,
            seeds: BTreeSet::new(),
            cap: 4096,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_fresh_quota(mut self, quota: usize) -> Self {
        self.fresh_quota = quota;
        self
    }

    /// Signal names of type `ty`: those in scope or seeded, then fresh ones.
    pub fn names_of(&self, ty: &Type, scope: &BTreeSet<Name>) -> Vec<Name> {
        let mut out: Vec<Name> = scope
            .iter()
            .chain(&self.seeds)
            .filter(|n| self.env.name_type(n).as_ref() == Some(ty))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let used = super::gen_indices(scope.iter().chain(&self.seeds));
        out.extend(
            (0u32..)
                .filter(|i| !used.contains(i))
                .take(self.fresh_quota)
                .map(|i| Name::gen(i, ty.clone())),
        );
        out
    }

    /// All values of type `ty` up to the depth bound.
    pub fn values(&self, ty: &Type, scope: &BTreeSet<Name>) -> Result<Vec<Value>, UniverseError> {
        self.gen(ty, self.depth, scope)
    }

    fn gen(&self, ty: &Type, depth: usize, scope: &BTreeSet<Name>) -> Result<Vec<Value>, UniverseError> {
        if let Type::Sig(_) = ty {
            return Ok(self.names_of(ty, scope).into_iter().map(Value::Sig).collect());
        }
        let mut out = Vec::new();
        for (c, args) in self.env.constructors.producing(ty) {
            if args.is_empty() {
                out.push(Value::Con(c, Vec::new()));
                continue;
            }
            if depth == 0 {
                continue;
            }
            let mut pools = Vec::new();
            for a in &args {
                pools.push(self.gen(a, depth - 1, scope)?);
            }
            for combo in pools.iter().multi_cartesian_product() {
                out.push(Value::Con(c.clone(), combo.into_iter().cloned().collect()));
                if out.len() > self.cap {
                    return Err(UniverseError::BoundExceeded {
                        ty: ty.clone(),
                        cap: self.cap,
                    });
                }
            }
        }
        if matches!(ty, Type::Var(_)) {
            out.push(Value::unit());
        }
        Ok(out)
    }

    /// Input instances `(s, v)` for the given reading signals.
    pub fn inputs(&self, signals: &BTreeSet<Name>, scope: &BTreeSet<Name>) -> Result<Vec<(Name, Value)>, UniverseError> {
        let mut out = Vec::new();
        for s in signals {
            let Some(ty) = self.env.name_type(s) else { continue };
            let Some(carried) = ty.carried() else { continue };
            for v in self.values(carried, scope)? {
                out.push((s.clone(), v));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> TypeEnv {
        let mut env = TypeEnv::default();
        env.globals.insert(Name::src("a"), Type::sig(Type::Unit));
        env.globals.insert(Name::src("b"), Type::sig(Type::Unit));
        env
    }

    #[test]
    fn signal_values_include_one_fresh_name() {
        let u = Universe::new(env());
        let scope = BTreeSet::from([Name::src("a")]);
        let vs = u.values(&Type::sig(Type::Unit), &scope).unwrap();
        assert_eq!(vs, vec![Value::sig("a"), Value::Sig(Name::gen(0, Type::sig(Type::Unit)))]);
    }

    #[test]
    fn list_depth_counts_cons_cells() {
        let u = Universe::new(env()).with_depth(2);
        let vs = u.values(&Type::list(Type::Unit), &BTreeSet::new()).unwrap();
        assert_eq!(vs, vec![Value::nil(), Value::list([Value::unit()]), Value::list([Value::unit(), Value::unit()])]);
        assert!(vs.iter().all(|v| v.depth() <= 2));
    }

    #[test]
    fn cap_is_reported() {
        let mut u = Universe::new(env()).with_depth(4);
        u.cap = 3;
        let err = u.values(&Type::list(Type::list(Type::Unit)), &BTreeSet::new()).unwrap_err();
        assert!(matches!(err, UniverseError::BoundExceeded { .. }));
    }
}
