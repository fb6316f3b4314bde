use std::collections::{BTreeMap, BTreeSet};

use crate::ast::{Cont, Expr, Name, Program, Type};

/// How much of structural congruence a canonical form identifies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CanonMode {
    /// Only alpha-conversion.
    Alpha,
    /// Alpha-conversion, the monoid laws of `|`, scope extrusion of top-level
    /// restrictions, duplicate emissions and unobservable emissions.
    #[default]
    Structural,
}

/// Upper bound on binder labelings tried when components tie.
const MAX_LABELINGS: usize = 5040;

const WILDCARD: Name = Name::Tmp(u64::MAX);

pub fn canonical(p: &Program, mode: CanonMode) -> Program {
    match mode {
        CanonMode::Alpha => p.canonical_alpha(),
        CanonMode::Structural => structural(p),
    }
}

fn flatten(p: &Program, binders: &mut Vec<(Name, Type)>, comps: &mut Vec<Program>) {
    match p {
        Program::Nil => {}
        Program::Par(a, b) => {
            flatten(a, binders, comps);
            flatten(b, binders, comps);
        }
        Program::New(t, ty, body) => {
            let fresh = Name::fresh();
            let body = body.rename(&BTreeMap::from([(t.clone(), fresh.clone())]));
            binders.push((fresh, ty.clone()));
            flatten(&body, binders, comps);
        }
        other => comps.push(other.clone()),
    }
}

/// Top-level emissions on bound names that nothing else mentions.
fn drop_garbage(binders: &[(Name, Type)], comps: &mut Vec<Program>) {
    loop {
        let bound: BTreeSet<&Name> = binders.iter().map(|(t, _)| t).collect();
        let garbage = comps.iter().find_map(|c| match c {
            Program::Emit(t, _) if bound.contains(t) => {
                let used = comps.iter().any(|d| match d {
                    Program::Emit(u, _) if u == t => false,
                    other => other.has_free(t),
                });
                (!used).then(|| t.clone())
            }
            _ => None,
        });
        let Some(t) = garbage else { return };
        comps.retain(|c| !matches!(c, Program::Emit(u, _) if *u == t));
    }
}

fn names_preorder(p: &Program, out: &mut Vec<Name>) {
    fn push(n: &Name, out: &mut Vec<Name>) {
        if !out.contains(n) {
            out.push(n.clone());
        }
    }
    fn expr(e: &Expr, out: &mut Vec<Name>) {
        match e {
            Expr::Name(n) | Expr::Deref(n) => push(n, out),
            Expr::Con(_, args) => args.iter().for_each(|a| expr(a, out)),
        }
    }
    match p {
        Program::Nil => {}
        Program::Call(_, args) => args.iter().for_each(|a| expr(a, out)),
        Program::Emit(s, e) => {
            push(s, out);
            expr(e, out);
        }
        Program::Present {
            signal, body, cont, ..
        } => {
            push(signal, out);
            names_preorder(body, out);
            if let Cont::Call(_, args) = cont {
                args.iter().for_each(|a| expr(a, out));
            }
        }
        Program::MatchSig {
            left,
            right,
            then,
            otherwise,
        } => {
            push(left, out);
            push(right, out);
            names_preorder(then, out);
            names_preorder(otherwise, out);
        }
        Program::MatchVal {
            scrutinee,
            pattern,
            then,
            otherwise,
        } => {
            expr(scrutinee, out);
            expr(pattern, out);
            names_preorder(then, out);
            names_preorder(otherwise, out);
        }
        Program::New(_, _, body) => names_preorder(body, out),
        Program::Par(a, b) => {
            names_preorder(a, out);
            names_preorder(b, out);
        }
    }
}

fn structural(p: &Program) -> Program {
    let mut binders = Vec::new();
    let mut comps = Vec::new();
    flatten(p, &mut binders, &mut comps);

    let mut seen = BTreeSet::new();
    comps.retain(|c| !matches!(c, Program::Emit(..)) || seen.insert(c.clone()));
    drop_garbage(&binders, &mut comps);
    binders.retain(|(t, _)| comps.iter().any(|c| c.has_free(t)));

    let wild: BTreeMap<Name, Name> = binders.iter().map(|(t, _)| (t.clone(), WILDCARD)).collect();
    let mut keyed: Vec<(Program, Program)> = comps
        .into_iter()
        .map(|c| (c.rename(&wild).canonical_alpha_from(0), c))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));

    let mut classes: Vec<Vec<Program>> = Vec::new();
    let mut last: Option<&Program> = None;
    for (k, c) in &keyed {
        if last != Some(k) {
            classes.push(Vec::new());
        }
        classes.last_mut().unwrap().push(c.clone());
        last = Some(k);
    }

    let orderings = if binders.is_empty() || labeling_count(&classes) > MAX_LABELINGS {
        vec![classes.concat()]
    } else {
        all_orderings(&classes)
    };

    let types: BTreeMap<Name, Type> = binders.iter().cloned().collect();
    let n = binders.len() as u32;
    let mut best: Option<(Vec<Type>, Vec<Program>)> = None;
    for order in orderings {
        let mut seen = Vec::new();
        for c in &order {
            names_preorder(c, &mut seen);
        }
        let labels: Vec<Name> = seen.into_iter().filter(|x| types.contains_key(x)).collect();
        let ren: BTreeMap<Name, Name> = labels
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), Name::Bound(i as u32)))
            .collect();
        let tys: Vec<Type> = labels.iter().map(|t| types[t].clone()).collect();
        let mut cs: Vec<Program> = order.iter().map(|c| c.rename(&ren).canonical_alpha_from(n)).collect();
        cs.sort();
        let cand = (tys, cs);
        if best.as_ref().map_or(true, |b| cand < *b) {
            best = Some(cand);
        }
    }
    let (tys, cs) = best.unwrap_or_default();
    let mut out = Program::par_all(cs);
    for (i, ty) in tys.into_iter().enumerate().rev() {
        out = Program::new_sig(Name::Bound(i as u32), ty, out);
    }
    out
}

fn labeling_count(classes: &[Vec<Program>]) -> usize {
    let mut total: usize = 1;
    for c in classes {
        for k in 2..=c.len() {
            total = total.saturating_mul(k);
        }
    }
    total
}

fn all_orderings(classes: &[Vec<Program>]) -> Vec<Vec<Program>> {
    use itertools::Itertools;
    let mut acc: Vec<Vec<Program>> = vec![Vec::new()];
    for class in classes {
        let perms: Vec<Vec<Program>> = if class.len() == 1 {
            vec![class.clone()]
        } else {
            class.iter().cloned().permutations(class.len()).collect()
        };
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                perms.iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.extend(p.iter().cloned());
                    v
                })
            })
            .collect();
    }
    acc
}
