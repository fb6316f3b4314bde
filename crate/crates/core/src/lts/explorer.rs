use std::collections::{BTreeSet, HashMap, VecDeque};
use std::rc::Rc;

use serde::Serialize;

use super::{
    canonical, gen_indices, input_at, input_signals, is_suspended, name_extrusion, outputs, tau_steps, Action, ActionJson,
    CanonMode, LtsError, RawOutput, Universe, UniverseError,
};
use crate::ast::{Definitions, Name, Program};

pub type StateId = usize;

/// Finitization knobs for exploration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub max_states: usize,
    pub mode: CanonMode,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_states: 20_000,
            mode: CanonMode::Structural,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExploreError {
    #[error(transparent)]
    Lts(#[from] LtsError),
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error("state bound of {max_states} exceeded ({frontier} states pending)")]
    StateBound { max_states: usize, frontier: usize },
}

impl From<super::TransitionError> for ExploreError {
    fn from(e: super::TransitionError) -> Self {
        match e {
            super::TransitionError::Lts(e) => ExploreError::Lts(e),
            super::TransitionError::Universe(e) => ExploreError::Universe(e),
        }
    }
}

type Edges = Rc<Vec<(Action, StateId)>>;

/// A lazily built, memoized transition graph over canonical states.
pub struct Explorer {
    pub defs: Definitions,
    pub universe: Universe,
    pub bounds: Bounds,
    states: Vec<Program>,
    free: Vec<BTreeSet<Name>>,
    index: HashMap<Program, StateId>,
    tau: Vec<Option<Rc<Vec<StateId>>>>,
    raw_out: Vec<Option<Rc<Vec<RawOutput>>>>,
    visible: HashMap<(StateId, BTreeSet<Name>), Edges>,
    out_edges: HashMap<(StateId, BTreeSet<u32>), Edges>,
    closure: Vec<Option<Rc<Vec<StateId>>>>,
    weak_susp: HashMap<StateId, bool>,
    l_susp: HashMap<StateId, bool>,
}

impl Explorer {
    pub fn new(defs: Definitions, universe: Universe, bounds: Bounds) -> Self {
        Explorer {
            defs,
            universe,
            bounds,
            states: Vec::new(),
            free: Vec::new(),
            index: HashMap::new(),
            tau: Vec::new(),
            raw_out: Vec::new(),
            visible: HashMap::new(),
            out_edges: HashMap::new(),
            closure: Vec::new(),
            weak_susp: HashMap::new(),
            l_susp: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn program(&self, id: StateId) -> &Program {
        &self.states[id]
    }

    pub fn free_names(&self, id: StateId) -> &BTreeSet<Name> {
        &self.free[id]
    }

    pub fn canon(&self, p: &Program) -> Program {
        canonical(p, self.bounds.mode)
    }

    /// Intern a program (canonicalizing it first).
    pub fn intern(&mut self, p: &Program) -> Result<StateId, ExploreError> {
        let c = self.canon(p);
        self.intern_canonical(c)
    }

    fn intern_canonical(&mut self, p: Program) -> Result<StateId, ExploreError> {
        if let Some(&id) = self.index.get(&p) {
            return Ok(id);
        }
        if self.states.len() >= self.bounds.max_states {
            return Err(ExploreError::StateBound {
                max_states: self.bounds.max_states,
                frontier: 1,
            });
        }
        let id = self.states.len();
        self.free.push(p.free_names());
        self.index.insert(p.clone(), id);
        self.states.push(p);
        self.tau.push(None);
        self.raw_out.push(None);
        self.closure.push(None);
        Ok(id)
    }

    pub fn lookup(&self, p: &Program) -> Option<StateId> {
        self.index.get(&self.canon(p)).copied()
    }

    pub fn is_suspended(&self, id: StateId) -> bool {
        is_suspended(&self.states[id])
    }

    pub fn tau(&mut self, id: StateId) -> Result<Rc<Vec<StateId>>, ExploreError> {
        if let Some(t) = &self.tau[id] {
            return Ok(t.clone());
        }
        let succ = tau_steps(&self.states[id], &self.defs)?;
        let mut ids = BTreeSet::new();
        for q in succ {
            ids.insert(self.intern(&q)?);
        }
        let ids = Rc::new(ids.into_iter().collect::<Vec<_>>());
        self.tau[id] = Some(ids.clone());
        Ok(ids)
    }

    fn raw_outputs(&mut self, id: StateId) -> Result<Rc<Vec<RawOutput>>, ExploreError> {
        if let Some(o) = &self.raw_out[id] {
            return Ok(o.clone());
        }
        let o = Rc::new(outputs(&self.states[id])?);
        self.raw_out[id] = Some(o.clone());
        Ok(o)
    }

    /// Output transitions, extruding at generated indices unused in `scope`.
    pub fn output_edges(&mut self, id: StateId, scope: &BTreeSet<Name>) -> Result<Edges, ExploreError> {
        let avoid = gen_indices(scope);
        let key = (id, avoid);
        if let Some(e) = self.out_edges.get(&key) {
            return Ok(e.clone());
        }
        let mut out = BTreeSet::new();
        for o in self.raw_outputs(id)?.iter() {
            let (a, q) = name_extrusion(o, &key.1);
            out.insert((a, self.intern(&q)?));
        }
        let e: Edges = Rc::new(out.into_iter().collect());
        self.out_edges.insert(key, e.clone());
        Ok(e)
    }

    /// Successors of the input `sv`.
    pub fn input_edges(&mut self, id: StateId, s: &Name, v: &crate::ast::Value) -> Result<Vec<StateId>, ExploreError> {
        let succ = input_at(&self.states[id], s, v);
        let mut ids = BTreeSet::new();
        for q in succ {
            ids.insert(self.intern(&q)?);
        }
        Ok(ids.into_iter().collect())
    }

    /// Output and input transitions, with extruded and fresh names chosen
    /// relative to `scope` (which must contain the free names of the state).
    pub fn visible(&mut self, id: StateId, scope: &BTreeSet<Name>) -> Result<Edges, ExploreError> {
        let key = (id, scope.clone());
        if let Some(e) = self.visible.get(&key) {
            return Ok(e.clone());
        }
        let mut out: BTreeSet<(Action, StateId)> = self.output_edges(id, scope)?.iter().cloned().collect();
        let p = self.states[id].clone();
        for (s, v) in self.universe.inputs(&input_signals(&p), scope)? {
            for q in self.input_edges(id, &s, &v)? {
                out.insert((
                    Action::Input {
                        signal: s.clone(),
                        value: v.clone(),
                    },
                    q,
                ));
            }
        }
        let e: Edges = Rc::new(out.into_iter().collect());
        self.visible.insert(key, e.clone());
        Ok(e)
    }

    /// All transitions, with the state's own free names as scope.
    pub fn transitions(&mut self, id: StateId) -> Result<Vec<(Action, StateId)>, ExploreError> {
        let scope = self.free[id].clone();
        self.transitions_in(id, &scope)
    }

    pub fn transitions_in(&mut self, id: StateId, scope: &BTreeSet<Name>) -> Result<Vec<(Action, StateId)>, ExploreError> {
        let mut out: Vec<(Action, StateId)> = self.tau(id)?.iter().map(|&t| (Action::Tau, t)).collect();
        out.extend(self.visible(id, scope)?.iter().cloned());
        Ok(out)
    }

    /// States reachable by zero or more τ-steps, in BFS order.
    pub fn tau_closure(&mut self, id: StateId) -> Result<Rc<Vec<StateId>>, ExploreError> {
        if let Some(c) = &self.closure[id] {
            return Ok(c.clone());
        }
        let mut seen = BTreeSet::from([id]);
        let mut order = vec![id];
        let mut queue = VecDeque::from([id]);
        while let Some(s) = queue.pop_front() {
            for &t in self.tau(s)?.iter() {
                if seen.insert(t) {
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
        let c = Rc::new(order);
        self.closure[id] = Some(c.clone());
        Ok(c)
    }

    /// `P ⇒α P'`: τ* α τ* (just τ* for `Tau`).
    pub fn weak_transitions(&mut self, id: StateId, alpha: &Action, scope: &BTreeSet<Name>) -> Result<Vec<StateId>, ExploreError> {
        let pre = self.tau_closure(id)?;
        if *alpha == Action::Tau {
            return Ok(pre.to_vec());
        }
        let mut mid = BTreeSet::new();
        for &s in pre.iter() {
            match alpha {
                Action::Input { signal, value } => mid.extend(self.input_edges(s, signal, value)?),
                _ => {
                    let edges = self.output_edges(s, scope)?;
                    mid.extend(edges.iter().filter(|(b, _)| b == alpha).map(|(_, t)| *t));
                }
            }
        }
        let mut out = BTreeSet::new();
        for t in mid {
            out.extend(self.tau_closure(t)?.iter().copied());
        }
        Ok(out.into_iter().collect())
    }

    /// `P⇓`: some τ-descendant is suspended.
    pub fn weakly_suspends(&mut self, id: StateId) -> Result<bool, ExploreError> {
        if let Some(&b) = self.weak_susp.get(&id) {
            return Ok(b);
        }
        let closure = self.tau_closure(id)?;
        let found = closure.iter().any(|&s| self.is_suspended(s));
        if found {
            self.weak_susp.insert(id, true);
        } else {
            for &s in closure.iter() {
                self.weak_susp.insert(s, false);
            }
        }
        Ok(found)
    }

    /// `P⇓_L`: a suspended state is reachable by arbitrary transitions.
    pub fn l_suspends(&mut self, id: StateId) -> Result<bool, ExploreError> {
        if let Some(&b) = self.l_susp.get(&id) {
            return Ok(b);
        }
        Ok(self.l_suspension_path(id)?.is_some())
    }

    /// A shortest transition sequence from `id` to a suspended state.
    pub fn l_suspension_path(&mut self, id: StateId) -> Result<Option<Vec<(Action, StateId)>>, ExploreError> {
        let mut parent: HashMap<StateId, Option<(StateId, Action)>> = HashMap::from([(id, None)]);
        let mut queue = VecDeque::from([id]);
        let mut visited = vec![id];
        while let Some(s) = queue.pop_front() {
            if self.is_suspended(s) {
                let mut path = Vec::new();
                let mut cur = s;
                while let Some(Some((p, a))) = parent.get(&cur) {
                    path.push((a.clone(), cur));
                    cur = *p;
                }
                path.reverse();
                self.l_susp.insert(id, true);
                for (_, t) in &path {
                    self.l_susp.insert(*t, true);
                }
                return Ok(Some(path));
            }
            if self.l_susp.get(&s) == Some(&false) {
                continue;
            }
            let edges = match self.transitions(s) {
                Ok(e) => e,
                Err(ExploreError::StateBound { max_states, .. }) => {
                    return Err(ExploreError::StateBound {
                        max_states,
                        frontier: queue.len() + 1,
                    })
                }
                Err(e) => return Err(e),
            };
            for (a, t) in edges {
                if let std::collections::hash_map::Entry::Vacant(v) = parent.entry(t) {
                    v.insert(Some((s, a)));
                    visited.push(t);
                    queue.push_back(t);
                }
            }
        }
        for s in visited {
            self.l_susp.insert(s, false);
        }
        Ok(None)
    }

    /// Explore everything reachable from `root` and dump it.
    pub fn dump(&mut self, root: StateId) -> Result<GraphDump, ExploreError> {
        let mut seen = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        let mut edges = Vec::new();
        while let Some(s) = queue.pop_front() {
            for (a, t) in self.transitions(s)? {
                edges.push(EdgeDump {
                    from: s,
                    to: t,
                    action: ActionJson::from(&a),
                });
                if seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        let nodes = seen
            .into_iter()
            .map(|id| NodeDump {
                id,
                program: self.states[id].to_string(),
                suspended: self.is_suspended(id),
            })
            .collect();
        Ok(GraphDump { root, nodes, edges })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeDump {
    pub id: StateId,
    pub program: String,
    pub suspended: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeDump {
    pub from: StateId,
    pub to: StateId,
    pub action: ActionJson,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphDump {
    pub root: StateId,
    pub nodes: Vec<NodeDump>,
    pub edges: Vec<EdgeDump>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typecheck::check;

    fn explorer(src: &str) -> (Explorer, StateId) {
        let f = check(&crate::surface::parse(src).unwrap()).unwrap();
        let mut ex = Explorer::new(f.defs, Universe::new(f.env), Bounds::default());
        let id = ex.intern(&f.run).unwrap();
        (ex, id)
    }

    #[test]
    fn omega_never_suspends() {
        let (mut ex, id) = explorer("def O() = O()\nrun a! | O()");
        assert!(!ex.weakly_suspends(id).unwrap());
        assert!(!ex.l_suspends(id).unwrap());
    }

    #[test]
    fn loops_block_suspension() {
        let (ex, id) = explorer("def O() = O()\nrun when s do O() else 0");
        assert!(ex.is_suspended(id));
        let (mut ex, id) = explorer("def O() = O()\nrun when s do 0 else 0 | O()");
        assert!(!ex.weakly_suspends(id).unwrap());
        assert!(!ex.l_suspends(id).unwrap());
    }

    #[test]
    fn closure_contains_self() {
        let (mut ex, id) = explorer("run a! | when a do b! else 0");
        let c = ex.weak_transitions(id, &Action::Tau, &BTreeSet::new()).unwrap();
        assert!(c.contains(&id));
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn state_bound_is_reported() {
        let (mut ex, id) = explorer("signal s : sig(list(unit))\ndef A(l) = s!l | A(cons(*, l))\nrun A([])");
        ex.bounds.max_states = 10;
        let mut cur = id;
        let err = loop {
            match ex.tau(cur) {
                Ok(n) => cur = n[0],
                Err(e) => break e,
            }
        };
        assert!(matches!(err, ExploreError::StateBound { .. }));
    }
}
