//! Graph utilities over the location graph: entry transitions of a
//! subprogram and the topologically ordered strongly connected components.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::{LocId, Program, TransId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("entry transitions of an empty subprogram are undefined")]
    EmptySubprogram,
}

/// The transitions outside `sub` whose target is the source of some
/// transition in `sub`.
pub fn entry_transitions(
    program: &Program,
    sub: &BTreeSet<TransId>,
) -> Result<Vec<TransId>, GraphError> {
    if sub.is_empty() {
        return Err(GraphError::EmptySubprogram);
    }
    let starts: BTreeSet<LocId> = sub
        .iter()
        .map(|id| program.transition(*id).src)
        .collect();
    Ok(program
        .transitions
        .iter()
        .filter(|t| !sub.contains(&t.id) && starts.contains(&t.tgt))
        .map(|t| t.id)
        .collect())
}

/// Strongly connected components of the location graph in topological order,
/// mapped to transition sets. Each transition appears exactly once: the
/// intra-SCC transitions of a component form one entry, and every inter-SCC
/// transition forms a singleton entry placed directly before the component
/// it leads into.
pub fn sccs_topological(program: &Program) -> Vec<BTreeSet<TransId>> {
    let loc_sccs = tarjan_location_sccs(program);
    // loc -> index of its SCC in topological order
    let mut scc_of = HashMap::new();
    for (i, scc) in loc_sccs.iter().enumerate() {
        for l in scc {
            scc_of.insert(*l, i);
        }
    }
    let mut out = Vec::new();
    for i in 0..loc_sccs.len() {
        // Inter-SCC transitions arriving at this component, in id order.
        let incoming: BTreeSet<TransId> = program
            .transitions
            .iter()
            .filter(|t| scc_of[&t.tgt] == i && scc_of[&t.src] != i)
            .map(|t| t.id)
            .collect();
        for t in incoming {
            out.push(BTreeSet::from([t]));
        }
        let intra: BTreeSet<TransId> = program
            .transitions
            .iter()
            .filter(|t| scc_of[&t.src] == i && scc_of[&t.tgt] == i)
            .map(|t| t.id)
            .collect();
        if !intra.is_empty() {
            out.push(intra);
        }
    }
    out
}

/// Whether a transition lies on some cycle of the location graph, i.e. its
/// endpoints belong to the same location SCC.
pub fn on_cycle(program: &Program, t: TransId) -> bool {
    let loc_sccs = tarjan_location_sccs(program);
    let tr = program.transition(t);
    loc_sccs
        .iter()
        .any(|scc| scc.contains(&tr.src) && scc.contains(&tr.tgt))
}

/// Tarjan's algorithm on locations; components are returned in topological
/// order (sources first).
fn tarjan_location_sccs(program: &Program) -> Vec<Vec<LocId>> {
    let n = program.loc_count();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for t in &program.transitions {
        adj[t.src.0 as usize].insert(t.tgt.0 as usize);
    }

    struct Tarjan<'a> {
        adj: &'a [BTreeSet<usize>],
        index: usize,
        indices: Vec<Option<usize>>,
        lowlink: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        sccs: Vec<Vec<usize>>,
    }

    impl Tarjan<'_> {
        fn visit(&mut self, v: usize) {
            self.indices[v] = Some(self.index);
            self.lowlink[v] = self.index;
            self.index += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            let succs: Vec<usize> = self.adj[v].iter().copied().collect();
            for w in succs {
                if self.indices[w].is_none() {
                    self.visit(w);
                    self.lowlink[v] = self.lowlink[v].min(self.lowlink[w]);
                } else if self.on_stack[w] {
                    self.lowlink[v] = self.lowlink[v].min(self.indices[w].unwrap());
                }
            }
            if self.lowlink[v] == self.indices[v].unwrap() {
                let mut scc = Vec::new();
                loop {
                    let w = self.stack.pop().unwrap();
                    self.on_stack[w] = false;
                    scc.push(w);
                    if w == v {
                        break;
                    }
                }
                scc.sort_unstable();
                self.sccs.push(scc);
            }
        }
    }

    let mut t = Tarjan {
        adj: &adj,
        index: 0,
        indices: vec![None; n],
        lowlink: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        sccs: Vec::new(),
    };
    // Start from the initial location so the emission order is stable, then
    // sweep the rest.
    t.visit(program.initial.0 as usize);
    for v in 0..n {
        if t.indices[v].is_none() {
            t.visit(v);
        }
    }
    // Tarjan emits components in reverse topological order.
    t.sccs.reverse();
    t.sccs
        .into_iter()
        .map(|scc| scc.into_iter().map(|i| LocId(i as u32)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Formula, ProgramBuilder};
    use std::collections::BTreeMap;

    /// Location graph of the nested self-loop example: l0 -> l1, l1 -> l3,
    /// l3 -> l1, l1 -> l2, l2 -> l3 and a self-loop on l3.
    fn diamond_with_self_loop() -> Program {
        let mut b = ProgramBuilder::new();
        b.program_var("x");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        let l2 = b.location("l2");
        let l3 = b.location("l3");
        b.initial(l0);
        b.transition("t0", l0, l1, Formula::tt(), BTreeMap::new());
        b.transition("t1", l1, l3, Formula::tt(), BTreeMap::new());
        b.transition("t2", l3, l1, Formula::tt(), BTreeMap::new());
        b.transition("t3", l1, l2, Formula::tt(), BTreeMap::new());
        b.transition("t4", l2, l3, Formula::tt(), BTreeMap::new());
        b.transition("t5", l3, l3, Formula::tt(), BTreeMap::new());
        b.build().unwrap()
    }

    #[test]
    fn entry_transitions_of_subsets() {
        let p = diamond_with_self_loop();
        let all_but_t0: BTreeSet<TransId> = (1..=5).map(TransId).collect();
        assert_eq!(entry_transitions(&p, &all_but_t0).unwrap(), vec![TransId(0)]);

        let t5_only = BTreeSet::from([TransId(5)]);
        assert_eq!(
            entry_transitions(&p, &t5_only).unwrap(),
            vec![TransId(1), TransId(4)]
        );

        let all: BTreeSet<TransId> = (0..=5).map(TransId).collect();
        assert_eq!(entry_transitions(&p, &all).unwrap(), Vec::<TransId>::new());

        assert_eq!(
            entry_transitions(&p, &BTreeSet::new()),
            Err(GraphError::EmptySubprogram)
        );
    }

    #[test]
    fn scc_order_for_nested_loop() {
        let p = diamond_with_self_loop();
        let sccs = sccs_topological(&p);
        assert_eq!(
            sccs,
            vec![
                BTreeSet::from([TransId(0)]),
                (1..=5).map(TransId).collect::<BTreeSet<_>>(),
            ]
        );
    }

    #[test]
    fn scc_order_for_chain() {
        let mut b = ProgramBuilder::new();
        b.program_var("x");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        let l2 = b.location("l2");
        let l3 = b.location("l3");
        b.initial(l0);
        b.transition("a", l0, l1, Formula::tt(), BTreeMap::new());
        b.transition("b", l1, l2, Formula::tt(), BTreeMap::new());
        b.transition("c", l2, l3, Formula::tt(), BTreeMap::new());
        let p = b.build().unwrap();
        let sccs = sccs_topological(&p);
        assert_eq!(
            sccs,
            vec![
                BTreeSet::from([TransId(0)]),
                BTreeSet::from([TransId(1)]),
                BTreeSet::from([TransId(2)]),
            ]
        );
    }

    #[test]
    fn scc_partition_is_exact() {
        let p = diamond_with_self_loop();
        let sccs = sccs_topological(&p);
        let mut seen = BTreeSet::new();
        for scc in &sccs {
            for t in scc {
                assert!(seen.insert(*t), "transition {t:?} emitted twice");
            }
        }
        assert_eq!(seen.len(), p.transitions.len());
    }

    #[test]
    fn single_self_loop() {
        let mut b = ProgramBuilder::new();
        b.program_var("x");
        let l0 = b.location("l0");
        let l1 = b.location("l1");
        b.initial(l0);
        b.transition("t0", l0, l1, Formula::tt(), BTreeMap::new());
        b.transition("t", l1, l1, Formula::tt(), BTreeMap::new());
        let p = b.build().unwrap();
        assert_eq!(
            sccs_topological(&p),
            vec![
                BTreeSet::from([TransId(0)]),
                BTreeSet::from([TransId(1)])
            ]
        );
        assert!(!on_cycle(&p, TransId(0)));
        assert!(on_cycle(&p, TransId(1)));
    }
}
