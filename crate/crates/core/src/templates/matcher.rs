//! Subgraph monomorphism search for template patterns. Anchor atoms match on
//! element, charge, and aromatic flag; anchors recorded as changed also
//! require an equal hydrogen count and (at radius >= 1, where the pattern
//! holds the full neighborhood) an equal degree.

use crate::molgraph::MolecularGraph;

pub(super) struct MatchOptions<'a> {
    pub pattern: &'a MolecularGraph,
    pub target: &'a MolecularGraph,
    /// pattern atom index -> strict constraints apply
    pub strict: Vec<bool>,
    pub enforce_degree: bool,
    pub max_matches: usize,
}

pub(super) fn find_embeddings(opts: &MatchOptions) -> Vec<Vec<usize>> {
    let pattern = opts.pattern;
    let target = opts.target;
    let np = pattern.atom_count();
    if np == 0 || np > target.atom_count() {
        return Vec::new();
    }
    // cheap prefilter: every pattern element must be available in the target
    let mut need: std::collections::BTreeMap<&str, usize> = Default::default();
    for a in pattern.atoms() {
        *need.entry(a.element.as_str()).or_default() += 1;
    }
    let mut have: std::collections::BTreeMap<&str, usize> = Default::default();
    for a in target.atoms() {
        *have.entry(a.element.as_str()).or_default() += 1;
    }
    for (el, n) in &need {
        if have.get(el).copied().unwrap_or(0) < *n {
            return Vec::new();
        }
    }

    // visit order: BFS inside each pattern component so each atom after a
    // component root has at least one placed neighbor
    let mut order: Vec<usize> = Vec::with_capacity(np);
    let mut placed_pos = vec![usize::MAX; np];
    for comp in pattern.connected_components() {
        let root = comp[0];
        let mut q = std::collections::VecDeque::from([root]);
        let mut seen = vec![false; np];
        seen[root] = true;
        while let Some(u) = q.pop_front() {
            placed_pos[u] = order.len();
            order.push(u);
            let mut nbrs: Vec<usize> =
                pattern.neighbors(u).iter().map(|&(v, _)| v).collect();
            nbrs.sort_unstable();
            for v in nbrs {
                if !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
    }

    let mut embeddings: Vec<Vec<usize>> = Vec::new();
    let mut assignment = vec![usize::MAX; np];
    let mut used = vec![false; target.atom_count()];
    search(opts, &order, 0, &mut assignment, &mut used, &mut embeddings);
    embeddings
}

fn atom_compatible(opts: &MatchOptions, p: usize, t: usize) -> bool {
    let pa = opts.pattern.atom(p);
    let ta = opts.target.atom(t);
    if pa.element != ta.element || pa.aromatic != ta.aromatic || pa.charge != ta.charge {
        return false;
    }
    if opts.strict[p] {
        if pa.hydrogens != ta.hydrogens {
            return false;
        }
        if opts.enforce_degree && opts.pattern.degree(p) != opts.target.degree(t) {
            return false;
        }
    }
    true
}

fn search(
    opts: &MatchOptions,
    order: &[usize],
    pos: usize,
    assignment: &mut Vec<usize>,
    used: &mut Vec<bool>,
    embeddings: &mut Vec<Vec<usize>>,
) -> bool {
    if embeddings.len() >= opts.max_matches {
        return false;
    }
    if pos == order.len() {
        embeddings.push(assignment.clone());
        return embeddings.len() < opts.max_matches;
    }
    let p = order[pos];
    let placed_neighbors: Vec<(usize, usize)> = opts
        .pattern
        .neighbors(p)
        .iter()
        .copied()
        .filter(|&(v, _)| assignment[v] != usize::MAX)
        .collect();

    let candidates: Vec<usize> = match placed_neighbors.first() {
        Some(&(q, _)) => {
            let mut c: Vec<usize> = opts
                .target
                .neighbors(assignment[q])
                .iter()
                .map(|&(t, _)| t)
                .collect();
            c.sort_unstable();
            c
        }
        None => (0..opts.target.atom_count()).collect(),
    };

    'cand: for t in candidates {
        if used[t] || !atom_compatible(opts, p, t) {
            continue;
        }
        for &(q, pbond) in &placed_neighbors {
            let want = opts.pattern.bonds()[pbond].order;
            match opts.target.bond_between(t, assignment[q]) {
                Some(tb) if opts.target.bonds()[tb].order == want => {}
                _ => continue 'cand,
            }
        }
        assignment[p] = t;
        used[t] = true;
        let keep_going = search(opts, order, pos + 1, assignment, used, embeddings);
        assignment[p] = usize::MAX;
        used[t] = false;
        if !keep_going {
            return false;
        }
    }
    true
}
