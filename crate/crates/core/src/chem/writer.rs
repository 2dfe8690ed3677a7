use std::fmt::Write;

use super::graph::{BondKind, MoleculeGraph};
use super::smiles::implicit_hydrogens;

/// Renders a graph as SMILES that [`parse_smiles`](super::parse_smiles)
/// reads back into an isomorphic graph.
///
/// The output is not canonical: atom order follows a depth-first walk from
/// the lowest-numbered atom of each component.
pub fn to_smiles(graph: &MoleculeGraph) -> String {
    let n = graph.num_atoms();
    let mut visited = vec![false; n];
    let mut parent = vec![usize::MAX; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    // (opener, closer) pairs for non-tree edges
    let mut closures: Vec<(usize, usize)> = Vec::new();
    let mut roots = Vec::new();
    let mut order = vec![usize::MAX; n];
    let mut counter = 0;

    for root in 0..n {
        if visited[root] {
            continue;
        }
        roots.push(root);
        let mut stack = vec![(root, 0usize)];
        visited[root] = true;
        order[root] = counter;
        counter += 1;
        while let Some(top) = stack.last_mut() {
            let (v, cursor) = (top.0, top.1);
            let nbrs = graph.neighbors(v);
            if cursor == nbrs.len() {
                stack.pop();
                continue;
            }
            top.1 += 1;
            let (w, _) = nbrs[cursor];
            if w == parent[v] {
                continue;
            }
            if visited[w] {
                // back edge, seen from the descendant first
                if order[w] < order[v] && !closures.contains(&(w, v)) {
                    closures.push((w, v));
                }
                continue;
            }
            visited[w] = true;
            parent[w] = v;
            order[w] = counter;
            counter += 1;
            children[v].push(w);
            stack.push((w, 0));
        }
    }

    // ring-closure labels per atom, in writing order
    let mut labels: Vec<Vec<(u32, usize)>> = vec![Vec::new(); n];
    let mut sorted = closures.clone();
    sorted.sort_by_key(|&(a, b)| (order[a], order[b]));
    let mut in_use: Vec<Option<usize>> = Vec::new();
    // assign labels greedily in the order the opener atoms are written
    // closings sort before openings at the same atom so a freed label can be reused
    let mut events: Vec<(usize, bool, usize)> = Vec::new();
    for (i, &(a, b)) in sorted.iter().enumerate() {
        events.push((order[a], true, i));
        events.push((order[b], false, i));
    }
    events.sort_by_key(|&(o, open, i)| (o, open, i));
    let mut label_of = vec![0u32; sorted.len()];
    for (_, open, i) in events {
        let (a, b) = sorted[i];
        if open {
            let slot = match in_use.iter().position(Option::is_none) {
                Some(s) => s,
                None => {
                    in_use.push(None);
                    in_use.len() - 1
                }
            };
            in_use[slot] = Some(i);
            label_of[i] = slot as u32 + 1;
            labels[a].push((label_of[i], b));
        } else {
            let slot = label_of[i] as usize - 1;
            in_use[slot] = None;
            labels[b].push((label_of[i], a));
        }
    }

    let mut out = String::new();
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        write_branch(graph, root, &children, &labels, &mut out);
    }
    out
}

fn write_branch(
    graph: &MoleculeGraph,
    start: usize,
    children: &[Vec<usize>],
    labels: &[Vec<(u32, usize)>],
    out: &mut String,
) {
    let mut v = start;
    loop {
        write_atom(graph, v, out);
        for &(label, other) in &labels[v] {
            let kind = graph.bond_between(v, other).expect("ring-closure bond");
            out.push_str(bond_symbol(graph, v, other, kind));
            if label < 10 {
                let _ = write!(out, "{label}");
            } else {
                let _ = write!(out, "%{label:02}");
            }
        }
        let kids = &children[v];
        let Some((&last, rest)) = kids.split_last() else {
            return;
        };
        for &c in rest {
            out.push('(');
            let kind = graph.bond_between(v, c).expect("tree bond");
            out.push_str(bond_symbol(graph, v, c, kind));
            write_branch(graph, c, children, labels, out);
            out.push(')');
        }
        let kind = graph.bond_between(v, last).expect("tree bond");
        out.push_str(bond_symbol(graph, v, last, kind));
        v = last;
    }
}

fn bond_symbol(graph: &MoleculeGraph, a: usize, b: usize, kind: BondKind) -> &'static str {
    let both_aromatic = graph.atoms()[a].aromatic && graph.atoms()[b].aromatic;
    match kind {
        BondKind::Single if both_aromatic => "-",
        BondKind::Single => "",
        BondKind::Double => "=",
        BondKind::Triple => "#",
        BondKind::Aromatic if both_aromatic => "",
        BondKind::Aromatic => ":",
    }
}

fn write_atom(graph: &MoleculeGraph, i: usize, out: &mut String) {
    let atom = &graph.atoms()[i];
    let bond_sum: u8 = graph.neighbors(i).iter().map(|(_, k)| k.valence_order()).sum();
    let implicit = atom
        .element
        .is_organic_subset()
        .then(|| implicit_hydrogens(atom.element, atom.aromatic, bond_sum).ok())
        .flatten();
    let bare_ok = atom.charge == 0
        && implicit == Some(atom.hydrogens)
        && (!atom.aromatic || atom.element.has_bare_aromatic_form());
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    if bare_ok {
        out.push_str(&symbol);
        return;
    }
    out.push('[');
    out.push_str(&symbol);
    match atom.hydrogens {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    out.push(']');
}
