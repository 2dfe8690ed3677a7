//! Parser output checked against values frozen from an independent
//! cheminformatics toolkit (`tests/fixtures/smiles_oracle.tsv`).

use msgnn::chem::{parse_smiles, structure_key, to_smiles, MoleculeGraph};

struct Row {
    smiles: String,
    formula: String,
    num_atoms: usize,
    num_bonds: usize,
    hydrogens: Vec<u8>,
    in_ring: Vec<bool>,
    aromatic: Vec<bool>,
    charges: Vec<i8>,
}

fn list<T: std::str::FromStr>(s: &str) -> Vec<T>
where
    T::Err: std::fmt::Debug,
{
    s.split(',').map(|v| v.parse().unwrap()).collect()
}

fn corpus() -> Vec<Row> {
    include_str!("fixtures/smiles_oracle.tsv")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            Row {
                smiles: f[0].to_string(),
                formula: f[1].to_string(),
                num_atoms: f[2].parse().unwrap(),
                num_bonds: f[3].parse().unwrap(),
                hydrogens: list(f[4]),
                in_ring: list::<u8>(f[5]).into_iter().map(|v| v == 1).collect(),
                aromatic: list::<u8>(f[6]).into_iter().map(|v| v == 1).collect(),
                charges: list(f[7]),
            }
        })
        .collect()
}

// the toolkit appends the net charge to its formula text
fn strip_charge(formula: &str) -> String {
    match formula.find(['+', '-']) {
        Some(i) => formula[..i].to_string(),
        None => formula.to_string(),
    }
}

#[test]
fn corpus_matches_reference_toolkit() {
    let rows = corpus();
    assert!(rows.len() >= 60);
    for row in rows {
        let g = parse_smiles(&row.smiles).unwrap_or_else(|e| panic!("{}: {e}", row.smiles));
        let s = &row.smiles;
        assert_eq!(g.num_atoms(), row.num_atoms, "{s}");
        assert_eq!(g.edges().len(), row.num_bonds, "{s}");
        assert_eq!(g.formula().to_string(), strip_charge(&row.formula), "{s}");
        let atoms = g.atoms();
        assert_eq!(atoms.iter().map(|a| a.hydrogens).collect::<Vec<_>>(), row.hydrogens, "{s} H");
        assert_eq!(atoms.iter().map(|a| a.in_ring).collect::<Vec<_>>(), row.in_ring, "{s} ring");
        assert_eq!(atoms.iter().map(|a| a.aromatic).collect::<Vec<_>>(), row.aromatic, "{s} aromatic");
        assert_eq!(atoms.iter().map(|a| a.charge).collect::<Vec<_>>(), row.charges, "{s} charge");
    }
}

fn check_structure(g: &MoleculeGraph) {
    let adj = g.adjacency();
    let n = g.num_atoms();
    for i in 0..n {
        assert_eq!(adj[i][i], 0);
        for j in 0..n {
            assert_eq!(adj[i][j], adj[j][i]);
            assert_eq!(adj[i][j] == 1, g.bond_between(i, j).is_some());
        }
        assert_eq!(g.atoms()[i].degree, g.neighbors(i).len());
        assert_eq!(adj[i].iter().map(|&v| v as usize).sum::<usize>(), g.atoms()[i].degree);
    }
    let degree_total: usize = g.atoms().iter().map(|a| a.degree).sum();
    assert_eq!(degree_total, 2 * g.edges().len());
    for e in g.edges() {
        assert!(e.a < e.b && e.b < n);
    }
    for a in g.atoms() {
        assert!(!a.aromatic || a.in_ring);
    }
}

#[test]
fn structural_invariants_hold_over_corpus() {
    for row in corpus() {
        check_structure(&parse_smiles(&row.smiles).unwrap());
    }
}

#[test]
fn written_smiles_reparse_isomorphically() {
    for row in corpus() {
        let g = parse_smiles(&row.smiles).unwrap();
        let written = to_smiles(&g);
        let back = parse_smiles(&written).unwrap_or_else(|e| panic!("{} -> {written}: {e}", row.smiles));
        assert_eq!(structure_key(&back), structure_key(&g), "{} -> {written}", row.smiles);
        assert_eq!(back.formula(), g.formula(), "{} -> {written}", row.smiles);
        let mut hs: Vec<_> = g.atoms().iter().map(|a| (a.element, a.hydrogens, a.aromatic, a.charge)).collect();
        let mut hs_back: Vec<_> = back.atoms().iter().map(|a| (a.element, a.hydrogens, a.aromatic, a.charge)).collect();
        hs.sort();
        hs_back.sort();
        assert_eq!(hs, hs_back, "{} -> {written}", row.smiles);
        // rendering is stable after one pass
        assert_eq!(to_smiles(&back), written);
    }
}
