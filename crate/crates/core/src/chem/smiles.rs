use std::collections::HashMap;

use thiserror::Error;

use super::elements::Element;
use super::graph::{ring_edge_flags, AtomSpec, BondKind, Edge, MoleculeGraph};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty SMILES string")]
    Empty,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("unbalanced parentheses")]
    UnbalancedParentheses,
    #[error("unmatched ring-closure {0}")]
    UnmatchedRingClosure(u32),
    #[error("ring-closure bond symbols disagree")]
    RingBondMismatch,
    #[error("bond without an atom on both sides")]
    DanglingBond,
    #[error("duplicate or self bond")]
    DuplicateBond,
    #[error("unterminated bracket atom")]
    UnterminatedBracket,
    #[error("valence {0} exceeds the allowed maximum")]
    ValenceOverflow(u8),
    #[error("aromatic atom or bond outside a ring")]
    AromaticOutsideRing,
    #[error("aromatic bond between non-aromatic atoms")]
    AromaticBondMismatch,
}

/// A SMILES parse failure at a byte offset.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("SMILES error at byte {offset}: {kind}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

impl SmilesError {
    fn new(offset: usize, kind: SmilesErrorKind) -> Self {
        SmilesError { offset, kind }
    }
}

type PResult<T> = std::result::Result<T, SmilesError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/` or `\`; stereo is dropped and the bond is single.
    Directional,
}

impl BondSym {
    fn kind(self) -> BondKind {
        match self {
            BondSym::Single | BondSym::Directional => BondKind::Single,
            BondSym::Double => BondKind::Double,
            BondSym::Triple => BondKind::Triple,
            BondSym::Aromatic => BondKind::Aromatic,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct ParsedAtom {
    element: Element,
    aromatic: bool,
    charge: i8,
    /// `None` for organic-subset atoms, whose hydrogens are implicit.
    explicit_h: Option<u8>,
    offset: usize,
}

struct RawBond {
    a: usize,
    b: usize,
    sym: Option<BondSym>,
    offset: usize,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    atoms: Vec<ParsedAtom>,
    bonds: Vec<RawBond>,
}

/// Parses the supported SMILES subset into a molecular graph.
///
/// Organic-subset atoms get implicit hydrogens from the default valence
/// table; aromaticity is read from lowercase symbols and never perceived.
/// Stereo markers are accepted and discarded.
pub fn parse_smiles(text: &str) -> Result<MoleculeGraph, SmilesError> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
    };
    p.parse()?;
    p.build(text)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn err<T>(&self, offset: usize, kind: SmilesErrorKind) -> PResult<T> {
        Err(SmilesError::new(offset, kind))
    }

    fn parse(&mut self) -> PResult<()> {
        if self.s.is_empty() {
            return self.err(0, SmilesErrorKind::Empty);
        }
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondSym, usize)> = None;
        let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
        let mut rings: HashMap<u32, (usize, Option<BondSym>, usize)> = HashMap::new();

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() || prev.is_none() {
                        return self.err(start, SmilesErrorKind::DanglingBond);
                    }
                    let sym = match c {
                        b'-' => BondSym::Single,
                        b'=' => BondSym::Double,
                        b'#' => BondSym::Triple,
                        b':' => BondSym::Aromatic,
                        _ => BondSym::Directional,
                    };
                    pending = Some((sym, start));
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() || prev.is_none() {
                        return self.err(start, SmilesErrorKind::DanglingBond);
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return self.err(start, SmilesErrorKind::UnbalancedParentheses);
                    }
                    branches.push((prev, start));
                    self.pos += 1;
                }
                b')' => {
                    if pending.is_some() {
                        return self.err(start, SmilesErrorKind::DanglingBond);
                    }
                    match branches.pop() {
                        Some((p, _)) => prev = p,
                        None => return self.err(start, SmilesErrorKind::UnbalancedParentheses),
                    }
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return self.err(start, SmilesErrorKind::DanglingBond);
                    };
                    let label = self.ring_label()?;
                    let sym = pending.take().map(|(s, _)| s);
                    match rings.remove(&label) {
                        Some((other, other_sym, _)) => {
                            let merged = match (other_sym, sym) {
                                (Some(a), Some(b)) if a.kind() != b.kind() => {
                                    return self.err(start, SmilesErrorKind::RingBondMismatch)
                                }
                                (a, b) => a.or(b),
                            };
                            self.add_bond(other, atom, merged, start)?;
                        }
                        None => {
                            rings.insert(label, (atom, sym, start));
                        }
                    }
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    prev = Some(self.attach(atom, prev, pending.take())?);
                }
                b'A'..=b'Z' | b'a'..=b'z' => {
                    let atom = self.organic_atom()?;
                    prev = Some(self.attach(atom, prev, pending.take())?);
                }
                other => return self.err(start, SmilesErrorKind::UnexpectedChar(other as char)),
            }
        }
        if let Some((_, offset)) = pending {
            return self.err(offset, SmilesErrorKind::DanglingBond);
        }
        if let Some(&(_, offset)) = branches.last() {
            return self.err(offset, SmilesErrorKind::UnbalancedParentheses);
        }
        if let Some((&label, &(_, _, offset))) = rings.iter().min_by_key(|(_, v)| v.2) {
            return self.err(offset, SmilesErrorKind::UnmatchedRingClosure(label));
        }
        if self.atoms.is_empty() {
            return self.err(0, SmilesErrorKind::Empty);
        }
        Ok(())
    }

    fn attach(&mut self, atom: ParsedAtom, prev: Option<usize>, bond: Option<(BondSym, usize)>) -> PResult<usize> {
        self.atoms.push(atom);
        let idx = self.atoms.len() - 1;
        if let Some(p) = prev {
            self.add_bond(p, idx, bond.map(|b| b.0), bond.map_or(atom.offset, |b| b.1))?;
        }
        Ok(idx)
    }

    fn add_bond(&mut self, a: usize, b: usize, sym: Option<BondSym>, offset: usize) -> PResult<()> {
        if a == b
            || self
                .bonds
                .iter()
                .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return self.err(offset, SmilesErrorKind::DuplicateBond);
        }
        self.bonds.push(RawBond { a, b, sym, offset });
        Ok(())
    }

    fn ring_label(&mut self) -> PResult<u32> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            let digits = self.s.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0'))
                }
                _ => self.err(start, SmilesErrorKind::UnexpectedChar('%')),
            }
        } else {
            let d = self.s[self.pos];
            self.pos += 1;
            Ok(u32::from(d - b'0'))
        }
    }

    fn organic_atom(&mut self) -> PResult<ParsedAtom> {
        let start = self.pos;
        let rest = &self.s[self.pos..];
        let (symbol, aromatic, len) = match rest {
            [b'C', b'l', ..] => ("Cl", false, 2),
            [b'B', b'r', ..] => ("Br", false, 2),
            [b'B', ..] => ("B", false, 1),
            [b'C', ..] => ("C", false, 1),
            [b'N', ..] => ("N", false, 1),
            [b'O', ..] => ("O", false, 1),
            [b'P', ..] => ("P", false, 1),
            [b'S', ..] => ("S", false, 1),
            [b'F', ..] => ("F", false, 1),
            [b'I', ..] => ("I", false, 1),
            [b'b', ..] => ("B", true, 1),
            [b'c', ..] => ("C", true, 1),
            [b'n', ..] => ("N", true, 1),
            [b'o', ..] => ("O", true, 1),
            [b'p', ..] => ("P", true, 1),
            [b's', ..] => ("S", true, 1),
            [c, ..] => {
                return self.err(start, SmilesErrorKind::UnknownElement((*c as char).to_string()));
            }
            [] => return self.err(start, SmilesErrorKind::Empty),
        };
        self.pos += len;
        Ok(ParsedAtom {
            element: Element::from_symbol(symbol).expect("organic subset symbol"),
            aromatic,
            charge: 0,
            explicit_h: None,
            offset: start,
        })
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| {
            std::str::from_utf8(&self.s[start..self.pos])
                .ok()
                .and_then(|t| t.parse().ok())
                .unwrap_or(u32::MAX)
        })
    }

    fn bracket_atom(&mut self) -> PResult<ParsedAtom> {
        let open = self.pos;
        self.pos += 1;
        // isotope, accepted and ignored
        self.digits();
        let (element, aromatic) = self.bracket_symbol()?;
        // chirality: @, @@, @TH1, @SP2, @OH12 ...
        if self.peek() == Some(b'@') {
            while self.peek() == Some(b'@') {
                self.pos += 1;
            }
            if let [a, b, ..] = &self.s[self.pos..] {
                if matches!((a, b), (b'T', b'H') | (b'A', b'L') | (b'S', b'P') | (b'T', b'B') | (b'O', b'H')) {
                    self.pos += 2;
                    self.digits();
                }
            }
        }
        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = self.digits().map_or(1, |d| d.min(u32::from(u8::MAX)) as u8);
        }
        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(d) = self.digits() {
                charge = unit * d.min(15) as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.digits();
        }
        if self.peek() != Some(b']') {
            let at = if self.pos >= self.s.len() { open } else { self.pos };
            return self.err(at, SmilesErrorKind::UnterminatedBracket);
        }
        self.pos += 1;
        Ok(ParsedAtom {
            element,
            aromatic,
            charge: charge.clamp(-15, 15) as i8,
            explicit_h: Some(hydrogens),
            offset: open,
        })
    }

    fn bracket_symbol(&mut self) -> PResult<(Element, bool)> {
        let start = self.pos;
        let rest = &self.s[self.pos..];
        match rest {
            [b's', b'e', ..] | [b'a', b's', ..] | [b't', b'e', ..] => {
                let sym = match rest[0] {
                    b's' => "Se",
                    b'a' => "As",
                    _ => "Te",
                };
                self.pos += 2;
                Ok((Element::from_symbol(sym).expect("aromatic bracket symbol"), true))
            }
            [c @ (b'b' | b'c' | b'n' | b'o' | b'p' | b's'), ..] => {
                self.pos += 1;
                let sym = (c.to_ascii_uppercase() as char).to_string();
                Ok((Element::from_symbol(&sym).expect("aromatic symbol"), true))
            }
            [u, l, ..] if u.is_ascii_uppercase() && l.is_ascii_lowercase() => {
                let two = format!("{}{}", *u as char, *l as char);
                if let Some(e) = Element::from_symbol(&two) {
                    self.pos += 2;
                    Ok((e, false))
                } else if let Some(e) = Element::from_symbol(&(*u as char).to_string()) {
                    self.pos += 1;
                    Ok((e, false))
                } else {
                    self.err(start, SmilesErrorKind::UnknownElement(two))
                }
            }
            [u, ..] if u.is_ascii_uppercase() => {
                let one = (*u as char).to_string();
                match Element::from_symbol(&one) {
                    Some(e) => {
                        self.pos += 1;
                        Ok((e, false))
                    }
                    None => self.err(start, SmilesErrorKind::UnknownElement(one)),
                }
            }
            [] => self.err(start, SmilesErrorKind::UnterminatedBracket),
            [c, ..] => self.err(start, SmilesErrorKind::UnknownElement((*c as char).to_string())),
        }
    }

    fn build(self, text: &str) -> PResult<MoleculeGraph> {
        let n = self.atoms.len();
        // bond kinds before ring analysis; implicit aromatic-aromatic bonds are
        // provisionally aromatic and demoted to single if they turn out acyclic
        let mut edges: Vec<Edge> = Vec::with_capacity(self.bonds.len());
        for b in &self.bonds {
            let both_aromatic = self.atoms[b.a].aromatic && self.atoms[b.b].aromatic;
            let kind = match b.sym {
                Some(s) => {
                    if s == BondSym::Aromatic && !both_aromatic {
                        return Err(SmilesError::new(b.offset, SmilesErrorKind::AromaticBondMismatch));
                    }
                    s.kind()
                }
                None if both_aromatic => BondKind::Aromatic,
                None => BondKind::Single,
            };
            edges.push(Edge { a: b.a, b: b.b, kind });
        }
        let ring = ring_edge_flags(n, &edges);
        for ((e, raw), &in_ring) in edges.iter_mut().zip(&self.bonds).zip(&ring) {
            if e.kind == BondKind::Aromatic && !in_ring {
                if raw.sym.is_some() {
                    return Err(SmilesError::new(raw.offset, SmilesErrorKind::AromaticOutsideRing));
                }
                e.kind = BondKind::Single;
            }
        }
        let mut atom_in_ring = vec![false; n];
        for (e, &r) in edges.iter().zip(&ring) {
            if r {
                atom_in_ring[e.a] = true;
                atom_in_ring[e.b] = true;
            }
        }

        let mut valence = vec![0u8; n];
        for e in &edges {
            valence[e.a] += e.kind.valence_order();
            valence[e.b] += e.kind.valence_order();
        }
        let mut specs = Vec::with_capacity(n);
        for (i, a) in self.atoms.iter().enumerate() {
            if a.aromatic && !atom_in_ring[i] {
                return Err(SmilesError::new(a.offset, SmilesErrorKind::AromaticOutsideRing));
            }
            let hydrogens = match a.explicit_h {
                Some(h) => h,
                None => implicit_hydrogens(a.element, a.aromatic, valence[i])
                    .map_err(|v| SmilesError::new(a.offset, SmilesErrorKind::ValenceOverflow(v)))?,
            };
            specs.push(AtomSpec {
                element: a.element,
                charge: a.charge,
                hydrogens,
                aromatic: a.aromatic,
            });
        }
        MoleculeGraph::from_parts(&specs, &edges, text)
            .map_err(|_| SmilesError::new(0, SmilesErrorKind::DuplicateBond))
    }
}

/// Implicit hydrogen count for an organic-subset atom with the given bond-order sum.
///
/// Returns the offending valence when no allowed valence can accommodate the bonds.
pub(crate) fn implicit_hydrogens(element: Element, aromatic: bool, bond_sum: u8) -> Result<u8, u8> {
    let valences = element.default_valences().unwrap_or(&[]);
    let Some(&target) = valences.iter().find(|&&v| v >= bond_sum) else {
        return Err(bond_sum);
    };
    let h = target - bond_sum;
    // an aromatic atom donates one valence to the delocalized system
    Ok(if aromatic { h.saturating_sub(1) } else { h })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> SmilesError {
        parse_smiles(text).unwrap_err()
    }

    #[test]
    fn ethane() {
        let g = parse_smiles("CC").unwrap();
        assert_eq!(g.num_atoms(), 2);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0].kind, BondKind::Single);
        assert!(g.atoms().iter().all(|a| a.hydrogens == 3));
    }

    #[test]
    fn benzene() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.num_atoms(), 6);
        assert_eq!(g.edges().len(), 6);
        assert!(g.edges().iter().all(|e| e.kind == BondKind::Aromatic));
        assert!(g.atoms().iter().all(|a| a.aromatic && a.in_ring && a.hydrogens == 1));
    }

    #[test]
    fn ammonium() {
        let g = parse_smiles("[NH4+]").unwrap();
        assert_eq!(g.num_atoms(), 1);
        assert_eq!(g.atoms()[0].charge, 1);
        assert_eq!(g.atoms()[0].hydrogens, 4);
    }

    #[test]
    fn unmatched_ring_closure_offset() {
        let e = err("C1CC");
        assert_eq!(e.offset, 1);
        assert_eq!(e.kind, SmilesErrorKind::UnmatchedRingClosure(1));
    }

    #[test]
    fn error_kinds_and_offsets() {
        assert_eq!(err("CC(C").kind, SmilesErrorKind::UnbalancedParentheses);
        assert_eq!(err("CC(C").offset, 2);
        assert_eq!(err("CC)C").offset, 2);
        assert_eq!(err("CXC").kind, SmilesErrorKind::UnknownElement("X".into()));
        assert_eq!(err("CXC").offset, 1);
        assert_eq!(err("[Xq]").kind, SmilesErrorKind::UnknownElement("Xq".into()));
        assert_eq!(err("C(C)(C)(C)(C)C").kind, SmilesErrorKind::ValenceOverflow(5));
        assert_eq!(err("C(C)(C)(C)(C)C").offset, 0);
        assert_eq!(err("O=O=O").kind, SmilesErrorKind::ValenceOverflow(4));
        assert_eq!(err("").kind, SmilesErrorKind::Empty);
        assert_eq!(err("C=").kind, SmilesErrorKind::DanglingBond);
        assert_eq!(err("=C").kind, SmilesErrorKind::DanglingBond);
        assert_eq!(err("C11").kind, SmilesErrorKind::DuplicateBond);
        assert_eq!(err("C12CC12").kind, SmilesErrorKind::DuplicateBond);
        assert_eq!(err("[CH4").kind, SmilesErrorKind::UnterminatedBracket);
        assert_eq!(err("cc").kind, SmilesErrorKind::AromaticOutsideRing);
        assert_eq!(err("C1:CC1").kind, SmilesErrorKind::AromaticBondMismatch);
        assert_eq!(err("C=1CC#1").kind, SmilesErrorKind::RingBondMismatch);
        assert_eq!(err("C C").kind, SmilesErrorKind::UnexpectedChar(' '));
    }

    #[test]
    fn branches_ring_percent_and_stereo() {
        let g = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(g.formula().to_string(), "C2H4O2");
        let g = parse_smiles("C%10CCCCC%10").unwrap();
        assert_eq!(g.edges().len(), 6);
        assert!(g.atoms().iter().all(|a| a.in_ring && a.hydrogens == 2));
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.formula().to_string(), "C2H2F2");
        let g = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert_eq!(g.formula().to_string(), "C3H7NO2");
        assert_eq!(g.atoms()[1].hydrogens, 1);
        let g = parse_smiles("[13CH4]").unwrap();
        assert_eq!(g.atoms()[0].hydrogens, 4);
    }

    #[test]
    fn ring_bond_symbol_on_either_side() {
        let a = parse_smiles("C=1CCCCC1").unwrap();
        let b = parse_smiles("C1CCCCC=1").unwrap();
        assert_eq!(a.formula(), b.formula());
        assert_eq!(a.formula().to_string(), "C6H10");
    }

    #[test]
    fn aromatic_heteroatoms() {
        let g = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(g.formula().to_string(), "C5H5N");
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(g.formula().to_string(), "C4H5N");
        let g = parse_smiles("Cn1cccc1").unwrap();
        assert_eq!(g.formula().to_string(), "C5H7N");
        let g = parse_smiles("c1ccsc1").unwrap();
        assert_eq!(g.formula().to_string(), "C4H4S");
        let g = parse_smiles("O=c1cccc[nH]1").unwrap();
        assert_eq!(g.formula().to_string(), "C5H5NO");
    }

    #[test]
    fn biphenyl_link_is_single() {
        let g = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        let links: Vec<_> = g.edges().iter().filter(|e| e.kind == BondKind::Single).collect();
        assert_eq!(links.len(), 1);
        assert_eq!(g.formula().to_string(), "C12H10");
    }

    #[test]
    fn disconnected_components() {
        let g = parse_smiles("[Na+].[Cl-]").unwrap();
        assert_eq!(g.num_atoms(), 2);
        assert!(g.edges().is_empty());
        assert_eq!(g.formula().to_string(), "ClNa");
    }

    #[test]
    fn hypervalent_defaults() {
        let g = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(g.atoms()[1].hydrogens, 0);
        let g = parse_smiles("OP(=O)(O)O").unwrap();
        assert_eq!(g.formula().to_string(), "H3O4P");
    }
}
