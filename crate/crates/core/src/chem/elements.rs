//! Element data: conventional standard atomic weights (IUPAC abridged values)
//! and the mass of each element's most abundant isotope.

#[derive(Clone, Copy, Debug)]
pub(crate) struct ElementData {
    pub symbol: &'static str,
    pub weight: f64,
    pub monoisotopic: f64,
}

/// Indexed by atomic number minus one.
static TABLE: [ElementData; 86] = [
    ElementData { symbol: "H", weight: 1.008, monoisotopic: 1.0078250 },
    ElementData { symbol: "He", weight: 4.0026, monoisotopic: 4.0026033 },
    ElementData { symbol: "Li", weight: 6.94, monoisotopic: 7.0160045 },
    ElementData { symbol: "Be", weight: 9.0122, monoisotopic: 9.0121822 },
    ElementData { symbol: "B", weight: 10.81, monoisotopic: 11.0093054 },
    ElementData { symbol: "C", weight: 12.011, monoisotopic: 12.0000000 },
    ElementData { symbol: "N", weight: 14.007, monoisotopic: 14.0030740 },
    ElementData { symbol: "O", weight: 15.999, monoisotopic: 15.9949146 },
    ElementData { symbol: "F", weight: 18.998, monoisotopic: 18.9984032 },
    ElementData { symbol: "Ne", weight: 20.18, monoisotopic: 19.9924402 },
    ElementData { symbol: "Na", weight: 22.99, monoisotopic: 22.9897693 },
    ElementData { symbol: "Mg", weight: 24.305, monoisotopic: 23.9850417 },
    ElementData { symbol: "Al", weight: 26.982, monoisotopic: 26.9815386 },
    ElementData { symbol: "Si", weight: 28.085, monoisotopic: 27.9769265 },
    ElementData { symbol: "P", weight: 30.974, monoisotopic: 30.9737616 },
    ElementData { symbol: "S", weight: 32.06, monoisotopic: 31.9720710 },
    ElementData { symbol: "Cl", weight: 35.45, monoisotopic: 34.9688527 },
    ElementData { symbol: "Ar", weight: 39.95, monoisotopic: 39.9623831 },
    ElementData { symbol: "K", weight: 39.098, monoisotopic: 38.9637067 },
    ElementData { symbol: "Ca", weight: 40.078, monoisotopic: 39.9625910 },
    ElementData { symbol: "Sc", weight: 44.956, monoisotopic: 44.9559119 },
    ElementData { symbol: "Ti", weight: 47.867, monoisotopic: 47.9479463 },
    ElementData { symbol: "V", weight: 50.942, monoisotopic: 50.9439595 },
    ElementData { symbol: "Cr", weight: 51.996, monoisotopic: 51.9405075 },
    ElementData { symbol: "Mn", weight: 54.938, monoisotopic: 54.9380451 },
    ElementData { symbol: "Fe", weight: 55.845, monoisotopic: 55.9349375 },
    ElementData { symbol: "Co", weight: 58.933, monoisotopic: 58.9331950 },
    ElementData { symbol: "Ni", weight: 58.693, monoisotopic: 57.9353429 },
    ElementData { symbol: "Cu", weight: 63.546, monoisotopic: 62.9295975 },
    ElementData { symbol: "Zn", weight: 65.38, monoisotopic: 63.9291422 },
    ElementData { symbol: "Ga", weight: 69.723, monoisotopic: 68.9255736 },
    ElementData { symbol: "Ge", weight: 72.63, monoisotopic: 73.9211778 },
    ElementData { symbol: "As", weight: 74.922, monoisotopic: 74.9215965 },
    ElementData { symbol: "Se", weight: 78.971, monoisotopic: 79.9165213 },
    ElementData { symbol: "Br", weight: 79.904, monoisotopic: 78.9183371 },
    ElementData { symbol: "Kr", weight: 83.798, monoisotopic: 83.9115070 },
    ElementData { symbol: "Rb", weight: 85.468, monoisotopic: 84.9117897 },
    ElementData { symbol: "Sr", weight: 87.62, monoisotopic: 87.9056121 },
    ElementData { symbol: "Y", weight: 88.906, monoisotopic: 88.9058483 },
    ElementData { symbol: "Zr", weight: 91.224, monoisotopic: 89.9047044 },
    ElementData { symbol: "Nb", weight: 92.906, monoisotopic: 92.9063781 },
    ElementData { symbol: "Mo", weight: 95.95, monoisotopic: 97.9054082 },
    ElementData { symbol: "Tc", weight: 98.0, monoisotopic: 96.9063650 },
    ElementData { symbol: "Ru", weight: 101.07, monoisotopic: 101.9043493 },
    ElementData { symbol: "Rh", weight: 102.91, monoisotopic: 102.9055040 },
    ElementData { symbol: "Pd", weight: 106.42, monoisotopic: 105.9034860 },
    ElementData { symbol: "Ag", weight: 107.87, monoisotopic: 106.9050970 },
    ElementData { symbol: "Cd", weight: 112.41, monoisotopic: 113.9033585 },
    ElementData { symbol: "In", weight: 114.82, monoisotopic: 114.9038780 },
    ElementData { symbol: "Sn", weight: 118.71, monoisotopic: 119.9021947 },
    ElementData { symbol: "Sb", weight: 121.76, monoisotopic: 120.9038157 },
    ElementData { symbol: "Te", weight: 127.6, monoisotopic: 129.9062244 },
    ElementData { symbol: "I", weight: 126.9, monoisotopic: 126.9044730 },
    ElementData { symbol: "Xe", weight: 131.29, monoisotopic: 131.9041535 },
    ElementData { symbol: "Cs", weight: 132.91, monoisotopic: 132.9054519 },
    ElementData { symbol: "Ba", weight: 137.33, monoisotopic: 137.9052472 },
    ElementData { symbol: "La", weight: 138.91, monoisotopic: 138.9063533 },
    ElementData { symbol: "Ce", weight: 140.12, monoisotopic: 139.9054387 },
    ElementData { symbol: "Pr", weight: 140.91, monoisotopic: 140.9076528 },
    ElementData { symbol: "Nd", weight: 144.24, monoisotopic: 141.9077233 },
    ElementData { symbol: "Pm", weight: 145.0, monoisotopic: 144.9127490 },
    ElementData { symbol: "Sm", weight: 150.36, monoisotopic: 151.9197324 },
    ElementData { symbol: "Eu", weight: 151.96, monoisotopic: 152.9212303 },
    ElementData { symbol: "Gd", weight: 157.25, monoisotopic: 157.9241039 },
    ElementData { symbol: "Tb", weight: 158.93, monoisotopic: 158.9253468 },
    ElementData { symbol: "Dy", weight: 162.5, monoisotopic: 163.9291748 },
    ElementData { symbol: "Ho", weight: 164.93, monoisotopic: 164.9303221 },
    ElementData { symbol: "Er", weight: 167.26, monoisotopic: 165.9302931 },
    ElementData { symbol: "Tm", weight: 168.93, monoisotopic: 168.9342133 },
    ElementData { symbol: "Yb", weight: 173.05, monoisotopic: 173.9388621 },
    ElementData { symbol: "Lu", weight: 174.97, monoisotopic: 174.9407718 },
    ElementData { symbol: "Hf", weight: 178.49, monoisotopic: 179.9465500 },
    ElementData { symbol: "Ta", weight: 180.95, monoisotopic: 180.9479958 },
    ElementData { symbol: "W", weight: 183.84, monoisotopic: 183.9509312 },
    ElementData { symbol: "Re", weight: 186.21, monoisotopic: 186.9557531 },
    ElementData { symbol: "Os", weight: 190.23, monoisotopic: 191.9614807 },
    ElementData { symbol: "Ir", weight: 192.22, monoisotopic: 192.9629264 },
    ElementData { symbol: "Pt", weight: 195.08, monoisotopic: 194.9647911 },
    ElementData { symbol: "Au", weight: 196.97, monoisotopic: 196.9665687 },
    ElementData { symbol: "Hg", weight: 200.59, monoisotopic: 201.9706430 },
    ElementData { symbol: "Tl", weight: 204.38, monoisotopic: 204.9744275 },
    ElementData { symbol: "Pb", weight: 207.2, monoisotopic: 207.9766521 },
    ElementData { symbol: "Bi", weight: 208.98, monoisotopic: 208.9803987 },
    ElementData { symbol: "Po", weight: 209.0, monoisotopic: 208.9824304 },
    ElementData { symbol: "At", weight: 210.0, monoisotopic: 209.9871480 },
    ElementData { symbol: "Rn", weight: 222.0, monoisotopic: 222.0175706 },
];

/// A chemical element, identified by atomic number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        (1..=TABLE.len() as u8).contains(&z).then_some(Element(z))
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        TABLE
            .iter()
            .position(|e| e.symbol == symbol)
            .map(|i| Element(i as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    fn data(self) -> &'static ElementData {
        &TABLE[self.0 as usize - 1]
    }

    pub fn symbol(self) -> &'static str {
        self.data().symbol
    }

    /// Standard atomic weight in unified atomic mass units.
    pub fn atomic_weight(self) -> f64 {
        self.data().weight
    }

    /// Mass of the most abundant isotope.
    pub fn monoisotopic_mass(self) -> f64 {
        self.data().monoisotopic
    }

    /// Allowed valences for the SMILES organic subset, ascending.
    pub fn default_valences(self) -> Option<&'static [u8]> {
        match self.0 {
            5 => Some(&[3]),
            6 => Some(&[4]),
            7 | 15 => Some(&[3, 5]),
            8 => Some(&[2]),
            16 => Some(&[2, 4, 6]),
            9 | 17 | 35 | 53 => Some(&[1]),
            _ => None,
        }
    }

    /// Whether the element may be written without brackets in SMILES.
    pub fn is_organic_subset(self) -> bool {
        self.default_valences().is_some()
    }

    /// Elements that may be written as a bare lowercase aromatic symbol.
    pub fn has_bare_aromatic_form(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 15 | 16)
    }
}

impl std::fmt::Display for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}
