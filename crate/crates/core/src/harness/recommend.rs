//! Which EM variant to use, by network size and missingness descriptors.

use crate::em::EmVariant;
use crate::missingness::SeverityClass;
use crate::network::SizeClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leaf {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl Leaf {
    pub const ALL: [Leaf; 7] = [Leaf::A, Leaf::B, Leaf::C, Leaf::D, Leaf::E, Leaf::F, Leaf::G];

    pub fn algorithms(self) -> &'static [EmVariant] {
        use EmVariant::*;
        match self {
            Leaf::A => &[Hard, Soft, SoftForced],
            Leaf::B | Leaf::D | Leaf::E | Leaf::F => &[Hard],
            Leaf::C | Leaf::G => &[Soft, SoftForced],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Leaf::A => "A",
            Leaf::B => "B",
            Leaf::C => "C",
            Leaf::D => "D",
            Leaf::E => "E",
            Leaf::F => "F",
            Leaf::G => "G",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recommendation {
    pub leaf: Leaf,
    pub algorithms: Vec<EmVariant>,
}

impl std::fmt::Display for Recommendation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = self.algorithms.iter().map(|v| v.as_str()).collect();
        write!(f, "leaf {}: {}", self.leaf.as_str(), names.join(", "))
    }
}

/// Walks the decision tree. Small and medium networks split on balancing,
/// then severity, then pattern; large networks split on pattern first and
/// balancing second.
pub fn recommend(size: SizeClass, balanced: bool, severity: SeverityClass, fair: bool) -> Recommendation {
    let leaf = match size {
        SizeClass::Small | SizeClass::Medium => {
            if !balanced {
                Leaf::A
            } else if severity == SeverityClass::Low {
                if fair { Leaf::B } else { Leaf::C }
            } else {
                Leaf::D
            }
        }
        SizeClass::Large => {
            if fair {
                Leaf::E
            } else if !balanced {
                Leaf::F
            } else {
                Leaf::G
            }
        }
    };
    Recommendation { leaf, algorithms: leaf.algorithms().to_vec() }
}
