use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::arithmetic::{parse_calculator_call, ArithExpr, Op};

/// Question formats for single-operation problems, indexed by format id,
/// then by operation (add, sub, mul, div).
const SINGLE_OP: [[&str; 4]; 5] = [
    [
        "How much is {x} plus {y}?",
        "How much is {x} minus {y}?",
        "How much is {x} times {y}?",
        "How much is {x} over {y}?",
    ],
    ["What is {x} plus {y}?", "What is {x} minus {y}?", "What is {x} times {y}?", "What is {x} over {y}?"],
    [
        "What is the result of {x} plus {y}?",
        "What is the result of {x} minus {y}?",
        "What is the result of {x} times {y}?",
        "What is the result of {x} over {y}?",
    ],
    [
        "What is the sum of {x} and {y}?",
        "What is the difference between {x} and {y}?",
        "What is the product of {x} and {y}?",
        "What is the ratio between {x} and {y}?",
    ],
    [
        "The sum of {x} and {y} is",
        "The difference between {x} and {y} is",
        "The product of {x} and {y} is",
        "The ratio of {x} and {y} is",
    ],
];

/// Two-operation formulae with their phrasing, in catalog order.
///
/// The third column holds the original spelling where it differs from the
/// corrected one.
const TWO_OP: [(&str, &str, Option<&str>); 29] = [
    ("((A+B)*C)", "Sum A and B and multiply by C", None),
    ("(A+B*C)", "What is the sum of A and the product of B and C?", None),
    ("((A-B)*C)", "What is the product of A minus B and C?", None),
    ("(A/(B/C))", "How much is A divided by the ratio between B and C?", None),
    ("(A-B*C)", "What is the difference between A and the product of B and C?", None),
    ("(A*(B-C))", "How much is A times the difference between B and C?", None),
    ("((A+B)/C)", "What is the ratio between A plus B and C?", None),
    (
        "(A-(B-C))",
        "How much is A minus the difference between B and C?",
        Some("How much is A minus the diffrence between B and C?"),
    ),
    ("((A-B)/C)", "What is the ratio between A minus B and C?", None),
    ("(A-B/C)", "What is the difference between A and the ratio between B and C?", None),
    ("(A/(B+C))", "How much is A divided by the sum of B and C?", Some("How much is A divided bu the sum of B and C?")),
    ("(A/(B-C))", "How much is A divided by the difference between B and C?", None),
    ("(A+B/C)", "what is the sum of A and the ratio between B and C?", None),
    ("(A*(B/C))", "How much is A times the ratio between B and C?", None),
    ("(A*B+C)", "How much is the sum of A times B and C?", None),
    ("(A*(B+C))", "How much is A times the sum of B and C?", None),
    ("(A/B+C)", "How much is the sum of A divided by B and C?", None),
    ("(A/B/C)", "How much is A divided by B divided by C?", None),
    ("(A/B-C)", "How much is the difference between A divided by B and C?", None),
    ("(A/B*C)", "How much is A divided by B times C?", None),
    ("(A-(B+C))", "How much is A minus the sum of B and C?", None),
    ("(A*B-C)", "How much is the difference between A times B and C?", None),
    ("(A/(B*C))", "How much is A divided by the product of B and C?", None),
    ("(A-B+C)", "How much is A minus B plus C?", None),
    ("(A+B+C)", "How much is A plus B plus C?", None),
    ("(A-B-C)", "How much is A minus B minus C?", None),
    ("(A*B/C)", "How much is A times B divided by C?", None),
    ("(A+B-C)", "How much is A plus B minus C?", None),
    ("(A*B*C)", "How much is A times B times C?", None),
];

pub const FORMAT_COUNT: u8 = 5;
pub const FORMULA_COUNT: u8 = 29;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateId {
    Single { format: u8, op: Op },
    Double { formula: u8 },
}

impl TemplateId {
    pub fn arity(self) -> u8 {
        match self {
            TemplateId::Single { .. } => 1,
            TemplateId::Double { .. } => 2,
        }
    }

    /// Format id for single-op templates, formula id for two-op ones.
    pub fn number(self) -> u8 {
        match self {
            TemplateId::Single { format, .. } => format,
            TemplateId::Double { formula } => formula,
        }
    }
}

impl TemplateId {
    /// Inverse of `Display`: `format-3-sub`, `formula-07`.
    pub fn parse(s: &str) -> Option<TemplateId> {
        let id = if let Some(rest) = s.strip_prefix("format-") {
            let (format, op) = rest.split_once('-')?;
            TemplateId::Single { format: format.parse().ok()?, op: Op::from_name(op)? }
        } else {
            TemplateId::Double { formula: s.strip_prefix("formula-")?.parse().ok()? }
        };
        let in_range = match id {
            TemplateId::Single { format, .. } => format < FORMAT_COUNT,
            TemplateId::Double { formula } => formula < FORMULA_COUNT,
        };
        (in_range && id.to_string() == s).then_some(id)
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateId::Single { format, op } => write!(f, "format-{format}-{op}"),
            TemplateId::Double { formula } => write!(f, "formula-{formula:02}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spelling {
    #[default]
    Corrected,
    Verbatim,
}

impl Spelling {
    pub fn as_str(self) -> &'static str {
        match self {
            Spelling::Corrected => "corrected",
            Spelling::Verbatim => "verbatim",
        }
    }

    pub fn parse(s: &str) -> Option<Spelling> {
        [Spelling::Corrected, Spelling::Verbatim].into_iter().find(|x| x.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: TemplateId,
    /// Operation tree whose leaves are slot indices (0 = first operand).
    pub shape: ArithExpr,
    pub phrasing: &'static str,
}

impl Template {
    pub fn arity(&self) -> u8 {
        self.id.arity()
    }

    pub fn slots(&self) -> usize {
        self.shape.leaf_count()
    }

    pub fn ops(&self) -> Vec<Op> {
        self.shape.ops()
    }

    /// Formula label with letters, e.g. `((A+B)*C)`; single-op templates
    /// give `(x+y)`.
    pub fn formula_label(&self) -> &'static str {
        match self.id {
            TemplateId::Double { formula } => TWO_OP[formula as usize].0,
            TemplateId::Single { op, .. } => match op {
                Op::Add => "(x+y)",
                Op::Sub => "(x-y)",
                Op::Mul => "(x*y)",
                Op::Div => "(x/y)",
            },
        }
    }

    pub fn requires_brackets(&self) -> bool {
        self.shape.requires_brackets()
    }

    /// Substitute rendered operands into the phrasing.
    pub fn fill_text(&self, operands: &[String]) -> String {
        match self.id {
            TemplateId::Single { .. } => self.phrasing.replace("{x}", &operands[0]).replace("{y}", &operands[1]),
            TemplateId::Double { .. } => replace_slot_letters(self.phrasing, operands),
        }
    }
}

// Replaces standalone `A`, `B`, `C` words.
fn replace_slot_letters(phrasing: &str, operands: &[String]) -> String {
    let chars: Vec<char> = phrasing.chars().collect();
    let mut out = String::with_capacity(phrasing.len() + 32);
    for (i, &c) in chars.iter().enumerate() {
        let standalone = matches!(c, 'A' | 'B' | 'C')
            && (i == 0 || !chars[i - 1].is_alphanumeric())
            && chars.get(i + 1).is_none_or(|n| !n.is_alphanumeric());
        if standalone {
            out.push_str(&operands[(c as u8 - b'A') as usize]);
        } else {
            out.push(c);
        }
    }
    out
}

fn two_op_shape(label: &str) -> ArithExpr {
    let indexed: String = label
        .chars()
        .map(|c| match c {
            'A' => '0',
            'B' => '1',
            'C' => '2',
            other => other,
        })
        .collect();
    parse_calculator_call(&indexed).expect("catalog formula parses")
}

pub fn catalog(arity: u8) -> Vec<Template> {
    catalog_with(arity, Spelling::Corrected)
}

/// The fixed catalog for `arity` (1 or 2), ordered by format/formula id.
/// Any other arity yields an empty list.
pub fn catalog_with(arity: u8, spelling: Spelling) -> Vec<Template> {
    match arity {
        1 => (0..FORMAT_COUNT)
            .flat_map(|format| {
                Op::ALL.into_iter().map(move |op| Template {
                    id: TemplateId::Single { format, op },
                    shape: ArithExpr::node(op, ArithExpr::Leaf(0), ArithExpr::Leaf(1)),
                    phrasing: SINGLE_OP[format as usize][op.index()],
                })
            })
            .collect(),
        2 => TWO_OP
            .iter()
            .enumerate()
            .map(|(i, (label, corrected, verbatim))| Template {
                id: TemplateId::Double { formula: i as u8 },
                shape: two_op_shape(label),
                phrasing: match (spelling, verbatim) {
                    (Spelling::Verbatim, Some(v)) => v,
                    _ => corrected,
                },
            })
            .collect(),
        _ => Vec::new(),
    }
}

/// Every template of both arities.
pub fn full_catalog(spelling: Spelling) -> Vec<Template> {
    let mut all = catalog_with(1, spelling);
    all.extend(catalog_with(2, spelling));
    all
}

pub fn template(id: TemplateId, spelling: Spelling) -> Option<Template> {
    match id {
        TemplateId::Single { format, op } if format < FORMAT_COUNT => {
            catalog_with(1, spelling).into_iter().nth(format as usize * 4 + op.index())
        }
        TemplateId::Double { formula } if formula < FORMULA_COUNT => {
            catalog_with(2, spelling).into_iter().nth(formula as usize)
        }
        _ => None,
    }
}

/// The two-op formula with operators `(first, second)` in reading order that
/// needs no brackets. Every operator pair has exactly one.
pub fn bracket_free_formula(first: Op, second: Op) -> Template {
    catalog(2)
        .into_iter()
        .find(|t| !t.requires_brackets() && t.ops() == [first, second])
        .expect("each operator pair has a bracket-free formula")
}
