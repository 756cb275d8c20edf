//! Circuit IR for the gate set the lattice supports natively.
//!
//! Source format (UTF-8, one op per line):
//!
//! ```text
//! qubit c primal
//! qubit d dual
//! initz c
//! initx d
//!
//! cnot d c
//! measx d
//! ```
//!
//! A blank line closes the current timestep. A new timestep also opens
//! implicitly when a line touches a qubit already used in the current one,
//! so `initz q` followed directly by `measz q` is two steps. `#` starts a
//! comment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Primal,
    Dual,
}

impl Parity {
    pub fn opposite(self) -> Parity {
        match self {
            Parity::Primal => Parity::Dual,
            Parity::Dual => Parity::Primal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Primal => "primal",
            Parity::Dual => "dual",
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitDecl {
    pub id: String,
    pub parity: Parity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateOp {
    InitZ(String),
    InitX(String),
    MeasZ(String),
    MeasX(String),
    Identity(String),
    Cnot { control: String, target: String },
    MultiTargetCnot { control: String, targets: Vec<String> },
    /// Starts a qubit from an injected, noisy `(|0> + e^{i pi/4}|1>)/sqrt(2)`.
    InjectY(String),
}

/// Position of an op in a qubit's lifetime; used by the op-order check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpClass {
    Prepare,
    Body,
    Measure,
}

impl GateOp {
    pub fn keyword(&self) -> &'static str {
        match self {
            GateOp::InitZ(_) => "initz",
            GateOp::InitX(_) => "initx",
            GateOp::MeasZ(_) => "measz",
            GateOp::MeasX(_) => "measx",
            GateOp::Identity(_) => "id",
            GateOp::Cnot { .. } => "cnot",
            GateOp::MultiTargetCnot { .. } => "mcnot",
            GateOp::InjectY(_) => "inject_y",
        }
    }

    /// Operands in source order (control first for the CNOT family).
    pub fn qubits(&self) -> Vec<&str> {
        match self {
            GateOp::InitZ(q)
            | GateOp::InitX(q)
            | GateOp::MeasZ(q)
            | GateOp::MeasX(q)
            | GateOp::Identity(q)
            | GateOp::InjectY(q) => vec![q.as_str()],
            GateOp::Cnot { control, target } => vec![control.as_str(), target.as_str()],
            GateOp::MultiTargetCnot { control, targets } => {
                let mut v = vec![control.as_str()];
                v.extend(targets.iter().map(String::as_str));
                v
            }
        }
    }

    fn class(&self) -> OpClass {
        match self {
            GateOp::InitZ(_) | GateOp::InitX(_) | GateOp::InjectY(_) => OpClass::Prepare,
            GateOp::MeasZ(_) | GateOp::MeasX(_) => OpClass::Measure,
            _ => OpClass::Body,
        }
    }

    fn check_operands(&self) -> Result<(), String> {
        match self {
            GateOp::Cnot { control, target } if control == target => {
                Err(format!("cnot control and target are both `{control}`"))
            }
            GateOp::MultiTargetCnot { control, targets } => {
                if targets.is_empty() {
                    return Err("mcnot needs at least one target".into());
                }
                let mut seen = BTreeSet::new();
                for t in targets {
                    if t == control {
                        return Err(format!("mcnot target `{t}` is also the control"));
                    }
                    if !seen.insert(t) {
                        return Err(format!("mcnot target `{t}` repeated"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())?;
        for q in self.qubits() {
            write!(f, " {q}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Circuit {
    pub declarations: Vec<QubitDecl>,
    pub steps: Vec<Vec<GateOp>>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate qubit id `{id}`")]
    DuplicateQubit { line: usize, id: String },
    #[error("line {line}: unknown gate keyword `{keyword}`")]
    UnknownGate { line: usize, keyword: String },
}

impl Circuit {
    pub fn qubit(&self, id: &str) -> Option<&QubitDecl> {
        self.declarations.iter().find(|d| d.id == id)
    }

    pub fn parity_of(&self, id: &str) -> Option<Parity> {
        self.qubit(id).map(|d| d.parity)
    }

    pub fn num_qubits(&self) -> usize {
        self.declarations.len()
    }

    /// Ops touching each qubit, in step order, as `(step, op)`.
    pub fn ops_by_qubit(&self) -> BTreeMap<&str, Vec<(usize, &GateOp)>> {
        let mut out: BTreeMap<&str, Vec<(usize, &GateOp)>> =
            self.declarations.iter().map(|d| (d.id.as_str(), Vec::new())).collect();
        for (k, step) in self.steps.iter().enumerate() {
            for op in step {
                for q in op.qubits() {
                    out.entry(q).or_default().push((k, op));
                }
            }
        }
        out
    }

    /// A qubit is a circuit input when its first op is not a preparation.
    pub fn is_input(&self, id: &str) -> bool {
        let ops = self.ops_by_qubit();
        match ops.get(id).and_then(|v| v.first()) {
            Some((_, op)) => op.class() != OpClass::Prepare,
            None => true,
        }
    }

    /// A qubit is a circuit output when its last op is not a measurement.
    pub fn is_output(&self, id: &str) -> bool {
        let ops = self.ops_by_qubit();
        match ops.get(id).and_then(|v| v.last()) {
            Some((_, op)) => op.class() != OpClass::Measure,
            None => true,
        }
    }

    /// Canonical text form; `parse_circuit(render())` reproduces `self`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for d in &self.declarations {
            out.push_str(&format!("qubit {} {}\n", d.id, d.parity));
        }
        for step in &self.steps {
            out.push('\n');
            for op in step {
                out.push_str(&op.to_string());
                out.push('\n');
            }
        }
        out
    }
}

fn is_valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

pub fn parse_circuit(text: &str) -> Result<Circuit, ParseError> {
    let mut circuit = Circuit::default();
    let mut parities: BTreeMap<String, Parity> = BTreeMap::new();
    let mut current: Vec<GateOp> = Vec::new();
    let mut touched: BTreeSet<String> = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        if words.is_empty() {
            // A comment-only line does not close a step; a truly blank one does.
            if raw.trim().is_empty() && !current.is_empty() {
                circuit.steps.push(std::mem::take(&mut current));
                touched.clear();
            }
            continue;
        }
        let syntax = |message: String| ParseError::Syntax { line, message };
        let keyword = words[0];
        let args = &words[1..];

        if keyword == "qubit" {
            if args.len() != 2 {
                return Err(syntax("expected `qubit <id> <primal|dual>`".into()));
            }
            let id = args[0];
            if !is_valid_ident(id) {
                return Err(syntax(format!("invalid qubit id `{id}`")));
            }
            let parity = match args[1] {
                "primal" => Parity::Primal,
                "dual" => Parity::Dual,
                other => return Err(syntax(format!("unknown parity `{other}`"))),
            };
            if parities.insert(id.to_string(), parity).is_some() {
                return Err(ParseError::DuplicateQubit { line, id: id.to_string() });
            }
            circuit.declarations.push(QubitDecl { id: id.to_string(), parity });
            continue;
        }

        let owned: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        let single = |name: &str| -> Result<String, ParseError> {
            match owned.as_slice() {
                [q] => Ok(q.clone()),
                _ => Err(ParseError::Syntax {
                    line,
                    message: format!("`{name}` takes exactly one qubit"),
                }),
            }
        };
        let op = match keyword {
            "initz" => GateOp::InitZ(single(keyword)?),
            "initx" => GateOp::InitX(single(keyword)?),
            "measz" => GateOp::MeasZ(single(keyword)?),
            "measx" => GateOp::MeasX(single(keyword)?),
            "id" => GateOp::Identity(single(keyword)?),
            "inject_y" => GateOp::InjectY(single(keyword)?),
            "cnot" => match owned.as_slice() {
                [c, t] => GateOp::Cnot { control: c.clone(), target: t.clone() },
                _ => return Err(syntax("`cnot` takes a control and a target".into())),
            },
            "mcnot" => match owned.as_slice() {
                [c, rest @ ..] if !rest.is_empty() => {
                    GateOp::MultiTargetCnot { control: c.clone(), targets: rest.to_vec() }
                }
                _ => return Err(syntax("`mcnot` takes a control and one or more targets".into())),
            },
            other => return Err(ParseError::UnknownGate { line, keyword: other.to_string() }),
        };
        op.check_operands().map_err(syntax)?;
        for q in op.qubits() {
            if !parities.contains_key(q) {
                return Err(syntax(format!("qubit `{q}` used before declaration")));
            }
        }
        if op.qubits().iter().any(|q| touched.contains(*q)) {
            circuit.steps.push(std::mem::take(&mut current));
            touched.clear();
        }
        touched.extend(op.qubits().into_iter().map(String::from));
        current.push(op);
    }
    if !current.is_empty() {
        circuit.steps.push(current);
    }
    Ok(circuit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub step: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match self.step {
            Some(k) => write!(f, "{sev}: step {k}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Message attached to primal-primal CNOTs that the compiler expands.
pub const EXPANSION_NOTE: &str = "primal-primal cnot requires ancilla expansion (dual common control)";
pub const DUAL_CONTROL_NOTE: &str = "dual must be control";

pub fn validate_circuit(c: &Circuit) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut push = |severity, step, message: String| diags.push(Diagnostic { severity, step, message });

    let mut seen = BTreeSet::new();
    for d in &c.declarations {
        if !seen.insert(d.id.as_str()) {
            push(Severity::Error, None, format!("duplicate qubit id `{}`", d.id));
        }
    }

    for (k, step) in c.steps.iter().enumerate() {
        let mut used = BTreeSet::new();
        for op in step {
            if let Err(e) = op.check_operands() {
                push(Severity::Error, Some(k), e);
            }
            for q in op.qubits() {
                if c.qubit(q).is_none() {
                    push(Severity::Error, Some(k), format!("undeclared qubit `{q}`"));
                }
                if !used.insert(q) {
                    push(Severity::Error, Some(k), format!("qubit `{q}` used twice in one step"));
                }
            }
            match op {
                GateOp::Cnot { control, target } => {
                    match (c.parity_of(control), c.parity_of(target)) {
                        (Some(Parity::Primal), Some(Parity::Dual)) => {
                            push(Severity::Error, Some(k), format!("cnot {control} {target}: {DUAL_CONTROL_NOTE}"))
                        }
                        (Some(Parity::Primal), Some(Parity::Primal)) => {
                            push(Severity::Info, Some(k), format!("cnot {control} {target}: {EXPANSION_NOTE}"))
                        }
                        (Some(Parity::Dual), Some(Parity::Dual)) => push(
                            Severity::Error,
                            Some(k),
                            format!("cnot {control} {target}: same-type defects do not interact"),
                        ),
                        _ => {}
                    }
                }
                GateOp::MultiTargetCnot { control, targets } => {
                    if c.parity_of(control) == Some(Parity::Primal) {
                        push(Severity::Error, Some(k), format!("mcnot {control}: {DUAL_CONTROL_NOTE}"));
                    }
                    for t in targets {
                        if c.parity_of(t) == Some(Parity::Dual) {
                            push(
                                Severity::Error,
                                Some(k),
                                format!("mcnot target `{t}` is dual; targets must be primal"),
                            );
                        }
                    }
                }
                _ => {}
            }
        }
    }

    // Per-qubit lifetime: (Prepare)? Body* (Measure)?
    for (q, ops) in c.ops_by_qubit() {
        let mut measured = false;
        for (i, (k, op)) in ops.iter().enumerate() {
            if measured {
                push(Severity::Error, Some(*k), format!("`{op}` on `{q}` after its measurement"));
                break;
            }
            match op.class() {
                OpClass::Prepare if i > 0 => {
                    push(Severity::Error, Some(*k), format!("`{op}` must be the first op on `{q}`"));
                }
                OpClass::Measure => measured = true,
                _ => {}
            }
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_empty_circuit() {
        let c = parse_circuit("").unwrap();
        assert_eq!(c.num_qubits(), 0);
        assert!(c.steps.is_empty());
    }

    #[test]
    fn smallest_program_has_two_steps() {
        let c = parse_circuit("qubit q0 primal\ninitz q0\nmeasz q0").unwrap();
        assert_eq!(c.num_qubits(), 1);
        assert_eq!(c.steps.len(), 2);
        assert!(validate_circuit(&c).is_empty());
    }

    #[test]
    fn blank_line_separates_steps_and_comments_do_not() {
        let src = "qubit a primal\nqubit b primal\ninitz a\n# note\ninitz b\n\nid a\nid b # trailing\n";
        let c = parse_circuit(src).unwrap();
        assert_eq!(c.steps.len(), 2);
        assert_eq!(c.steps[0].len(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!(
            parse_circuit("qubit a primal\nqubit a dual"),
            Err(ParseError::DuplicateQubit { line: 2, id: "a".into() })
        );
        assert_eq!(
            parse_circuit("qubit a primal\n\nhadamard a"),
            Err(ParseError::UnknownGate { line: 3, keyword: "hadamard".into() })
        );
        assert!(matches!(parse_circuit("qubit a primal\ncnot a a"), Err(ParseError::Syntax { line: 2, .. })));
        assert!(matches!(parse_circuit("initz ghost"), Err(ParseError::Syntax { line: 1, .. })));
        assert!(matches!(parse_circuit("qubit a sideways"), Err(ParseError::Syntax { line: 1, .. })));
    }

    #[test]
    fn dual_target_is_flagged() {
        let c = parse_circuit("qubit p primal\nqubit d dual\ncnot p d").unwrap();
        let diags = validate_circuit(&c);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Error);
        assert!(diags[0].message.contains(DUAL_CONTROL_NOTE));
    }

    #[test]
    fn primal_primal_cnot_is_info() {
        let c = parse_circuit("qubit c primal\nqubit t primal\ncnot c t").unwrap();
        let diags = validate_circuit(&c);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Info);
        assert!(!has_errors(&diags));
    }

    #[test]
    fn lifetime_order_is_enforced() {
        let c = parse_circuit("qubit q primal\nid q\ninitz q").unwrap();
        assert!(has_errors(&validate_circuit(&c)));
        let c = parse_circuit("qubit q primal\nmeasz q\nid q").unwrap();
        assert!(has_errors(&validate_circuit(&c)));
        let c = parse_circuit("qubit q primal\nid q\nmeasz q").unwrap();
        assert!(c.is_input("q"));
        assert!(!c.is_output("q"));
    }

    #[test]
    fn render_is_canonical() {
        let src = "qubit d dual\nqubit a primal\nqubit b primal\ninitx d\ninitz a\n\nmcnot d a b\n\nmeasx d\n";
        let c = parse_circuit(src).unwrap();
        let again = parse_circuit(&c.render()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.render(), again.render());
    }
}
