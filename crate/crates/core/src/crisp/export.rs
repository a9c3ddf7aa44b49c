//! Text and Graphviz renderings of crisp policies.
//!
//! The text form is nested `if`/`else` with two-space indentation:
//!
//! ```text
//! if theta_dot > 0.0:
//!   if x > 1.5: left
//!   else: right
//! else: left
//! ```
//!
//! A leaf child is written on the same line as its `if`/`else` header, any
//! other child on the following lines, indented two more spaces. A policy that
//! is a single leaf is just the action name. Thresholds are written in Rust's
//! shortest round-trip float format, so [`parse_text`] recovers them exactly.

use std::fmt::Write as _;

use super::{CrispNode, CrispPolicy, PolicyKind};
use crate::error::CrispError;

/// Display names for features and actions.
#[derive(Debug, Clone, PartialEq)]
pub struct NameTable {
    pub features: Vec<String>,
    pub actions: Vec<String>,
}

impl NameTable {
    /// `x0, x1, ...` and `a0, a1, ...`.
    pub fn generic(d: usize, n_actions: usize) -> Self {
        Self {
            features: (0..d).map(|j| format!("x{j}")).collect(),
            actions: (0..n_actions).map(|a| format!("a{a}")).collect(),
        }
    }

    pub fn new<S: Into<String>>(features: impl IntoIterator<Item = S>, actions: impl IntoIterator<Item = S>) -> Self {
        Self {
            features: features.into_iter().map(Into::into).collect(),
            actions: actions.into_iter().map(Into::into).collect(),
        }
    }

    fn check(&self, d: usize, n_actions: usize) -> Result<(), CrispError> {
        if self.features.len() != d {
            return Err(CrispError::NameArity {
                kind: "feature",
                expected: d,
                actual: self.features.len(),
            });
        }
        if self.actions.len() != n_actions {
            return Err(CrispError::NameArity {
                kind: "action",
                expected: n_actions,
                actual: self.actions.len(),
            });
        }
        for name in self.features.iter().chain(&self.actions) {
            if name.is_empty() || name.contains(':') || name.chars().any(char::is_whitespace) {
                return Err(CrispError::InvalidName(name.clone()));
            }
        }
        Ok(())
    }
}

impl CrispPolicy {
    pub fn to_text(&self, names: &NameTable) -> Result<String, CrispError> {
        names.check(self.d, self.n_actions)?;
        let mut out = String::new();
        match &self.root {
            CrispNode::Leaf(a) => out.push_str(&names.actions[*a]),
            split => write_split(&mut out, split, 0, names),
        }
        out.push('\n');
        Ok(out)
    }

    pub fn to_dot(&self, names: &NameTable) -> Result<String, CrispError> {
        names.check(self.d, self.n_actions)?;
        let mut out = String::from("digraph policy {\n  node [fontname=\"Helvetica\"];\n");
        let mut next = 0;
        write_dot(&mut out, &self.root, &mut next, names);
        out.push_str("}\n");
        Ok(out)
    }
}

fn write_split(out: &mut String, node: &CrispNode, indent: usize, names: &NameTable) {
    let CrispNode::Split {
        feature,
        threshold,
        t,
        f,
    } = node
    else {
        unreachable!("leaves are written inline")
    };
    let pad = " ".repeat(indent);
    let _ = write!(out, "{pad}if {} > {threshold:?}:", names.features[*feature]);
    write_child(out, t, indent, names);
    let _ = write!(out, "\n{pad}else:");
    write_child(out, f, indent, names);
}

fn write_child(out: &mut String, child: &CrispNode, indent: usize, names: &NameTable) {
    match child {
        CrispNode::Leaf(a) => {
            out.push(' ');
            out.push_str(&names.actions[*a]);
        }
        split => {
            out.push('\n');
            write_split(out, split, indent + 2, names);
        }
    }
}

fn write_dot(out: &mut String, node: &CrispNode, next: &mut usize, names: &NameTable) -> usize {
    let id = *next;
    *next += 1;
    match node {
        CrispNode::Leaf(a) => {
            let _ = writeln!(out, "  n{id} [label=\"{}\", shape=ellipse];", names.actions[*a]);
        }
        CrispNode::Split {
            feature,
            threshold,
            t,
            f,
        } => {
            let _ = writeln!(
                out,
                "  n{id} [label=\"{} > {threshold:?}\", shape=box];",
                names.features[*feature]
            );
            let ti = write_dot(out, t, next, names);
            let fi = write_dot(out, f, next, names);
            let _ = writeln!(out, "  n{id} -> n{ti} [label=\"true\"];");
            let _ = writeln!(out, "  n{id} -> n{fi} [label=\"false\"];");
        }
    }
    id
}

struct Line<'a> {
    no: usize,
    indent: usize,
    text: &'a str,
}

/// Parses the output of [`CrispPolicy::to_text`] back into a policy.
pub fn parse_text(text: &str, names: &NameTable, kind: PolicyKind) -> Result<CrispPolicy, CrispError> {
    let d = names.features.len();
    let n_actions = names.actions.len();
    names.check(d, n_actions)?;
    let lines: Vec<Line> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let body = l.trim_start_matches(' ');
            Line {
                no: i + 1,
                indent: l.len() - body.len(),
                text: body.trim_end(),
            }
        })
        .collect();
    if lines.is_empty() {
        return Err(CrispError::Parse {
            line: 0,
            msg: "empty policy".into(),
        });
    }
    let mut pos = 0;
    let root = parse_node(&lines, &mut pos, 0, names)?;
    if let Some(extra) = lines.get(pos) {
        return Err(CrispError::Parse {
            line: extra.no,
            msg: "unexpected trailing line".into(),
        });
    }
    CrispPolicy::new(d, n_actions, kind, root)
}

fn parse_action(s: &str, line: usize, names: &NameTable) -> Result<CrispNode, CrispError> {
    names
        .actions
        .iter()
        .position(|a| a == s)
        .map(CrispNode::Leaf)
        .ok_or_else(|| CrispError::Parse {
            line,
            msg: format!("unknown action {s:?}"),
        })
}

fn parse_node(lines: &[Line], pos: &mut usize, indent: usize, names: &NameTable) -> Result<CrispNode, CrispError> {
    let Some(line) = lines.get(*pos) else {
        return Err(CrispError::Parse {
            line: lines.last().map_or(0, |l| l.no),
            msg: "unexpected end of input".into(),
        });
    };
    let err = |msg: String| CrispError::Parse { line: line.no, msg };
    if line.indent != indent {
        return Err(err(format!("expected indentation {indent}, found {}", line.indent)));
    }
    *pos += 1;
    let Some(rest) = line.text.strip_prefix("if ") else {
        return parse_action(line.text, line.no, names);
    };
    let (cond, inline) = rest
        .split_once(':')
        .ok_or_else(|| err("missing ':' after condition".into()))?;
    let (feat, thr) = cond
        .split_once(" > ")
        .ok_or_else(|| err("condition must read '<feature> > <threshold>'".into()))?;
    let feature = names
        .features
        .iter()
        .position(|f| f == feat.trim())
        .ok_or_else(|| err(format!("unknown feature {:?}", feat.trim())))?;
    let threshold: f64 = thr
        .trim()
        .parse()
        .map_err(|_| err(format!("bad threshold {:?}", thr.trim())))?;
    let t = parse_branch(lines, pos, indent, inline, line.no, names)?;

    let Some(else_line) = lines.get(*pos) else {
        return Err(err("missing else branch".into()));
    };
    let inline = match else_line.text.strip_prefix("else:") {
        Some(rest) if else_line.indent == indent => rest,
        _ => {
            return Err(CrispError::Parse {
                line: else_line.no,
                msg: "expected 'else:'".into(),
            })
        }
    };
    *pos += 1;
    let f = parse_branch(lines, pos, indent, inline, else_line.no, names)?;
    Ok(CrispNode::split(feature, threshold, t, f))
}

fn parse_branch(
    lines: &[Line],
    pos: &mut usize,
    indent: usize,
    inline: &str,
    line_no: usize,
    names: &NameTable,
) -> Result<CrispNode, CrispError> {
    let inline = inline.trim();
    if inline.is_empty() {
        parse_node(lines, pos, indent + 2, names)
    } else {
        parse_action(inline, line_no, names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crisp::discretize_tree;
    use crate::tree::{Interpretation, SoftTree};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single() -> CrispPolicy {
        CrispPolicy::new(
            1,
            2,
            PolicyKind::Tree,
            CrispNode::split(0, 2.5, CrispNode::Leaf(1), CrispNode::Leaf(0)),
        )
        .unwrap()
    }

    #[test]
    fn single_node_text() {
        let text = single().to_text(&NameTable::generic(1, 2)).unwrap();
        assert_eq!(text, "if x0 > 2.5: a1\nelse: a0\n");
        let names = NameTable::new(["state"], ["a1", "a2"]);
        assert_eq!(single().to_text(&names).unwrap(), "if state > 2.5: a2\nelse: a1\n");
    }

    #[test]
    fn single_node_dot() {
        let dot = single().to_dot(&NameTable::generic(1, 2)).unwrap();
        assert!(dot.starts_with("digraph policy {"));
        assert_eq!(dot.matches("shape=").count(), 3);
        assert_eq!(dot.matches("->").count(), 2);
        assert!(dot.contains("n0 -> n1 [label=\"true\"]"));
        assert!(dot.contains("n0 -> n2 [label=\"false\"]"));
        assert!(dot.contains("label=\"a1\""));
    }

    #[test]
    fn leaf_only_policy() {
        let p = CrispPolicy::new(2, 2, PolicyKind::Tree, CrispNode::Leaf(1)).unwrap();
        let names = NameTable::generic(2, 2);
        assert_eq!(p.to_text(&names).unwrap(), "a1\n");
        assert_eq!(parse_text("a1\n", &names, PolicyKind::Tree).unwrap(), p);
    }

    #[test]
    fn name_table_arity_is_checked() {
        let err = single().to_text(&NameTable::generic(2, 2)).unwrap_err();
        assert!(matches!(err, CrispError::NameArity { kind: "feature", .. }));
        let err = single().to_dot(&NameTable::generic(1, 3)).unwrap_err();
        assert!(matches!(err, CrispError::NameArity { kind: "action", .. }));
        let bad = NameTable::new(["has space"], ["a", "b"]);
        assert!(matches!(single().to_text(&bad), Err(CrispError::InvalidName(_))));
    }

    #[test]
    fn nested_text_layout() {
        let root = CrispNode::split(
            3,
            0.0,
            CrispNode::split(0, 1.5, CrispNode::Leaf(0), CrispNode::Leaf(1)),
            CrispNode::Leaf(0),
        );
        let p = CrispPolicy::new(4, 2, PolicyKind::Tree, root).unwrap();
        let names = NameTable::new(["x", "x_dot", "theta", "theta_dot"], ["left", "right"]);
        let text = p.to_text(&names).unwrap();
        assert_eq!(
            text,
            "if theta_dot > 0.0:\n  if x > 1.5: left\n  else: right\nelse: left\n"
        );
        assert_eq!(parse_text(&text, &names, PolicyKind::Tree).unwrap(), p);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let names = NameTable::generic(1, 2);
        let err = parse_text("if x0 > 1.0: a1\nelse: a9\n", &names, PolicyKind::Tree).unwrap_err();
        assert!(matches!(err, CrispError::Parse { line: 2, .. }));
        let err = parse_text("if x0 > 1.0: a1\n", &names, PolicyKind::Tree).unwrap_err();
        assert!(matches!(err, CrispError::Parse { .. }));
        let err = parse_text("if x0 > 1.0:\na1\nelse: a0\n", &names, PolicyKind::Tree).unwrap_err();
        assert!(matches!(err, CrispError::Parse { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn text_round_trip(seed in any::<u64>(), depth in 1usize..5, list in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let soft = if list {
                SoftTree::rule_list(depth * 2, 3, 4, Interpretation::Policy, &mut rng)
            } else {
                SoftTree::balanced(depth, 3, 4, Interpretation::Policy, &mut rng)
            };
            let p = discretize_tree(&soft).unwrap();
            let names = NameTable::generic(3, 4);
            let back = parse_text(&p.to_text(&names).unwrap(), &names, p.kind).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
