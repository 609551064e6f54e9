//! Line-oriented circuit text format.
//!
//! ```text
//! # comment
//! qubits 4
//! output 0
//! register counter 1 2
//! h 0
//! cx 0 3
//! mcx 0 3 2
//! thr 2 0 1 2
//! ctrl 2 0 1 t 3
//! ```
//!
//! `qubits` must come first. Gate lines are `h|t|tdg|s|sdg|x|z q`,
//! `cx c t`, `cz a b` (control `a`), `mcx c.. t`, `mch c.. t`,
//! `incr q..`, `incrdg q..`, `cincr c q..`, `cincrdg c q..` and
//! `thr t flag q..`, with counters listed most significant first. Any gate
//! line can be prefixed by `ctrl n c1 .. cn` to add controls. `register`
//! lines name a range of qubits and are optional.

use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, Op, RegisterLayout};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Circuit { line: usize, source: CircuitError },
    #[error("missing `qubits` header")]
    MissingHeader,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCircuit {
    pub circuit: Circuit,
    /// Present when the text declares at least one register.
    pub layout: Option<RegisterLayout>,
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

fn numbers(line: usize, words: &[&str]) -> Result<Vec<usize>, FormatError> {
    words
        .iter()
        .map(|w| {
            w.parse::<usize>()
                .map_err(|_| syntax(line, format!("expected a qubit index, got `{w}`")))
        })
        .collect()
}

fn exactly(line: usize, name: &str, args: &[usize], n: usize) -> Result<(), FormatError> {
    if args.len() != n {
        return Err(syntax(
            line,
            format!("`{name}` takes {n} argument(s), got {}", args.len()),
        ));
    }
    Ok(())
}

fn at_least(line: usize, name: &str, args: &[usize], n: usize) -> Result<(), FormatError> {
    if args.len() < n {
        return Err(syntax(
            line,
            format!("`{name}` takes at least {n} argument(s), got {}", args.len()),
        ));
    }
    Ok(())
}

fn parse_gate(line: usize, words: &[&str]) -> Result<Gate, FormatError> {
    let name = words[0];
    if name == "ctrl" {
        let n: usize = words
            .get(1)
            .ok_or_else(|| syntax(line, "`ctrl` needs a control count"))?
            .parse()
            .map_err(|_| syntax(line, "malformed control count"))?;
        if words.len() < 2 + n + 1 {
            return Err(syntax(line, format!("`ctrl {n}` needs {n} controls and a gate")));
        }
        let controls = numbers(line, &words[2..2 + n])?;
        let inner = parse_gate(line, &words[2 + n..])?;
        return Ok(inner.controlled_by(&controls));
    }
    if name == "thr" {
        let t: u64 = words
            .get(1)
            .ok_or_else(|| syntax(line, "`thr` needs a threshold"))?
            .parse()
            .map_err(|_| syntax(line, "malformed threshold"))?;
        let args = numbers(line, &words[2..])?;
        at_least(line, name, &args, 2)?;
        return Ok(Gate::threshold(t, args[0], &args[1..]));
    }
    let args = numbers(line, &words[1..])?;
    let single = |op: Op| -> Result<Gate, FormatError> {
        exactly(line, name, &args, 1)?;
        Ok(Gate::new(op, Vec::new(), args.clone()))
    };
    match name {
        "h" => single(Op::H),
        "t" => single(Op::T),
        "tdg" => single(Op::Tdg),
        "s" => single(Op::S),
        "sdg" => single(Op::Sdg),
        "x" => single(Op::X),
        "z" => single(Op::Z),
        "cx" => {
            exactly(line, name, &args, 2)?;
            Ok(Gate::cx(args[0], args[1]))
        }
        "cz" => {
            exactly(line, name, &args, 2)?;
            Ok(Gate::cz(args[0], args[1]))
        }
        "mcx" | "mch" => {
            at_least(line, name, &args, 1)?;
            let (c, t) = args.split_at(args.len() - 1);
            Ok(if name == "mcx" {
                Gate::mcx(c, t[0])
            } else {
                Gate::mch(c, t[0])
            })
        }
        "incr" => {
            at_least(line, name, &args, 1)?;
            Ok(Gate::incr(&args))
        }
        "incrdg" => {
            at_least(line, name, &args, 1)?;
            Ok(Gate::incr_dg(&args))
        }
        "cincr" | "cincrdg" => {
            at_least(line, name, &args, 2)?;
            let op = if name == "cincr" { Op::Incr } else { Op::IncrDg };
            Ok(Gate::new(op, vec![args[0]], args[1..].to_vec()))
        }
        other => Err(syntax(line, format!("unknown directive `{other}`"))),
    }
}

pub fn parse_circuit(text: &str) -> Result<ParsedCircuit, FormatError> {
    let mut circuit: Option<Circuit> = None;
    let mut output_seen = false;
    let mut layout = RegisterLayout::new();
    let mut any_register = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match (words[0], circuit.as_mut()) {
            ("qubits", None) => {
                if words.len() != 2 {
                    return Err(syntax(line, "`qubits` takes one argument"));
                }
                let w: usize = words[1].parse().map_err(|_| syntax(line, "malformed qubit count"))?;
                circuit = Some(Circuit::new(w, 0).map_err(|source| FormatError::Circuit { line, source })?);
            }
            ("qubits", Some(_)) => return Err(syntax(line, "duplicate `qubits` header")),
            (_, None) => return Err(syntax(line, "expected `qubits` header first")),
            ("output", Some(c)) => {
                if output_seen || !c.is_empty() {
                    return Err(syntax(line, "`output` must appear once, before any gate"));
                }
                let args = numbers(line, &words[1..])?;
                exactly(line, "output", &args, 1)?;
                *c = c
                    .clone()
                    .with_output(args[0])
                    .map_err(|source| FormatError::Circuit { line, source })?;
                output_seen = true;
            }
            ("register", Some(c)) => {
                if words.len() != 4 {
                    return Err(syntax(line, "`register` takes a name, a start and a length"));
                }
                let nums = numbers(line, &words[2..])?;
                if nums[0] + nums[1] > c.width() {
                    return Err(FormatError::Circuit {
                        line,
                        source: CircuitError::QubitOutOfRange {
                            qubit: nums[0] + nums[1] - 1,
                            width: c.width(),
                        },
                    });
                }
                layout.insert(words[1], nums[0], nums[1]);
                any_register = true;
            }
            (_, Some(c)) => {
                let gate = parse_gate(line, &words)?;
                c.push(gate).map_err(|source| FormatError::Circuit { line, source })?;
            }
        }
    }
    let circuit = circuit.ok_or(FormatError::MissingHeader)?;
    Ok(ParsedCircuit {
        circuit,
        layout: any_register.then_some(layout),
    })
}

fn join(qs: &[usize]) -> String {
    qs.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ")
}

/// The canonical line for a gate; controls beyond what the named forms
/// carry go into a `ctrl` prefix.
pub fn gate_line(g: &Gate) -> String {
    let c = g.controls();
    let t = g.targets();
    match (g.op(), c.len()) {
        (Op::X, 1) => format!("cx {} {}", c[0], t[0]),
        (Op::Z, 1) => format!("cz {} {}", c[0], t[0]),
        (Op::X, n) if n >= 2 => format!("mcx {} {}", join(c), t[0]),
        (Op::H, n) if n >= 1 => format!("mch {} {}", join(c), t[0]),
        (Op::Incr, 1) => format!("cincr {} {}", c[0], join(t)),
        (Op::IncrDg, 1) => format!("cincrdg {} {}", c[0], join(t)),
        (Op::Threshold(th), 0) => format!("thr {th} {}", join(t)),
        (op, 0) => format!("{} {}", op.mnemonic(), join(t)),
        (_, n) => {
            let inner = Gate::new(g.op(), Vec::new(), t.to_vec());
            format!("ctrl {n} {} {}", join(c), gate_line(&inner))
        }
    }
}

pub fn emit_circuit(circuit: &Circuit) -> String {
    emit_circuit_with_layout(circuit, None)
}

pub fn emit_circuit_with_layout(circuit: &Circuit, layout: Option<&RegisterLayout>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qubits {}", circuit.width());
    let _ = writeln!(out, "output {}", circuit.output_qubit());
    if let Some(layout) = layout {
        for r in layout.entries() {
            let _ = writeln!(out, "register {} {} {}", r.name, r.start, r.len);
        }
    }
    for g in circuit.gates() {
        out.push_str(&gate_line(g));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let p = parse_circuit("qubits 1\nh 0\n").unwrap();
        assert_eq!(p.circuit.gates(), &[Gate::h(0)]);
        let p = parse_circuit("qubits 2\ncx 1 0\n").unwrap();
        assert_eq!(p.circuit.gates(), &[Gate::cx(1, 0)]);
        match parse_circuit("qubits 2\ncx 5 0\n") {
            Err(FormatError::Circuit { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(emit_circuit(&Circuit::new(3, 0).unwrap()), "qubits 3\noutput 0\n");
        let c = Circuit::from_gates(1, 0, vec![Gate::h(0), Gate::t(0)]).unwrap();
        assert_eq!(emit_circuit(&c), "qubits 1\noutput 0\nh 0\nt 0\n");
    }

    #[test]
    fn rejects_malformed_lines() {
        for (text, line) in [
            ("h 0\n", 1),
            ("qubits 2\nfoo 1\n", 2),
            ("qubits 2\n\n# c\nh\n", 4),
            ("qubits 2\nh x\n", 2),
            ("qubits 2\nh 0\noutput 1\n", 3),
            ("qubits 2\nthr 9 0 1\n", 2),
            ("qubits 2\nctrl 3 0 h 1\n", 2),
        ] {
            let err = parse_circuit(text).unwrap_err();
            let got = match err {
                FormatError::Syntax { line, .. } | FormatError::Circuit { line, .. } => line,
                FormatError::MissingHeader => 0,
            };
            assert_eq!(got, line, "{text:?}: {err}");
        }
        assert_eq!(parse_circuit("# nothing\n"), Err(FormatError::MissingHeader));
    }

    #[test]
    fn controlled_forms_round_trip() {
        let gates = vec![
            Gate::new(Op::T, vec![2], vec![0]),
            Gate::new(Op::Sdg, vec![1, 2], vec![0]),
            Gate::new(Op::Z, vec![1, 2], vec![3]),
            Gate::new(Op::Threshold(1), vec![3], vec![0, 1, 2]),
            Gate::new(Op::Incr, vec![3, 0], vec![1, 2]),
            Gate::new(Op::IncrDg, vec![3], vec![1, 2]),
            Gate::mch(&[0, 1], 2),
        ];
        let c = Circuit::from_gates(4, 2, gates).unwrap();
        let mut layout = RegisterLayout::new();
        layout.alloc("a", 1);
        layout.alloc("b", 3);
        let text = emit_circuit_with_layout(&c, Some(&layout));
        let back = parse_circuit(&text).unwrap();
        assert_eq!(back.circuit, c);
        assert_eq!(back.layout, Some(layout));
    }
}
