//! KISS2 parsing and writing, plus the XKISS extension.
//!
//! KISS2 documents carry `.i`/`.o` arity directives, optional `.s`/`.p`
//! counts, an optional `.r <state>` reset directive and transition lines of
//! the form `IN CUR NEXT OUT` where `IN` and `OUT` are cubes over the input
//! and output columns (`0`, `1`, `-`).  The leftmost column of a field is
//! proposition 0.  `#` starts a comment, `.e` or `.end` terminates.
//!
//! XKISS extends KISS2 in two ways: the `OUT` field may be several cubes
//! joined by `|` (no spaces), denoting the union of their expansions, and
//! multiple lines for the same `(state, input valuation)` with an equal
//! `NEXT` union their output sets.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::boolset::{disjoint_cube_cover, Cube, PropSet, ValuationSet, DEFAULT_MAX_PROPS};
use crate::machine::{Igmm, MachineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Kiss2,
    Xkiss,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Kiss2 => write!(f, "kiss2"),
            Format::Xkiss => write!(f, "xkiss"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}{}: {kind}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
pub struct ParseError {
    pub line: usize,
    pub col: Option<usize>,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("malformed directive: {0}")]
    BadDirective(String),
    #[error("transition line must have 4 fields (IN CUR NEXT OUT), found {0}")]
    BadLine(usize),
    #[error("field {field:?} has length {got}, expected {expected}")]
    FieldArity {
        field: String,
        got: usize,
        expected: usize,
    },
    #[error("invalid character {0:?} in cube field (expected '0', '1' or '-')")]
    BadCubeChar(char),
    #[error("'|' in output field is only valid in XKISS")]
    PipeInKiss2,
    #[error("missing .i/.o directive before transition lines")]
    MissingArity,
    #[error("nondeterministic entry: state {state:?} on input {input} goes to both {a:?} and {b:?}")]
    Nondeterministic {
        state: String,
        input: String,
        a: String,
        b: String,
    },
    #[error("no transition lines and no .r directive: cannot determine reset state")]
    NoResetState,
    #[error("{0} propositions exceed the configured cap of {1}")]
    TooManyProps(usize, usize),
    #[error("{0}")]
    Machine(String),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError {
        line,
        col: None,
        kind,
    }
}

/// Picks XKISS when a `|` output union or a duplicate `(state, input
/// valuation)` line is present, plain KISS2 otherwise.
pub fn detect_format(text: &str) -> Format {
    let mut seen: std::collections::HashSet<(String, String)> = Default::default();
    for raw in text.lines() {
        let line = strip_comment(raw).trim();
        if line.is_empty() || line.starts_with('.') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() == 4 {
            if fields[3].contains('|') {
                return Format::Xkiss;
            }
            if !seen.insert((fields[1].to_string(), fields[0].to_string())) {
                return Format::Xkiss;
            }
        }
    }
    Format::Kiss2
}

/// Parses with format autodetection and the default proposition cap.
pub fn parse_auto(text: &str) -> Result<Igmm, ParseError> {
    parse(text, detect_format(text), DEFAULT_MAX_PROPS)
}

pub fn parse_kiss2(text: &str) -> Result<Igmm, ParseError> {
    parse(text, Format::Kiss2, DEFAULT_MAX_PROPS)
}

pub fn parse_xkiss(text: &str) -> Result<Igmm, ParseError> {
    parse(text, Format::Xkiss, DEFAULT_MAX_PROPS)
}

struct RawLine {
    line_no: usize,
    input: String,
    cur: String,
    next: String,
    out: String,
}

pub fn parse(text: &str, format: Format, max_props: usize) -> Result<Igmm, ParseError> {
    let mut n_in: Option<usize> = None;
    let mut n_out: Option<usize> = None;
    let mut reset: Option<String> = None;
    let mut lines: Vec<RawLine> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('.') {
            let mut it = rest.split_whitespace();
            let dir = it.next().unwrap_or("");
            let arg = it.next();
            match dir {
                "i" => n_in = Some(parse_count(arg, line_no, max_props)?),
                "o" => n_out = Some(parse_count(arg, line_no, max_props)?),
                "s" | "p" => {
                    // state/line counts are informational; ignore the value
                    if arg.map(|a| a.parse::<usize>().is_err()).unwrap_or(true) {
                        return Err(err(
                            line_no,
                            ParseErrorKind::BadDirective(line.to_string()),
                        ));
                    }
                }
                "r" => match arg {
                    Some(a) => reset = Some(a.to_string()),
                    None => {
                        return Err(err(
                            line_no,
                            ParseErrorKind::BadDirective(line.to_string()),
                        ))
                    }
                },
                "e" | "end" => break,
                _ => {
                    return Err(err(
                        line_no,
                        ParseErrorKind::BadDirective(line.to_string()),
                    ))
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(line_no, ParseErrorKind::BadLine(fields.len())));
        }
        lines.push(RawLine {
            line_no,
            input: fields[0].to_string(),
            cur: fields[1].to_string(),
            next: fields[2].to_string(),
            out: fields[3].to_string(),
        });
    }

    let (n_in, n_out) = match (n_in, n_out) {
        (Some(i), Some(o)) => (i, o),
        _ => {
            let line_no = lines.first().map(|l| l.line_no).unwrap_or(1);
            return Err(err(line_no, ParseErrorKind::MissingArity));
        }
    };

    // State indices in order of first appearance in the lines.
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let intern = |name: &str, names: &mut Vec<String>, index: &mut HashMap<String, usize>| {
        *index.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };
    for l in &lines {
        intern(&l.cur, &mut names, &mut index);
        intern(&l.next, &mut names, &mut index);
    }
    let init = match &reset {
        Some(r) => intern(r, &mut names, &mut index),
        None => match lines.first() {
            Some(l) => index[&l.cur],
            None => return Err(err(1, ParseErrorKind::NoResetState)),
        },
    };

    let mut table: Vec<Vec<Option<(usize, ValuationSet)>>> =
        vec![vec![None; 1usize << n_in]; names.len()];

    for l in &lines {
        let in_cube = parse_cube(&l.input, n_in, l.line_no, 0)?;
        let out_set = parse_out_field(&l.out, n_out, format, l.line_no)?;
        let q = index[&l.cur];
        let target = index[&l.next];
        for v in in_cube.to_set(n_in).expect("arity checked").iter() {
            let slot = &mut table[q][v.index()];
            match slot {
                None => *slot = Some((target, out_set.clone())),
                Some((t, out)) => {
                    if *t != target {
                        return Err(err(
                            l.line_no,
                            ParseErrorKind::Nondeterministic {
                                state: l.cur.clone(),
                                input: l.input.clone(),
                                a: names[*t].clone(),
                                b: l.next.clone(),
                            },
                        ));
                    }
                    *out = out.union(&out_set).expect("equal arity");
                }
            }
        }
    }

    let inputs = PropSet::numbered("i", n_in, max_props)
        .map_err(|e| err(1, ParseErrorKind::Machine(e.to_string())))?;
    let outputs = PropSet::numbered("o", n_out, max_props)
        .map_err(|e| err(1, ParseErrorKind::Machine(e.to_string())))?;
    let mut b = Igmm::builder(inputs, outputs, names.len())
        .init(init)
        .names(names);
    for (q, row) in table.into_iter().enumerate() {
        for (i, e) in row.into_iter().enumerate() {
            if let Some((target, out)) = e {
                b = b.entry(q, i, target, out);
            }
        }
    }
    b.build()
        .map_err(|e: MachineError| err(1, ParseErrorKind::Machine(e.to_string())))
}

fn parse_count(arg: Option<&str>, line_no: usize, max: usize) -> Result<usize, ParseError> {
    let n: usize = arg
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| err(line_no, ParseErrorKind::BadDirective(format!(".directive {arg:?}"))))?;
    if n > max {
        return Err(err(line_no, ParseErrorKind::TooManyProps(n, max)));
    }
    Ok(n)
}

fn parse_cube(field: &str, arity: usize, line_no: usize, col0: usize) -> Result<Cube, ParseError> {
    if field.len() != arity {
        return Err(err(
            line_no,
            ParseErrorKind::FieldArity {
                field: field.to_string(),
                got: field.len(),
                expected: arity,
            },
        ));
    }
    let mut care = 0u32;
    let mut value = 0u32;
    for (j, ch) in field.chars().enumerate() {
        match ch {
            '0' => care |= 1 << j,
            '1' => {
                care |= 1 << j;
                value |= 1 << j;
            }
            '-' => {}
            other => {
                return Err(ParseError {
                    line: line_no,
                    col: Some(col0 + j + 1),
                    kind: ParseErrorKind::BadCubeChar(other),
                })
            }
        }
    }
    Ok(Cube::new(care, value, arity))
}

fn parse_out_field(
    field: &str,
    n_out: usize,
    format: Format,
    line_no: usize,
) -> Result<ValuationSet, ParseError> {
    if field.contains('|') && format == Format::Kiss2 {
        return Err(err(line_no, ParseErrorKind::PipeInKiss2));
    }
    let mut set = ValuationSet::empty(n_out);
    for part in field.split('|') {
        let c = parse_cube(part, n_out, line_no, 0)?;
        set = set.union(&c.to_set(n_out).expect("arity checked")).unwrap();
    }
    Ok(set)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WriteError {
    #[error(
        "output set of state {state:?} is not a single cube; \
         use XKISS or replace outputs by cubes first"
    )]
    NonCubeOutput { state: String },
}

/// Writes the machine in XKISS form.  Edges are the merged-edge view:
/// `(state, target, output set)` groups with disjoint input cubes, outputs
/// as `|`-joined disjoint cubes.
pub fn write_xkiss(m: &Igmm) -> String {
    write_impl(m, true).expect("xkiss accepts any output set")
}

/// Writes plain KISS2; fails if some output set is not a single cube.
pub fn write_kiss2(m: &Igmm) -> Result<String, WriteError> {
    write_impl(m, false)
}

pub fn write(m: &Igmm, format: Format) -> Result<String, WriteError> {
    match format {
        Format::Kiss2 => write_kiss2(m),
        Format::Xkiss => Ok(write_xkiss(m)),
    }
}

fn write_impl(m: &Igmm, allow_union: bool) -> Result<String, WriteError> {
    let edges = m.merged_edges();
    let mut out = String::new();
    out.push_str(&format!(".i {}\n", m.inputs().arity()));
    out.push_str(&format!(".o {}\n", m.outputs().arity()));
    out.push_str(&format!(".s {}\n", m.n_states()));
    out.push_str(&format!(".p {}\n", edges.len()));
    out.push_str(&format!(".r {}\n", m.state_name(m.init())));
    for e in &edges {
        let cubes = disjoint_cube_cover(&e.out).expect("outputs are non-empty");
        if cubes.len() > 1 && !allow_union {
            return Err(WriteError::NonCubeOutput {
                state: m.state_name(e.source).to_string(),
            });
        }
        let out_field: Vec<String> = cubes.iter().map(cube_text).collect();
        out.push_str(&format!(
            "{} {} {} {}\n",
            cube_text(&e.input_cube),
            m.state_name(e.source),
            m.state_name(e.target),
            out_field.join("|")
        ));
    }
    out.push_str(".e\n");
    Ok(out)
}

fn cube_text(c: &Cube) -> String {
    (0..c.arity())
        .map(|j| {
            if c.care() >> j & 1 == 0 {
                '-'
            } else if c.value() >> j & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

/// Replaces every output set by the first cube of its deterministic disjoint
/// cover, as used when exporting to tools restricted to cube outputs.
pub fn with_cube_outputs(m: &Igmm) -> Igmm {
    let k = m.outputs().arity();
    let mut b = Igmm::builder(m.inputs().clone(), m.outputs().clone(), m.n_states())
        .init(m.init())
        .names(m.state_names().to_vec());
    for q in 0..m.n_states() {
        for i in 0..m.n_inputs() {
            if let Some(e) = m.entry(q, i) {
                let cube = crate::boolset::first_cube(&e.out).expect("outputs are non-empty");
                b = b.entry(q, i, e.target, cube.to_set(k).unwrap());
            }
        }
    }
    b.build().expect("cube outputs are non-empty")
}

/// Name-based semantic equality: same propositions, same state-name set, and
/// identical initial state, transition targets and output sets under the
/// name correspondence.
pub fn same_behavior(a: &Igmm, b: &Igmm) -> bool {
    if a.inputs() != b.inputs() || a.outputs() != b.outputs() || a.n_states() != b.n_states() {
        return false;
    }
    let index_b: HashMap<&str, usize> = b
        .state_names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut map = Vec::with_capacity(a.n_states());
    for name in a.state_names() {
        match index_b.get(name.as_str()) {
            Some(&i) => map.push(i),
            None => return false,
        }
    }
    if map[a.init()] != b.init() {
        return false;
    }
    for q in 0..a.n_states() {
        for i in 0..a.n_inputs() {
            match (a.entry(q, i), b.entry(map[q], i)) {
                (None, None) => {}
                (Some(ea), Some(eb)) => {
                    if map[ea.target] != eb.target || ea.out != eb.out {
                        return false;
                    }
                }
                _ => return false,
            }
        }
    }
    true
}
