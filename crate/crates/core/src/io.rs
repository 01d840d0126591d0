//! Reading and writing capability models (`.cap`), English transcripts,
//! query logs and run statistics.
//!
//! A `.cap` document:
//!
//! ```text
//! ; capkit capability model
//! (define (model zelda)
//!   (:capability c0
//!     :parameters (?monster1 - monster ?cell1 - cell)
//!     :precondition (and
//!       (alive ?monster1)
//!       (not (escaped)))
//!     :effect (and
//!       (next_to ?monster1)))
//! )
//! ```
//!
//! Sites that are still open carry an extra `:unresolved` block listing the
//! modes left, e.g. `(pre (escaped) - 0)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use thiserror::Error;

use crate::abstraction::Universe;
use crate::model::{
    sites_for, Capability, CapabilityModel, LAtom, Loc, Mode, ModeSet, Param, Site,
};
use crate::query::QueryRecord;

pub const STATS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("capability {cap}: unknown predicate '{name}'")]
    UnknownPredicate { cap: String, name: String },
    #[error("capability {cap}: unknown parameter '{name}'")]
    UnknownParam { cap: String, name: String },
    #[error("capability {cap}: literal {lit} does not fit the parameter types")]
    IllTyped { cap: String, lit: String },
    #[error("capability {cap}: literal {lit} appears twice in the same block")]
    Duplicate { cap: String, lit: String },
    #[error("no template for predicate '{0}'")]
    MissingTemplate(String),
    #[error("template line {line}: {msg}")]
    Template { line: usize, msg: String },
}

// ---------------------------------------------------------------------------
// s-expressions

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn line(&self) -> usize {
        match self {
            Sexp::Atom(_, l) | Sexp::List(_, l) => *l,
        }
    }

    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, _) => Some(v),
            Sexp::Atom(..) => None,
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn read_sexps(text: &str) -> Result<Vec<Sexp>, IoError> {
    let mut stack: Vec<(Vec<Sexp>, usize)> = vec![(Vec::new(), 0)];
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split(';').next().unwrap_or("");
        let mut tok = String::new();
        let flush = |tok: &mut String, stack: &mut Vec<(Vec<Sexp>, usize)>| {
            if !tok.is_empty() {
                let top = stack.last_mut().expect("root");
                top.0.push(Sexp::Atom(std::mem::take(tok), line));
            }
        };
        for ch in body.chars() {
            match ch {
                '(' => {
                    flush(&mut tok, &mut stack);
                    stack.push((Vec::new(), line));
                }
                ')' => {
                    flush(&mut tok, &mut stack);
                    if stack.len() == 1 {
                        return Err(syntax(line, "unbalanced ')'"));
                    }
                    let (items, start) = stack.pop().expect("open list");
                    stack
                        .last_mut()
                        .expect("root")
                        .0
                        .push(Sexp::List(items, start));
                }
                c if c.is_whitespace() => flush(&mut tok, &mut stack),
                c => tok.push(c),
            }
        }
        flush(&mut tok, &mut stack);
    }
    if stack.len() != 1 {
        let open = stack.last().map(|(_, l)| *l).unwrap_or(0);
        return Err(syntax(open, "unclosed '('"));
    }
    Ok(stack.pop().expect("root").0)
}

// ---------------------------------------------------------------------------
// export

fn param_list(params: &[Param]) -> String {
    params
        .iter()
        .map(|p| format!("{} - {}", p.name, p.ty))
        .collect::<Vec<_>>()
        .join(" ")
}

fn literal(u: &Universe, c: &Capability, site: &Site, mode: Mode) -> String {
    let a = site.atom.render(u, &c.params);
    match mode {
        Mode::Neg => format!("(not {a})"),
        _ => a,
    }
}

fn block(out: &mut String, key: &str, lits: &[String], close: &str) {
    if lits.is_empty() {
        let _ = writeln!(out, "    {key} (and){close}");
        return;
    }
    let _ = writeln!(out, "    {key} (and");
    for (i, l) in lits.iter().enumerate() {
        let end = if i + 1 == lits.len() {
            format!("){close}")
        } else {
            String::new()
        };
        let _ = writeln!(out, "      {l}{end}");
    }
}

/// Writes `model` as a `.cap` document. Literals appear in site order.
pub fn export_model(u: &Universe, domain: &str, model: &CapabilityModel) -> String {
    let mut out = String::new();
    out.push_str("; capkit capability model\n");
    let _ = writeln!(out, "(define (model {domain})");
    for c in &model.caps {
        let _ = writeln!(out, "  (:capability c{}", c.id);
        let _ = writeln!(out, "    :parameters ({})", param_list(&c.params));
        let pick = |loc: Loc| -> Vec<String> {
            c.sites
                .iter()
                .zip(&c.current)
                .filter(|(s, m)| s.loc == loc && **m != Mode::Absent)
                .map(|(s, m)| literal(u, c, s, *m))
                .collect()
        };
        let open: Vec<String> = c
            .unresolved()
            .map(|(s, set)| {
                let modes: Vec<String> = set.modes().map(|m| m.symbol().to_string()).collect();
                format!(
                    "({} {} {})",
                    s.loc.name(),
                    s.atom.render(u, &c.params),
                    modes.join(" ")
                )
            })
            .collect();
        block(&mut out, ":precondition", &pick(Loc::Pre), "");
        if open.is_empty() {
            block(&mut out, ":effect", &pick(Loc::Eff), ")");
        } else {
            block(&mut out, ":effect", &pick(Loc::Eff), "");
            let _ = writeln!(out, "    :unresolved (");
            for (i, l) in open.iter().enumerate() {
                let end = if i + 1 == open.len() { "))" } else { "" };
                let _ = writeln!(out, "      {l}{end}");
            }
        }
    }
    out.push_str(")\n");
    out
}

// ---------------------------------------------------------------------------
// parse

struct CapParser<'a> {
    u: &'a Universe,
    name: String,
    params: Vec<Param>,
}

impl CapParser<'_> {
    fn latom(&self, e: &Sexp) -> Result<LAtom, IoError> {
        let items = e
            .list()
            .ok_or_else(|| syntax(e.line(), "expected a literal"))?;
        let (head, args) = items
            .split_first()
            .ok_or_else(|| syntax(e.line(), "empty literal"))?;
        let pname = head
            .atom()
            .ok_or_else(|| syntax(e.line(), "predicate name expected"))?;
        let pred = self
            .u
            .predicates
            .iter()
            .position(|p| p.name == pname)
            .ok_or_else(|| IoError::UnknownPredicate {
                cap: self.name.clone(),
                name: pname.to_string(),
            })?;
        let mut idx = [0u8; 2];
        if args.len() > 2 {
            return Err(syntax(e.line(), "at most two arguments"));
        }
        for (i, a) in args.iter().enumerate() {
            let n = a
                .atom()
                .ok_or_else(|| syntax(a.line(), "parameter expected"))?;
            idx[i] = self
                .params
                .iter()
                .position(|p| p.name == n)
                .ok_or_else(|| IoError::UnknownParam {
                    cap: self.name.clone(),
                    name: n.to_string(),
                })? as u8;
        }
        Ok(LAtom {
            pred: pred as u16,
            arity: args.len() as u8,
            args: idx,
        })
    }

    /// `(and l*)`, a single literal, or `(not l)`, as (atom, polarity) pairs.
    fn conj(&self, e: &Sexp) -> Result<Vec<(LAtom, Mode)>, IoError> {
        let items = e
            .list()
            .ok_or_else(|| syntax(e.line(), "expected a list"))?;
        let lits: &[Sexp] = match items.first().and_then(Sexp::atom) {
            Some("and") => &items[1..],
            _ => std::slice::from_ref(e),
        };
        lits.iter()
            .map(|l| {
                let li = l
                    .list()
                    .ok_or_else(|| syntax(l.line(), "expected a literal"))?;
                if li.first().and_then(Sexp::atom) == Some("not") {
                    if li.len() != 2 {
                        return Err(syntax(l.line(), "(not ...) takes one literal"));
                    }
                    Ok((self.latom(&li[1])?, Mode::Neg))
                } else {
                    Ok((self.latom(l)?, Mode::Pos))
                }
            })
            .collect()
    }
}

fn parse_params(items: &[Sexp], line: usize) -> Result<Vec<Param>, IoError> {
    let toks: Vec<&str> = items
        .iter()
        .map(|s| {
            s.atom()
                .ok_or_else(|| syntax(s.line(), "parameter list holds names and types only"))
        })
        .collect::<Result<_, _>>()?;
    if !toks.len().is_multiple_of(3) {
        return Err(syntax(line, "parameters are written '?name - type'"));
    }
    let mut out: Vec<Param> = Vec::new();
    for t in toks.chunks(3) {
        if !t[0].starts_with('?') || t[1] != "-" {
            return Err(syntax(
                line,
                format!("bad parameter '{} {} {}'", t[0], t[1], t[2]),
            ));
        }
        if out.iter().any(|p| p.name == t[0]) {
            return Err(syntax(line, format!("parameter {} declared twice", t[0])));
        }
        out.push(Param {
            name: t[0].to_string(),
            ty: t[2].to_string(),
        });
    }
    Ok(out)
}

fn parse_capability(
    u: &Universe,
    index: usize,
    items: &[Sexp],
    line: usize,
) -> Result<Capability, IoError> {
    let name = items
        .get(1)
        .and_then(Sexp::atom)
        .ok_or_else(|| syntax(line, "capability name expected"))?
        .to_string();
    let id = name
        .strip_prefix('c')
        .and_then(|n| n.parse().ok())
        .unwrap_or(index);
    let mut fields: BTreeMap<&str, &Sexp> = BTreeMap::new();
    let mut rest = &items[2..];
    while let [k, v, tail @ ..] = rest {
        let key = k
            .atom()
            .ok_or_else(|| syntax(k.line(), "keyword expected"))?;
        if !matches!(
            key,
            ":parameters" | ":precondition" | ":effect" | ":unresolved"
        ) {
            return Err(syntax(k.line(), format!("unknown keyword '{key}'")));
        }
        if fields.insert(key, v).is_some() {
            return Err(syntax(k.line(), format!("'{key}' given twice")));
        }
        rest = tail;
    }
    if !rest.is_empty() {
        return Err(syntax(line, "keyword without a value"));
    }
    let params = match fields.get(":parameters") {
        Some(p) => parse_params(
            p.list()
                .ok_or_else(|| syntax(p.line(), "parameter list expected"))?,
            p.line(),
        )?,
        None => Vec::new(),
    };
    let p = CapParser { u, name, params };
    let sites = sites_for(u, &p.params);
    let mut current = vec![Mode::Absent; sites.len()];
    for (key, loc) in [(":precondition", Loc::Pre), (":effect", Loc::Eff)] {
        let Some(e) = fields.get(key) else { continue };
        for (atom, mode) in p.conj(e)? {
            let site = Site { loc, atom };
            let lit = atom.render(u, &p.params);
            let i = sites
                .iter()
                .position(|s| *s == site)
                .ok_or_else(|| IoError::IllTyped {
                    cap: p.name.clone(),
                    lit: lit.clone(),
                })?;
            if current[i] != Mode::Absent {
                return Err(IoError::Duplicate {
                    cap: p.name.clone(),
                    lit,
                });
            }
            current[i] = mode;
        }
    }
    let mut modes: Vec<ModeSet> = current.iter().map(|m| ModeSet::single(*m)).collect();
    if let Some(e) = fields.get(":unresolved") {
        let entries = e
            .list()
            .ok_or_else(|| syntax(e.line(), "list of open sites expected"))?;
        for en in entries {
            let li = en
                .list()
                .ok_or_else(|| syntax(en.line(), "(pre|eff literal modes...) expected"))?;
            let loc = match li.first().and_then(Sexp::atom) {
                Some("pre") => Loc::Pre,
                Some("eff") => Loc::Eff,
                _ => return Err(syntax(en.line(), "open site starts with pre or eff")),
            };
            let atom = p.latom(
                li.get(1)
                    .ok_or_else(|| syntax(en.line(), "literal expected"))?,
            )?;
            let i = sites
                .iter()
                .position(|s| *s == Site { loc, atom })
                .ok_or_else(|| IoError::IllTyped {
                    cap: p.name.clone(),
                    lit: atom.render(u, &p.params),
                })?;
            let mut set = ModeSet::EMPTY;
            for m in &li[2..] {
                let sym = m.atom().and_then(|s| {
                    let mut cs = s.chars();
                    match (cs.next(), cs.next()) {
                        (Some(c), None) => Mode::from_symbol(c),
                        _ => None,
                    }
                });
                set = set.union(ModeSet::single(
                    sym.ok_or_else(|| syntax(m.line(), "mode is one of + - 0"))?,
                ));
            }
            if set.len() < 2 || !set.contains(current[i]) {
                return Err(syntax(
                    en.line(),
                    "open modes must be two or more and include the written mode",
                ));
            }
            modes[i] = set;
        }
    }
    Ok(Capability {
        id,
        params: p.params,
        sites,
        modes,
        current,
        groundings: Vec::new(),
    })
}

/// Reads a `.cap` document. Returns the model name and the capabilities.
pub fn parse_model(u: &Universe, text: &str) -> Result<(String, CapabilityModel), IoError> {
    let top = read_sexps(text)?;
    let [doc] = top.as_slice() else {
        return Err(syntax(
            top.get(1).map(Sexp::line).unwrap_or(1),
            "expected exactly one (define ...) form",
        ));
    };
    let items = doc
        .list()
        .ok_or_else(|| syntax(doc.line(), "(define ...) expected"))?;
    if items.first().and_then(Sexp::atom) != Some("define") {
        return Err(syntax(doc.line(), "(define ...) expected"));
    }
    let head = items
        .get(1)
        .and_then(Sexp::list)
        .ok_or_else(|| syntax(doc.line(), "(model NAME) expected"))?;
    let name = match head {
        [k, n] if k.atom() == Some("model") => n
            .atom()
            .ok_or_else(|| syntax(doc.line(), "model name"))?
            .to_string(),
        _ => return Err(syntax(doc.line(), "(model NAME) expected")),
    };
    let mut caps = Vec::new();
    for (i, c) in items[2..].iter().enumerate() {
        let ci = c
            .list()
            .ok_or_else(|| syntax(c.line(), "(:capability ...) expected"))?;
        if ci.first().and_then(Sexp::atom) != Some(":capability") {
            return Err(syntax(c.line(), "(:capability ...) expected"));
        }
        caps.push(parse_capability(u, i, ci, c.line())?);
    }
    Ok((name, CapabilityModel { caps }))
}

// ---------------------------------------------------------------------------
// transcripts

/// `key = template` lines; `{0}` and `{1}` stand for the arguments.
/// Negative literals use the key `not.<predicate>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Templates {
    map: BTreeMap<String, String>,
}

impl Templates {
    pub fn parse(text: &str) -> Result<Templates, IoError> {
        let mut map = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| IoError::Template {
                line: ln + 1,
                msg: "expected 'key = template'".into(),
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Templates { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }
}

fn phrase(
    u: &Universe,
    t: &Templates,
    c: &Capability,
    atom: &LAtom,
    mode: Mode,
) -> Result<String, IoError> {
    let pred = &u.predicates[atom.pred as usize].name;
    let key = match mode {
        Mode::Neg => format!("not.{pred}"),
        _ => pred.clone(),
    };
    let tpl = t.get(&key).ok_or(IoError::MissingTemplate(key.clone()))?;
    let mut s = tpl.to_string();
    for (i, p) in atom.params().iter().enumerate() {
        s = s.replace(
            &format!("{{{i}}}"),
            c.params[*p as usize].name.trim_start_matches('?'),
        );
    }
    Ok(s)
}

fn join(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// English rendering of one capability.
pub fn render_transcript(u: &Universe, c: &Capability, t: &Templates) -> Result<String, IoError> {
    let mut pre = Vec::new();
    let mut eff = Vec::new();
    for (s, m) in c.sites.iter().zip(&c.current) {
        if *m == Mode::Absent {
            continue;
        }
        let p = phrase(u, t, c, &s.atom, *m)?;
        match s.loc {
            Loc::Pre => pre.push(p),
            Loc::Eff => eff.push(p),
        }
    }
    let effects = if eff.is_empty() {
        "nothing changes".to_string()
    } else {
        join(&eff)
    };
    Ok(if pre.is_empty() {
        format!("In any state, the player can act to reach a state where {effects}.")
    } else {
        format!(
            "If {}; then the player can act to reach a state where {effects}.",
            join(&pre)
        )
    })
}

/// Every capability of the model, one paragraph each.
pub fn render_model_transcript(
    u: &Universe,
    m: &CapabilityModel,
    t: &Templates,
) -> Result<String, IoError> {
    let mut out = String::new();
    for c in &m.caps {
        let _ = writeln!(
            out,
            "c{}({}): {}",
            c.id,
            param_list(&c.params),
            render_transcript(u, c, t)?
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// logs and statistics

pub const QUERY_LOG_HEADER: &str =
    "index\tcapability\tsite\tloc\tmodes\twaypoints\ttheta\tpredicted\toutcome\tpruned";

/// One row per query. Timings are kept out so that identical runs produce
/// identical logs; they go to the statistics file instead.
pub fn export_query_log(records: &[QueryRecord]) -> String {
    let mut out = String::from(QUERY_LOG_HEADER);
    out.push('\n');
    for (i, r) in records.iter().enumerate() {
        let (x, y) = r.modes;
        let pruned = match r.outcome {
            crate::query::Outcome::KeptFirst => y.symbol().to_string(),
            crate::query::Outcome::KeptSecond => x.symbol().to_string(),
            crate::query::Outcome::RemovedBoth => format!("{}{}", x.symbol(), y.symbol()),
            crate::query::Outcome::Uninformative => "none".to_string(),
        };
        let (lit, loc) = r.site_text.rsplit_once(' ').unwrap_or((&r.site_text, ""));
        let _ = writeln!(
            out,
            "{i}\tc{}\t{lit}\t{loc}\t{}{}\t{}\t{}\t{},{}\t{}\t{pruned}",
            r.cap,
            x.symbol(),
            y.symbol(),
            r.waypoints.len(),
            r.theta,
            r.predictions.0,
            r.predictions.1,
            r.outcome.name()
        );
    }
    out
}

/// Figures of one discovery run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStats {
    pub domain: String,
    pub grid_size: u8,
    pub agent: String,
    pub seed: u64,
    /// Instances pooled into this row.
    pub instances: usize,
    pub traces: usize,
    pub transitions: usize,
    pub capabilities: usize,
    pub unresolved: usize,
    /// Distinguishing queries posed.
    pub query_plans: usize,
    /// State-reachability queries asked while posing them.
    pub total_queries: usize,
    /// One entry per reachability query.
    pub query_times: Vec<Duration>,
}

impl RunStats {
    /// Adds another run's counts and query times to this row.
    pub fn pool(&mut self, other: &RunStats) {
        self.instances += other.instances;
        self.traces += other.traces;
        self.transitions += other.transitions;
        self.capabilities += other.capabilities;
        self.unresolved += other.unresolved;
        self.query_plans += other.query_plans;
        self.total_queries += other.total_queries;
        self.query_times.extend_from_slice(&other.query_times);
    }

    pub fn mean_query_time(&self) -> Duration {
        if self.query_times.is_empty() {
            Duration::ZERO
        } else {
            self.query_times.iter().sum::<Duration>() / self.query_times.len() as u32
        }
    }
}

pub const STATS_COLUMNS: [&str; 15] = [
    "schema_version",
    "domain",
    "grid_size",
    "agent",
    "seed",
    "instances",
    "traces",
    "transitions",
    "capabilities",
    "unresolved",
    "query_plans",
    "total_queries",
    "mean_query_us",
    "total_query_us",
    "query_us",
];

/// Header plus one row per run. `query_us` lists every query's time,
/// comma separated.
pub fn export_stats(runs: &[RunStats]) -> String {
    let mut out = STATS_COLUMNS.join("\t");
    out.push('\n');
    for r in runs {
        let total: Duration = r.query_times.iter().sum();
        let each: Vec<String> = r
            .query_times
            .iter()
            .map(|d| d.as_micros().to_string())
            .collect();
        let _ = writeln!(
            out,
            "{STATS_SCHEMA_VERSION}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.domain,
            r.grid_size,
            r.agent,
            r.seed,
            r.instances,
            r.traces,
            r.transitions,
            r.capabilities,
            r.unresolved,
            r.query_plans,
            r.total_queries,
            r.mean_query_time().as_micros(),
            total.as_micros(),
            each.join(",")
        );
    }
    out
}
