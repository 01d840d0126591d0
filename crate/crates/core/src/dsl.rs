//! Line-oriented domain and instance description language.
//!
//! A `.domain` document declares object types (each bound to a built-in
//! behaviour), primitive actions, vocabulary predicates (each bound to a
//! built-in evaluator), and the goal predicates tasks may target. A `.inst`
//! document places walls, objects and the single agent on a grid. The grammar
//! lives in `docs/GRAMMAR.md`; [`DomainSpec`] and [`InstanceSpec`] print back
//! to the canonical form through `Display`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

/// Reserved argument type for grid locations.
pub const CELL_TYPE: &str = "cell";
/// Reserved argument type matching any declared (non-cell) type.
pub const ANY_OBJECT_TYPE: &str = "object";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected 'domain <name>' at line 1")]
    MissingDomainHeader,
    #[error("expected 'instance <domain>' at line 1")]
    MissingInstanceHeader,
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown keyword '{0}'")]
    UnknownKeyword(String),
    #[error("unknown evaluator tag '@{0}'")]
    UnknownEvaluator(String),
    #[error("unknown behaviour '{0}'")]
    UnknownBehavior(String),
    #[error("unknown action semantics '{0}'")]
    UnknownSemantics(String),
    #[error("duplicate predicate '{0}'")]
    DuplicatePredicate(String),
    #[error("duplicate type '{0}'")]
    DuplicateType(String),
    #[error("duplicate action key '{0}'")]
    DuplicateAction(String),
    #[error(
        "arity mismatch for '{name}': evaluator @{evaluator} takes {expected}, declared {found}"
    )]
    ArityMismatch {
        name: String,
        evaluator: String,
        expected: usize,
        found: usize,
    },
    #[error("argument {index} of '{name}' must be of kind {expected}")]
    ArgumentKind {
        name: String,
        index: usize,
        expected: &'static str,
    },
    #[error("unknown type '{0}'")]
    UnknownType(String),
    #[error("unknown predicate '{0}'")]
    UnknownPredicate(String),
    #[error("domain mismatch: instance targets '{found}', domain is '{expected}'")]
    DomainMismatch { expected: String, found: String },
    #[error("placement ({row}, {col}) out of bounds")]
    OutOfBounds { row: usize, col: usize },
    #[error("cell ({row}, {col}) is already occupied")]
    Occupied { row: usize, col: usize },
    #[error("duplicate object id '{0}'")]
    DuplicateObject(String),
    #[error("multiple agent placements")]
    MultipleAgents,
    #[error("no agent placement")]
    MissingAgent,
    #[error("type '{0}' is not an avatar type")]
    NotAvatar(String),
    #[error("avatar type '{0}' used for a non-agent object")]
    AvatarAsObject(String),
    #[error("missing 'size' declaration")]
    MissingSize,
}

/// Built-in object behaviour; decides what the interact key and movement
/// into the object do in the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Behavior {
    Avatar,
    Defeatable,
    Key,
    Exit,
    Lock,
    Pickup,
    Cooker,
    Pushable,
    Hole,
    Finish,
    Piece,
    Pedestal,
    Inert,
}

impl Behavior {
    pub const ALL: [Behavior; 13] = [
        Behavior::Avatar,
        Behavior::Defeatable,
        Behavior::Key,
        Behavior::Exit,
        Behavior::Lock,
        Behavior::Pickup,
        Behavior::Cooker,
        Behavior::Pushable,
        Behavior::Hole,
        Behavior::Finish,
        Behavior::Piece,
        Behavior::Pedestal,
        Behavior::Inert,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Behavior::Avatar => "avatar",
            Behavior::Defeatable => "defeatable",
            Behavior::Key => "key",
            Behavior::Exit => "exit",
            Behavior::Lock => "lock",
            Behavior::Pickup => "pickup",
            Behavior::Cooker => "cooker",
            Behavior::Pushable => "pushable",
            Behavior::Hole => "hole",
            Behavior::Finish => "finish",
            Behavior::Piece => "piece",
            Behavior::Pedestal => "pedestal",
            Behavior::Inert => "inert",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Behavior> {
        Behavior::ALL.into_iter().find(|b| b.tag() == tag)
    }
}

/// Built-in predicate evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Evaluator {
    At,
    Wall,
    Clear,
    HasKey,
    Escaped,
    Cooked,
    Alive,
    NextTo,
    PlayerHas,
    Placed,
    IsDoor,
    IsHole,
    IsGoal,
    IsBlock,
}

/// Kind of an evaluator argument slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Object,
    Cell,
}

impl Evaluator {
    pub const ALL: [Evaluator; 14] = [
        Evaluator::At,
        Evaluator::Wall,
        Evaluator::Clear,
        Evaluator::HasKey,
        Evaluator::Escaped,
        Evaluator::Cooked,
        Evaluator::Alive,
        Evaluator::NextTo,
        Evaluator::PlayerHas,
        Evaluator::Placed,
        Evaluator::IsDoor,
        Evaluator::IsHole,
        Evaluator::IsGoal,
        Evaluator::IsBlock,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Evaluator::At => "at",
            Evaluator::Wall => "wall",
            Evaluator::Clear => "clear",
            Evaluator::HasKey => "has_key",
            Evaluator::Escaped => "escaped",
            Evaluator::Cooked => "cooked",
            Evaluator::Alive => "alive",
            Evaluator::NextTo => "next_to",
            Evaluator::PlayerHas => "player_has",
            Evaluator::Placed => "placed",
            Evaluator::IsDoor => "is_door",
            Evaluator::IsHole => "is_hole",
            Evaluator::IsGoal => "is_goal",
            Evaluator::IsBlock => "is_block",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Evaluator> {
        Evaluator::ALL.into_iter().find(|e| e.tag() == tag)
    }

    pub fn signature(self) -> &'static [ArgKind] {
        use ArgKind::*;
        match self {
            Evaluator::At => &[Object, Cell],
            Evaluator::Wall
            | Evaluator::Clear
            | Evaluator::IsDoor
            | Evaluator::IsHole
            | Evaluator::IsGoal
            | Evaluator::IsBlock => &[Cell],
            Evaluator::HasKey | Evaluator::Escaped | Evaluator::Cooked => &[],
            Evaluator::Alive | Evaluator::NextTo | Evaluator::PlayerHas | Evaluator::Placed => {
                &[Object]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn letter(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::East => 'E',
            Direction::South => 'S',
            Direction::West => 'W',
        }
    }

    pub fn from_letter(s: &str) -> Option<Direction> {
        match s {
            "N" => Some(Direction::North),
            "E" => Some(Direction::East),
            "S" => Some(Direction::South),
            "W" => Some(Direction::West),
            _ => None,
        }
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (-1, 0),
            Direction::East => (0, 1),
            Direction::South => (1, 0),
            Direction::West => (0, -1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionSemantics {
    Move(Direction),
    Interact,
}

impl ActionSemantics {
    pub fn tag(self) -> &'static str {
        match self {
            ActionSemantics::Move(Direction::North) => "move-up",
            ActionSemantics::Move(Direction::South) => "move-down",
            ActionSemantics::Move(Direction::West) => "move-left",
            ActionSemantics::Move(Direction::East) => "move-right",
            ActionSemantics::Interact => "interact",
        }
    }

    pub fn from_tag(tag: &str) -> Option<ActionSemantics> {
        Some(match tag {
            "move-up" => ActionSemantics::Move(Direction::North),
            "move-down" => ActionSemantics::Move(Direction::South),
            "move-left" => ActionSemantics::Move(Direction::West),
            "move-right" => ActionSemantics::Move(Direction::East),
            "interact" | "special-interact" => ActionSemantics::Interact,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDef {
    pub name: String,
    pub behavior: Behavior,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionDef {
    pub key: String,
    pub semantics: ActionSemantics,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDef {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<ParamDef>,
    pub evaluator: Evaluator,
}

impl PredicateDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// A goal predicate, optionally negated (`goal not alive`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalDef {
    pub predicate: String,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    pub name: String,
    pub object_types: Vec<TypeDef>,
    pub actions: Vec<ActionDef>,
    pub predicates: Vec<PredicateDef>,
    pub goals: Vec<GoalDef>,
}

impl DomainSpec {
    pub fn type_def(&self, name: &str) -> Option<&TypeDef> {
        self.object_types.iter().find(|t| t.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDef> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, key: &str) -> Option<&ActionDef> {
        self.actions.iter().find(|a| a.key == key)
    }

    /// Copy of this domain keeping only the named predicates (and goals over them).
    pub fn with_predicates(&self, keep: &[&str]) -> DomainSpec {
        let mut out = self.clone();
        out.predicates.retain(|p| keep.contains(&p.name.as_str()));
        out.goals.retain(|g| keep.contains(&g.predicate.as_str()));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPos {
    pub row: u8,
    pub col: u8,
}

impl GridPos {
    pub fn new(row: u8, col: u8) -> Self {
        GridPos { row, col }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub id: String,
    pub ty: String,
    pub pos: GridPos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentPlacement {
    pub id: String,
    pub ty: String,
    pub pos: GridPos,
    pub facing: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSpec {
    pub domain: String,
    pub rows: u8,
    pub cols: u8,
    pub walls: BTreeSet<GridPos>,
    pub agent: AgentPlacement,
    pub objects: Vec<Placement>,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<(usize, &'a str)>,
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.strip_suffix('\r').unwrap_or(content);
        let mut tokens = Vec::new();
        let mut start = None;
        for (i, ch) in content.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push((s, &content[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            tokens.push((s, &content[s..]));
        }
        if !tokens.is_empty() {
            out.push(Line {
                number: idx + 1,
                tokens,
            });
        }
    }
    out
}

fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn ident<'a>(line: &Line<'a>, idx: usize, what: &str) -> Result<&'a str, ParseError> {
    match line.tokens.get(idx) {
        Some(&(_, tok)) if is_ident(tok) => Ok(tok),
        Some(&(col, tok)) => Err(err(
            line.number,
            col + 1,
            ParseErrorKind::Syntax(format!("expected {what}, found '{tok}'")),
        )),
        None => Err(err(
            line.number,
            line.tokens.last().map(|t| t.0 + t.1.len() + 1).unwrap_or(1),
            ParseErrorKind::Syntax(format!("expected {what}")),
        )),
    }
}

fn expect_len(line: &Line<'_>, len: usize) -> Result<(), ParseError> {
    if line.tokens.len() > len {
        let (col, tok) = line.tokens[len];
        return Err(err(
            line.number,
            col + 1,
            ParseErrorKind::Syntax(format!("unexpected token '{tok}'")),
        ));
    }
    Ok(())
}

/// Parses and validates a `.domain` document.
pub fn parse_domain(text: &str) -> Result<DomainSpec, ParseError> {
    let lines = tokenize(text);
    let Some(first) = lines.first() else {
        return Err(err(1, 1, ParseErrorKind::MissingDomainHeader));
    };
    if first.tokens[0].1 != "domain" {
        return Err(err(first.number, 1, ParseErrorKind::MissingDomainHeader));
    }
    let name = ident(first, 1, "domain name")?.to_string();
    expect_len(first, 2)?;

    let mut dom = DomainSpec {
        name,
        object_types: Vec::new(),
        actions: Vec::new(),
        predicates: Vec::new(),
        goals: Vec::new(),
    };
    let mut goal_lines = Vec::new();

    for line in &lines[1..] {
        let (kw_col, kw) = line.tokens[0];
        match kw {
            "type" => {
                let tname = ident(line, 1, "type name")?;
                if tname == CELL_TYPE || tname == ANY_OBJECT_TYPE {
                    return Err(err(
                        line.number,
                        line.tokens[1].0 + 1,
                        ParseErrorKind::Syntax(format!("'{tname}' is a reserved type")),
                    ));
                }
                let behavior = match line.tokens.get(2) {
                    Some(&(col, tag)) => Behavior::from_tag(tag).ok_or_else(|| {
                        err(
                            line.number,
                            col + 1,
                            ParseErrorKind::UnknownBehavior(tag.into()),
                        )
                    })?,
                    None => Behavior::Inert,
                };
                expect_len(line, 3)?;
                if dom.type_def(tname).is_some() {
                    return Err(err(
                        line.number,
                        line.tokens[1].0 + 1,
                        ParseErrorKind::DuplicateType(tname.into()),
                    ));
                }
                dom.object_types.push(TypeDef {
                    name: tname.to_string(),
                    behavior,
                });
            }
            "action" => {
                let Some(&(kcol, key)) = line.tokens.get(1) else {
                    return Err(err(
                        line.number,
                        kw_col + kw.len() + 1,
                        ParseErrorKind::Syntax("expected action key".into()),
                    ));
                };
                let Some(&(scol, sem)) = line.tokens.get(2) else {
                    return Err(err(
                        line.number,
                        kcol + key.len() + 1,
                        ParseErrorKind::Syntax("expected action semantics".into()),
                    ));
                };
                let semantics = ActionSemantics::from_tag(sem).ok_or_else(|| {
                    err(
                        line.number,
                        scol + 1,
                        ParseErrorKind::UnknownSemantics(sem.into()),
                    )
                })?;
                expect_len(line, 3)?;
                if dom.action(key).is_some() {
                    return Err(err(
                        line.number,
                        kcol + 1,
                        ParseErrorKind::DuplicateAction(key.into()),
                    ));
                }
                dom.actions.push(ActionDef {
                    key: key.to_string(),
                    semantics,
                });
            }
            "predicate" => {
                let pname = ident(line, 1, "predicate name")?;
                let mut params = Vec::new();
                let mut evaluator = None;
                for &(col, tok) in &line.tokens[2..] {
                    if evaluator.is_some() {
                        return Err(err(
                            line.number,
                            col + 1,
                            ParseErrorKind::Syntax(format!(
                                "unexpected token '{tok}' after evaluator"
                            )),
                        ));
                    }
                    if let Some(tag) = tok.strip_prefix('@') {
                        evaluator = Some(Evaluator::from_tag(tag).ok_or_else(|| {
                            err(
                                line.number,
                                col + 1,
                                ParseErrorKind::UnknownEvaluator(tag.into()),
                            )
                        })?);
                    } else if let Some(rest) = tok.strip_prefix('?') {
                        let Some((pn, pt)) = rest.split_once(':') else {
                            return Err(err(
                                line.number,
                                col + 1,
                                ParseErrorKind::Syntax(format!(
                                    "expected '?name:type', found '{tok}'"
                                )),
                            ));
                        };
                        if !is_ident(pn) || !is_ident(pt) {
                            return Err(err(
                                line.number,
                                col + 1,
                                ParseErrorKind::Syntax(format!("malformed parameter '{tok}'")),
                            ));
                        }
                        params.push(ParamDef {
                            name: pn.to_string(),
                            ty: pt.to_string(),
                        });
                    } else {
                        return Err(err(
                            line.number,
                            col + 1,
                            ParseErrorKind::Syntax(format!(
                                "expected parameter or evaluator, found '{tok}'"
                            )),
                        ));
                    }
                }
                let Some(evaluator) = evaluator else {
                    return Err(err(
                        line.number,
                        line.tokens.last().map(|t| t.0 + t.1.len() + 1).unwrap_or(1),
                        ParseErrorKind::Syntax("expected '@evaluator'".into()),
                    ));
                };
                if dom.predicate(pname).is_some() {
                    return Err(err(
                        line.number,
                        line.tokens[1].0 + 1,
                        ParseErrorKind::DuplicatePredicate(pname.into()),
                    ));
                }
                let sig = evaluator.signature();
                if sig.len() != params.len() {
                    return Err(err(
                        line.number,
                        line.tokens[1].0 + 1,
                        ParseErrorKind::ArityMismatch {
                            name: pname.into(),
                            evaluator: evaluator.tag().into(),
                            expected: sig.len(),
                            found: params.len(),
                        },
                    ));
                }
                dom.predicates.push(PredicateDef {
                    name: pname.to_string(),
                    params,
                    evaluator,
                });
            }
            "goal" => {
                goal_lines.push(line);
            }
            "domain" => {
                return Err(err(
                    line.number,
                    kw_col + 1,
                    ParseErrorKind::Syntax("duplicate 'domain' header".into()),
                ))
            }
            other => {
                return Err(err(
                    line.number,
                    kw_col + 1,
                    ParseErrorKind::UnknownKeyword(other.into()),
                ))
            }
        }
    }

    // Argument types are checked once all types are known, so declaration order is free.
    for (line, pred) in lines[1..]
        .iter()
        .filter(|l| l.tokens[0].1 == "predicate")
        .zip(dom.predicates.iter())
    {
        for (i, (param, kind)) in pred
            .params
            .iter()
            .zip(pred.evaluator.signature())
            .enumerate()
        {
            let col = line.tokens[2 + i].0 + 1;
            match kind {
                ArgKind::Cell if param.ty != CELL_TYPE => {
                    return Err(err(
                        line.number,
                        col,
                        ParseErrorKind::ArgumentKind {
                            name: pred.name.clone(),
                            index: i,
                            expected: "cell",
                        },
                    ))
                }
                ArgKind::Object if param.ty == CELL_TYPE => {
                    return Err(err(
                        line.number,
                        col,
                        ParseErrorKind::ArgumentKind {
                            name: pred.name.clone(),
                            index: i,
                            expected: "object",
                        },
                    ))
                }
                ArgKind::Object
                    if param.ty != ANY_OBJECT_TYPE && dom.type_def(&param.ty).is_none() =>
                {
                    return Err(err(
                        line.number,
                        col,
                        ParseErrorKind::UnknownType(param.ty.clone()),
                    ))
                }
                _ => {}
            }
        }
    }

    for line in goal_lines {
        let (positive, idx) = match line.tokens.get(1) {
            Some(&(_, "not")) => (false, 2),
            _ => (true, 1),
        };
        let pname = ident(line, idx, "goal predicate")?;
        expect_len(line, idx + 1)?;
        if dom.predicate(pname).is_none() {
            return Err(err(
                line.number,
                line.tokens[idx].0 + 1,
                ParseErrorKind::UnknownPredicate(pname.into()),
            ));
        }
        dom.goals.push(GoalDef {
            predicate: pname.to_string(),
            positive,
        });
    }

    Ok(dom)
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "domain {}", self.name)?;
        for t in &self.object_types {
            writeln!(f, "type {} {}", t.name, t.behavior.tag())?;
        }
        for a in &self.actions {
            writeln!(f, "action {} {}", a.key, a.semantics.tag())?;
        }
        for p in &self.predicates {
            write!(f, "predicate {}", p.name)?;
            for param in &p.params {
                write!(f, " ?{}:{}", param.name, param.ty)?;
            }
            writeln!(f, " @{}", p.evaluator.tag())?;
        }
        for g in &self.goals {
            if g.positive {
                writeln!(f, "goal {}", g.predicate)?;
            } else {
                writeln!(f, "goal not {}", g.predicate)?;
            }
        }
        Ok(())
    }
}

fn number(line: &Line<'_>, idx: usize, what: &str) -> Result<usize, ParseError> {
    match line.tokens.get(idx) {
        Some(&(col, tok)) => tok.parse::<u8>().map(usize::from).map_err(|_| {
            err(
                line.number,
                col + 1,
                ParseErrorKind::Syntax(format!("expected {what} (0..=255), found '{tok}'")),
            )
        }),
        None => Err(err(
            line.number,
            line.tokens.last().map(|t| t.0 + t.1.len() + 1).unwrap_or(1),
            ParseErrorKind::Syntax(format!("expected {what}")),
        )),
    }
}

/// Parses a `.inst` document against an already validated domain.
pub fn parse_instance(text: &str, domain: &DomainSpec) -> Result<InstanceSpec, ParseError> {
    let lines = tokenize(text);
    let Some(first) = lines.first() else {
        return Err(err(1, 1, ParseErrorKind::MissingInstanceHeader));
    };
    if first.tokens[0].1 != "instance" {
        return Err(err(first.number, 1, ParseErrorKind::MissingInstanceHeader));
    }
    let dname = ident(first, 1, "domain name")?;
    expect_len(first, 2)?;
    if dname != domain.name {
        return Err(err(
            first.number,
            first.tokens[1].0 + 1,
            ParseErrorKind::DomainMismatch {
                expected: domain.name.clone(),
                found: dname.into(),
            },
        ));
    }

    let mut size: Option<(u8, u8)> = None;
    let mut walls = BTreeSet::new();
    let mut agent: Option<AgentPlacement> = None;
    let mut objects: Vec<Placement> = Vec::new();
    let mut ids = HashSet::new();
    let mut occupied = HashSet::new();

    for line in &lines[1..] {
        let (kw_col, kw) = line.tokens[0];
        let need_size =
            |line: &Line<'_>| size.ok_or_else(|| err(line.number, 1, ParseErrorKind::MissingSize));
        let check_pos = |line: &Line<'_>, r: usize, c: usize, (rows, cols): (u8, u8)| {
            if r >= rows as usize || c >= cols as usize {
                Err(err(
                    line.number,
                    1,
                    ParseErrorKind::OutOfBounds { row: r, col: c },
                ))
            } else {
                Ok(GridPos::new(r as u8, c as u8))
            }
        };
        match kw {
            "size" => {
                if size.is_some() {
                    return Err(err(
                        line.number,
                        kw_col + 1,
                        ParseErrorKind::Syntax("duplicate 'size' declaration".into()),
                    ));
                }
                let rows = number(line, 1, "row count")?;
                let cols = number(line, 2, "column count")?;
                expect_len(line, 3)?;
                if rows == 0 || cols == 0 {
                    return Err(err(
                        line.number,
                        line.tokens[1].0 + 1,
                        ParseErrorKind::Syntax("grid dimensions must be positive".into()),
                    ));
                }
                size = Some((rows as u8, cols as u8));
            }
            "wall" => {
                let dims = need_size(line)?;
                let r = number(line, 1, "row")?;
                let c = number(line, 2, "column")?;
                expect_len(line, 3)?;
                let pos = check_pos(line, r, c, dims)?;
                if !occupied.insert(pos) {
                    return Err(err(
                        line.number,
                        1,
                        ParseErrorKind::Occupied { row: r, col: c },
                    ));
                }
                walls.insert(pos);
            }
            "object" | "agent" => {
                let dims = need_size(line)?;
                let id = ident(line, 1, "object id")?;
                let ty = ident(line, 2, "object type")?;
                let r = number(line, 3, "row")?;
                let c = number(line, 4, "column")?;
                let tdef = domain.type_def(ty).ok_or_else(|| {
                    err(
                        line.number,
                        line.tokens[2].0 + 1,
                        ParseErrorKind::UnknownType(ty.into()),
                    )
                })?;
                let pos = check_pos(line, r, c, dims)?;
                if !ids.insert(id.to_string()) {
                    return Err(err(
                        line.number,
                        line.tokens[1].0 + 1,
                        ParseErrorKind::DuplicateObject(id.into()),
                    ));
                }
                if !occupied.insert(pos) {
                    return Err(err(
                        line.number,
                        1,
                        ParseErrorKind::Occupied { row: r, col: c },
                    ));
                }
                if kw == "agent" {
                    let Some(&(dcol, dtok)) = line.tokens.get(5) else {
                        return Err(err(
                            line.number,
                            line.tokens[4].0 + 2,
                            ParseErrorKind::Syntax("expected orientation N|E|S|W".into()),
                        ));
                    };
                    let facing = Direction::from_letter(dtok).ok_or_else(|| {
                        err(
                            line.number,
                            dcol + 1,
                            ParseErrorKind::Syntax(format!(
                                "expected orientation N|E|S|W, found '{dtok}'"
                            )),
                        )
                    })?;
                    expect_len(line, 6)?;
                    if tdef.behavior != Behavior::Avatar {
                        return Err(err(
                            line.number,
                            line.tokens[2].0 + 1,
                            ParseErrorKind::NotAvatar(ty.into()),
                        ));
                    }
                    if agent.is_some() {
                        return Err(err(line.number, kw_col + 1, ParseErrorKind::MultipleAgents));
                    }
                    agent = Some(AgentPlacement {
                        id: id.into(),
                        ty: ty.into(),
                        pos,
                        facing,
                    });
                } else {
                    expect_len(line, 5)?;
                    if tdef.behavior == Behavior::Avatar {
                        return Err(err(
                            line.number,
                            line.tokens[2].0 + 1,
                            ParseErrorKind::AvatarAsObject(ty.into()),
                        ));
                    }
                    objects.push(Placement {
                        id: id.into(),
                        ty: ty.into(),
                        pos,
                    });
                }
            }
            other => {
                return Err(err(
                    line.number,
                    kw_col + 1,
                    ParseErrorKind::UnknownKeyword(other.into()),
                ))
            }
        }
    }

    let (rows, cols) = size.ok_or_else(|| err(first.number, 1, ParseErrorKind::MissingSize))?;
    let agent = agent.ok_or_else(|| {
        err(
            lines.last().map(|l| l.number).unwrap_or(1),
            1,
            ParseErrorKind::MissingAgent,
        )
    })?;
    Ok(InstanceSpec {
        domain: dname.into(),
        rows,
        cols,
        walls,
        agent,
        objects,
    })
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instance {}", self.domain)?;
        writeln!(f, "size {} {}", self.rows, self.cols)?;
        for w in &self.walls {
            writeln!(f, "wall {} {}", w.row, w.col)?;
        }
        let a = &self.agent;
        writeln!(
            f,
            "agent {} {} {} {} {}",
            a.id,
            a.ty,
            a.pos.row,
            a.pos.col,
            a.facing.letter()
        )?;
        for o in &self.objects {
            writeln!(f, "object {} {} {} {}", o.id, o.ty, o.pos.row, o.pos.col)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = "domain mini\n\
        type player avatar\n\
        type monster defeatable\n\
        action W move-up\n\
        action E interact\n\
        predicate alive ?m:monster @alive\n\
        predicate at ?ob:object ?loc:cell @at\n\
        goal not alive\n";

    #[test]
    fn empty_document_reports_missing_header() {
        let e = parse_domain("").unwrap_err();
        assert_eq!(e.line, 1);
        assert_eq!(e.kind.to_string(), "expected 'domain <name>' at line 1");
        let e = parse_domain("# only a comment\n\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MissingDomainHeader);
    }

    #[test]
    fn parses_minimal_domain() {
        let d = parse_domain(MINI).unwrap();
        assert_eq!(d.name, "mini");
        assert_eq!(d.predicates.len(), 2);
        assert_eq!(
            d.goals,
            vec![GoalDef {
                predicate: "alive".into(),
                positive: false
            }]
        );
        assert_eq!(parse_domain(&d.to_string()).unwrap(), d);
    }

    #[test]
    fn rejects_unknown_evaluator() {
        let e = parse_domain("domain x\npredicate p @nope\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownEvaluator("nope".into()));
        assert_eq!((e.line, e.column), (2, 13));
    }

    #[test]
    fn rejects_duplicate_predicate() {
        let e = parse_domain("domain x\npredicate p @has_key\npredicate p @escaped\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicatePredicate("p".into()));
        assert_eq!(e.line, 3);
    }

    #[test]
    fn rejects_arity_mismatch() {
        let e = parse_domain("domain x\npredicate p ?c:cell @has_key\n").unwrap_err();
        assert!(matches!(
            e.kind,
            ParseErrorKind::ArityMismatch {
                expected: 0,
                found: 1,
                ..
            }
        ));
    }

    #[test]
    fn rejects_wrong_argument_kind_and_unknown_type() {
        let e = parse_domain("domain x\npredicate w ?o:object @wall\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ArgumentKind { .. }));
        let e = parse_domain("domain x\npredicate a ?o:ghost @alive\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownType("ghost".into()));
    }

    #[test]
    fn garbage_never_panics() {
        for doc in [
            "domain",
            "domain 9x",
            "domain a\ntype",
            "domain a\naction W",
            "domain a\npredicate p ?x @at",
            "domain a\ngoal",
            "domain a\ngoal not",
            "domain a\nfoo bar",
            "\u{0}\u{1}",
            "domain a\ntype t avatar extra",
        ] {
            assert!(parse_domain(doc).is_err(), "{doc:?}");
        }
    }

    #[test]
    fn instance_agent_rules() {
        let d = parse_domain(MINI).unwrap();
        let ok = "instance mini\nsize 3 3\nagent link player 1 1 N\nobject ganon monster 0 0\n";
        let inst = parse_instance(ok, &d).unwrap();
        assert_eq!(inst.objects.len(), 1);
        assert_eq!(parse_instance(&inst.to_string(), &d).unwrap(), inst);

        let two = "instance mini\nsize 3 3\nagent a player 1 1 N\nagent b player 2 2 S\n";
        assert_eq!(
            parse_instance(two, &d).unwrap_err().kind.to_string(),
            "multiple agent placements"
        );
        let none = "instance mini\nsize 3 3\nobject g monster 0 0\n";
        assert_eq!(
            parse_instance(none, &d).unwrap_err().kind,
            ParseErrorKind::MissingAgent
        );
        let oob = "instance mini\nsize 3 3\nagent a player 3 1 N\n";
        assert!(matches!(
            parse_instance(oob, &d).unwrap_err().kind,
            ParseErrorKind::OutOfBounds { .. }
        ));
        let bad_type = "instance mini\nsize 3 3\nagent a player 1 1 N\nobject k key 0 0\n";
        assert_eq!(
            parse_instance(bad_type, &d).unwrap_err().kind,
            ParseErrorKind::UnknownType("key".into())
        );
    }
}
