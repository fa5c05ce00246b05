use std::collections::HashMap;

use super::lexer::{tokenize, Pos, Tok, Token};
use super::{
    Automaton, CmpOp, DiscDecl, Edge, EventDecl, Expr, GtsError, GtsSpec, InputDecl, TimerDecl,
    Update,
};

const KEYWORDS: &[&str] = &[
    "automaton",
    "disc",
    "bool",
    "input",
    "cont",
    "der",
    "uncontrollable",
    "controllable",
    "location",
    "initial",
    "marked",
    "edge",
    "when",
    "do",
    "goto",
    "end",
    "and",
    "or",
    "not",
    "true",
    "false",
];

#[derive(Debug, Clone)]
struct RawPath {
    parts: Vec<String>,
    pos: Pos,
}

impl RawPath {
    fn joined(&self) -> String {
        self.parts.join(".")
    }
}

#[derive(Debug, Clone)]
enum RawExpr {
    Bool(bool),
    Real(f64),
    Path(RawPath),
    Not(Box<RawExpr>),
    And(Box<RawExpr>, Box<RawExpr>),
    Or(Box<RawExpr>, Box<RawExpr>),
    Cmp(CmpOp, Box<RawExpr>, Box<RawExpr>, Pos),
}

#[derive(Debug)]
struct RawEdge {
    event: Option<RawPath>,
    guard: Option<(RawExpr, Pos)>,
    updates: Vec<(RawPath, RawExpr, Pos)>,
    goto: Option<(String, Pos)>,
    pos: Pos,
}

#[derive(Debug)]
struct RawLocation {
    name: String,
    initial: Option<Pos>,
    edges: Vec<RawEdge>,
}

#[derive(Debug, Default)]
struct RawAutomaton {
    name: String,
    pos: Pos,
    discs: Vec<(String, bool, Pos)>,
    inputs: Vec<(String, Pos)>,
    timers: Vec<(String, f64, Pos)>,
    events: Vec<(String, bool, Pos)>,
    locations: Vec<RawLocation>,
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn unexpected(&self, wanted: &str) -> GtsError {
        GtsError::syntax(
            self.pos(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<Pos, GtsError> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Pos, GtsError> {
        if self.at_kw(kw) {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), GtsError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn path(&mut self) -> Result<RawPath, GtsError> {
        let (first, pos) = self.ident()?;
        let mut parts = vec![first];
        while *self.peek() == Tok::Dot {
            self.bump();
            parts.push(self.ident()?.0);
        }
        Ok(RawPath { parts, pos })
    }

    fn ident_list(&mut self) -> Result<Vec<(String, Pos)>, GtsError> {
        let mut out = vec![self.ident()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn spec(&mut self) -> Result<Vec<RawAutomaton>, GtsError> {
        let mut automata = Vec::new();
        while *self.peek() != Tok::Eof {
            automata.push(self.automaton()?);
        }
        if automata.is_empty() {
            return Err(GtsError::syntax(self.pos(), "a controller needs at least one automaton"));
        }
        Ok(automata)
    }

    fn automaton(&mut self) -> Result<RawAutomaton, GtsError> {
        let pos = self.expect_kw("automaton")?;
        let name = self.path()?.joined();
        self.expect(Tok::Colon, "`:`")?;
        let mut aut = RawAutomaton {
            name,
            pos,
            ..Default::default()
        };
        loop {
            let Tok::Ident(word) = self.peek().clone() else {
                return Err(self.unexpected("a declaration, location or `end`"));
            };
            match word.as_str() {
                "end" => {
                    self.bump();
                    return Ok(aut);
                }
                "disc" => {
                    self.bump();
                    self.expect_kw("bool")?;
                    loop {
                        let (name, p) = self.ident()?;
                        let mut init = false;
                        if *self.peek() == Tok::Eq {
                            self.bump();
                            init = match self.peek() {
                                Tok::Ident(s) if s == "true" => true,
                                Tok::Ident(s) if s == "false" => false,
                                _ => return Err(self.unexpected("`true` or `false`")),
                            };
                            self.bump();
                        }
                        aut.discs.push((name, init, p));
                        if *self.peek() != Tok::Comma {
                            break;
                        }
                        self.bump();
                    }
                    self.expect(Tok::Semi, "`;`")?;
                }
                "input" => {
                    self.bump();
                    self.expect_kw("bool")?;
                    aut.inputs.extend(self.ident_list()?);
                    self.expect(Tok::Semi, "`;`")?;
                }
                "cont" => {
                    self.bump();
                    let names = self.ident_list()?;
                    let mut init = 0.0;
                    if *self.peek() == Tok::Eq {
                        self.bump();
                        init = self.number()?;
                    }
                    self.expect_kw("der")?;
                    let der_pos = self.pos();
                    if self.number()? != 1.0 {
                        return Err(GtsError::syntax(der_pos, "only timers with `der 1` are supported"));
                    }
                    self.expect(Tok::Semi, "`;`")?;
                    aut.timers.extend(names.into_iter().map(|(n, p)| (n, init, p)));
                }
                "uncontrollable" | "controllable" => {
                    self.bump();
                    let controllable = word == "controllable";
                    for (n, p) in self.ident_list()? {
                        aut.events.push((n, controllable, p));
                    }
                    self.expect(Tok::Semi, "`;`")?;
                }
                "location" => {
                    self.bump();
                    let name = match self.peek() {
                        Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => self.ident()?.0,
                        _ => String::new(),
                    };
                    let mut loc = RawLocation {
                        name,
                        initial: None,
                        edges: Vec::new(),
                    };
                    if *self.peek() == Tok::Semi {
                        self.bump();
                    } else {
                        self.expect(Tok::Colon, "`:` or `;`")?;
                    }
                    self.location_body(&mut loc)?;
                    aut.locations.push(loc);
                }
                "edge" => {
                    return Err(GtsError::syntax(self.pos(), "edge outside of a location"));
                }
                _ => return Err(self.unexpected("a declaration, location or `end`")),
            }
        }
    }

    fn location_body(&mut self, loc: &mut RawLocation) -> Result<(), GtsError> {
        loop {
            if self.at_kw("initial") {
                let p = self.bump().pos;
                if loc.initial.is_none() {
                    loc.initial = Some(p);
                }
                self.expect(Tok::Semi, "`;`")?;
            } else if self.at_kw("marked") {
                self.bump();
                self.expect(Tok::Semi, "`;`")?;
            } else if self.at_kw("edge") {
                let e = self.edge()?;
                loc.edges.push(e);
            } else {
                return Ok(());
            }
        }
    }

    fn edge(&mut self) -> Result<RawEdge, GtsError> {
        let pos = self.expect_kw("edge")?;
        let mut edge = RawEdge {
            event: None,
            guard: None,
            updates: Vec::new(),
            goto: None,
            pos,
        };
        if let Tok::Ident(s) = self.peek() {
            if !matches!(s.as_str(), "when" | "do" | "goto") {
                edge.event = Some(self.path()?);
            }
        }
        if self.at_kw("when") {
            self.bump();
            let gpos = self.pos();
            let mut g = self.or_expr()?;
            while *self.peek() == Tok::Comma {
                self.bump();
                let rhs = self.or_expr()?;
                g = RawExpr::And(Box::new(g), Box::new(rhs));
            }
            edge.guard = Some((g, gpos));
        }
        if self.at_kw("do") {
            self.bump();
            loop {
                let target = self.path()?;
                let apos = self.expect(Tok::Assign, "`:=`")?;
                let value = self.or_expr()?;
                edge.updates.push((target, value, apos));
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
        }
        if self.at_kw("goto") {
            self.bump();
            edge.goto = Some(self.ident()?);
        }
        self.expect(Tok::Semi, "`when`, `do`, `goto` or `;`")?;
        Ok(edge)
    }

    fn number(&mut self) -> Result<f64, GtsError> {
        match *self.peek() {
            Tok::Number(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    fn or_expr(&mut self) -> Result<RawExpr, GtsError> {
        let mut lhs = self.and_expr()?;
        while self.at_kw("or") {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = RawExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<RawExpr, GtsError> {
        let mut lhs = self.cmp_expr()?;
        while self.at_kw("and") {
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = RawExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<RawExpr, GtsError> {
        let lhs = self.unary()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Ge => CmpOp::Ge,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Lt => CmpOp::Lt,
            _ => return Ok(lhs),
        };
        let pos = self.bump().pos;
        let rhs = self.unary()?;
        Ok(RawExpr::Cmp(op, Box::new(lhs), Box::new(rhs), pos))
    }

    fn unary(&mut self) -> Result<RawExpr, GtsError> {
        if self.at_kw("not") {
            self.bump();
            return Ok(RawExpr::Not(Box::new(self.unary()?)));
        }
        match self.peek().clone() {
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(RawExpr::Bool(s == "true"))
            }
            Tok::Number(n) => {
                self.bump();
                Ok(RawExpr::Real(n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.or_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(_) => Ok(RawExpr::Path(self.path()?)),
            _ => Err(self.unexpected("an expression")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Bool,
    Real,
}

#[derive(Debug, Clone, Copy)]
enum Member {
    Disc(usize),
    Input(usize),
    Timer(usize),
    Loc(usize, usize),
}

struct Scope {
    automata: HashMap<String, usize>,
    members: Vec<HashMap<String, Member>>,
    locations: Vec<HashMap<String, usize>>,
    events: Vec<HashMap<String, usize>>,
}

impl Scope {
    fn member(&self, owner: usize, path: &RawPath) -> Result<Member, GtsError> {
        let (aut, name) = self.split(owner, path)?;
        if let Some(m) = self.members[aut].get(name) {
            return Ok(*m);
        }
        if let Some(&l) = self.locations[aut].get(name) {
            return Ok(Member::Loc(aut, l));
        }
        Err(GtsError::undeclared(path.pos, path.joined()))
    }

    fn event(&self, owner: usize, path: &RawPath) -> Result<usize, GtsError> {
        let (aut, name) = self.split(owner, path)?;
        self.events[aut]
            .get(name)
            .copied()
            .ok_or_else(|| GtsError::undeclared(path.pos, path.joined()))
    }

    fn split<'p>(&self, owner: usize, path: &'p RawPath) -> Result<(usize, &'p str), GtsError> {
        let (last, prefix) = path.parts.split_last().expect("paths are non-empty");
        if prefix.is_empty() {
            return Ok((owner, last));
        }
        let aut = self
            .automata
            .get(&prefix.join("."))
            .copied()
            .ok_or_else(|| GtsError::undeclared(path.pos, path.joined()))?;
        Ok((aut, last))
    }

    fn expr(&self, owner: usize, e: &RawExpr) -> Result<(Expr, Ty), GtsError> {
        Ok(match e {
            RawExpr::Bool(b) => (Expr::Bool(*b), Ty::Bool),
            RawExpr::Real(r) => (Expr::Real(*r), Ty::Real),
            RawExpr::Path(p) => match self.member(owner, p)? {
                Member::Disc(d) => (Expr::Disc(d), Ty::Bool),
                Member::Input(i) => (Expr::Input(i), Ty::Bool),
                Member::Timer(t) => (Expr::Timer(t), Ty::Real),
                Member::Loc(a, l) => (Expr::Loc(a, l), Ty::Bool),
            },
            RawExpr::Not(inner) => {
                let (x, ty) = self.expr(owner, inner)?;
                if ty != Ty::Bool {
                    return Err(GtsError::type_error(first_pos(inner), "`not` needs a Boolean"));
                }
                (Expr::Not(Box::new(x)), Ty::Bool)
            }
            RawExpr::And(a, b) | RawExpr::Or(a, b) => {
                let (x, tx) = self.expr(owner, a)?;
                let (y, ty) = self.expr(owner, b)?;
                if tx != Ty::Bool || ty != Ty::Bool {
                    return Err(GtsError::type_error(first_pos(a), "`and`/`or` need Booleans"));
                }
                let (x, y) = (Box::new(x), Box::new(y));
                match e {
                    RawExpr::And(..) => (Expr::And(x, y), Ty::Bool),
                    _ => (Expr::Or(x, y), Ty::Bool),
                }
            }
            RawExpr::Cmp(op, a, b, pos) => {
                let (x, tx) = self.expr(owner, a)?;
                let (y, ty) = self.expr(owner, b)?;
                if tx != ty {
                    return Err(GtsError::type_error(*pos, "comparison between a Boolean and a number"));
                }
                if tx == Ty::Bool && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    return Err(GtsError::type_error(*pos, "ordering comparison on Booleans"));
                }
                (Expr::Cmp(*op, Box::new(x), Box::new(y)), Ty::Bool)
            }
        })
    }
}

fn first_pos(e: &RawExpr) -> Pos {
    match e {
        RawExpr::Path(p) => p.pos,
        RawExpr::Not(x) | RawExpr::And(x, _) | RawExpr::Or(x, _) => first_pos(x),
        RawExpr::Cmp(_, _, _, p) => *p,
        RawExpr::Bool(_) | RawExpr::Real(_) => Pos::default(),
    }
}

fn duplicate(pos: Pos, name: &str) -> GtsError {
    GtsError::syntax(pos, format!("`{name}` is declared twice"))
}

fn resolve(raw: Vec<RawAutomaton>) -> Result<GtsSpec, GtsError> {
    let mut spec = GtsSpec {
        automata: Vec::new(),
        events: Vec::new(),
        discs: Vec::new(),
        inputs: Vec::new(),
        timers: Vec::new(),
        edges: Vec::new(),
    };
    let mut scope = Scope {
        automata: HashMap::new(),
        members: Vec::new(),
        locations: Vec::new(),
        events: Vec::new(),
    };

    for (a, ra) in raw.iter().enumerate() {
        if scope.automata.insert(ra.name.clone(), a).is_some() {
            return Err(duplicate(ra.pos, &ra.name));
        }
        let mut members = HashMap::new();
        let mut insert = |name: &str, m: Member, pos: Pos| {
            if members.insert(name.to_string(), m).is_some() {
                Err(duplicate(pos, name))
            } else {
                Ok(())
            }
        };
        for (name, init, pos) in &ra.discs {
            insert(name, Member::Disc(spec.discs.len()), *pos)?;
            spec.discs.push(DiscDecl {
                owner: a,
                name: name.clone(),
                initial: *init,
            });
        }
        for (name, pos) in &ra.inputs {
            insert(name, Member::Input(spec.inputs.len()), *pos)?;
            spec.inputs.push(InputDecl {
                owner: a,
                name: name.clone(),
            });
        }
        for (name, init, pos) in &ra.timers {
            insert(name, Member::Timer(spec.timers.len()), *pos)?;
            spec.timers.push(TimerDecl {
                owner: a,
                name: name.clone(),
                initial: *init,
            });
        }
        let mut events = HashMap::new();
        for (name, controllable, pos) in &ra.events {
            if members.contains_key(name) || events.insert(name.clone(), spec.events.len()).is_some() {
                return Err(duplicate(*pos, name));
            }
            spec.events.push(EventDecl {
                owner: a,
                name: name.clone(),
                controllable: *controllable,
            });
        }
        let mut locations = HashMap::new();
        let mut names = Vec::new();
        let mut initial = None;
        for (l, loc) in ra.locations.iter().enumerate() {
            if !loc.name.is_empty() && locations.insert(loc.name.clone(), l).is_some() {
                return Err(duplicate(ra.pos, &loc.name));
            }
            if let Some(p) = loc.initial {
                if initial.is_some() {
                    return Err(GtsError::syntax(p, format!("automaton `{}` has two initial locations", ra.name)));
                }
                initial = Some(l);
            }
            names.push(loc.name.clone());
        }
        if names.is_empty() {
            names.push(String::new());
        }
        spec.automata.push(Automaton {
            name: ra.name.clone(),
            locations: names,
            initial: initial.unwrap_or(0),
        });
        scope.members.push(members);
        scope.locations.push(locations);
        scope.events.push(events);
    }

    for (a, ra) in raw.iter().enumerate() {
        for (l, loc) in ra.locations.iter().enumerate() {
            for re in &loc.edges {
                let event = re.event.as_ref().map(|p| scope.event(a, p)).transpose()?;
                let guard = match &re.guard {
                    None => Expr::Bool(true),
                    Some((g, gpos)) => {
                        let (x, ty) = scope.expr(a, g)?;
                        if ty != Ty::Bool {
                            return Err(GtsError::type_error(*gpos, "guards must be Boolean"));
                        }
                        x
                    }
                };
                let mut updates = Vec::new();
                for (target, value, apos) in &re.updates {
                    let (x, ty) = scope.expr(a, value)?;
                    let name = target.joined();
                    let m = scope.member(a, target)?;
                    let (upd, want, tgt_owner) = match m {
                        Member::Input(_) => {
                            return Err(GtsError::AssignToInput {
                                name,
                                line: target.pos.line,
                                col: target.pos.col,
                            })
                        }
                        Member::Loc(..) => {
                            return Err(GtsError::type_error(target.pos, "locations cannot be assigned"))
                        }
                        Member::Disc(d) => (Update::Disc(d, x), Ty::Bool, spec.discs[d].owner),
                        Member::Timer(t) => (Update::Timer(t, x), Ty::Real, spec.timers[t].owner),
                    };
                    if tgt_owner != a {
                        return Err(GtsError::ForeignAssignment {
                            name,
                            line: target.pos.line,
                            col: target.pos.col,
                        });
                    }
                    if ty != want {
                        return Err(GtsError::type_error(*apos, "assigned value has the wrong type"));
                    }
                    updates.push(upd);
                }
                let goto = match &re.goto {
                    None => None,
                    Some((name, pos)) => Some(
                        scope.locations[a]
                            .get(name)
                            .copied()
                            .ok_or_else(|| GtsError::undeclared(*pos, name.clone()))?,
                    ),
                };
                spec.edges.push(Edge {
                    owner: a,
                    location: l,
                    event,
                    guard,
                    updates,
                    goto,
                    pos: re.pos,
                });
            }
        }
    }
    Ok(spec)
}

pub fn parse_gts(text: &str) -> Result<GtsSpec, GtsError> {
    let toks = tokenize(text)?;
    let raw = Parser { toks, i: 0 }.spec()?;
    resolve(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEST_CONTROLLER: &str = include_str!("../../fixtures/test_controller.gts");

    #[test]
    fn test_controller_shape() {
        let spec = parse_gts(TEST_CONTROLLER).unwrap();
        assert_eq!(spec.automata.len(), 2);
        assert_eq!(spec.events.len(), 2);
        assert_eq!(spec.timers.len(), 1);
        assert_eq!(spec.edges.len(), 6);
        assert_eq!(spec.automata[0].locations, ["closing", "opening"]);
        assert_eq!(spec.automata[0].initial, 0);
        assert_eq!(
            spec.default_outputs(),
            ["dvar_M_M_HW_Boombarrier_a_open", "dvar_M_M_HW_Boombarrier_a_close"]
        );
        assert_eq!(
            spec.input_names(),
            ["ivar_M_M_HW_Boombarrier_s_opened", "ivar_M_M_HW_Boombarrier_s_closed"]
        );
    }

    #[test]
    fn missing_dot_is_a_syntax_error() {
        let verbatim = TEST_CONTROLLER.replace("BoomBarrier.opening do", "BoomBarrier opening do");
        match parse_gts(&verbatim) {
            Err(GtsError::SyntaxError { line, msg, .. }) => {
                assert!(msg.contains("`opening`"), "{msg}");
                assert_eq!(line, verbatim.lines().position(|l| l.contains("BoomBarrier opening")).unwrap() + 1);
            }
            other => panic!("expected a syntax error, got {other:?}"),
        }
    }

    #[test]
    fn assign_to_input_rejected() {
        let src = "automaton A:\n input bool s_opened;\n location: initial;\n edge when true do s_opened := true;\nend\n";
        assert!(matches!(
            parse_gts(src),
            Err(GtsError::AssignToInput { line: 4, .. })
        ));
    }

    #[test]
    fn empty_file() {
        assert!(matches!(parse_gts(""), Err(GtsError::SyntaxError { .. })));
        assert!(matches!(parse_gts("// nothing\n"), Err(GtsError::SyntaxError { .. })));
    }

    #[test]
    fn undeclared_reference() {
        let src = "automaton A:\n disc bool x;\n location: initial;\n edge when y do x := true;\nend\n";
        assert_eq!(
            parse_gts(src).unwrap_err(),
            GtsError::UndeclaredIdentifier {
                name: "y".into(),
                line: 4,
                col: 12
            }
        );
        let src = "automaton A:\n location: initial;\n edge B.u when true;\nend\n";
        assert!(matches!(parse_gts(src), Err(GtsError::UndeclaredIdentifier { .. })));
    }

    #[test]
    fn foreign_assignment_rejected() {
        let src = "automaton A:\n disc bool x;\n location: initial;\nend\nautomaton B:\n location: initial;\n edge do A.x := true;\nend\n";
        assert!(matches!(parse_gts(src), Err(GtsError::ForeignAssignment { .. })));
    }

    #[test]
    fn dotted_automaton_names_resolve() {
        let src = "automaton Tunnel.Tube1.Barrier:\n uncontrollable u_op;\n location geenKeuze: initial;\n location op;\nend\n\
                   automaton HW_Barrier:\n disc bool a_open;\n input bool s_opened;\n location: initial;\n\
                   edge when a_open != Tunnel.Tube1.Barrier.op do a_open := Tunnel.Tube1.Barrier.op;\n\
                   edge Tunnel.Tube1.Barrier.u_op when s_opened;\nend\n";
        let spec = parse_gts(src).unwrap();
        assert_eq!(spec.edges.len(), 2);
        assert_eq!(spec.edges[1].event, Some(0));
        assert_eq!(spec.event_name(0), "Tunnel.Tube1.Barrier.u_op");
    }

    #[test]
    fn type_errors() {
        let src = "automaton A:\n cont t der 1;\n disc bool x;\n location: initial;\n edge when t do x := true;\nend\n";
        assert!(matches!(parse_gts(src), Err(GtsError::TypeError { .. })));
        let src = "automaton A:\n cont t der 2;\n location: initial;\nend\n";
        assert!(matches!(parse_gts(src), Err(GtsError::SyntaxError { .. })));
    }
}
