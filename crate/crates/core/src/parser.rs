//! Recursive-descent parser for contracts. Program expressions and refinement
//! terms share one precedence-climbing grammar, instantiated through [`Build`].

use num_bigint::BigUint;
use thiserror::Error;

use crate::ast::*;
use crate::lexer::{tokenize, Tok, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Sort,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{loc}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub loc: SourceLoc,
    pub message: String,
}

pub(crate) fn syntax(loc: SourceLoc, message: impl Into<String>) -> ParseError {
    ParseError { kind: ParseErrorKind::Syntax, loc, message: message.into() }
}

pub const KEYWORDS: &[&str] = &[
    "contract", "struct", "constructor", "fun", "pure", "let", "fetch", "as", "commit", "to",
    "require", "assume", "assert", "if", "else", "join", "phi", "while", "call", "return", "skip",
    "havoc", "map", "uint", "addr", "bool", "unit", "true", "false", "sat", "sum", "fld",
    "flatten", "maxint", "msg",
];

type PResult<T> = Result<T, ParseError>;

/// Node constructors for one expression language.
trait Build {
    type Out;
    fn leaf_nat(&self, n: BigUint, loc: SourceLoc) -> Self::Out;
    fn leaf_bool(&self, b: bool, loc: SourceLoc) -> Self::Out;
    fn leaf_unit(&self, loc: SourceLoc) -> Self::Out;
    fn var(&self, x: String, loc: SourceLoc) -> PResult<Self::Out>;
    fn sender(&self, loc: SourceLoc) -> PResult<Self::Out>;
    fn bin(&self, op: BinOp, a: Self::Out, b: Self::Out, loc: SourceLoc) -> Self::Out;
    fn not(&self, a: Self::Out, loc: SourceLoc) -> Self::Out;
    fn map_const(&self, t: BaseType, es: Vec<(BigUint, Self::Out)>, loc: SourceLoc) -> Self::Out;
    fn struct_const(&self, s: String, fs: Vec<(String, Self::Out)>, loc: SourceLoc) -> Self::Out;
    fn index(&self, m: Self::Out, k: Self::Out, loc: SourceLoc) -> Self::Out;
    fn field(&self, s: Self::Out, x: String, loc: SourceLoc) -> Self::Out;
    fn update(&self, m: Self::Out, k: Self::Out, v: Self::Out, loc: SourceLoc) -> Self::Out;
    fn field_update(&self, s: Self::Out, x: String, v: Self::Out, loc: SourceLoc) -> Self::Out;
    fn havoc(&self, t: BaseType, loc: SourceLoc) -> PResult<Self::Out>;
    /// `sum(..)`, `fld(x, ..)`, `flatten(..)` and `maxint`.
    fn aggregate(&self, name: &str, field: Option<String>, arg: Option<Self::Out>, loc: SourceLoc)
        -> PResult<Self::Out>;
}

struct ExprB;
struct TermB;

impl Build for ExprB {
    type Out = Expr;
    fn leaf_nat(&self, n: BigUint, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::Nat(n), loc)
    }
    fn leaf_bool(&self, b: bool, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::Bool(b), loc)
    }
    fn leaf_unit(&self, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::Unit, loc)
    }
    fn var(&self, x: String, loc: SourceLoc) -> PResult<Expr> {
        Ok(Expr::new(ExprKind::Var(x), loc))
    }
    fn sender(&self, loc: SourceLoc) -> PResult<Expr> {
        Ok(Expr::new(ExprKind::Var(SENDER.into()), loc))
    }
    fn bin(&self, op: BinOp, a: Expr, b: Expr, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::Bin(op, Box::new(a), Box::new(b)), loc)
    }
    fn not(&self, a: Expr, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::Not(Box::new(a)), loc)
    }
    fn map_const(&self, t: BaseType, es: Vec<(BigUint, Expr)>, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::MapConst(t, es), loc)
    }
    fn struct_const(&self, s: String, fs: Vec<(String, Expr)>, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::StructConst(s, fs), loc)
    }
    fn index(&self, m: Expr, k: Expr, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::Index(Box::new(m), Box::new(k)), loc)
    }
    fn field(&self, s: Expr, x: String, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::FieldIndex(Box::new(s), x), loc)
    }
    fn update(&self, m: Expr, k: Expr, v: Expr, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::Update(Box::new(m), Box::new(k), Box::new(v)), loc)
    }
    fn field_update(&self, s: Expr, x: String, v: Expr, loc: SourceLoc) -> Expr {
        Expr::new(ExprKind::FieldUpdate(Box::new(s), x, Box::new(v)), loc)
    }
    fn havoc(&self, t: BaseType, loc: SourceLoc) -> PResult<Expr> {
        Ok(Expr::new(ExprKind::Havoc(t), loc))
    }
    fn aggregate(&self, name: &str, _: Option<String>, _: Option<Expr>, loc: SourceLoc) -> PResult<Expr> {
        Err(syntax(loc, format!("`{name}` is only allowed inside refinements")))
    }
}

impl Build for TermB {
    type Out = Term;
    fn leaf_nat(&self, n: BigUint, _: SourceLoc) -> Term {
        Term::Nat(n)
    }
    fn leaf_bool(&self, b: bool, _: SourceLoc) -> Term {
        Term::Bool(b)
    }
    fn leaf_unit(&self, _: SourceLoc) -> Term {
        Term::Unit
    }
    fn var(&self, x: String, _: SourceLoc) -> PResult<Term> {
        Ok(if x == "v" { Term::Nu } else { Term::Var(x) })
    }
    fn sender(&self, _: SourceLoc) -> PResult<Term> {
        Ok(Term::Var(SENDER.into()))
    }
    fn bin(&self, op: BinOp, a: Term, b: Term, _: SourceLoc) -> Term {
        Term::bin(op, a, b)
    }
    fn not(&self, a: Term, _: SourceLoc) -> Term {
        Term::Not(Box::new(a))
    }
    fn map_const(&self, t: BaseType, es: Vec<(BigUint, Term)>, _: SourceLoc) -> Term {
        Term::MapConst(t, es)
    }
    fn struct_const(&self, s: String, fs: Vec<(String, Term)>, _: SourceLoc) -> Term {
        Term::StructConst(s, fs)
    }
    fn index(&self, m: Term, k: Term, _: SourceLoc) -> Term {
        Term::index(m, k)
    }
    fn field(&self, s: Term, x: String, _: SourceLoc) -> Term {
        Term::Field(Box::new(s), x)
    }
    fn update(&self, m: Term, k: Term, v: Term, _: SourceLoc) -> Term {
        Term::Update(Box::new(m), Box::new(k), Box::new(v))
    }
    fn field_update(&self, s: Term, x: String, v: Term, _: SourceLoc) -> Term {
        Term::FieldUpdate(Box::new(s), x, Box::new(v))
    }
    fn havoc(&self, _: BaseType, loc: SourceLoc) -> PResult<Term> {
        Err(syntax(loc, "`havoc` is not allowed inside refinements"))
    }
    fn aggregate(&self, name: &str, field: Option<String>, arg: Option<Term>, _: SourceLoc) -> PResult<Term> {
        Ok(match (name, arg) {
            ("maxint", _) => Term::MaxInt,
            ("sum", Some(a)) => Term::sum(a),
            ("flatten", Some(a)) => Term::Flatten(Box::new(a)),
            ("fld", Some(a)) => Term::Fld(field.expect("fld has a field"), Box::new(a)),
            _ => unreachable!("aggregate arity checked by the parser"),
        })
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> PResult<Parser> {
        let toks = tokenize(src).map_err(|e| syntax(e.loc, e.message))?;
        Ok(Parser { toks, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn loc(&self) -> SourceLoc {
        self.toks[self.pos].loc
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        Err(syntax(self.loc(), format!("expected {wanted}, found {}", self.peek().describe())))
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.unexpected(&t.describe())
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn nat(&mut self) -> PResult<BigUint> {
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.unexpected("a number"),
        }
    }

    fn base_type(&mut self) -> PResult<BaseType> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Ident(s) => match s.as_str() {
                "uint" | "addr" => {
                    self.bump();
                    Ok(BaseType::UInt)
                }
                "bool" => {
                    self.bump();
                    Ok(BaseType::Bool)
                }
                "unit" => {
                    self.bump();
                    Ok(BaseType::Unit)
                }
                "map" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let first = self.base_type()?;
                    let inner = if self.eat(&Tok::FatArrow) {
                        if first != BaseType::UInt {
                            return Err(syntax(loc, "map keys must be uint or addr"));
                        }
                        self.base_type()?
                    } else {
                        first
                    };
                    self.expect(Tok::RParen)?;
                    Ok(BaseType::map(inner))
                }
                _ => Ok(BaseType::Struct(self.ident()?)),
            },
            _ => self.unexpected("a type"),
        }
    }

    fn ref_type(&mut self) -> PResult<RefType> {
        let base = self.base_type()?;
        if self.eat_kw("sat") {
            self.expect(Tok::LBrace)?;
            let q = self.expr(&TermB, 0)?;
            self.expect(Tok::RBrace)?;
            Ok(RefType::refined(base, q))
        } else {
            Ok(RefType::plain(base))
        }
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Ge => BinOp::Ge,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Lt => BinOp::Lt,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            _ => return None,
        })
    }

    fn expr<B: Build>(&mut self, b: &B, min_prec: u8) -> PResult<B::Out> {
        let mut lhs = self.unary(b)?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec <= min_prec {
                break;
            }
            let loc = self.loc();
            self.bump();
            let rhs = self.expr(b, prec)?;
            lhs = b.bin(op, lhs, rhs, loc);
        }
        Ok(lhs)
    }

    fn unary<B: Build>(&mut self, b: &B) -> PResult<B::Out> {
        let loc = self.loc();
        if self.eat(&Tok::Bang) {
            let a = self.unary(b)?;
            return Ok(b.not(a, loc));
        }
        let mut e = self.primary(b)?;
        while self.peek() == &Tok::LBrack {
            let loc = self.loc();
            self.bump();
            if self.eat(&Tok::Dot) {
                let x = self.ident()?;
                if self.eat(&Tok::LArrow) {
                    let v = self.expr(b, 0)?;
                    self.expect(Tok::RBrack)?;
                    e = b.field_update(e, x, v, loc);
                } else {
                    self.expect(Tok::RBrack)?;
                    e = b.field(e, x, loc);
                }
            } else {
                let k = self.expr(b, 0)?;
                if self.eat(&Tok::LArrow) {
                    let v = self.expr(b, 0)?;
                    self.expect(Tok::RBrack)?;
                    e = b.update(e, k, v, loc);
                } else {
                    self.expect(Tok::RBrack)?;
                    e = b.index(e, k, loc);
                }
            }
        }
        Ok(e)
    }

    fn primary<B: Build>(&mut self, b: &B) -> PResult<B::Out> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.bump();
                Ok(b.leaf_nat(n, loc))
            }
            Tok::LParen => {
                self.bump();
                if self.eat(&Tok::RParen) {
                    return Ok(b.leaf_unit(loc));
                }
                let e = self.expr(b, 0)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(b.leaf_bool(s == "true", loc))
                }
                "msg" => {
                    self.bump();
                    self.expect(Tok::Dot)?;
                    if !self.eat_kw("sender") {
                        return self.unexpected("`sender`");
                    }
                    b.sender(loc)
                }
                "havoc" => {
                    self.bump();
                    let t = self.base_type()?;
                    b.havoc(t, loc)
                }
                "maxint" => {
                    self.bump();
                    b.aggregate("maxint", None, None, loc)
                }
                "sum" | "flatten" | "fld" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let field = if s == "fld" {
                        let x = self.ident()?;
                        self.expect(Tok::Comma)?;
                        Some(x)
                    } else {
                        None
                    };
                    let a = self.expr(b, 0)?;
                    self.expect(Tok::RParen)?;
                    b.aggregate(&s, field, Some(a), loc)
                }
                "map" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let t = self.base_type()?;
                    self.expect(Tok::RParen)?;
                    self.expect(Tok::LBrace)?;
                    let mut es: Vec<(BigUint, B::Out)> = Vec::new();
                    if !self.eat(&Tok::RBrace) {
                        loop {
                            let kloc = self.loc();
                            let k = self.nat()?;
                            if es.last().is_some_and(|(prev, _)| *prev >= k) {
                                return Err(syntax(kloc, "map constant keys must be strictly ascending"));
                            }
                            self.expect(Tok::Arrow)?;
                            let v = self.expr(b, 0)?;
                            es.push((k, v));
                            if self.eat(&Tok::RBrace) {
                                break;
                            }
                            self.expect(Tok::Comma)?;
                        }
                    }
                    Ok(b.map_const(t, es, loc))
                }
                _ => {
                    let x = self.ident()?;
                    if self.peek() == &Tok::LBrace {
                        self.bump();
                        let mut fs = Vec::new();
                        if !self.eat(&Tok::RBrace) {
                            loop {
                                let f = self.ident()?;
                                self.expect(Tok::Colon)?;
                                let v = self.expr(b, 0)?;
                                fs.push((f, v));
                                if self.eat(&Tok::RBrace) {
                                    break;
                                }
                                self.expect(Tok::Comma)?;
                            }
                        }
                        return Ok(b.struct_const(x, fs, loc));
                    }
                    b.var(x, loc)
                }
            },
            _ => self.unexpected("an expression"),
        }
    }

    fn phis(&mut self) -> PResult<Vec<Phi>> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(out);
        }
        loop {
            let loc = self.loc();
            let var = self.ident()?;
            self.expect(Tok::Colon)?;
            let ty = self.ref_type()?;
            self.expect(Tok::Assign)?;
            self.expect_kw("phi")?;
            self.expect(Tok::LParen)?;
            let left = self.ident()?;
            self.expect(Tok::Comma)?;
            let right = self.ident()?;
            self.expect(Tok::RParen)?;
            out.push(Phi { var, ty, left, right, loc });
            if self.eat(&Tok::RBrace) {
                return Ok(out);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while !self.eat(&Tok::RBrace) {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        let Tok::Ident(kw) = self.peek().clone() else {
            return self.unexpected("a statement");
        };
        let kind = match kw.as_str() {
            "let" => {
                self.bump();
                let var = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ref_type()?;
                self.expect(Tok::Assign)?;
                let init = self.expr(&ExprB, 0)?;
                self.expect(Tok::Semi)?;
                StmtKind::Let { var, ty, init }
            }
            "skip" => {
                self.bump();
                self.expect(Tok::Semi)?;
                StmtKind::Skip
            }
            "require" | "assume" | "assert" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let e = self.expr(&ExprB, 0)?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                if kw == "assert" {
                    StmtKind::Assert(e)
                } else {
                    StmtKind::Assume(e)
                }
            }
            "if" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr(&ExprB, 0)?;
                self.expect(Tok::RParen)?;
                let then_branch = self.block()?;
                let else_branch = if self.eat_kw("else") { self.block()? } else { Vec::new() };
                let join = if self.eat_kw("join") { self.phis()? } else { Vec::new() };
                StmtKind::If { cond, then_branch, else_branch, join }
            }
            "while" => {
                self.bump();
                self.expect_kw("join")?;
                let join = self.phis()?;
                self.expect(Tok::LParen)?;
                let cond = self.expr(&ExprB, 0)?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                StmtKind::While { join, cond, body }
            }
            "fetch" => {
                self.bump();
                let mut pairs = Vec::new();
                loop {
                    let sv = self.ident()?;
                    self.expect_kw("as")?;
                    let x = self.ident()?;
                    pairs.push((sv, x));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::Semi)?;
                StmtKind::Fetch(pairs)
            }
            "commit" => {
                self.bump();
                let mut pairs = Vec::new();
                loop {
                    let e = self.expr(&ExprB, 0)?;
                    self.expect_kw("to")?;
                    let sv = self.ident()?;
                    pairs.push((e, sv));
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::Semi)?;
                StmtKind::Commit(pairs)
            }
            "call" => {
                self.bump();
                let var = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ref_type()?;
                self.expect(Tok::Assign)?;
                let func = self.ident()?;
                self.expect(Tok::LParen)?;
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        args.push(self.expr(&ExprB, 0)?);
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(Tok::Comma)?;
                    }
                }
                self.expect(Tok::Semi)?;
                StmtKind::Call { var, ty, func, args }
            }
            _ => return self.unexpected("a statement"),
        };
        Ok(Stmt { kind, loc })
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            let loc = self.loc();
            let name = self.ident()?;
            self.expect(Tok::Colon)?;
            let ty = self.ref_type()?;
            out.push(Param { name, ty, loc });
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            self.expect(Tok::Comma)?;
        }
    }

    fn function(&mut self, is_pure: bool, loc: SourceLoc) -> PResult<FunDecl> {
        self.expect_kw("fun")?;
        let name = self.ident()?;
        let params = self.params()?;
        let ret = if self.eat(&Tok::Arrow) {
            self.ref_type()?
        } else {
            RefType::plain(BaseType::Unit)
        };
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        let ret_expr;
        loop {
            if self.is_kw("return") {
                self.bump();
                ret_expr = self.expr(&ExprB, 0)?;
                self.expect(Tok::Semi)?;
                self.expect(Tok::RBrace)?;
                break;
            }
            if self.eat(&Tok::RBrace) {
                ret_expr = Expr::new(ExprKind::Unit, self.toks[self.pos - 1].loc);
                break;
            }
            body.push(self.stmt()?);
        }
        Ok(FunDecl { name, params, ret, body, ret_expr, is_pure, loc })
    }

    fn contract(&mut self) -> PResult<Contract> {
        self.expect_kw("contract")?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut c = Contract {
            name,
            structs: Vec::new(),
            state_vars: Vec::new(),
            ctor: None,
            functions: Vec::new(),
        };
        while !self.eat(&Tok::RBrace) {
            let loc = self.loc();
            if self.eat_kw("struct") {
                let name = self.ident()?;
                self.expect(Tok::LBrace)?;
                let mut fields = Vec::new();
                while !self.eat(&Tok::RBrace) {
                    let f = self.ident()?;
                    self.expect(Tok::Colon)?;
                    let t = self.base_type()?;
                    self.expect(Tok::Semi)?;
                    fields.push((f, t));
                }
                c.structs.push(StructDecl { name, fields, loc });
            } else if self.eat_kw("constructor") {
                if c.ctor.is_some() {
                    return Err(syntax(loc, "duplicate constructor"));
                }
                let params = self.params()?;
                let body = self.block()?;
                c.ctor = Some(Ctor { params, body, loc });
            } else if self.eat_kw("pure") {
                c.functions.push(self.function(true, loc)?);
            } else if self.is_kw("fun") {
                c.functions.push(self.function(false, loc)?);
            } else {
                let name = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.ref_type()?;
                self.expect(Tok::Semi)?;
                c.state_vars.push(StateVar { name, ty, loc });
            }
        }
        if self.peek() != &Tok::Eof {
            return self.unexpected("end of input");
        }
        Ok(c)
    }
}

/// Parses a contract and sort-checks its refinement annotations.
pub fn parse_contract(src: &str) -> Result<Contract, ParseError> {
    let c = Parser::new(src)?.contract()?;
    if let Some(d) = crate::validate::annotation_sort_errors(&c).into_iter().next() {
        return Err(ParseError { kind: ParseErrorKind::Sort, loc: d.loc, message: d.message });
    }
    Ok(c)
}

/// Parses a standalone refinement term such as `sum(v) <= tot`.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.expr(&TermB, 0)?;
    if p.peek() != &Tok::Eof {
        return p.unexpected("end of input");
    }
    Ok(t)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr(&ExprB, 0)?;
    if p.peek() != &Tok::Eof {
        return p.unexpected("end of input");
    }
    Ok(e)
}

pub fn parse_base_type(src: &str) -> Result<BaseType, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.base_type()?;
    if p.peek() != &Tok::Eof {
        return p.unexpected("end of input");
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let t = parse_term("a + b * c <= d && !e || f").unwrap();
        let expect = Term::bin(
            BinOp::Or,
            Term::bin(
                BinOp::And,
                Term::le(
                    Term::add(Term::var("a"), Term::mul(Term::var("b"), Term::var("c"))),
                    Term::var("d"),
                ),
                Term::not(Term::var("e")),
            ),
            Term::var("f"),
        );
        assert_eq!(t, expect);
    }

    #[test]
    fn subtraction_is_left_associative() {
        let t = parse_term("a - b - c").unwrap();
        assert_eq!(t, Term::sub(Term::sub(Term::var("a"), Term::var("b")), Term::var("c")));
    }

    #[test]
    fn refinement_atoms() {
        let t = parse_term("sum(fld(bal, flatten(v))) <= maxint").unwrap();
        let expect = Term::le(
            Term::sum(Term::Fld("bal".into(), Box::new(Term::Flatten(Box::new(Term::Nu))))),
            Term::MaxInt,
        );
        assert_eq!(t, expect);
    }

    #[test]
    fn postfix_chains() {
        let e = parse_expr("m[k <- m[k][.a <- 1]][j][.b]").unwrap();
        assert!(matches!(e.kind, ExprKind::FieldIndex(_, ref x) if x == "b"));
    }

    #[test]
    fn sender_is_a_variable() {
        let e = parse_expr("msg.sender == owner").unwrap();
        let ExprKind::Bin(BinOp::Eq, l, _) = e.kind else { panic!() };
        assert_eq!(l.kind, ExprKind::Var(SENDER.into()));
    }

    #[test]
    fn map_constant_keys_ascend() {
        assert!(parse_expr("map(uint){1 -> 2, 3 -> 4}").is_ok());
        let err = parse_expr("map(uint){3 -> 2, 1 -> 4}").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
    }

    #[test]
    fn refinement_only_forms_rejected_in_code() {
        assert!(parse_expr("sum(x)").is_err());
        assert!(parse_term("havoc uint").is_err());
    }

    #[test]
    fn missing_semicolon_reports_location() {
        let src = "contract C {\n  x : uint;\n  fun f() { let a : uint = 1 }\n}";
        let err = parse_contract(src).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!(err.loc, SourceLoc::new(3, 30));
    }

    #[test]
    fn ill_sorted_annotation_is_a_sort_error() {
        let src = "contract C { owner : uint sat { sum(v) <= 1 }; }";
        assert_eq!(parse_contract(src).unwrap_err().kind, ParseErrorKind::Sort);
    }
}
