//! Recursive-descent parser for Solidity 0.4 through 0.8.
//!
//! The grammar is the union of the syntax accepted across those releases
//! (old-style constructors, `throw`, `var`, `emit`, `unchecked`, `try`, custom
//! errors, call options). Inline assembly is skipped as an opaque brace-matched
//! span. Variable declarations and expression statements are disambiguated by
//! speculative parsing with backtracking.

use crate::ast::nodes::*;
use crate::ast::ParseError;
use crate::lexer::{self, Token, TokenKind};
use crate::span::Span;

pub(crate) fn parse_source_unit(src: &str) -> Result<SourceUnit, ParseError> {
    let toks = lexer::tokenize(src).map_err(|e| ParseError::at(src, e.offset, e.message))?;
    let mut p = Parser { src, toks, pos: 0 };
    p.source_unit()
}

pub(crate) fn parse_expression(src: &str) -> Result<Expr, ParseError> {
    let toks = lexer::tokenize(src).map_err(|e| ParseError::at(src, e.offset, e.message))?;
    let mut p = Parser { src, toks, pos: 0 };
    if p.toks.is_empty() {
        return Err(p.error("expected expression"));
    }
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.error("unexpected trailing tokens after expression"));
    }
    Ok(e)
}

pub(crate) fn parse_statement(src: &str) -> Result<Stmt, ParseError> {
    let toks = lexer::tokenize(src).map_err(|e| ParseError::at(src, e.offset, e.message))?;
    let mut p = Parser { src, toks, pos: 0 };
    let s = p.statement()?;
    if p.pos != p.toks.len() {
        return Err(p.error("unexpected trailing tokens after statement"));
    }
    Ok(s)
}

const VISIBILITY: &[&str] = &["public", "external", "internal", "private"];
const MUTABILITY: &[&str] = &["pure", "view", "payable", "constant", "nonpayable"];
const STORAGE: &[&str] = &["memory", "storage", "calldata"];
const UNITS: &[&str] = &[
    "wei", "gwei", "szabo", "finney", "ether", "seconds", "minutes", "hours", "days", "weeks", "years",
];

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    // ---- token helpers -------------------------------------------------

    fn tok(&self, ahead: usize) -> Option<&Token> {
        self.toks.get(self.pos + ahead)
    }

    fn text(&self, ahead: usize) -> &'a str {
        match self.toks.get(self.pos + ahead) {
            Some(t) => t.text(self.src),
            None => "",
        }
    }

    fn kind(&self, ahead: usize) -> Option<TokenKind> {
        self.tok(ahead).map(|t| t.kind)
    }

    fn at(&self, s: &str) -> bool {
        self.text(0) == s && self.kind(0) != Some(TokenKind::Str)
    }

    fn at_ident(&self) -> bool {
        self.kind(0) == Some(TokenKind::Ident)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.at(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<Span> {
        if self.at(s) {
            let span = self.toks[self.pos].span;
            self.pos += 1;
            Ok(span)
        } else {
            Err(self.error(&format!("expected `{s}`")))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        if self.at_ident() {
            let t = self.toks[self.pos];
            self.pos += 1;
            Ok((t.text(self.src).to_string(), t.span))
        } else {
            Err(self.error("expected identifier"))
        }
    }

    fn start(&self) -> usize {
        match self.toks.get(self.pos) {
            Some(t) => t.span.start,
            None => self.src.len(),
        }
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].span.end
        }
    }

    fn span_from(&self, start: usize) -> Span {
        Span::new(start, self.prev_end().max(start))
    }

    fn error(&self, message: &str) -> ParseError {
        let found = match self.tok(0) {
            Some(t) => format!("{message}, found `{}`", t.text(self.src)),
            None => format!("{message}, found end of input"),
        };
        ParseError::at(self.src, self.start(), found)
    }

    /// Skips a balanced `{...}` group starting at the current `{`.
    fn skip_braces(&mut self) -> PResult<()> {
        self.skip_balanced("{", "}")
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        self.expect(open)?;
        let mut depth = 1usize;
        while depth > 0 {
            if self.tok(0).is_none() {
                return Err(self.error(&format!("unbalanced `{open}`")));
            }
            if self.at(open) {
                depth += 1;
            } else if self.at(close) {
                depth -= 1;
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn skip_to_semicolon(&mut self) -> PResult<()> {
        while !self.at(";") {
            if self.tok(0).is_none() {
                return Err(self.error("expected `;`"));
            }
            if self.at("{") {
                self.skip_braces()?;
            } else if self.at("(") {
                self.skip_balanced("(", ")")?;
            } else {
                self.pos += 1;
            }
        }
        self.pos += 1;
        Ok(())
    }

    // ---- top level -----------------------------------------------------

    fn source_unit(&mut self) -> PResult<SourceUnit> {
        let mut items = Vec::new();
        while self.tok(0).is_some() {
            let start = self.start();
            if self.kind(0) == Some(TokenKind::Pragma) {
                self.pos += 1;
                self.expect(";")?;
                items.push(Item::Pragma(self.span_from(start)));
            } else if self.at("import") {
                self.skip_to_semicolon()?;
                items.push(Item::Import(self.span_from(start)));
            } else if self.at("contract") || self.at("interface") || self.at("library") || self.at("abstract") {
                items.push(Item::Contract(self.contract()?));
            } else if self.eat(";") {
            } else {
                items.push(Item::Part(self.part(None)?));
            }
        }
        Ok(SourceUnit { items })
    }

    fn contract(&mut self) -> PResult<Contract> {
        let start = self.start();
        let kind = if self.eat("abstract") {
            self.expect("contract")?;
            ContractKind::AbstractContract
        } else if self.eat("contract") {
            ContractKind::Contract
        } else if self.eat("interface") {
            ContractKind::Interface
        } else {
            self.expect("library")?;
            ContractKind::Library
        };
        let (name, _) = self.ident()?;
        let mut bases = Vec::new();
        if self.eat("is") {
            loop {
                let path = self.path()?;
                if self.at("(") {
                    self.call_args()?;
                }
                bases.push(path);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect("{")?;
        let mut parts = Vec::new();
        while !self.at("}") {
            if self.tok(0).is_none() {
                return Err(self.error("expected `}` to close contract"));
            }
            if self.eat(";") {
                continue;
            }
            parts.push(self.part(Some(&name))?);
        }
        self.expect("}")?;
        Ok(Contract {
            kind,
            name,
            span: self.span_from(start),
            bases,
            parts,
        })
    }

    fn path(&mut self) -> PResult<String> {
        let (mut path, _) = self.ident()?;
        while self.at(".") && self.kind(1) == Some(TokenKind::Ident) {
            self.pos += 1;
            path.push('.');
            path.push_str(&self.ident()?.0);
        }
        Ok(path)
    }

    fn part(&mut self, contract: Option<&str>) -> PResult<Part> {
        let start = self.start();
        let owner = contract.map(str::to_string);
        let kind = match self.text(0) {
            "function" => PartKind::Function(self.function(contract)?),
            "constructor" | "fallback" | "receive" if self.text(1) == "(" => {
                PartKind::Function(self.function(contract)?)
            }
            "modifier" => PartKind::Modifier(self.modifier(owner)?),
            "event" => {
                self.pos += 1;
                let (name, _) = self.ident()?;
                self.param_list()?;
                self.eat("anonymous");
                self.expect(";")?;
                PartKind::Event(EventInfo {
                    name,
                    contract: owner,
                    declaration_span: self.span_from(start),
                })
            }
            kw @ ("struct" | "enum") => {
                self.pos += 1;
                let (name, _) = self.ident()?;
                self.skip_braces()?;
                PartKind::Other {
                    keyword: kw.to_string(),
                    name: Some(name),
                }
            }
            kw @ ("error" | "using") => {
                self.pos += 1;
                let name = if kw == "error" { Some(self.ident()?.0) } else { None };
                self.skip_to_semicolon()?;
                PartKind::Other {
                    keyword: kw.to_string(),
                    name,
                }
            }
            "type" if self.kind(1) == Some(TokenKind::Ident) && self.text(2) == "is" => {
                self.pos += 1;
                let (name, _) = self.ident()?;
                self.skip_to_semicolon()?;
                PartKind::Other {
                    keyword: "type".to_string(),
                    name: Some(name),
                }
            }
            _ => PartKind::StateVar(self.state_var(owner)?),
        };
        Ok(Part {
            span: self.span_from(start),
            kind,
        })
    }

    fn state_var(&mut self, contract: Option<String>) -> PResult<StateVarInfo> {
        let start = self.start();
        let ty = self.type_name()?;
        let mut constant = false;
        loop {
            match self.text(0) {
                "public" | "private" | "internal" | "immutable" | "transient" => self.pos += 1,
                "constant" => {
                    constant = true;
                    self.pos += 1;
                }
                "override" => {
                    self.pos += 1;
                    if self.at("(") {
                        self.skip_balanced("(", ")")?;
                    }
                }
                _ => break,
            }
        }
        let (name, _) = self.ident()?;
        let initializer = if self.eat("=") { Some(self.expr()?) } else { None };
        self.expect(";")?;
        Ok(StateVarInfo {
            name,
            type_text: ty,
            contract,
            declaration_span: self.span_from(start),
            constant,
            initializer,
        })
    }

    fn function(&mut self, contract: Option<&str>) -> PResult<FunctionInfo> {
        let start = self.start();
        let (kind, name) = match self.text(0) {
            "constructor" => (FunctionKind::Constructor, "constructor".to_string()),
            "fallback" => (FunctionKind::Fallback, "fallback".to_string()),
            "receive" => (FunctionKind::Receive, "receive".to_string()),
            _ => {
                self.expect("function")?;
                if self.at("(") {
                    (FunctionKind::Fallback, String::new())
                } else {
                    let (name, _) = self.ident()?;
                    self.pos -= 1;
                    if Some(name.as_str()) == contract {
                        (FunctionKind::Constructor, name)
                    } else {
                        (FunctionKind::Function, name)
                    }
                }
            }
        };
        if self.at_ident() {
            self.pos += 1;
        }
        let params = self.param_list()?;
        let mut visibility = None;
        let mut mutability = None;
        let mut modifiers = Vec::new();
        let mut returns = Vec::new();
        loop {
            let word = self.text(0);
            if VISIBILITY.contains(&word) {
                visibility = Some(match word {
                    "public" => Visibility::Public,
                    "external" => Visibility::External,
                    "internal" => Visibility::Internal,
                    _ => Visibility::Private,
                });
                self.pos += 1;
            } else if MUTABILITY.contains(&word) {
                mutability = Some(word.to_string());
                self.pos += 1;
            } else if word == "virtual" {
                self.pos += 1;
            } else if word == "override" {
                self.pos += 1;
                if self.at("(") {
                    self.skip_balanced("(", ")")?;
                }
            } else if word == "returns" {
                self.pos += 1;
                returns = self.param_list()?;
            } else if self.at("{") || self.at(";") {
                break;
            } else if self.at_ident() {
                let mstart = self.start();
                let name = self.path()?;
                if self.at("(") {
                    self.call_args()?;
                }
                modifiers.push(ModifierInvocation {
                    name,
                    span: self.span_from(mstart),
                });
            } else {
                return Err(self.error("expected function body or `;`"));
            }
        }
        let header_span = self.span_from(start);
        let body = if self.eat(";") { None } else { Some(self.block()?) };
        Ok(FunctionInfo {
            kind,
            name,
            contract: contract.map(str::to_string),
            span: self.span_from(start),
            header_span,
            params,
            returns,
            visibility,
            mutability,
            modifiers,
            body,
        })
    }

    fn modifier(&mut self, contract: Option<String>) -> PResult<ModifierInfo> {
        let start = self.start();
        self.expect("modifier")?;
        let (name, _) = self.ident()?;
        if self.at("(") {
            self.param_list()?;
        }
        loop {
            if self.eat("virtual") {
                continue;
            }
            if self.eat("override") {
                if self.at("(") {
                    self.skip_balanced("(", ")")?;
                }
                continue;
            }
            break;
        }
        let header_span = self.span_from(start);
        let body = if self.eat(";") { None } else { Some(self.block()?) };
        Ok(ModifierInfo {
            name,
            contract,
            span: self.span_from(start),
            header_span,
            body,
        })
    }

    fn param_list(&mut self) -> PResult<Vec<Param>> {
        self.expect("(")?;
        let mut params = Vec::new();
        if self.eat(")") {
            return Ok(params);
        }
        loop {
            let start = self.start();
            let type_text = self.type_name()?;
            while STORAGE.contains(&self.text(0)) || self.at("indexed") {
                self.pos += 1;
            }
            let name = if self.at_ident() { Some(self.ident()?.0) } else { None };
            params.push(Param {
                type_text,
                name,
                span: self.span_from(start),
            });
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(params);
        }
    }

    /// Parses a type name and returns its source text.
    fn type_name(&mut self) -> PResult<String> {
        let start = self.start();
        if self.eat("mapping") {
            self.expect("(")?;
            self.type_name()?;
            if self.at_ident() {
                self.pos += 1;
            }
            self.expect("=>")?;
            self.type_name()?;
            if self.at_ident() {
                self.pos += 1;
            }
            self.expect(")")?;
        } else if self.at("function") && self.text(1) == "(" {
            self.pos += 1;
            self.param_list()?;
            while VISIBILITY.contains(&self.text(0)) || MUTABILITY.contains(&self.text(0)) {
                self.pos += 1;
            }
            if self.eat("returns") {
                self.param_list()?;
            }
        } else if self.at("address") {
            self.pos += 1;
            self.eat("payable");
        } else if self.at_ident() && !is_reserved_word(self.text(0)) {
            self.path()?;
        } else {
            return Err(self.error("expected type name"));
        }
        while self.at("[") {
            self.pos += 1;
            if !self.at("]") {
                self.expr()?;
            }
            self.expect("]")?;
        }
        Ok(self.span_from(start).slice(self.src).to_string())
    }

    // ---- statements ----------------------------------------------------

    fn block(&mut self) -> PResult<Block> {
        let start = self.start();
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.at("}") {
            if self.tok(0).is_none() {
                return Err(self.error("expected `}`"));
            }
            stmts.push(self.statement()?);
        }
        self.expect("}")?;
        Ok(Block {
            span: self.span_from(start),
            stmts,
        })
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let start = self.start();
        let kind = match self.text(0) {
            "{" if self.kind(0) == Some(TokenKind::Punct) => StmtKind::Block(self.block()?),
            "if" => {
                self.pos += 1;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then = Box::new(self.statement()?);
                let otherwise = if self.eat("else") {
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                StmtKind::If { cond, then, otherwise }
            }
            "for" => {
                self.pos += 1;
                self.expect("(")?;
                let init = if self.eat(";") {
                    None
                } else {
                    Some(Box::new(self.simple_statement()?))
                };
                let cond = if self.at(";") { None } else { Some(self.expr()?) };
                self.expect(";")?;
                let post = if self.at(")") { None } else { Some(self.expr()?) };
                self.expect(")")?;
                let body = Box::new(self.statement()?);
                StmtKind::For { init, cond, post, body }
            }
            "while" => {
                self.pos += 1;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                StmtKind::While {
                    cond,
                    body: Box::new(self.statement()?),
                }
            }
            "do" => {
                self.pos += 1;
                let body = Box::new(self.statement()?);
                self.expect("while")?;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                self.expect(";")?;
                StmtKind::DoWhile { body, cond }
            }
            "return" => {
                self.pos += 1;
                let value = if self.at(";") { None } else { Some(self.expr()?) };
                self.expect(";")?;
                StmtKind::Return(value)
            }
            "emit" => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(";")?;
                StmtKind::Emit(e)
            }
            "revert" if self.kind(1) == Some(TokenKind::Ident) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(";")?;
                StmtKind::Revert(e)
            }
            "throw" => {
                self.pos += 1;
                self.expect(";")?;
                StmtKind::Throw
            }
            "break" => {
                self.pos += 1;
                self.expect(";")?;
                StmtKind::Break
            }
            "continue" => {
                self.pos += 1;
                self.expect(";")?;
                StmtKind::Continue
            }
            "_" if self.text(1) == ";" => {
                self.pos += 2;
                StmtKind::Placeholder
            }
            "assembly" => {
                self.pos += 1;
                if self.kind(0) == Some(TokenKind::Str) {
                    self.pos += 1;
                }
                if self.at("(") {
                    self.skip_balanced("(", ")")?;
                }
                self.skip_braces()?;
                StmtKind::Assembly
            }
            "unchecked" if self.text(1) == "{" => {
                self.pos += 1;
                StmtKind::Unchecked(self.block()?)
            }
            "try" => {
                self.pos += 1;
                let expr = self.expr_no_call_options()?;
                if self.eat("returns") {
                    self.param_list()?;
                }
                let body = self.block()?;
                let mut catches = Vec::new();
                while self.eat("catch") {
                    if self.at_ident() {
                        self.pos += 1;
                    }
                    if self.at("(") {
                        self.param_list()?;
                    }
                    catches.push(self.block()?);
                }
                StmtKind::Try { expr, body, catches }
            }
            _ => return self.simple_statement(),
        };
        Ok(Stmt {
            span: self.span_from(start),
            kind,
        })
    }

    /// A variable declaration or expression statement, including its `;`.
    fn simple_statement(&mut self) -> PResult<Stmt> {
        let start = self.start();
        if let Some(kind) = self.try_var_decl()? {
            return Ok(Stmt {
                span: self.span_from(start),
                kind,
            });
        }
        let e = self.expr()?;
        self.expect(";")?;
        Ok(Stmt {
            span: self.span_from(start),
            kind: StmtKind::Expr(e),
        })
    }

    fn try_var_decl(&mut self) -> PResult<Option<StmtKind>> {
        let saved = self.pos;
        if self.eat("var") {
            let names = if self.at("(") {
                self.pos += 1;
                let mut names = Vec::new();
                loop {
                    if self.at(",") || self.at(")") {
                        names.push(None);
                    } else {
                        names.push(Some(self.ident()?.0));
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(")")?;
                names
            } else {
                vec![Some(self.ident()?.0)]
            };
            let init = if self.eat("=") { Some(self.expr()?) } else { None };
            self.expect(";")?;
            return Ok(Some(StmtKind::VarDecl { names, init }));
        }
        if self.at("(") {
            if let Some(names) = self.try_tuple_decl_head() {
                let init = Some(self.expr()?);
                self.expect(";")?;
                return Ok(Some(StmtKind::VarDecl { names, init }));
            }
            self.pos = saved;
            return Ok(None);
        }
        if let Some(name) = self.try_typed_name() {
            if self.at("=") || self.at(";") {
                let init = if self.eat("=") { Some(self.expr()?) } else { None };
                self.expect(";")?;
                return Ok(Some(StmtKind::VarDecl {
                    names: vec![Some(name)],
                    init,
                }));
            }
        }
        self.pos = saved;
        Ok(None)
    }

    /// `Type [location] name` with backtracking; leaves the cursor after the name.
    fn try_typed_name(&mut self) -> Option<String> {
        let saved = self.pos;
        if self.type_name().is_ok() {
            while STORAGE.contains(&self.text(0)) {
                self.pos += 1;
            }
            if self.at_ident() && !is_reserved_word(self.text(0)) {
                let name = self.text(0).to_string();
                self.pos += 1;
                return Some(name);
            }
        }
        self.pos = saved;
        None
    }

    /// `(T a, , T b) =` head of a tuple declaration; consumes through `=`.
    fn try_tuple_decl_head(&mut self) -> Option<Vec<Option<String>>> {
        let saved = self.pos;
        self.pos += 1;
        let mut names = Vec::new();
        let mut typed = false;
        loop {
            if self.at(",") || self.at(")") {
                names.push(None);
            } else if let Some(name) = self.try_typed_name() {
                typed = true;
                names.push(Some(name));
            } else {
                self.pos = saved;
                return None;
            }
            if !self.eat(",") {
                break;
            }
        }
        if typed && self.eat(")") && self.eat("=") {
            Some(names)
        } else {
            self.pos = saved;
            None
        }
    }

    // ---- expressions ---------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        self.expr_bp(0, true)
    }

    fn expr_no_call_options(&mut self) -> PResult<Expr> {
        self.expr_bp(0, false)
    }

    fn expr_bp(&mut self, min_bp: u8, options: bool) -> PResult<Expr> {
        let start = self.start();
        let mut lhs = match self.text(0) {
            op @ ("!" | "~" | "-" | "+" | "++" | "--" | "delete")
                if matches!(self.kind(0), Some(TokenKind::Punct | TokenKind::Ident)) =>
            {
                self.pos += 1;
                let operand = self.expr_bp(PREFIX_BP, options)?;
                Expr {
                    span: self.span_from(start),
                    kind: ExprKind::Unary {
                        op: op.to_string(),
                        operand: Box::new(operand),
                        prefix: true,
                    },
                }
            }
            "new" => {
                self.pos += 1;
                let ty = self.type_name()?;
                Expr {
                    span: self.span_from(start),
                    kind: ExprKind::New(ty),
                }
            }
            _ => self.primary()?,
        };

        loop {
            let op = self.text(0);
            if self.kind(0) != Some(TokenKind::Punct) {
                break;
            }
            // postfix
            match op {
                "++" | "--" => {
                    self.pos += 1;
                    lhs = Expr {
                        span: self.span_from(start),
                        kind: ExprKind::Unary {
                            op: op.to_string(),
                            operand: Box::new(lhs),
                            prefix: false,
                        },
                    };
                    continue;
                }
                "(" => {
                    let (args, names) = self.call_args()?;
                    lhs = Expr {
                        span: self.span_from(start),
                        kind: ExprKind::Call {
                            callee: Box::new(lhs),
                            args,
                            names,
                        },
                    };
                    continue;
                }
                "[" => {
                    self.pos += 1;
                    let from = if self.at("]") || self.at(":") {
                        None
                    } else {
                        Some(Box::new(self.expr()?))
                    };
                    if self.eat(":") {
                        let to = if self.at("]") { None } else { Some(Box::new(self.expr()?)) };
                        self.expect("]")?;
                        lhs = Expr {
                            span: self.span_from(start),
                            kind: ExprKind::Slice {
                                base: Box::new(lhs),
                                from,
                                to,
                            },
                        };
                    } else {
                        self.expect("]")?;
                        lhs = Expr {
                            span: self.span_from(start),
                            kind: ExprKind::Index {
                                base: Box::new(lhs),
                                index: from,
                            },
                        };
                    }
                    continue;
                }
                "." => {
                    self.pos += 1;
                    let (member, _) = self.ident()?;
                    lhs = Expr {
                        span: self.span_from(start),
                        kind: ExprKind::Member {
                            base: Box::new(lhs),
                            member,
                        },
                    };
                    continue;
                }
                "{" if options && self.kind(1) == Some(TokenKind::Ident) && self.text(2) == ":" => {
                    self.pos += 1;
                    let mut opts = Vec::new();
                    loop {
                        let (name, _) = self.ident()?;
                        self.expect(":")?;
                        opts.push((name, self.expr()?));
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect("}")?;
                    lhs = Expr {
                        span: self.span_from(start),
                        kind: ExprKind::CallOptions {
                            callee: Box::new(lhs),
                            options: opts,
                        },
                    };
                    continue;
                }
                _ => {}
            }

            if op == "?" {
                if TERNARY_BP < min_bp {
                    break;
                }
                self.pos += 1;
                let then = self.expr_bp(0, options)?;
                self.expect(":")?;
                let otherwise = self.expr_bp(TERNARY_BP, options)?;
                lhs = Expr {
                    span: self.span_from(start),
                    kind: ExprKind::Ternary {
                        cond: Box::new(lhs),
                        then: Box::new(then),
                        otherwise: Box::new(otherwise),
                    },
                };
                continue;
            }

            let Some((l_bp, r_bp)) = infix_bp(op) else { break };
            if l_bp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = self.expr_bp(r_bp, options)?;
            let kind = if is_assignment(op) {
                ExprKind::Assign {
                    op: op.to_string(),
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                }
            } else {
                ExprKind::Binary {
                    op: op.to_string(),
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                }
            };
            lhs = Expr {
                span: self.span_from(start),
                kind,
            };
        }
        Ok(lhs)
    }

    fn call_args(&mut self) -> PResult<(Vec<Expr>, Vec<String>)> {
        self.expect("(")?;
        let mut args = Vec::new();
        let mut names = Vec::new();
        if self.eat("{") {
            if !self.at("}") {
                loop {
                    names.push(self.ident()?.0);
                    self.expect(":")?;
                    args.push(self.expr()?);
                    if !self.eat(",") || self.at("}") {
                        break;
                    }
                }
            }
            self.expect("}")?;
            self.expect(")")?;
            return Ok((args, names));
        }
        if self.eat(")") {
            return Ok((args, names));
        }
        loop {
            args.push(self.expr()?);
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok((args, names));
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.start();
        let Some(tok) = self.tok(0).copied() else {
            return Err(self.error("expected expression"));
        };
        let text = tok.text(self.src);
        let kind = match tok.kind {
            TokenKind::Number => {
                self.pos += 1;
                let unit = if self.at_ident() && UNITS.contains(&self.text(0)) {
                    let u = self.text(0).to_string();
                    self.pos += 1;
                    Some(u)
                } else {
                    None
                };
                ExprKind::Number {
                    text: text.to_string(),
                    unit,
                }
            }
            TokenKind::Str | TokenKind::HexStr => {
                self.pos += 1;
                while matches!(self.kind(0), Some(TokenKind::Str | TokenKind::HexStr)) {
                    self.pos += 1;
                }
                ExprKind::Str(self.span_from(start).slice(self.src).to_string())
            }
            TokenKind::Ident if text == "true" || text == "false" => {
                self.pos += 1;
                ExprKind::Bool(text == "true")
            }
            TokenKind::Ident if !is_reserved_word(text) || text == "address" || text == "payable" => {
                self.pos += 1;
                if text == "address" && self.at("payable") {
                    self.pos += 1;
                }
                ExprKind::Ident(text.to_string())
            }
            TokenKind::Punct if text == "(" => {
                self.pos += 1;
                let mut items: Vec<Option<Expr>> = Vec::new();
                let mut commas = 0;
                loop {
                    if self.at(",") || self.at(")") {
                        items.push(None);
                    } else {
                        items.push(Some(self.expr()?));
                    }
                    if self.eat(",") {
                        commas += 1;
                        continue;
                    }
                    break;
                }
                self.expect(")")?;
                if commas == 0 {
                    match items.pop().flatten() {
                        Some(inner) => ExprKind::Paren(Box::new(inner)),
                        None => ExprKind::Tuple(Vec::new()),
                    }
                } else {
                    ExprKind::Tuple(items)
                }
            }
            TokenKind::Punct if text == "[" => {
                self.pos += 1;
                let mut items = Vec::new();
                if !self.at("]") {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect("]")?;
                ExprKind::Array(items)
            }
            _ => return Err(self.error("expected expression")),
        };
        Ok(Expr {
            span: self.span_from(start),
            kind,
        })
    }
}

const PREFIX_BP: u8 = 28;
const TERNARY_BP: u8 = 3;

fn infix_bp(op: &str) -> Option<(u8, u8)> {
    Some(match op {
        "**" => (26, 25),
        "*" | "/" | "%" => (22, 23),
        "+" | "-" => (20, 21),
        "<<" | ">>" | ">>>" => (18, 19),
        "&" => (16, 17),
        "^" => (14, 15),
        "|" => (12, 13),
        "<" | ">" | "<=" | ">=" => (10, 11),
        "==" | "!=" => (8, 9),
        "&&" => (6, 7),
        "||" => (4, 5),
        "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "|=" | "&=" | "^=" | "<<=" | ">>=" | ">>>=" => (2, 1),
        _ => return None,
    })
}

fn is_assignment(op: &str) -> bool {
    op.ends_with('=') && !matches!(op, "==" | "!=" | "<=" | ">=")
}

/// Words that never start an expression or name a variable.
fn is_reserved_word(word: &str) -> bool {
    matches!(
        word,
        "function"
            | "modifier"
            | "contract"
            | "interface"
            | "library"
            | "event"
            | "struct"
            | "enum"
            | "return"
            | "returns"
            | "if"
            | "else"
            | "for"
            | "while"
            | "do"
            | "break"
            | "continue"
            | "emit"
            | "throw"
            | "mapping"
            | "memory"
            | "storage"
            | "calldata"
            | "public"
            | "private"
            | "internal"
            | "external"
            | "pure"
            | "view"
            | "constant"
            | "immutable"
            | "indexed"
            | "anonymous"
            | "virtual"
            | "override"
            | "import"
            | "using"
            | "assembly"
            | "unchecked"
            | "try"
            | "catch"
            | "var"
            | "new"
            | "delete"
            | "is"
            | "constructor"
            | "address"
            | "payable"
    )
}
