//! Recursive-descent parser for the SQL subset found in text-to-SQL corpora
//! (SQLite-flavoured SELECT queries plus simple INSERT/UPDATE/DELETE).
//!
//! Every source token lands in the tree exactly once and in source order, so
//! the tree serializes back to the whitespace-normalized query.

use super::lexer::{tokenize, Token, TokenKind};
use super::tree::{Branch, Category, Construct, Node, SyntaxTree, TreeToken};
use super::ParseError;

type PResult<T> = Result<T, ParseError>;

const MAX_DEPTH: usize = 256;

/// Words that never act as an identifier or an implicit alias.
const RESERVED: &[&str] = &[
    "ALL",
    "AND",
    "AS",
    "ASC",
    "BETWEEN",
    "BY",
    "CASE",
    "CAST",
    "CROSS",
    "DELETE",
    "DESC",
    "DISTINCT",
    "ELSE",
    "END",
    "ESCAPE",
    "EXCEPT",
    "EXISTS",
    "FETCH",
    "FROM",
    "FULL",
    "GLOB",
    "GROUP",
    "HAVING",
    "ILIKE",
    "IN",
    "INNER",
    "INSERT",
    "INTERSECT",
    "INTO",
    "IS",
    "ISNULL",
    "JOIN",
    "LEFT",
    "LIKE",
    "LIMIT",
    "MATCH",
    "NATURAL",
    "NOT",
    "NOTNULL",
    "NULL",
    "OFFSET",
    "ON",
    "OR",
    "ORDER",
    "OUTER",
    "REGEXP",
    "RETURNING",
    "RIGHT",
    "SELECT",
    "SET",
    "THEN",
    "UNION",
    "UPDATE",
    "USING",
    "VALUES",
    "WHEN",
    "WHERE",
    "WINDOW",
    "WITH",
];

/// Reserved words that may still be called as functions, e.g. `LEFT(name, 3)`.
const RESERVED_FUNCTIONS: &[&str] = &["LEFT", "RIGHT"];

/// Niladic keywords kept as structure.
const NILADIC: &[&str] = &["CURRENT_DATE", "CURRENT_TIME", "CURRENT_TIMESTAMP"];

const TYPED_LITERAL_PREFIXES: &[&str] = &["DATE", "TIME", "TIMESTAMP", "DATETIME", "INTERVAL"];

const DATE_UNITS: &[&str] = &[
    "YEAR",
    "YEARS",
    "QUARTER",
    "QUARTERS",
    "MONTH",
    "MONTHS",
    "WEEK",
    "WEEKS",
    "DAY",
    "DAYS",
    "HOUR",
    "HOURS",
    "MINUTE",
    "MINUTES",
    "SECOND",
    "SECONDS",
    "MICROSECOND",
    "MILLISECOND",
    "EPOCH",
    "DOW",
    "DOY",
    "DAYOFWEEK",
    "DAYOFYEAR",
];

pub fn parse(sql: &str) -> PResult<SyntaxTree> {
    let tokens = tokenize(sql)?;
    if tokens.is_empty() {
        return Err(ParseError::new(0, "empty query"));
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        depth: 0,
        end: sql.len(),
    };
    let root = parser.statement()?;
    if let Some(tok) = parser.peek() {
        return Err(ParseError::new(
            tok.offset,
            format!("unexpected token '{}'", tok.text),
        ));
    }
    Ok(SyntaxTree { root })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    end: usize,
}

fn branch(construct: Construct, children: Vec<Node>) -> Node {
    Node::Branch(Branch {
        construct,
        children,
    })
}

fn is_reserved(tok: &Token) -> bool {
    tok.kind == TokenKind::Word && RESERVED.iter().any(|w| tok.text.eq_ignore_ascii_case(w))
}

fn upper(tok: &Token) -> String {
    tok.text.to_ascii_uppercase()
}

impl Parser {
    // ---- token cursor -------------------------------------------------

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n)
    }

    fn at_word(&self, word: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(word))
    }

    fn at_word_at(&self, n: usize, word: &str) -> bool {
        self.peek_at(n).is_some_and(|t| t.is_word(word))
    }

    fn at_any_word(&self, words: &[&str]) -> bool {
        words.iter().any(|w| self.at_word(w))
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn kind_at(&self, n: usize) -> Option<TokenKind> {
        self.peek_at(n).map(|t| t.kind)
    }

    fn at_op(&self, op: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(op))
    }

    fn at_query_start(&self, n: usize) -> bool {
        ["SELECT", "WITH", "VALUES"]
            .iter()
            .any(|w| self.at_word_at(n, w))
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let offset = self.peek().map_or(self.end, |t| t.offset);
        Err(ParseError::new(offset, msg))
    }

    fn found(&self) -> String {
        self.peek()
            .map_or_else(|| "end of input".to_string(), |t| format!("'{}'", t.text))
    }

    fn bump(&mut self, category: Category) -> Node {
        let tok = &self.tokens[self.pos];
        self.pos += 1;
        Node::Token(TreeToken {
            text: tok.text.clone(),
            category,
            offset: tok.offset,
        })
    }

    fn structural(&mut self) -> Node {
        self.bump(Category::Structural)
    }

    fn leaf(&mut self) -> Node {
        self.bump(Category::Leaf)
    }

    fn keyword(&mut self, word: &str) -> PResult<Node> {
        if self.at_word(word) {
            Ok(self.structural())
        } else {
            self.error(format!("expected {word}, found {}", self.found()))
        }
    }

    fn opt_keyword(&mut self, word: &str, out: &mut Vec<Node>) -> bool {
        if self.at_word(word) {
            out.push(self.structural());
            true
        } else {
            false
        }
    }

    fn punct(&mut self, kind: TokenKind, what: &str) -> PResult<Node> {
        if self.at_kind(kind) {
            Ok(self.structural())
        } else {
            self.error(format!("expected {what}, found {}", self.found()))
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.error("query nesting is too deep");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // ---- statements ---------------------------------------------------

    fn statement(&mut self) -> PResult<Node> {
        let node = if self.at_query_start(0) || self.at_kind(TokenKind::LParen) {
            self.query()?
        } else if self.at_word("INSERT") || self.at_word("REPLACE") {
            self.insert()?
        } else if self.at_word("UPDATE") {
            self.update()?
        } else if self.at_word("DELETE") {
            self.delete()?
        } else {
            return self.error(format!(
                "unsupported statement starting with {}",
                self.found()
            ));
        };
        Ok(branch(Construct::Statement, vec![node]))
    }

    fn insert(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural()];
        if self.at_word("OR") {
            c.push(self.structural());
            if !self.at_kind(TokenKind::Word) {
                return self.error("expected conflict resolution after INSERT OR");
            }
            c.push(self.structural());
        }
        c.push(self.keyword("INTO")?);
        c.push(self.object_ref()?);
        if let Some(alias) = self.opt_alias(true)? {
            c.push(alias);
        }
        if self.at_kind(TokenKind::LParen) && !self.at_query_start(1) {
            c.push(self.column_list()?);
        }
        if self.at_word("DEFAULT") {
            c.push(self.structural());
            c.push(self.keyword("VALUES")?);
        } else if self.at_query_start(0) || self.at_kind(TokenKind::LParen) {
            c.push(self.query()?);
        } else {
            return self.error(format!("expected VALUES or SELECT, found {}", self.found()));
        }
        self.opt_returning(&mut c)?;
        Ok(branch(Construct::Insert, c))
    }

    fn update(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural()];
        if self.at_word("OR") {
            c.push(self.structural());
            c.push(self.structural());
        }
        c.push(self.object_ref()?);
        if let Some(alias) = self.opt_alias(false)? {
            c.push(alias);
        }
        c.push(self.keyword("SET")?);
        loop {
            let target = if self.at_kind(TokenKind::LParen) {
                self.column_list()?
            } else {
                self.object_ref()?
            };
            if !self.at_op("=") {
                return self.error(format!("expected '=', found {}", self.found()));
            }
            let eq = self.structural();
            let value = self.expr()?;
            c.push(branch(Construct::Assignment, vec![target, eq, value]));
            if !self.at_kind(TokenKind::Comma) {
                break;
            }
            c.push(self.structural());
        }
        if self.at_word("FROM") {
            c.push(self.parse_from()?);
        }
        if self.at_word("WHERE") {
            c.push(self.where_clause()?);
        }
        self.opt_returning(&mut c)?;
        Ok(branch(Construct::Update, c))
    }

    fn delete(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural()];
        c.push(self.keyword("FROM")?);
        c.push(self.object_ref()?);
        if let Some(alias) = self.opt_alias(false)? {
            c.push(alias);
        }
        if self.at_word("WHERE") {
            c.push(self.where_clause()?);
        }
        self.opt_returning(&mut c)?;
        Ok(branch(Construct::Delete, c))
    }

    fn opt_returning(&mut self, c: &mut Vec<Node>) -> PResult<()> {
        if self.at_word("RETURNING") {
            c.push(self.structural());
            self.select_items(c)?;
        }
        Ok(())
    }

    /// `(a, b, c)` of INSERT or a CTE header.
    fn column_list(&mut self) -> PResult<Node> {
        let mut c = vec![self.punct(TokenKind::LParen, "'('")?];
        loop {
            c.push(self.object_ref()?);
            if self.at_kind(TokenKind::Comma) {
                c.push(self.structural());
            } else {
                break;
            }
        }
        c.push(self.punct(TokenKind::RParen, "')'")?);
        Ok(branch(Construct::Paren, c))
    }

    // ---- queries ------------------------------------------------------

    fn query(&mut self) -> PResult<Node> {
        self.enter()?;
        let mut c = Vec::new();
        if self.at_word("WITH") {
            c.push(self.with_clause()?);
        }
        c.push(self.query_term()?);
        loop {
            if self.at_word("UNION") {
                c.push(self.structural());
                self.opt_keyword("ALL", &mut c);
            } else if self.at_word("INTERSECT") || self.at_word("EXCEPT") {
                c.push(self.structural());
            } else {
                break;
            }
            c.push(self.query_term()?);
        }
        if self.at_word("ORDER") {
            c.push(self.order_by()?);
        }
        if self.at_word("LIMIT") || self.at_word("OFFSET") || self.at_word("FETCH") {
            c.push(self.limit()?);
        }
        self.leave();
        Ok(branch(Construct::Query, c))
    }

    fn query_term(&mut self) -> PResult<Node> {
        if self.at_word("SELECT") {
            self.select_core()
        } else if self.at_word("VALUES") {
            self.values()
        } else if self.at_kind(TokenKind::LParen) {
            let open = self.structural();
            let inner = self.query()?;
            let close = self.punct(TokenKind::RParen, "')'")?;
            Ok(branch(Construct::ParenQuery, vec![open, inner, close]))
        } else {
            self.error(format!("expected SELECT, found {}", self.found()))
        }
    }

    fn with_clause(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural()];
        self.opt_keyword("RECURSIVE", &mut c);
        loop {
            let mut cte = vec![self.name(Construct::Alias)?];
            if self.at_kind(TokenKind::LParen) {
                cte.push(self.column_list()?);
            }
            cte.push(self.keyword("AS")?);
            if self.at_word("NOT") && self.at_word_at(1, "MATERIALIZED") {
                cte.push(self.structural());
            }
            self.opt_keyword("MATERIALIZED", &mut cte);
            cte.push(self.subquery()?);
            c.push(branch(Construct::Cte, cte));
            if !self.at_kind(TokenKind::Comma) {
                break;
            }
            c.push(self.structural());
        }
        Ok(branch(Construct::With, c))
    }

    fn values(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural()];
        loop {
            if !self.at_kind(TokenKind::LParen) {
                return self.error(format!("expected '(', found {}", self.found()));
            }
            c.push(self.paren_expr_list()?);
            if !self.at_kind(TokenKind::Comma) {
                break;
            }
            c.push(self.structural());
        }
        Ok(branch(Construct::Values, c))
    }

    fn select_core(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural()];
        if !self.opt_keyword("DISTINCT", &mut c) {
            self.opt_keyword("ALL", &mut c);
        }
        if self.at_word("TOP") {
            c.push(self.structural());
            let count = self.primary()?;
            c.push(count);
            self.opt_keyword("PERCENT", &mut c);
        }
        self.select_items(&mut c)?;
        if self.at_word("FROM") {
            c.push(self.parse_from()?);
        }
        if self.at_word("WHERE") {
            c.push(self.where_clause()?);
        }
        if self.at_word("GROUP") {
            let mut g = vec![self.structural(), self.keyword("BY")?];
            self.expr_list(&mut g)?;
            c.push(branch(Construct::GroupBy, g));
        }
        if self.at_word("HAVING") {
            let h = vec![self.structural(), self.expr()?];
            c.push(branch(Construct::Having, h));
        }
        if self.at_word("WINDOW") {
            c.push(self.structural());
            loop {
                c.push(self.name(Construct::Alias)?);
                c.push(self.keyword("AS")?);
                c.push(self.window_spec()?);
                if !self.at_kind(TokenKind::Comma) {
                    break;
                }
                c.push(self.structural());
            }
        }
        Ok(branch(Construct::Select, c))
    }

    fn select_items(&mut self, c: &mut Vec<Node>) -> PResult<()> {
        loop {
            c.push(self.select_item()?);
            if !self.at_kind(TokenKind::Comma) {
                return Ok(());
            }
            c.push(self.structural());
        }
    }

    fn select_item(&mut self) -> PResult<Node> {
        if self.at_op("*") {
            return Ok(branch(Construct::SelectItem, vec![self.structural()]));
        }
        if self.qualified_star_ahead() {
            let mut qualifier = Vec::new();
            while !self.at_op("*") {
                qualifier.push(self.leaf());
            }
            let star = self.structural();
            return Ok(branch(
                Construct::SelectItem,
                vec![branch(Construct::ObjectRef, qualifier), star],
            ));
        }
        let mut c = vec![self.expr()?];
        if let Some(alias) = self.opt_alias(false)? {
            c.push(alias);
        }
        Ok(branch(Construct::SelectItem, c))
    }

    /// `t.*` or `main.t.*`
    fn qualified_star_ahead(&self) -> bool {
        let mut n = 0;
        loop {
            match self.kind_at(n) {
                Some(TokenKind::Word | TokenKind::QuotedIdent) => {}
                _ => return false,
            }
            if self.kind_at(n + 1) != Some(TokenKind::Dot) {
                return false;
            }
            if self.peek_at(n + 2).is_some_and(|t| t.is_op("*")) {
                return true;
            }
            n += 2;
        }
    }

    fn parse_from(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural()];
        loop {
            self.table_expr(&mut c)?;
            if !self.at_kind(TokenKind::Comma) {
                break;
            }
            c.push(self.structural());
        }
        Ok(branch(Construct::From, c))
    }

    fn where_clause(&mut self) -> PResult<Node> {
        let c = vec![self.structural(), self.expr()?];
        Ok(branch(Construct::Where, c))
    }

    fn table_expr(&mut self, out: &mut Vec<Node>) -> PResult<()> {
        self.table_primary(out)?;
        while self.join_ahead() {
            let mut j = Vec::new();
            while !self.at_word("JOIN") {
                j.push(self.structural());
            }
            j.push(self.structural());
            self.table_primary(&mut j)?;
            if self.at_word("ON") {
                j.push(self.structural());
                j.push(self.expr()?);
            } else if self.at_word("USING") {
                j.push(self.structural());
                j.push(self.column_list()?);
            }
            out.push(branch(Construct::Join, j));
        }
        Ok(())
    }

    fn join_ahead(&self) -> bool {
        let mut n = 0;
        if self.at_word_at(n, "NATURAL") {
            n += 1;
        }
        if ["LEFT", "RIGHT", "FULL"]
            .iter()
            .any(|w| self.at_word_at(n, w))
        {
            n += 1;
            if self.at_word_at(n, "OUTER") {
                n += 1;
            }
        } else if self.at_word_at(n, "INNER") || self.at_word_at(n, "CROSS") {
            n += 1;
        }
        self.at_word_at(n, "JOIN")
    }

    fn table_primary(&mut self, out: &mut Vec<Node>) -> PResult<()> {
        if self.at_kind(TokenKind::LParen) {
            let mut n = 0;
            while self.kind_at(n) == Some(TokenKind::LParen) {
                n += 1;
            }
            if self.at_query_start(n) {
                out.push(self.subquery()?);
            } else {
                self.enter()?;
                let mut c = vec![self.structural()];
                self.table_expr(&mut c)?;
                c.push(self.punct(TokenKind::RParen, "')'")?);
                self.leave();
                out.push(branch(Construct::Paren, c));
            }
        } else if self.at_identifier() {
            if self.kind_at(1) == Some(TokenKind::LParen) {
                out.push(self.function_call()?);
            } else {
                out.push(self.object_ref()?);
            }
        } else {
            return self.error(format!("expected table, found {}", self.found()));
        }
        if let Some(alias) = self.opt_alias(false)? {
            out.push(alias);
        }
        Ok(())
    }

    fn subquery(&mut self) -> PResult<Node> {
        let open = self.punct(TokenKind::LParen, "'('")?;
        let inner = self.query()?;
        let close = self.punct(TokenKind::RParen, "')'")?;
        Ok(branch(Construct::Subquery, vec![open, inner, close]))
    }

    fn order_by(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural(), self.keyword("BY")?];
        loop {
            let mut item = vec![self.expr()?];
            if self.at_word("ASC") || self.at_word("DESC") {
                item.push(self.structural());
            }
            if self.at_word("NULLS") && (self.at_word_at(1, "FIRST") || self.at_word_at(1, "LAST"))
            {
                item.push(self.structural());
                item.push(self.structural());
            }
            c.push(branch(Construct::OrderItem, item));
            if !self.at_kind(TokenKind::Comma) {
                break;
            }
            c.push(self.structural());
        }
        Ok(branch(Construct::OrderBy, c))
    }

    fn limit(&mut self) -> PResult<Node> {
        let mut c = Vec::new();
        if self.at_word("LIMIT") {
            c.push(self.structural());
            c.push(self.expr()?);
            if self.at_kind(TokenKind::Comma) {
                c.push(self.structural());
                c.push(self.expr()?);
            }
        }
        if self.at_word("OFFSET") {
            c.push(self.structural());
            c.push(self.expr()?);
            if self.at_word("ROW") || self.at_word("ROWS") {
                c.push(self.structural());
            }
        }
        if self.at_word("FETCH") {
            c.push(self.structural());
            if !(self.at_word("FIRST") || self.at_word("NEXT")) {
                return self.error(format!("expected FIRST or NEXT, found {}", self.found()));
            }
            c.push(self.structural());
            if !(self.at_word("ROW") || self.at_word("ROWS")) {
                c.push(self.expr()?);
            }
            if !(self.at_word("ROW") || self.at_word("ROWS")) {
                return self.error(format!("expected ROWS, found {}", self.found()));
            }
            c.push(self.structural());
            c.push(self.keyword("ONLY")?);
        }
        Ok(branch(Construct::Limit, c))
    }

    // ---- names --------------------------------------------------------

    fn at_identifier(&self) -> bool {
        self.peek().is_some_and(|t| match t.kind {
            TokenKind::QuotedIdent => true,
            TokenKind::Word => !is_reserved(t),
            _ => false,
        })
    }

    fn name(&mut self, construct: Construct) -> PResult<Node> {
        if !self.at_identifier() {
            return self.error(format!("expected name, found {}", self.found()));
        }
        Ok(branch(construct, vec![self.leaf()]))
    }

    /// `col`, `t.col`, `schema.t.col`; every part is a leaf.
    fn object_ref(&mut self) -> PResult<Node> {
        if !self.at_identifier() {
            return self.error(format!("expected identifier, found {}", self.found()));
        }
        let mut c = vec![self.leaf()];
        while self.at_kind(TokenKind::Dot)
            && matches!(
                self.kind_at(1),
                Some(TokenKind::Word | TokenKind::QuotedIdent)
            )
        {
            c.push(self.leaf());
            c.push(self.leaf());
        }
        Ok(branch(Construct::ObjectRef, c))
    }

    /// `AS x`, `AS "x"`, `AS 'x'`, or a bare non-reserved word. The `AS`
    /// belongs to the alias and is removed with it.
    fn opt_alias(&mut self, explicit_only: bool) -> PResult<Option<Node>> {
        if self.at_word("AS") {
            let as_kw = self.leaf();
            let ok = self.peek().is_some_and(|t| {
                matches!(
                    t.kind,
                    TokenKind::Word | TokenKind::QuotedIdent | TokenKind::String
                )
            });
            if !ok {
                return self.error(format!("expected alias after AS, found {}", self.found()));
            }
            let name = self.leaf();
            return Ok(Some(branch(Construct::Alias, vec![as_kw, name])));
        }
        if !explicit_only && self.at_identifier() {
            // a bare word directly followed by '(' is not an alias
            if self.kind_at(1) == Some(TokenKind::LParen) {
                return Ok(None);
            }
            return Ok(Some(branch(Construct::Alias, vec![self.leaf()])));
        }
        Ok(None)
    }

    // ---- expressions --------------------------------------------------

    fn expr_list(&mut self, c: &mut Vec<Node>) -> PResult<()> {
        loop {
            c.push(self.expr()?);
            if !self.at_kind(TokenKind::Comma) {
                return Ok(());
            }
            c.push(self.structural());
        }
    }

    fn expr(&mut self) -> PResult<Node> {
        self.enter()?;
        let e = self.or_expr();
        self.leave();
        e
    }

    fn binary(
        &mut self,
        next: fn(&mut Self) -> PResult<Node>,
        is_op: fn(&Self) -> bool,
    ) -> PResult<Node> {
        let mut lhs = next(self)?;
        while is_op(self) {
            let op = self.structural();
            let rhs = next(self)?;
            lhs = branch(Construct::Expr, vec![lhs, op, rhs]);
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> PResult<Node> {
        self.binary(Self::and_expr, |p| p.at_word("OR"))
    }

    fn and_expr(&mut self) -> PResult<Node> {
        self.binary(Self::not_expr, |p| p.at_word("AND"))
    }

    fn not_expr(&mut self) -> PResult<Node> {
        if self.at_word("NOT") {
            self.enter()?;
            let not = self.structural();
            let operand = self.not_expr()?;
            self.leave();
            return Ok(branch(Construct::Expr, vec![not, operand]));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Node> {
        const CMP: &[&str] = &["=", "==", "!=", "<>", "<", "<=", ">", ">="];
        const LIKE: &[&str] = &["LIKE", "ILIKE", "GLOB", "REGEXP", "MATCH"];
        let mut lhs = self.bitwise()?;
        loop {
            let mut c = vec![lhs];
            let mut closed = false;
            let negated = self.at_word("NOT")
                && [
                    "IN", "LIKE", "ILIKE", "GLOB", "REGEXP", "MATCH", "BETWEEN", "NULL",
                ]
                .iter()
                .any(|w| self.at_word_at(1, w));
            if negated {
                c.push(self.structural());
            }
            if !negated
                && self
                    .peek()
                    .is_some_and(|t| CMP.iter().any(|op| t.is_op(op)))
            {
                c.push(self.structural());
                c.push(self.bitwise()?);
            } else if !negated && self.at_word("IS") {
                c.push(self.structural());
                self.opt_keyword("NOT", &mut c);
                if self.at_word("DISTINCT") {
                    c.push(self.structural());
                    c.push(self.keyword("FROM")?);
                }
                c.push(self.bitwise()?);
            } else if self.at_word("IN") {
                c.push(self.structural());
                c.push(self.in_rhs()?);
                closed = true;
            } else if self.at_any_word(LIKE) {
                c.push(self.structural());
                c.push(self.bitwise()?);
                if self.at_word("ESCAPE") {
                    c.push(self.structural());
                    c.push(self.bitwise()?);
                }
            } else if self.at_word("BETWEEN") {
                c.push(self.structural());
                c.push(self.bitwise()?);
                c.push(self.keyword("AND")?);
                c.push(self.bitwise()?);
            } else if (negated && self.at_word("NULL"))
                || (!negated && (self.at_word("ISNULL") || self.at_word("NOTNULL")))
            {
                c.push(self.structural());
                closed = true;
            } else {
                lhs = c.pop().expect("lhs present");
                return Ok(lhs);
            }
            lhs = branch(Construct::Expr, c);
            // SQLite accepts `x IN (..) + 1` and `x ISNULL * 2` as arithmetic
            // on the predicate's value
            while closed && self.at_arith_op() {
                let op = self.structural();
                let rhs = self.bitwise()?;
                lhs = branch(Construct::Expr, vec![lhs, op, rhs]);
            }
        }
    }

    fn at_arith_op(&self) -> bool {
        ["+", "-", "*", "/", "%", "||", "&", "|", "<<", ">>"]
            .iter()
            .any(|op| self.at_op(op))
    }

    fn in_rhs(&mut self) -> PResult<Node> {
        if self.at_kind(TokenKind::LParen) {
            if self.at_query_start(1) {
                return self.subquery();
            }
            if self.kind_at(1) == Some(TokenKind::RParen) {
                let open = self.structural();
                let close = self.structural();
                return Ok(branch(Construct::Paren, vec![open, close]));
            }
            return self.paren_expr_list();
        }
        self.object_ref()
    }

    fn paren_expr_list(&mut self) -> PResult<Node> {
        let mut c = vec![self.punct(TokenKind::LParen, "'('")?];
        self.expr_list(&mut c)?;
        c.push(self.punct(TokenKind::RParen, "')'")?);
        Ok(branch(Construct::Paren, c))
    }

    fn bitwise(&mut self) -> PResult<Node> {
        self.binary(Self::additive, |p| {
            ["&", "|", "<<", ">>"].iter().any(|op| p.at_op(op))
        })
    }

    fn additive(&mut self) -> PResult<Node> {
        self.binary(Self::multiplicative, |p| p.at_op("+") || p.at_op("-"))
    }

    fn multiplicative(&mut self) -> PResult<Node> {
        self.binary(Self::concat, |p| {
            p.at_op("*") || p.at_op("/") || p.at_op("%")
        })
    }

    fn concat(&mut self) -> PResult<Node> {
        self.binary(Self::unary, |p| {
            p.at_op("||") || p.at_op("->") || p.at_op("->>")
        })
    }

    fn unary(&mut self) -> PResult<Node> {
        if self.at_op("-") || self.at_op("+") || self.at_op("~") {
            self.enter()?;
            let op = self.structural();
            let operand = self.unary()?;
            self.leave();
            return Ok(branch(Construct::Expr, vec![op, operand]));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Node> {
        let mut e = self.primary()?;
        loop {
            if self.at_word("COLLATE") {
                let collate = self.leaf();
                if !self
                    .peek()
                    .is_some_and(|t| matches!(t.kind, TokenKind::Word | TokenKind::QuotedIdent))
                {
                    return self.error("expected collation name");
                }
                let name = self.leaf();
                e = branch(
                    Construct::Expr,
                    vec![e, branch(Construct::TypeName, vec![collate, name])],
                );
            } else if self.at_op("::") {
                let mut t = vec![self.leaf()];
                self.type_name(&mut t)?;
                e = branch(Construct::Expr, vec![e, branch(Construct::TypeName, t)]);
            } else {
                return Ok(e);
            }
        }
    }

    /// Type name words plus an optional `(p, s)`; all leaves.
    fn type_name(&mut self, out: &mut Vec<Node>) -> PResult<()> {
        if !self.at_kind(TokenKind::Word) && !self.at_kind(TokenKind::QuotedIdent) {
            return self.error(format!("expected type name, found {}", self.found()));
        }
        out.push(self.leaf());
        while self.at_kind(TokenKind::Word) && !is_reserved(self.peek().expect("word")) {
            out.push(self.leaf());
        }
        if self.at_kind(TokenKind::LParen) {
            out.push(self.leaf());
            while !self.at_kind(TokenKind::RParen) {
                if self.peek().is_none() {
                    return self.error("unterminated type arguments");
                }
                out.push(self.leaf());
            }
            out.push(self.leaf());
        }
        Ok(())
    }

    fn primary(&mut self) -> PResult<Node> {
        let Some(tok) = self.peek() else {
            return self.error("expected expression, found end of input");
        };
        match tok.kind {
            TokenKind::Number | TokenKind::String | TokenKind::Parameter => Ok(self.leaf()),
            TokenKind::LParen => {
                if self.at_query_start(1) {
                    return self.subquery();
                }
                self.enter()?;
                let mut c = vec![self.structural()];
                self.expr_list(&mut c)?;
                c.push(self.punct(TokenKind::RParen, "')'")?);
                self.leave();
                Ok(branch(Construct::Paren, c))
            }
            TokenKind::QuotedIdent => self.object_ref(),
            TokenKind::Word => self.word_primary(),
            _ => self.error(format!("expected expression, found {}", self.found())),
        }
    }

    fn word_primary(&mut self) -> PResult<Node> {
        let tok = self.peek().expect("word");
        let word = upper(tok);
        let next_kind = self.kind_at(1);
        match word.as_str() {
            "CASE" => return self.case_expr(),
            "CAST" | "TRY_CAST" if next_kind == Some(TokenKind::LParen) => return self.cast_expr(),
            "EXISTS" => {
                let kw = self.structural();
                let sub = self.subquery()?;
                return Ok(branch(Construct::Expr, vec![kw, sub]));
            }
            "NULL" => return Ok(self.structural()),
            "TRUE" | "FALSE" => return Ok(branch(Construct::Literal, vec![self.leaf()])),
            "ALL" | "ANY" | "SOME"
                if next_kind == Some(TokenKind::LParen) && self.at_query_start(2) =>
            {
                let kw = self.structural();
                let sub = self.subquery()?;
                return Ok(branch(Construct::Expr, vec![kw, sub]));
            }
            "INTERVAL" if next_kind != Some(TokenKind::LParen) => return self.interval(),
            "EXTRACT" if next_kind == Some(TokenKind::LParen) => return self.extract(),
            w if NILADIC.contains(&w) && next_kind != Some(TokenKind::LParen) => {
                return Ok(self.structural())
            }
            w if TYPED_LITERAL_PREFIXES.contains(&w) && next_kind == Some(TokenKind::String) => {
                let c = vec![self.leaf(), self.leaf()];
                return Ok(branch(Construct::Literal, c));
            }
            _ => {}
        }
        if next_kind == Some(TokenKind::LParen)
            && (!is_reserved(tok) || RESERVED_FUNCTIONS.contains(&word.as_str()))
        {
            return self.function_call();
        }
        if is_reserved(tok) {
            return self.error(format!("expected expression, found {}", self.found()));
        }
        self.object_ref()
    }

    fn case_expr(&mut self) -> PResult<Node> {
        self.enter()?;
        let mut c = vec![self.structural()];
        if !self.at_word("WHEN") {
            c.push(self.expr()?);
        }
        if !self.at_word("WHEN") {
            return self.error(format!("expected WHEN, found {}", self.found()));
        }
        while self.at_word("WHEN") {
            c.push(self.structural());
            c.push(self.expr()?);
            c.push(self.keyword("THEN")?);
            c.push(self.expr()?);
        }
        if self.at_word("ELSE") {
            c.push(self.structural());
            c.push(self.expr()?);
        }
        c.push(self.keyword("END")?);
        self.leave();
        Ok(branch(Construct::Case, c))
    }

    fn cast_expr(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural(), self.structural()];
        c.push(self.expr()?);
        if !self.at_word("AS") {
            return self.error(format!("expected AS in CAST, found {}", self.found()));
        }
        let mut ty = vec![self.leaf()];
        self.type_name(&mut ty)?;
        c.push(branch(Construct::TypeName, ty));
        c.push(self.punct(TokenKind::RParen, "')'")?);
        Ok(branch(Construct::Cast, c))
    }

    fn interval(&mut self) -> PResult<Node> {
        let mut c = vec![self.structural()];
        c.push(self.unary()?);
        if self.peek().is_some_and(|t| {
            t.kind == TokenKind::Word && DATE_UNITS.iter().any(|u| t.text.eq_ignore_ascii_case(u))
        }) {
            c.push(branch(Construct::DatePart, vec![self.leaf()]));
        }
        Ok(branch(Construct::Interval, c))
    }

    fn extract(&mut self) -> PResult<Node> {
        let name = self.structural();
        let open = self.structural();
        if !self.at_kind(TokenKind::Word) && !self.at_kind(TokenKind::String) {
            return self.error(format!("expected date part, found {}", self.found()));
        }
        let part = branch(Construct::DatePart, vec![self.leaf()]);
        let from = self.keyword("FROM")?;
        let value = self.expr()?;
        let close = self.punct(TokenKind::RParen, "')'")?;
        Ok(branch(
            Construct::Function("EXTRACT".to_string()),
            vec![
                name,
                open,
                branch(Construct::Args, vec![part, from, value]),
                close,
            ],
        ))
    }

    fn function_call(&mut self) -> PResult<Node> {
        self.enter()?;
        let name_upper = upper(self.peek().expect("function name"));
        let mut c = vec![self.structural(), self.structural()];
        let mut args = Vec::new();
        if !self.opt_keyword("DISTINCT", &mut args) {
            self.opt_keyword("ALL", &mut args);
        }
        if self.at_op("*") && self.kind_at(1) == Some(TokenKind::RParen) {
            args.push(self.structural());
        } else if !self.at_kind(TokenKind::RParen) {
            self.expr_list(&mut args)?;
            if self.at_word("ORDER") {
                args.push(self.order_by()?);
            }
            if self.at_word("SEPARATOR") {
                args.push(self.structural());
                args.push(self.primary()?);
            }
        }
        c.push(branch(Construct::Args, args));
        c.push(self.punct(TokenKind::RParen, "')'")?);
        if self.at_word("FILTER")
            && self.kind_at(1) == Some(TokenKind::LParen)
            && self.at_word_at(2, "WHERE")
        {
            c.push(self.structural());
            c.push(self.structural());
            c.push(self.where_clause()?);
            c.push(self.punct(TokenKind::RParen, "')'")?);
        }
        if self.at_word("OVER") {
            let over = self.structural();
            let w = if self.at_kind(TokenKind::LParen) {
                self.window_spec()?
            } else {
                self.name(Construct::Alias)?
            };
            c.push(branch(Construct::Window, vec![over, w]));
        }
        self.leave();
        Ok(branch(Construct::Function(name_upper), c))
    }

    fn window_spec(&mut self) -> PResult<Node> {
        let mut c = vec![self.punct(TokenKind::LParen, "'('")?];
        if self.at_identifier() && !self.at_any_word(&["PARTITION", "ROWS", "RANGE", "GROUPS"]) {
            c.push(self.name(Construct::Alias)?);
        }
        if self.at_word("PARTITION") {
            c.push(self.structural());
            c.push(self.keyword("BY")?);
            self.expr_list(&mut c)?;
        }
        if self.at_word("ORDER") {
            c.push(self.order_by()?);
        }
        if self.at_any_word(&["ROWS", "RANGE", "GROUPS"]) {
            c.push(self.structural());
            if self.at_word("BETWEEN") {
                c.push(self.structural());
                self.frame_bound(&mut c)?;
                c.push(self.keyword("AND")?);
            }
            self.frame_bound(&mut c)?;
            if self.at_word("EXCLUDE") {
                c.push(self.structural());
                if self.at_word("NO") || self.at_word("CURRENT") {
                    c.push(self.structural());
                }
                if !self.at_kind(TokenKind::Word) {
                    return self.error("expected frame exclusion");
                }
                c.push(self.structural());
            }
        }
        c.push(self.punct(TokenKind::RParen, "')'")?);
        Ok(branch(Construct::Window, c))
    }

    fn frame_bound(&mut self, c: &mut Vec<Node>) -> PResult<()> {
        if self.at_word("UNBOUNDED") {
            c.push(self.structural());
        } else if self.at_word("CURRENT") {
            c.push(self.structural());
            c.push(self.keyword("ROW")?);
            return Ok(());
        } else {
            c.push(self.additive()?);
        }
        if self.at_word("PRECEDING") || self.at_word("FOLLOWING") {
            c.push(self.structural());
            Ok(())
        } else {
            self.error(format!(
                "expected PRECEDING or FOLLOWING, found {}",
                self.found()
            ))
        }
    }
}
