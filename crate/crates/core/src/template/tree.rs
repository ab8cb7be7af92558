use serde::Serialize;

/// Which side of the leaf-removal rule a node falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Keywords, operators, clause markers, `*`, commas and parentheses.
    Structural,
    /// Table and column names, aliases, literals, type names, placeholders.
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeToken {
    pub text: String,
    pub category: Category,
    pub offset: usize,
}

impl TreeToken {
    /// Canonical spelling used in templates.
    pub fn canonical(&self) -> String {
        match self.text.as_str() {
            "!=" => "<>".to_string(),
            "==" => "=".to_string(),
            other => other.to_ascii_uppercase(),
        }
    }
}

/// Grammar construct of an interior node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "construct", content = "name")]
pub enum Construct {
    Statement,
    Query,
    With,
    Cte,
    /// One `SELECT ...` block of a compound query.
    Select,
    SelectItem,
    From,
    Join,
    Where,
    GroupBy,
    Having,
    OrderBy,
    OrderItem,
    Limit,
    Values,
    Insert,
    Update,
    Delete,
    Assignment,
    /// Parenthesized `SELECT` used as an expression or table source.
    Subquery,
    /// Parenthesized member of a compound query: `(SELECT ..) UNION (SELECT ..)`.
    ParenQuery,
    /// Function call; the name is stored uppercased.
    Function(String),
    Args,
    Window,
    Cast,
    Case,
    Expr,
    Paren,
    Interval,
    /// Schema object reference: `col`, `t.col`, `main.t`.
    ObjectRef,
    Alias,
    TypeName,
    Literal,
    /// Field selector of `EXTRACT(YEAR FROM ..)` or an interval unit.
    DatePart,
}

impl Construct {
    pub fn category(&self) -> Category {
        match self {
            Construct::ObjectRef
            | Construct::Alias
            | Construct::TypeName
            | Construct::Literal
            | Construct::DatePart => Category::Leaf,
            _ => Category::Structural,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Branch {
    pub construct: Construct,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Node {
    Token(TreeToken),
    Branch(Branch),
}

impl Node {
    pub fn category(&self) -> Category {
        match self {
            Node::Token(t) => t.category,
            Node::Branch(b) => b.construct.category(),
        }
    }

    pub fn as_branch(&self) -> Option<&Branch> {
        match self {
            Node::Branch(b) => Some(b),
            Node::Token(_) => None,
        }
    }

    pub fn as_token(&self) -> Option<&TreeToken> {
        match self {
            Node::Token(t) => Some(t),
            Node::Branch(_) => None,
        }
    }

    pub fn is_construct(&self, construct: &Construct) -> bool {
        self.as_branch().is_some_and(|b| &b.construct == construct)
    }

    /// Source-ordered tokens under this node.
    pub fn tokens(&self) -> Vec<&TreeToken> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens<'a>(&'a self, out: &mut Vec<&'a TreeToken>) {
        match self {
            Node::Token(t) => out.push(t),
            Node::Branch(b) => b.children.iter().for_each(|c| c.collect_tokens(out)),
        }
    }

    /// Pre-order traversal over every branch, this node included.
    pub fn branches(&self) -> Vec<&Branch> {
        let mut out = Vec::new();
        self.collect_branches(&mut out);
        out
    }

    fn collect_branches<'a>(&'a self, out: &mut Vec<&'a Branch>) {
        if let Node::Branch(b) = self {
            out.push(b);
            b.children.iter().for_each(|c| c.collect_branches(out));
        }
    }
}

impl Branch {
    pub fn child_branches(&self) -> impl Iterator<Item = &Branch> {
        self.children.iter().filter_map(Node::as_branch)
    }
}

/// Parse tree of one SQL statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntaxTree {
    pub root: Node,
}

impl SyntaxTree {
    pub fn tokens(&self) -> Vec<&TreeToken> {
        self.root.tokens()
    }

    /// All tokens joined by single spaces; equals the whitespace-normalized input.
    pub fn serialize(&self) -> String {
        self.tokens()
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Tokens whose effective category is structural. A token under a leaf
    /// construct is a leaf regardless of its own tag.
    pub fn structural_tokens(&self) -> Vec<&TreeToken> {
        let mut out = Vec::new();
        collect_structural(&self.root, &mut out);
        out
    }

    pub fn branches(&self) -> Vec<&Branch> {
        self.root.branches()
    }
}

fn collect_structural<'a>(node: &'a Node, out: &mut Vec<&'a TreeToken>) {
    match node {
        Node::Token(t) if t.category == Category::Structural => out.push(t),
        Node::Token(_) => {}
        Node::Branch(b) if b.construct.category() == Category::Leaf => {}
        Node::Branch(b) => b.children.iter().for_each(|c| collect_structural(c, out)),
    }
}
