use std::collections::BTreeSet;

use tree_sitter::{Node, Parser};

use super::literal::{decode_string, parse_float, parse_int, Literal};
use super::resolve::resolve_path;
use super::{
    top_level_module, Diagnostic, Fact, FactKind, FactSet, FactsError, ImportBinding, Location,
    ENV_PREFIX,
};

/// Builtins and library entry points whose effect depends on runtime values.
const OPAQUE_CALLS: &[&str] = &[
    "getattr",
    "setattr",
    "exec",
    "eval",
    "compile",
    "__import__",
    "importlib.import_module",
];

/// Parse Python source into raw (not yet alias-resolved) facts.
///
/// Syntax errors never abort: erroneous regions become diagnostics and the
/// remaining statements are still analysed. The only hard error is input
/// that is not UTF-8.
pub fn parse_source(text: &[u8], file: &str) -> Result<FactSet, FactsError> {
    let source = std::str::from_utf8(text).map_err(|source| FactsError::InvalidUtf8 {
        file: file.to_string(),
        source,
    })?;

    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
        .expect("bundled grammar matches the tree-sitter runtime");
    let mut out = FactSet::empty(file);
    let Some(tree) = parser.parse(source, None) else {
        out.parse_diagnostics.push(Diagnostic {
            message: "parser gave up on this file".into(),
            location: Location { file: file.into(), line: 1, column: 1 },
        });
        return Ok(out);
    };

    let mut walker = Walker {
        src: source,
        file,
        facts: Vec::new(),
        bindings: Vec::new(),
        env_candidates: Vec::new(),
        diagnostics: Vec::new(),
    };
    walker.walk(tree.root_node());
    walker.finish(out)
}

struct EnvCandidate {
    base: String,
    key: Option<String>,
    value: Literal,
    location: Location,
}

struct Walker<'a> {
    src: &'a str,
    file: &'a str,
    facts: Vec<Fact>,
    bindings: Vec<ImportBinding>,
    env_candidates: Vec<EnvCandidate>,
    diagnostics: Vec<Diagnostic>,
}

impl<'a> Walker<'a> {
    fn text(&self, node: Node<'_>) -> &'a str {
        &self.src[node.byte_range()]
    }

    fn location(&self, node: Node<'_>) -> Location {
        let start = node.start_byte();
        let line_start = start - node.start_position().column;
        let column = self.src[line_start..start].chars().count() as u32 + 1;
        Location {
            file: self.file.to_string(),
            line: node.start_position().row as u32 + 1,
            column,
        }
    }

    fn push(&mut self, kind: FactKind, path: String, value: Option<Literal>, at: Node<'_>) {
        let location = self.location(at);
        self.facts.push(Fact { kind, canonical_path: path, value, location, resolved: true });
    }

    fn diagnose(&mut self, message: String, at: Node<'_>) {
        let location = self.location(at);
        self.diagnostics.push(Diagnostic { message, location });
    }

    /// Explicit-stack preorder traversal; deeply nested expressions must not
    /// exhaust the native stack.
    fn walk(&mut self, root: Node<'_>) {
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            let mut next = Vec::new();
            self.visit(node, &mut next);
            stack.extend(next.into_iter().rev());
        }
    }

    fn visit<'t>(&mut self, node: Node<'t>, next: &mut Vec<Node<'t>>) {
        if node.is_error() {
            let snippet: String = self.text(node).chars().take(40).collect();
            let snippet = snippet.split('\n').next().unwrap_or_default().trim().to_string();
            self.diagnose(format!("syntax error near `{snippet}`; region skipped"), node);
            return;
        }
        if node.is_missing() {
            self.diagnose(format!("syntax error: missing `{}`", node.kind()), node);
            return;
        }
        match node.kind() {
            "import_statement" => self.import_statement(node),
            "import_from_statement" | "future_import_statement" => self.import_from(node),
            "assignment" => {
                self.assignment(node, next);
                return;
            }
            "call" => self.call(node),
            "dictionary" => self.dictionary(node),
            _ => {}
        }
        let mut cursor = node.walk();
        next.extend(node.named_children(&mut cursor));
    }

    fn import_statement(&mut self, node: Node<'_>) {
        let mut cursor = node.walk();
        for name in node.children_by_field_name("name", &mut cursor) {
            match name.kind() {
                "dotted_name" => {
                    let path = self.text(name).to_string();
                    let top = top_level_module(&path).to_string();
                    self.bind(top.clone(), top, name);
                    self.push(FactKind::Import, path, None, name);
                }
                "aliased_import" => {
                    let (Some(target), Some(alias)) =
                        (name.child_by_field_name("name"), name.child_by_field_name("alias"))
                    else {
                        continue;
                    };
                    let path = self.text(target).to_string();
                    self.bind(self.text(alias).to_string(), path.clone(), name);
                    self.push(FactKind::Import, path, None, name);
                }
                _ => {}
            }
        }
    }

    fn import_from(&mut self, node: Node<'_>) {
        let module = if node.kind() == "future_import_statement" {
            "__future__".to_string()
        } else {
            match node.child_by_field_name("module_name") {
                Some(m) => self.text(m).split_whitespace().collect(),
                None => return,
            }
        };
        let join = |name: &str| {
            if module.ends_with('.') {
                format!("{module}{name}")
            } else {
                format!("{module}.{name}")
            }
        };

        let mut cursor = node.walk();
        let names: Vec<Node<'_>> = node.children_by_field_name("name", &mut cursor).collect();
        for name in names {
            match name.kind() {
                "dotted_name" => {
                    let local = self.text(name).to_string();
                    let path = join(&local);
                    self.bind(local, path.clone(), name);
                    self.push(FactKind::Import, path, None, name);
                }
                "aliased_import" => {
                    let (Some(target), Some(alias)) =
                        (name.child_by_field_name("name"), name.child_by_field_name("alias"))
                    else {
                        continue;
                    };
                    let path = join(self.text(target));
                    self.bind(self.text(alias).to_string(), path.clone(), name);
                    self.push(FactKind::Import, path, None, name);
                }
                _ => {}
            }
        }
        let mut cursor = node.walk();
        let wildcard = node.children(&mut cursor).find(|c| c.kind() == "wildcard_import");
        if let Some(w) = wildcard {
            self.push(FactKind::Import, join("*"), None, w);
        }
    }

    fn bind(&mut self, name: String, target: String, at: Node<'_>) {
        let line = at.start_position().row as u32 + 1;
        self.bindings.push(ImportBinding { name, target, line });
    }

    /// Dotted-name chain (`a.b.c`) or `None` for anything else.
    fn dotted(&self, node: Node<'_>) -> Option<String> {
        match node.kind() {
            "identifier" => Some(self.text(node).to_string()),
            "attribute" => {
                let object = self.dotted(node.child_by_field_name("object")?)?;
                let attr = node.child_by_field_name("attribute")?;
                Some(format!("{object}.{}", self.text(attr)))
            }
            _ => None,
        }
    }

    fn literal(&self, node: Node<'_>) -> Literal {
        match node.kind() {
            "true" => Literal::Bool(true),
            "false" => Literal::Bool(false),
            "none" => Literal::None,
            "integer" => parse_int(self.text(node)),
            "float" => parse_float(self.text(node)),
            "string" => self.string_literal(node),
            "concatenated_string" => {
                let mut cursor = node.walk();
                let mut acc = String::new();
                for part in node.named_children(&mut cursor) {
                    match self.string_literal(part) {
                        Literal::Str(s) => acc.push_str(&s),
                        _ => return Literal::NonLiteral,
                    }
                }
                Literal::Str(acc)
            }
            "unary_operator" => {
                let (Some(op), Some(arg)) = (node.child(0), node.child_by_field_name("argument"))
                else {
                    return Literal::NonLiteral;
                };
                Literal::signed(self.text(op), self.literal(arg))
            }
            "parenthesized_expression" => match node.named_child(0) {
                Some(inner) if node.named_child_count() == 1 => self.literal(inner),
                _ => Literal::NonLiteral,
            },
            _ => Literal::NonLiteral,
        }
    }

    fn string_literal(&self, node: Node<'_>) -> Literal {
        if node.kind() != "string" {
            return Literal::NonLiteral;
        }
        let mut cursor = node.walk();
        if node.named_children(&mut cursor).any(|c| c.kind() == "interpolation") {
            return Literal::NonLiteral;
        }
        decode_string(self.text(node)).map_or(Literal::NonLiteral, Literal::Str)
    }

    fn assignment<'t>(&mut self, node: Node<'t>, next: &mut Vec<Node<'t>>) {
        // `a.b = c.d = 1` nests as assignment(left, right: assignment(...)).
        let mut targets = Vec::new();
        let mut current = node;
        let value = loop {
            if let Some(left) = current.child_by_field_name("left") {
                targets.push(left);
            }
            if let Some(ty) = current.child_by_field_name("type") {
                next.push(ty);
            }
            match current.child_by_field_name("right") {
                Some(r) if r.kind() == "assignment" => current = r,
                other => break other,
            }
        };
        let Some(value) = value else {
            next.extend(targets);
            return;
        };

        for target in &targets {
            self.assign_target(*target, value);
        }
        next.extend(targets);
        next.push(value);
    }

    fn assign_target(&mut self, target: Node<'_>, value: Node<'_>) {
        match target.kind() {
            "attribute" => {
                let Some(path) = self.dotted(target) else { return };
                let lit = self.literal(value);
                let emit = lit.is_literal() || self.dotted(value).is_some();
                if emit {
                    self.push(FactKind::Assign, path, Some(lit), target);
                }
            }
            "subscript" => {
                let Some(base) = target.child_by_field_name("value").and_then(|v| self.dotted(v))
                else {
                    return;
                };
                let key = target
                    .child_by_field_name("subscript")
                    .map(|k| self.literal(k))
                    .and_then(|k| match k {
                        Literal::Str(s) => Some(s),
                        _ => None,
                    });
                let location = self.location(target);
                self.env_candidates.push(EnvCandidate {
                    base,
                    key,
                    value: self.literal(value),
                    location,
                });
            }
            "pattern_list" | "tuple_pattern" | "list_pattern" => {
                let values: Vec<Node<'_>> = match value.kind() {
                    "expression_list" | "tuple" | "list" => {
                        let mut c = value.walk();
                        value.named_children(&mut c).collect()
                    }
                    _ => return,
                };
                let mut c = target.walk();
                let parts: Vec<Node<'_>> = target.named_children(&mut c).collect();
                if parts.len() == values.len() {
                    for (t, v) in parts.into_iter().zip(values) {
                        self.assign_target(t, v);
                    }
                }
            }
            _ => {}
        }
    }

    fn call(&mut self, node: Node<'_>) {
        let Some(callee) = node.child_by_field_name("function").and_then(|f| self.dotted(f)) else {
            return;
        };
        let args = node.child_by_field_name("arguments").filter(|a| a.kind() == "argument_list");
        let mut first_positional = None;
        let mut kwargs = Vec::new();
        if let Some(args) = args {
            let mut cursor = args.walk();
            for arg in args.named_children(&mut cursor) {
                match arg.kind() {
                    "keyword_argument" => {
                        if let (Some(n), Some(v)) =
                            (arg.child_by_field_name("name"), arg.child_by_field_name("value"))
                        {
                            kwargs.push((self.text(n).to_string(), self.literal(v), arg));
                        }
                    }
                    "list_splat" | "dictionary_splat" | "comment" => {}
                    _ if first_positional.is_none() && kwargs.is_empty() => {
                        first_positional = Some(self.literal(arg));
                    }
                    _ => {}
                }
            }
        }
        let value = first_positional.filter(Literal::is_literal);
        self.push(FactKind::Call, callee.clone(), value, node);
        for (name, lit, at) in kwargs {
            self.push(FactKind::KeywordArg, format!("{callee}#{name}"), Some(lit), at);
        }
    }

    /// `{'seed': S}` is treated like `dict(seed=S)`.
    fn dictionary(&mut self, node: Node<'_>) {
        let mut cursor = node.walk();
        let pairs: Vec<Node<'_>> = node.named_children(&mut cursor).filter(|p| p.kind() == "pair").collect();
        for pair in pairs {
            let (Some(k), Some(v)) = (pair.child_by_field_name("key"), pair.child_by_field_name("value"))
            else {
                continue;
            };
            if let Literal::Str(key) = self.literal(k) {
                let lit = self.literal(v);
                self.push(FactKind::KeywordArg, format!("dict#{key}"), Some(lit), pair);
            }
        }
    }

    fn finish(mut self, mut out: FactSet) -> Result<FactSet, FactsError> {
        for cand in std::mem::take(&mut self.env_candidates) {
            let (base, _) = resolve_path(&cand.base, &self.bindings, cand.location.line);
            if base != "os.environ" {
                continue;
            }
            match cand.key {
                Some(key) => self.facts.push(Fact {
                    kind: FactKind::EnvSet,
                    canonical_path: format!("{ENV_PREFIX}{key}"),
                    value: Some(cand.value),
                    location: cand.location,
                    resolved: true,
                }),
                None => self.diagnostics.push(Diagnostic {
                    message: "analysis-opaque construct: environment key is not a string literal"
                        .into(),
                    location: cand.location,
                }),
            }
        }

        for fact in self.facts.iter().filter(|f| f.kind == FactKind::Call) {
            let (path, _) = resolve_path(&fact.canonical_path, &self.bindings, fact.location.line);
            if OPAQUE_CALLS.contains(&path.as_str()) {
                self.diagnostics.push(Diagnostic {
                    message: format!("analysis-opaque construct: `{path}(...)` is not resolved statically"),
                    location: fact.location.clone(),
                });
            }
        }

        // Stable: ties keep emission order.
        self.facts.sort_by(|a, b| {
            (a.location.line, a.location.column).cmp(&(b.location.line, b.location.column))
        });
        self.diagnostics.sort_by(|a, b| {
            (a.location.line, a.location.column).cmp(&(b.location.line, b.location.column))
        });

        out.imported_libraries = self
            .facts
            .iter()
            .filter(|f| f.kind == FactKind::Import)
            .map(|f| top_level_module(&f.canonical_path).to_string())
            .collect::<BTreeSet<_>>();
        out.facts = self.facts;
        out.bindings = self.bindings;
        out.parse_diagnostics = self.diagnostics;
        Ok(out)
    }
}
