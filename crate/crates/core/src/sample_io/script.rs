//! Line-pattern parser for graphs written as programming scripts.
//!
//! Each line is classified as a node declaration, an edge declaration, a type
//! annotation, ignorable boilerplate, or unrecognized. Unrecognized lines are
//! skipped and counted. Patterns are regular expressions with named groups:
//!
//! * `node_pattern`: `var`, `content`, optional `type`
//! * `edge_pattern`: `head`, `tail`, optional `type`
//! * `type_pattern`: `var`, `type`

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, NodeId};

/// How edge declarations refer to their endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EndpointRef {
    /// Endpoints are variable names bound by node declarations.
    #[default]
    Variable,
    /// Endpoints are node contents; nodes are created on first mention.
    Content,
}

/// Declarative dialect description, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialectSpec {
    pub name: String,
    #[serde(default)]
    pub node_pattern: Option<String>,
    pub edge_pattern: String,
    #[serde(default)]
    pub type_pattern: Option<String>,
    #[serde(default)]
    pub ignore_patterns: Vec<String>,
    #[serde(default)]
    pub edge_endpoints: EndpointRef,
    #[serde(default)]
    pub default_node_type: String,
    #[serde(default = "default_edge_type")]
    pub default_edge_type: String,
    /// Rewrites of captured edge types, e.g. `supports -> support`.
    #[serde(default)]
    pub edge_type_aliases: BTreeMap<String, String>,
}

fn default_edge_type() -> String {
    "relation".to_string()
}

#[derive(Debug, Error)]
pub enum DialectError {
    #[error("dialect `{dialect}`: bad {field}: {source}")]
    Pattern {
        dialect: String,
        field: &'static str,
        #[source]
        source: regex::Error,
    },
    #[error("dialect `{dialect}`: {field} lacks named group `{group}`")]
    MissingGroup { dialect: String, field: &'static str, group: &'static str },
    #[error("unknown built-in dialect `{0}`")]
    UnknownBuiltin(String),
    #[error("dialect file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no node or edge declarations recognized ({skipped} unrecognized lines)")]
pub struct ParseError {
    pub skipped: usize,
}

/// A compiled dialect.
#[derive(Debug, Clone)]
pub struct ScriptDialect {
    spec: DialectSpec,
    node: Option<Regex>,
    edge: Regex,
    type_ann: Option<Regex>,
    ignore: Vec<Regex>,
}

const COMMON_IGNORES: &[&str] = &[
    r"^\s*(#.*)?$",
    r"^\s*(class|def|return|import|from|pass|if|else|for|with)\b.*$",
    r"^\s*[\[\]\(\)\{\},:]*\s*$",
    r#"^\s*(```|""").*$"#,
    r"^\s*(begin|end|self\.\w+\s*=\s*\[\s*)\s*$",
];

impl ScriptDialect {
    pub fn compile(spec: DialectSpec) -> Result<Self, DialectError> {
        let compile = |field: &'static str, pat: &str| {
            Regex::new(pat).map_err(|source| DialectError::Pattern { dialect: spec.name.clone(), field, source })
        };
        let require = |field: &'static str, re: &Regex, groups: &[&'static str]| {
            for &group in groups {
                if !re.capture_names().flatten().any(|n| n == group) {
                    return Err(DialectError::MissingGroup { dialect: spec.name.clone(), field, group });
                }
            }
            Ok(())
        };
        let node = match &spec.node_pattern {
            Some(p) => {
                let re = compile("node_pattern", p)?;
                require("node_pattern", &re, &["var", "content"])?;
                Some(re)
            }
            None => None,
        };
        let edge = compile("edge_pattern", &spec.edge_pattern)?;
        require("edge_pattern", &edge, &["head", "tail"])?;
        let type_ann = match &spec.type_pattern {
            Some(p) => {
                let re = compile("type_pattern", p)?;
                require("type_pattern", &re, &["var", "type"])?;
                Some(re)
            }
            None => None,
        };
        let ignore = spec
            .ignore_patterns
            .iter()
            .map(|p| compile("ignore_patterns", p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { spec, node, edge, type_ann, ignore })
    }

    pub fn spec(&self) -> &DialectSpec {
        &self.spec
    }

    pub fn from_toml_str(text: &str) -> Result<Self, DialectError> {
        let spec: DialectSpec = toml::from_str(text)
            .map_err(|e| DialectError::File { path: "<string>".into(), message: e.to_string() })?;
        Self::compile(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DialectError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DialectError::File { path: path.display().to_string(), message: e.to_string() })?;
        let spec: DialectSpec = toml::from_str(&text)
            .map_err(|e| DialectError::File { path: path.display().to_string(), message: e.to_string() })?;
        Self::compile(spec)
    }

    /// A built-in dialect name, or else a path to a TOML dialect file.
    pub fn resolve(name_or_path: &str) -> Result<Self, DialectError> {
        match Self::builtin(name_or_path) {
            Ok(d) => Ok(d),
            Err(DialectError::UnknownBuiltin(_)) if Path::new(name_or_path).exists() => {
                Self::from_file(name_or_path)
            }
            Err(e) => Err(e),
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["argmine", "proscript", "explagraph", "semgraph"]
    }

    pub fn builtin(name: &str) -> Result<Self, DialectError> {
        let ignores = || COMMON_IGNORES.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let spec = match name {
            // claim_1 = Claim("...")  /  premise_1.supports(claim_1)
            "argmine" => DialectSpec {
                name: name.into(),
                node_pattern: Some(
                    r#"^\s*(?P<var>[A-Za-z_]\w*)\s*=\s*(?P<type>[A-Za-z_]\w*)\(\s*["'](?P<content>.*)["']\s*\)\s*$"#.into(),
                ),
                edge_pattern: r"^\s*(?P<head>[A-Za-z_]\w*)\.(?P<type>[A-Za-z_]\w*)\(\s*(?P<tail>[A-Za-z_]\w*)\s*\)\s*$".into(),
                type_pattern: Some(r#"^\s*(?P<var>[A-Za-z_]\w*)\.type\s*=\s*["'](?P<type>[^"']*)["']\s*$"#.into()),
                ignore_patterns: ignores(),
                edge_endpoints: EndpointRef::Variable,
                default_node_type: String::new(),
                default_edge_type: "support".into(),
                edge_type_aliases: [("supports", "support"), ("attacks", "attack")]
                    .into_iter()
                    .map(|(a, b)| (a.to_string(), b.to_string()))
                    .collect(),
            },
            // step0 = "find a recipe"  /  "step0 -> step1",
            "proscript" => DialectSpec {
                name: name.into(),
                node_pattern: Some(r#"^\s*(?P<var>step\w*)\s*=\s*["'](?P<content>.*)["']\s*,?\s*$"#.into()),
                edge_pattern: r#"^\s*["']?\s*(?P<head>step\w*)\s*->\s*(?P<tail>step\w*)\s*["']?\s*,?\s*$"#.into(),
                type_pattern: None,
                ignore_patterns: ignores(),
                edge_endpoints: EndpointRef::Variable,
                default_node_type: "step".into(),
                default_edge_type: "before".into(),
                edge_type_aliases: BTreeMap::new(),
            },
            // add_edge("factory farming", "capable of", "feeds millions")
            "explagraph" => DialectSpec {
                name: name.into(),
                node_pattern: None,
                edge_pattern: r#"^\s*(?:self\.)?add_edge\(\s*["'](?P<head>[^"']+)["']\s*,\s*["'](?P<type>[^"']+)["']\s*,\s*["'](?P<tail>[^"']+)["']\s*\)\s*,?\s*$"#.into(),
                type_pattern: None,
                ignore_patterns: ignores(),
                edge_endpoints: EndpointRef::Content,
                default_node_type: "concept".into(),
                default_edge_type: "relation".into(),
                edge_type_aliases: BTreeMap::new(),
            },
            // ("Mermaid Train song", "genre", "Pop rock"),
            "semgraph" => DialectSpec {
                name: name.into(),
                node_pattern: None,
                edge_pattern: r#"^\s*\(\s*["'](?P<head>[^"']+)["']\s*,\s*["'](?P<type>[^"']+)["']\s*,\s*["'](?P<tail>[^"']+)["']\s*\)\s*,?\s*$"#.into(),
                type_pattern: None,
                ignore_patterns: ignores(),
                edge_endpoints: EndpointRef::Content,
                default_node_type: "entity".into(),
                default_edge_type: "relation".into(),
                edge_type_aliases: BTreeMap::new(),
            },
            other => return Err(DialectError::UnknownBuiltin(other.to_string())),
        };
        Self::compile(spec)
    }

    fn edge_type(&self, captured: Option<&str>) -> String {
        match captured.map(str::trim).filter(|s| !s.is_empty()) {
            Some(t) => self.spec.edge_type_aliases.get(t).cloned().unwrap_or_else(|| t.to_string()),
            None => self.spec.default_edge_type.clone(),
        }
    }
}

/// Result of parsing one completion.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScript {
    pub graph: Graph,
    /// 1-based numbers of unrecognized lines.
    pub skipped_lines: Vec<usize>,
    /// Variables referenced by edges without a declaration; each became a node
    /// whose content is the variable name and whose type is empty.
    pub implicit_nodes: Vec<String>,
}

impl ParsedScript {
    pub fn skipped(&self) -> usize {
        self.skipped_lines.len()
    }
}

struct Builder<'d> {
    dialect: &'d ScriptDialect,
    graph: Graph,
    by_content: HashMap<String, NodeId>,
    by_var: HashMap<String, NodeId>,
    implicit: Vec<String>,
}

impl Builder<'_> {
    fn node_for_content(&mut self, content: &str, node_type: &str) -> NodeId {
        if let Some(&id) = self.by_content.get(content) {
            return id;
        }
        let id = self.graph.add_node(content, node_type);
        self.by_content.insert(content.to_string(), id);
        id
    }

    fn endpoint(&mut self, name: &str) -> NodeId {
        match self.dialect.spec.edge_endpoints {
            EndpointRef::Content => {
                let ty = self.dialect.spec.default_node_type.clone();
                self.node_for_content(name, &ty)
            }
            EndpointRef::Variable => {
                if let Some(&id) = self.by_var.get(name) {
                    return id;
                }
                let id = self.node_for_content(name, "");
                self.by_var.insert(name.to_string(), id);
                self.implicit.push(name.to_string());
                id
            }
        }
    }
}

/// Parses one completion into a graph.
///
/// Nodes with identical content collapse into one; a repeated `(head, tail)`
/// edge keeps its first type. Fails only when nothing was recognized.
pub fn parse_script(text: &str, dialect: &ScriptDialect) -> Result<ParsedScript, ParseError> {
    let mut b = Builder {
        dialect,
        graph: Graph::new(),
        by_content: HashMap::new(),
        by_var: HashMap::new(),
        implicit: Vec::new(),
    };
    let mut skipped = Vec::new();
    let mut recognized = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if let Some(caps) = dialect.node.as_ref().and_then(|re| re.captures(line)) {
            let content = caps["content"].trim();
            if !content.is_empty() {
                let ty = caps
                    .name("type")
                    .map(|m| m.as_str().to_string())
                    .unwrap_or_else(|| dialect.spec.default_node_type.clone());
                let id = b.node_for_content(content, &ty);
                b.by_var.insert(caps["var"].to_string(), id);
                recognized += 1;
                continue;
            }
        }
        if let Some(caps) = dialect.edge.captures(line) {
            let head = b.endpoint(caps["head"].trim());
            let tail = b.endpoint(caps["tail"].trim());
            let ty = dialect.edge_type(caps.name("type").map(|m| m.as_str()));
            if !b.graph.has_edge(head, tail) {
                b.graph.add_edge(head, tail, ty);
            }
            recognized += 1;
            continue;
        }
        if let Some(caps) = dialect.type_ann.as_ref().and_then(|re| re.captures(line)) {
            if let Some(&id) = b.by_var.get(&caps["var"]) {
                if let Some(node) = b.graph.nodes.iter_mut().find(|n| n.id == id) {
                    node.node_type = caps["type"].to_string();
                }
                recognized += 1;
                continue;
            }
        }
        if dialect.ignore.iter().any(|re| re.is_match(line)) {
            continue;
        }
        skipped.push(lineno + 1);
    }

    if recognized == 0 || (b.graph.nodes.is_empty() && b.graph.edges.is_empty()) {
        return Err(ParseError { skipped: skipped.len() });
    }
    Ok(ParsedScript { graph: b.graph, skipped_lines: skipped, implicit_nodes: b.implicit })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARG_SCRIPT: &str = r#"class Essay:
    def __init__(self):
        claim_1 = Claim("cloning will be beneficial for many people who are in need of organ transplants")
        premise_1 = Premise("cloned organs will match perfectly to the blood group and tissue of patients")
        premise_1.supports(claim_1)
"#;

    fn argmine() -> ScriptDialect {
        ScriptDialect::builtin("argmine").unwrap()
    }

    #[test]
    fn two_declarations_one_edge() {
        let parsed = parse_script(ARG_SCRIPT, &argmine()).unwrap();
        let g = &parsed.graph;
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(parsed.skipped(), 0);
        assert_eq!(g.nodes[0].node_type, "Claim");
        assert_eq!(g.nodes[1].node_type, "Premise");
        let e = &g.edges[0];
        assert_eq!((e.head, e.tail), (g.nodes[1].id, g.nodes[0].id));
        assert_eq!(e.edge_type, "support");
    }

    #[test]
    fn empty_string_fails() {
        assert_eq!(parse_script("", &argmine()), Err(ParseError { skipped: 0 }));
    }

    #[test]
    fn malformed_middle_line_is_skipped() {
        let text = "a = Claim(\"first claim here\")\nthis is ((( not code\nb = Premise(\"second premise here\")\n";
        let parsed = parse_script(text, &argmine()).unwrap();
        assert_eq!(parsed.graph.nodes.len(), 2);
        assert_eq!(parsed.skipped_lines, vec![2]);
    }

    #[test]
    fn trailing_whitespace_is_ignored() {
        let padded: String = ARG_SCRIPT.lines().map(|l| format!("{l}   \t\n")).collect();
        assert_eq!(parse_script(&padded, &argmine()), parse_script(ARG_SCRIPT, &argmine()));
    }

    #[test]
    fn duplicate_contents_collapse() {
        let text = "a = Claim(\"same text\")\nb = Claim(\"same text\")\nc = Premise(\"other\")\nc.supports(b)\n";
        let parsed = parse_script(text, &argmine()).unwrap();
        assert_eq!(parsed.graph.nodes.len(), 2);
        assert_eq!(parsed.graph.edges[0].tail, parsed.graph.nodes[0].id);
    }

    #[test]
    fn undeclared_variable_becomes_implicit_node() {
        let text = "a = Claim(\"a claim\")\nghost.attacks(a)\n";
        let parsed = parse_script(text, &argmine()).unwrap();
        assert_eq!(parsed.implicit_nodes, vec!["ghost".to_string()]);
        let ghost = parsed.graph.nodes.iter().find(|n| n.content == "ghost").unwrap();
        assert_eq!(ghost.node_type, "");
        assert_eq!(parsed.graph.edges[0].edge_type, "attack");
    }

    #[test]
    fn type_annotation_overrides() {
        let text = "a = Node(\"x y\")\na.type = \"MajorClaim\"\n";
        let parsed = parse_script(text, &argmine()).unwrap();
        assert_eq!(parsed.graph.nodes[0].node_type, "MajorClaim");
    }

    #[test]
    fn proscript_dialect() {
        let text = r#"class BakeACake:
    goal = "bake a cake"
    step0 = "find a recipe"
    step1 = "buy ingredients"
    step2 = "bake the cake"
    def get_relations(self):
        return [
            "step0 -> step1",
            "step1 -> step2",
        ]
"#;
        let d = ScriptDialect::builtin("proscript").unwrap();
        let parsed = parse_script(text, &d).unwrap();
        assert_eq!(parsed.graph.nodes.len(), 3);
        assert_eq!(parsed.graph.edges.len(), 2);
        // `goal = ...` is not a step declaration.
        assert_eq!(parsed.skipped_lines, vec![2]);
    }

    #[test]
    fn explagraph_and_semgraph_dialects() {
        let d = ScriptDialect::builtin("explagraph").unwrap();
        let text = "add_edge(\"factory farming\", \"capable of\", \"food\")\nadd_edge(\"food\", \"used for\", \"millions\")\n";
        let g = parse_script(text, &d).unwrap().graph;
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);

        let d = ScriptDialect::builtin("semgraph").unwrap();
        let text = "[\n(\"Mermaid Train song\", \"genre\", \"Pop rock\"),\n(\"Mermaid Train song\", \"genre\", \"Reggae\"),\n]\n";
        let g = parse_script(text, &d).unwrap().graph;
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges[1].edge_type, "genre");
    }

    #[test]
    fn dialect_from_toml() {
        let text = r#"
name = "arrows"
node_pattern = '^(?P<var>\w+): (?P<content>.+)$'
edge_pattern = '^(?P<head>\w+) => (?P<tail>\w+)$'
default_edge_type = "leads_to"
"#;
        let d = ScriptDialect::from_toml_str(text).unwrap();
        let g = parse_script("a: first\nb: second\na => b\n", &d).unwrap().graph;
        assert_eq!(g.edges[0].edge_type, "leads_to");
    }

    #[test]
    fn pattern_without_required_group_is_rejected() {
        let text = "name = \"bad\"\nedge_pattern = '^(?P<head>\\w+)$'\n";
        assert!(matches!(
            ScriptDialect::from_toml_str(text),
            Err(DialectError::MissingGroup { group: "tail", .. })
        ));
    }
}
