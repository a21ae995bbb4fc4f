//! Condition/action graphs compiled from tagged spans.
//!
//! A registry of templates maps an exact tag set to a node layout. When no
//! template covers the tag set of an annotation the result is the empty
//! graph; a partial graph is never produced.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, TagType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NodeKind {
    Condition,
    Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EdgeLabel {
    True,
    False,
    Next,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub text: String,
    pub tag: TagType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecompositionGraph {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("invalid graph JSON: {0}")]
    Json(String),
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("edge references unknown node {0:?}")]
    DanglingEdge(String),
    #[error("graph contains a cycle")]
    Cycle,
    #[error("templates {0:?} and {1:?} require the same tag set")]
    AmbiguousTemplates(String, String),
    #[error("template {0:?} is inconsistent: {1}")]
    BadTemplate(String, String),
}

impl DecompositionGraph {
    /// The non-match result.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_for(&self, tag: TagType) -> Option<&Node> {
        self.nodes.iter().find(|n| n.tag == tag)
    }

    /// Unique ids, no dangling edges, no cycles.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id.as_str()) {
                return Err(GraphError::DuplicateNode(n.id.clone()));
            }
        }
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !ids.contains(end.as_str()) {
                    return Err(GraphError::DanglingEdge(end.clone()));
                }
            }
        }
        if !self.is_acyclic() {
            return Err(GraphError::Cycle);
        }
        Ok(())
    }

    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm over node indices
        let index = |id: &str| self.nodes.iter().position(|n| n.id == id);
        let mut indegree = vec![0usize; self.nodes.len()];
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if let (Some(f), Some(t)) = (index(&e.from), index(&e.to)) {
                adj[f].push(t);
                indegree[t] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..self.nodes.len()).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop() {
            seen += 1;
            for &t in &adj[i] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    queue.push(t);
                }
            }
        }
        seen == self.nodes.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let g: DecompositionGraph = serde_json::from_str(s).map_err(|e| GraphError::Json(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    /// Graphviz rendering: conditions as diamonds, actions as boxes.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph decomposition {\n  rankdir=LR;\n");
        for n in &self.nodes {
            let shape = match n.kind {
                NodeKind::Condition => "diamond",
                NodeKind::Action => "box",
            };
            let _ = writeln!(
                out,
                "  {} [label=\"{}: {}\", shape={}];",
                dot_id(&n.id),
                n.tag,
                dot_escape(&n.text),
                shape
            );
        }
        for e in &self.edges {
            let label = match e.label {
                EdgeLabel::True => "TRUE",
                EdgeLabel::False => "FALSE",
                EdgeLabel::Next => "NEXT",
            };
            let _ = writeln!(out, "  {} -> {} [label=\"{}\"];", dot_id(&e.from), dot_id(&e.to), label);
        }
        out.push_str("}\n");
        out
    }
}

fn dot_id(id: &str) -> String {
    format!("\"{}\"", dot_escape(id))
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

/// Node layout for one exact tag set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphTemplate {
    pub id: String,
    /// One node per entry, in output order.
    pub nodes: Vec<(TagType, NodeKind)>,
    pub edges: Vec<(TagType, TagType, EdgeLabel)>,
}

impl GraphTemplate {
    pub fn required(&self) -> BTreeSet<TagType> {
        self.nodes.iter().map(|(t, _)| *t).collect()
    }

    fn conditional(id: &str, alt: bool) -> Self {
        let mut nodes = vec![(TagType::Cnd, NodeKind::Condition), (TagType::Csq, NodeKind::Action)];
        let mut edges = vec![(TagType::Cnd, TagType::Csq, EdgeLabel::True)];
        if alt {
            nodes.push((TagType::Alt, NodeKind::Action));
            edges.push((TagType::Cnd, TagType::Alt, EdgeLabel::False));
        }
        GraphTemplate { id: id.into(), nodes, edges }
    }

    fn sequence(id: &str, tags: &[TagType]) -> Self {
        GraphTemplate {
            id: id.into(),
            nodes: tags.iter().map(|&t| (t, NodeKind::Action)).collect(),
            edges: tags.windows(2).map(|w| (w[0], w[1], EdgeLabel::Next)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateRegistry {
    templates: Vec<GraphTemplate>,
}

impl TemplateRegistry {
    /// Rejects templates whose tag sets collide or whose edges mention tags
    /// outside the layout.
    pub fn new(templates: Vec<GraphTemplate>) -> Result<Self, GraphError> {
        for (i, t) in templates.iter().enumerate() {
            let req = t.required();
            if req.len() != t.nodes.len() {
                return Err(GraphError::BadTemplate(t.id.clone(), "a tag appears twice".into()));
            }
            if let Some((a, b, _)) = t.edges.iter().find(|(a, b, _)| !req.contains(a) || !req.contains(b)) {
                return Err(GraphError::BadTemplate(t.id.clone(), format!("edge {}->{} leaves the layout", a, b)));
            }
            if let Some(other) = templates[..i].iter().find(|o| o.required() == req) {
                return Err(GraphError::AmbiguousTemplates(other.id.clone(), t.id.clone()));
            }
        }
        Ok(TemplateRegistry { templates })
    }

    pub fn templates(&self) -> &[GraphTemplate] {
        &self.templates
    }
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        use TagType::*;
        TemplateRegistry::new(vec![
            GraphTemplate::conditional("conditional", false),
            GraphTemplate::conditional("conditional-alternative", true),
            GraphTemplate::sequence("sequence-2", &[Fa, Sa]),
            GraphTemplate::sequence("sequence-3", &[Fa, Sa, Ta]),
        ])
        .expect("shipped templates are consistent")
    }
}

/// Maps the spans of `annotations` onto the first template whose tag set
/// equals theirs. Returns the empty graph when none does, or when a tag
/// occurs more than once (no one-to-one mapping exists).
pub fn create_graph(annotations: &AnnotationSet, registry: &TemplateRegistry) -> DecompositionGraph {
    let spans: Vec<_> = annotations.payload_spans().collect();
    let tags: BTreeSet<TagType> = spans.iter().map(|s| s.tag).collect();
    if tags.len() != spans.len() || tags.is_empty() {
        return DecompositionGraph::empty();
    }
    let Some(template) = registry.templates.iter().find(|t| t.required() == tags) else {
        return DecompositionGraph::empty();
    };
    let id_of = |tag: TagType| {
        let pos = template.nodes.iter().position(|(t, _)| *t == tag).expect("tag in layout");
        format!("n{}", pos)
    };
    let nodes = template
        .nodes
        .iter()
        .map(|&(tag, kind)| {
            let span = spans.iter().find(|s| s.tag == tag).expect("tag sets are equal");
            Node { id: id_of(tag), kind, text: annotations.span_text(span).to_string(), tag }
        })
        .collect();
    let edges = template
        .edges
        .iter()
        .map(|&(from, to, label)| Edge { from: id_of(from), to: id_of(to), label })
        .collect();
    DecompositionGraph { template: Some(template.id.clone()), nodes, edges }
}
