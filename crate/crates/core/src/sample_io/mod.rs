//! Reading and writing graphs and sample sets, and parsing script completions.

mod json;
mod script;

pub use json::{
    graph_to_json, read_graph, read_graphs, read_samples, write_graph, write_json, write_samples, Reject,
    SampleIoError, SampleSet, SampleSource,
};
pub use script::{
    parse_script, DialectError, DialectSpec, EndpointRef, ParseError, ParsedScript, ScriptDialect,
};

/// Parses raw completions into a [`SampleSet`]. Completions that fail to parse
/// are recorded as rejects and excluded, so T counts parsed samples only.
pub fn parse_completions<S: AsRef<str>>(completions: &[S], dialect: &ScriptDialect) -> SampleSet {
    let mut set = SampleSet::default();
    for (index, text) in completions.iter().enumerate() {
        match parse_script(text.as_ref(), dialect) {
            Ok(parsed) => {
                let skipped = parsed.skipped();
                let mut g = parsed.graph;
                if skipped > 0 {
                    g.meta.insert("skipped_lines".into(), skipped.into());
                }
                if !parsed.implicit_nodes.is_empty() {
                    g.meta.insert("implicit_nodes".into(), parsed.implicit_nodes.into());
                }
                set.samples.push(g);
            }
            Err(e) => set.rejects.push(Reject { index, reason: e.to_string() }),
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_completions_are_rejected_not_counted() {
        let d = ScriptDialect::builtin("argmine").unwrap();
        let completions = ["a = Claim(\"x\")", "garbage !!", "b = Premise(\"y\")\n???"];
        let set = parse_completions(&completions, &d);
        assert_eq!(set.len(), 2);
        assert_eq!(set.rejects.len(), 1);
        assert_eq!(set.rejects[0].index, 1);
        assert_eq!(set.samples[1].meta["skipped_lines"], 1);
    }
}
