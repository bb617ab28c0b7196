use serde::{Deserialize, Serialize};

use crate::SamplerError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub input: String,
    pub script: String,
}

/// Few-shot prompt: each example is `input + intra + script`, examples are
/// joined by `inter`, and the test input follows with a trailing `intra` so
/// the model continues with a script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub few_shot: Vec<FewShot>,
    pub test_input: String,
    #[serde(default = "default_intra")]
    pub intra_separator: String,
    #[serde(default = "default_inter")]
    pub inter_separator: String,
}

fn default_intra() -> String {
    "\n".into()
}

fn default_inter() -> String {
    "\n\n\n".into()
}

impl PromptSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SamplerError> {
        toml::from_str(text).map_err(|e| SamplerError::Config(format!("prompt spec: {e}")))
    }

    /// Separators must be non-empty and must not occur inside any text, so
    /// the assembled prompt can be split back into its parts.
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.few_shot.is_empty() {
            return Err(SamplerError::Config("prompt spec needs at least one few-shot example".into()));
        }
        if self.intra_separator.is_empty() || self.inter_separator.is_empty() {
            return Err(SamplerError::Config("separators must be non-empty".into()));
        }
        if self.inter_separator.contains(&self.intra_separator) && self.intra_separator.contains(&self.inter_separator) {
            return Err(SamplerError::Config("intra and inter separators must differ".into()));
        }
        let texts = self
            .few_shot
            .iter()
            .enumerate()
            .flat_map(|(i, f)| [(format!("few_shot[{i}].input"), &f.input), (format!("few_shot[{i}].script"), &f.script)])
            .chain(std::iter::once(("test_input".to_string(), &self.test_input)));
        for (name, text) in texts {
            if text.contains(&self.inter_separator) {
                return Err(SamplerError::Config(format!("{name} contains the inter-instance separator")));
            }
            if name.ends_with("input") && text.contains(&self.intra_separator) {
                return Err(SamplerError::Config(format!("{name} contains the intra-instance separator")));
            }
        }
        Ok(())
    }
}

pub fn build_prompt(spec: &PromptSpec) -> Result<String, SamplerError> {
    spec.validate()?;
    let mut out = String::new();
    for f in &spec.few_shot {
        out.push_str(&f.input);
        out.push_str(&spec.intra_separator);
        out.push_str(&f.script);
        out.push_str(&spec.inter_separator);
    }
    out.push_str(&spec.test_input);
    out.push_str(&spec.intra_separator);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> PromptSpec {
        PromptSpec {
            few_shot: (0..n)
                .map(|i| FewShot { input: format!("text {i}"), script: format!("a{i} = Claim(\"x\")\nb{i} = Premise(\"y\")") })
                .collect(),
            test_input: "test text".into(),
            intra_separator: "\n".into(),
            inter_separator: "\n\n\n".into(),
        }
    }

    #[test]
    fn layout() {
        let p = build_prompt(&spec(2)).unwrap();
        assert_eq!(p.matches("\n\n\n").count(), 2);
        assert!(p.starts_with("text 0\na0 = Claim"));
        assert!(p.ends_with("\n\n\ntest text\n"));
        assert_eq!(p, build_prompt(&spec(2)).unwrap());
    }

    #[test]
    fn empty_few_shot_is_config_error() {
        assert!(matches!(build_prompt(&spec(0)), Err(SamplerError::Config(_))));
    }

    #[test]
    fn separators_inside_texts_are_rejected() {
        let mut s = spec(1);
        s.few_shot[0].script.push_str("\n\n\n");
        assert!(build_prompt(&s).is_err());
        let mut s = spec(1);
        s.test_input = "two\nlines".into();
        assert!(build_prompt(&s).is_err());
    }

    #[test]
    fn distinct_orderings_give_distinct_prompts() {
        let s = spec(3);
        let mut rev = s.clone();
        rev.few_shot.reverse();
        assert_ne!(build_prompt(&s).unwrap(), build_prompt(&rev).unwrap());
    }

    #[test]
    fn toml_spec() {
        let text = r#"
            test_input = "Cloning is wrong."
            [[few_shot]]
            input = "Guns should be banned."
            script = 'c = Claim("guns should be banned")'
        "#;
        let s = PromptSpec::from_toml_str(text).unwrap();
        assert_eq!(s.intra_separator, "\n");
        assert!(build_prompt(&s).unwrap().ends_with("Cloning is wrong.\n"));
    }
}
